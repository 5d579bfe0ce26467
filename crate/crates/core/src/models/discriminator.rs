use rand::Rng;

use super::batch::SceneBatch;
use super::net::Encoder;
use super::{leaf_steps, DiscriminatorConfig};
use crate::error::{Error, Result};
use crate::nn::{Bound, Graph, Linear, ParamStore, Var};

/// Encoder plus classifier head; scores full-length trajectories.
#[derive(Debug, Clone)]
pub struct DiscriminatorModel {
    pub store: ParamStore,
    pub encoder: Encoder,
    pub hidden: Linear,
    pub head: Linear,
    pub cfg: DiscriminatorConfig,
    pub t_pred: usize,
}

impl DiscriminatorModel {
    pub fn new<R: Rng + ?Sized>(cfg: &DiscriminatorConfig, t_pred: usize, rng: &mut R) -> Self {
        let mut store = ParamStore::new();
        let encoder = Encoder::new(&mut store, "encoder", &cfg.encoder, rng);
        let hidden = Linear::new(
            &mut store,
            "classifier.0",
            cfg.encoder.hidden_dim,
            cfg.mlp_dim,
            rng,
        );
        let head = Linear::new(&mut store, "classifier.1", cfg.mlp_dim, 1, rng);
        Self {
            store,
            encoder,
            hidden,
            head,
            cfg: *cfg,
            t_pred,
        }
    }

    pub fn params(&self) -> &ParamStore {
        &self.store
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    /// `n x 1` realism scores in `(0, 1)`. Only full `t_pred`-length input
    /// is accepted.
    pub fn discriminate_graph(&self, g: &mut Graph, p: &Bound, traj: &[Var]) -> Result<Var> {
        if traj.len() != self.t_pred {
            return Err(Error::Contract(format!(
                "discriminator scores full trajectories of {} points, got {}",
                self.t_pred,
                traj.len()
            )));
        }
        let h = self.encoder.encode(g, p, traj)?;
        let z = self.hidden.forward(g, p, h)?;
        let z = g.relu(z);
        let logit = self.head.forward(g, p, z)?;
        Ok(g.sigmoid(logit))
    }

    pub fn discriminate(&self, traj: &SceneBatch) -> Result<Vec<f64>> {
        let mut g = Graph::new();
        let p = self.store.bind(&mut g);
        let steps = leaf_steps(&mut g, &traj.steps);
        let s = self.discriminate_graph(&mut g, &p, &steps)?;
        Ok(g.value(s).data().to_vec())
    }
}
