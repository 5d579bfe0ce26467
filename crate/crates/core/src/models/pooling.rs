use rand::Rng;

use super::batch::PairIndex;
use super::PoolConfig;
use crate::error::{Error, Result};
use crate::nn::{Bound, Graph, ParamStore, ReluMlp, Var};

/// Social pooling: for pedestrian `i`, every neighbor `j` contributes
/// `mlp([embed(pos_j - pos_i), h_j])`; contributions are max-pooled.
/// A pedestrian without neighbors gets the zero vector.
#[derive(Debug, Clone)]
pub struct PoolingModule {
    pub rel_embed: ReluMlp,
    pub mlp: ReluMlp,
    pub hidden_dim: usize,
    pub out_dim: usize,
}

impl PoolingModule {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        cfg: &PoolConfig,
        hidden_dim: usize,
        rng: &mut R,
    ) -> Self {
        let rel_embed = ReluMlp::new(
            store,
            &format!("{name}.rel_embed"),
            &[2, cfg.embed_dim],
            rng,
        );
        let mlp = ReluMlp::new(
            store,
            &format!("{name}.mlp"),
            &[cfg.embed_dim + hidden_dim, cfg.out_dim],
            rng,
        );
        Self {
            rel_embed,
            mlp,
            hidden_dim,
            out_dim: cfg.out_dim,
        }
    }

    /// `hidden`: `n x hidden_dim`; `positions`: `n x 2` in a frame shared by
    /// all pedestrians of a scene. Returns `n x out_dim`.
    pub fn pool(
        &self,
        g: &mut Graph,
        p: &Bound,
        hidden: Var,
        positions: Var,
        pairs: &PairIndex,
    ) -> Result<Var> {
        let n = g.value(hidden).rows();
        if n == 0 {
            return Err(Error::Argument(
                "pooling over an empty pedestrian set".into(),
            ));
        }
        if g.value(positions).rows() != n || pairs.groups.len() != n {
            return Err(Error::Shape(format!(
                "pool: {n} hidden rows, {:?} positions, {} pair groups",
                g.value(positions).shape(),
                pairs.groups.len()
            )));
        }
        let pos_i = g.gather_rows(positions, &pairs.src)?;
        let pos_j = g.gather_rows(positions, &pairs.nbr)?;
        let rel = g.sub(pos_j, pos_i)?;
        let e = self.rel_embed.forward(g, p, rel)?;
        let h_j = g.gather_rows(hidden, &pairs.nbr)?;
        let cat = g.concat_cols(&[e, h_j])?;
        let m = self.mlp.forward(g, p, cat)?;
        g.segment_max(m, &pairs.groups)
    }
}
