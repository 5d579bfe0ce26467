use rand::Rng;

use super::batch::{PairIndex, SceneBatch};
use super::pooling::PoolingModule;
use super::{leaf_steps, step_values, DecoderConfig, EncoderConfig, NetConfig};
use crate::error::{Error, Result};
use crate::nn::{Bound, Graph, Linear, LstmCell, ParamStore, ReluMlp, Tensor, Var};

/// Per-pedestrian ReLU embedding of `(x, y)` followed by an LSTM.
#[derive(Debug, Clone)]
pub struct Encoder {
    pub embed: ReluMlp,
    pub cell: LstmCell,
    pub cfg: EncoderConfig,
}

impl Encoder {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        cfg: &EncoderConfig,
        rng: &mut R,
    ) -> Self {
        let embed = ReluMlp::new(store, &format!("{name}.embed"), &[2, cfg.embed_dim], rng);
        let cell = LstmCell::new(
            store,
            &format!("{name}.lstm"),
            cfg.embed_dim,
            cfg.hidden_dim,
            rng,
        );
        Self {
            embed,
            cell,
            cfg: *cfg,
        }
    }

    /// Runs the recurrence from zero state over `steps` (`n x 2` each) and
    /// returns the final hidden state, `n x hidden_dim`.
    pub fn encode(&self, g: &mut Graph, p: &Bound, steps: &[Var]) -> Result<Var> {
        let Some(&first) = steps.first() else {
            return Err(Error::Argument("encode: empty sequence".into()));
        };
        let n = g.value(first).rows();
        for &s in steps {
            if g.value(s).shape() != [n, 2] {
                return Err(Error::Shape(format!(
                    "encode: step of shape {:?}, expected [{n}, 2]",
                    g.value(s).shape()
                )));
            }
        }
        let mut h = g.leaf(Tensor::zeros(&[n, self.cfg.hidden_dim]));
        let mut c = g.leaf(Tensor::zeros(&[n, self.cfg.hidden_dim]));
        for &x in steps {
            let e = self.embed.forward(g, p, x)?;
            (h, c) = self.cell.step(g, p, e, h, c)?;
        }
        Ok(h)
    }
}

/// Maps pooled context to the decoder's initial state `[c, z]`.
#[derive(Debug, Clone)]
pub struct DecoderInit {
    pub gamma: ReluMlp,
    pub cfg: DecoderConfig,
}

impl DecoderInit {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        pooled_dim: usize,
        cfg: &DecoderConfig,
        rng: &mut R,
    ) -> Self {
        let gamma = ReluMlp::new(
            store,
            &format!("{name}.context"),
            &[pooled_dim, cfg.pool_dim],
            rng,
        );
        Self { gamma, cfg: *cfg }
    }

    /// Returns `(h, c)`: `h = [relu_mlp(pooled), z]`, `c = 0`.
    pub fn init_decoder_state(
        &self,
        g: &mut Graph,
        p: &Bound,
        pooled: Var,
        z: Var,
    ) -> Result<(Var, Var)> {
        let n = g.value(pooled).rows();
        if g.value(z).shape() != [n, self.cfg.noise_dim] {
            return Err(Error::Shape(format!(
                "noise of shape {:?}, expected [{n}, {}]",
                g.value(z).shape(),
                self.cfg.noise_dim
            )));
        }
        let ctx = self.gamma.forward(g, p, pooled)?;
        let h = g.concat_cols(&[ctx, z])?;
        if g.value(h).cols() != self.cfg.hidden_dim {
            return Err(Error::Shape(format!(
                "decoder state width {} != hidden_dim {}",
                g.value(h).cols(),
                self.cfg.hidden_dim
            )));
        }
        let c = g.leaf(Tensor::zeros(&[n, self.cfg.hidden_dim]));
        Ok((h, c))
    }
}

/// Autoregressive decoder with pooling at every step.
#[derive(Debug, Clone)]
pub struct Decoder {
    pub embed: ReluMlp,
    pub pool: PoolingModule,
    /// Folds `[pooled, h_prev]` into the recurrent input.
    pub fold: ReluMlp,
    pub cell: LstmCell,
    pub out: Linear,
    pub cfg: DecoderConfig,
}

impl Decoder {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        net: &NetConfig,
        rng: &mut R,
    ) -> Self {
        let cfg = net.decoder;
        let embed = ReluMlp::new(store, &format!("{name}.embed"), &[2, cfg.embed_dim], rng);
        let pool = PoolingModule::new(
            store,
            &format!("{name}.pool"),
            &net.pooling,
            cfg.hidden_dim,
            rng,
        );
        let fold = ReluMlp::new(
            store,
            &format!("{name}.fold"),
            &[net.pooling.out_dim + cfg.hidden_dim, cfg.hidden_dim],
            rng,
        );
        let cell = LstmCell::new(
            store,
            &format!("{name}.lstm"),
            cfg.embed_dim,
            cfg.hidden_dim,
            rng,
        );
        let out = Linear::new(store, &format!("{name}.out"), cfg.hidden_dim, 2, rng);
        Self {
            embed,
            pool,
            fold,
            cell,
            out,
            cfg,
        }
    }

    /// Emits `steps` positions (relative coordinates, `n x 2` each). Each
    /// output is the next step's input; `origins` lifts positions into the
    /// shared frame used for pooling.
    #[allow(clippy::too_many_arguments)]
    pub fn decode(
        &self,
        g: &mut Graph,
        p: &Bound,
        h0: Var,
        c0: Var,
        last_pos: Var,
        origins: Var,
        pairs: &PairIndex,
        steps: usize,
    ) -> Result<Vec<Var>> {
        if steps == 0 {
            return Err(Error::Argument("decode: steps must be >= 1".into()));
        }
        let (mut h, mut c) = (h0, c0);
        let mut prev = last_pos;
        let mut outputs = Vec::with_capacity(steps);
        for _ in 0..steps {
            let e = self.embed.forward(g, p, prev)?;
            let abs = g.add(prev, origins)?;
            let pooled = self.pool.pool(g, p, h, abs, pairs)?;
            let cat = g.concat_cols(&[pooled, h])?;
            let h_in = self.fold.forward(g, p, cat)?;
            (h, c) = self.cell.step(g, p, e, h_in, c)?;
            let xy = self.out.forward(g, p, h)?;
            outputs.push(xy);
            prev = xy;
        }
        Ok(outputs)
    }
}

/// Encoder, pooling and decoder sharing one parameter store.
#[derive(Debug, Clone)]
pub struct TrajectoryNet {
    pub store: ParamStore,
    pub encoder: Encoder,
    pub pool: PoolingModule,
    pub init: DecoderInit,
    pub decoder: Decoder,
    pub cfg: NetConfig,
}

impl TrajectoryNet {
    pub fn new<R: Rng + ?Sized>(cfg: &NetConfig, rng: &mut R) -> Result<Self> {
        cfg.validate()?;
        let mut store = ParamStore::new();
        let encoder = Encoder::new(&mut store, "encoder", &cfg.encoder, rng);
        let pool = PoolingModule::new(
            &mut store,
            "pool",
            &cfg.pooling,
            cfg.encoder.hidden_dim,
            rng,
        );
        let init = DecoderInit::new(&mut store, "init", cfg.pooling.out_dim, &cfg.decoder, rng);
        let decoder = Decoder::new(&mut store, "decoder", cfg, rng);
        Ok(Self {
            store,
            encoder,
            pool,
            init,
            decoder,
            cfg: *cfg,
        })
    }

    pub fn noise_dim(&self) -> usize {
        self.cfg.decoder.noise_dim
    }

    /// Encode `input`, pool at its last position, decode `steps` outputs.
    fn run(
        &self,
        g: &mut Graph,
        p: &Bound,
        input: &[Var],
        origins: Var,
        z: Var,
        pairs: &PairIndex,
        steps: usize,
    ) -> Result<Vec<Var>> {
        let h_enc = self.encoder.encode(g, p, input)?;
        let last = *input.last().expect("encode checked non-empty");
        let last_abs = g.add(last, origins)?;
        let pooled = self.pool.pool(g, p, h_enc, last_abs, pairs)?;
        let (h0, c0) = self.init.init_decoder_state(g, p, pooled, z)?;
        self.decoder
            .decode(g, p, h0, c0, last, origins, pairs, steps)
    }
}

/// Predicts the `t_pred - t_obs` continuation of an observed prefix.
#[derive(Debug, Clone)]
pub struct GeneratorModel {
    pub net: TrajectoryNet,
    pub t_obs: usize,
    pub t_pred: usize,
}

impl GeneratorModel {
    pub fn new<R: Rng + ?Sized>(
        cfg: &NetConfig,
        t_obs: usize,
        t_pred: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if t_obs == 0 || t_obs >= t_pred {
            return Err(Error::Config(format!(
                "need 0 < t_obs < t_pred, got {t_obs}, {t_pred}"
            )));
        }
        Ok(Self {
            net: TrajectoryNet::new(cfg, rng)?,
            t_obs,
            t_pred,
        })
    }

    pub fn params(&self) -> &ParamStore {
        &self.net.store
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.net.store
    }

    pub fn pred_len(&self) -> usize {
        self.t_pred - self.t_obs
    }

    pub fn predict_graph(
        &self,
        g: &mut Graph,
        p: &Bound,
        obs: &[Var],
        origins: Var,
        z: Var,
        pairs: &PairIndex,
    ) -> Result<Vec<Var>> {
        if obs.len() != self.t_obs {
            return Err(Error::Contract(format!(
                "generator observes {} points, got {}",
                self.t_obs,
                obs.len()
            )));
        }
        self.net.run(g, p, obs, origins, z, pairs, self.pred_len())
    }

    /// Value-level prediction; `obs` must hold exactly `t_obs` steps.
    pub fn predict(&self, obs: &SceneBatch, z: &Tensor) -> Result<Vec<Tensor>> {
        let mut g = Graph::new();
        let p = self.net.store.bind(&mut g);
        let steps = leaf_steps(&mut g, &obs.steps);
        let origins = g.leaf(obs.origins.clone());
        let zv = g.leaf(z.clone());
        let out = self.predict_graph(&mut g, &p, &steps, origins, zv, &obs.pairs())?;
        Ok(step_values(&g, &out))
    }
}

/// Maps a synthetic trajectory to a synth-augmented one of the same length.
#[derive(Debug, Clone)]
pub struct AugmenterModel {
    pub net: TrajectoryNet,
    pub t_pred: usize,
}

impl AugmenterModel {
    pub fn new<R: Rng + ?Sized>(cfg: &NetConfig, t_pred: usize, rng: &mut R) -> Result<Self> {
        Ok(Self {
            net: TrajectoryNet::new(cfg, rng)?,
            t_pred,
        })
    }

    pub fn params(&self) -> &ParamStore {
        &self.net.store
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.net.store
    }

    /// Encodes all `t_pred` points of `s` and decodes `t_pred` points,
    /// re-expressed relative to the first output so `a[0] == (0, 0)`.
    pub fn augment_graph(
        &self,
        g: &mut Graph,
        p: &Bound,
        s: &[Var],
        origins: Var,
        z: Var,
        pairs: &PairIndex,
    ) -> Result<Vec<Var>> {
        if s.len() != self.t_pred {
            return Err(Error::Contract(format!(
                "augmenter takes {} points, got {}",
                self.t_pred,
                s.len()
            )));
        }
        let raw = self.net.run(g, p, s, origins, z, pairs, self.t_pred)?;
        let first = raw[0];
        raw.into_iter().map(|v| g.sub(v, first)).collect()
    }

    pub fn augment(&self, s: &SceneBatch, z: &Tensor) -> Result<SceneBatch> {
        let mut g = Graph::new();
        let p = self.net.store.bind(&mut g);
        let steps = leaf_steps(&mut g, &s.steps);
        let origins = g.leaf(s.origins.clone());
        let zv = g.leaf(z.clone());
        let out = self.augment_graph(&mut g, &p, &steps, origins, zv, &s.pairs())?;
        Ok(s.with_steps(step_values(&g, &out)))
    }
}
