//! Augmenter, Generator and Discriminator networks.
//!
//! All three consume [`SceneBatch`]es: pedestrians of several scenes are
//! stacked row-wise and pooling never crosses scene boundaries.

mod batch;
mod discriminator;
mod net;
mod pooling;

pub use batch::{row_points, PairIndex, SceneBatch};
pub use discriminator::DiscriminatorModel;
pub use net::{AugmenterModel, Decoder, DecoderInit, Encoder, GeneratorModel, TrajectoryNet};
pub use pooling::PoolingModule;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Graph, Tensor, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub embed_dim: usize,
    pub hidden_dim: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecoderConfig {
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub noise_dim: usize,
    /// Width of the pooled context `c` placed ahead of the noise.
    pub pool_dim: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolConfig {
    pub embed_dim: usize,
    pub out_dim: usize,
}

/// Shape of an encoder-pooling-decoder network (Augmenter or Generator).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetConfig {
    pub encoder: EncoderConfig,
    pub pooling: PoolConfig,
    pub decoder: DecoderConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiscriminatorConfig {
    pub encoder: EncoderConfig,
    pub mlp_dim: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub t_obs: usize,
    pub t_pred: usize,
    pub net: NetConfig,
    pub discriminator: DiscriminatorConfig,
}

impl Default for NetConfig {
    fn default() -> Self {
        Self {
            encoder: EncoderConfig {
                embed_dim: 16,
                hidden_dim: 32,
            },
            pooling: PoolConfig {
                embed_dim: 16,
                out_dim: 32,
            },
            decoder: DecoderConfig {
                embed_dim: 16,
                hidden_dim: 32,
                noise_dim: 8,
                pool_dim: 24,
            },
        }
    }
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            t_obs: 8,
            t_pred: 20,
            net: NetConfig::default(),
            discriminator: DiscriminatorConfig {
                encoder: EncoderConfig {
                    embed_dim: 16,
                    hidden_dim: 32,
                },
                mlp_dim: 32,
            },
        }
    }
}

impl NetConfig {
    pub fn validate(&self) -> Result<()> {
        let dims = [
            self.encoder.embed_dim,
            self.encoder.hidden_dim,
            self.pooling.embed_dim,
            self.pooling.out_dim,
            self.decoder.embed_dim,
            self.decoder.hidden_dim,
            self.decoder.pool_dim,
        ];
        if dims.contains(&0) {
            return Err(Error::Config("network dimensions must be positive".into()));
        }
        let d = &self.decoder;
        if d.pool_dim + d.noise_dim != d.hidden_dim {
            return Err(Error::Config(format!(
                "pool_dim ({}) + noise_dim ({}) must equal decoder hidden_dim ({})",
                d.pool_dim, d.noise_dim, d.hidden_dim
            )));
        }
        Ok(())
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.t_obs == 0 || self.t_obs >= self.t_pred {
            return Err(Error::Config(format!(
                "need 0 < t_obs < t_pred, got t_obs={} t_pred={}",
                self.t_obs, self.t_pred
            )));
        }
        self.net.validate()?;
        let dc = &self.discriminator;
        if dc.encoder.embed_dim == 0 || dc.encoder.hidden_dim == 0 || dc.mlp_dim == 0 {
            return Err(Error::Config(
                "discriminator dimensions must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Puts per-step tensors on the graph.
pub fn leaf_steps(g: &mut Graph, steps: &[Tensor]) -> Vec<Var> {
    steps.iter().map(|t| g.leaf(t.clone())).collect()
}

/// Reads per-step values back from the graph.
pub fn step_values(g: &Graph, steps: &[Var]) -> Vec<Tensor> {
    steps.iter().map(|&v| g.value(v).clone()).collect()
}
