//! Adversarial training: the three-phase step, SGAN baselines, the
//! standalone Augmenter ablation and checkpoints.
//!
//! Every random draw comes from one seeded stream owned by the [`Trainer`];
//! batch composition depends only on the seed and the step index, so a run
//! resumed from a checkpoint continues exactly like an uninterrupted one.

use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::{parse_pair, parse_value, KeyValue};
use crate::data::Scene;
use crate::error::{Error, Result};
use crate::losses::{
    augmenter_loss, discriminator_loss, discriminator_loss_pair, generator_branch_loss, LossReport,
};
use crate::models::{
    leaf_steps, AugmenterModel, DiscriminatorConfig, DiscriminatorModel, GeneratorModel,
    ModelConfig, NetConfig, SceneBatch,
};
use crate::nn::container::{read_container, write_container};
use crate::nn::{sample_standard_normal, Adam, Graph, ParamStore, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    AaSgan,
    SganReal,
    SganSynthetic,
    SganHybrid,
    IndependentAugmenter,
}

impl Mode {
    pub const ALL: [Mode; 5] = [
        Mode::AaSgan,
        Mode::SganReal,
        Mode::SganSynthetic,
        Mode::SganHybrid,
        Mode::IndependentAugmenter,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::AaSgan => "aa-sgan",
            Mode::SganReal => "sgan-real",
            Mode::SganSynthetic => "sgan-synthetic",
            Mode::SganHybrid => "sgan-hybrid",
            Mode::IndependentAugmenter => "independent-augmenter",
        }
    }

    pub fn uses_augmenter(self) -> bool {
        matches!(self, Mode::AaSgan | Mode::IndependentAugmenter)
    }

    pub fn is_baseline(self) -> bool {
        matches!(
            self,
            Mode::SganReal | Mode::SganSynthetic | Mode::SganHybrid
        )
    }

    pub fn needs_real(self) -> bool {
        self != Mode::SganSynthetic
    }

    pub fn needs_synth(self) -> bool {
        self != Mode::SganReal
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Mode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Mode::ALL.iter().map(|m| m.as_str()).collect();
                Error::Config(format!(
                    "unknown mode {s:?}; expected one of {}",
                    names.join(", ")
                ))
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub t_obs: usize,
    pub t_pred: usize,
    /// Real scenes per step (synthetic scenes for `sgan-synthetic`).
    pub batch_size: usize,
    pub lr_d: f64,
    pub lr_g: f64,
    pub lr_a: f64,
    pub adam_betas: (f64, f64),
    pub steps: usize,
    pub seed: u64,
    /// `(real, synthetic)` scene proportion of every batch.
    pub real_synth_ratio: (usize, usize),
    pub variety_k: usize,
    pub mode: Mode,
    pub grad_clip: Option<f64>,
    /// Shared by the Generator and the Augmenter.
    pub net: NetConfig,
    pub discriminator: DiscriminatorConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let m = ModelConfig::default();
        Self {
            t_obs: m.t_obs,
            t_pred: m.t_pred,
            batch_size: 8,
            lr_d: 5e-4,
            lr_g: 5e-4,
            lr_a: 5e-4,
            adam_betas: (0.5, 0.999),
            steps: 1000,
            seed: 0,
            real_synth_ratio: (1, 1),
            variety_k: 1,
            mode: Mode::AaSgan,
            grad_clip: Some(2.0),
            net: m.net,
            discriminator: m.discriminator,
        }
    }
}

impl TrainConfig {
    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            t_obs: self.t_obs,
            t_pred: self.t_pred,
            net: self.net,
            discriminator: self.discriminator,
        }
    }

    /// Learning rates may be zero (a null update) but not negative.
    pub fn validate(&self) -> Result<()> {
        self.model_config().validate()?;
        let bad = |m: String| Err(Error::Config(m));
        if self.batch_size == 0 {
            return bad("batch_size must be positive".into());
        }
        for (name, lr) in [
            ("lr_d", self.lr_d),
            ("lr_g", self.lr_g),
            ("lr_a", self.lr_a),
        ] {
            if !(lr >= 0.0) || !lr.is_finite() {
                return bad(format!("{name} must be finite and non-negative, got {lr}"));
            }
        }
        let (b1, b2) = self.adam_betas;
        if !(0.0..1.0).contains(&b1) || !(0.0..1.0).contains(&b2) {
            return bad(format!("adam_betas must lie in [0, 1), got ({b1}, {b2})"));
        }
        let (p, q) = self.real_synth_ratio;
        if p == 0 || q == 0 {
            return bad(format!(
                "real_synth_ratio components must be positive, got {p}:{q}"
            ));
        }
        if self.mode.needs_real() && self.mode.needs_synth() && (self.batch_size * q) % p != 0 {
            return bad(format!(
                "batch_size {} cannot hold real:synthetic = {p}:{q} exactly",
                self.batch_size
            ));
        }
        if self.variety_k == 0 {
            return bad("variety_k must be at least 1".into());
        }
        if let Some(c) = self.grad_clip {
            if !(c > 0.0) || !c.is_finite() {
                return bad(format!("grad_clip must be positive, got {c}"));
            }
        }
        Ok(())
    }

    /// Real scenes per step under the current mode.
    pub fn real_per_step(&self) -> usize {
        if self.mode.needs_real() {
            self.batch_size
        } else {
            0
        }
    }

    /// Synthetic scenes per step under the current mode.
    pub fn synth_per_step(&self) -> usize {
        match self.mode {
            Mode::SganReal => 0,
            Mode::SganSynthetic => self.batch_size,
            _ => self.batch_size * self.real_synth_ratio.1 / self.real_synth_ratio.0,
        }
    }
}

impl KeyValue for TrainConfig {
    fn set(&mut self, key: &str, v: &str) -> Result<bool> {
        match key {
            "t_obs" => self.t_obs = parse_value(key, v)?,
            "t_pred" => self.t_pred = parse_value(key, v)?,
            "batch_size" => self.batch_size = parse_value(key, v)?,
            "lr" => {
                let lr = parse_value(key, v)?;
                self.lr_d = lr;
                self.lr_g = lr;
                self.lr_a = lr;
            }
            "lr_d" => self.lr_d = parse_value(key, v)?,
            "lr_g" => self.lr_g = parse_value(key, v)?,
            "lr_a" => self.lr_a = parse_value(key, v)?,
            "adam_betas" => self.adam_betas = parse_pair(key, v)?,
            "steps" => self.steps = parse_value(key, v)?,
            "seed" => self.seed = parse_value(key, v)?,
            "real_synth_ratio" => self.real_synth_ratio = parse_pair(key, v)?,
            "variety_k" => self.variety_k = parse_value(key, v)?,
            "mode" => self.mode = v.parse()?,
            "grad_clip" => {
                self.grad_clip = match v {
                    "none" | "off" => None,
                    _ => Some(parse_value(key, v)?),
                }
            }
            "embed_dim" => self.net.encoder.embed_dim = parse_value(key, v)?,
            "encoder_hidden" => self.net.encoder.hidden_dim = parse_value(key, v)?,
            "pool_embed" => self.net.pooling.embed_dim = parse_value(key, v)?,
            "pool_out" => self.net.pooling.out_dim = parse_value(key, v)?,
            "decoder_embed" => self.net.decoder.embed_dim = parse_value(key, v)?,
            "decoder_hidden" => self.net.decoder.hidden_dim = parse_value(key, v)?,
            "noise_dim" => self.net.decoder.noise_dim = parse_value(key, v)?,
            "pool_dim" => self.net.decoder.pool_dim = parse_value(key, v)?,
            "d_embed" => self.discriminator.encoder.embed_dim = parse_value(key, v)?,
            "d_hidden" => self.discriminator.encoder.hidden_dim = parse_value(key, v)?,
            "d_mlp" => self.discriminator.mlp_dim = parse_value(key, v)?,
            _ => return Ok(false),
        }
        Ok(true)
    }

    fn entries(&self) -> Vec<(&'static str, String)> {
        let pair = |(a, b): (f64, f64)| format!("{a}:{b}");
        vec![
            ("t_obs", self.t_obs.to_string()),
            ("t_pred", self.t_pred.to_string()),
            ("batch_size", self.batch_size.to_string()),
            ("lr_d", self.lr_d.to_string()),
            ("lr_g", self.lr_g.to_string()),
            ("lr_a", self.lr_a.to_string()),
            ("adam_betas", pair(self.adam_betas)),
            ("steps", self.steps.to_string()),
            ("seed", self.seed.to_string()),
            (
                "real_synth_ratio",
                format!("{}:{}", self.real_synth_ratio.0, self.real_synth_ratio.1),
            ),
            ("variety_k", self.variety_k.to_string()),
            ("mode", self.mode.to_string()),
            (
                "grad_clip",
                self.grad_clip
                    .map_or_else(|| "none".into(), |c| c.to_string()),
            ),
            ("embed_dim", self.net.encoder.embed_dim.to_string()),
            ("encoder_hidden", self.net.encoder.hidden_dim.to_string()),
            ("pool_embed", self.net.pooling.embed_dim.to_string()),
            ("pool_out", self.net.pooling.out_dim.to_string()),
            ("decoder_embed", self.net.decoder.embed_dim.to_string()),
            ("decoder_hidden", self.net.decoder.hidden_dim.to_string()),
            ("noise_dim", self.net.decoder.noise_dim.to_string()),
            ("pool_dim", self.net.decoder.pool_dim.to_string()),
            ("d_embed", self.discriminator.encoder.embed_dim.to_string()),
            (
                "d_hidden",
                self.discriminator.encoder.hidden_dim.to_string(),
            ),
            ("d_mlp", self.discriminator.mlp_dim.to_string()),
        ]
    }
}

/// Deterministic batching: the `k`-th scene drawn overall is the
/// `k mod n`-th entry of a seeded permutation of epoch `k / n`.
pub fn batch_indices(n: usize, per_step: usize, step: usize, seed: u64, salt: u64) -> Vec<usize> {
    if n == 0 || per_step == 0 {
        return Vec::new();
    }
    let first = step * per_step;
    let mut out = Vec::with_capacity(per_step);
    let mut cached: Option<(usize, Vec<usize>)> = None;
    for k in first..first + per_step {
        let epoch = k / n;
        if cached.as_ref().map(|(e, _)| *e) != Some(epoch) {
            cached = Some((epoch, epoch_order(n, seed, salt, epoch)));
        }
        out.push(cached.as_ref().expect("set above").1[k % n]);
    }
    out
}

fn epoch_order(n: usize, seed: u64, salt: u64, epoch: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ salt);
    rng.set_stream(epoch as u64);
    let mut v: Vec<usize> = (0..n).collect();
    v.shuffle(&mut rng);
    v
}

const REAL_SALT: u64 = 0x5245_414c;
const SYNTH_SALT: u64 = 0x5359_4e54;
const INIT_STREAM: u64 = 0;
const NOISE_STREAM: u64 = 1;

/// Training corpora. Scenes must all have `t_pred` points.
#[derive(Debug, Clone, Default)]
pub struct TrainData {
    pub real: Vec<Scene>,
    pub synth: Vec<Scene>,
}

#[derive(Debug, Clone)]
pub struct Models {
    pub generator: GeneratorModel,
    pub discriminator: DiscriminatorModel,
    pub augmenter: AugmenterModel,
}

impl Models {
    /// Initializes G, D and A, in that order, from the seed's init stream.
    pub fn new(cfg: &TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(INIT_STREAM);
        let generator = GeneratorModel::new(&cfg.net, cfg.t_obs, cfg.t_pred, &mut rng)?;
        let discriminator = DiscriminatorModel::new(&cfg.discriminator, cfg.t_pred, &mut rng);
        let augmenter = AugmenterModel::new(&cfg.net, cfg.t_pred, &mut rng)?;
        Ok(Self {
            generator,
            discriminator,
            augmenter,
        })
    }
}

/// Batches of one aa-sgan step with the Augmenter output computed once.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub real: SceneBatch,
    pub synth: SceneBatch,
    /// `A(synth)`, detached.
    pub aug: SceneBatch,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
struct RngState {
    seed: [u8; 32],
    stream: u64,
    word_pos: String,
}

impl RngState {
    fn capture(rng: &ChaCha8Rng) -> Self {
        Self {
            seed: rng.get_seed(),
            stream: rng.get_stream(),
            word_pos: rng.get_word_pos().to_string(),
        }
    }

    fn restore(&self) -> Result<ChaCha8Rng> {
        let mut rng = ChaCha8Rng::from_seed(self.seed);
        rng.set_stream(self.stream);
        let pos: u128 = self
            .word_pos
            .parse()
            .map_err(|_| Error::Corrupt(format!("bad rng position {:?}", self.word_pos)))?;
        rng.set_word_pos(pos);
        Ok(rng)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CheckpointHeader {
    config: TrainConfig,
    step: usize,
    rng: RngState,
    has_augmenter: bool,
}

pub struct Trainer {
    pub cfg: TrainConfig,
    pub models: Models,
    opt_g: Adam,
    opt_d: Adam,
    opt_a: Adam,
    rng: ChaCha8Rng,
    step: usize,
}

fn noise(rows: usize, dim: usize, rng: &mut ChaCha8Rng) -> Tensor {
    sample_standard_normal(&[rows, dim], rng)
}

fn finish_update(store: &mut ParamStore, opt: &mut Adam, clip: Option<f64>) {
    if let Some(c) = clip {
        store.clip_grad_norm(c);
    }
    opt.step(store);
}

fn concat_steps(a: &[Tensor], b: &[Tensor]) -> Vec<Tensor> {
    a.iter().chain(b).cloned().collect()
}

impl Trainer {
    pub fn new(cfg: TrainConfig) -> Result<Self> {
        let models = Models::new(&cfg)?;
        let opt_g = Adam::new(models.generator.params(), cfg.lr_g, cfg.adam_betas);
        let opt_d = Adam::new(models.discriminator.params(), cfg.lr_d, cfg.adam_betas);
        let opt_a = Adam::new(models.augmenter.params(), cfg.lr_a, cfg.adam_betas);
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(NOISE_STREAM);
        Ok(Self {
            cfg,
            models,
            opt_g,
            opt_d,
            opt_a,
            rng,
            step: 0,
        })
    }

    /// Steps completed so far.
    pub fn step(&self) -> usize {
        self.step
    }

    /// Scenes used by the next step: `(real, synthetic)`.
    pub fn next_batches(&self, data: &TrainData) -> Result<(Vec<Scene>, Vec<Scene>)> {
        let (nr, ns) = (self.cfg.real_per_step(), self.cfg.synth_per_step());
        if nr > 0 && data.real.is_empty() {
            return Err(Error::Argument(format!(
                "mode {} needs real scenes",
                self.cfg.mode
            )));
        }
        if ns > 0 && data.synth.is_empty() {
            return Err(Error::Argument(format!(
                "mode {} needs synthetic scenes",
                self.cfg.mode
            )));
        }
        let pick = |scenes: &[Scene], per: usize, salt: u64| -> Vec<Scene> {
            batch_indices(scenes.len(), per, self.step, self.cfg.seed, salt)
                .into_iter()
                .map(|i| scenes[i].clone())
                .collect()
        };
        Ok((
            pick(&data.real, nr, REAL_SALT),
            pick(&data.synth, ns, SYNTH_SALT),
        ))
    }

    /// Runs one step of the configured mode on its scheduled batches.
    pub fn run_step(&mut self, data: &TrainData) -> Result<LossReport> {
        let (real, synth) = self.next_batches(data)?;
        match self.cfg.mode {
            Mode::AaSgan => self.train_step(&real, &synth),
            Mode::SganReal => self.train_step_baseline(&real),
            Mode::SganSynthetic => self.train_step_baseline(&synth),
            Mode::SganHybrid => {
                let mut all = real;
                all.extend(synth);
                self.train_step_baseline(&all)
            }
            Mode::IndependentAugmenter => self.train_augmenter_standalone(&real, &synth),
        }
    }

    /// Runs `n` steps, calling `on_step` after each one.
    pub fn train<F>(&mut self, data: &TrainData, n: usize, mut on_step: F) -> Result<()>
    where
        F: FnMut(&Trainer, &LossReport) -> Result<()>,
    {
        for _ in 0..n {
            let r = self.run_step(data)?;
            on_step(self, &r)?;
        }
        Ok(())
    }

    fn require_mode(&self, ok: bool, op: &str) -> Result<()> {
        if ok {
            Ok(())
        } else {
            Err(Error::Argument(format!(
                "{op} is not available in mode {}",
                self.cfg.mode
            )))
        }
    }

    fn check_ratio(&self, real: &[Scene], synth: &[Scene]) -> Result<()> {
        let (p, q) = self.cfg.real_synth_ratio;
        if real.is_empty() || synth.is_empty() {
            return Err(Error::Argument("empty batch".into()));
        }
        if real.len() * q != synth.len() * p {
            return Err(Error::Argument(format!(
                "batch of {} real and {} synthetic scenes violates ratio {p}:{q}",
                real.len(),
                synth.len()
            )));
        }
        Ok(())
    }

    fn finish(&mut self, mut report: LossReport) -> Result<LossReport> {
        report.step = self.step;
        if let Some(what) = report.non_finite() {
            return Err(Error::NonFinite {
                step: self.step,
                what: what.to_string(),
            });
        }
        self.step += 1;
        Ok(report)
    }

    /// Batches the scenes and computes the detached Augmenter output.
    pub fn prepare(&mut self, real: &[Scene], synth: &[Scene]) -> Result<Prepared> {
        self.check_ratio(real, synth)?;
        let real = SceneBatch::from_scenes(real)?;
        let synth = SceneBatch::from_scenes(synth)?;
        let z = noise(
            synth.num_peds(),
            self.models.augmenter.net.noise_dim(),
            &mut self.rng,
        );
        let aug = self.models.augmenter.augment(&synth, &z)?;
        Ok(Prepared { real, synth, aug })
    }

    /// `[x_obs, G(x_obs)]` as values.
    fn complete(&mut self, x: &SceneBatch) -> Result<SceneBatch> {
        let g = &self.models.generator;
        let obs = x.prefix(g.t_obs);
        let z = noise(x.num_peds(), g.net.noise_dim(), &mut self.rng);
        let pred = g.predict(&obs, &z)?;
        Ok(x.with_steps(concat_steps(&obs.steps, &pred)))
    }

    /// Discriminator update against `r` (real) and `a`, `r~`, `a~` (fake).
    pub fn phase_discriminator(&mut self, prep: &Prepared) -> Result<f64> {
        let r_tilde = self.complete(&prep.real)?;
        let a_tilde = self.complete(&prep.aug)?;
        let d = &self.models.discriminator;
        let mut g = Graph::new();
        let p = d.params().bind(&mut g);
        let score = |batch: &SceneBatch, g: &mut Graph| {
            let s = leaf_steps(g, &batch.steps);
            d.discriminate_graph(g, &p, &s)
        };
        let sr = score(&prep.real, &mut g)?;
        let sa = score(&prep.aug, &mut g)?;
        let srt = score(&r_tilde, &mut g)?;
        let sat = score(&a_tilde, &mut g)?;
        let loss = discriminator_loss(&mut g, sr, sa, srt, sat)?;
        let value = g.value(loss).scalar();
        let grads = g.backward(loss)?;
        let store = self.models.discriminator.params_mut();
        store.zero_grad();
        store.accumulate(&p, &grads);
        finish_update(store, &mut self.opt_d, self.cfg.grad_clip);
        Ok(value)
    }

    /// One Generator update on `x`: `k` candidates, adversarial term on the
    /// first. Returns `(adversarial, l2)`.
    fn generator_update(&mut self, x: &SceneBatch) -> Result<(f64, f64)> {
        let gen = &self.models.generator;
        let d = &self.models.discriminator;
        let t_obs = gen.t_obs;
        let mut g = Graph::new();
        let pg = gen.params().bind(&mut g);
        let pd = d.params().bind(&mut g);
        let obs = leaf_steps(&mut g, &x.steps[..t_obs]);
        let gt = leaf_steps(&mut g, &x.steps[t_obs..]);
        let origins = g.leaf(x.origins.clone());
        let pairs = x.pairs();
        let mut candidates = Vec::with_capacity(self.cfg.variety_k);
        for _ in 0..self.cfg.variety_k {
            let z = g.leaf(noise(x.num_peds(), gen.net.noise_dim(), &mut self.rng));
            candidates.push(gen.predict_graph(&mut g, &pg, &obs, origins, z, &pairs)?);
        }
        let full: Vec<_> = obs.iter().chain(&candidates[0]).copied().collect();
        let score = d.discriminate_graph(&mut g, &pd, &full)?;
        let parts = generator_branch_loss(&mut g, score, &gt, &candidates, gen.pred_len())?;
        let out = (
            g.value(parts.adversarial).scalar(),
            g.value(parts.l2).scalar(),
        );
        let grads = g.backward(parts.total)?;
        let store = self.models.generator.params_mut();
        store.zero_grad();
        store.accumulate(&pg, &grads);
        finish_update(store, &mut self.opt_g, self.cfg.grad_clip);
        Ok(out)
    }

    /// Generator updates over the real branch, then the synth-augmented one.
    pub fn phase_generator(&mut self, prep: &Prepared) -> Result<[f64; 4]> {
        let (ra, rl) = self.generator_update(&prep.real)?;
        let (sa, sl) = self.generator_update(&prep.aug)?;
        Ok([ra, rl, sa, sl])
    }

    /// Augmenter update through D's score of `A(s)`. Returns `(adversarial, l2)`.
    pub fn phase_augmenter(&mut self, synth: &SceneBatch) -> Result<(f64, f64)> {
        let a = &self.models.augmenter;
        let d = &self.models.discriminator;
        let mut g = Graph::new();
        let pa = a.params().bind(&mut g);
        let pd = d.params().bind(&mut g);
        let s = leaf_steps(&mut g, &synth.steps);
        let origins = g.leaf(synth.origins.clone());
        let z = g.leaf(noise(synth.num_peds(), a.net.noise_dim(), &mut self.rng));
        let out = a.augment_graph(&mut g, &pa, &s, origins, z, &synth.pairs())?;
        let score = d.discriminate_graph(&mut g, &pd, &out)?;
        let parts = augmenter_loss(&mut g, score, &s, &out)?;
        let vals = (
            g.value(parts.adversarial).scalar(),
            g.value(parts.l2).scalar(),
        );
        let grads = g.backward(parts.total)?;
        let store = self.models.augmenter.params_mut();
        store.zero_grad();
        store.accumulate(&pa, &grads);
        finish_update(store, &mut self.opt_a, self.cfg.grad_clip);
        Ok(vals)
    }

    /// Full aa-sgan step: D, then G, then A.
    pub fn train_step(&mut self, real: &[Scene], synth: &[Scene]) -> Result<LossReport> {
        self.require_mode(self.cfg.mode == Mode::AaSgan, "train_step")?;
        let prep = self.prepare(real, synth)?;
        let d_loss = self.phase_discriminator(&prep)?;
        let [g_real_adv, g_real_l2, g_synth_adv, g_synth_l2] = self.phase_generator(&prep)?;
        let (a_adv, a_l2) = self.phase_augmenter(&prep.synth)?;
        self.finish(LossReport {
            step: 0,
            d_loss,
            a_adv,
            a_l2,
            g_real_adv,
            g_real_l2,
            g_synth_adv,
            g_synth_l2,
        })
    }

    /// Two-class D update: `real` as real, `fake` as fake.
    fn discriminator_pair_update(&mut self, real: &SceneBatch, fake: &SceneBatch) -> Result<f64> {
        let d = &self.models.discriminator;
        let mut g = Graph::new();
        let p = d.params().bind(&mut g);
        let rs = leaf_steps(&mut g, &real.steps);
        let fs = leaf_steps(&mut g, &fake.steps);
        let sr = d.discriminate_graph(&mut g, &p, &rs)?;
        let sf = d.discriminate_graph(&mut g, &p, &fs)?;
        let loss = discriminator_loss_pair(&mut g, sr, sf)?;
        let value = g.value(loss).scalar();
        let grads = g.backward(loss)?;
        let store = self.models.discriminator.params_mut();
        store.zero_grad();
        store.accumulate(&p, &grads);
        finish_update(store, &mut self.opt_d, self.cfg.grad_clip);
        Ok(value)
    }

    /// SGAN step without the Augmenter. Losses land in the `g_real_*`
    /// fields whatever the data source.
    pub fn train_step_baseline(&mut self, batch: &[Scene]) -> Result<LossReport> {
        self.require_mode(self.cfg.mode.is_baseline(), "train_step_baseline")?;
        if batch.is_empty() {
            return Err(Error::Argument("empty batch".into()));
        }
        let x = SceneBatch::from_scenes(batch)?;
        let fake = self.complete(&x)?;
        let d_loss = self.discriminator_pair_update(&x, &fake)?;
        let (g_real_adv, g_real_l2) = self.generator_update(&x)?;
        self.finish(LossReport {
            step: 0,
            d_loss,
            g_real_adv,
            g_real_l2,
            ..LossReport::default()
        })
    }

    /// Trains only A and D; G is never touched.
    pub fn train_augmenter_standalone(
        &mut self,
        real: &[Scene],
        synth: &[Scene],
    ) -> Result<LossReport> {
        self.require_mode(
            self.cfg.mode == Mode::IndependentAugmenter,
            "train_augmenter_standalone",
        )?;
        let prep = self.prepare(real, synth)?;
        let d_loss = self.discriminator_pair_update(&prep.real, &prep.aug)?;
        let (a_adv, a_l2) = self.phase_augmenter(&prep.synth)?;
        self.finish(LossReport {
            step: 0,
            d_loss,
            a_adv,
            a_l2,
            ..LossReport::default()
        })
    }

    fn records(&self) -> Vec<(String, Tensor)> {
        let m = &self.models;
        let mut out = Vec::new();
        let mut push = |prefix: &str, store: &ParamStore, opt: &Adam| {
            for (name, t) in store.iter() {
                out.push((format!("{prefix}.{name}"), t.clone()));
            }
            out.extend(opt.state_records(&format!("optim.{prefix}."), store));
        };
        push("generator", m.generator.params(), &self.opt_g);
        push("discriminator", m.discriminator.params(), &self.opt_d);
        if self.cfg.mode.uses_augmenter() {
            push("augmenter", m.augmenter.params(), &self.opt_a);
        }
        out
    }

    /// Writes parameters, optimizer state, config, step and RNG position.
    /// The Augmenter is omitted in modes that never train it.
    pub fn save_checkpoint(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let header = CheckpointHeader {
            config: self.cfg.clone(),
            step: self.step,
            rng: RngState::capture(&self.rng),
            has_augmenter: self.cfg.mode.uses_augmenter(),
        };
        let json = serde_json::to_string(&header).map_err(|e| Error::Corrupt(e.to_string()))?;
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        write_container(&mut w, &json, &self.records()).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Restores a trainer exactly as it was saved.
    pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Self> {
        Ok(load_checkpoint(path)?.trainer)
    }
}

/// A loaded checkpoint. `has_augmenter` is false when the run never
/// trained one; the trainer then holds a freshly initialized Augmenter.
pub struct Checkpoint {
    pub trainer: Trainer,
    pub has_augmenter: bool,
}

impl Checkpoint {
    pub fn config(&self) -> &TrainConfig {
        &self.trainer.cfg
    }

    pub fn step(&self) -> usize {
        self.trainer.step
    }

    pub fn generator(&self) -> &GeneratorModel {
        &self.trainer.models.generator
    }

    pub fn discriminator(&self) -> &DiscriminatorModel {
        &self.trainer.models.discriminator
    }

    pub fn augmenter(&self) -> Result<&AugmenterModel> {
        if self.has_augmenter {
            Ok(&self.trainer.models.augmenter)
        } else {
            Err(Error::Contract(format!(
                "checkpoint from mode {} holds no Augmenter weights",
                self.trainer.cfg.mode
            )))
        }
    }
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let (json, records) = read_container(&mut BufReader::new(file))?;
    let header: CheckpointHeader = serde_json::from_str(&json)
        .map_err(|e| Error::Corrupt(format!("checkpoint header: {e}")))?;
    let mut t = Trainer::new(header.config)?;
    {
        let Trainer {
            models,
            opt_g,
            opt_d,
            opt_a,
            ..
        } = &mut t;
        let load = |prefix: &str, store: &mut ParamStore, opt: &mut Adam| -> Result<()> {
            store.load_records(&records, &format!("{prefix}."))?;
            opt.load_state(&records, &format!("optim.{prefix}."), store)
        };
        load("generator", models.generator.params_mut(), opt_g)?;
        load("discriminator", models.discriminator.params_mut(), opt_d)?;
        if header.has_augmenter {
            load("augmenter", models.augmenter.params_mut(), opt_a)?;
        }
    }
    t.rng = header.rng.restore()?;
    t.step = header.step;
    Ok(Checkpoint {
        trainer: t,
        has_augmenter: header.has_augmenter,
    })
}

/// Runs the Augmenter over `scenes` in chunks with noise from `seed`.
/// Scene count and order are preserved.
pub fn augment_scenes(a: &AugmenterModel, scenes: &[Scene], seed: u64) -> Result<Vec<Scene>> {
    const CHUNK: usize = 64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(scenes.len());
    for chunk in scenes.chunks(CHUNK) {
        let batch = SceneBatch::from_scenes(chunk)?;
        let z = noise(batch.num_peds(), a.net.noise_dim(), &mut rng);
        out.extend(a.augment(&batch, &z)?.to_scenes());
    }
    Ok(out)
}

/// Appends loss reports to a whitespace-separated text log.
pub struct LossLog {
    w: BufWriter<File>,
    path: PathBuf,
}

impl LossLog {
    /// Creates the file and writes the header line.
    pub fn create(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut w = BufWriter::new(file);
        writeln!(w, "{}", LossReport::HEADER).map_err(|e| Error::io(&path, e))?;
        Ok(Self { w, path })
    }

    pub fn append(&mut self, r: &LossReport) -> Result<()> {
        writeln!(self.w, "{r}").map_err(|e| Error::io(&self.path, e))?;
        self.w.flush().map_err(|e| Error::io(&self.path, e))
    }
}

pub fn read_loss_log(path: impl AsRef<Path>) -> Result<Vec<LossReport>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == LossReport::HEADER => {}
        _ => {
            return Err(Error::Data(format!(
                "{}: missing loss log header",
                path.display()
            )))
        }
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .map(LossReport::parse_line)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{DecoderConfig, EncoderConfig, PoolConfig};
    use crate::synth::{generate_synthetic_dataset, SynthConfig};

    pub(crate) fn tiny_config(mode: Mode) -> TrainConfig {
        TrainConfig {
            t_obs: 3,
            t_pred: 6,
            batch_size: 2,
            mode,
            steps: 3,
            seed: 11,
            net: NetConfig {
                encoder: EncoderConfig {
                    embed_dim: 4,
                    hidden_dim: 6,
                },
                pooling: PoolConfig {
                    embed_dim: 4,
                    out_dim: 5,
                },
                decoder: DecoderConfig {
                    embed_dim: 4,
                    hidden_dim: 6,
                    noise_dim: 2,
                    pool_dim: 4,
                },
            },
            discriminator: DiscriminatorConfig {
                encoder: EncoderConfig {
                    embed_dim: 4,
                    hidden_dim: 6,
                },
                mlp_dim: 5,
            },
            ..TrainConfig::default()
        }
    }

    fn tiny_data(t_pred: usize) -> TrainData {
        let mut cfg = SynthConfig {
            n_scenes: 7,
            jitter_std: 0.05,
            seed: 1,
            ..SynthConfig::default()
        };
        let real = generate_synthetic_dataset(&cfg, t_pred).unwrap();
        cfg.jitter_std = 0.0;
        cfg.seed = 2;
        cfg.n_scenes = 9;
        let synth = generate_synthetic_dataset(&cfg, t_pred).unwrap();
        TrainData { real, synth }
    }

    #[test]
    fn mode_names_round_trip() {
        for m in Mode::ALL {
            assert_eq!(m.as_str().parse::<Mode>().unwrap(), m);
            let json = serde_json::to_string(&m).unwrap();
            assert_eq!(json, format!("\"{}\"", m.as_str()));
        }
        assert!("sgan".parse::<Mode>().is_err());
    }

    #[test]
    fn keys_round_trip_through_entries() {
        let mut a = tiny_config(Mode::SganHybrid);
        a.real_synth_ratio = (1, 10);
        a.grad_clip = None;
        a.lr_a = 1.25e-3;
        let mut b = TrainConfig::default();
        for (k, v) in a.entries() {
            assert!(b.set(k, &v).unwrap(), "{k}");
        }
        assert_eq!(a, b);
        assert!(!b.set("nonsense", "1").unwrap());
        assert!(b.set("steps", "ten").is_err());
    }

    #[test]
    fn validation() {
        let mut c = TrainConfig::default();
        c.validate().unwrap();
        c.real_synth_ratio = (3, 1);
        assert!(c.validate().is_err());
        c.batch_size = 9;
        c.validate().unwrap();
        c.lr_g = -1.0;
        assert!(c.validate().is_err());
        c.lr_g = 0.0;
        c.validate().unwrap();
        c.t_obs = c.t_pred;
        assert!(c.validate().is_err());
    }

    #[test]
    fn batch_indices_cover_each_epoch_once() {
        let n = 7;
        let mut seen = Vec::new();
        for step in 0..7 {
            seen.extend(batch_indices(n, 3, step, 5, 1));
        }
        for epoch in seen.chunks(n) {
            let mut e = epoch.to_vec();
            e.sort_unstable();
            assert_eq!(e, (0..n).collect::<Vec<_>>());
        }
        assert_eq!(batch_indices(n, 3, 4, 5, 1), batch_indices(n, 3, 4, 5, 1));
        assert_ne!(batch_indices(n, 7, 0, 5, 1), batch_indices(n, 7, 0, 6, 1));
    }

    #[test]
    fn aa_sgan_steps_are_finite_and_deterministic() {
        let data = tiny_data(6);
        let run = || {
            let mut t = Trainer::new(tiny_config(Mode::AaSgan)).unwrap();
            (0..3)
                .map(|_| t.run_step(&data).unwrap())
                .collect::<Vec<_>>()
        };
        let a = run();
        assert_eq!(a, run());
        assert_eq!(a.iter().map(|r| r.step).collect::<Vec<_>>(), vec![0, 1, 2]);
        assert!(a.iter().all(|r| r.non_finite().is_none()));
    }

    #[test]
    fn wrong_mode_and_ratio_rejected() {
        let data = tiny_data(6);
        let mut t = Trainer::new(tiny_config(Mode::AaSgan)).unwrap();
        assert!(t.train_step_baseline(&data.real[..2]).is_err());
        assert!(matches!(
            t.train_step(&data.real[..2], &data.synth[..3]),
            Err(Error::Argument(_))
        ));
        assert!(matches!(t.train_step(&[], &[]), Err(Error::Argument(_))));
    }

    #[test]
    fn every_mode_runs() {
        let data = tiny_data(6);
        for m in Mode::ALL {
            let mut t = Trainer::new(tiny_config(m)).unwrap();
            let r = t.run_step(&data).unwrap();
            assert!(r.d_loss.is_finite(), "{m}");
        }
    }

    #[test]
    fn checkpoint_round_trip_and_resume() {
        let dir = tempfile::tempdir().unwrap();
        let data = tiny_data(6);
        let mut t = Trainer::new(tiny_config(Mode::AaSgan)).unwrap();
        t.run_step(&data).unwrap();
        let path = dir.path().join("c.ckpt");
        t.save_checkpoint(&path).unwrap();
        let mut back = Trainer::load_checkpoint(&path).unwrap();
        assert_eq!(back.cfg, t.cfg);
        assert_eq!(back.step(), 1);
        assert!(back
            .models
            .generator
            .params()
            .bit_eq(t.models.generator.params()));
        assert!(back
            .models
            .augmenter
            .params()
            .bit_eq(t.models.augmenter.params()));
        assert!(back
            .models
            .discriminator
            .params()
            .bit_eq(t.models.discriminator.params()));
        assert_eq!(t.run_step(&data).unwrap(), back.run_step(&data).unwrap());
    }

    #[test]
    fn baseline_checkpoint_has_no_augmenter() {
        let dir = tempfile::tempdir().unwrap();
        let t = Trainer::new(tiny_config(Mode::SganReal)).unwrap();
        let path = dir.path().join("c.ckpt");
        t.save_checkpoint(&path).unwrap();
        let ck = load_checkpoint(&path).unwrap();
        assert!(matches!(ck.augmenter(), Err(Error::Contract(_))));
    }

    #[test]
    fn loss_log_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("loss.log");
        let data = tiny_data(6);
        let mut t = Trainer::new(tiny_config(Mode::AaSgan)).unwrap();
        let mut log = LossLog::create(&path).unwrap();
        let mut reports = Vec::new();
        t.train(&data, 2, |_, r| {
            reports.push(*r);
            log.append(r)
        })
        .unwrap();
        drop(log);
        assert_eq!(read_loss_log(&path).unwrap(), reports);
    }

    #[test]
    fn augment_scenes_preserves_count_and_length() {
        let data = tiny_data(6);
        let t = Trainer::new(tiny_config(Mode::IndependentAugmenter)).unwrap();
        let out = augment_scenes(&t.models.augmenter, &data.synth, 3).unwrap();
        assert_eq!(out.len(), data.synth.len());
        assert!(out.iter().all(|s| s.len() == Some(6)));
        assert_eq!(
            out,
            augment_scenes(&t.models.augmenter, &data.synth, 3).unwrap()
        );
        for (o, s) in out.iter().zip(&data.synth) {
            for (a, b) in o.trajectories.iter().zip(&s.trajectories) {
                assert_eq!(a.points[0], b.points[0]);
            }
        }
    }
}
