//! Adversarial objectives and the variety L2 loss.
//!
//! Every loss is a quantity to minimize. The Discriminator minimizes the
//! negated log-likelihood of labeling real as real and every fake class as
//! fake. Augmenter and Generator use the non-saturating `-log D(.)` form
//! for their adversarial terms.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Graph, Var};

/// Scores are clamped to `[SCORE_EPS, 1 - SCORE_EPS]` before any log.
pub const SCORE_EPS: f64 = 1e-7;

fn clamp_scores(g: &mut Graph, s: Var) -> Var {
    g.clamp(s, SCORE_EPS, 1.0 - SCORE_EPS)
}

/// `-mean(log s)`: loss for scores that should be "real".
pub fn real_term(g: &mut Graph, scores: Var) -> Var {
    let s = clamp_scores(g, scores);
    let l = g.ln(s);
    let m = g.mean_all(l);
    g.scale(m, -1.0)
}

/// `-mean(log(1 - s))`: loss for scores that should be "fake".
pub fn fake_term(g: &mut Graph, scores: Var) -> Var {
    let s = clamp_scores(g, scores);
    let inv = g.one_minus(s);
    let l = g.ln(inv);
    let m = g.mean_all(l);
    g.scale(m, -1.0)
}

/// `-[log D(r) + log(1-D(a)) + log(1-D(r~)) + log(1-D(a~))]`, each term
/// averaged over its own pedestrians.
pub fn discriminator_loss(
    g: &mut Graph,
    score_real: Var,
    score_aug: Var,
    score_real_pred: Var,
    score_aug_pred: Var,
) -> Result<Var> {
    let mut total = real_term(g, score_real);
    for s in [score_aug, score_real_pred, score_aug_pred] {
        let t = fake_term(g, s);
        total = g.add(total, t)?;
    }
    Ok(total)
}

/// Two-class form used by the baselines and the standalone augmenter:
/// `-[log D(real) + log(1 - D(fake))]`.
pub fn discriminator_loss_pair(g: &mut Graph, score_real: Var, score_fake: Var) -> Result<Var> {
    let r = real_term(g, score_real);
    let f = fake_term(g, score_fake);
    g.add(r, f)
}

/// Per-pedestrian summed squared distance between two point sequences,
/// `n x 1`.
pub fn l2_per_ped(g: &mut Graph, a: &[Var], b: &[Var]) -> Result<Var> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::Shape(format!(
            "l2: sequences of length {} and {}",
            a.len(),
            b.len()
        )));
    }
    let mut sq = Vec::with_capacity(a.len());
    for (&x, &y) in a.iter().zip(b) {
        let d = g.sub(x, y)?;
        sq.push(g.square(d));
    }
    let cat = g.concat_cols(&sq)?;
    g.row_sum(cat)
}

/// Mean over pedestrians of the summed squared pointwise distance.
pub fn l2_loss(g: &mut Graph, a: &[Var], b: &[Var]) -> Result<Var> {
    let per = l2_per_ped(g, a, b)?;
    Ok(g.mean_all(per))
}

/// Per pedestrian, the smallest summed squared distance between `gt` and
/// any candidate; only the winning candidate receives gradient. `n x 1`.
pub fn variety_l2(g: &mut Graph, gt: &[Var], candidates: &[Vec<Var>]) -> Result<Var> {
    if candidates.is_empty() {
        return Err(Error::Argument(
            "variety_l2 needs at least one candidate".into(),
        ));
    }
    let per: Vec<Var> = candidates
        .iter()
        .map(|c| l2_per_ped(g, gt, c))
        .collect::<Result<_>>()?;
    let cat = g.concat_cols(&per)?;
    g.row_min(cat)
}

/// Adversarial and reconstruction parts of a loss.
#[derive(Debug, Clone, Copy)]
pub struct LossParts {
    pub adversarial: Var,
    pub l2: Var,
    pub total: Var,
}

/// `-log D(a) + L2(s, a)` over all `t_pred` points.
pub fn augmenter_loss(g: &mut Graph, score_aug: Var, s: &[Var], a: &[Var]) -> Result<LossParts> {
    for (&x, &y) in s.iter().zip(a) {
        if g.value(x).shape() != g.value(y).shape() {
            return Err(Error::Shape(format!(
                "augmenter_loss: {:?} vs {:?}",
                g.value(x).shape(),
                g.value(y).shape()
            )));
        }
    }
    let adversarial = real_term(g, score_aug);
    let l2 = l2_loss(g, s, a)?;
    let total = g.add(adversarial, l2)?;
    Ok(LossParts {
        adversarial,
        l2,
        total,
    })
}

/// One branch of the generator objective: `-log D(x~) + variety_L2`.
pub fn generator_branch_loss(
    g: &mut Graph,
    score_pred: Var,
    gt_pred: &[Var],
    candidates: &[Vec<Var>],
    pred_len: usize,
) -> Result<LossParts> {
    if gt_pred.len() != pred_len || candidates.iter().any(|c| c.len() != pred_len) {
        return Err(Error::Contract(format!(
            "generator loss covers only the {pred_len} predicted points; got ground truth of {} and candidates of {:?}",
            gt_pred.len(),
            candidates.iter().map(Vec::len).collect::<Vec<_>>()
        )));
    }
    let adversarial = real_term(g, score_pred);
    let per = variety_l2(g, gt_pred, candidates)?;
    let l2 = g.mean_all(per);
    let total = g.add(adversarial, l2)?;
    Ok(LossParts {
        adversarial,
        l2,
        total,
    })
}

/// Full generator objective over the real and synth-augmented branches.
#[allow(clippy::too_many_arguments)]
pub fn generator_loss(
    g: &mut Graph,
    score_real_pred: Var,
    score_aug_pred: Var,
    r_pred: &[Var],
    r_hat: &[Vec<Var>],
    a_pred: &[Var],
    a_hat: &[Vec<Var>],
    pred_len: usize,
) -> Result<(LossParts, LossParts, Var)> {
    let real = generator_branch_loss(g, score_real_pred, r_pred, r_hat, pred_len)?;
    let synth = generator_branch_loss(g, score_aug_pred, a_pred, a_hat, pred_len)?;
    let total = g.add(real.total, synth.total)?;
    Ok((real, synth, total))
}

/// Loss values of one training step.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossReport {
    pub step: usize,
    pub d_loss: f64,
    pub a_adv: f64,
    pub a_l2: f64,
    pub g_real_adv: f64,
    pub g_real_l2: f64,
    pub g_synth_adv: f64,
    pub g_synth_l2: f64,
}

impl LossReport {
    pub const HEADER: &'static str =
        "step d_loss a_adv a_l2 g_real_adv g_real_l2 g_synth_adv g_synth_l2";

    pub fn a_loss(&self) -> f64 {
        self.a_adv + self.a_l2
    }

    pub fn g_loss(&self) -> f64 {
        self.g_real_adv + self.g_real_l2 + self.g_synth_adv + self.g_synth_l2
    }

    fn components(&self) -> [(&'static str, f64); 7] {
        [
            ("d_loss", self.d_loss),
            ("a_adv", self.a_adv),
            ("a_l2", self.a_l2),
            ("g_real_adv", self.g_real_adv),
            ("g_real_l2", self.g_real_l2),
            ("g_synth_adv", self.g_synth_adv),
            ("g_synth_l2", self.g_synth_l2),
        ]
    }

    /// Name of the first non-finite component, if any.
    pub fn non_finite(&self) -> Option<&'static str> {
        self.components()
            .into_iter()
            .find(|(_, v)| !v.is_finite())
            .map(|(n, _)| n)
    }

    pub fn parse_line(line: &str) -> Result<Self> {
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 8 {
            return Err(Error::Data(format!(
                "loss log line needs 8 fields: {line:?}"
            )));
        }
        let num = |s: &str| -> Result<f64> {
            s.parse()
                .map_err(|_| Error::Data(format!("bad loss value {s:?}")))
        };
        Ok(Self {
            step: f[0]
                .parse()
                .map_err(|_| Error::Data(format!("bad step {:?}", f[0])))?,
            d_loss: num(f[1])?,
            a_adv: num(f[2])?,
            a_l2: num(f[3])?,
            g_real_adv: num(f[4])?,
            g_real_l2: num(f[5])?,
            g_synth_adv: num(f[6])?,
            g_synth_l2: num(f[7])?,
        })
    }
}

/// One log line; floats use the shortest exact representation.
impl fmt::Display for LossReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.step)?;
        for (_, v) in self.components() {
            write!(f, " {v:?}")?;
        }
        Ok(())
    }
}
