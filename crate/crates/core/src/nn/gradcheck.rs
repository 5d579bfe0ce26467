//! Central finite-difference gradient checking.
//!
//! The checker only ever evaluates forward values; it never looks at the
//! tape's backward rules, so it is an independent oracle for them.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::graph::{Graph, Var};
use super::tensor::Tensor;
use crate::error::Result;

pub const FD_STEP: f64 = 1e-5;

#[derive(Debug, Clone)]
pub struct GradReport {
    /// Largest relative error over all inputs.
    pub max_rel_error: f64,
    /// Per-input relative error `|ga - gn| / max(|ga|, |gn|)`.
    pub per_input: Vec<f64>,
    pub coords_checked: usize,
}

/// Options for [`check_gradients_with`].
#[derive(Debug, Clone, Copy)]
pub struct GradCheckOptions {
    pub step: f64,
    /// Check at most this many coordinates per input (chosen at random).
    pub max_coords_per_input: usize,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            step: FD_STEP,
            max_coords_per_input: usize::MAX,
        }
    }
}

/// Compares the tape gradient of `<R, f(inputs)>` for a random projection
/// `R` (seeded by `proj_seed`) against central differences.
pub fn check_gradients<F>(inputs: &[Tensor], proj_seed: u64, f: F) -> Result<GradReport>
where
    F: Fn(&mut Graph, &[Var]) -> Result<Var>,
{
    check_gradients_with(inputs, proj_seed, GradCheckOptions::default(), f)
}

pub fn check_gradients_with<F>(
    inputs: &[Tensor],
    proj_seed: u64,
    opts: GradCheckOptions,
    f: F,
) -> Result<GradReport>
where
    F: Fn(&mut Graph, &[Var]) -> Result<Var>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(proj_seed);

    // Shape of the output decides the projection.
    let projection = {
        let mut g = Graph::new();
        let vars: Vec<Var> = inputs.iter().map(|t| g.leaf(t.clone())).collect();
        let out = f(&mut g, &vars)?;
        Tensor::uniform(g.value(out).shape(), 1.0, &mut rng)
    };

    let objective = |xs: &[Tensor]| -> Result<f64> {
        let mut g = Graph::new();
        let vars: Vec<Var> = xs.iter().map(|t| g.leaf(t.clone())).collect();
        let out = f(&mut g, &vars)?;
        Ok(g.value(out)
            .data()
            .iter()
            .zip(projection.data())
            .map(|(a, b)| a * b)
            .sum())
    };

    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|t| g.leaf(t.clone())).collect();
    let out = f(&mut g, &vars)?;
    let proj = g.leaf(projection.clone());
    let prod = g.mul(out, proj)?;
    let root = g.sum_all(prod);
    let grads = g.backward(root)?;

    let mut per_input = Vec::with_capacity(inputs.len());
    let mut coords_checked = 0;
    let mut work: Vec<Tensor> = inputs.to_vec();
    for (i, input) in inputs.iter().enumerate() {
        let analytic = grads
            .get(vars[i])
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(input.shape()));
        let n = input.len();
        let coords: Vec<usize> = if n <= opts.max_coords_per_input {
            (0..n).collect()
        } else {
            let mut c = sample(&mut rng, n, opts.max_coords_per_input).into_vec();
            c.sort_unstable();
            c
        };
        let mut diff_sq = 0.0;
        let mut a_sq = 0.0;
        let mut n_sq = 0.0;
        for &k in &coords {
            let orig = input.data()[k];
            work[i].data_mut()[k] = orig + opts.step;
            let plus = objective(&work)?;
            work[i].data_mut()[k] = orig - opts.step;
            let minus = objective(&work)?;
            work[i].data_mut()[k] = orig;
            let numeric = (plus - minus) / (2.0 * opts.step);
            let a = analytic.data()[k];
            diff_sq += (a - numeric).powi(2);
            a_sq += a * a;
            n_sq += numeric * numeric;
        }
        coords_checked += coords.len();
        let denom = a_sq.sqrt().max(n_sq.sqrt());
        per_input.push(if denom == 0.0 {
            0.0
        } else {
            diff_sq.sqrt() / denom
        });
    }
    let max_rel_error = per_input.iter().copied().fold(0.0, f64::max);
    Ok(GradReport {
        max_rel_error,
        per_input,
        coords_checked,
    })
}
