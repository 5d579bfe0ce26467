use rand::Rng;

use super::graph::{Graph, Var};
use super::params::{Bound, ParamId, ParamStore};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// `x W + b`.
pub fn affine(g: &mut Graph, x: Var, w: Var, b: Var) -> Result<Var> {
    let y = g.matmul(x, w)?;
    g.add_bias(y, b)
}

pub fn relu(g: &mut Graph, x: Var) -> Var {
    g.relu(x)
}

/// Fully connected layer with uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) init.
#[derive(Debug, Clone, Copy)]
pub struct Linear {
    pub w: ParamId,
    pub b: ParamId,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Linear {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        in_dim: usize,
        out_dim: usize,
        rng: &mut R,
    ) -> Self {
        let bound = 1.0 / (in_dim.max(1) as f64).sqrt();
        let w = store.add(
            format!("{name}.weight"),
            Tensor::uniform(&[in_dim, out_dim], bound, rng),
        );
        let b = store.add(
            format!("{name}.bias"),
            Tensor::uniform(&[1, out_dim], bound, rng),
        );
        Self {
            w,
            b,
            in_dim,
            out_dim,
        }
    }

    pub fn forward(&self, g: &mut Graph, p: &Bound, x: Var) -> Result<Var> {
        affine(g, x, p[self.w], p[self.b])
    }
}

/// Stack of linear layers, each followed by ReLU.
#[derive(Debug, Clone)]
pub struct ReluMlp {
    pub layers: Vec<Linear>,
}

impl ReluMlp {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        dims: &[usize],
        rng: &mut R,
    ) -> Self {
        assert!(dims.len() >= 2, "mlp needs input and output dims");
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(i, w)| Linear::new(store, &format!("{name}.{i}"), w[0], w[1], rng))
            .collect();
        Self { layers }
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.out_dim)
    }

    pub fn forward(&self, g: &mut Graph, p: &Bound, mut x: Var) -> Result<Var> {
        for layer in &self.layers {
            let y = layer.forward(g, p, x)?;
            x = g.relu(y);
        }
        Ok(x)
    }
}

/// LSTM cell; gate columns are laid out as input, forget, candidate, output.
#[derive(Debug, Clone, Copy)]
pub struct LstmCell {
    pub w_x: ParamId,
    pub w_h: ParamId,
    pub b: ParamId,
    pub in_dim: usize,
    pub hidden: usize,
}

impl LstmCell {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        in_dim: usize,
        hidden: usize,
        rng: &mut R,
    ) -> Self {
        let bound = 1.0 / (hidden as f64).sqrt();
        let w_x = store.add(
            format!("{name}.w_x"),
            Tensor::uniform(&[in_dim, 4 * hidden], bound, rng),
        );
        let w_h = store.add(
            format!("{name}.w_h"),
            Tensor::uniform(&[hidden, 4 * hidden], bound, rng),
        );
        let b = store.add(
            format!("{name}.bias"),
            Tensor::uniform(&[1, 4 * hidden], bound, rng),
        );
        Self {
            w_x,
            w_h,
            b,
            in_dim,
            hidden,
        }
    }

    pub fn step(&self, g: &mut Graph, p: &Bound, x: Var, h: Var, c: Var) -> Result<(Var, Var)> {
        lstm_step(g, x, h, c, p[self.w_x], p[self.w_h], p[self.b])
    }
}

/// One LSTM step: `i, f, o = sigmoid(.)`, `g = tanh(.)`,
/// `c' = f*c + i*g`, `h' = o*tanh(c')`.
pub fn lstm_step(
    g: &mut Graph,
    x: Var,
    h_prev: Var,
    c_prev: Var,
    w_x: Var,
    w_h: Var,
    b: Var,
) -> Result<(Var, Var)> {
    let hidden = g.value(h_prev).cols();
    if g.value(w_h).shape() != [hidden, 4 * hidden] {
        return Err(Error::Shape(format!(
            "lstm_step: hidden state {:?} with recurrent weights {:?}",
            g.value(h_prev).shape(),
            g.value(w_h).shape()
        )));
    }
    if g.value(c_prev).shape() != g.value(h_prev).shape() {
        return Err(Error::Shape(format!(
            "lstm_step: cell state {:?} vs hidden state {:?}",
            g.value(c_prev).shape(),
            g.value(h_prev).shape()
        )));
    }
    let zx = g.matmul(x, w_x)?;
    let zh = g.matmul(h_prev, w_h)?;
    let z = g.add(zx, zh)?;
    let z = g.add_bias(z, b)?;
    let i_pre = g.slice_cols(z, 0, hidden)?;
    let f_pre = g.slice_cols(z, hidden, 2 * hidden)?;
    let g_pre = g.slice_cols(z, 2 * hidden, 3 * hidden)?;
    let o_pre = g.slice_cols(z, 3 * hidden, 4 * hidden)?;
    let i = g.sigmoid(i_pre);
    let f = g.sigmoid(f_pre);
    let cand = g.tanh(g_pre);
    let o = g.sigmoid(o_pre);
    let keep = g.mul(f, c_prev)?;
    let write = g.mul(i, cand)?;
    let c = g.add(keep, write)?;
    let tc = g.tanh(c);
    let h = g.mul(o, tc)?;
    Ok((h, c))
}

pub fn max_pool(g: &mut Graph, xs: &[Var]) -> Result<Var> {
    g.max_pool(xs)
}
