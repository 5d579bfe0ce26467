//! Tape-based reverse-mode differentiation over [`Tensor`]s.
//!
//! A [`Graph`] records every operation applied to its variables. Calling
//! [`Graph::backward`] on a scalar node walks the tape in reverse and
//! returns the gradient of that scalar with respect to every node.
//!
//! The operator set is deliberately small: it covers exactly what the
//! encoder, pooling, decoder and loss code in this crate needs.

use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Handle to a node on a [`Graph`] tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    AddBias(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Offset(Var),
    Relu(Var),
    Sigmoid(Var),
    Tanh(Var),
    Ln(Var),
    Square(Var),
    Clamp(Var, f64, f64),
    ConcatCols(Vec<Var>),
    SliceCols(Var, usize),
    GatherRows(Var, Vec<usize>),
    /// Per output element, the source row that won the max (None for empty groups).
    SegmentMax(Var, Vec<Option<usize>>),
    /// Per output element, the input that won the max.
    MaxPool(Vec<Var>, Vec<usize>),
    RowSum(Var),
    SumAll(Var),
    /// Per row, the column holding the minimum.
    RowMin(Var, Vec<usize>),
}

struct Node {
    value: Tensor,
    op: Op,
}

/// Gradients produced by [`Graph::backward`], indexed by [`Var`].
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient for `v`; `None` when `v` does not influence the root.
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor> {
        self.grads.get_mut(v.0).and_then(Option::take)
    }
}

#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

fn check_rank2(t: &Tensor, what: &str) -> Result<()> {
    if t.shape().len() != 2 {
        return Err(Error::Shape(format!(
            "{what}: expected rank-2 tensor, got shape {:?}",
            t.shape()
        )));
    }
    Ok(())
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    /// Input or parameter node.
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn shape2(&self, v: Var) -> (usize, usize) {
        let t = self.value(v);
        (t.rows(), t.cols())
    }

    /// `a @ b` for rank-2 tensors.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        check_rank2(ta, "matmul lhs")?;
        check_rank2(tb, "matmul rhs")?;
        let (n, k) = (ta.rows(), ta.cols());
        let (k2, m) = (tb.rows(), tb.cols());
        if k != k2 {
            return Err(Error::Shape(format!(
                "matmul: {:?} x {:?}",
                ta.shape(),
                tb.shape()
            )));
        }
        let (ad, bd) = (ta.data(), tb.data());
        let mut out = vec![0.0; n * m];
        for i in 0..n {
            let orow = &mut out[i * m..(i + 1) * m];
            for p in 0..k {
                let av = ad[i * k + p];
                if av == 0.0 {
                    continue;
                }
                let brow = &bd[p * m..(p + 1) * m];
                for (o, &bv) in orow.iter_mut().zip(brow) {
                    *o += av * bv;
                }
            }
        }
        Ok(self.push(Tensor::matrix(n, m, out), Op::MatMul(a, b)))
    }

    /// `x + b` with the single-row `b` broadcast over the rows of `x`.
    pub fn add_bias(&mut self, x: Var, b: Var) -> Result<Var> {
        let (tx, tb) = (self.value(x), self.value(b));
        check_rank2(tx, "add_bias input")?;
        if tb.len() != tx.cols() {
            return Err(Error::Shape(format!(
                "add_bias: input {:?} with bias {:?}",
                tx.shape(),
                tb.shape()
            )));
        }
        let c = tx.cols();
        let mut out = tx.clone();
        for (i, v) in out.data_mut().iter_mut().enumerate() {
            *v += tb.data()[i % c];
        }
        Ok(self.push(out, Op::AddBias(x, b)))
    }

    fn same_shape(&self, a: Var, b: Var, what: &str) -> Result<()> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(Error::Shape(format!(
                "{what}: {:?} vs {:?}",
                ta.shape(),
                tb.shape()
            )));
        }
        Ok(())
    }

    fn zip_with(&self, a: Var, b: Var, f: impl Fn(f64, f64) -> f64) -> Tensor {
        let (ta, tb) = (self.value(a), self.value(b));
        let data = ta
            .data()
            .iter()
            .zip(tb.data())
            .map(|(&x, &y)| f(x, y))
            .collect();
        Tensor::new(ta.shape().to_vec(), data).expect("same shape")
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "add")?;
        let v = self.zip_with(a, b, |x, y| x + y);
        Ok(self.push(v, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "sub")?;
        let v = self.zip_with(a, b, |x, y| x - y);
        Ok(self.push(v, Op::Sub(a, b)))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "mul")?;
        let v = self.zip_with(a, b, |x, y| x * y);
        Ok(self.push(v, Op::Mul(a, b)))
    }

    pub fn scale(&mut self, x: Var, s: f64) -> Var {
        let v = self.value(x).map(|a| a * s);
        self.push(v, Op::Scale(x, s))
    }

    /// `c + x` for a constant `c`.
    pub fn offset(&mut self, x: Var, c: f64) -> Var {
        let v = self.value(x).map(|a| a + c);
        self.push(v, Op::Offset(x))
    }

    /// `1 - x`.
    pub fn one_minus(&mut self, x: Var) -> Var {
        let neg = self.scale(x, -1.0);
        self.offset(neg, 1.0)
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let v = self.value(x).map(|a| if a > 0.0 { a } else { 0.0 });
        self.push(v, Op::Relu(x))
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let v = self.value(x).map(sigmoid);
        self.push(v, Op::Sigmoid(x))
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        let v = self.value(x).map(f64::tanh);
        self.push(v, Op::Tanh(x))
    }

    pub fn ln(&mut self, x: Var) -> Var {
        let v = self.value(x).map(f64::ln);
        self.push(v, Op::Ln(x))
    }

    pub fn square(&mut self, x: Var) -> Var {
        let v = self.value(x).map(|a| a * a);
        self.push(v, Op::Square(x))
    }

    /// Clamp into `[lo, hi]`; the gradient is zero where clamping is active.
    pub fn clamp(&mut self, x: Var, lo: f64, hi: f64) -> Var {
        let v = self.value(x).map(|a| a.clamp(lo, hi));
        self.push(v, Op::Clamp(x, lo, hi))
    }

    pub fn concat_cols(&mut self, xs: &[Var]) -> Result<Var> {
        let Some(&first) = xs.first() else {
            return Err(Error::Argument("concat_cols of nothing".into()));
        };
        let n = self.value(first).rows();
        for &x in xs {
            check_rank2(self.value(x), "concat_cols")?;
            if self.value(x).rows() != n {
                return Err(Error::Shape(format!(
                    "concat_cols: row counts {} vs {:?}",
                    n,
                    self.value(x).shape()
                )));
            }
        }
        let total: usize = xs.iter().map(|&x| self.value(x).cols()).sum();
        let mut out = Vec::with_capacity(n * total);
        for r in 0..n {
            for &x in xs {
                out.extend_from_slice(self.value(x).row(r));
            }
        }
        Ok(self.push(Tensor::matrix(n, total, out), Op::ConcatCols(xs.to_vec())))
    }

    /// Columns `start..end`.
    pub fn slice_cols(&mut self, x: Var, start: usize, end: usize) -> Result<Var> {
        let t = self.value(x);
        check_rank2(t, "slice_cols")?;
        if start >= end || end > t.cols() {
            return Err(Error::Shape(format!(
                "slice_cols {start}..{end} of {:?}",
                t.shape()
            )));
        }
        let n = t.rows();
        let mut out = Vec::with_capacity(n * (end - start));
        for r in 0..n {
            out.extend_from_slice(&t.row(r)[start..end]);
        }
        Ok(self.push(Tensor::matrix(n, end - start, out), Op::SliceCols(x, start)))
    }

    /// Rows of `x` picked by `idx` (repeats allowed).
    pub fn gather_rows(&mut self, x: Var, idx: &[usize]) -> Result<Var> {
        let t = self.value(x);
        check_rank2(t, "gather_rows")?;
        let c = t.cols();
        let mut out = Vec::with_capacity(idx.len() * c);
        for &i in idx {
            if i >= t.rows() {
                return Err(Error::Shape(format!(
                    "gather_rows: index {i} out of {} rows",
                    t.rows()
                )));
            }
            out.extend_from_slice(t.row(i));
        }
        Ok(self.push(
            Tensor::matrix(idx.len(), c, out),
            Op::GatherRows(x, idx.to_vec()),
        ))
    }

    /// Output row `g` is the element-wise max over the rows of `x` listed
    /// in `groups[g]`. An empty group yields a zero row. Ties go to the
    /// first listed row.
    pub fn segment_max(&mut self, x: Var, groups: &[Vec<usize>]) -> Result<Var> {
        let t = self.value(x);
        check_rank2(t, "segment_max")?;
        let c = t.cols();
        let mut out = vec![0.0; groups.len() * c];
        let mut arg = vec![None; groups.len() * c];
        for (g, rows) in groups.iter().enumerate() {
            for &r in rows {
                if r >= t.rows() {
                    return Err(Error::Shape(format!(
                        "segment_max: row {r} out of {}",
                        t.rows()
                    )));
                }
                for j in 0..c {
                    let v = t.get(r, j);
                    let k = g * c + j;
                    if arg[k].is_none() || v > out[k] {
                        out[k] = v;
                        arg[k] = Some(r);
                    }
                }
            }
        }
        Ok(self.push(Tensor::matrix(groups.len(), c, out), Op::SegmentMax(x, arg)))
    }

    /// Element-wise maximum across same-shaped tensors; ties go to the first.
    pub fn max_pool(&mut self, xs: &[Var]) -> Result<Var> {
        let Some(&first) = xs.first() else {
            return Err(Error::Argument("max_pool over an empty sequence".into()));
        };
        for &x in &xs[1..] {
            self.same_shape(first, x, "max_pool")?;
        }
        let mut out = self.value(first).clone();
        let mut arg = vec![0usize; out.len()];
        for (which, &x) in xs.iter().enumerate().skip(1) {
            for (k, &v) in self.value(x).data().iter().enumerate() {
                if v > out.data()[k] {
                    out.data_mut()[k] = v;
                    arg[k] = which;
                }
            }
        }
        Ok(self.push(out, Op::MaxPool(xs.to_vec(), arg)))
    }

    /// Sum of each row: `n x c -> n x 1`.
    pub fn row_sum(&mut self, x: Var) -> Result<Var> {
        let t = self.value(x);
        check_rank2(t, "row_sum")?;
        let data = (0..t.rows()).map(|r| t.row(r).iter().sum()).collect();
        Ok(self.push(Tensor::matrix(t.rows(), 1, data), Op::RowSum(x)))
    }

    /// Minimum of each row: `n x k -> n x 1`; ties go to the first column.
    pub fn row_min(&mut self, x: Var) -> Result<Var> {
        let t = self.value(x);
        check_rank2(t, "row_min")?;
        if t.cols() == 0 {
            return Err(Error::Argument("row_min over zero columns".into()));
        }
        let mut vals = Vec::with_capacity(t.rows());
        let mut arg = Vec::with_capacity(t.rows());
        for r in 0..t.rows() {
            let (j, v) =
                t.row(r)
                    .iter()
                    .copied()
                    .enumerate()
                    .fold(
                        (0, f64::INFINITY),
                        |best, (j, v)| if v < best.1 { (j, v) } else { best },
                    );
            vals.push(v);
            arg.push(j);
        }
        Ok(self.push(Tensor::matrix(t.rows(), 1, vals), Op::RowMin(x, arg)))
    }

    pub fn sum_all(&mut self, x: Var) -> Var {
        let s = self.value(x).sum();
        self.push(Tensor::matrix(1, 1, vec![s]), Op::SumAll(x))
    }

    pub fn mean_all(&mut self, x: Var) -> Var {
        let n = self.value(x).len().max(1) as f64;
        let s = self.sum_all(x);
        self.scale(s, 1.0 / n)
    }

    /// Reverse sweep from the one-element node `root`.
    pub fn backward(&self, root: Var) -> Result<Gradients> {
        if self.value(root).len() != 1 {
            return Err(Error::Shape(format!(
                "backward from non-scalar of shape {:?}",
                self.value(root).shape()
            )));
        }
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[root.0] = Some(Tensor::filled(self.value(root).shape(), 1.0));

        for idx in (0..=root.0).rev() {
            let Some(gout) = grads[idx].take() else {
                continue;
            };
            let node = &self.nodes[idx];
            self.propagate(node, &gout, &mut grads);
            grads[idx] = Some(gout);
        }
        Ok(Gradients { grads })
    }

    fn propagate(&self, node: &Node, gout: &Tensor, grads: &mut [Option<Tensor>]) {
        let acc = |grads: &mut [Option<Tensor>], v: Var, g: Tensor| match &mut grads[v.0] {
            Some(existing) => existing.add_assign_scaled(&g, 1.0),
            slot @ None => *slot = Some(g),
        };
        let elementwise = |x: Var, f: &dyn Fn(f64, f64, f64) -> f64| {
            // f(input, output, upstream)
            let xin = self.value(x);
            let data = xin
                .data()
                .iter()
                .zip(node.value.data())
                .zip(gout.data())
                .map(|((&a, &y), &g)| f(a, y, g))
                .collect();
            Tensor::new(xin.shape().to_vec(), data).expect("same shape")
        };

        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                let (n, k, m) = (ta.rows(), ta.cols(), tb.cols());
                let (ad, bd, gd) = (ta.data(), tb.data(), gout.data());
                // dA = G B^T
                let mut ga = vec![0.0; n * k];
                for i in 0..n {
                    let grow = &gd[i * m..(i + 1) * m];
                    for p in 0..k {
                        let brow = &bd[p * m..(p + 1) * m];
                        ga[i * k + p] = grow.iter().zip(brow).map(|(x, y)| x * y).sum();
                    }
                }
                // dB = A^T G
                let mut gb = vec![0.0; k * m];
                for i in 0..n {
                    let grow = &gd[i * m..(i + 1) * m];
                    for p in 0..k {
                        let av = ad[i * k + p];
                        if av == 0.0 {
                            continue;
                        }
                        let out = &mut gb[p * m..(p + 1) * m];
                        for (o, &g) in out.iter_mut().zip(grow) {
                            *o += av * g;
                        }
                    }
                }
                acc(grads, *a, Tensor::new(ta.shape().to_vec(), ga).unwrap());
                acc(grads, *b, Tensor::new(tb.shape().to_vec(), gb).unwrap());
            }
            Op::AddBias(x, b) => {
                let tb = self.value(*b);
                let c = tb.len();
                let mut gb = vec![0.0; c];
                for (i, g) in gout.data().iter().enumerate() {
                    gb[i % c] += g;
                }
                acc(grads, *x, gout.clone());
                acc(grads, *b, Tensor::new(tb.shape().to_vec(), gb).unwrap());
            }
            Op::Add(a, b) => {
                acc(grads, *a, gout.clone());
                acc(grads, *b, gout.clone());
            }
            Op::Sub(a, b) => {
                acc(grads, *a, gout.clone());
                acc(grads, *b, gout.map(|g| -g));
            }
            Op::Mul(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                let ga = gout
                    .data()
                    .iter()
                    .zip(tb.data())
                    .map(|(g, y)| g * y)
                    .collect();
                let gb = gout
                    .data()
                    .iter()
                    .zip(ta.data())
                    .map(|(g, x)| g * x)
                    .collect();
                acc(grads, *a, Tensor::new(ta.shape().to_vec(), ga).unwrap());
                acc(grads, *b, Tensor::new(tb.shape().to_vec(), gb).unwrap());
            }
            Op::Scale(x, s) => acc(grads, *x, gout.map(|g| g * s)),
            Op::Offset(x) => acc(grads, *x, gout.clone()),
            Op::Relu(x) => acc(
                grads,
                *x,
                elementwise(*x, &|a, _, g| if a > 0.0 { g } else { 0.0 }),
            ),
            Op::Sigmoid(x) => acc(grads, *x, elementwise(*x, &|_, y, g| g * y * (1.0 - y))),
            Op::Tanh(x) => acc(grads, *x, elementwise(*x, &|_, y, g| g * (1.0 - y * y))),
            Op::Ln(x) => acc(grads, *x, elementwise(*x, &|a, _, g| g / a)),
            Op::Square(x) => acc(grads, *x, elementwise(*x, &|a, _, g| 2.0 * a * g)),
            Op::Clamp(x, lo, hi) => {
                let (lo, hi) = (*lo, *hi);
                acc(
                    grads,
                    *x,
                    elementwise(*x, &|a, _, g| if a >= lo && a <= hi { g } else { 0.0 }),
                )
            }
            Op::ConcatCols(xs) => {
                let n = gout.rows();
                let total = gout.cols();
                let mut offset = 0;
                for &x in xs {
                    let c = self.value(x).cols();
                    let mut g = Vec::with_capacity(n * c);
                    for r in 0..n {
                        g.extend_from_slice(
                            &gout.data()[r * total + offset..r * total + offset + c],
                        );
                    }
                    acc(grads, x, Tensor::matrix(n, c, g));
                    offset += c;
                }
            }
            Op::SliceCols(x, start) => {
                let t = self.value(*x);
                let (n, c) = (t.rows(), t.cols());
                let w = gout.cols();
                let mut g = vec![0.0; n * c];
                for r in 0..n {
                    g[r * c + start..r * c + start + w].copy_from_slice(gout.row(r));
                }
                acc(grads, *x, Tensor::matrix(n, c, g));
            }
            Op::GatherRows(x, idx) => {
                let (n, c) = self.shape2(*x);
                let mut g = vec![0.0; n * c];
                for (o, &i) in idx.iter().enumerate() {
                    for (dst, src) in g[i * c..(i + 1) * c].iter_mut().zip(gout.row(o)) {
                        *dst += src;
                    }
                }
                acc(grads, *x, Tensor::matrix(n, c, g));
            }
            Op::SegmentMax(x, arg) => {
                let (n, c) = self.shape2(*x);
                let mut g = vec![0.0; n * c];
                for (k, src) in arg.iter().enumerate() {
                    if let Some(r) = src {
                        g[r * c + k % c] += gout.data()[k];
                    }
                }
                acc(grads, *x, Tensor::matrix(n, c, g));
            }
            Op::MaxPool(xs, arg) => {
                let shape = gout.shape().to_vec();
                let mut parts: Vec<Vec<f64>> = xs.iter().map(|_| vec![0.0; gout.len()]).collect();
                for (k, &which) in arg.iter().enumerate() {
                    parts[which][k] = gout.data()[k];
                }
                for (&x, g) in xs.iter().zip(parts) {
                    acc(grads, x, Tensor::new(shape.clone(), g).unwrap());
                }
            }
            Op::RowSum(x) => {
                let (n, c) = self.shape2(*x);
                let mut g = Vec::with_capacity(n * c);
                for r in 0..n {
                    g.extend(std::iter::repeat(gout.data()[r]).take(c));
                }
                acc(grads, *x, Tensor::matrix(n, c, g));
            }
            Op::SumAll(x) => {
                let t = self.value(*x);
                acc(grads, *x, Tensor::filled(t.shape(), gout.scalar()));
            }
            Op::RowMin(x, arg) => {
                let (n, c) = self.shape2(*x);
                let mut g = vec![0.0; n * c];
                for (r, &j) in arg.iter().enumerate() {
                    g[r * c + j] = gout.data()[r];
                }
                acc(grads, *x, Tensor::matrix(n, c, g));
            }
        }
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradcheck::check_gradients;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rand_t(shape: &[usize], seed: u64) -> Tensor {
        Tensor::uniform(shape, 1.0, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    #[test]
    fn matmul_values() {
        let mut g = Graph::new();
        let a = g.leaf(Tensor::matrix(2, 2, vec![1.0, 2.0, 3.0, 4.0]));
        let b = g.leaf(Tensor::matrix(2, 1, vec![1.0, -1.0]));
        let y = g.matmul(a, b).unwrap();
        assert_eq!(g.value(y).data(), &[-1.0, -1.0]);
    }

    #[test]
    fn matmul_shape_error_names_shapes() {
        let mut g = Graph::new();
        let a = g.leaf(Tensor::zeros(&[2, 3]));
        let b = g.leaf(Tensor::zeros(&[2, 3]));
        let err = g.matmul(a, b).unwrap_err().to_string();
        assert!(err.contains("[2, 3]"), "{err}");
    }

    #[test]
    fn max_pool_definition() {
        let mut g = Graph::new();
        let a = g.leaf(Tensor::matrix(1, 2, vec![1.0, 5.0]));
        let b = g.leaf(Tensor::matrix(1, 2, vec![3.0, 2.0]));
        let y = g.max_pool(&[a, b]).unwrap();
        assert_eq!(g.value(y).data(), &[3.0, 5.0]);
        let single = g.max_pool(&[a]).unwrap();
        assert_eq!(g.value(single).data(), g.value(a).data());
        assert!(g.max_pool(&[]).is_err());
    }

    #[test]
    fn max_pool_ties_route_to_first() {
        let mut g = Graph::new();
        let a = g.leaf(Tensor::matrix(1, 1, vec![2.0]));
        let b = g.leaf(Tensor::matrix(1, 1, vec![2.0]));
        let y = g.max_pool(&[a, b]).unwrap();
        let s = g.sum_all(y);
        let grads = g.backward(s).unwrap();
        assert_eq!(grads.get(a).unwrap().data(), &[1.0]);
        assert_eq!(grads.get(b).unwrap().data(), &[0.0]);
    }

    #[test]
    fn segment_max_empty_group_is_zero() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::matrix(2, 2, vec![-1.0, -2.0, -3.0, 4.0]));
        let y = g.segment_max(x, &[vec![0, 1], vec![]]).unwrap();
        assert_eq!(g.value(y).data(), &[-1.0, 4.0, 0.0, 0.0]);
    }

    #[test]
    fn composite_gradient_matches_finite_differences() {
        let inputs = vec![rand_t(&[3, 4], 1), rand_t(&[4, 5], 2), rand_t(&[1, 5], 3)];
        let report = check_gradients(&inputs, 99, |g, v| {
            let h = g.matmul(v[0], v[1])?;
            let h = g.add_bias(h, v[2])?;
            let a = g.tanh(h);
            let b = g.sigmoid(h);
            let c = g.mul(a, b)?;
            let s = g.slice_cols(c, 1, 4)?;
            let q = g.square(s);
            let gathered = g.gather_rows(q, &[2, 0, 2])?;
            let m = g.segment_max(gathered, &[vec![0, 1], vec![2]])?;
            let r = g.row_sum(m)?;
            let o = g.offset(r, 3.0);
            let l = g.ln(o);
            let cat = g.concat_cols(&[l, r])?;
            Ok(g.row_min(cat)?)
        })
        .unwrap();
        assert!(report.max_rel_error < 1e-6, "{report:?}");
    }
}
