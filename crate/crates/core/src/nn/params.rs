use std::ops::Index;

use super::graph::{Gradients, Graph, Var};
use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamId(usize);

/// Named parameters with gradient accumulators, in insertion order.
#[derive(Debug, Clone, Default)]
pub struct ParamStore {
    names: Vec<String>,
    values: Vec<Tensor>,
    grads: Vec<Tensor>,
}

/// Graph handles for every parameter of one store, valid for one [`Graph`].
#[derive(Debug, Clone)]
pub struct Bound(Vec<Var>);

impl Bound {
    pub fn from_vars(vars: Vec<Var>) -> Self {
        Self(vars)
    }

    pub fn vars(&self) -> &[Var] {
        &self.0
    }
}

impl Index<ParamId> for Bound {
    type Output = Var;

    fn index(&self, id: ParamId) -> &Var {
        &self.0[id.0]
    }
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a parameter. Names must be unique.
    pub fn add(&mut self, name: impl Into<String>, value: Tensor) -> ParamId {
        let name = name.into();
        assert!(
            !self.names.contains(&name),
            "duplicate parameter name {name}"
        );
        self.grads.push(Tensor::zeros(value.shape()));
        self.values.push(value);
        self.names.push(name);
        ParamId(self.values.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn num_scalars(&self) -> usize {
        self.values.iter().map(Tensor::len).sum()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn values(&self) -> &[Tensor] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Tensor] {
        &mut self.values
    }

    pub fn grads(&self) -> &[Tensor] {
        &self.grads
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.values[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.values[id.0]
    }

    pub fn by_name(&self, name: &str) -> Option<&Tensor> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| &self.values[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.names.iter().map(String::as_str).zip(&self.values)
    }

    /// Puts every parameter on `g` as a leaf.
    pub fn bind(&self, g: &mut Graph) -> Bound {
        Bound(self.values.iter().map(|t| g.leaf(t.clone())).collect())
    }

    pub fn zero_grad(&mut self) {
        self.grads.iter_mut().for_each(|t| t.fill(0.0));
    }

    /// Adds the gradients of `bound` into the accumulators.
    pub fn accumulate(&mut self, bound: &Bound, grads: &Gradients) {
        for (slot, &v) in self.grads.iter_mut().zip(&bound.0) {
            if let Some(g) = grads.get(v) {
                slot.add_assign_scaled(g, 1.0);
            }
        }
    }

    pub fn grad_norm(&self) -> f64 {
        self.grads.iter().map(Tensor::sq_norm).sum::<f64>().sqrt()
    }

    /// Rescales all gradients so their global norm is at most `max_norm`.
    pub fn clip_grad_norm(&mut self, max_norm: f64) -> f64 {
        let norm = self.grad_norm();
        if norm > max_norm && norm > 0.0 {
            let s = max_norm / norm;
            for g in &mut self.grads {
                g.data_mut().iter_mut().for_each(|v| *v *= s);
            }
        }
        norm
    }

    pub fn fill_all(&mut self, value: f64) {
        self.values.iter_mut().for_each(|t| t.fill(value));
    }

    /// Replaces values from `(name, tensor)` records; every parameter must be
    /// present with the same shape.
    pub fn load_records(&mut self, records: &[(String, Tensor)], prefix: &str) -> Result<()> {
        for (name, value) in self.names.iter().zip(self.values.iter_mut()) {
            let full = format!("{prefix}{name}");
            let (_, t) = records
                .iter()
                .find(|(n, _)| *n == full)
                .ok_or_else(|| Error::Corrupt(format!("missing parameter {full}")))?;
            if t.shape() != value.shape() {
                return Err(Error::Corrupt(format!(
                    "parameter {full}: stored shape {:?}, model expects {:?}",
                    t.shape(),
                    value.shape()
                )));
            }
            *value = t.clone();
        }
        Ok(())
    }

    pub fn bit_eq(&self, other: &ParamStore) -> bool {
        self.names == other.names
            && self
                .values
                .iter()
                .zip(&other.values)
                .all(|(a, b)| a.bit_eq(b))
    }
}
