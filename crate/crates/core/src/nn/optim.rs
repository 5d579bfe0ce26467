use super::params::ParamStore;
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Adam with bias correction.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl Adam {
    pub fn new(store: &ParamStore, lr: f64, betas: (f64, f64)) -> Self {
        let zeros = || {
            store
                .values()
                .iter()
                .map(|t| Tensor::zeros(t.shape()))
                .collect()
        };
        Self {
            lr,
            beta1: betas.0,
            beta2: betas.1,
            eps: 1e-8,
            step: 0,
            m: zeros(),
            v: zeros(),
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// Applies the accumulated gradients of `store`, then leaves them untouched.
    pub fn step(&mut self, store: &mut ParamStore) {
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        let grads: Vec<Tensor> = store.grads().to_vec();
        for (k, (p, g)) in store.values_mut().iter_mut().zip(&grads).enumerate() {
            let (m, v) = (&mut self.m[k], &mut self.v[k]);
            for (((pv, &gv), mv), vv) in p
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(m.data_mut())
                .zip(v.data_mut())
            {
                *mv = self.beta1 * *mv + (1.0 - self.beta1) * gv;
                *vv = self.beta2 * *vv + (1.0 - self.beta2) * gv * gv;
                let mhat = *mv / bc1;
                let vhat = *vv / bc2;
                *pv -= self.lr * mhat / (vhat.sqrt() + self.eps);
            }
        }
    }

    /// Moment tensors as `(name, tensor)` records for checkpointing.
    pub fn state_records(&self, prefix: &str, store: &ParamStore) -> Vec<(String, Tensor)> {
        let mut out = Vec::with_capacity(2 * self.m.len() + 1);
        out.push((
            format!("{prefix}step"),
            Tensor::new(vec![1], vec![self.step as f64]).expect("scalar"),
        ));
        for ((name, m), v) in store.names().iter().zip(&self.m).zip(&self.v) {
            out.push((format!("{prefix}m.{name}"), m.clone()));
            out.push((format!("{prefix}v.{name}"), v.clone()));
        }
        out
    }

    pub fn load_state(
        &mut self,
        records: &[(String, Tensor)],
        prefix: &str,
        store: &ParamStore,
    ) -> Result<()> {
        let find = |key: String| {
            records
                .iter()
                .find(|(n, _)| *n == key)
                .map(|(_, t)| t.clone())
                .ok_or_else(|| Error::Corrupt(format!("missing optimizer record {key}")))
        };
        self.step = find(format!("{prefix}step"))?.scalar() as u64;
        for (k, name) in store.names().iter().enumerate() {
            let m = find(format!("{prefix}m.{name}"))?;
            let v = find(format!("{prefix}v.{name}"))?;
            if m.shape() != self.m[k].shape() || v.shape() != self.v[k].shape() {
                return Err(Error::Corrupt(format!("optimizer state shape for {name}")));
            }
            self.m[k] = m;
            self.v[k] = v;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_lr_against_gradient_sign() {
        let mut store = ParamStore::new();
        store.add("p", Tensor::matrix(1, 2, vec![1.0, -1.0]));
        let mut adam = Adam::new(&store, 0.1, (0.5, 0.999));
        // populate gradients by hand via a tiny graph
        let mut g = crate::nn::Graph::new();
        let b = store.bind(&mut g);
        let w = g.leaf(Tensor::matrix(1, 2, vec![3.0, -2.0]));
        let y = g.mul(b.vars()[0], w).unwrap();
        let s = g.sum_all(y);
        let grads = g.backward(s).unwrap();
        store.accumulate(&b, &grads);
        adam.step(&mut store);
        let p = store.values()[0].data();
        assert!((p[0] - 0.9).abs() < 1e-6);
        assert!((p[1] - (-0.9)).abs() < 1e-6);
    }

    #[test]
    fn zero_lr_is_identity() {
        let mut store = ParamStore::new();
        store.add("p", Tensor::matrix(1, 2, vec![0.25, 7.0]));
        let before = store.clone();
        let mut adam = Adam::new(&store, 0.0, (0.5, 0.999));
        adam.step(&mut store);
        assert!(store.bit_eq(&before));
    }
}
