use rand::Rng;
use serde::{Deserialize, Serialize};

/// Single-hidden-layer ReLU regressor over flattened one-hot features.
///
/// Parameters live in one flat buffer laid out as `[w1 | b1 | w2 | b2]`, with
/// `w1` stored feature-major so the row of an active feature is contiguous.
/// Inputs are given as the list of active feature indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    input_len: usize,
    hidden: usize,
    params: Vec<f64>,
}

impl Mlp {
    /// Uniform init scaled by the number of active inputs per example.
    pub fn new<R: Rng>(input_len: usize, hidden: usize, active_per_input: usize, rng: &mut R) -> Self {
        let n = input_len * hidden + 2 * hidden + 1;
        let mut params = vec![0.0; n];
        let a1 = (3.0 / active_per_input.max(1) as f64).sqrt();
        let a2 = (3.0 / hidden.max(1) as f64).sqrt();
        for w in &mut params[..input_len * hidden] {
            *w = rng.random_range(-a1..a1);
        }
        let w2 = input_len * hidden + hidden;
        for w in &mut params[w2..w2 + hidden] {
            *w = rng.random_range(-a2..a2);
        }
        Mlp {
            input_len,
            hidden,
            params,
        }
    }

    pub fn input_len(&self) -> usize {
        self.input_len
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub(crate) fn from_params(input_len: usize, hidden: usize, params: Vec<f64>) -> Option<Self> {
        (params.len() == input_len * hidden + 2 * hidden + 1).then_some(Mlp {
            input_len,
            hidden,
            params,
        })
    }

    #[inline]
    fn offsets(&self) -> (usize, usize, usize) {
        let b1 = self.input_len * self.hidden;
        (b1, b1 + self.hidden, b1 + 2 * self.hidden)
    }

    /// Hidden pre-activations for one input.
    fn pre_activations(&self, active: &[usize], pre: &mut [f64]) {
        let h = self.hidden;
        let (b1, _, _) = self.offsets();
        pre.copy_from_slice(&self.params[b1..b1 + h]);
        for &f in active {
            let row = &self.params[f * h..(f + 1) * h];
            for (p, w) in pre.iter_mut().zip(row) {
                *p += w;
            }
        }
    }

    pub fn forward(&self, active: &[usize]) -> f64 {
        let mut pre = vec![0.0; self.hidden];
        self.forward_with(active, &mut pre)
    }

    fn forward_with(&self, active: &[usize], pre: &mut [f64]) -> f64 {
        self.pre_activations(active, pre);
        let (_, w2, b2) = self.offsets();
        let w2 = &self.params[w2..w2 + self.hidden];
        pre.iter()
            .zip(w2)
            .map(|(&p, &w)| p.max(0.0) * w)
            .sum::<f64>()
            + self.params[b2]
    }

    /// Mean squared error over `batch` plus `l2 * ||weights||^2` (biases excluded).
    pub fn loss(&self, batch: &[(&[usize], f64)], l2: f64) -> f64 {
        let mut pre = vec![0.0; self.hidden];
        let mse = batch
            .iter()
            .map(|(x, y)| (self.forward_with(x, &mut pre) - y).powi(2))
            .sum::<f64>()
            / batch.len().max(1) as f64;
        mse + l2 * self.weight_norm_sq()
    }

    fn weight_norm_sq(&self) -> f64 {
        let (b1, w2, b2) = self.offsets();
        self.params[..b1].iter().map(|w| w * w).sum::<f64>()
            + self.params[w2..b2].iter().map(|w| w * w).sum::<f64>()
    }

    /// Loss and its gradient with respect to the flat parameter vector.
    pub fn loss_and_gradient(&self, batch: &[(&[usize], f64)], l2: f64, grad: &mut [f64]) -> f64 {
        let h = self.hidden;
        let (b1, w2o, b2) = self.offsets();
        grad.fill(0.0);
        let n = batch.len().max(1) as f64;
        let mut pre = vec![0.0; h];
        let mut sq = 0.0;
        for (x, y) in batch {
            let out = self.forward_with(x, &mut pre);
            let err = out - y;
            sq += err * err;
            let d_out = 2.0 * err / n;
            grad[b2] += d_out;
            let (g_b1, g_w2) = grad[b1..b2].split_at_mut(h);
            let w2 = &self.params[w2o..b2];
            for (((p, gb), gw), &w) in pre.iter_mut().zip(g_b1).zip(g_w2).zip(w2) {
                if *p > 0.0 {
                    *gw += d_out * *p;
                    let d_h = d_out * w;
                    *gb += d_h;
                    *p = d_h;
                } else {
                    *p = 0.0;
                }
            }
            for &f in x.iter() {
                let row = &mut grad[f * h..(f + 1) * h];
                for (g, d) in row.iter_mut().zip(pre.iter()) {
                    *g += d;
                }
            }
        }
        if l2 > 0.0 {
            for range in [0..b1, w2o..b2] {
                for (g, p) in grad[range.clone()].iter_mut().zip(&self.params[range]) {
                    *g += 2.0 * l2 * p;
                }
            }
        }
        sq / n + l2 * self.weight_norm_sq()
    }
}

/// First/second moment state for Adam.
pub(crate) struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    pub(crate) fn new(n: usize) -> Self {
        Adam {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub(crate) fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.t);
        let c2 = 1.0 - Self::BETA2.powi(self.t);
        let step = lr * c2.sqrt() / c1;
        let eps = Self::EPS * c2.sqrt();
        for (((p, &g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = Self::BETA1 * *m + (1.0 - Self::BETA1) * g;
            *v = Self::BETA2 * *v + (1.0 - Self::BETA2) * g * g;
            *p -= step * *m / (v.sqrt() + eps);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn forward_matches_dense_evaluation() {
        let mut rng = stream(1, &[]);
        let net = Mlp::new(6, 4, 2, &mut rng);
        let active = [1usize, 4];
        let p = net.params();
        let mut out = p[6 * 4 + 8];
        for j in 0..4 {
            let pre = p[6 * 4 + j] + p[4 + j] + p[4 * 4 + j];
            out += pre.max(0.0) * p[6 * 4 + 4 + j];
        }
        assert!((net.forward(&active) - out).abs() < 1e-12);
    }

    #[test]
    fn adam_minimises_quadratic() {
        let mut x = vec![3.0, -2.0];
        let mut opt = Adam::new(2);
        for _ in 0..5000 {
            let g = vec![2.0 * x[0], 2.0 * x[1]];
            opt.step(&mut x, &g, 0.01);
        }
        assert!(x.iter().all(|v| v.abs() < 1e-2), "{x:?}");
    }
}
