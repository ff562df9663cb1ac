//! Fully connected ReLU network over f64 with a flat parameter vector.

use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    sizes: Vec<usize>,
    params: Vec<f64>,
}

/// Activations recorded by a forward pass; `acts[0]` is the input and the
/// last entry is the linear output.
#[derive(Debug, Clone)]
pub struct Trace {
    pub acts: Vec<Vec<f64>>,
}

impl Trace {
    pub fn output(&self) -> &[f64] {
        self.acts.last().expect("trace has an output")
    }
}

pub fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

impl Mlp {
    pub fn zeros(sizes: &[usize]) -> Self {
        assert!(sizes.len() >= 2, "need input and output sizes");
        Self {
            sizes: sizes.to_vec(),
            params: vec![0.0; param_count(sizes)],
        }
    }

    /// He-uniform weights for hidden layers, a smaller scale on the output
    /// layer, zero biases.
    pub fn init<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Self {
        let mut net = Self::zeros(sizes);
        let layers = sizes.len() - 1;
        let mut off = 0;
        for (l, w) in sizes.windows(2).enumerate() {
            let (n_in, n_out) = (w[0], w[1]);
            let mut bound = (6.0 / n_in.max(1) as f64).sqrt();
            if l + 1 == layers {
                bound *= 0.1;
            }
            for p in &mut net.params[off..off + n_in * n_out] {
                *p = rng.random_range(-bound..bound);
            }
            off += n_in * n_out + n_out;
        }
        net
    }

    pub fn from_params(sizes: &[usize], params: Vec<f64>) -> Option<Self> {
        (sizes.len() >= 2 && params.len() == param_count(sizes)).then(|| Self {
            sizes: sizes.to_vec(),
            params,
        })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_len(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_len(&self) -> usize {
        *self.sizes.last().expect("nonempty sizes")
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// (weight offset, bias offset, inputs, outputs) per layer.
    fn layers(&self) -> impl Iterator<Item = (usize, usize, usize, usize)> + '_ {
        let mut off = 0;
        self.sizes.windows(2).map(move |w| {
            let (n_in, n_out) = (w[0], w[1]);
            let item = (off, off + n_in * n_out, n_in, n_out);
            off += n_in * n_out + n_out;
            item
        })
    }

    fn affine(&self, (w, b, n_in, n_out): (usize, usize, usize, usize), x: &[f64], relu: bool) -> Vec<f64> {
        let p = &self.params;
        (0..n_out)
            .map(|o| {
                let row = &p[w + o * n_in..w + (o + 1) * n_in];
                let z = p[b + o] + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
                if relu { z.max(0.0) } else { z }
            })
            .collect()
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.input_len(), "input width");
        let last = self.sizes.len() - 2;
        let mut a = x.to_vec();
        for (l, layer) in self.layers().enumerate() {
            a = self.affine(layer, &a, l != last);
        }
        a
    }

    pub fn forward_trace(&self, x: &[f64]) -> Trace {
        assert_eq!(x.len(), self.input_len(), "input width");
        let last = self.sizes.len() - 2;
        let mut acts = vec![x.to_vec()];
        for (l, layer) in self.layers().enumerate() {
            let next = self.affine(layer, acts.last().unwrap(), l != last);
            acts.push(next);
        }
        Trace { acts }
    }

    /// Accumulate d(loss)/d(params) into `grad` given d(loss)/d(output).
    pub fn backward(&self, trace: &Trace, grad_out: &[f64], grad: &mut [f64]) {
        let layers: Vec<_> = self.layers().collect();
        let mut delta = grad_out.to_vec();
        for (l, &(w, b, n_in, n_out)) in layers.iter().enumerate().rev() {
            let input = &trace.acts[l];
            for o in 0..n_out {
                let d = delta[o];
                if d == 0.0 {
                    continue;
                }
                grad[b + o] += d;
                let g = &mut grad[w + o * n_in..w + (o + 1) * n_in];
                for (gi, xi) in g.iter_mut().zip(input) {
                    *gi += d * xi;
                }
            }
            if l == 0 {
                break;
            }
            let mut prev = vec![0.0; n_in];
            for o in 0..n_out {
                let d = delta[o];
                if d == 0.0 {
                    continue;
                }
                let row = &self.params[w + o * n_in..w + (o + 1) * n_in];
                for (p, wi) in prev.iter_mut().zip(row) {
                    *p += d * wi;
                }
            }
            for (p, a) in prev.iter_mut().zip(input) {
                if *a <= 0.0 {
                    *p = 0.0;
                }
            }
            delta = prev;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Adam,
    Sgd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Optimizer {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, learning_rate: f64, params: usize) -> Self {
        let moments = if kind == OptimizerKind::Adam { params } else { 0 };
        Self {
            kind,
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; moments],
            v: vec![0.0; moments],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        match self.kind {
            OptimizerKind::Sgd => {
                for (p, g) in params.iter_mut().zip(grad) {
                    *p -= self.learning_rate * g;
                }
            }
            OptimizerKind::Adam => {
                let c1 = 1.0 - self.beta1.powi(self.t.min(i32::MAX as u64) as i32);
                let c2 = 1.0 - self.beta2.powi(self.t.min(i32::MAX as u64) as i32);
                for i in 0..params.len() {
                    let g = grad[i];
                    self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
                    self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
                    let m_hat = self.m[i] / c1;
                    let v_hat = self.v[i] / c2;
                    params[i] -= self.learning_rate * m_hat / (v_hat.sqrt() + self.eps);
                }
            }
        }
    }
}

/// Scale `grad` down so its L2 norm is at most `max_norm`.
pub fn clip_norm(grad: &mut [f64], max_norm: f64) {
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm && norm > 0.0 {
        let s = max_norm / norm;
        grad.iter_mut().for_each(|g| *g *= s);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn counts_and_shapes() {
        assert_eq!(param_count(&[4, 4, 4, 2]), 50);
        let net = Mlp::zeros(&[3, 5, 2]);
        assert_eq!(net.forward(&[1.0, 2.0, 3.0]), vec![0.0, 0.0]);
        assert_eq!(net.input_len(), 3);
        assert_eq!(net.output_len(), 2);
    }

    #[test]
    fn linear_net_is_affine() {
        // 2 -> 1 with w = [2, -1], b = 0.5
        let net = Mlp::from_params(&[2, 1], vec![2.0, -1.0, 0.5]).unwrap();
        assert_eq!(net.forward(&[3.0, 4.0]), vec![2.5]);
        assert!(Mlp::from_params(&[2, 1], vec![0.0]).is_none());
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut r = rng::stream(1, rng::NETWORK_INIT);
        let net = Mlp::init(&[3, 6, 5, 2], &mut r);
        let x = [0.3, -0.7, 1.1];
        let upstream = [0.4, -1.3];
        let f = |n: &Mlp| n.forward(&x).iter().zip(&upstream).map(|(a, b)| a * b).sum::<f64>();
        let mut grad = vec![0.0; net.params().len()];
        net.backward(&net.forward_trace(&x), &upstream, &mut grad);
        let h = 1e-6;
        for i in 0..grad.len() {
            let mut p = net.clone();
            p.params_mut()[i] += h;
            let mut m = net.clone();
            m.params_mut()[i] -= h;
            let fd = (f(&p) - f(&m)) / (2.0 * h);
            assert!((fd - grad[i]).abs() <= 1e-6 * (1.0 + fd.abs()), "param {i}: {fd} vs {}", grad[i]);
        }
    }

    #[test]
    fn optimizers_descend() {
        for kind in [OptimizerKind::Sgd, OptimizerKind::Adam] {
            let mut p = vec![3.0, -2.0];
            let mut opt = Optimizer::new(kind, 0.1, 2);
            for _ in 0..200 {
                let g: Vec<f64> = p.iter().map(|x| 2.0 * x).collect();
                opt.step(&mut p, &g);
            }
            assert!(p.iter().all(|x| x.abs() < 0.05), "{kind:?}: {p:?}");
        }
    }

    #[test]
    fn clipping() {
        let mut g = vec![3.0, 4.0];
        clip_norm(&mut g, 1.0);
        assert!((g[0] - 0.6).abs() < 1e-12 && (g[1] - 0.8).abs() < 1e-12);
        let mut small = vec![0.1];
        clip_norm(&mut small, 1.0);
        assert_eq!(small, vec![0.1]);
    }
}
