//! Fully connected leaky-ReLU network with hand-written backpropagation.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::rng::{rng_for, stream};

/// Layer widths of the policy network.
pub const POLICY_ARCH: [usize; 5] = [35, 256, 256, 256, 9];

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    /// `out × in`
    pub w: DMatrix<f64>,
    pub b: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Layer>,
    pub leaky_slope: f64,
}

/// Activations cached by a batched forward pass; column `j` is sample `j`.
pub struct ForwardCache {
    /// Input followed by every post-activation (the last is the output).
    pub acts: Vec<DMatrix<f64>>,
    /// Pre-activations of each layer.
    pub pre: Vec<DMatrix<f64>>,
}

impl Mlp {
    pub fn zeros(arch: &[usize], leaky_slope: f64) -> Self {
        let layers = arch
            .windows(2)
            .map(|w| Layer { w: DMatrix::zeros(w[1], w[0]), b: DVector::zeros(w[1]) })
            .collect();
        Self { layers, leaky_slope }
    }

    /// He-normal weights, zero biases.
    pub fn init(arch: &[usize], leaky_slope: f64, seed: u64) -> Self {
        let mut rng = rng_for(seed, stream::INIT_WEIGHTS, 0);
        let mut net = Self::zeros(arch, leaky_slope);
        for layer in &mut net.layers {
            let fan_in = layer.w.ncols() as f64;
            let gain = (2.0 / (1.0 + leaky_slope * leaky_slope)).sqrt();
            let normal = Normal::new(0.0, gain / fan_in.sqrt()).expect("positive std");
            for v in layer.w.iter_mut() {
                *v = normal.sample(&mut rng);
            }
        }
        net
    }

    pub fn arch(&self) -> Vec<usize> {
        let mut a = vec![self.layers[0].w.ncols()];
        a.extend(self.layers.iter().map(|l| l.w.nrows()));
        a
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].w.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.w.nrows())
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|l| l.w.iter().chain(l.b.iter()).all(|v| v.is_finite()))
    }

    fn leaky(&self, z: f64) -> f64 {
        if z > 0.0 {
            z
        } else {
            self.leaky_slope * z
        }
    }

    pub fn forward_batch(&self, x: &DMatrix<f64>) -> ForwardCache {
        let mut acts = vec![x.clone()];
        let mut pre = Vec::with_capacity(self.layers.len());
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = &layer.w * acts.last().expect("input present");
            for mut col in z.column_iter_mut() {
                col += &layer.b;
            }
            let a = if i == last { z.clone() } else { z.map(|v| self.leaky(v)) };
            pre.push(z);
            acts.push(a);
        }
        ForwardCache { acts, pre }
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let cache = self.forward_batch(&DMatrix::from_column_slice(x.len(), 1, x));
        cache.acts.last().expect("output present").column(0).iter().copied().collect()
    }

    /// Mean over samples of the squared L2 error.
    pub fn loss(&self, x: &DMatrix<f64>, t: &DMatrix<f64>) -> f64 {
        let out = self.forward_batch(x).acts.pop().expect("output present");
        (out - t).norm_squared() / t.ncols().max(1) as f64
    }

    /// Loss and its gradient with respect to every parameter, laid out like
    /// `self`.
    pub fn loss_and_grad(&self, x: &DMatrix<f64>, t: &DMatrix<f64>) -> (f64, Mlp) {
        let n = t.ncols().max(1) as f64;
        let cache = self.forward_batch(x);
        let out = cache.acts.last().expect("output present");
        let diff = out - t;
        let loss = diff.norm_squared() / n;
        let mut delta = diff * (2.0 / n);
        let mut grads: Vec<Layer> = Vec::with_capacity(self.layers.len());
        for i in (0..self.layers.len()).rev() {
            let gw = &delta * cache.acts[i].transpose();
            let gb = delta.column_sum();
            grads.push(Layer { w: gw, b: gb });
            if i > 0 {
                let mut back = self.layers[i].w.transpose() * &delta;
                let slope = self.leaky_slope;
                back.zip_apply(&cache.pre[i - 1], |g, z| {
                    if z <= 0.0 {
                        *g *= slope
                    }
                });
                delta = back;
            }
        }
        grads.reverse();
        (loss, Mlp { layers: grads, leaky_slope: self.leaky_slope })
    }

    /// `self -= lr · grad`
    pub fn apply_gradient(&mut self, grad: &Mlp, lr: f64) {
        for (l, g) in self.layers.iter_mut().zip(&grad.layers) {
            l.w -= &g.w * lr;
            l.b -= &g.b * lr;
        }
    }

    fn param_mut(&mut self, mut k: usize) -> &mut f64 {
        for l in &mut self.layers {
            if k < l.w.len() {
                return &mut l.w.as_mut_slice()[k];
            }
            k -= l.w.len();
            if k < l.b.len() {
                return &mut l.b.as_mut_slice()[k];
            }
            k -= l.b.len();
        }
        panic!("parameter index out of range")
    }

    fn param(&self, k: usize) -> f64 {
        // Parameters are addressed in the same order as `param_mut`.
        let mut k = k;
        for l in &self.layers {
            if k < l.w.len() {
                return l.w.as_slice()[k];
            }
            k -= l.w.len();
            if k < l.b.len() {
                return l.b.as_slice()[k];
            }
            k -= l.b.len();
        }
        panic!("parameter index out of range")
    }

    fn activation_pattern(&self, x: &DMatrix<f64>) -> Vec<bool> {
        self.forward_batch(x).pre.iter().rev().skip(1).flat_map(|z| z.iter().map(|v| *v > 0.0)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    pub max_rel_error: f64,
    pub checked: usize,
    pub skipped_kinks: usize,
}

/// Finite-difference step of the gradient check.
pub const GRADCHECK_H: f64 = 1e-5;

/// Compares analytic gradients with central differences on `samples` random
/// parameters. Coordinates whose ±h perturbation flips any hidden unit across
/// its kink are skipped and redrawn.
pub fn gradient_check(net: &Mlp, x: &DMatrix<f64>, t: &DMatrix<f64>, samples: usize, seed: u64) -> GradCheck {
    let (_, grad) = net.loss_and_grad(x, t);
    let pattern = net.activation_pattern(x);
    let total = net.param_count();
    let mut rng = rng_for(seed, stream::GRADCHECK, 0);
    let mut probe = net.clone();
    let mut result = GradCheck { max_rel_error: 0.0, checked: 0, skipped_kinks: 0 };
    let mut attempts = 0;
    while result.checked < samples && attempts < samples * 50 {
        attempts += 1;
        let k = rng.gen_range(0..total);
        let orig = net.param(k);
        *probe.param_mut(k) = orig + GRADCHECK_H;
        let plus_ok = probe.activation_pattern(x) == pattern;
        let lp = probe.loss(x, t);
        *probe.param_mut(k) = orig - GRADCHECK_H;
        let minus_ok = probe.activation_pattern(x) == pattern;
        let lm = probe.loss(x, t);
        *probe.param_mut(k) = orig;
        if !(plus_ok && minus_ok) {
            result.skipped_kinks += 1;
            continue;
        }
        let numeric = (lp - lm) / (2.0 * GRADCHECK_H);
        let analytic = grad.param(k);
        let scale = analytic.abs().max(numeric.abs());
        let rel = if scale < 1e-10 { (analytic - numeric).abs() } else { (analytic - numeric).abs() / scale };
        result.max_rel_error = result.max_rel_error.max(rel);
        result.checked += 1;
    }
    result
}
