//! Flat-parameter classifiers with hand-written gradients.
//!
//! Two desk-scale models: multinomial logistic regression and a two-layer
//! tanh MLP, both trained with cross-entropy. Parameters live in a single
//! flat vector so the protocol can treat a model update as an opaque
//! D-vector.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::rng::{stream, tag};

use super::data::Dataset;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum ModelSpec {
    Logistic,
    Mlp { hidden: usize },
}

/// A model spec bound to dataset dimensions.
#[derive(Debug, Clone, Copy)]
pub struct ModelArch {
    pub spec: ModelSpec,
    pub dim: usize,
    pub classes: usize,
}

impl ModelArch {
    pub fn new(spec: ModelSpec, dataset: &Dataset) -> Self {
        ModelArch {
            spec,
            dim: dataset.dim,
            classes: dataset.classes,
        }
    }

    /// Number of flat parameters D.
    pub fn param_count(&self) -> usize {
        match self.spec {
            ModelSpec::Logistic => self.classes * (self.dim + 1),
            ModelSpec::Mlp { hidden } => hidden * (self.dim + 1) + self.classes * (hidden + 1),
        }
    }

    /// Deterministic initialization. The logistic model starts at zero; the
    /// MLP needs symmetry breaking and draws `N(0, 1/fan_in)` weights.
    pub fn init_params(&self, seed: u64) -> Vec<f64> {
        match self.spec {
            ModelSpec::Logistic => vec![0.0; self.param_count()],
            ModelSpec::Mlp { hidden } => {
                let mut rng = stream(&[seed, tag::INIT_MODEL]);
                let mut p = vec![0.0; self.param_count()];
                let w1_scale = 1.0 / (self.dim as f64).sqrt();
                let w2_scale = 1.0 / (hidden as f64).sqrt();
                let w1_len = hidden * self.dim;
                for v in p.iter_mut().take(w1_len) {
                    *v = w1_scale * rng.sample::<f64, _>(StandardNormal);
                }
                // biases stay zero; then W2
                let w2_start = w1_len + hidden;
                for v in p.iter_mut().skip(w2_start).take(self.classes * hidden) {
                    *v = w2_scale * rng.sample::<f64, _>(StandardNormal);
                }
                p
            }
        }
    }

    /// Mean cross-entropy loss and its gradient over the given samples.
    pub fn loss_grad(
        &self,
        params: &[f64],
        dataset: &Dataset,
        indices: &[usize],
        grad: &mut [f64],
    ) -> f64 {
        assert_eq!(params.len(), self.param_count());
        assert_eq!(grad.len(), params.len());
        for g in grad.iter_mut() {
            *g = 0.0;
        }
        let mut loss = 0.0;
        let inv = 1.0 / indices.len() as f64;
        match self.spec {
            ModelSpec::Logistic => {
                let mut logits = vec![0.0; self.classes];
                for &i in indices {
                    let x = &dataset.features[i];
                    let y = dataset.labels[i];
                    self.logistic_logits(params, x, &mut logits);
                    loss += softmax_loss_into(&mut logits, y) * inv;
                    // logits now holds dL/dlogits
                    let (w, b) = grad.split_at_mut(self.classes * self.dim);
                    for c in 0..self.classes {
                        let d = logits[c] * inv;
                        let row = &mut w[c * self.dim..(c + 1) * self.dim];
                        for (wv, &xv) in row.iter_mut().zip(x) {
                            *wv += d * xv;
                        }
                        b[c] += d;
                    }
                }
            }
            ModelSpec::Mlp { hidden } => {
                let (w1, rest) = params.split_at(hidden * self.dim);
                let (b1, rest) = rest.split_at(hidden);
                let (w2, b2) = rest.split_at(self.classes * hidden);
                let mut act = vec![0.0; hidden];
                let mut logits = vec![0.0; self.classes];
                let mut dact = vec![0.0; hidden];
                for &i in indices {
                    let x = &dataset.features[i];
                    let y = dataset.labels[i];
                    for h in 0..hidden {
                        let row = &w1[h * self.dim..(h + 1) * self.dim];
                        let z: f64 =
                            row.iter().zip(x).map(|(&w, &xv)| w * xv).sum::<f64>() + b1[h];
                        act[h] = z.tanh();
                    }
                    for c in 0..self.classes {
                        let row = &w2[c * hidden..(c + 1) * hidden];
                        logits[c] =
                            row.iter().zip(&act).map(|(&w, &a)| w * a).sum::<f64>() + b2[c];
                    }
                    loss += softmax_loss_into(&mut logits, y) * inv;
                    // backprop through the two layers
                    let (gw1, grest) = grad.split_at_mut(hidden * self.dim);
                    let (gb1, grest) = grest.split_at_mut(hidden);
                    let (gw2, gb2) = grest.split_at_mut(self.classes * hidden);
                    for d in dact.iter_mut() {
                        *d = 0.0;
                    }
                    for c in 0..self.classes {
                        let dl = logits[c] * inv;
                        let row = &mut gw2[c * hidden..(c + 1) * hidden];
                        for h in 0..hidden {
                            row[h] += dl * act[h];
                            dact[h] += dl * w2[c * hidden + h];
                        }
                        gb2[c] += dl;
                    }
                    for h in 0..hidden {
                        let dz = dact[h] * (1.0 - act[h] * act[h]);
                        let row = &mut gw1[h * self.dim..(h + 1) * self.dim];
                        for (gv, &xv) in row.iter_mut().zip(x) {
                            *gv += dz * xv;
                        }
                        gb1[h] += dz;
                    }
                }
            }
        }
        loss
    }

    fn logistic_logits(&self, params: &[f64], x: &[f64], logits: &mut [f64]) {
        let (w, b) = params.split_at(self.classes * self.dim);
        for c in 0..self.classes {
            let row = &w[c * self.dim..(c + 1) * self.dim];
            logits[c] = row.iter().zip(x).map(|(&wv, &xv)| wv * xv).sum::<f64>() + b[c];
        }
    }

    /// `(mean loss, accuracy)` over a whole dataset.
    pub fn evaluate(&self, params: &[f64], dataset: &Dataset) -> (f64, f64) {
        let mut loss = 0.0;
        let mut correct = 0usize;
        let mut logits = vec![0.0; self.classes];
        let hidden_buf = match self.spec {
            ModelSpec::Mlp { hidden } => vec![0.0; hidden],
            ModelSpec::Logistic => Vec::new(),
        };
        let mut act = hidden_buf;
        for i in 0..dataset.len() {
            let x = &dataset.features[i];
            let y = dataset.labels[i];
            match self.spec {
                ModelSpec::Logistic => self.logistic_logits(params, x, &mut logits),
                ModelSpec::Mlp { hidden } => {
                    let (w1, rest) = params.split_at(hidden * self.dim);
                    let (b1, rest) = rest.split_at(hidden);
                    let (w2, b2) = rest.split_at(self.classes * hidden);
                    for h in 0..hidden {
                        let row = &w1[h * self.dim..(h + 1) * self.dim];
                        let z: f64 =
                            row.iter().zip(x).map(|(&w, &xv)| w * xv).sum::<f64>() + b1[h];
                        act[h] = z.tanh();
                    }
                    for c in 0..self.classes {
                        let row = &w2[c * hidden..(c + 1) * hidden];
                        logits[c] =
                            row.iter().zip(&act).map(|(&w, &a)| w * a).sum::<f64>() + b2[c];
                    }
                }
            }
            let pred = argmax(&logits);
            if pred == y {
                correct += 1;
            }
            loss += softmax_loss_into(&mut logits, y);
        }
        let n = dataset.len() as f64;
        (loss / n, correct as f64 / n)
    }
}

/// Numerically stable softmax cross-entropy. On return `logits` holds the
/// gradient `softmax(logits) - onehot(y)`.
fn softmax_loss_into(logits: &mut [f64], y: usize) -> f64 {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut z = 0.0;
    for l in logits.iter_mut() {
        *l = (*l - max).exp();
        z += *l;
    }
    let loss = -(logits[y] / z).ln();
    for l in logits.iter_mut() {
        *l /= z;
    }
    logits[y] -= 1.0;
    loss
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}
