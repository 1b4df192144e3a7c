//! Linear-softmax classifier and full-batch gradient descent.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::SoftLabel;

/// `c × (f + 1)` weights, row-major, bias in the last column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSoftmaxModel {
    c: usize,
    f: usize,
    weights: Vec<f64>,
}

impl LinearSoftmaxModel {
    pub fn zeros(c: usize, f: usize) -> Result<Self> {
        if c < 2 {
            return Err(Error::param(format!("need c >= 2 classes, got {c}")));
        }
        Ok(Self {
            c,
            f,
            weights: vec![0.0; c * (f + 1)],
        })
    }

    pub fn from_weights(c: usize, f: usize, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != c * (f + 1) {
            return Err(Error::param(format!(
                "expected {} weights for c = {c}, f = {f}, got {}",
                c * (f + 1),
                weights.len()
            )));
        }
        let mut m = Self::zeros(c, f)?;
        m.weights = weights;
        Ok(m)
    }

    pub fn num_classes(&self) -> usize {
        self.c
    }

    pub fn num_features(&self) -> usize {
        self.f
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.f, "feature dimension mismatch");
        self.weights
            .chunks_exact(self.f + 1)
            .map(|row| row[..self.f].iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + row[self.f])
            .collect()
    }

    pub fn probabilities(&self, x: &[f64]) -> Vec<f64> {
        softmax(&self.logits(x))
    }

    pub fn predict(&self, x: &[f64]) -> SoftLabel<f64> {
        SoftLabel::from_trusted(self.probabilities(x))
    }

    /// Adds `scale · g ⊗ [x, 1]` to `grad`.
    pub(crate) fn accumulate_outer(&self, grad: &mut [f64], logit_grad: &[f64], x: &[f64], scale: f64) {
        for (row, g) in grad.chunks_exact_mut(self.f + 1).zip(logit_grad) {
            let s = scale * g;
            for (r, v) in row[..self.f].iter_mut().zip(x) {
                *r += s * v;
            }
            row[self.f] += s;
        }
    }
}

pub fn log_softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
    z.iter().map(|v| v - lse).collect()
}

pub fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// One full-batch step: `per_example(i, logits)` returns the loss and the
/// gradient with respect to the logits of example `i`. Returns the mean loss
/// before the step.
pub(crate) fn gd_step(
    model: &mut LinearSoftmaxModel,
    xs: &[Vec<f64>],
    lr: f64,
    mut per_example: impl FnMut(usize, &[f64]) -> (f64, Vec<f64>),
) -> Result<f64> {
    let n = xs.len();
    if n == 0 {
        return Err(Error::param("training needs at least one example"));
    }
    let mut grad = vec![0.0; model.weights.len()];
    let mut loss = 0.0;
    let scale = 1.0 / n as f64;
    for (i, x) in xs.iter().enumerate() {
        let z = model.logits(x);
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence("logits overflowed; try a smaller learning rate".into()));
        }
        let (l, g) = per_example(i, &z);
        loss += l;
        model.accumulate_outer(&mut grad, &g, x, scale);
    }
    let loss = loss * scale;
    if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::Divergence(format!(
            "training loss became {loss}; try a smaller learning rate"
        )));
    }
    for (w, g) in model.weights.iter_mut().zip(&grad) {
        *w -= lr * g;
    }
    if model.weights.iter().any(|w| !w.is_finite()) {
        return Err(Error::Divergence("weights overflowed; try a smaller learning rate".into()));
    }
    Ok(loss)
}

/// Full-batch descent on cross-entropy against per-example target
/// distributions.
pub fn train_soft_targets(
    model: &mut LinearSoftmaxModel,
    xs: &[Vec<f64>],
    targets: &[Vec<f64>],
    epochs: usize,
    lr: f64,
) -> Result<f64> {
    let mut loss = f64::NAN;
    for _ in 0..epochs {
        loss = gd_step(model, xs, lr, |i, z| soft_target_loss(z, &targets[i]))?;
    }
    Ok(loss)
}

/// `−Σ t_j log p_j` and its logit gradient `p − t`.
pub(crate) fn soft_target_loss(z: &[f64], t: &[f64]) -> (f64, Vec<f64>) {
    let lp = log_softmax(z);
    let loss = -t.iter().zip(&lp).filter(|(w, _)| **w > 0.0).map(|(w, l)| w * l).sum::<f64>();
    let grad = lp.iter().zip(t).map(|(l, w)| l.exp() - w).collect();
    (loss, grad)
}

pub fn accuracy(model: &LinearSoftmaxModel, xs: &[Vec<f64>], labels: &[usize]) -> f64 {
    let hits = xs
        .iter()
        .zip(labels)
        .filter(|(x, &y)| model.predict(x).argmax() == y)
        .count();
    hits as f64 / xs.len().max(1) as f64
}
