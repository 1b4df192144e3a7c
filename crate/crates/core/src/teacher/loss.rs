//! The biased-teacher objective and its analytic gradient.
//!
//! With `ℓ(p, i) = −log p_i`:
//!
//! ```text
//! L_ce   = ℓ(p, y)
//! L_pun  = −𝟙[argmax p = y] · ℓ(p, y)
//! L_comp =  𝟙[y ∉ Ω_k(p)]  · ℓ(p, y)
//! L_rnd  = Σ_{i ∈ s_rnd} ℓ(p, i)
//! L      = L_ce + α₁ L_pun + α₂ L_comp + α₃ L_rnd
//! ```
//!
//! The gates are held constant within a step, so the logit gradient is
//! `w_y (p − e_y) + α₃ Σ_{i ∈ s_rnd} (p − e_i)` with
//! `w_y = 1 − α₁ 𝟙[argmax = y] + α₂ 𝟙[y ∉ Ω_k]`.

use serde::{Deserialize, Serialize};

use super::model::{log_softmax, LinearSoftmaxModel};
use crate::error::{Error, Result};
use crate::label::SoftLabel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TeacherLossConfig {
    pub alpha1: f64,
    pub alpha2: f64,
    pub alpha3: f64,
    pub k: usize,
    /// Number of random target labels per example.
    pub r: usize,
}

impl Default for TeacherLossConfig {
    fn default() -> Self {
        Self {
            alpha1: 0.2,
            alpha2: 1.1,
            alpha3: 2.0,
            k: 4,
            r: 3,
        }
    }
}

impl TeacherLossConfig {
    pub fn plain(k: usize, r: usize) -> Self {
        Self {
            alpha1: 0.0,
            alpha2: 0.0,
            alpha3: 0.0,
            k,
            r,
        }
    }

    pub fn validate(&self, c: usize) -> Result<()> {
        if [self.alpha1, self.alpha2, self.alpha3]
            .iter()
            .any(|a| !a.is_finite() || *a < 0.0)
        {
            return Err(Error::param("alpha weights must be finite and nonnegative"));
        }
        if self.k == 0 || self.k > c {
            return Err(Error::param(format!("k = {} must lie in 1..={c}", self.k)));
        }
        if self.r >= c {
            return Err(Error::param(format!("r = {} must be at most c - 1 = {}", self.r, c - 1)));
        }
        Ok(())
    }
}

/// Indicator values held fixed during one gradient evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Gates {
    pub argmax_is_truth: bool,
    pub truth_outside_top_k: bool,
}

impl Gates {
    pub fn of(p: &SoftLabel<f64>, y: usize, k: usize) -> Result<Self> {
        Ok(Self {
            argmax_is_truth: p.argmax() == y,
            truth_outside_top_k: !p.top_k(k)?.contains(y),
        })
    }

    fn truth_weight(&self, cfg: &TeacherLossConfig) -> f64 {
        let mut w = 1.0;
        if self.argmax_is_truth {
            w -= cfg.alpha1;
        }
        if self.truth_outside_top_k {
            w += cfg.alpha2;
        }
        w
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LossComponents {
    pub ce: f64,
    pub pun: f64,
    pub comp: f64,
    pub rnd: f64,
    pub total: f64,
}

fn check_targets(c: usize, y: usize, s_rnd: &[usize], cfg: &TeacherLossConfig) -> Result<()> {
    cfg.validate(c)?;
    if y >= c {
        return Err(Error::param(format!("label {y} out of range for c = {c}")));
    }
    if s_rnd.len() != cfg.r {
        return Err(Error::param(format!("expected {} random labels, got {}", cfg.r, s_rnd.len())));
    }
    if s_rnd.contains(&y) {
        return Err(Error::param("random target labels must exclude the true label"));
    }
    if let Some(bad) = s_rnd.iter().find(|&&i| i >= c) {
        return Err(Error::param(format!("random label {bad} out of range for c = {c}")));
    }
    Ok(())
}

fn components(log_p: &[f64], y: usize, s_rnd: &[usize], gates: Gates, cfg: &TeacherLossConfig) -> LossComponents {
    let ce = -log_p[y];
    let pun = if gates.argmax_is_truth { -ce } else { 0.0 };
    let comp = if gates.truth_outside_top_k { ce } else { 0.0 };
    let rnd = -s_rnd.iter().map(|&i| log_p[i]).sum::<f64>();
    LossComponents {
        ce,
        pun,
        comp,
        rnd,
        total: ce + cfg.alpha1 * pun + cfg.alpha2 * comp + cfg.alpha3 * rnd,
    }
}

/// Loss terms for a model output.
pub fn loss_components(
    out: &SoftLabel<f64>,
    y: usize,
    s_rnd: &[usize],
    cfg: &TeacherLossConfig,
) -> Result<LossComponents> {
    check_targets(out.num_classes(), y, s_rnd, cfg)?;
    let log_p: Vec<f64> = out.values().iter().map(|v| v.ln()).collect();
    Ok(components(&log_p, y, s_rnd, Gates::of(out, y, cfg.k)?, cfg))
}

/// Loss and logit gradient with the given gates.
pub fn logit_loss_and_gradient(
    logits: &[f64],
    y: usize,
    s_rnd: &[usize],
    cfg: &TeacherLossConfig,
    gates: Gates,
) -> (LossComponents, Vec<f64>) {
    let log_p = log_softmax(logits);
    let parts = components(&log_p, y, s_rnd, gates, cfg);
    let w_y = gates.truth_weight(cfg);
    let mass = w_y + cfg.alpha3 * s_rnd.len() as f64;
    let mut grad: Vec<f64> = log_p.iter().map(|l| mass * l.exp()).collect();
    grad[y] -= w_y;
    for &i in s_rnd {
        grad[i] -= cfg.alpha3;
    }
    (parts, grad)
}

/// Gates read off the model's own output at `x`.
pub fn gates_at(model: &LinearSoftmaxModel, x: &[f64], y: usize, k: usize) -> Result<Gates> {
    Gates::of(&model.predict(x), y, k)
}

/// Total loss with gates fixed, as a function of the weights.
pub fn total_loss_with_gates(
    model: &LinearSoftmaxModel,
    x: &[f64],
    y: usize,
    s_rnd: &[usize],
    cfg: &TeacherLossConfig,
    gates: Gates,
) -> f64 {
    let log_p = log_softmax(&model.logits(x));
    components(&log_p, y, s_rnd, gates, cfg).total
}

/// Gradient of the total loss with respect to the weights, gates taken at
/// the current output.
pub fn loss_gradient(
    model: &LinearSoftmaxModel,
    x: &[f64],
    y: usize,
    s_rnd: &[usize],
    cfg: &TeacherLossConfig,
) -> Result<Vec<f64>> {
    check_targets(model.num_classes(), y, s_rnd, cfg)?;
    let gates = gates_at(model, x, y, cfg.k)?;
    Ok(loss_gradient_with_gates(model, x, y, s_rnd, cfg, gates))
}

pub fn loss_gradient_with_gates(
    model: &LinearSoftmaxModel,
    x: &[f64],
    y: usize,
    s_rnd: &[usize],
    cfg: &TeacherLossConfig,
    gates: Gates,
) -> Vec<f64> {
    let (_, g) = logit_loss_and_gradient(&model.logits(x), y, s_rnd, cfg, gates);
    let mut grad = vec![0.0; model.weights().len()];
    model.accumulate_outer(&mut grad, &g, x, 1.0);
    grad
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RandomSeed;
    use rand::Rng;

    fn random_model(c: usize, f: usize, scale: f64, seed: u64) -> LinearSoftmaxModel {
        let mut rng = RandomSeed::new(seed).rng();
        let w = (0..c * (f + 1)).map(|_| scale * (rng.random::<f64>() - 0.5)).collect();
        LinearSoftmaxModel::from_weights(c, f, w).unwrap()
    }

    #[test]
    fn one_hot_output_activates_punishment() {
        let cfg = TeacherLossConfig::default();
        let out = SoftLabel::new(vec![1.0 - 3e-12, 1e-12, 1e-12, 1e-12, 0.0]).unwrap();
        let l = loss_components(&out, 0, &[1, 2, 3], &cfg).unwrap();
        assert_eq!(l.comp, 0.0);
        assert_eq!(l.pun, -l.ce);
        assert!(l.ce >= 0.0 && l.ce < 1e-11);
    }

    #[test]
    fn truth_outside_top_k_activates_compensation() {
        let cfg = TeacherLossConfig {
            k: 2,
            r: 1,
            ..Default::default()
        };
        let out = SoftLabel::new(vec![0.1, 0.5, 0.4]).unwrap();
        let l = loss_components(&out, 0, &[1], &cfg).unwrap();
        assert_eq!(l.pun, 0.0);
        assert_eq!(l.comp, l.ce);
        assert!((l.rnd + 0.5f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn zero_weights_give_cross_entropy() {
        let cfg = TeacherLossConfig::plain(2, 2);
        let out = SoftLabel::new(vec![0.2, 0.3, 0.5]).unwrap();
        let l = loss_components(&out, 0, &[1, 2], &cfg).unwrap();
        assert_eq!(l.total, l.ce);
        let m = random_model(3, 2, 1.0, 4);
        let x = [0.3, -0.7];
        let g = loss_gradient(&m, &x, 0, &[1, 2], &cfg).unwrap();
        let p = m.probabilities(&x);
        assert!((g[0] - (p[0] - 1.0) * 0.3).abs() < 1e-15);
        assert!((g[5] - p[1]).abs() < 1e-15);
    }

    #[test]
    fn truth_in_random_set_rejected() {
        let cfg = TeacherLossConfig::default();
        let out = SoftLabel::uniform(5).unwrap();
        assert!(loss_components(&out, 1, &[1, 2, 3], &cfg).is_err());
        assert!(loss_components(&out, 0, &[1, 2], &cfg).is_err());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let cfg = TeacherLossConfig::default();
        let m = random_model(6, 3, 2.0, 8);
        let x = [0.5, -1.2, 0.8];
        let (y, s) = (2, [0, 4, 5]);
        let gates = gates_at(&m, &x, y, cfg.k).unwrap();
        let g = loss_gradient(&m, &x, y, &s, &cfg).unwrap();
        let h = 1e-5;
        for j in 0..m.weights().len() {
            let mut plus = m.clone();
            plus.weights_mut()[j] += h;
            let mut minus = m.clone();
            minus.weights_mut()[j] -= h;
            let fd = (total_loss_with_gates(&plus, &x, y, &s, &cfg, gates)
                - total_loss_with_gates(&minus, &x, y, &s, &cfg, gates))
                / (2.0 * h);
            assert!((fd - g[j]).abs() <= 1e-6 * g[j].abs().max(1.0), "weight {j}: {fd} vs {}", g[j]);
        }
    }
}
