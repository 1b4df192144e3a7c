//! Direct construction of soft labels with a prescribed (Δ, γ).
//!
//! With probability `1 − Δ` the true label sits in the top-k at a random rank
//! in `2..=k` (rank 1 when `k = 1`) and the other slots hold wrong labels;
//! otherwise all `k` slots hold wrong labels. Masses follow the fixed template
//! `k + 1 − rank` inside the top-k and zero outside.
//!
//! Every example puts `k` labels in its top-k, so the wrong-label inclusion
//! rates over the `c − 1` wrong labels sum to `Δ + k − 1`, which forces
//! `γ ≥ (Δ + k − 1)/(c − 1)`. Symmetric filling attains that value. Larger γ
//! comes from favouring one fixed confuser label (the last class).

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::label::{SoftDataset, SoftLabel};
use crate::rng::{chunks, RandomSeed};

/// Inclusion probabilities of the confuser on each branch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CorruptionPlan {
    pub c: usize,
    pub k: usize,
    pub delta: f64,
    pub gamma: f64,
    /// `None` for symmetric filling.
    pub confuser: Option<usize>,
    /// Confuser inclusion when the truth is kept.
    pub q_kept: f64,
    /// Confuser inclusion when the truth is dropped.
    pub q_dropped: f64,
}

/// `(Δ + k − 1)/(c − 1)`: the γ of symmetric filling and the smallest γ any
/// top-k construction can reach.
pub fn symmetric_gamma(delta: f64, c: usize, k: usize) -> f64 {
    (delta + (k - 1) as f64) / (c - 1) as f64
}

/// Reachable γ range `[lo, hi]` for given `(c, k, Δ)`.
pub fn feasible_gamma_range(delta: f64, c: usize, k: usize) -> Result<(f64, f64)> {
    check(c, k, delta)?;
    let (kept, dropped) = branch_ranges(c, k);
    let hi = (1.0 - delta) * kept.1 + delta * dropped.1;
    Ok((symmetric_gamma(delta, c, k), hi))
}

fn check(c: usize, k: usize, delta: f64) -> Result<()> {
    if c < 2 || k == 0 || k >= c {
        return Err(Error::param(format!("need 1 <= k <= c - 1, got c = {c}, k = {k}")));
    }
    if !(0.0..=1.0).contains(&delta) {
        return Err(Error::param(format!("target delta must lie in [0, 1], got {delta}")));
    }
    Ok(())
}

// Allowed confuser-inclusion probabilities on the kept and dropped branches.
fn branch_ranges(c: usize, k: usize) -> ((f64, f64), (f64, f64)) {
    let kept = if k >= 2 { (0.0, 1.0) } else { (0.0, 0.0) };
    let dropped = if k <= c - 2 { (0.0, 1.0) } else { (1.0, 1.0) };
    (kept, dropped)
}

impl CorruptionPlan {
    pub fn new(c: usize, k: usize, delta: f64, gamma: Option<f64>) -> Result<Self> {
        check(c, k, delta)?;
        let sym = symmetric_gamma(delta, c, k);
        let symmetric = Self {
            c,
            k,
            delta,
            gamma: sym,
            confuser: None,
            q_kept: 0.0,
            q_dropped: 0.0,
        };
        let Some(gamma) = gamma else {
            return Ok(symmetric);
        };
        let (lo, hi) = feasible_gamma_range(delta, c, k)?;
        if (gamma - sym).abs() <= 1e-12 {
            return Ok(symmetric);
        }
        if gamma < lo {
            return Err(Error::param(format!(
                "target gamma {gamma} is infeasible: every top-{k} set holds {k} labels, so gamma >= (delta + k - 1)/(c - 1) = {sym}"
            )));
        }
        if gamma > hi + 1e-12 {
            return Err(Error::param(format!(
                "target gamma {gamma} exceeds the largest reachable value {hi} for c = {c}, k = {k}, delta = {delta}"
            )));
        }
        let (kept, dropped) = branch_ranges(c, k);
        let base = (1.0 - delta) * kept.0 + delta * dropped.0;
        let t = if hi > base { ((gamma - base) / (hi - base)).clamp(0.0, 1.0) } else { 1.0 };
        Ok(Self {
            gamma,
            confuser: Some(c - 1),
            q_kept: kept.0 + t * (kept.1 - kept.0),
            q_dropped: dropped.0 + t * (dropped.1 - dropped.0),
            ..symmetric
        })
    }

    fn top_set<R: Rng>(&self, y: usize, rng: &mut R) -> Vec<usize> {
        let keep = rng.random::<f64>() >= self.delta;
        let wrong_slots = if keep { self.k - 1 } else { self.k };
        let mut members = Vec::with_capacity(self.k);
        let mut pool: Vec<usize> = (0..self.c).filter(|&i| i != y).collect();
        if let Some(j) = self.confuser.filter(|&j| j != y) {
            let q = if keep { self.q_kept } else { self.q_dropped };
            pool.retain(|&i| i != j);
            if wrong_slots > 0 && rng.random::<f64>() < q {
                members.push(j);
            }
        }
        let need = wrong_slots - members.len();
        members.extend(sample(rng, pool.len(), need).into_iter().map(|i| pool[i]));
        members.shuffle(rng);
        if keep {
            let rank = if self.k == 1 { 0 } else { rng.random_range(1..self.k) };
            members.insert(rank, y);
        }
        members
    }

    fn label<R: Rng>(&self, y: usize, rng: &mut R) -> SoftLabel<f64> {
        let ranked = self.top_set(y, rng);
        let total = (self.k * (self.k + 1) / 2) as f64;
        let mut values = vec![0.0; self.c];
        for (r, &i) in ranked.iter().enumerate() {
            values[i] = (self.k - r) as f64 / total;
        }
        SoftLabel::from_trusted(values)
    }
}

const GEN_CHUNK: usize = 4096;

/// Soft labels whose top-k misses the truth at rate Δ and whose largest
/// wrong-label inclusion rate is γ (symmetric when `target_gamma` is `None`).
pub fn make_biased_soft_labels(
    true_labels: &[usize],
    c: usize,
    k: usize,
    target_delta: f64,
    target_gamma: Option<f64>,
    seed: RandomSeed,
) -> Result<SoftDataset<f64>> {
    let plan = CorruptionPlan::new(c, k, target_delta, target_gamma)?;
    corrupt_with_plan(true_labels, &plan, seed)
}

pub fn corrupt_with_plan(true_labels: &[usize], plan: &CorruptionPlan, seed: RandomSeed) -> Result<SoftDataset<f64>> {
    if let Some(bad) = true_labels.iter().find(|&&y| y >= plan.c) {
        return Err(Error::param(format!("true label {bad} out of range for c = {}", plan.c)));
    }
    let work: Vec<_> = chunks(true_labels.len(), GEN_CHUNK).collect();
    let soft: Vec<SoftLabel<f64>> = work
        .into_par_iter()
        .flat_map_iter(|(idx, start, end)| {
            let mut rng = seed.child(idx).rng();
            true_labels[start..end]
                .iter()
                .map(|&y| plan.label(y, &mut rng))
                .collect::<Vec<_>>()
        })
        .collect();
    SoftDataset::from_parts(plan.c, true_labels, soft)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::indicators::{estimate_delta, estimate_gamma};
    use crate::label::Semantics;
    use crate::pll::uniform_labels;

    #[test]
    fn clean_top1_is_one_hot() {
        let labels = [0, 1, 2, 1];
        let ds = make_biased_soft_labels(&labels, 3, 1, 0.0, None, RandomSeed::new(1)).unwrap();
        for ex in ds.examples() {
            assert_eq!(ex.soft, SoftLabel::one_hot(3, ex.true_label).unwrap());
        }
    }

    #[test]
    fn truth_is_never_on_top_when_k_exceeds_one() {
        let labels = uniform_labels(2000, 10, RandomSeed::new(2));
        let ds = make_biased_soft_labels(&labels, 10, 4, 0.0, None, RandomSeed::new(3)).unwrap();
        for ex in ds.examples() {
            assert_ne!(ex.soft.argmax(), ex.true_label);
            assert!(ex.soft.top_k(4).unwrap().contains(ex.true_label));
            assert_eq!(ex.soft.support().len(), 4);
        }
    }

    #[test]
    fn symmetric_targets_hit() {
        let labels = uniform_labels(100_000, 10, RandomSeed::new(4));
        let ds = make_biased_soft_labels(&labels, 10, 4, 0.3, None, RandomSeed::new(5)).unwrap();
        let d = estimate_delta(&ds, Semantics::TopK(4)).unwrap();
        let se = (0.3f64 * 0.7 / 1e5).sqrt();
        assert!((d - 0.3).abs() < 3.0 * se, "{d}");
        let g = estimate_gamma(&ds, Semantics::TopK(4)).unwrap().gamma;
        assert!((g - 3.3 / 9.0).abs() < 0.01, "{g}");
    }

    #[test]
    fn confuser_targets_hit() {
        let labels = uniform_labels(50_000, 10, RandomSeed::new(6));
        for (delta, gamma, k) in [(0.1, 0.8, 2), (0.3, 0.5, 3), (0.4, 0.3, 1)] {
            let ds = make_biased_soft_labels(&labels, 10, k, delta, Some(gamma), RandomSeed::new(7)).unwrap();
            let g = estimate_gamma(&ds, Semantics::TopK(k)).unwrap();
            assert!((g.gamma - gamma).abs() < 0.02, "{delta} {gamma} {k}: {}", g.gamma);
            assert!((g.per_label[9].unwrap() - gamma).abs() < 0.02);
            let d = estimate_delta(&ds, Semantics::TopK(k)).unwrap();
            assert!((d - delta).abs() < 0.01);
        }
    }

    #[test]
    fn infeasible_targets_name_the_constraint() {
        let err = CorruptionPlan::new(10, 4, 0.5, Some(0.1)).unwrap_err();
        assert!(err.to_string().contains("(delta + k - 1)/(c - 1)"), "{err}");
        assert!(CorruptionPlan::new(10, 1, 0.2, Some(0.5)).is_err());
        assert!(CorruptionPlan::new(10, 10, 0.2, None).is_err());
    }

    #[test]
    fn largest_k_reaches_full_range() {
        let (lo, hi) = feasible_gamma_range(0.2, 5, 4).unwrap();
        assert!((lo - 3.2 / 4.0).abs() < 1e-15);
        assert_eq!(hi, 1.0);
        let plan = CorruptionPlan::new(5, 4, 0.2, Some(0.9)).unwrap();
        assert_eq!(plan.q_dropped, 1.0);
        assert!(((1.0 - 0.2) * plan.q_kept + 0.2 - 0.9).abs() < 1e-12);
    }
}
