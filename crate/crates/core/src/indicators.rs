//! Empirical unreliability degree Δ, ambiguity degree γ and the
//! classifier-consistency condition.
//!
//! * Δ̂ is the fraction of examples whose true label is outside `Ω(d)`.
//! * γ̂ is the largest, over labels `i`, of the fraction of examples with
//!   `y ≠ i` whose `Ω(d)` contains `i`. A label that is the true label of every
//!   example has no such fraction; it is left out of the maximum.
//! * The consistency margin is `(1 − Δ) − (γ(1 − Δ) + Δ)`: the weight of the
//!   true label's loss minus the bound on any wrong label's weight in the
//!   soft-label risk. It is positive exactly when `γ < 1 − Δ/(1 − Δ)`.

use serde::Serialize;

use crate::bounds;
use crate::error::{Error, Result};
use crate::label::{Semantics, SoftDataset};
use crate::scalar::Scalar;

/// Per-dataset counts shared by every indicator.
#[derive(Debug, Clone)]
struct Tally {
    n: usize,
    missed: usize,
    top1_hits: usize,
    cooccur: Vec<usize>,
    with_label: Vec<usize>,
}

fn tally<T: Scalar>(ds: &SoftDataset<T>, semantics: Semantics) -> Result<Tally> {
    if ds.is_empty() {
        return Err(Error::param("indicators need a nonempty dataset"));
    }
    let c = ds.num_classes();
    let mut t = Tally {
        n: ds.len(),
        missed: 0,
        top1_hits: 0,
        cooccur: vec![0; c],
        with_label: vec![0; c],
    };
    for ex in ds.examples() {
        let set = ex.soft.label_set(semantics)?;
        let y = ex.true_label;
        t.with_label[y] += 1;
        if !set.contains(y) {
            t.missed += 1;
        }
        if ex.soft.argmax() == y {
            t.top1_hits += 1;
        }
        for &i in set.members() {
            if i != y {
                t.cooccur[i] += 1;
            }
        }
    }
    Ok(t)
}

fn ratio<T: Scalar>(num: usize, den: usize) -> T {
    T::of_usize(num) / T::of_usize(den)
}

impl Tally {
    fn delta<T: Scalar>(&self) -> T {
        ratio(self.missed, self.n)
    }

    fn per_label<T: Scalar>(&self) -> Vec<Option<T>> {
        self.cooccur
            .iter()
            .zip(&self.with_label)
            .map(|(&co, &own)| {
                let others = self.n - own;
                (others > 0).then(|| ratio(co, others))
            })
            .collect()
    }
}

/// Empirical Δ̂: fraction of examples with `y ∉ Ω(d)`.
pub fn estimate_delta<T: Scalar>(ds: &SoftDataset<T>, semantics: Semantics) -> Result<T> {
    Ok(tally(ds, semantics)?.delta())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GammaEstimate<T> {
    pub gamma: T,
    /// Empirical `Pr(i ∈ Ω | y ≠ i)` per label; `None` when every example has `y = i`.
    pub per_label: Vec<Option<T>>,
}

impl<T: Scalar> GammaEstimate<T> {
    pub fn excluded_labels(&self) -> Vec<usize> {
        self.per_label
            .iter()
            .enumerate()
            .filter(|(_, v)| v.is_none())
            .map(|(i, _)| i)
            .collect()
    }
}

fn gamma_from<T: Scalar>(t: &Tally) -> GammaEstimate<T> {
    let per_label = t.per_label::<T>();
    let excluded: Vec<usize> = (0..per_label.len()).filter(|&i| per_label[i].is_none()).collect();
    if !excluded.is_empty() {
        log::warn!("labels {excluded:?} never occur as a wrong label; left out of the gamma estimate");
    }
    let gamma = per_label.iter().flatten().copied().fold(T::zero(), T::max);
    GammaEstimate { gamma, per_label }
}

/// Empirical γ̂ and the per-label co-occurrence frequencies behind it.
pub fn estimate_gamma<T: Scalar>(ds: &SoftDataset<T>, semantics: Semantics) -> Result<GammaEstimate<T>> {
    Ok(gamma_from(&tally(ds, semantics)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Consistency<T> {
    pub consistent: bool,
    pub margin: T,
}

/// `(1 − Δ) − (γ(1 − Δ) + Δ)`, defined for every Δ ∈ [0, 1].
pub fn consistency_margin<T: Scalar>(delta: T, gamma: T) -> T {
    let keep = T::one() - delta;
    keep - (gamma * keep + delta)
}

/// Whether `γ < 1 − Δ/(1 − Δ)`, together with the coefficient margin.
pub fn consistency_check<T: Scalar>(delta: T, gamma: T) -> Result<Consistency<T>> {
    if !(delta >= T::zero() && delta < T::one()) {
        return Err(Error::param(format!("consistency check needs 0 <= delta < 1, got {delta}")));
    }
    if !(gamma >= T::zero() && gamma <= T::one()) {
        return Err(Error::param(format!("consistency check needs 0 <= gamma <= 1, got {gamma}")));
    }
    let margin = consistency_margin(delta, gamma);
    Ok(Consistency {
        consistent: margin > T::zero(),
        margin,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndicatorReport<T> {
    pub semantics: Semantics,
    pub n: usize,
    pub delta_hat: T,
    pub gamma_hat: T,
    pub per_label_cooccurrence: Vec<Option<T>>,
    pub topk_accuracy: T,
    pub top1_accuracy: T,
    pub consistency_margin: T,
    pub consistent: bool,
    /// `None` when `Δ̂ + γ̂ ≥ 1`.
    pub theta: Option<T>,
}

pub const REPORT_CSV_HEADER: &str = "k,delta,gamma,top1_acc,topk_acc,margin,theta";

impl<T: Scalar> IndicatorReport<T> {
    /// One CSV row matching [`REPORT_CSV_HEADER`]; undefined θ is an empty field.
    pub fn csv_row(&self) -> String {
        let k = match self.semantics {
            Semantics::TopK(k) => k.to_string(),
            Semantics::Support => "support".into(),
        };
        let theta = self.theta.map(|t| t.to_string()).unwrap_or_default();
        format!(
            "{k},{},{},{},{},{},{theta}",
            self.delta_hat, self.gamma_hat, self.top1_accuracy, self.topk_accuracy, self.consistency_margin
        )
    }

    pub fn to_csv(&self) -> String {
        format!("{REPORT_CSV_HEADER}\n{}\n", self.csv_row())
    }
}

/// Every indicator for one dataset and label-set rule.
pub fn analyze<T: Scalar>(ds: &SoftDataset<T>, semantics: Semantics) -> Result<IndicatorReport<T>> {
    let t = tally(ds, semantics)?;
    let delta_hat: T = t.delta();
    let g = gamma_from::<T>(&t);
    let margin = consistency_margin(delta_hat, g.gamma);
    let theta = bounds::theta(delta_hat, g.gamma).ok();
    Ok(IndicatorReport {
        semantics,
        n: t.n,
        delta_hat,
        gamma_hat: g.gamma,
        per_label_cooccurrence: g.per_label,
        topk_accuracy: T::one() - delta_hat,
        top1_accuracy: ratio(t.top1_hits, t.n),
        consistency_margin: margin,
        consistent: margin > T::zero(),
        theta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::label::SoftLabel;

    fn one_hot_dataset(labels: &[usize], c: usize) -> SoftDataset<f64> {
        let soft = labels.iter().map(|&y| SoftLabel::one_hot(c, y).unwrap()).collect();
        SoftDataset::from_parts(c, labels, soft).unwrap()
    }

    fn uniform_dataset(n_per_class: usize, c: usize) -> SoftDataset<f64> {
        let labels: Vec<usize> = (0..c).flat_map(|y| std::iter::repeat_n(y, n_per_class)).collect();
        let soft = labels.iter().map(|_| SoftLabel::uniform(c).unwrap()).collect();
        SoftDataset::from_parts(c, &labels, soft).unwrap()
    }

    #[test]
    fn clean_labels_have_zero_indicators() {
        let ds = one_hot_dataset(&[0, 1, 2, 3, 1, 2], 4);
        for k in 1..=3 {
            assert_eq!(estimate_delta(&ds, Semantics::TopK(k)).unwrap(), 0.0);
        }
        assert_eq!(estimate_gamma(&ds, Semantics::TopK(1)).unwrap().gamma, 0.0);
        let r = analyze(&ds, Semantics::TopK(1)).unwrap();
        assert_eq!((r.delta_hat, r.gamma_hat, r.consistency_margin), (0.0, 0.0, 1.0));
        assert!((r.theta.unwrap() - 2f64.ln()).abs() < 1e-15);
        assert_eq!(r.top1_accuracy, 1.0);
    }

    #[test]
    fn counting_example() {
        let soft = vec![
            SoftLabel::new(vec![0.7, 0.2, 0.1]).unwrap(),
            SoftLabel::new(vec![0.2, 0.7, 0.1]).unwrap(),
            SoftLabel::new(vec![0.1, 0.2, 0.7]).unwrap(),
            SoftLabel::new(vec![0.7, 0.2, 0.1]).unwrap(),
        ];
        let ds = SoftDataset::from_parts(3, &[0, 1, 2, 2], soft).unwrap();
        assert_eq!(estimate_delta(&ds, Semantics::TopK(1)).unwrap(), 0.25);
    }

    #[test]
    fn uniform_labels_under_tie_rule() {
        let ds = uniform_dataset(5, 10);
        let g = estimate_gamma(&ds, Semantics::TopK(1)).unwrap();
        assert_eq!(g.gamma, 1.0);
        assert_eq!(g.per_label[0], Some(1.0));
        assert_eq!(g.per_label[3], Some(0.0));
        let r = analyze(&ds, Semantics::TopK(1)).unwrap();
        assert!((r.delta_hat - 0.9).abs() < 1e-15);
        assert!(r.theta.is_none());
        assert!(!r.consistent);
        assert!(r.csv_row().ends_with(','));
    }

    #[test]
    fn label_that_is_always_true_is_excluded() {
        let soft = vec![SoftLabel::new(vec![0.6, 0.4, 0.0]).unwrap(); 3];
        let ds = SoftDataset::from_parts(3, &[0, 0, 0], soft).unwrap();
        let g = estimate_gamma(&ds, Semantics::TopK(2)).unwrap();
        assert_eq!(g.per_label[0], None);
        assert_eq!(g.excluded_labels(), vec![0]);
        assert_eq!(g.gamma, 1.0);
    }

    #[test]
    fn consistency_examples() {
        let c = consistency_check(0.0, 0.99).unwrap();
        assert!(c.consistent);
        assert!((c.margin - 0.01f64).abs() < 1e-12);
        for g in [0.0, 0.3, 1.0] {
            assert!(!consistency_check(0.5, g).unwrap().consistent);
        }
        let c = consistency_check(0.2, 0.5).unwrap();
        assert!(c.consistent);
        assert!((c.margin - 0.2f64).abs() < 1e-12);
        assert!(consistency_check(1.0, 0.0).is_err());
    }

    #[test]
    fn empty_dataset_rejected() {
        let ds = SoftDataset::<f64>::new(3, vec![]).unwrap();
        assert!(estimate_delta(&ds, Semantics::TopK(1)).is_err());
        assert!(estimate_gamma(&ds, Semantics::Support).is_err());
    }

    #[test]
    fn report_csv_layout() {
        let r = analyze(&one_hot_dataset(&[0, 1], 2), Semantics::TopK(1)).unwrap();
        let csv = r.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some(REPORT_CSV_HEADER));
        assert!(lines.next().unwrap().starts_with("1,0,0,1,1,1,0.69314718"));
    }
}
