//! Exhaustive empirical risk minimization on soft labels.

use crate::error::{Error, Result};
use crate::label::{Semantics, SoftDataset};

use super::class::HypothesisClass;

/// `cost[x][l]`: training examples at pool point `x` whose label set omits `l`.
#[derive(Debug, Clone, PartialEq)]
pub struct CostTable {
    c: usize,
    cost: Vec<u32>,
}

impl CostTable {
    pub fn new(
        class: &HypothesisClass,
        points: &[usize],
        labels: &SoftDataset<f64>,
        semantics: Semantics,
    ) -> Result<Self> {
        let c = class.num_classes();
        if points.len() != labels.len() {
            return Err(Error::param("one pool index per training example is required"));
        }
        if labels.num_classes() != c {
            return Err(Error::param(format!(
                "soft labels have {} classes, the hypothesis class {c}",
                labels.num_classes()
            )));
        }
        let mut cost = vec![0u32; class.pool_size() * c];
        for (&x, ex) in points.iter().zip(labels.examples()) {
            if x >= class.pool_size() {
                return Err(Error::param(format!("training point {x} is not in the pool")));
            }
            let set = ex.soft.label_set(semantics)?;
            for l in 0..c {
                if !set.contains(l) {
                    cost[x * c + l] += 1;
                }
            }
        }
        Ok(Self { c, cost })
    }

    /// Number of training examples whose label set misses `h(x)`.
    pub fn errors(&self, class: &HypothesisClass, h: usize) -> u32 {
        class
            .row(h)
            .iter()
            .enumerate()
            .map(|(x, &l)| self.cost[x * self.c + l as usize])
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ErmResult {
    pub hypothesis: usize,
    pub empirical_errors: u32,
}

/// First hypothesis in enumeration order with the fewest empirical errors.
/// With no training data every hypothesis ties and the first is returned.
pub fn erm(
    class: &HypothesisClass,
    points: &[usize],
    labels: &SoftDataset<f64>,
    semantics: Semantics,
) -> Result<ErmResult> {
    let table = CostTable::new(class, points, labels, semantics)?;
    Ok(erm_with_costs(class, &table))
}

pub fn erm_with_costs(class: &HypothesisClass, table: &CostTable) -> ErmResult {
    let mut best = ErmResult {
        hypothesis: 0,
        empirical_errors: u32::MAX,
    };
    for h in 0..class.len() {
        let e = table.errors(class, h);
        if e < best.empirical_errors {
            best = ErmResult {
                hypothesis: h,
                empirical_errors: e,
            };
            if e == 0 {
                break;
            }
        }
    }
    best
}

/// `Σ_x w_x 𝟙[h(x) ≠ target(x)]`; uniform weights when `weights` is `None`.
pub fn true_error(class: &HypothesisClass, h: usize, target: usize, weights: Option<&[f64]>) -> f64 {
    let m = class.pool_size();
    (0..m)
        .filter(|&x| class.label(h, x) != class.label(target, x))
        .map(|x| weights.map_or(1.0 / m as f64, |w| w[x]))
        .fold(0.0, |a, b| a + b)
}
