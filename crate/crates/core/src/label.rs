//! Soft labels, their top-k / support sets, and labelled datasets.
//!
//! Class indices are 0-based. A soft label is a probability vector over the
//! `c` classes whose entries sum to one within [`SUM_TOLERANCE`].

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Absolute tolerance on `Σ d_i = 1`.
pub const SUM_TOLERANCE: f64 = 1e-9;

/// [`SUM_TOLERANCE`], widened to the rounding floor of narrow scalars such as `f32`.
pub fn sum_tolerance<T: Scalar>(c: usize) -> f64 {
    SUM_TOLERANCE.max(4.0 * c as f64 * T::epsilon().as_f64())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SoftLabel<T> {
    values: Vec<T>,
}

impl<T: Scalar> SoftLabel<T> {
    pub fn new(values: Vec<T>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::param(format!(
                "soft label needs at least 2 classes, got {}",
                values.len()
            )));
        }
        if let Some(bad) = values
            .iter()
            .position(|v| !v.is_finite() || *v < T::zero() || *v > T::one())
        {
            return Err(Error::param(format!(
                "soft label entry {bad} = {} is outside [0, 1]",
                values[bad]
            )));
        }
        let sum: f64 = values.iter().map(|v| v.as_f64()).sum();
        if (sum - 1.0).abs() > sum_tolerance::<T>(values.len()) {
            return Err(Error::param(format!("soft label sums to {sum}, not 1")));
        }
        Ok(Self { values })
    }

    /// Rescale nonnegative scores by their sum.
    pub fn normalized(scores: Vec<T>) -> Result<Self> {
        if scores.iter().any(|v| !v.is_finite() || *v < T::zero()) {
            return Err(Error::param("normalization needs finite nonnegative scores"));
        }
        let sum: T = scores.iter().copied().sum();
        if sum <= T::zero() {
            return Err(Error::param("normalization needs a positive total"));
        }
        Self::new(scores.into_iter().map(|v| v / sum).collect())
    }

    pub fn one_hot(c: usize, label: usize) -> Result<Self> {
        if label >= c {
            return Err(Error::param(format!("label {label} out of range for c = {c}")));
        }
        let mut values = vec![T::zero(); c];
        values[label] = T::one();
        Self::new(values)
    }

    pub fn uniform(c: usize) -> Result<Self> {
        Self::uniform_over(c, &(0..c).collect::<Vec<_>>())
    }

    /// Uniform mass over `members`, zero elsewhere.
    pub fn uniform_over(c: usize, members: &[usize]) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::param("uniform_over needs at least one member"));
        }
        let mut values = vec![T::zero(); c];
        let mass = T::one() / T::of_usize(members.len());
        for &m in members {
            if m >= c {
                return Err(Error::param(format!("label {m} out of range for c = {c}")));
            }
            values[m] = mass;
        }
        Self::new(values)
    }

    pub(crate) fn from_trusted(values: Vec<T>) -> Self {
        debug_assert!(Self::new(values.clone()).is_ok());
        Self { values }
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn num_classes(&self) -> usize {
        self.values.len()
    }

    /// Largest-mass class, lowest index on ties.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, v) in self.values.iter().enumerate() {
            if *v > self.values[best] {
                best = i;
            }
        }
        best
    }

    /// Classes ordered by decreasing mass, ties by ascending index.
    pub fn ranking(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.values.len()).collect();
        idx.sort_by(|&a, &b| {
            self.values[b]
                .partial_cmp(&self.values[a])
                .expect("validated entries are finite")
                .then(a.cmp(&b))
        });
        idx
    }

    pub fn top_k(&self, k: usize) -> Result<TopKSet> {
        top_k_set(self, k)
    }

    pub fn support(&self) -> TopKSet {
        support_set(self)
    }

    pub fn label_set(&self, semantics: Semantics) -> Result<TopKSet> {
        match semantics {
            Semantics::TopK(k) => self.top_k(k),
            Semantics::Support => Ok(self.support()),
        }
    }
}

/// Which label set `Ω(d)` a soft label induces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Semantics {
    /// The `k` highest-mass classes.
    TopK(usize),
    /// Every class with nonzero mass (candidate-set / PLL data).
    Support,
}

impl Semantics {
    /// The top-k cardinality, or `None` under support semantics.
    pub fn k(&self) -> Option<usize> {
        match self {
            Semantics::TopK(k) => Some(*k),
            Semantics::Support => None,
        }
    }
}

/// A set of class indices, kept sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TopKSet {
    members: Vec<usize>,
    k: usize,
}

impl TopKSet {
    pub fn from_members(mut members: Vec<usize>) -> Self {
        members.sort_unstable();
        members.dedup();
        let k = members.len();
        Self { members, k }
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, label: usize) -> bool {
        self.members.binary_search(&label).is_ok()
    }

    pub fn is_subset(&self, other: &TopKSet) -> bool {
        self.members.iter().all(|m| other.contains(*m))
    }
}

/// The `k` classes with largest mass; ties go to the smaller class index.
pub fn top_k_set<T: Scalar>(d: &SoftLabel<T>, k: usize) -> Result<TopKSet> {
    let c = d.num_classes();
    if k == 0 || k > c {
        return Err(Error::param(format!("k = {k} must lie in 1..={c}")));
    }
    let mut members = d.ranking();
    members.truncate(k);
    members.sort_unstable();
    Ok(TopKSet { members, k })
}

/// Classes carrying nonzero mass.
pub fn support_set<T: Scalar>(d: &SoftLabel<T>) -> TopKSet {
    let members: Vec<usize> = d
        .values()
        .iter()
        .enumerate()
        .filter(|(_, v)| **v > T::zero())
        .map(|(i, _)| i)
        .collect();
    let k = members.len();
    TopKSet { members, k }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledExample<T> {
    pub id: String,
    pub true_label: usize,
    pub soft: SoftLabel<T>,
}

/// Soft-labelled examples sharing a class count `c`, with unique ids.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftDataset<T> {
    c: usize,
    examples: Vec<LabeledExample<T>>,
}

impl<T: Scalar> SoftDataset<T> {
    pub fn new(c: usize, examples: Vec<LabeledExample<T>>) -> Result<Self> {
        if c < 2 {
            return Err(Error::param(format!("class count must be >= 2, got {c}")));
        }
        let mut bad = Vec::new();
        let mut seen = HashSet::with_capacity(examples.len());
        for ex in &examples {
            if ex.true_label >= c || ex.soft.num_classes() != c || !seen.insert(ex.id.as_str()) {
                bad.push(ex.id.clone());
            }
        }
        if !bad.is_empty() {
            return Err(Error::Validation {
                ids: bad,
                reason: format!("label out of range, wrong class count (c = {c}) or duplicate id"),
            });
        }
        Ok(Self { c, examples })
    }

    /// Builds a dataset with ids `"0"`, `"1"`, ...
    pub fn from_parts(c: usize, labels: &[usize], soft: Vec<SoftLabel<T>>) -> Result<Self> {
        if labels.len() != soft.len() {
            return Err(Error::param("labels and soft labels differ in length"));
        }
        let examples = labels
            .iter()
            .zip(soft)
            .enumerate()
            .map(|(i, (&y, d))| LabeledExample {
                id: i.to_string(),
                true_label: y,
                soft: d,
            })
            .collect();
        Self::new(c, examples)
    }

    pub fn num_classes(&self) -> usize {
        self.c
    }

    pub fn examples(&self) -> &[LabeledExample<T>] {
        &self.examples
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn true_labels(&self) -> Vec<usize> {
        self.examples.iter().map(|e| e.true_label).collect()
    }

    pub fn into_examples(self) -> Vec<LabeledExample<T>> {
        self.examples
    }
}
