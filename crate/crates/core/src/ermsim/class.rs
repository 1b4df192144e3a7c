//! Finite hypothesis classes over a finite pool of scalar instances.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_CLASS_SIZE: usize = 1_000_000;
pub const MAX_POOL_SIZE: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClassKind {
    ExplicitTable,
    /// Piecewise-constant labelings of the sorted pool with at most
    /// `thresholds` label changes.
    Intervals { thresholds: usize },
}

/// Every hypothesis is stored as its label on each pool point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisClass {
    kind: ClassKind,
    pool: Vec<f64>,
    c: usize,
    table: Vec<Vec<u8>>,
}

fn check_shape(pool: usize, c: usize) -> Result<()> {
    if pool == 0 || pool > MAX_POOL_SIZE {
        return Err(Error::param(format!("pool size must lie in 1..={MAX_POOL_SIZE}, got {pool}")));
    }
    if !(2..=256).contains(&c) {
        return Err(Error::param(format!("class count must lie in 2..=256, got {c}")));
    }
    Ok(())
}

fn too_large(size: u128) -> Error {
    Error::param(format!("hypothesis class would hold {size} members, above the {MAX_CLASS_SIZE} limit"))
}

/// Evenly spaced instances `0, 1/(m−1), …, 1` (a single point sits at 0).
pub fn uniform_pool(size: usize) -> Vec<f64> {
    let d = (size.max(2) - 1) as f64;
    (0..size).map(|i| i as f64 / d).collect()
}

impl HypothesisClass {
    /// A class given as a table of labels, one row per hypothesis, one column per pool point.
    pub fn explicit(pool: Vec<f64>, c: usize, table: Vec<Vec<usize>>) -> Result<Self> {
        check_shape(pool.len(), c)?;
        if table.is_empty() {
            return Err(Error::param("hypothesis class must be nonempty"));
        }
        if table.len() > MAX_CLASS_SIZE {
            return Err(too_large(table.len() as u128));
        }
        let table = table
            .into_iter()
            .enumerate()
            .map(|(h, row)| {
                if row.len() != pool.len() {
                    return Err(Error::param(format!(
                        "hypothesis {h} labels {} points, the pool has {}",
                        row.len(),
                        pool.len()
                    )));
                }
                row.into_iter()
                    .map(|l| {
                        if l < c {
                            Ok(l as u8)
                        } else {
                            Err(Error::param(format!("hypothesis {h} uses label {l} >= c = {c}")))
                        }
                    })
                    .collect()
            })
            .collect::<Result<Vec<Vec<u8>>>>()?;
        Ok(Self {
            kind: ClassKind::ExplicitTable,
            pool,
            c,
            table,
        })
    }

    /// All labelings of the sorted pool that change label at most
    /// `thresholds` times, in order of cut count, then cut positions, then
    /// segment labels. Labelings reachable more than once keep their first position.
    pub fn intervals(pool_size: usize, c: usize, thresholds: usize) -> Result<Self> {
        check_shape(pool_size, c)?;
        let cuts_max = thresholds.min(pool_size - 1);
        let mut bound: u128 = 0;
        for j in 0..=cuts_max {
            bound += binomial(pool_size - 1, j) * (c as u128).pow(j as u32 + 1);
        }
        if bound > MAX_CLASS_SIZE as u128 {
            return Err(too_large(bound));
        }
        let mut seen = HashSet::new();
        let mut table = Vec::with_capacity(bound as usize);
        for j in 0..=cuts_max {
            for_each_combination(pool_size - 1, j, |cuts| {
                let mut labels = vec![0usize; j + 1];
                loop {
                    let mut row = Vec::with_capacity(pool_size);
                    let mut seg = 0;
                    for x in 0..pool_size {
                        if seg < j && x == cuts[seg] + 1 {
                            seg += 1;
                        }
                        row.push(labels[seg] as u8);
                    }
                    if seen.insert(row.clone()) {
                        table.push(row);
                    }
                    if !odometer(&mut labels, c) {
                        break;
                    }
                }
            });
        }
        Ok(Self {
            kind: ClassKind::Intervals { thresholds },
            pool: uniform_pool(pool_size),
            c,
            table,
        })
    }

    /// The `c` constant functions.
    pub fn constants(pool_size: usize, c: usize) -> Result<Self> {
        check_shape(pool_size, c)?;
        let table = (0..c).map(|l| vec![l; pool_size]).collect();
        Self::explicit(uniform_pool(pool_size), c, table)
    }

    /// Every function from the pool to the labels.
    pub fn all_functions(pool_size: usize, c: usize) -> Result<Self> {
        check_shape(pool_size, c)?;
        let size = (c as u128).checked_pow(pool_size as u32).unwrap_or(u128::MAX);
        if size > MAX_CLASS_SIZE as u128 {
            return Err(too_large(size));
        }
        let mut table = Vec::with_capacity(size as usize);
        let mut row = vec![0usize; pool_size];
        loop {
            table.push(row.clone());
            if !odometer(&mut row, c) {
                break;
            }
        }
        Self::explicit(uniform_pool(pool_size), c, table)
    }

    /// The same hypotheses as an explicit table.
    pub fn to_explicit(&self) -> Self {
        Self {
            kind: ClassKind::ExplicitTable,
            ..self.clone()
        }
    }

    pub fn kind(&self) -> ClassKind {
        self.kind
    }

    pub fn pool(&self) -> &[f64] {
        &self.pool
    }

    pub fn pool_size(&self) -> usize {
        self.pool.len()
    }

    pub fn num_classes(&self) -> usize {
        self.c
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    /// Label of hypothesis `h` on pool point `x`.
    pub fn label(&self, h: usize, x: usize) -> usize {
        self.table[h][x] as usize
    }

    pub fn row(&self, h: usize) -> &[u8] {
        &self.table[h]
    }

    pub(crate) fn rows(&self) -> &[Vec<u8>] {
        &self.table
    }

    /// Index of the hypothesis with exactly these labels.
    pub fn find(&self, labels: &[usize]) -> Option<usize> {
        self.table
            .iter()
            .position(|row| row.len() == labels.len() && row.iter().zip(labels).all(|(a, &b)| *a as usize == b))
    }

    /// A copy restricted to the hypotheses with the given indices.
    pub fn subclass(&self, keep: &[usize]) -> Result<Self> {
        if keep.is_empty() {
            return Err(Error::param("subclass must keep at least one hypothesis"));
        }
        if let Some(bad) = keep.iter().find(|&&h| h >= self.len()) {
            return Err(Error::param(format!("hypothesis index {bad} out of range")));
        }
        Ok(Self {
            kind: ClassKind::ExplicitTable,
            table: keep.iter().map(|&h| self.table[h].clone()).collect(),
            ..self.clone()
        })
    }

    /// A copy restricted to the given pool points.
    pub fn restrict_pool(&self, points: &[usize]) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::param("restricted pool must keep at least one point"));
        }
        if let Some(bad) = points.iter().find(|&&x| x >= self.pool_size()) {
            return Err(Error::param(format!("pool index {bad} out of range")));
        }
        Ok(Self {
            kind: ClassKind::ExplicitTable,
            pool: points.iter().map(|&x| self.pool[x]).collect(),
            c: self.c,
            table: self
                .table
                .iter()
                .map(|row| points.iter().map(|&x| row[x]).collect())
                .collect(),
        })
    }
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Advance a base-`c` counter; false once it wraps to all zeros.
pub(crate) fn odometer(digits: &mut [usize], c: usize) -> bool {
    for d in digits.iter_mut().rev() {
        *d += 1;
        if *d < c {
            return true;
        }
        *d = 0;
    }
    false
}

/// Calls `f` with every `k`-subset of `0..n` in lexicographic order.
pub(crate) fn for_each_combination(n: usize, k: usize, mut f: impl FnMut(&[usize])) {
    if k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx);
        let Some(i) = (0..k).rev().find(|&i| idx[i] != i + n - k) else {
            return;
        };
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_sizes() {
        let h = HypothesisClass::intervals(5, 2, 1).unwrap();
        // 2 constants + 4 cut positions × 2 non-constant labelings
        assert_eq!(h.len(), 2 + 4 * 2);
        let h = HypothesisClass::intervals(20, 10, 1).unwrap();
        assert_eq!(h.len(), 10 + 19 * 90);
        assert_eq!(h.row(0), &[0u8; 20][..]);
    }

    #[test]
    fn interval_labelings_have_few_changes() {
        let h = HypothesisClass::intervals(6, 3, 2).unwrap();
        for i in 0..h.len() {
            let changes = h.row(i).windows(2).filter(|w| w[0] != w[1]).count();
            assert!(changes <= 2);
        }
        let distinct: HashSet<_> = h.rows().iter().collect();
        assert_eq!(distinct.len(), h.len());
        let expected = 3 + 5 * 6 + 10 * 3 * 2 * 2;
        assert_eq!(h.len(), expected);
    }

    #[test]
    fn guardrails() {
        assert!(HypothesisClass::intervals(65, 2, 1).is_err());
        assert!(HypothesisClass::intervals(40, 10, 3).is_err());
        assert!(HypothesisClass::all_functions(7, 10).is_err());
        assert!(HypothesisClass::explicit(vec![0.0], 2, vec![vec![2]]).is_err());
        assert!(HypothesisClass::explicit(vec![0.0, 1.0], 2, vec![vec![0]]).is_err());
    }

    #[test]
    fn find_and_restrict() {
        let h = HypothesisClass::all_functions(3, 2).unwrap();
        assert_eq!(h.len(), 8);
        assert_eq!(h.find(&[1, 0, 1]), Some(5));
        let r = h.restrict_pool(&[0, 2]).unwrap();
        assert_eq!(r.row(5), &[1, 1]);
        let s = h.subclass(&[5, 0]).unwrap();
        assert_eq!(s.row(0), &[1, 0, 1]);
    }

    #[test]
    fn combinations_in_order() {
        let mut seen = Vec::new();
        for_each_combination(4, 2, |c| seen.push(c.to_vec()));
        assert_eq!(seen, vec![vec![0, 1], vec![0, 2], vec![0, 3], vec![1, 2], vec![1, 3], vec![2, 3]]);
        let mut empty = 0;
        for_each_combination(3, 0, |_| empty += 1);
        assert_eq!(empty, 1);
    }
}
