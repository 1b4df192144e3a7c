//! Natarajan dimension by exhaustive search.
//!
//! A set `S` is N-shattered when there are labelings `f₁, f₂` of `S` that
//! differ at every point and, for every `T ⊆ S`, some hypothesis agrees with
//! `f₁` on `T` and with `f₂` on `S ∖ T`. Subsets of an N-shattered set are
//! N-shattered, so sizes are scanned upward and the scan stops at the first
//! size with no shattered set.
//!
//! For a fixed `S` the search picks `(f₁(x), f₂(x))` point by point while
//! keeping, for every partial pattern `T`, the projected hypotheses that
//! still match it; a pattern with no match prunes the branch.

use std::collections::HashSet;

use serde::Serialize;

use super::class::{for_each_combination, HypothesisClass};
use crate::error::{Error, Result};

pub const MAX_SHATTER_CAP: usize = 12;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Witness {
    /// Pool indices of the shattered set.
    pub points: Vec<usize>,
    pub f1: Vec<usize>,
    pub f2: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NatarajanResult {
    pub dimension: usize,
    /// The search stopped at `cap` while sets of that size were still shattered.
    pub lower_bound_only: bool,
    /// A shattered set of size `dimension`; `None` when the dimension is 0.
    pub witness: Option<Witness>,
}

pub fn natarajan_dimension(class: &HypothesisClass, cap: usize) -> Result<NatarajanResult> {
    if cap > MAX_SHATTER_CAP {
        return Err(Error::param(format!("shattering cap must be at most {MAX_SHATTER_CAP}, got {cap}")));
    }
    let limit = cap.min(class.pool_size());
    let mut best = NatarajanResult {
        dimension: 0,
        lower_bound_only: false,
        witness: None,
    };
    for size in 1..=limit {
        // A shattered set needs 2^size distinct projections.
        if class.len() < 1 << size {
            break;
        }
        match find_shattered(class, size) {
            Some(w) => {
                best.dimension = size;
                best.witness = Some(w);
            }
            None => return Ok(best),
        }
    }
    best.lower_bound_only = best.dimension == cap && cap < class.pool_size();
    Ok(best)
}

/// First N-shattered set of the given size, in lexicographic order of point sets.
pub fn find_shattered(class: &HypothesisClass, size: usize) -> Option<Witness> {
    let mut found = None;
    let mut buf = Vec::new();
    for_each_combination(class.pool_size(), size, |points| {
        if found.is_some() {
            return;
        }
        buf.clear();
        let projections = project(class, points);
        if let Some((f1, f2)) = shatter_pair(&projections, size, class.num_classes(), &mut buf) {
            found = Some(Witness {
                points: points.to_vec(),
                f1,
                f2,
            });
        }
    });
    found
}

fn project(class: &HypothesisClass, points: &[usize]) -> Vec<Vec<u8>> {
    let mut seen = HashSet::new();
    class
        .rows()
        .iter()
        .map(|row| points.iter().map(|&x| row[x]).collect::<Vec<u8>>())
        .filter(|p| seen.insert(p.clone()))
        .collect()
}

/// Whether `points` is N-shattered, and by which pair.
pub fn is_shattered(class: &HypothesisClass, points: &[usize]) -> Option<(Vec<usize>, Vec<usize>)> {
    shatter_pair(&project(class, points), points.len(), class.num_classes(), &mut Vec::new())
}

fn shatter_pair(
    projections: &[Vec<u8>],
    size: usize,
    c: usize,
    pairs: &mut Vec<(u8, u8)>,
) -> Option<(Vec<usize>, Vec<usize>)> {
    if projections.len() < 1 << size {
        return None;
    }
    let groups = vec![(0..projections.len()).collect::<Vec<usize>>()];
    if extend(projections, size, c, 0, &groups, pairs) {
        let f1 = pairs.iter().map(|p| p.0 as usize).collect();
        let f2 = pairs.iter().map(|p| p.1 as usize).collect();
        Some((f1, f2))
    } else {
        None
    }
}

fn extend(
    projections: &[Vec<u8>],
    size: usize,
    c: usize,
    depth: usize,
    groups: &[Vec<usize>],
    pairs: &mut Vec<(u8, u8)>,
) -> bool {
    if depth == size {
        return true;
    }
    // Labels present in every group at this column; a pair must use two of them.
    let mut common = vec![true; c];
    let mut present = vec![false; c];
    for g in groups {
        present.iter_mut().for_each(|p| *p = false);
        for &t in g {
            present[projections[t][depth] as usize] = true;
        }
        common.iter_mut().zip(&present).for_each(|(c, p)| *c &= *p);
    }
    let values: Vec<u8> = (0..c).filter(|&v| common[v]).map(|v| v as u8).collect();
    for (i, &a) in values.iter().enumerate() {
        // Swapping f₁ and f₂ at one point maps pattern T to T △ {x}, so a < b suffices.
        for &b in &values[i + 1..] {
            let mut next = Vec::with_capacity(groups.len() * 2);
            let ok = groups.iter().all(|g| {
                let with_a: Vec<usize> = g.iter().copied().filter(|&t| projections[t][depth] == a).collect();
                let with_b: Vec<usize> = g.iter().copied().filter(|&t| projections[t][depth] == b).collect();
                let nonempty = !with_a.is_empty() && !with_b.is_empty();
                next.push(with_a);
                next.push(with_b);
                nonempty
            });
            if !ok {
                continue;
            }
            pairs.push((a, b));
            if extend(projections, size, c, depth + 1, &next, pairs) {
                return true;
            }
            pairs.pop();
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Tries every pair of pointwise-different labelings and every pattern.
    fn naive_shattered(class: &HypothesisClass, points: &[usize]) -> bool {
        let c = class.num_classes();
        let s = points.len();
        let proj: HashSet<Vec<usize>> = (0..class.len())
            .map(|h| points.iter().map(|&x| class.label(h, x)).collect())
            .collect();
        let mut f1 = vec![0usize; s];
        loop {
            let mut f2 = vec![0usize; s];
            loop {
                if f1.iter().zip(&f2).all(|(a, b)| a != b)
                    && (0..1u32 << s).all(|t| {
                        let mix: Vec<usize> = (0..s).map(|i| if t >> i & 1 == 1 { f1[i] } else { f2[i] }).collect();
                        proj.contains(&mix)
                    })
                {
                    return true;
                }
                if !super::super::class::odometer(&mut f2, c) {
                    break;
                }
            }
            if !super::super::class::odometer(&mut f1, c) {
                return false;
            }
        }
    }

    fn naive_dimension(class: &HypothesisClass) -> usize {
        let mut d = 0;
        for size in 1..=class.pool_size() {
            let mut any = false;
            for_each_combination(class.pool_size(), size, |pts| any |= naive_shattered(class, pts));
            if any {
                d = size;
            }
        }
        d
    }

    #[test]
    fn full_function_class_shatters_pool() {
        let h = HypothesisClass::all_functions(3, 2).unwrap();
        let r = natarajan_dimension(&h, 12).unwrap();
        assert_eq!(r.dimension, 3);
        assert!(!r.lower_bound_only);
        assert_eq!(r.witness.unwrap().points, vec![0, 1, 2]);
    }

    #[test]
    fn constants_have_dimension_one() {
        let h = HypothesisClass::constants(5, 3).unwrap();
        assert_eq!(natarajan_dimension(&h, 12).unwrap().dimension, 1);
        assert_eq!(naive_dimension(&h), 1);
        let single = h.subclass(&[0]).unwrap();
        let r = natarajan_dimension(&single, 12).unwrap();
        assert_eq!(r.dimension, 0);
        assert!(r.witness.is_none());
    }

    #[test]
    fn matches_naive_oracle_on_small_classes() {
        for (pool, c, m) in [(4, 2, 1), (5, 3, 1), (5, 2, 2), (4, 3, 2)] {
            let h = HypothesisClass::intervals(pool, c, m).unwrap();
            let fast = natarajan_dimension(&h, 12).unwrap();
            assert_eq!(fast.dimension, naive_dimension(&h), "pool {pool} c {c} m {m}");
            let w = fast.witness.unwrap();
            assert!(naive_shattered(&h, &w.points));
        }
    }

    #[test]
    fn witness_is_valid() {
        let h = HypothesisClass::intervals(8, 4, 2).unwrap();
        let r = natarajan_dimension(&h, 12).unwrap();
        let w = r.witness.unwrap();
        assert!(w.f1.iter().zip(&w.f2).all(|(a, b)| a != b));
        for t in 0..1u32 << w.points.len() {
            let mix: Vec<usize> = (0..w.points.len())
                .map(|i| if t >> i & 1 == 1 { w.f1[i] } else { w.f2[i] })
                .collect();
            assert!((0..h.len()).any(|k| w.points.iter().zip(&mix).all(|(&x, &l)| h.label(k, x) == l)));
        }
    }

    #[test]
    fn cap_reports_lower_bound() {
        let h = HypothesisClass::all_functions(4, 2).unwrap();
        let r = natarajan_dimension(&h, 2).unwrap();
        assert_eq!(r.dimension, 2);
        assert!(r.lower_bound_only);
        assert!(natarajan_dimension(&h, 13).is_err());
    }
}
