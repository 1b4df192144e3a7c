//! Class-conditional spherical Gaussian blobs.

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RandomSeed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlobSpec {
    pub c: usize,
    /// Feature dimension.
    pub f: usize,
    /// Training examples, spread evenly over the classes.
    pub n_train: usize,
    pub n_test: usize,
    /// Norm of each class mean; noise has unit variance per coordinate.
    pub separation: f64,
}

impl BlobSpec {
    pub fn validate(&self) -> Result<()> {
        if self.c < 2 || self.f == 0 || self.n_train == 0 {
            return Err(Error::param("blobs need c >= 2, f >= 1 and n_train >= 1"));
        }
        if !(self.separation.is_finite() && self.separation >= 0.0) {
            return Err(Error::param("blob separation must be finite and nonnegative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Blobs {
    pub means: Vec<Vec<f64>>,
    pub train_x: Vec<Vec<f64>>,
    pub train_y: Vec<usize>,
    pub test_x: Vec<Vec<f64>>,
    pub test_y: Vec<usize>,
}

fn normal_vec<R: Rng>(f: usize, rng: &mut R) -> Vec<f64> {
    (0..f).map(|_| StandardNormal.sample(rng)).collect()
}

fn draw<R: Rng>(means: &[Vec<f64>], n: usize, rng: &mut R) -> (Vec<Vec<f64>>, Vec<usize>) {
    let c = means.len();
    let ys: Vec<usize> = (0..n).map(|i| i % c).collect();
    let xs = ys
        .iter()
        .map(|&y| {
            normal_vec(means[y].len(), rng)
                .into_iter()
                .zip(&means[y])
                .map(|(z, m)| z + m)
                .collect()
        })
        .collect();
    (xs, ys)
}

/// Random mean directions of norm `separation`, then labelled draws.
pub fn make_blobs(spec: &BlobSpec, seed: RandomSeed) -> Result<Blobs> {
    spec.validate()?;
    let mut rng = seed.fork("means").rng();
    let means = (0..spec.c)
        .map(|_| {
            let v = normal_vec(spec.f, &mut rng);
            let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
            v.into_iter().map(|a| a * spec.separation / norm).collect()
        })
        .collect::<Vec<Vec<f64>>>();
    let (train_x, train_y) = draw(&means, spec.n_train, &mut seed.fork("train").rng());
    let (test_x, test_y) = draw(&means, spec.n_test, &mut seed.fork("test").rng());
    Ok(Blobs {
        means,
        train_x,
        train_y,
        test_x,
        test_y,
    })
}

/// `r` distinct labels other than `y`, in ascending order.
pub fn random_targets<R: Rng>(c: usize, y: usize, r: usize, rng: &mut R) -> Vec<usize> {
    let mut s: Vec<usize> = sample(rng, c - 1, r)
        .into_iter()
        .map(|i| if i >= y { i + 1 } else { i })
        .collect();
    s.sort_unstable();
    s
}
