//! Additive-noise labels: one-hot labels plus i.i.d. Gaussian or Laplace
//! noise on every entry, renormalized into soft labels.
//!
//! The true entry is `1 + η_y` and it stays in the top-k as long as at least
//! `c − k` of the other `c − 1` entries fall below it, i.e. the `(c − k)`-th
//! smallest of `c − 1` draws is below `1 + η_y`:
//!
//! ```text
//! Δ = ∫ (1 − F₍c−k₎(1 + y)) f(y) dy,        γ = (Δ + k − 1)/(c − 1).
//! ```
//!
//! Δ is available by adaptive quadrature and by Monte Carlo; the two share no
//! code beyond the noise model.

pub mod order;
pub mod quadrature;

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::label::{SoftDataset, SoftLabel};
use crate::rng::{chunks, RandomSeed};
use crate::scalar::Scalar;
use order::{order_statistic_cdf, order_statistic_sf, OrderSpec};
use quadrature::integrate;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    Gaussian,
    Laplace,
}

impl FromStr for NoiseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(NoiseKind::Gaussian),
            "laplace" => Ok(NoiseKind::Laplace),
            other => Err(Error::param(format!("unknown noise kind '{other}'"))),
        }
    }
}

impl fmt::Display for NoiseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NoiseKind::Gaussian => "gaussian",
            NoiseKind::Laplace => "laplace",
        })
    }
}

/// Zero-location noise: σ for Gaussian, b for Laplace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel<T> {
    pub kind: NoiseKind,
    pub scale: T,
}

const SQRT_2: f64 = std::f64::consts::SQRT_2;

impl<T: Scalar> NoiseModel<T> {
    pub fn new(kind: NoiseKind, scale: T) -> Result<Self> {
        if !(scale > T::zero() && scale.is_finite()) {
            return Err(Error::param(format!("noise scale must be positive, got {scale}")));
        }
        Ok(Self { kind, scale })
    }

    pub fn gaussian(sigma: T) -> Result<Self> {
        Self::new(NoiseKind::Gaussian, sigma)
    }

    pub fn laplace(b: T) -> Result<Self> {
        Self::new(NoiseKind::Laplace, b)
    }

    pub fn pdf(&self, x: T) -> T {
        let z = x / self.scale;
        match self.kind {
            NoiseKind::Gaussian => {
                (-(z * z) / T::of(2.0)).exp() / (self.scale * T::of((2.0 * std::f64::consts::PI).sqrt()))
            }
            NoiseKind::Laplace => (-z.abs()).exp() / (T::of(2.0) * self.scale),
        }
    }

    pub fn cdf(&self, x: T) -> T {
        self.ln_cdf(x).exp()
    }

    pub fn ln_cdf(&self, x: T) -> T {
        let z = x / self.scale;
        match self.kind {
            NoiseKind::Gaussian => T::of((0.5 * erfc(-z.as_f64() / SQRT_2)).ln()),
            NoiseKind::Laplace if z < T::zero() => T::of(0.5).ln() + z,
            NoiseKind::Laplace => (-T::of(0.5) * (-z).exp()).ln_1p(),
        }
    }

    /// `ln(1 − F(x))`.
    pub fn ln_sf(&self, x: T) -> T {
        let z = x / self.scale;
        match self.kind {
            NoiseKind::Gaussian => T::of((0.5 * erfc(z.as_f64() / SQRT_2)).ln()),
            NoiseKind::Laplace if z >= T::zero() => T::of(0.5).ln() - z,
            NoiseKind::Laplace => (-T::of(0.5) * z.exp()).ln_1p(),
        }
    }

    pub fn quantile(&self, p: T) -> Result<T> {
        if !(p > T::zero() && p < T::one()) {
            return Err(Error::param(format!("quantile level must lie in (0, 1), got {p}")));
        }
        Ok(match self.kind {
            NoiseKind::Gaussian => {
                let n = Normal::new(0.0, self.scale.as_f64()).expect("positive scale");
                T::of(n.inverse_cdf(p.as_f64()))
            }
            NoiseKind::Laplace if p < T::of(0.5) => self.scale * (T::of(2.0) * p).ln(),
            NoiseKind::Laplace => -self.scale * (T::of(2.0) * (T::one() - p)).ln(),
        })
    }

    /// One draw, in `f64` for the samplers.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let s = self.scale.as_f64();
        match self.kind {
            NoiseKind::Gaussian => {
                let z: f64 = StandardNormal.sample(rng);
                s * z
            }
            NoiseKind::Laplace => {
                let u: f64 = rng.random::<f64>() - 0.5;
                -s * u.signum() * (-2.0 * u.abs()).ln_1p()
            }
        }
    }

    /// Integration range whose tails carry less than `tail` mass, and never
    /// narrower than ±12 scale units.
    fn support(&self, tail: T) -> (T, T) {
        let twelve = T::of(12.0) * self.scale;
        let hi = self.quantile(T::one() - tail).expect("tail in (0, 1)").max(twelve);
        (-hi, hi)
    }
}

fn check_classes(c: usize, k: usize) -> Result<()> {
    if c < 2 {
        return Err(Error::param(format!("need c >= 2 classes, got {c}")));
    }
    if k == 0 || k > c {
        return Err(Error::param(format!("k = {k} must lie in 1..={c}")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum DeltaMethod {
    MonteCarlo { samples: usize, seed: RandomSeed },
    Quadrature { abs_tol: f64, max_intervals: usize },
}

impl DeltaMethod {
    pub const DEFAULT_SAMPLES: usize = 1_000_000;
    pub const DEFAULT_TOL: f64 = 1e-8;
    pub const DEFAULT_INTERVALS: usize = 2_000;

    pub fn monte_carlo(samples: usize, seed: RandomSeed) -> Self {
        DeltaMethod::MonteCarlo { samples, seed }
    }

    pub fn quadrature() -> Self {
        DeltaMethod::Quadrature {
            abs_tol: Self::DEFAULT_TOL,
            max_intervals: Self::DEFAULT_INTERVALS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeltaEstimate<T> {
    pub delta: T,
    /// Binomial standard error of a Monte Carlo estimate.
    pub stderr: Option<T>,
    /// Quadrature error estimate.
    pub error_estimate: Option<T>,
    /// False when the quadrature budget ran out before the tolerance was met.
    pub converged: bool,
    pub note: Option<String>,
}

impl<T: Scalar> DeltaEstimate<T> {
    fn exact_zero(note: &str) -> Self {
        Self {
            delta: T::zero(),
            stderr: None,
            error_estimate: Some(T::zero()),
            converged: true,
            note: Some(note.into()),
        }
    }

    fn from_counts(missed: u64, total: u64) -> Self {
        let p = missed as f64 / total as f64;
        Self {
            delta: T::of(p),
            stderr: Some(T::of((p * (1.0 - p) / total as f64).sqrt())),
            error_estimate: None,
            converged: true,
            note: None,
        }
    }
}

/// Unreliability degree of additive-noise labels for top-k.
pub fn delta_additive_noise<T: Scalar>(
    model: &NoiseModel<T>,
    c: usize,
    k: usize,
    method: DeltaMethod,
) -> Result<DeltaEstimate<T>> {
    check_classes(c, k)?;
    if k == c {
        return Ok(DeltaEstimate::exact_zero("k = c: every label is in the top-k"));
    }
    match method {
        DeltaMethod::MonteCarlo { samples, seed } => {
            let counts = rank_counts_mc(model, c, samples, seed)?;
            let missed: u64 = counts[k..].iter().sum();
            Ok(DeltaEstimate::from_counts(missed, samples as u64))
        }
        DeltaMethod::Quadrature { abs_tol, max_intervals } => {
            delta_quadrature(model, c, k, T::of(abs_tol), max_intervals)
        }
    }
}

/// Monte Carlo Δ for every `k` in `1..c` from one shared sample.
pub fn delta_profile_mc<T: Scalar>(
    model: &NoiseModel<T>,
    c: usize,
    samples: usize,
    seed: RandomSeed,
) -> Result<Vec<DeltaEstimate<T>>> {
    check_classes(c, 1)?;
    let counts = rank_counts_mc(model, c, samples, seed)?;
    Ok((1..c)
        .map(|k| DeltaEstimate::from_counts(counts[k..].iter().sum(), samples as u64))
        .collect())
}

const MC_CHUNK: usize = 1 << 16;

/// `counts[r]` = number of samples in which exactly `r` of the `c − 1` wrong
/// entries strictly exceed the true entry `1 + η`.
pub fn rank_counts_mc<T: Scalar>(model: &NoiseModel<T>, c: usize, samples: usize, seed: RandomSeed) -> Result<Vec<u64>> {
    check_classes(c, 1)?;
    if samples == 0 {
        return Err(Error::param("Monte Carlo needs at least one sample"));
    }
    let work: Vec<_> = chunks(samples, MC_CHUNK).collect();
    let counts = work
        .into_par_iter()
        .map(|(idx, start, end)| {
            let mut rng = seed.child(idx).rng();
            let mut counts = vec![0u64; c];
            for _ in start..end {
                let truth = 1.0 + model.sample(&mut rng);
                let above = (1..c).filter(|_| model.sample(&mut rng) > truth).count();
                counts[above] += 1;
            }
            counts
        })
        .reduce(
            || vec![0u64; c],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
    Ok(counts)
}

fn delta_quadrature<T: Scalar>(
    model: &NoiseModel<T>,
    c: usize,
    k: usize,
    abs_tol: T,
    max_intervals: usize,
) -> Result<DeltaEstimate<T>> {
    let spec = OrderSpec::new(*model, c - 1, c - k)?;
    let tail = abs_tol * T::of(1e-2);
    let integral = integrate_over_noise(model, tail, abs_tol, max_intervals, |y| {
        order_statistic_sf(&spec, T::one() + y)
    });
    let error = integral.error + T::of(2.0) * tail;
    Ok(DeltaEstimate {
        delta: integral.value.max(T::zero()).min(T::one()),
        stderr: None,
        error_estimate: Some(error),
        converged: integral.converged,
        note: (!integral.converged).then(|| "quadrature budget exhausted before tolerance".to_string()),
    })
}

/// `∫ g(y) f(y) dy` over the noise support, split at the kinks `y = −1` and `y = 0`.
fn integrate_over_noise<T: Scalar, G: Fn(T) -> T>(
    model: &NoiseModel<T>,
    tail: T,
    abs_tol: T,
    max_intervals: usize,
    g: G,
) -> quadrature::Integral<T> {
    let (lo, hi) = model.support(tail);
    let mut points = vec![lo];
    points.extend([-T::one(), T::zero()].into_iter().filter(|p| *p > lo && *p < hi));
    points.push(hi);
    integrate(|y| g(y) * model.pdf(y), &points, abs_tol, max_intervals)
}

/// The literal order-distribution expression `Pr(1 + y > x)` with
/// `x ~ Order(d, c − 1, c − k + 1)`. It equals the probability that the true
/// label is in the top `k − 1`, i.e. `1 − Δ(k − 1)`, and is kept for comparison only.
pub fn delta_literal_formula<T: Scalar>(model: &NoiseModel<T>, c: usize, k: usize) -> Result<T> {
    check_classes(c, k)?;
    if k < 2 || k > c - 1 {
        return Err(Error::param("literal formula needs 2 <= k <= c - 1"));
    }
    let spec = OrderSpec::new(*model, c - 1, c - k + 1)?;
    let tol = T::of(DeltaMethod::DEFAULT_TOL);
    Ok(integrate_over_noise(model, tol * T::of(1e-2), tol, DeltaMethod::DEFAULT_INTERVALS, |y| {
        order_statistic_cdf(&spec, T::one() + y)
    })
    .value)
}

/// `γ = (Δ + k − 1)/(c − 1)` for symmetric additive noise.
pub fn gamma_additive_noise<T: Scalar>(delta: T, c: usize, k: usize) -> Result<T> {
    check_classes(c, k)?;
    if k == c {
        return Err(Error::param("gamma formula needs k <= c - 1"));
    }
    if !(delta >= T::zero() && delta <= T::one()) {
        return Err(Error::param(format!("delta must lie in [0, 1], got {delta}")));
    }
    Ok((delta + T::of_usize(k - 1)) / T::of_usize(c - 1))
}

const GEN_CHUNK: usize = 4096;

/// One-hot labels plus i.i.d. noise, shifted by the row minimum and divided by
/// the row sum. The shift and scale preserve the ranking of the entries.
pub fn make_noisy_dataset<T: Scalar>(
    true_labels: &[usize],
    model: &NoiseModel<T>,
    c: usize,
    seed: RandomSeed,
) -> Result<SoftDataset<T>> {
    check_classes(c, 1)?;
    if let Some(bad) = true_labels.iter().find(|&&y| y >= c) {
        return Err(Error::param(format!("true label {bad} out of range for c = {c}")));
    }
    let work: Vec<_> = chunks(true_labels.len(), GEN_CHUNK).collect();
    let soft: Vec<SoftLabel<T>> = work
        .into_par_iter()
        .map(|(idx, start, end)| {
            let mut rng = seed.child(idx).rng();
            true_labels[start..end]
                .iter()
                .map(|&y| noisy_label(y, c, model, &mut rng))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    SoftDataset::from_parts(c, true_labels, soft)
}

fn noisy_label<T: Scalar, R: Rng>(y: usize, c: usize, model: &NoiseModel<T>, rng: &mut R) -> Result<SoftLabel<T>> {
    loop {
        let raw: Vec<f64> = (0..c)
            .map(|j| if j == y { 1.0 } else { 0.0 } + model.sample(rng))
            .collect();
        let min = raw.iter().copied().fold(f64::INFINITY, f64::min);
        let shifted: Vec<f64> = raw.iter().map(|v| v - min).collect();
        let sum: f64 = shifted.iter().sum();
        if sum > 0.0 {
            return SoftLabel::new(shifted.iter().map(|v| T::of(v / sum)).collect());
        }
    }
}
