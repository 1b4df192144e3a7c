//! Learnability rate θ, failure-probability bounds and the sample complexity
//! `n₀` of the ERM learner on soft labels.
//!
//! Two forms of the failure bound are offered:
//!
//! * [`BoundVariant::Statement`]: `(2n)^{d_H} L^{2 d_H} exp(−nθε/2)`;
//! * [`BoundVariant::Derivation`]:
//!   `2^{d_H+1} n^{d_H} L^{2 d_H} (2 − 2Δ)^n ((1 − Δ + γ)/(2(1 − Δ)))^{nε/2}`.
//!
//! They differ by the factor `(2 − 2Δ)^n`. With that factor the per-sample rate is
//! `θε/2 − log(2 − 2Δ)`, which is not positive for small Δ; such results carry
//! `vacuous = true` because the bound then grows with `n`. `n₀` is derived from
//! the second form. Everything is evaluated as a natural logarithm.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{CompensatedSum, Scalar};

/// `θ = log(2(1 − Δ)/(1 − Δ + γ))`, positive when `Δ + γ < 1`.
pub fn theta<T: Scalar>(delta: T, gamma: T) -> Result<T> {
    if !(delta >= T::zero() && gamma >= T::zero()) {
        return Err(Error::param("theta needs nonnegative delta and gamma"));
    }
    if !(delta + gamma < T::one()) {
        return Err(Error::param(format!(
            "theta undefined: delta + gamma >= 1 (delta = {delta}, gamma = {gamma})"
        )));
    }
    let keep = T::one() - delta;
    Ok((T::of(2.0) * keep / (keep + gamma)).ln())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundParams<T> {
    /// Unreliability degree Δ.
    pub delta: T,
    /// Ambiguity degree γ.
    pub gamma: T,
    /// Target error ε.
    pub eps: T,
    /// Failure probability δ.
    pub conf: T,
    /// Natarajan dimension of the hypothesis class.
    pub dh: u32,
    /// Label-cardinality constant `L`; the class count unless overridden.
    pub labels: u32,
}

impl<T: Scalar> BoundParams<T> {
    pub fn new(delta: T, gamma: T, eps: T, conf: T, dh: u32, labels: u32) -> Result<Self> {
        let p = Self {
            delta,
            gamma,
            eps,
            conf,
            dh,
            labels,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let unit_open = |x: T| x > T::zero() && x < T::one();
        if !(self.delta >= T::zero() && self.delta < T::one()) {
            return Err(Error::param(format!("delta must lie in [0, 1), got {}", self.delta)));
        }
        if !(self.gamma >= T::zero() && self.gamma < T::one()) {
            return Err(Error::param(format!("gamma must lie in [0, 1), got {}", self.gamma)));
        }
        if !(self.delta + self.gamma < T::one()) {
            return Err(Error::param("bounds need delta + gamma < 1"));
        }
        if !unit_open(self.eps) || !unit_open(self.conf) {
            return Err(Error::param("eps and conf must lie in (0, 1)"));
        }
        if self.dh == 0 || self.labels == 0 {
            return Err(Error::param("dh and labels must be positive"));
        }
        Ok(())
    }

    pub fn theta(&self) -> T {
        theta(self.delta, self.gamma).expect("validated params")
    }

    /// `θε/2 − log(2 − 2Δ)`: exponential decay rate per sample of the derivation bound.
    pub fn derivation_rate(&self) -> T {
        let two = T::of(2.0);
        self.theta() * self.eps / two - (two - two * self.delta).ln()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundVariant {
    Statement,
    Derivation,
}

impl FromStr for BoundVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "statement" => Ok(BoundVariant::Statement),
            "derivation" => Ok(BoundVariant::Derivation),
            other => Err(Error::param(format!("unknown bound variant '{other}'"))),
        }
    }
}

impl fmt::Display for BoundVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BoundVariant::Statement => "statement",
            BoundVariant::Derivation => "derivation",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogBound<T> {
    pub variant: BoundVariant,
    pub n: u64,
    /// Natural log of the bound on the failure probability.
    pub log_bound: T,
    /// Per-sample exponential rate; the bound shrinks with `n` only if positive.
    pub rate: T,
    pub vacuous: bool,
}

impl<T: Scalar> LogBound<T> {
    /// The bound itself, capped at 1.
    pub fn probability(&self) -> T {
        self.log_bound.min(T::zero()).exp()
    }
}

pub fn failure_prob_bound<T: Scalar>(n: u64, p: &BoundParams<T>, variant: BoundVariant) -> Result<LogBound<T>> {
    p.validate()?;
    if n == 0 {
        return Err(Error::param("failure bound needs n >= 1"));
    }
    let two = T::of(2.0);
    let nf = T::from_u64(n).expect("u64 fits");
    let dh = T::from_u32(p.dh).expect("u32 fits");
    let ln_l = T::from_u32(p.labels).expect("u32 fits").ln();
    let theta = p.theta();
    let mut acc = CompensatedSum::new();
    let rate = match variant {
        BoundVariant::Statement => {
            let rate = theta * p.eps / two;
            acc.add(dh * (two * nf).ln());
            acc.add(two * dh * ln_l);
            acc.add(-nf * rate);
            rate
        }
        BoundVariant::Derivation => {
            let rate = p.derivation_rate();
            acc.add((dh + T::one()) * two.ln());
            acc.add(dh * nf.ln());
            acc.add(two * dh * ln_l);
            acc.add(nf * (two - two * p.delta).ln());
            acc.add(-nf * theta * p.eps / two);
            rate
        }
    };
    Ok(LogBound {
        variant,
        n,
        log_bound: acc.value(),
        rate,
        vacuous: rate <= T::zero(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SampleComplexity<T> {
    pub n0: T,
    /// `8 log 2 / ε`, below which the symmetrization step does not apply.
    pub floor: T,
    pub effective_n0: T,
    pub theta: T,
    pub rate: T,
}

impl<T: Scalar> SampleComplexity<T> {
    /// Smallest integer sample size at or above `effective_n0`.
    pub fn n_required(&self) -> u64 {
        self.effective_n0.ceil().to_u64().expect("finite n0")
    }
}

/// `n₀ = 2/r · (d_H(log 2d_H + log(1/r) + 2 log L) + log(1/δ) + 1)` with
/// `r = θε/2 + log(1/(2 − 2Δ))`.
pub fn sample_complexity<T: Scalar>(p: &BoundParams<T>) -> Result<SampleComplexity<T>> {
    p.validate()?;
    let rate = p.derivation_rate();
    if !(rate > T::zero()) {
        return Err(Error::Vacuous {
            delta: p.delta.as_f64(),
            gamma: p.gamma.as_f64(),
            eps: p.eps.as_f64(),
            rate: rate.as_f64(),
        });
    }
    let two = T::of(2.0);
    let dh = T::from_u32(p.dh).expect("u32 fits");
    let ln_l = T::from_u32(p.labels).expect("u32 fits").ln();
    let inner = dh * ((two * dh).ln() - rate.ln() + two * ln_l) - p.conf.ln() + T::one();
    let n0 = two / rate * inner;
    let floor = T::of(8.0) * two.ln() / p.eps;
    Ok(SampleComplexity {
        n0,
        floor,
        effective_n0: n0.max(floor),
        theta: p.theta(),
        rate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(delta: f64, gamma: f64, eps: f64, conf: f64, dh: u32, labels: u32) -> BoundParams<f64> {
        BoundParams::new(delta, gamma, eps, conf, dh, labels).unwrap()
    }

    #[test]
    fn theta_values() {
        assert!((theta(0.0f64, 0.0).unwrap() - std::f64::consts::LN_2).abs() < 1e-15);
        assert!((theta(0.1f64, 0.3).unwrap() - 0.405_465_108_108_164_4).abs() < 1e-15);
        let near = theta(0.0f64, 1.0 - 1e-12).unwrap();
        assert!(near > 0.0 && near < 1e-11);
        assert!(theta(0.5f64, 0.5).is_err());
        assert!((theta(0.1f32, 0.3).unwrap() - 0.405_465_1).abs() < 1e-6);
    }

    #[test]
    fn statement_bound_formula() {
        let p = params(0.4, 0.1, 0.5, 0.05, 1, 2);
        let b = failure_prob_bound(1000, &p, BoundVariant::Statement).unwrap();
        let th = (1.2f64 / 0.7).ln();
        let expected = 2000f64.ln() + 2.0 * 2f64.ln() - 1000.0 * th * 0.25;
        assert!((b.log_bound - expected).abs() < 1e-10);
        assert!((b.log_bound - (-125.761_928_362_509_78)).abs() < 1e-9);
        assert!(!b.vacuous);
    }

    #[test]
    fn derivation_bound_vacuity() {
        for eps in [0.1, 0.5, 0.9] {
            let b = failure_prob_bound(100, &params(0.0, 0.2, eps, 0.05, 2, 10), BoundVariant::Derivation).unwrap();
            assert!(b.vacuous, "eps = {eps}");
        }
        let p = params(0.5, 0.1, 0.5, 0.05, 2, 10);
        let b = failure_prob_bound(100, &p, BoundVariant::Derivation).unwrap();
        assert!(!b.vacuous);
        assert!((b.rate - p.theta() * 0.25).abs() < 1e-15);
    }

    #[test]
    fn sample_complexity_frozen_values() {
        // High-precision evaluations of the n0 formula.
        let cases = [
            (1, 2, 127.373_331_172_935_18),
            (2, 4, 257.301_754_372_818_8),
            (2, 10, 314.701_583_308_191_6),
            (4, 10, 610.247_611_461_624),
        ];
        for (dh, l, n0) in cases {
            let sc = sample_complexity(&params(0.5, 0.1, 0.5, 0.05, dh, l)).unwrap();
            assert!((sc.n0 - n0).abs() < 1e-9, "dh={dh} L={l}: {}", sc.n0);
            assert_eq!(sc.effective_n0, sc.n0);
        }
    }

    #[test]
    fn vacuous_regime_is_an_error() {
        let err = sample_complexity(&params(0.2, 0.1, 0.5, 0.05, 2, 10)).unwrap_err();
        assert!(matches!(err, Error::Vacuous { .. }));
    }

    #[test]
    fn floor_applies_for_small_n0() {
        let sc = sample_complexity(&params(0.9, 0.0, 0.9, 0.9, 1, 1)).unwrap();
        assert!(sc.floor > sc.n0);
        assert_eq!(sc.effective_n0, sc.floor);
    }

    #[test]
    fn params_validation() {
        assert!(BoundParams::new(0.6, 0.4, 0.5, 0.05, 1, 2).is_err());
        assert!(BoundParams::new(0.1, 0.1, 0.0, 0.05, 1, 2).is_err());
        assert!(BoundParams::new(0.1, 0.1, 0.5, 0.05, 0, 2).is_err());
        assert!(failure_prob_bound(0, &params(0.5, 0.1, 0.5, 0.05, 1, 2), BoundVariant::Statement).is_err());
    }
}
