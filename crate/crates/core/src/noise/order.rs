//! Order statistics of i.i.d. continuous draws.
//!
//! The `i`-th smallest of `n` draws is below `x` exactly when at least `i`
//! draws are, so `F₍ᵢ₎(x) = Pr(Bin(n, F(x)) ≥ i)`. Both binomial tails are
//! summed in the log domain from `log F` and `log(1 − F)`.

use serde::{Deserialize, Serialize};

use super::NoiseModel;
use crate::error::{Error, Result};
use crate::scalar::{ln_binomial, log_sum_exp, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrderSpec<T> {
    pub base: NoiseModel<T>,
    pub n: usize,
    /// Rank, 1 = smallest.
    pub i: usize,
}

impl<T: Scalar> OrderSpec<T> {
    pub fn new(base: NoiseModel<T>, n: usize, i: usize) -> Result<Self> {
        if i == 0 || i > n {
            return Err(Error::param(format!("order rank i = {i} must lie in 1..={n}")));
        }
        Ok(Self { base, n, i })
    }
}

/// `Pr(Bin(n, p) ≥ i)` from `ln p` and `ln(1 − p)`.
pub fn binomial_upper_tail<T: Scalar>(n: usize, i: usize, ln_p: T, ln_q: T) -> T {
    if i == 0 {
        return T::one();
    }
    if i > n {
        return T::zero();
    }
    let terms: Vec<T> = (i..=n).map(|j| binomial_log_term(n, j, ln_p, ln_q)).collect();
    log_sum_exp(&terms).exp().min(T::one())
}

/// `Pr(Bin(n, p) < i)` from `ln p` and `ln(1 − p)`.
pub fn binomial_lower_tail<T: Scalar>(n: usize, i: usize, ln_p: T, ln_q: T) -> T {
    if i == 0 {
        return T::zero();
    }
    if i > n {
        return T::one();
    }
    let terms: Vec<T> = (0..i).map(|j| binomial_log_term(n, j, ln_p, ln_q)).collect();
    log_sum_exp(&terms).exp().min(T::one())
}

fn binomial_log_term<T: Scalar>(n: usize, j: usize, ln_p: T, ln_q: T) -> T {
    // 0 · ln 0 is 0 here: a zero exponent kills the factor regardless of p.
    let pow = |e: usize, l: T| if e == 0 { T::zero() } else { T::of_usize(e) * l };
    ln_binomial::<T>(n, j) + pow(j, ln_p) + pow(n - j, ln_q)
}

/// `F₍ᵢ₎(x)` for the `i`-th smallest of `n` draws from `spec.base`.
pub fn order_statistic_cdf<T: Scalar>(spec: &OrderSpec<T>, x: T) -> T {
    binomial_upper_tail(spec.n, spec.i, spec.base.ln_cdf(x), spec.base.ln_sf(x))
}

/// `1 − F₍ᵢ₎(x)`, accurate where `F₍ᵢ₎(x)` is close to one.
pub fn order_statistic_sf<T: Scalar>(spec: &OrderSpec<T>, x: T) -> T {
    binomial_lower_tail(spec.n, spec.i, spec.base.ln_cdf(x), spec.base.ln_sf(x))
}
