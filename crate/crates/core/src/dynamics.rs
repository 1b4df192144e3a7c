//! Accuracy dynamics under incomplete supervision.
//!
//! A learner of accuracy `ρ_t` labels the unlabelled pool; its labels have
//! `Δ = 1 − ρ_t` and, with errors spread uniformly over the `c − 1` wrong
//! labels, `γ = (c − k − ρ_t)/(c − 1)`. The next learner reaches
//! `ρ_{t+1} = ρ(Δ, γ)`. The recurrence is iterated with equality, so a
//! trajectory is the conservative lower-bound dynamics, and its limit solves
//! `x = ρ(1 − x, (c − k − x)/(c − 1))`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A nonincreasing map `ρ(Δ, γ)` from `[0, 1]²` to `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum AccuracyFunction {
    Constant { value: f64 },
    /// `a0 − a_delta·Δ − a_gamma·γ`.
    Linear { a0: f64, a_delta: f64, a_gamma: f64 },
    /// `1/(1 + exp(−(a0 − a_delta·Δ − a_gamma·γ)))`.
    Logistic { a0: f64, a_delta: f64, a_gamma: f64 },
    /// Bilinear interpolation of `values[i·n + j] = ρ(i/(n−1), j/(n−1))`.
    Table { n: usize, values: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Constant,
    Linear,
    Logistic,
    Table,
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "constant" => Ok(Family::Constant),
            "linear" => Ok(Family::Linear),
            "logistic" => Ok(Family::Logistic),
            "table" => Ok(Family::Table),
            other => Err(Error::param(format!("unknown accuracy family '{other}'"))),
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::Constant => "constant",
            Family::Linear => "linear",
            Family::Logistic => "logistic",
            Family::Table => "table",
        })
    }
}

const MONOTONE_GRID: usize = 65;
const MONOTONE_SLACK: f64 = 1e-12;

impl AccuracyFunction {
    pub fn constant(value: f64) -> Result<Self> {
        Self::Constant { value }.validated()
    }

    pub fn linear(a0: f64, a_delta: f64, a_gamma: f64) -> Result<Self> {
        Self::Linear { a0, a_delta, a_gamma }.validated()
    }

    pub fn logistic(a0: f64, a_delta: f64, a_gamma: f64) -> Result<Self> {
        Self::Logistic { a0, a_delta, a_gamma }.validated()
    }

    pub fn table(n: usize, values: Vec<f64>) -> Result<Self> {
        if n < 2 || values.len() != n * n {
            return Err(Error::param(format!(
                "table needs an n x n grid with n >= 2, got {} values for n = {n}",
                values.len()
            )));
        }
        Self::Table { n, values }.validated()
    }

    /// Sample `f` on an `n × n` grid.
    pub fn tabulate(n: usize, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let h = 1.0 / (n.max(2) - 1) as f64;
        let values = (0..n * n).map(|ij| f((ij / n) as f64 * h, (ij % n) as f64 * h)).collect();
        Self::table(n, values)
    }

    /// Build from a family name and a flat parameter list, as given on the
    /// command line. A table's parameters are its `n²` grid values.
    pub fn from_params(family: Family, params: &[f64]) -> Result<Self> {
        let want = |count: usize| {
            if params.len() == count {
                Ok(())
            } else {
                Err(Error::param(format!(
                    "{family} family takes {count} parameters, got {}",
                    params.len()
                )))
            }
        };
        match family {
            Family::Constant => {
                want(1)?;
                Self::constant(params[0])
            }
            Family::Linear => {
                want(3)?;
                Self::linear(params[0], params[1], params[2])
            }
            Family::Logistic => {
                want(3)?;
                Self::logistic(params[0], params[1], params[2])
            }
            Family::Table => {
                let n = (params.len() as f64).sqrt().round() as usize;
                Self::table(n, params.to_vec())
            }
        }
    }

    pub fn family(&self) -> Family {
        match self {
            Self::Constant { .. } => Family::Constant,
            Self::Linear { .. } => Family::Linear,
            Self::Logistic { .. } => Family::Logistic,
            Self::Table { .. } => Family::Table,
        }
    }

    fn validated(self) -> Result<Self> {
        let finite = match &self {
            Self::Constant { value } => value.is_finite(),
            Self::Linear { a0, a_delta, a_gamma } | Self::Logistic { a0, a_delta, a_gamma } => {
                [a0, a_delta, a_gamma].iter().all(|v| v.is_finite())
            }
            Self::Table { values, .. } => values.iter().all(|v| v.is_finite()),
        };
        if !finite {
            return Err(Error::param("accuracy function parameters must be finite"));
        }
        let h = 1.0 / (MONOTONE_GRID - 1) as f64;
        for i in 0..MONOTONE_GRID {
            for j in 0..MONOTONE_GRID {
                let (d, g) = (i as f64 * h, j as f64 * h);
                let here = self.eval(d, g);
                let increases = (i + 1 < MONOTONE_GRID && self.eval(d + h, g) > here + MONOTONE_SLACK)
                    || (j + 1 < MONOTONE_GRID && self.eval(d, g + h) > here + MONOTONE_SLACK);
                if increases {
                    return Err(Error::param(format!(
                        "accuracy function must be nonincreasing in delta and gamma; it increases near ({d:.3}, {g:.3})"
                    )));
                }
            }
        }
        Ok(self)
    }

    /// `ρ(Δ, γ)`, with both arguments and the result clamped to `[0, 1]`.
    pub fn eval(&self, delta: f64, gamma: f64) -> f64 {
        let (d, g) = (delta.clamp(0.0, 1.0), gamma.clamp(0.0, 1.0));
        let v = match self {
            Self::Constant { value } => *value,
            Self::Linear { a0, a_delta, a_gamma } => a0 - a_delta * d - a_gamma * g,
            Self::Logistic { a0, a_delta, a_gamma } => 1.0 / (1.0 + (-(a0 - a_delta * d - a_gamma * g)).exp()),
            Self::Table { n, values } => bilinear(*n, values, d, g),
        };
        v.clamp(0.0, 1.0)
    }
}

fn bilinear(n: usize, values: &[f64], d: f64, g: f64) -> f64 {
    let scale = (n - 1) as f64;
    let (x, y) = (d * scale, g * scale);
    let i = (x.floor() as usize).min(n - 2);
    let j = (y.floor() as usize).min(n - 2);
    let (tx, ty) = (x - i as f64, y - j as f64);
    let at = |a: usize, b: usize| values[a * n + b];
    (1.0 - tx) * ((1.0 - ty) * at(i, j) + ty * at(i, j + 1)) + tx * ((1.0 - ty) * at(i + 1, j) + ty * at(i + 1, j + 1))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DynamicsConfig {
    pub c: usize,
    pub k: usize,
    pub rho0: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl DynamicsConfig {
    pub const DEFAULT_TOL: f64 = 1e-10;
    pub const DEFAULT_MAX_ITER: usize = 1000;

    pub fn new(c: usize, k: usize, rho0: f64) -> Result<Self> {
        let cfg = Self {
            c,
            k,
            rho0,
            tol: Self::DEFAULT_TOL,
            max_iter: Self::DEFAULT_MAX_ITER,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.c < 2 || self.k == 0 || self.k >= self.c {
            return Err(Error::param(format!("need 1 <= k <= c - 1, got c = {}, k = {}", self.c, self.k)));
        }
        if !(0.0..=1.0).contains(&self.rho0) {
            return Err(Error::param(format!("rho0 must lie in [0, 1], got {}", self.rho0)));
        }
        if !(self.tol > 0.0) || self.max_iter == 0 {
            return Err(Error::param("tol must be positive and max_iter at least 1"));
        }
        Ok(())
    }

    /// The γ produced by a learner of accuracy `rho`, clamped to `[0, 1]`.
    pub fn gamma_of(&self, rho: f64) -> f64 {
        ((self.c - self.k) as f64 - rho) / (self.c - 1) as f64
    }

    /// One step of the recurrence.
    pub fn step(&self, rho: &AccuracyFunction, x: f64) -> f64 {
        rho.eval(1.0 - x, self.gamma_of(x).clamp(0.0, 1.0))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    /// `ρ_0, ρ_1, …`
    pub rho: Vec<f64>,
    pub converged: bool,
    /// Step at which half-step damping took over, if it did.
    pub damped_from: Option<usize>,
}

impl Trajectory {
    pub fn last(&self) -> f64 {
        *self.rho.last().expect("trajectory holds rho0")
    }

    pub fn iterations(&self) -> usize {
        self.rho.len() - 1
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,rho_t\n");
        for (t, r) in self.rho.iter().enumerate() {
            out.push_str(&format!("{t},{r}\n"));
        }
        out
    }
}

/// Oscillating steps that fail to shrink before damping engages.
pub const DAMPING_PATIENCE: usize = 50;

/// Iterate from `ρ_0` until successive values differ by less than `tol` or
/// `max_iter` steps are taken.
pub fn iterate(rho: &AccuracyFunction, cfg: &DynamicsConfig) -> Result<Trajectory> {
    cfg.validate()?;
    Ok(iterate_map(|x| cfg.step(rho, x), cfg.rho0, cfg.tol, cfg.max_iter))
}

// With a nonincreasing ρ the one-step map is nondecreasing in x, so iterates
// are monotone and damping only matters for maps built outside that family.
fn iterate_map(g: impl Fn(f64) -> f64, x0: f64, tol: f64, max_iter: usize) -> Trajectory {
    let mut xs = vec![x0];
    let mut damped_from = None;
    let mut bad_swings = 0usize;
    let mut prev_step = 0.0f64;
    for t in 0..max_iter {
        let x = xs[t];
        let full = g(x);
        let next = if damped_from.is_some() { 0.5 * (x + full) } else { full };
        let step = next - x;
        xs.push(next);
        if step.abs() < tol {
            return Trajectory {
                rho: xs,
                converged: true,
                damped_from,
            };
        }
        if damped_from.is_none() && step * prev_step < 0.0 && step.abs() >= prev_step.abs() {
            bad_swings += 1;
            if bad_swings >= DAMPING_PATIENCE {
                log::warn!("iteration oscillates without contracting; switching to half steps at t = {}", t + 1);
                damped_from = Some(t + 1);
            }
        }
        prev_step = step;
    }
    Trajectory {
        rho: xs,
        converged: false,
        damped_from,
    }
}

/// `max |ρ(p) − ρ(q)| / ‖p − q‖₁` over axis-adjacent points of a
/// `resolution × resolution` grid on `[0, 1]²`.
pub fn lipschitz_estimate(rho: &AccuracyFunction, resolution: usize) -> Result<f64> {
    if resolution < 2 {
        return Err(Error::param("grid resolution must be at least 2"));
    }
    let h = 1.0 / (resolution - 1) as f64;
    let at = |i: usize, j: usize| rho.eval(i as f64 * h, j as f64 * h);
    let mut k_l = 0.0f64;
    for i in 0..resolution {
        for j in 0..resolution {
            let here = at(i, j);
            if i + 1 < resolution {
                k_l = k_l.max((at(i + 1, j) - here).abs() / h);
            }
            if j + 1 < resolution {
                k_l = k_l.max((at(i, j + 1) - here).abs() / h);
            }
        }
    }
    Ok(k_l)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Contraction {
    pub k_l: f64,
    /// `1 − 1/c`.
    pub threshold: f64,
    pub certified: bool,
    /// `(1 + 1/(c − 1))·k_L`, the Lipschitz factor of the one-step map.
    pub composite_factor: f64,
}

impl Contraction {
    pub fn assess(k_l: f64, c: usize) -> Self {
        let cf = c as f64;
        let threshold = 1.0 - 1.0 / cf;
        Self {
            k_l,
            threshold,
            certified: k_l < threshold,
            composite_factor: (1.0 + 1.0 / (cf - 1.0)) * k_l,
        }
    }
}

pub const LIPSCHITZ_RESOLUTION: usize = 201;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixedPoint {
    pub rho_final: f64,
    pub iterations: usize,
    /// `|x − ρ(1 − x, γ(x))|` at the returned point.
    pub residual: f64,
    pub contraction: Contraction,
    pub damped: bool,
}

/// Solve the fixed-point equation by iteration from `ρ_0`.
pub fn fixed_point(rho: &AccuracyFunction, cfg: &DynamicsConfig) -> Result<(FixedPoint, Trajectory)> {
    let traj = iterate(rho, cfg)?;
    let contraction = Contraction::assess(lipschitz_estimate(rho, LIPSCHITZ_RESOLUTION)?, cfg.c);
    if !contraction.certified {
        log::warn!(
            "k_L = {} is not below 1 - 1/c = {}; the fixed point may not be unique",
            contraction.k_l,
            contraction.threshold
        );
    }
    if !traj.converged {
        return Err(Error::NonConvergence {
            iterations: traj.iterations(),
            last: traj.last(),
        });
    }
    let x = traj.last();
    Ok((
        FixedPoint {
            rho_final: x,
            iterations: traj.iterations(),
            residual: (x - cfg.step(rho, x)).abs(),
            contraction,
            damped: traj.damped_from.is_some(),
        },
        traj,
    ))
}
