//! Unreliable partial-label data: candidate sets with a partial rate η and
//! an unreliable rate μ, and their uniform soft labels.
//!
//! Each example keeps its true label with probability `1 − μ` and each wrong
//! label independently with probability η. An empty set is redrawn (wrong
//! labels only, truth inclusion kept), which is sampled exactly rather than by
//! rejection. The redraw lifts wrong-label inclusion above η when μ is large
//! and `(1 − η)^(c−1)` is not small; [`expected_gamma`] gives the exact rate.

use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::indicators::{estimate_delta, estimate_gamma};
use crate::label::{LabeledExample, Semantics, SoftDataset, SoftLabel};
use crate::rng::{chunks, RandomSeed};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateExample {
    pub id: String,
    #[serde(rename = "y")]
    pub true_label: usize,
    /// Sorted, nonempty.
    #[serde(rename = "s")]
    pub candidates: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PllSpec {
    /// Partial rate η: inclusion probability of each wrong label.
    pub eta: f64,
    /// Unreliable rate μ: probability that the truth is left out.
    pub mu: f64,
    pub c: usize,
}

/// Deviation of [`expected_gamma`] from η beyond which a spec is reported as
/// dominated by the empty-set redraw.
pub const REDRAW_FLAG_TOLERANCE: f64 = 0.01;

impl PllSpec {
    pub fn new(eta: f64, mu: f64, c: usize) -> Result<Self> {
        let s = Self { eta, mu, c };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.c < 2 {
            return Err(Error::param(format!("need c >= 2 classes, got {}", self.c)));
        }
        for (name, v) in [("eta", self.eta), ("mu", self.mu)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::param(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        if self.eta == 0.0 && self.mu == 1.0 {
            return Err(Error::param("degenerate spec: eta = 0 and mu = 1 leave every candidate set empty"));
        }
        Ok(())
    }

    /// Probability that no wrong label is drawn.
    fn p_no_wrong(&self) -> f64 {
        (1.0 - self.eta).powi((self.c - 1) as i32)
    }

    /// Exact `Pr(i ∈ s | y ≠ i)` under the redraw rule.
    pub fn expected_gamma(&self) -> f64 {
        expected_gamma(self.eta, self.mu, self.c)
    }

    pub fn redraw_flagged(&self) -> bool {
        (self.expected_gamma() - self.eta).abs() > REDRAW_FLAG_TOLERANCE
    }
}

/// Exact wrong-label inclusion rate: `(1 − μ)η + μ·η/(1 − (1 − η)^(c−1))`,
/// which is `μ/(c − 1)` at η = 0.
pub fn expected_gamma(eta: f64, mu: f64, c: usize) -> f64 {
    let m = (c - 1) as f64;
    let conditional = if eta == 0.0 {
        1.0 / m
    } else {
        eta / -(m * (-eta).ln_1p()).exp_m1()
    };
    (1.0 - mu) * eta + mu * conditional
}

/// Smallest η whose [`expected_gamma`] equals `target`, by bisection.
pub fn calibrate_eta(mu: f64, target: f64, c: usize) -> Result<f64> {
    PllSpec::new(0.5, mu, c)?;
    let lo_gamma = expected_gamma(0.0, mu, c);
    if !(target >= lo_gamma && target <= 1.0) {
        return Err(Error::param(format!(
            "gamma target {target} unreachable: the redraw rule gives at least {lo_gamma} at mu = {mu}"
        )));
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if expected_gamma(mid, mu, c) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    Ok(hi)
}

fn sample_candidates<R: Rng>(y: usize, spec: &PllSpec, rng: &mut R) -> Vec<usize> {
    let keep_truth = rng.random::<f64>() >= spec.mu;
    let wrong: Vec<usize> = (0..spec.c).filter(|&i| i != y).collect();
    let mut set = Vec::with_capacity(spec.c);
    if keep_truth {
        set.push(y);
        set.extend(wrong.iter().copied().filter(|_| rng.random::<f64>() < spec.eta));
    } else if spec.eta == 0.0 {
        set.push(wrong[rng.random_range(0..wrong.len())]);
    } else {
        // First included wrong label given at least one: truncated geometric.
        let m = wrong.len();
        let u: f64 = rng.random();
        let mass = 1.0 - spec.p_no_wrong();
        let first = if spec.eta == 1.0 {
            0
        } else {
            (((-u * mass).ln_1p() / (-spec.eta).ln_1p()).floor() as usize).min(m - 1)
        };
        set.push(wrong[first]);
        set.extend(wrong[first + 1..].iter().copied().filter(|_| rng.random::<f64>() < spec.eta));
    }
    set.sort_unstable();
    set
}

const GEN_CHUNK: usize = 4096;

pub fn generate_candidates(true_labels: &[usize], spec: &PllSpec, seed: RandomSeed) -> Result<Vec<CandidateExample>> {
    spec.validate()?;
    if let Some(bad) = true_labels.iter().find(|&&y| y >= spec.c) {
        return Err(Error::param(format!("true label {bad} out of range for c = {}", spec.c)));
    }
    let work: Vec<_> = chunks(true_labels.len(), GEN_CHUNK).collect();
    Ok(work
        .into_par_iter()
        .flat_map_iter(|(idx, start, end)| {
            let mut rng = seed.child(idx).rng();
            (start..end)
                .map(|i| CandidateExample {
                    id: i.to_string(),
                    true_label: true_labels[i],
                    candidates: sample_candidates(true_labels[i], spec, &mut rng),
                })
                .collect::<Vec<_>>()
        })
        .collect())
}

/// Uniform mass over the candidates.
pub fn candidates_to_soft(ex: &CandidateExample, c: usize) -> Result<LabeledExample<f64>> {
    Ok(LabeledExample {
        id: ex.id.clone(),
        true_label: ex.true_label,
        soft: SoftLabel::uniform_over(c, &ex.candidates)?,
    })
}

pub fn candidates_dataset(examples: &[CandidateExample], c: usize) -> Result<SoftDataset<f64>> {
    let rows = examples
        .iter()
        .map(|e| candidates_to_soft(e, c))
        .collect::<Result<Vec<_>>>()?;
    SoftDataset::new(c, rows)
}

/// Candidate-set JSONL with a `{"c": N}` header.
pub fn write_candidates_jsonl<W: Write>(examples: &[CandidateExample], c: usize, w: &mut W) -> std::io::Result<()> {
    writeln!(w, "{{\"c\":{c}}}")?;
    for ex in examples {
        serde_json::to_writer(&mut *w, ex)?;
        writeln!(w)?;
    }
    Ok(())
}

/// Uniformly random true labels.
pub fn uniform_labels(n: usize, c: usize, seed: RandomSeed) -> Vec<usize> {
    let work: Vec<_> = chunks(n, GEN_CHUNK).collect();
    work.into_par_iter()
        .flat_map_iter(|(idx, start, end)| {
            let mut rng = seed.child(idx).rng();
            (start..end).map(|_| rng.random_range(0..c)).collect::<Vec<_>>()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateReport {
    pub spec: PllSpec,
    pub n: usize,
    pub delta_hat: f64,
    pub gamma_hat: f64,
    pub delta_stderr: f64,
    pub gamma_stderr: f64,
    /// `(Δ̂ − μ)/SE`.
    pub delta_z: f64,
    /// `(γ̂ − η)/SE`.
    pub gamma_z: f64,
    pub expected_gamma: f64,
    pub per_label_cooccurrence: Vec<Option<f64>>,
    /// Wrong-label inclusion visibly exceeds η because of empty-set redraws.
    pub redraw_flagged: bool,
}

/// Generate `n` uniformly labelled examples, convert to soft labels and
/// compare support-set indicators with `(μ, η)`.
pub fn verify_rates(spec: &PllSpec, n: usize, seed: RandomSeed) -> Result<RateReport> {
    spec.validate()?;
    if n == 0 {
        return Err(Error::param("verification needs n >= 1"));
    }
    let labels = uniform_labels(n, spec.c, seed.fork("labels"));
    let cands = generate_candidates(&labels, spec, seed.fork("candidates"))?;
    let ds = candidates_dataset(&cands, spec.c)?;
    let delta_hat = estimate_delta(&ds, Semantics::Support)?;
    let g = estimate_gamma(&ds, Semantics::Support)?;
    let nf = n as f64;
    let delta_stderr = (spec.mu * (1.0 - spec.mu) / nf).sqrt();
    let others = nf * (spec.c - 1) as f64 / spec.c as f64;
    let gamma_stderr = (spec.eta * (1.0 - spec.eta) / others).sqrt();
    let z = |dev: f64, se: f64| if se > 0.0 { dev / se } else if dev == 0.0 { 0.0 } else { f64::INFINITY };
    let report = RateReport {
        spec: *spec,
        n,
        delta_hat,
        gamma_hat: g.gamma,
        delta_stderr,
        gamma_stderr,
        delta_z: z(delta_hat - spec.mu, delta_stderr),
        gamma_z: z(g.gamma - spec.eta, gamma_stderr),
        expected_gamma: spec.expected_gamma(),
        per_label_cooccurrence: g.per_label,
        redraw_flagged: spec.redraw_flagged(),
    };
    if report.redraw_flagged {
        log::warn!(
            "eta = {}, mu = {}: empty-set redraws lift wrong-label inclusion to {:.4}",
            spec.eta,
            spec.mu,
            report.expected_gamma
        );
    }
    Ok(report)
}
