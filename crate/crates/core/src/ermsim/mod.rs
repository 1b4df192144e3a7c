//! Exhaustive ERM on finite hypothesis classes fed with soft labels, and
//! failure-rate measurement against the sample-complexity bounds.

mod class;
mod erm;
mod natarajan;

pub use class::{uniform_pool, ClassKind, HypothesisClass, MAX_CLASS_SIZE, MAX_POOL_SIZE};
pub use erm::{erm, erm_with_costs, true_error, CostTable, ErmResult};
pub use natarajan::{find_shattered, is_shattered, natarajan_dimension, NatarajanResult, Witness, MAX_SHATTER_CAP};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{failure_prob_bound, sample_complexity, BoundParams, BoundVariant};
use crate::error::{Error, Result};
use crate::label::{Semantics, SoftDataset};
use crate::noise::{delta_additive_noise, gamma_additive_noise, make_noisy_dataset, DeltaMethod, NoiseModel};
use crate::pll::{candidates_dataset, generate_candidates, PllSpec};
use crate::rng::RandomSeed;
use crate::teacher::{corrupt_with_plan, CorruptionPlan};

/// How training soft labels are produced from the target's labels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mechanism", rename_all = "snake_case")]
pub enum LabelMechanism {
    /// Top-k templates with a prescribed Δ and γ (symmetric when `gamma` is absent).
    Corruptor { k: usize, delta: f64, gamma: Option<f64> },
    /// Candidate sets read under support semantics.
    Pll { eta: f64, mu: f64 },
    /// One-hot plus additive noise, read as top-k.
    Noise { model: NoiseModel<f64>, k: usize },
}

impl LabelMechanism {
    /// One-hot labels.
    pub fn clean() -> Self {
        LabelMechanism::Corruptor {
            k: 1,
            delta: 0.0,
            gamma: None,
        }
    }

    pub fn semantics(&self) -> Semantics {
        match *self {
            LabelMechanism::Corruptor { k, .. } | LabelMechanism::Noise { k, .. } => Semantics::TopK(k),
            LabelMechanism::Pll { .. } => Semantics::Support,
        }
    }

    /// Population `(Δ, γ)` of the mechanism.
    pub fn indicators(&self, c: usize) -> Result<(f64, f64)> {
        match *self {
            LabelMechanism::Corruptor { k, delta, gamma } => {
                let plan = CorruptionPlan::new(c, k, delta, gamma)?;
                Ok((plan.delta, plan.gamma))
            }
            LabelMechanism::Pll { eta, mu } => {
                let spec = PllSpec::new(eta, mu, c)?;
                Ok((mu, spec.expected_gamma()))
            }
            LabelMechanism::Noise { model, k } => {
                let d = delta_additive_noise(&model, c, k, DeltaMethod::quadrature())?.delta;
                Ok((d, gamma_additive_noise(d, c, k)?))
            }
        }
    }

    pub fn generate(&self, true_labels: &[usize], c: usize, seed: RandomSeed) -> Result<SoftDataset<f64>> {
        match *self {
            LabelMechanism::Corruptor { k, delta, gamma } => {
                corrupt_with_plan(true_labels, &CorruptionPlan::new(c, k, delta, gamma)?, seed)
            }
            LabelMechanism::Pll { eta, mu } => {
                let spec = PllSpec::new(eta, mu, c)?;
                candidates_dataset(&generate_candidates(true_labels, &spec, seed)?, c)
            }
            LabelMechanism::Noise { model, k } => {
                if k == 0 || k > c {
                    return Err(Error::param(format!("need 1 <= k <= c, got k = {k}")));
                }
                make_noisy_dataset(true_labels, &model, c, seed)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentSpec {
    pub class: HypothesisClass,
    /// Index of the ground-truth hypothesis.
    pub target: usize,
    pub mechanism: LabelMechanism,
    pub n: usize,
    pub eps: f64,
    /// Failure probability δ used for `n₀`.
    pub conf: f64,
    pub trials: usize,
    pub seed: RandomSeed,
    /// Pool distribution; uniform when `None`.
    pub pool_weights: Option<Vec<f64>>,
    /// Natarajan dimension; computed by exhaustive search when `None`.
    pub dh: Option<usize>,
    /// Label-cardinality constant; the class count when `None`.
    pub labels: Option<u32>,
}

impl ExperimentSpec {
    pub fn new(class: HypothesisClass, target: usize, mechanism: LabelMechanism, n: usize) -> Self {
        Self {
            class,
            target,
            mechanism,
            n,
            eps: 0.5,
            conf: 0.05,
            trials: 200,
            seed: RandomSeed::new(0),
            pool_weights: None,
            dh: None,
            labels: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.target >= self.class.len() {
            return Err(Error::param(format!(
                "target {} is not in the class of {} hypotheses",
                self.target,
                self.class.len()
            )));
        }
        if !(self.eps > 0.0 && self.eps < 1.0) || !(self.conf > 0.0 && self.conf < 1.0) {
            return Err(Error::param("eps and conf must lie in (0, 1)"));
        }
        if self.trials == 0 {
            return Err(Error::param("need at least one trial"));
        }
        if let Some(w) = &self.pool_weights {
            if w.len() != self.class.pool_size() {
                return Err(Error::param(format!(
                    "{} pool weights for a pool of {}",
                    w.len(),
                    self.class.pool_size()
                )));
            }
            if w.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) || (w.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return Err(Error::param("pool weights must be nonnegative and sum to 1"));
            }
        }
        Ok(())
    }

    /// The same experiment at another sample size.
    pub fn with_n(&self, n: usize) -> Self {
        Self { n, ..self.clone() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub n: usize,
    pub trials: usize,
    /// Trials whose learned hypothesis had true error ≥ ε.
    pub failures: usize,
    pub failure_rate: f64,
    /// Binomial standard error of `failure_rate`.
    pub stderr: f64,
    pub mean_error: f64,
    pub delta: f64,
    pub gamma: f64,
    /// Whether `Δ + γ < 1`.
    pub consistent: bool,
    pub dh: usize,
    pub labels: u32,
    /// `None` when the bound is vacuous.
    pub n0: Option<f64>,
    pub effective_n0: Option<f64>,
    pub bound_statement: Option<f64>,
    pub bound_derivation: Option<f64>,
    pub errors: Vec<f64>,
}

pub const SWEEP_CSV_HEADER: &str = "n,failure_rate,n0,bound_statement,bound_derivation";

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| x.to_string())
}

impl ExperimentReport {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.n,
            self.failure_rate,
            opt(self.effective_n0),
            opt(self.bound_statement),
            opt(self.bound_derivation)
        )
    }
}

pub fn sweep_csv(reports: &[ExperimentReport]) -> String {
    let mut s = String::from(SWEEP_CSV_HEADER);
    s.push('\n');
    for r in reports {
        s.push_str(&r.csv_row());
        s.push('\n');
    }
    s
}

/// Natarajan dimension with the largest allowed cap.
pub fn class_dimension(class: &HypothesisClass) -> Result<NatarajanResult> {
    natarajan_dimension(class, MAX_SHATTER_CAP)
}

/// Error of the ERM hypothesis in one trial.
fn run_trial(spec: &ExperimentSpec, sampler: Option<&WeightedIndex<f64>>, semantics: Semantics, t: u64) -> Result<f64> {
    let seed = spec.seed.child(t);
    let mut rng = seed.fork("points").rng();
    let m = spec.class.pool_size();
    let points: Vec<usize> = (0..spec.n)
        .map(|_| match sampler {
            Some(w) => w.sample(&mut rng),
            None => rng.random_range(0..m),
        })
        .collect();
    let ys: Vec<usize> = points.iter().map(|&x| spec.class.label(spec.target, x)).collect();
    let soft = spec
        .mechanism
        .generate(&ys, spec.class.num_classes(), seed.fork("labels"))?;
    let h = erm(&spec.class, &points, &soft, semantics)?.hypothesis;
    Ok(true_error(&spec.class, h, spec.target, spec.pool_weights.as_deref()))
}

/// Runs `trials` independent draws of `n` pool points, labels them with the
/// mechanism, runs ERM, and measures `Pr(Err ≥ ε)`.
pub fn learnability_experiment(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    spec.validate()?;
    let c = spec.class.num_classes();
    let (delta, gamma) = spec.mechanism.indicators(c)?;
    let consistent = delta + gamma < 1.0;
    if !consistent {
        log::warn!("delta + gamma = {} >= 1: outside the learnable region", delta + gamma);
    }
    let dh = match spec.dh {
        Some(d) => d,
        None => class_dimension(&spec.class)?.dimension,
    };
    let labels = spec.labels.unwrap_or(c as u32);
    let sampler = spec
        .pool_weights
        .as_ref()
        .map(|w| WeightedIndex::new(w.iter().copied()))
        .transpose()
        .map_err(|e| Error::param(format!("pool weights: {e}")))?;
    let semantics = spec.mechanism.semantics();
    let errors = (0..spec.trials as u64)
        .into_par_iter()
        .map(|t| run_trial(spec, sampler.as_ref(), semantics, t))
        .collect::<Result<Vec<f64>>>()?;

    let failures = errors.iter().filter(|&&e| e >= spec.eps).count();
    let trials = errors.len();
    let failure_rate = failures as f64 / trials as f64;
    let mean_error = errors.iter().fold(0.0, |a, b| a + b) / trials as f64;

    let params = BoundParams::new(delta, gamma, spec.eps, spec.conf, dh as u32, labels).ok();
    let (n0, effective_n0) = match params.as_ref().map(sample_complexity) {
        Some(Ok(sc)) => (Some(sc.n0), Some(sc.effective_n0)),
        _ => (None, None),
    };
    let bound = |variant| {
        let p = params.as_ref()?;
        let b = failure_prob_bound(spec.n as u64, p, variant).ok()?;
        (!b.vacuous).then(|| b.probability())
    };
    Ok(ExperimentReport {
        n: spec.n,
        trials,
        failures,
        failure_rate,
        stderr: (failure_rate * (1.0 - failure_rate) / trials as f64).sqrt(),
        mean_error,
        delta,
        gamma,
        consistent,
        dh,
        labels,
        n0,
        effective_n0,
        bound_statement: bound(BoundVariant::Statement),
        bound_derivation: bound(BoundVariant::Derivation),
        errors,
    })
}

/// One experiment per sample size, sharing the seed and the Natarajan dimension.
pub fn learnability_sweep(spec: &ExperimentSpec, ns: &[usize]) -> Result<Vec<ExperimentReport>> {
    let mut spec = spec.clone();
    if spec.dh.is_none() {
        spec.dh = Some(class_dimension(&spec.class)?.dimension);
    }
    ns.iter().map(|&n| learnability_experiment(&spec.with_n(n))).collect()
}

/// Whether failure rates never rise by more than `z` pooled standard errors
/// from one sample size to the next.
pub fn failure_rates_monotone(reports: &[ExperimentReport], z: f64) -> bool {
    reports.windows(2).all(|w| {
        let (a, b) = (&w[0], &w[1]);
        let pooled = (a.failures + b.failures) as f64 / (a.trials + b.trials) as f64;
        let se = (pooled * (1.0 - pooled) * (1.0 / a.trials as f64 + 1.0 / b.trials as f64)).sqrt();
        b.failure_rate <= a.failure_rate + z * se
    })
}
