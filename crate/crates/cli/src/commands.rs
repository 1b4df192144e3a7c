use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::json;
use softlabel_core::bounds::{failure_prob_bound, sample_complexity, BoundParams};
use softlabel_core::dynamics::{fixed_point, AccuracyFunction, DynamicsConfig};
use softlabel_core::ermsim::{
    learnability_sweep, sweep_csv, ExperimentSpec, HypothesisClass, LabelMechanism,
};
use softlabel_core::indicators::analyze;
use softlabel_core::io::{load_dataset_with, save_dataset, DatasetFormat, LoadOptions};
use softlabel_core::noise::{
    delta_additive_noise, gamma_additive_noise, make_noisy_dataset, DeltaMethod, NoiseModel,
};
use softlabel_core::pll::{generate_candidates, uniform_labels, verify_rates, write_candidates_jsonl, PllSpec};
use softlabel_core::teacher::{
    compare_students, make_biased_soft_labels, make_blobs, train_tiny_teacher, BlobSpec, TeacherLossConfig,
    TrainOptions,
};
use softlabel_core::{Error, RandomSeed, Result, Semantics, SoftDataset};

use crate::args::*;

fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_owned(),
        source,
    }
}

fn usage(msg: impl Into<String>) -> Error {
    Error::Parameter(msg.into())
}

/// Writes `text` to `out`, or to stdout.
fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(io_error(path)),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(io_error(Path::new("<stdout>")))
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s
}

fn no_csv(name: &str) -> Error {
    usage(format!("{name} has no CSV output; use --format json"))
}

fn write_soft(ds: &SoftDataset<f64>, path: &Path) -> Result<()> {
    save_dataset(ds, path, DatasetFormat::from_path(path))
}

pub fn run(cfg: &RunConfig) -> Result<()> {
    let seed = RandomSeed::new(cfg.global.seed);
    let format = cfg.global.format;
    match &cfg.command {
        Command::Analyze(a) => analyze_cmd(a, format),
        Command::Bound(a) => bound_cmd(a, format),
        Command::Noise(a) => noise_cmd(a, format, seed),
        Command::Pll(a) => pll_cmd(a, format, seed),
        Command::Dynamics(a) => dynamics_cmd(a, format),
        Command::Teacher(a) => teacher_cmd(a, format, seed),
        Command::Simulate(a) => simulate_cmd(a, format, seed),
        Command::Repro(_) => Err(usage("a saved config cannot itself be a repro run")),
    }
}

fn analyze_cmd(a: &AnalyzeArgs, format: Option<OutputFormat>) -> Result<()> {
    let ds: SoftDataset<f64> = load_dataset_with(
        &a.input,
        DatasetFormat::from_path(&a.input),
        LoadOptions { normalize: a.normalize },
    )?;
    let semantics = if a.support { Semantics::Support } else { Semantics::TopK(a.k) };
    let report = analyze(&ds, semantics)?;
    let text = match format.unwrap_or(OutputFormat::Json) {
        OutputFormat::Json => to_json(&report),
        OutputFormat::Csv => report.to_csv(),
    };
    emit(&text, a.out.as_deref())
}

fn bound_cmd(a: &BoundArgs, format: Option<OutputFormat>) -> Result<()> {
    if format == Some(OutputFormat::Csv) {
        return Err(no_csv("bound"));
    }
    let p = BoundParams::new(a.delta, a.gamma, a.eps, a.conf, a.dh, a.labels)?;
    let sc = match (sample_complexity(&p), a.n) {
        (Ok(sc), _) => Some(sc),
        (Err(e @ Error::Vacuous { .. }), Some(_)) => {
            log::warn!("{e}");
            None
        }
        (Err(e), _) => return Err(e),
    };
    let n = match (a.n, &sc) {
        (Some(n), _) => n,
        (None, Some(sc)) => sc.n_required(),
        (None, None) => unreachable!("vacuous without --n returned above"),
    };
    let b = failure_prob_bound(n, &p, a.variant)?;
    let out = json!({
        "params": p,
        "theta": p.theta(),
        "n0": sc.map(|s| s.n0),
        "floor": sc.map(|s| s.floor),
        "effective_n0": sc.map(|s| s.effective_n0),
        "n_required": sc.map(|s| s.n_required()),
        "rate": sc.map(|s| s.rate),
        "bound": {
            "variant": b.variant,
            "n": b.n,
            "log_bound": b.log_bound,
            "probability": b.probability(),
            "rate": b.rate,
            "vacuous": b.vacuous,
        },
    });
    emit(&to_json(&out), None)
}

fn noise_cmd(a: &NoiseArgs, format: Option<OutputFormat>, seed: RandomSeed) -> Result<()> {
    if format == Some(OutputFormat::Csv) {
        return Err(no_csv("noise"));
    }
    let model = NoiseModel::new(a.kind, a.scale)?;
    let method = match a.method {
        NoiseMethod::Mc => DeltaMethod::monte_carlo(a.samples, seed.fork("delta")),
        NoiseMethod::Quad => DeltaMethod::quadrature(),
    };
    let est = delta_additive_noise(&model, a.c, a.k, method)?;
    let gamma = gamma_additive_noise(est.delta, a.c, a.k)?;
    if let (Some(path), Some(n)) = (&a.out, a.n) {
        let ys = uniform_labels(n, a.c, seed.fork("labels"));
        let ds = make_noisy_dataset(&ys, &model, a.c, seed.fork("noise"))?;
        write_soft(&ds, path)?;
    }
    let out = json!({
        "delta": est.delta,
        "gamma": gamma,
        "stderr": est.stderr,
        "error_estimate": est.error_estimate,
        "converged": est.converged,
        "note": est.note,
    });
    emit(&to_json(&out), None)
}

fn pll_cmd(a: &PllArgs, format: Option<OutputFormat>, seed: RandomSeed) -> Result<()> {
    if format == Some(OutputFormat::Csv) {
        return Err(no_csv("pll"));
    }
    let spec = PllSpec::new(a.eta, a.mu, a.c)?;
    match a.mode {
        PllMode::Verify => emit(&to_json(&verify_rates(&spec, a.n, seed)?), None),
        PllMode::Generate => {
            let ys = uniform_labels(a.n, a.c, seed.fork("labels"));
            let ex = generate_candidates(&ys, &spec, seed.fork("candidates"))?;
            match &a.out {
                Some(path) => {
                    let file = File::create(path).map_err(io_error(path))?;
                    let mut w = BufWriter::new(file);
                    write_candidates_jsonl(&ex, a.c, &mut w)
                        .and_then(|_| w.flush())
                        .map_err(io_error(path))?;
                    let summary = json!({
                        "n": ex.len(),
                        "eta": spec.eta,
                        "mu": spec.mu,
                        "expected_gamma": spec.expected_gamma(),
                        "redraw_flagged": spec.redraw_flagged(),
                        "out": path,
                    });
                    emit(&to_json(&summary), None)
                }
                None => {
                    let mut buf = Vec::new();
                    write_candidates_jsonl(&ex, a.c, &mut buf).expect("writing to memory");
                    emit(&String::from_utf8(buf).expect("JSON is UTF-8"), None)
                }
            }
        }
    }
}

fn dynamics_cmd(a: &DynamicsArgs, format: Option<OutputFormat>) -> Result<()> {
    let rho = AccuracyFunction::from_params(a.family, &a.params)?;
    let cfg = DynamicsConfig {
        c: a.c,
        k: a.k,
        rho0: a.rho0,
        tol: a.tol,
        max_iter: a.max_iter,
    };
    cfg.validate()?;
    let (fp, traj) = fixed_point(&rho, &cfg)?;
    if let Some(path) = &a.out {
        emit(&traj.to_csv(), Some(path))?;
    }
    match format.unwrap_or(OutputFormat::Json) {
        OutputFormat::Csv => emit(&traj.to_csv(), None),
        OutputFormat::Json => {
            let out = json!({
                "rho_final": fp.rho_final,
                "iterations": fp.iterations,
                "residual": fp.residual,
                "k_l": fp.contraction.k_l,
                "threshold": fp.contraction.threshold,
                "certified": fp.contraction.certified,
                "damped": fp.damped,
            });
            emit(&to_json(&out), None)
        }
    }
}

fn teacher_cmd(a: &TeacherArgs, format: Option<OutputFormat>, seed: RandomSeed) -> Result<()> {
    if format == Some(OutputFormat::Csv) {
        return Err(no_csv("teacher"));
    }
    match a.mode {
        TeacherMode::Corrupt => {
            let delta = a
                .target_delta
                .ok_or_else(|| usage("corrupt mode needs --target-delta"))?;
            let ys = uniform_labels(a.n, a.c, seed.fork("labels"));
            let ds = make_biased_soft_labels(&ys, a.c, a.k, delta, a.target_gamma, seed.fork("corrupt"))?;
            if let Some(path) = &a.out {
                write_soft(&ds, path)?;
            }
            let report = analyze(&ds, Semantics::TopK(a.k))?;
            emit(&to_json(&report), None)
        }
        TeacherMode::Train => {
            let cfg = TeacherLossConfig {
                alpha1: a.alphas[0],
                alpha2: a.alphas[1],
                alpha3: a.alphas[2],
                k: a.k,
                r: a.r,
            };
            let spec = BlobSpec {
                c: a.c,
                f: a.features,
                n_train: a.n_train,
                n_test: a.n_test,
                separation: a.blob_sep,
            };
            let data = make_blobs(&spec, seed.fork("blobs"))?;
            let opts = TrainOptions {
                epochs: a.epochs,
                lr: a.lr,
            };
            let run = train_tiny_teacher(&data, &cfg, &opts, seed.fork("teacher"))?;
            if let Some(path) = &a.out {
                write_soft(&run.soft, path)?;
            }
            let comparison = if a.compare {
                let opts = TrainOptions {
                    epochs: a.student_epochs,
                    lr: a.student_lr,
                };
                Some(compare_students(&data, &run, a.k, &opts)?)
            } else {
                None
            };
            let out = json!({
                "final_loss": run.final_loss,
                "report": run.report,
                "students": comparison,
            });
            emit(&to_json(&out), None)
        }
    }
}

fn build_class(a: &SimulateArgs) -> Result<HypothesisClass> {
    match a.class {
        ClassArg::Intervals => HypothesisClass::intervals(a.pool_size, a.c, a.thresholds),
        ClassArg::Table => {
            let path = a.table.as_ref().ok_or_else(|| usage("--class table needs --table"))?;
            let text = std::fs::read_to_string(path).map_err(io_error(path))?;
            let rows: Vec<Vec<usize>> = serde_json::from_str(&text).map_err(|e| Error::Parse {
                line: e.line(),
                message: e.to_string(),
            })?;
            let m = rows.first().map_or(0, |r| r.len());
            HypothesisClass::explicit(softlabel_core::ermsim::uniform_pool(m), a.c, rows)
        }
    }
}

fn mechanism(a: &SimulateArgs) -> Result<LabelMechanism> {
    let p = &a.mech_params;
    let as_k = |v: f64| {
        if v >= 1.0 && v.fract() == 0.0 {
            Ok(v as usize)
        } else {
            Err(usage(format!("k must be a positive integer, got {v}")))
        }
    };
    match (a.label_mech, p.len()) {
        (MechanismArg::Corruptor, 2 | 3) => Ok(LabelMechanism::Corruptor {
            k: as_k(p[0])?,
            delta: p[1],
            gamma: p.get(2).copied(),
        }),
        (MechanismArg::Pll, 2) => Ok(LabelMechanism::Pll { eta: p[0], mu: p[1] }),
        (MechanismArg::Noise, 2) => Ok(LabelMechanism::Noise {
            model: NoiseModel::new(a.noise_kind, p[0])?,
            k: as_k(p[1])?,
        }),
        (MechanismArg::Corruptor, _) => Err(usage("corruptor takes --mech-params k,delta[,gamma]")),
        (MechanismArg::Pll, _) => Err(usage("pll takes --mech-params eta,mu")),
        (MechanismArg::Noise, _) => Err(usage("noise takes --mech-params scale,k")),
    }
}

fn simulate_cmd(a: &SimulateArgs, format: Option<OutputFormat>, seed: RandomSeed) -> Result<()> {
    let class = build_class(a)?;
    let target = match &a.target {
        Some(labels) => class
            .find(labels)
            .ok_or_else(|| usage("--target labels are not a hypothesis of the class"))?,
        None if a.class == ClassArg::Table => 0,
        None => {
            let m = class.pool_size();
            let labels: Vec<usize> = (0..m).map(|x| if x < m / 2 { 0 } else { a.c - 1 }).collect();
            class.find(&labels).unwrap_or(0)
        }
    };
    if a.n_list.is_empty() {
        return Err(usage("--n-list needs at least one sample size"));
    }
    let mut spec = ExperimentSpec::new(class, target, mechanism(a)?, a.n_list[0]);
    spec.eps = a.eps;
    spec.conf = a.conf;
    spec.trials = a.trials;
    spec.seed = seed;
    spec.dh = a.dh;
    spec.labels = a.labels;
    let reports = learnability_sweep(&spec, &a.n_list)?;
    if !reports[0].consistent {
        log::warn!(
            "delta + gamma = {:.4} >= 1; bound columns are n/a",
            reports[0].delta + reports[0].gamma
        );
    }
    let text = match format.unwrap_or(OutputFormat::Csv) {
        OutputFormat::Csv => sweep_csv(&reports),
        OutputFormat::Json => to_json(&reports),
    };
    emit(&text, a.out.as_deref())
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::Parser;

    fn simulate(extra: &[&str]) -> SimulateArgs {
        let mut argv = vec!["softlabel", "simulate"];
        argv.extend(extra);
        match Cli::try_parse_from(argv).unwrap().command {
            Command::Simulate(a) => a,
            _ => unreachable!(),
        }
    }

    #[test]
    fn mechanism_parameters_map_by_kind() {
        let a = simulate(&["--mech-params", "2,0.1,0.4"]);
        assert_eq!(
            mechanism(&a).unwrap(),
            LabelMechanism::Corruptor {
                k: 2,
                delta: 0.1,
                gamma: Some(0.4)
            }
        );
        let a = simulate(&["--label-mech", "pll", "--mech-params", "0.1,0.5"]);
        assert_eq!(mechanism(&a).unwrap(), LabelMechanism::Pll { eta: 0.1, mu: 0.5 });
        assert!(mechanism(&simulate(&["--mech-params", "1.5,0.1"])).is_err());
        assert!(mechanism(&simulate(&["--label-mech", "noise", "--mech-params", "0.5"])).is_err());
    }

    #[test]
    fn explicit_table_builds_a_class() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.json");
        std::fs::write(&path, "[[0,1,1],[1,1,0],[0,0,0]]").unwrap();
        let a = simulate(&["--class", "table", "--table", path.to_str().unwrap(), "--classes", "2", "--mech-params", "1,0.1"]);
        let class = build_class(&a).unwrap();
        assert_eq!(class.len(), 3);
        assert_eq!(class.pool_size(), 3);
    }
}
