//! Acceptance checks. Runs as a plain binary and prints one line per check.

use std::process::ExitCode;
use std::time::Instant;

use rand::Rng;
use softlabel_core::bounds::{failure_prob_bound, sample_complexity, BoundParams, BoundVariant};
use softlabel_core::dynamics::{fixed_point, lipschitz_estimate, AccuracyFunction, Contraction, DynamicsConfig, LIPSCHITZ_RESOLUTION};
use softlabel_core::ermsim::{
    class_dimension, failure_rates_monotone, learnability_experiment, learnability_sweep, ExperimentSpec,
    HypothesisClass, LabelMechanism,
};
use softlabel_core::indicators::{estimate_delta, estimate_gamma};
use softlabel_core::noise::{delta_additive_noise, delta_profile_mc, make_noisy_dataset, DeltaMethod, NoiseKind, NoiseModel};
use softlabel_core::pll::{calibrate_eta, candidates_dataset, generate_candidates, uniform_labels, verify_rates, PllSpec};
use softlabel_core::teacher::{
    compare_students, gates_at, loss_gradient_with_gates, make_biased_soft_labels, make_blobs, total_loss_with_gates,
    train_tiny_teacher, BlobSpec, LinearSoftmaxModel, TeacherLossConfig, TrainOptions,
};
use softlabel_core::{RandomSeed, Semantics, SoftDataset};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

const SCALES: [f64; 4] = [0.1, 0.3, 0.5, 1.0];
const CLASS_COUNTS: [usize; 3] = [2, 5, 10];
const KINDS: [NoiseKind; 2] = [NoiseKind::Gaussian, NoiseKind::Laplace];
const MC_SAMPLES: usize = 1_000_000;

fn quadrature_matches_monte_carlo() -> Outcome {
    let mut worst = 0.0f64;
    let mut cells = 0;
    let mut failed = Vec::new();
    let base = RandomSeed::new(1);
    let mut stream = 0;
    for kind in KINDS {
        for &scale in &SCALES {
            let model = NoiseModel::new(kind, scale).unwrap();
            for &c in &CLASS_COUNTS {
                let mc = delta_profile_mc(&model, c, MC_SAMPLES, base.child(stream)).unwrap();
                stream += 1;
                for k in 1..c {
                    let q = delta_additive_noise(&model, c, k, DeltaMethod::quadrature()).unwrap().delta;
                    // Binomial standard error at the quadrature value.
                    let se = (q * (1.0 - q) / MC_SAMPLES as f64).sqrt();
                    let z = if se > 0.0 { (mc[k - 1].delta - q).abs() / se } else { 0.0 };
                    let ok = if se > 0.0 { z <= 3.0 } else { mc[k - 1].delta == 0.0 };
                    worst = worst.max(z);
                    cells += 1;
                    if !ok {
                        failed.push(format!("{kind} s={scale} c={c} k={k} z={z:.2}"));
                    }
                }
            }
        }
    }
    outcome(
        failed.is_empty(),
        format!("{cells} cells, max |z| = {worst:.2}{}", fmt_failed(&failed)),
    )
}

fn fmt_failed(failed: &[String]) -> String {
    if failed.is_empty() {
        String::new()
    } else {
        format!("; failing: {}", failed.join(", "))
    }
}

fn two_class_closed_form() -> Outcome {
    let exact = 0.239750061093476731;
    let model = NoiseModel::gaussian(1.0f64).unwrap();
    let q = delta_additive_noise(&model, 2, 1, DeltaMethod::quadrature()).unwrap().delta;
    let mc = delta_additive_noise(&model, 2, 1, DeltaMethod::monte_carlo(MC_SAMPLES, RandomSeed::new(7))).unwrap();
    let se = mc.stderr.unwrap();
    let z = (mc.delta - exact).abs() / se;
    outcome(
        (q - exact).abs() <= 1e-4 && z <= 3.0,
        format!("quadrature {q:.10} (|err| {:.2e}), Monte Carlo {:.6} (z = {z:.2})", (q - exact).abs(), mc.delta),
    )
}

fn candidate_set_rates() -> Outcome {
    let grid = [0.1, 0.3, 0.5];
    let mut checked = 0;
    let mut flagged = Vec::new();
    let mut failed = Vec::new();
    let mut worst = (0.0f64, 0.0f64);
    for (i, &mu) in grid.iter().enumerate() {
        for (j, &eta) in grid.iter().enumerate() {
            let spec = PllSpec::new(eta, mu, 10).unwrap();
            let r = verify_rates(&spec, 100_000, RandomSeed::new(30 + (3 * i + j) as u64)).unwrap();
            if spec.redraw_flagged() {
                flagged.push(format!("(mu={mu}, eta={eta})"));
                if (r.gamma_hat - r.expected_gamma).abs() > 0.02 || (r.delta_hat - mu).abs() > 0.01 {
                    failed.push(format!("flagged (mu={mu}, eta={eta})"));
                }
                continue;
            }
            checked += 1;
            let (dd, dg) = ((r.delta_hat - mu).abs(), (r.gamma_hat - eta).abs());
            worst = (worst.0.max(dd), worst.1.max(dg));
            if dd > 0.01 || dg > 0.02 {
                failed.push(format!("(mu={mu}, eta={eta}): |dD| {dd:.4} |dG| {dg:.4}"));
            }
        }
    }
    outcome(
        failed.is_empty(),
        format!(
            "{checked} cells, max |delta - mu| = {:.4}, max |gamma - eta| = {:.4}; redraw-flagged (checked against predicted gamma): {}{}",
            worst.0,
            worst.1,
            flagged.join(" "),
            fmt_failed(&failed)
        ),
    )
}

fn noise_gamma_identity() -> Outcome {
    let mut worst = 0.0f64;
    let mut cells = 0;
    let mut failed = Vec::new();
    for (ki, kind) in KINDS.iter().enumerate() {
        for (si, &scale) in SCALES.iter().enumerate() {
            let model = NoiseModel::new(*kind, scale).unwrap();
            for &c in &CLASS_COUNTS {
                let tag = (ki * 100 + si * 10 + c) as u64;
                let ys = uniform_labels(100_000, c, RandomSeed::new(2000 + tag));
                let ds = make_noisy_dataset(&ys, &model, c, RandomSeed::new(3000 + tag)).unwrap();
                for k in 1..c {
                    let d = estimate_delta(&ds, Semantics::TopK(k)).unwrap();
                    let g = estimate_gamma(&ds, Semantics::TopK(k)).unwrap().gamma;
                    let gap = (g - (d + (k - 1) as f64) / (c - 1) as f64).abs();
                    worst = worst.max(gap);
                    cells += 1;
                    if gap > 0.01 {
                        failed.push(format!("{kind} s={scale} c={c} k={k} gap={gap:.4}"));
                    }
                }
            }
        }
    }
    outcome(failed.is_empty(), format!("{cells} cells, max gap = {worst:.5}{}", fmt_failed(&failed)))
}

fn bound_self_consistency() -> Outcome {
    let mut cells = 0;
    let mut vacuous = 0;
    let mut failed = Vec::new();
    let mut worst = f64::NEG_INFINITY;
    for &delta in &[0.0, 0.2, 0.5, 0.7] {
        for &gamma in &[0.0, 0.1, 0.25] {
            for &eps in &[0.1, 0.5, 0.9] {
                for &conf in &[0.01f64, 0.05, 0.2] {
                    for dh in 1..=4u32 {
                        for &c in &CLASS_COUNTS {
                            let Ok(p) = BoundParams::new(delta, gamma, eps, conf, dh, c as u32) else {
                                continue;
                            };
                            let Ok(sc) = sample_complexity(&p) else {
                                vacuous += 1;
                                continue;
                            };
                            let n = sc.n_required();
                            let b = failure_prob_bound(n, &p, BoundVariant::Derivation).unwrap();
                            let slack = b.log_bound - conf.ln();
                            worst = worst.max(slack);
                            cells += 1;
                            if slack > 0.0 {
                                failed.push(format!("D={delta} G={gamma} e={eps} d={conf} dh={dh} c={c}"));
                            }
                        }
                    }
                }
            }
        }
    }
    let p = BoundParams::new(0.5, 0.1, 0.5, 0.05, 2, 10).unwrap();
    let sc = sample_complexity(&p).unwrap();
    let example = failure_prob_bound(sc.n_required(), &p, BoundVariant::Derivation).unwrap();
    outcome(
        failed.is_empty() && cells > 0,
        format!(
            "{cells} non-vacuous cells ({vacuous} vacuous skipped), max log bound - log conf = {worst:.3}; (0.5, 0.1, 0.5, 0.05, dh 2, L 10): n = {} gives log bound {:.3} <= {:.3}{}",
            sc.n_required(),
            example.log_bound,
            0.05f64.ln(),
            fmt_failed(&failed)
        ),
    )
}

fn empirical_learnability() -> Outcome {
    let class = HypothesisClass::intervals(20, 10, 1).unwrap();
    let dim = class_dimension(&class).unwrap();
    let explicit_dim = class_dimension(&class.to_explicit()).unwrap().dimension;
    let mut labels = vec![3usize; 20];
    labels[10..].iter_mut().for_each(|l| *l = 7);
    let target = class.find(&labels).unwrap();
    // Unreliable rate 0.5 and a partial rate giving wrong-label inclusion 0.1.
    let eta = calibrate_eta(0.5, 0.1, 10).unwrap();
    let mut spec = ExperimentSpec::new(class, target, LabelMechanism::Pll { eta, mu: 0.5 }, 0);
    spec.eps = 0.5;
    spec.conf = 0.05;
    spec.trials = 400;
    spec.seed = RandomSeed::new(2024);
    spec.dh = Some(dim.dimension);
    let probe = learnability_experiment(&spec.with_n(1)).unwrap();
    let n = probe.effective_n0.unwrap().ceil() as usize;
    let at_n0 = learnability_experiment(&spec.with_n(n)).unwrap();
    let sweep = learnability_sweep(&spec, &[10, 30, 100, 300, 1000]).unwrap();
    let monotone = failure_rates_monotone(&sweep, 3.0);
    let rates: Vec<String> = sweep.iter().map(|r| format!("{}:{}", r.n, r.failure_rate)).collect();
    outcome(
        at_n0.failure_rate <= spec.conf && monotone && dim.dimension == explicit_dim && !dim.lower_bound_only,
        format!(
            "d_H = {} (table form {explicit_dim}), delta {:.3} gamma {:.4}, n = {n}: failure rate {} over {} trials; sweep {}",
            dim.dimension,
            at_n0.delta,
            at_n0.gamma,
            at_n0.failure_rate,
            at_n0.trials,
            rates.join(" ")
        ),
    )
}

fn consistency_boundary() -> Outcome {
    let delta = 0.1;
    let threshold = 1.0 - delta / (1.0 - delta);
    let class = HypothesisClass::intervals(20, 10, 1).unwrap();
    let run = |gamma: f64| {
        let mech = LabelMechanism::Corruptor {
            k: 2,
            delta,
            gamma: Some(gamma),
        };
        let mut spec = ExperimentSpec::new(class.clone(), 0, mech, 2000);
        spec.trials = 50;
        spec.seed = RandomSeed::new(77);
        spec.dh = Some(2);
        learnability_experiment(&spec).unwrap()
    };
    let below = run(threshold - 0.05);
    let above = run(threshold + 0.05);
    outcome(
        below.mean_error < 0.05 && above.mean_error >= 0.2,
        format!(
            "delta {delta}, threshold {threshold:.4}, k 2, n 2000, 50 trials: mean true error {:.4} below, {:.4} above",
            below.mean_error, above.mean_error
        ),
    )
}

fn fixed_point_solver() -> Outcome {
    let rho = AccuracyFunction::linear(1.0, 0.3, 0.2).unwrap();
    let exact = 51.0 / 61.0;
    let (a, _) = fixed_point(&rho, &DynamicsConfig::new(10, 4, 0.0).unwrap()).unwrap();
    let (b, _) = fixed_point(&rho, &DynamicsConfig::new(10, 4, 1.0).unwrap()).unwrap();
    let k_l = lipschitz_estimate(&rho, LIPSCHITZ_RESOLUTION).unwrap();
    let cert = Contraction::assess(k_l, 10);
    let err = (a.rho_final - exact).abs().max((b.rho_final - exact).abs());
    let agree = (a.rho_final - b.rho_final).abs();
    outcome(
        err <= 1e-9
            && a.iterations <= 200
            && b.iterations <= 200
            && agree <= 2e-10
            && (k_l - 0.3).abs() < 1e-9
            && cert.certified,
        format!(
            "rho* = {:.10} (|err| {err:.1e}), iterations {}/{}, starts agree to {agree:.1e}, k_L = {k_l:.6} < {}",
            a.rho_final, a.iterations, b.iterations, cert.threshold
        ),
    )
}

fn gradient_check() -> Outcome {
    let mut rng = RandomSeed::new(99).rng();
    let h = 1e-5;
    let mut worst = 0.0f64;
    let mut done = 0;
    let mut skipped = 0;
    while done < 100 {
        let c = rng.random_range(3..=8);
        let f = rng.random_range(2..=6);
        let k = rng.random_range(1..c);
        let r = rng.random_range(0..c - 1);
        let cfg = TeacherLossConfig {
            alpha1: rng.random_range(0.0..1.0),
            alpha2: rng.random_range(0.5..2.0),
            alpha3: rng.random_range(0.0..3.0),
            k,
            r,
        };
        let w: Vec<f64> = (0..c * (f + 1)).map(|_| rng.random_range(-1.0..1.0)).collect();
        let model = LinearSoftmaxModel::from_weights(c, f, w).unwrap();
        let x: Vec<f64> = (0..f).map(|_| rng.random_range(-2.0..2.0)).collect();
        let y = rng.random_range(0..c);
        let mut others: Vec<usize> = (0..c).filter(|&i| i != y).collect();
        for i in (1..others.len()).rev() {
            others.swap(i, rng.random_range(0..=i));
        }
        let s_rnd = &others[..r];
        let gates = gates_at(&model, &x, y, k).unwrap();
        let analytic = loss_gradient_with_gates(&model, &x, y, s_rnd, &cfg, gates);
        let mut numeric = vec![0.0; analytic.len()];
        let mut near_boundary = false;
        for j in 0..analytic.len() {
            let mut plus = model.clone();
            plus.weights_mut()[j] += h;
            let mut minus = model.clone();
            minus.weights_mut()[j] -= h;
            if gates_at(&plus, &x, y, k).unwrap() != gates || gates_at(&minus, &x, y, k).unwrap() != gates {
                near_boundary = true;
                break;
            }
            numeric[j] = (total_loss_with_gates(&plus, &x, y, s_rnd, &cfg, gates)
                - total_loss_with_gates(&minus, &x, y, s_rnd, &cfg, gates))
                / (2.0 * h);
        }
        if near_boundary {
            skipped += 1;
            continue;
        }
        let diff: f64 = analytic.iter().zip(&numeric).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let norm: f64 = analytic.iter().map(|a| a * a).sum::<f64>().sqrt().max(1e-12);
        worst = worst.max(diff / norm);
        done += 1;
    }
    outcome(
        worst <= 1e-5,
        format!("100 configurations ({skipped} near a gate boundary redrawn), max relative error {worst:.2e}"),
    )
}

fn biased_teacher() -> Outcome {
    let spec = BlobSpec {
        c: 10,
        f: 128,
        n_train: 100,
        n_test: 2000,
        separation: 6.0,
    };
    let data = make_blobs(&spec, RandomSeed::new(42)).unwrap();
    let cfg = TeacherLossConfig::default();
    let run = train_tiny_teacher(&data, &cfg, &TrainOptions { epochs: 2000, lr: 0.05 }, RandomSeed::new(1)).unwrap();
    let cmp = compare_students(&data, &run, cfg.k, &TrainOptions { epochs: 500, lr: 0.1 }).unwrap();
    let rep = &run.report;
    outcome(
        rep.top1_accuracy < 0.5 && cmp.teacher_accuracy < 0.5 && rep.consistent && cmp.ratio >= 0.9,
        format!(
            "teacher top-1 {:.3} train / {:.3} test, delta {:.3} gamma {:.3} (margin {:.3}); students {:.4} soft vs {:.4} ground truth, ratio {:.3}",
            rep.top1_accuracy,
            cmp.teacher_accuracy,
            rep.delta_hat,
            rep.gamma_hat,
            rep.consistency_margin,
            cmp.soft_label_student_accuracy,
            cmp.ground_truth_student_accuracy,
            cmp.ratio
        ),
    )
}

fn random_dataset(i: u64) -> SoftDataset<f64> {
    let seed = RandomSeed::new(5000 + i);
    let mut rng = seed.fork("params").rng();
    let c = rng.random_range(3..=10);
    let n = rng.random_range(200..=2000);
    let ys = uniform_labels(n, c, seed.fork("labels"));
    match i % 4 {
        0 => {
            let model = NoiseModel::gaussian(rng.random_range(0.05..1.5)).unwrap();
            make_noisy_dataset(&ys, &model, c, seed.fork("soft")).unwrap()
        }
        1 => {
            let model = NoiseModel::laplace(rng.random_range(0.05..1.5)).unwrap();
            make_noisy_dataset(&ys, &model, c, seed.fork("soft")).unwrap()
        }
        2 => {
            let spec = PllSpec::new(rng.random_range(0.05..0.6), rng.random_range(0.0..0.6), c).unwrap();
            candidates_dataset(&generate_candidates(&ys, &spec, seed.fork("soft")).unwrap(), c).unwrap()
        }
        _ => {
            let k = rng.random_range(1..c);
            make_biased_soft_labels(&ys, c, k, rng.random_range(0.0..0.9), None, seed.fork("soft")).unwrap()
        }
    }
}

fn indicator_monotonicity() -> Outcome {
    let mut failed = Vec::new();
    for i in 0..50 {
        let ds = random_dataset(i);
        let c = ds.num_classes();
        let mut prev: Option<(f64, f64)> = None;
        for k in 1..=c {
            let d = estimate_delta(&ds, Semantics::TopK(k)).unwrap();
            let g = estimate_gamma(&ds, Semantics::TopK(k)).unwrap().gamma;
            if let Some((pd, pg)) = prev {
                if d > pd || g < pg {
                    failed.push(format!("dataset {i} at k = {k}"));
                }
            }
            prev = Some((d, g));
        }
    }
    outcome(
        failed.is_empty(),
        format!("50 datasets over noise, candidate-set and template families{}", fmt_failed(&failed)),
    )
}

fn main() -> ExitCode {
    let checks: [(&str, fn() -> Outcome); 11] = [
        ("order-statistic quadrature vs Monte Carlo", quadrature_matches_monte_carlo),
        ("two-class Gaussian closed form", two_class_closed_form),
        ("candidate-set indicator rates", candidate_set_rates),
        ("additive-noise gamma identity", noise_gamma_identity),
        ("sample complexity self-consistency", bound_self_consistency),
        ("empirical learnability at n0 and n-sweep", empirical_learnability),
        ("consistency boundary directionality", consistency_boundary),
        ("fixed-point solver", fixed_point_solver),
        ("teacher loss gradient", gradient_check),
        ("biased teacher, useful student", biased_teacher),
        ("indicator monotonicity in k", indicator_monotonicity),
    ];
    let mut failures = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        let start = Instant::now();
        let o = check();
        let status = if o.pass { "PASS" } else { "FAIL" };
        if !o.pass {
            failures += 1;
        }
        println!(
            "criterion {:>2} {status} {name} [{:.1}s]: {}",
            i + 1,
            start.elapsed().as_secs_f64(),
            o.detail
        );
    }
    println!("{} of {} criteria passed", checks.len() - failures, checks.len());
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
