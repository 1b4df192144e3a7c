//! Training the tiny teacher and the students that learn from it.

use serde::{Deserialize, Serialize};

use super::blobs::{random_targets, Blobs};
use super::loss::{logit_loss_and_gradient, Gates, TeacherLossConfig};
use super::model::{accuracy, gd_step, softmax, train_soft_targets, LinearSoftmaxModel};
use crate::error::{Error, Result};
use crate::indicators::{analyze, IndicatorReport};
use crate::label::{Semantics, SoftDataset, SoftLabel};
use crate::rng::RandomSeed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    pub epochs: usize,
    pub lr: f64,
}

impl TrainOptions {
    fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::param(format!("learning rate must be positive, got {}", self.lr)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TeacherRun {
    pub model: LinearSoftmaxModel,
    /// Teacher outputs on the training inputs.
    pub soft: SoftDataset<f64>,
    pub report: IndicatorReport<f64>,
    /// Random target labels, drawn once per example.
    pub random_targets: Vec<Vec<usize>>,
    pub final_loss: f64,
}

/// Full-batch gradient descent on the teacher objective, from zero weights.
pub fn train_tiny_teacher(
    data: &Blobs,
    cfg: &TeacherLossConfig,
    opts: &TrainOptions,
    seed: RandomSeed,
) -> Result<TeacherRun> {
    opts.validate()?;
    let c = data.means.len();
    cfg.validate(c)?;
    let f = data.means[0].len();
    let mut rng = seed.fork("random-targets").rng();
    let s_rnd: Vec<Vec<usize>> = data
        .train_y
        .iter()
        .map(|&y| random_targets(c, y, cfg.r, &mut rng))
        .collect();
    let mut model = LinearSoftmaxModel::zeros(c, f)?;
    let mut final_loss = f64::NAN;
    for _ in 0..opts.epochs {
        final_loss = gd_step(&mut model, &data.train_x, opts.lr, |i, z| {
            let y = data.train_y[i];
            let p = SoftLabel::from_trusted(softmax(z));
            let gates = Gates::of(&p, y, cfg.k).expect("k validated");
            let (parts, g) = logit_loss_and_gradient(z, y, &s_rnd[i], cfg, gates);
            (parts.total, g)
        })?;
    }
    let soft = SoftDataset::from_parts(
        c,
        &data.train_y,
        data.train_x.iter().map(|x| model.predict(x)).collect(),
    )?;
    let report = analyze(&soft, Semantics::TopK(cfg.k))?;
    Ok(TeacherRun {
        model,
        soft,
        report,
        random_targets: s_rnd,
        final_loss,
    })
}

/// Cross-entropy on one-hot ground truth.
pub fn train_ground_truth_student(data: &Blobs, opts: &TrainOptions) -> Result<LinearSoftmaxModel> {
    opts.validate()?;
    let c = data.means.len();
    let targets: Vec<Vec<f64>> = data
        .train_y
        .iter()
        .map(|&y| SoftLabel::<f64>::one_hot(c, y).map(|d| d.values().to_vec()))
        .collect::<Result<_>>()?;
    let mut model = LinearSoftmaxModel::zeros(c, data.means[0].len())?;
    train_soft_targets(&mut model, &data.train_x, &targets, opts.epochs, opts.lr)?;
    Ok(model)
}

/// Re-weighting student: per-example weights live on `Ω_k` of the teacher's
/// label, start uniform, and after every epoch are reset to the student's own
/// probabilities renormalized over `Ω_k`.
pub fn train_reweighted_student(
    xs: &[Vec<f64>],
    soft: &SoftDataset<f64>,
    k: usize,
    opts: &TrainOptions,
) -> Result<LinearSoftmaxModel> {
    opts.validate()?;
    if xs.len() != soft.len() || xs.is_empty() {
        return Err(Error::param("student needs one feature vector per soft label"));
    }
    let c = soft.num_classes();
    let sets = soft
        .examples()
        .iter()
        .map(|e| e.soft.top_k(k))
        .collect::<Result<Vec<_>>>()?;
    let mut weights: Vec<Vec<f64>> = sets
        .iter()
        .map(|s| SoftLabel::<f64>::uniform_over(c, s.members()).map(|d| d.values().to_vec()))
        .collect::<Result<_>>()?;
    let mut model = LinearSoftmaxModel::zeros(c, xs[0].len())?;
    for _ in 0..opts.epochs {
        train_soft_targets(&mut model, xs, &weights, 1, opts.lr)?;
        for ((w, set), x) in weights.iter_mut().zip(&sets).zip(xs) {
            let p = model.probabilities(x);
            let mass: f64 = set.members().iter().map(|&i| p[i]).sum();
            w.iter_mut().for_each(|v| *v = 0.0);
            for &i in set.members() {
                w[i] = if mass > 0.0 { p[i] / mass } else { 1.0 / set.len() as f64 };
            }
        }
    }
    Ok(model)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StudentComparison {
    pub teacher_accuracy: f64,
    pub ground_truth_student_accuracy: f64,
    pub soft_label_student_accuracy: f64,
    /// Soft-label student accuracy over ground-truth student accuracy.
    pub ratio: f64,
}

/// Test accuracies of the teacher, a ground-truth student and a
/// re-weighting student trained on the teacher's labels.
pub fn compare_students(data: &Blobs, run: &TeacherRun, k: usize, opts: &TrainOptions) -> Result<StudentComparison> {
    let gt = train_ground_truth_student(data, opts)?;
    let soft = train_reweighted_student(&data.train_x, &run.soft, k, opts)?;
    let gt_acc = accuracy(&gt, &data.test_x, &data.test_y);
    let soft_acc = accuracy(&soft, &data.test_x, &data.test_y);
    Ok(StudentComparison {
        teacher_accuracy: accuracy(&run.model, &data.test_x, &data.test_y),
        ground_truth_student_accuracy: gt_acc,
        soft_label_student_accuracy: soft_acc,
        ratio: if gt_acc > 0.0 { soft_acc / gt_acc } else { f64::NAN },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::teacher::blobs::{make_blobs, BlobSpec};

    fn small_blobs() -> Blobs {
        let spec = BlobSpec {
            c: 4,
            f: 6,
            n_train: 80,
            n_test: 200,
            separation: 6.0,
        };
        make_blobs(&spec, RandomSeed::new(3)).unwrap()
    }

    #[test]
    fn zero_alphas_reproduce_plain_cross_entropy() {
        let data = small_blobs();
        let opts = TrainOptions { epochs: 50, lr: 0.1 };
        let run = train_tiny_teacher(&data, &TeacherLossConfig::plain(2, 1), &opts, RandomSeed::new(1)).unwrap();
        let reference = train_ground_truth_student(&data, &opts).unwrap();
        assert_eq!(run.model, reference);
    }

    #[test]
    fn plain_teacher_is_accurate() {
        let data = small_blobs();
        let opts = TrainOptions { epochs: 300, lr: 0.1 };
        let run = train_tiny_teacher(&data, &TeacherLossConfig::plain(1, 0), &opts, RandomSeed::new(1)).unwrap();
        assert!(run.report.top1_accuracy > 0.95, "{:?}", run.report);
        assert!(run.report.delta_hat < 0.05);
    }

    #[test]
    fn divergence_reported() {
        let data = small_blobs();
        let opts = TrainOptions { epochs: 50, lr: 1e308 };
        let res = train_tiny_teacher(&data, &TeacherLossConfig::default(), &opts, RandomSeed::new(1));
        assert!(matches!(res, Err(e) if e.is_numerical()));
    }
}
