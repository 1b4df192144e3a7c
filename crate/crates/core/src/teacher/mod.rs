//! Biased teachers: a loss that keeps the truth inside the top-k but off the
//! top, a linear-softmax teacher trained with it on Gaussian blobs, students
//! that learn from its outputs, and a direct (Δ, γ) corruptor.

pub mod blobs;
pub mod corrupt;
pub mod loss;
pub mod model;
pub mod train;

pub use blobs::{make_blobs, random_targets, BlobSpec, Blobs};
pub use corrupt::{corrupt_with_plan, feasible_gamma_range, make_biased_soft_labels, symmetric_gamma, CorruptionPlan};
pub use loss::{
    gates_at, logit_loss_and_gradient, loss_components, loss_gradient, loss_gradient_with_gates, total_loss_with_gates, Gates,
    LossComponents, TeacherLossConfig,
};
pub use model::{accuracy, LinearSoftmaxModel};
pub use train::{
    compare_students, train_ground_truth_student, train_reweighted_student, train_tiny_teacher, StudentComparison,
    TeacherRun, TrainOptions,
};
