// `!(x > 0.0)` guards are deliberate: they reject NaN along with
// out-of-range values, which `x <= 0.0` would not. Indexed loops in the
// numeric kernels mirror the row/column arithmetic they implement.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

//! Data-free knowledge distillation for regression models.
//!
//! A teacher model is compressed into a smaller student without access to
//! the teacher's training data. Synthetic inputs come from seeded samplers,
//! from an adversarially trained generator network, or from direct
//! optimization of the teacher-student discrepancy (by gradient steps or by
//! differential evolution), and the student is fitted to the teacher's
//! predictions on them.

pub mod benchdata;
pub mod bounds;
pub mod data;
pub mod distill;
pub mod error;
pub mod loss;
pub mod models;
pub mod optim;
pub mod rng;
pub mod synthgen;
pub mod tape;
pub mod tensor;

pub use bounds::{
    check_displacement_bound, check_generator_norm_bound, estimate_lipschitz, BoundReport,
    GenObjective, GradObjective, LipschitzEstimate,
};
pub use data::{Dataset, Scaler, SplitSpec, Splits};
pub use distill::{
    distill_run, evaluate, fit_supervised, metrics_to_csv, AlphaSchedule, DistillConfig,
    DistillOutcome, EvalMetric, FitConfig, MetricsRow, SynthSpec,
};
pub use error::{Error, Result};
pub use loss::LossKind;
pub use models::{Differentiable, Model, Predictor, TeacherOracle};
pub use optim::{OptimKind, OptimizerSettings, OptimizerState};
pub use rng::Seeds;
pub use tape::{GradTape, NodeId};
pub use tensor::Tensor2;
