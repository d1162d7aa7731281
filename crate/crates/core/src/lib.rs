//! Fairness-aware margin training for imbalanced classification.
//!
//! The crate builds per-`(class, attribute)` margin schedules from subgroup
//! counts, trains linear scorers on margin-shifted losses, and plugs those
//! scorers into constrained-learning reductions (exponentiated gradient and
//! grid search) for equalized odds, equalized opportunity and demographic
//! parity. A small Gaussian-mixture module evaluates the population criterion
//! in closed form.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases at the
//! crate root fix the common `f64` case.

pub mod dataset;
pub mod error;
pub mod gaussian;
pub mod kind;
pub mod losses;
pub mod margins;
pub mod metrics;
pub mod model;
pub mod reductions;
pub mod rng;
pub mod scalar;

pub use error::{Error, Result};
pub use kind::ConstraintKind;
pub use losses::LossKind;
pub use margins::MarginSchedule;
pub use scalar::Scalar;

pub type Dataset = dataset::LabeledDataset<f64>;
pub type Dataset32 = dataset::LabeledDataset<f32>;
pub type Scorer = model::LinearScorer<f64>;
pub type Scorer32 = model::LinearScorer<f32>;
