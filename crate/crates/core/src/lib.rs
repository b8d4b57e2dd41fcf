//! Desk-scale laboratory for adversarial training.
//!
//! Small smooth classifiers, PGD attacks, the vanilla / free / fast /
//! Free-TRADES training loops, coupled runs on neighboring datasets, and the
//! closed-form stability bounds those runs are compared against.

pub mod bounds;
pub mod error;
pub mod experiments;
pub mod models;
pub mod numcore;
pub mod stability;
pub mod threat;
pub mod trainers;

pub use error::{Error, Result};
pub use models::{Dataset, LabeledSample, LossOracle, ParamVector, SmoothModel};
pub use numcore::{RealVector, SeededRng};
pub use threat::{AttackConfig, AttackInit, NormKind, PerturbationSet};
pub use trainers::{Algorithm, StepSchedule, TrainConfig, TrainTrace};
