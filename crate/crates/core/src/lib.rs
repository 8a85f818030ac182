//! Discrete structural causal models with known rendering mechanisms, an
//! information-theoretic confounding measure, counterfactual data
//! augmentation under four intervention schemes, and a small classifier to
//! measure what the augmentation buys on unconfounded test data.
//!
//! The numeric core ([`DistTable`], the information measures and the
//! [`MlpModel`]) is generic over [`Real`]; the aliases below pin the scalar
//! types used by the rest of the crate.

pub mod augment;
pub mod classifier;
pub mod datagen;
mod error;
pub mod info;
pub mod real;
pub mod rng;
pub mod scm;

pub use error::{Error, Result};
pub use real::Real;

pub use augment::{AugmentConfig, Strategy};
pub use classifier::{Metrics, MlpModel, TrainConfig};
pub use datagen::{Dataset, DatasetSpec, FactorTuple, Image, Instance, Variant};
pub use scm::{Assignment, Dag, DistTable, Scm};

/// Probability tables as produced by exact inference.
pub type Table = DistTable<f64>;
/// Single-precision table, used for compact empirical joints.
pub type Table32 = DistTable<f32>;
/// The classifier used for experiments.
pub type Mlp = MlpModel<f32>;
/// Double-precision classifier, used for gradient checks.
pub type Mlp64 = MlpModel<f64>;
