//! Hash-based random-forest ensembles as a defense against untargeted
//! training-set poisoning, and the harness that measures how much accuracy
//! the poisoning costs with and without the defense.
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the common `f64` instantiation.

pub mod criterion;
pub mod dataset;
pub mod ensemble;
pub mod error;
pub mod forest;
pub mod pipeline;
pub mod poison;
pub mod scalar;
pub mod seed;

pub use dataset::{DataPoint, Provenance, SplitSpec};
pub use ensemble::{EnsembleConfig, HashAlgorithm, PartitionAssignment};
pub use error::{Error, Result};
pub use forest::{FeaturesPerSplit, ForestConfig, Predictor};
pub use poison::{Perturbation, PoisonSpec, TargetSelection};
pub use scalar::Scalar;

pub type Dataset = dataset::Dataset<f64>;
pub type Dataset32 = dataset::Dataset<f32>;
pub type Point = dataset::DataPoint<f64>;
pub type DecisionTree = forest::DecisionTree<f64>;
pub type RandomForest = forest::RandomForest<f64>;
pub type RandomForest32 = forest::RandomForest<f32>;
pub type EnsembleModel = ensemble::EnsembleModel<f64>;
pub type EnsembleModel32 = ensemble::EnsembleModel<f32>;
