//! Element Shapley Values: fair per-element attributions for variable-length
//! sequences under black-box scoring models.
//!
//! The crate provides
//! - sequence and coalition types with Shapley weights and a brute-force oracle ([`sequence`]),
//! - pluggable scorers, including the multi-scale aggregate of fixed-length models ([`model`]),
//! - exact and sampled attribution engines ([`engine`]),
//! - approximation-quality metrics and element-ablation curves ([`analysis`]),
//! - versioned feature, model and result file formats ([`io`]).
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases below
//! fix the scalar for the common cases.

pub mod analysis;
pub mod engine;
pub mod error;
pub mod io;
pub mod model;
pub mod scalar;
pub mod sequence;

pub use error::{EsvError, Result};
pub use scalar::Scalar;

pub type Sequence = sequence::FeatureSequence<f64>;
pub type Sequence32 = sequence::FeatureSequence<f32>;
pub type Model = model::Scorer<f64>;
pub type Model32 = model::Scorer<f32>;
pub type Attribution = engine::AttributionResult<f64>;
pub type Attribution32 = engine::AttributionResult<f32>;
pub type Scores = model::ClassScores<f64>;
pub type Scores32 = model::ClassScores<f32>;
