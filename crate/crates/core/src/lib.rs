//! Simulated-respondent cultural value mapping.
//!
//! The pipeline renders a persona prompt for every (entity, survey item) pair,
//! runs the prompts through a pluggable chat backend, encodes the free-text
//! answers into bounded item scores, standardizes and weights them into the two
//! cultural value indices, and compares the resulting map with a survey
//! benchmark region by region.
//!
//! Index and comparison math is generic over [`Scalar`]; the aliases below fix
//! it to `f64`, which is what the pipeline and CLI use.

pub mod catalog;
pub mod codec;
pub mod compare;
pub mod gateway;
pub mod index;
pub mod prompt;
pub mod scalar;
pub mod viz;

pub use catalog::{Catalog, CulturalEntity, CulturalRegion, Dimension, SurveyItem};
pub use scalar::Scalar;

pub type IndexPoint = index::CulturalIndexPoint<f64>;
pub type ItemContribution = index::ItemContribution<f64>;
pub type CulturalMap = index::CulturalMap<f64>;
pub type Projection = index::Projection<f64>;
pub type BenchmarkDataset = compare::BenchmarkDataset<f64>;
pub type EntityDiff = compare::EntityDiff<f64>;
pub type RegionMetrics = compare::RegionMetrics<f64>;
