//! Random Forest classification with proximity extraction, Self-Organising
//! Maps trained with Euclidean distance or RF dissimilarity (RF-SOM), and
//! classical multidimensional scaling.
//!
//! Every numeric type is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the precision.

pub mod dataset;
pub mod error;
pub mod experiment;
pub mod forest;
pub mod mds;
pub mod rfsom;
mod scalar;
pub mod seed;
pub mod som;
pub mod viz;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Dataset64 = dataset::Dataset<f64>;
pub type RandomForest64 = forest::RandomForest<f64>;
pub type SomGrid64 = som::SomGrid<f64>;
pub type LabeledSom64 = som::LabeledSom<f64>;
pub type RfSomModel64 = rfsom::RfSomModel<f64>;
pub type Embedding2D64 = mds::Embedding2D<f64>;
pub type ModelBundle64 = experiment::ModelBundle<f64>;

pub type Dataset32 = dataset::Dataset<f32>;
pub type RandomForest32 = forest::RandomForest<f32>;
pub type SomGrid32 = som::SomGrid<f32>;
pub type LabeledSom32 = som::LabeledSom<f32>;
pub type RfSomModel32 = rfsom::RfSomModel<f32>;
pub type Embedding2D32 = mds::Embedding2D<f32>;
pub type ModelBundle32 = experiment::ModelBundle<f32>;
