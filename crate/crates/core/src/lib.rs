//! Country-product export networks and the binomial capabilities model.
//!
//! The pipeline runs trade records → [`trade::ExportTable`] → [`rca::RcaMatrix`] →
//! [`network::BipartiteNetwork`], then measures the network ([`metrics`]), compares it
//! against randomized ensembles ([`null_models`]), fits distribution families
//! ([`dist_fit`]) and calibrates the capabilities model ([`model`], [`calibrate`]).
//!
//! The analytic code is generic over [`Scalar`] (`f32`/`f64`); the aliases below fix
//! the common instantiations.

pub mod bits;
pub mod calibrate;
pub mod dist_fit;
pub mod error;
pub mod metrics;
pub mod model;
pub mod network;
pub mod null_models;
pub mod rca;
pub mod scalar;
pub mod seed;
pub mod synthetic;
pub mod trade;

pub use error::{Error, Result};
pub use network::BipartiteNetwork;
pub use scalar::Scalar;

pub type TradeRecordF64 = trade::TradeRecord<f64>;
pub type ExportTableF64 = trade::ExportTable<f64>;
pub type ExportTableF32 = trade::ExportTable<f32>;
pub type RcaMatrixF64 = rca::RcaMatrix<f64>;
pub type RcaMatrixF32 = rca::RcaMatrix<f32>;
pub type DegreeProfileF64 = metrics::DegreeProfile<f64>;
pub type ProximityMatrixF64 = metrics::ProximityMatrix<f64>;
pub type ProximityMatrixF32 = metrics::ProximityMatrix<f32>;
pub type SampleF64 = dist_fit::Sample<f64>;
pub type SampleF32 = dist_fit::Sample<f32>;
pub type FitResultF64 = dist_fit::FitResult<f64>;
pub type FitResultF32 = dist_fit::FitResult<f32>;
pub type BinomialParamsF64 = model::BinomialParams<f64>;
pub type BinomialParamsF32 = model::BinomialParams<f32>;
pub type RequirementHistogramF64 = model::RequirementHistogram<f64>;
pub type ImpliedDistributionF64 = model::ImpliedDistribution<f64>;
