//! Audit toolkit for gig-platform data-export bundles.
//!
//! Bundles are loaded and normalised ([`ingest`]), optionally pseudonymised
//! ([`anonymize`]), trips are joined to their earnings ([`linkage`]), time is
//! split into standby, en-route and on-trip segments ([`worktime`]) and the
//! pay metrics are computed over the result ([`metrics`]). [`predict`] scores
//! how well a linear model of one year's pay predicts another's.

pub mod anonymize;
pub mod audit;
pub mod ingest;
pub mod linkage;
pub mod metrics;
pub mod model;
pub mod numeric;
pub mod predict;
pub mod synthgen;
pub mod worktime;

pub type MatrixF64 = numeric::Matrix<f64>;
pub type MatrixF32 = numeric::Matrix<f32>;
pub type OlsModelF64 = predict::OlsModel<f64>;
pub type OlsModelF32 = predict::OlsModel<f32>;
pub type YearDatasetF64 = predict::YearDataset<f64>;
pub type YearDatasetF32 = predict::YearDataset<f32>;
pub type KdeComparisonF64 = numeric::KdeComparison<f64>;
pub type KdeComparisonF32 = numeric::KdeComparison<f32>;
