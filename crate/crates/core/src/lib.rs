//! Sharpness-aware minimization near saddle points.
//!
//! * [`objective`]: analytic test problems with exact derivatives.
//! * [`optim`]: GD, SGD, SAM and momentum update rules plus trajectory recording.
//! * [`spectral`]: critical points, Hessian spectra, the SAM attractor condition,
//!   gradient flows, basins and trajectory case labels.
//! * [`diffusion`]: closed-form diffusion near a saddle and its Monte Carlo check.
//!
//! All numerics are generic over [`Scalar`] (`f32` or `f64`); the `*64` aliases
//! below fix the scalar to `f64`, which every experiment uses.

// `!(x > 0)` is how NaN gets rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diffusion;
pub mod linalg;
pub mod objective;
pub mod optim;
pub mod scalar;
pub mod spectral;

pub use linalg::{Matrix, Point};
pub use scalar::Scalar;

pub type Point64 = linalg::Point<f64>;
pub type Matrix64 = linalg::Matrix<f64>;
pub type ObjectiveEval64 = objective::ObjectiveEval<f64>;
pub type OptimConfig64 = optim::OptimConfig<f64>;
pub type Trajectory64 = optim::Trajectory<f64>;
pub type SpectralReport64 = spectral::SpectralReport<f64>;
pub type CriticalPoint64 = spectral::CriticalPoint<f64>;
pub type FlowPath64 = spectral::FlowPath<f64>;
pub type SaddleModel64 = diffusion::SaddleModel<f64>;
pub type DiffusionForecast64 = diffusion::DiffusionForecast<f64>;

pub type Point32 = linalg::Point<f32>;
pub type Trajectory32 = optim::Trajectory<f32>;
