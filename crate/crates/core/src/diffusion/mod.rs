//! Diffusion of SAM iterates started at a saddle, linearized around it.
//!
//! Near a critical point `d` with Hessian `H = Q diag(λ) Qᵀ`, SAM's update
//! gradient is approximately `H(I + ρH)²(w − d)` and the gradient noise
//! covariance `|H|/B`. Each eigendirection is then an Ornstein–Uhlenbeck
//! process with rate `k_j = λ_j(1 + ρλ_j)²` and squared noise scale `η|λ_j|/B`.

mod closed_form;
mod model;
mod simulate;

use thiserror::Error;

pub use closed_form::{
    forecast, momentum_constants, msd_gap, msd_momentum, sigma_sq, DiffusionForecast, MomentumBranch,
    MomentumConstants, MomentumMsd, SigmaBranch, SigmaSq,
};
pub use model::{diffusion_matrix, sde_drift, MomentumParams, SaddleModel};
pub use simulate::{
    default_dt, simulate_sde, write_diffusion_csv, Checkpoint, DiffusionRow, MsdEstimate, SimulationConfig,
    SimulationResult,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiffusionError {
    #[error("invalid saddle model: {0}")]
    InvalidModel(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("unstable step: dt·rate = {product:e} exceeds 0.1 (dt = {dt:e}, rate = {rate:e})")]
    StepContract { dt: f64, rate: f64, product: f64 },
}
