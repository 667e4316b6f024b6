//! Discrete update rules and trajectory recording.
//!
//! SAM evaluates its update gradient at the perturbed point
//! `w_p = w + ρ ∇ℓ(w)` (constant radius) or `w_p = w + ρ ∇ℓ(w)/‖∇ℓ(w)‖`
//! (normalized radius) and steps `w ← w − η ∇ℓ(w_p)`. With `ρ = 0` it is
//! plain gradient descent, bit for bit.

mod step;
mod trajectory;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::objective::ObjectiveError;
use crate::scalar::Scalar;

pub use step::{
    batch_gradient, gd_step, grad_cosine, momentum_step, perturbed_point, sam_step, sgd_step, GradSource,
    MomentumState, SamStep, SgdStep,
};
pub use trajectory::{
    run_stochastic_trajectory, run_trajectory, StepRecord, Termination, Trajectory, TrajectoryManifest,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptimError {
    #[error("invalid optimizer config: {0}")]
    InvalidConfig(String),
    #[error("non-finite {0} encountered")]
    Divergence(&'static str),
    #[error("momentum buffer has dimension {got}, point has {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RhoMode {
    Constant,
    /// `ρ / max(‖∇ℓ(w)‖, grad_eps)`; perturbation skipped below `grad_eps`.
    GradNormalized,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Gd,
    Sam,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimConfig<T> {
    pub method: Method,
    pub eta: T,
    pub rho: T,
    pub rho_mode: RhoMode,
    pub gamma: T,
    pub tau: T,
    pub batch_size: usize,
    pub max_steps: usize,
    pub seed: u64,
    pub grad_eps: T,
    /// Stop once `‖∇ℓ(w)‖` drops below this.
    pub grad_tol: T,
    /// Declare divergence once `‖w‖` exceeds this.
    pub divergence_threshold: T,
    /// Record every `record_stride`-th step (the final state is always recorded).
    pub record_stride: usize,
}

impl<T: Scalar> Default for OptimConfig<T> {
    fn default() -> Self {
        Self {
            method: Method::Gd,
            eta: T::of(1e-3),
            rho: T::zero(),
            rho_mode: RhoMode::Constant,
            gamma: T::zero(),
            tau: T::zero(),
            batch_size: 1,
            max_steps: 10_000,
            seed: 0,
            grad_eps: T::of(1e-12),
            grad_tol: T::of(1e-10),
            divergence_threshold: T::of(1e8),
            record_stride: 1,
        }
    }
}

impl<T: Scalar> OptimConfig<T> {
    pub fn gd(eta: T) -> Self {
        Self { eta, ..Self::default() }
    }

    pub fn sam(eta: T, rho: T, rho_mode: RhoMode) -> Self {
        Self { method: Method::Sam, eta, rho, rho_mode, ..Self::default() }
    }

    pub fn with_momentum(mut self, gamma: T, tau: T) -> Self {
        self.gamma = gamma;
        self.tau = tau;
        self
    }

    pub fn with_max_steps(mut self, max_steps: usize) -> Self {
        self.max_steps = max_steps;
        self
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.record_stride = stride;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_batch_size(mut self, batch_size: usize) -> Self {
        self.batch_size = batch_size;
        self
    }

    pub fn uses_momentum(&self) -> bool {
        self.gamma != T::zero() || self.tau != T::zero()
    }

    pub fn grad_source(&self) -> GradSource {
        match self.method {
            Method::Gd => GradSource::Plain,
            Method::Sam => GradSource::Sam,
        }
    }

    pub fn validate(&self) -> Result<(), OptimError> {
        let bad = |msg: &str| Err(OptimError::InvalidConfig(msg.to_owned()));
        if !(self.eta > T::zero()) || !self.eta.is_finite() {
            return bad("eta must be positive and finite");
        }
        if !(self.rho >= T::zero()) || !self.rho.is_finite() {
            return bad("rho must be non-negative and finite");
        }
        if !(self.gamma >= T::zero() && self.gamma < T::one()) {
            return bad("gamma must lie in [0, 1)");
        }
        if !(self.tau >= T::zero() && self.tau <= T::one()) {
            return bad("tau must lie in [0, 1]");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if !(self.grad_eps > T::zero()) {
            return bad("grad_eps must be positive");
        }
        if self.record_stride == 0 {
            return bad("record_stride must be positive");
        }
        Ok(())
    }
}
