//! Critical points, Hessian spectra and the dynamics around saddles.
//!
//! SAM's linearization at a critical point `d` is `dw/dt = −H(I + ρH)(w − d)`,
//! so an eigen-direction with `λ < 0` stops repelling once `λ + ρλ² ≥ 0`.

mod basin;
mod case;
mod critical;
mod eigen;
mod field;
mod flow;

use thiserror::Error;

use crate::objective::ObjectiveError;

pub use basin::{
    classify_basin, unstable_manifold_probe, BasinClassifier, BasinConfig, BasinLabel, FlowClassifier, MinimumSite,
    SaddleSideClassifier,
};
pub use case::{classify_case, CaseConfig, CaseEvidence, CaseLabel, CaseWindow};
pub use critical::{
    attractor_condition, critical_point_records, find_critical_points, AttractorCondition, CriticalPoint,
    CriticalPointRecord, CriticalSearch, NewtonConfig, RhoAttractor, SeedFailure, SpectralReport,
};
pub use eigen::{eigendecompose, Eigen};
pub use field::{eigen_condition_field, EigenField, FieldCell, GridSpec};
pub use flow::{flow_velocity, integrate_flow, FlowKind, FlowPath, StepControl};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("matrix is not symmetric (max |a_ij - a_ji| = {0:e})")]
    Asymmetric(f64),
    #[error("matrix has non-finite entries")]
    NonFinite,
    #[error("Jacobi iteration did not converge in {0} sweeps")]
    NoConvergence(usize),
    #[error("objective `{0}` provides no Hessian")]
    NoHessian(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
}
