//! Analytic objectives with exact gradients and Hessians.
//!
//! Every objective evaluates its derivatives in closed form; finite differences
//! ([`finite_diff_check`]) exist only to cross-check those closed forms.

mod beale;
mod finite_diff;
mod quadratic;
mod stochastic;
mod toy_nn;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{Matrix, Point};
use crate::scalar::Scalar;

pub use beale::{eval_beale, Beale};
pub use finite_diff::{finite_diff_check, FdComparison, FdPath, FdReport};
pub use quadratic::{eval_quadratic_saddle, Quadratic, QuadraticSaddle};
pub use stochastic::{BatchSampler, Sample, StochasticObjective};
pub use toy_nn::{eval_toy_nn_expected, eval_toy_nn_sample, ToyNn, TOY_NN_LABELS};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ObjectiveError {
    #[error("point has dimension {got}, objective expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("point has non-finite coordinates")]
    InvalidPoint,
    #[error("label {0} is not in the sample space")]
    InvalidSample(f64),
    #[error("unknown objective id `{0}`")]
    UnknownObjective(String),
    #[error("finite-difference step {0} is degenerate at this point")]
    DegenerateStep(f64),
}

/// Loss value, gradient and (optionally) Hessian at one point.
#[derive(Clone, Debug, PartialEq)]
pub struct ObjectiveEval<T> {
    pub value: T,
    pub gradient: Vec<T>,
    pub hessian: Option<Matrix<T>>,
}

/// A smooth deterministic loss `ℓ(w)`.
pub trait Objective<T: Scalar>: Send + Sync {
    fn name(&self) -> &str;

    fn dim(&self) -> usize;

    fn value(&self, w: &[T]) -> T;

    fn gradient_into(&self, w: &[T], out: &mut [T]);

    fn hessian(&self, w: &[T]) -> Option<Matrix<T>>;

    fn gradient(&self, w: &[T]) -> Vec<T> {
        let mut g = vec![T::zero(); w.len()];
        self.gradient_into(w, &mut g);
        g
    }

    /// Validated full evaluation.
    fn evaluate(&self, p: &Point<T>) -> Result<ObjectiveEval<T>, ObjectiveError> {
        check_point(self.dim(), p)?;
        let w = p.as_slice();
        Ok(ObjectiveEval { value: self.value(w), gradient: self.gradient(w), hessian: self.hessian(w) })
    }
}

pub(crate) fn check_point<T: Scalar>(dim: usize, p: &Point<T>) -> Result<(), ObjectiveError> {
    if p.dim() != dim {
        return Err(ObjectiveError::DimensionMismatch { expected: dim, got: p.dim() });
    }
    if !p.is_finite() {
        return Err(ObjectiveError::InvalidPoint);
    }
    Ok(())
}

/// String ids under which the built-in objectives are addressable from configs and the CLI.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveId {
    Beale,
    QuadraticSaddle,
    ToyNn,
}

impl ObjectiveId {
    pub const ALL: [ObjectiveId; 3] = [Self::Beale, Self::QuadraticSaddle, Self::ToyNn];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Beale => "beale",
            Self::QuadraticSaddle => "quadratic_saddle",
            Self::ToyNn => "toy_nn",
        }
    }

    /// The deterministic objective; for `toy_nn` this is the expected loss.
    pub fn build<T: Scalar>(self) -> Box<dyn Objective<T>> {
        match self {
            Self::Beale => Box::new(Beale),
            Self::QuadraticSaddle => Box::new(QuadraticSaddle),
            Self::ToyNn => Box::new(ToyNn::default()),
        }
    }
}

impl fmt::Display for ObjectiveId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ObjectiveId {
    type Err = ObjectiveError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL.into_iter().find(|id| id.as_str() == s).ok_or_else(|| ObjectiveError::UnknownObjective(s.to_owned()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_round_trip() {
        for id in ObjectiveId::ALL {
            assert_eq!(id.as_str().parse::<ObjectiveId>().unwrap(), id);
            assert_eq!(id.build::<f64>().dim(), 2);
        }
        assert!(matches!("rosenbrock".parse::<ObjectiveId>(), Err(ObjectiveError::UnknownObjective(_))));
    }

    #[test]
    fn evaluate_rejects_bad_points() {
        let obj = ObjectiveId::Beale.build::<f64>();
        assert_eq!(
            obj.evaluate(&Point::new(vec![1.0])),
            Err(ObjectiveError::DimensionMismatch { expected: 2, got: 1 })
        );
        assert_eq!(obj.evaluate(&Point::new(vec![f64::NAN, 1.0])), Err(ObjectiveError::InvalidPoint));
    }
}
