use serde::{Deserialize, Serialize};

use crate::diffusion::DiffusionError;
use crate::linalg::{Matrix, Point};
use crate::scalar::Scalar;
use crate::spectral::CriticalPoint;

const HYPERBOLIC_CUTOFF: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentumParams<T> {
    pub gamma: T,
    pub tau: T,
}

impl<T: Scalar> MomentumParams<T> {
    /// `φ = (1 − γ)/η`.
    pub fn friction(&self, eta: T) -> T {
        (T::one() - self.gamma) / eta
    }

    /// `M = η/(1 − τ)`.
    pub fn mass(&self, eta: T) -> T {
        eta / (T::one() - self.tau)
    }
}

/// Quadratic model of the loss and gradient noise at a hyperbolic saddle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SaddleModel<T> {
    pub eigenvalues: Vec<T>,
    pub eigenvectors: Matrix<T>,
    pub eta: T,
    pub batch_size: T,
    pub rho: T,
    pub momentum: Option<MomentumParams<T>>,
}

impl<T: Scalar> SaddleModel<T> {
    pub fn new(
        eigenvalues: Vec<T>,
        eigenvectors: Matrix<T>,
        eta: T,
        batch_size: T,
        rho: T,
    ) -> Result<Self, DiffusionError> {
        let m = Self { eigenvalues, eigenvectors, eta, batch_size, rho, momentum: None };
        m.validate()?;
        Ok(m)
    }

    /// Model with `Q = I`.
    pub fn diagonal(eigenvalues: Vec<T>, eta: T, batch_size: T, rho: T) -> Result<Self, DiffusionError> {
        let n = eigenvalues.len();
        Self::new(eigenvalues, Matrix::identity(n), eta, batch_size, rho)
    }

    pub fn from_critical_point(cp: &CriticalPoint<T>, eta: T, batch_size: T, rho: T) -> Result<Self, DiffusionError> {
        Self::new(cp.spectral.eigenvalues.clone(), cp.spectral.eigenvectors.clone(), eta, batch_size, rho)
    }

    pub fn with_momentum(mut self, gamma: T, tau: T) -> Result<Self, DiffusionError> {
        self.momentum = Some(MomentumParams { gamma, tau });
        self.validate()?;
        Ok(self)
    }

    pub fn with_rho(&self, rho: T) -> Result<Self, DiffusionError> {
        let mut m = self.clone();
        m.rho = rho;
        m.validate()?;
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn validate(&self) -> Result<(), DiffusionError> {
        let bad = |msg: String| Err(DiffusionError::InvalidModel(msg));
        let n = self.eigenvalues.len();
        if n == 0 || self.eigenvectors.dim() != n {
            return bad(format!("{n} eigenvalues with a {0}x{0} eigenvector matrix", self.eigenvectors.dim()));
        }
        if !self.eigenvalues.iter().any(|&l| l < T::zero()) {
            return bad("no negative eigenvalue, not a saddle".to_owned());
        }
        if let Some(l) = self.eigenvalues.iter().find(|l| !l.is_finite() || l.abs() <= T::of(HYPERBOLIC_CUTOFF)) {
            return bad(format!("eigenvalue {l} is not hyperbolic"));
        }
        let qtq = self.eigenvectors.transpose().matmul(&self.eigenvectors);
        if !(qtq.sub(&Matrix::identity(n)).max_abs() < T::of(1e-6)) {
            return bad("eigenvectors are not orthonormal".to_owned());
        }
        if !(self.eta > T::zero()) || !self.eta.is_finite() {
            return bad(format!("eta must be positive, got {}", self.eta));
        }
        if !(self.batch_size >= T::one()) || !self.batch_size.is_finite() {
            return bad(format!("batch size must be at least 1, got {}", self.batch_size));
        }
        if !(self.rho >= T::zero()) || !self.rho.is_finite() {
            return bad(format!("rho must be nonnegative, got {}", self.rho));
        }
        if let Some(mp) = self.momentum {
            let unit = |v: T| v >= T::zero() && v < T::one();
            if !unit(mp.gamma) || !unit(mp.tau) {
                return bad(format!("momentum needs gamma, tau in [0, 1), got {}, {}", mp.gamma, mp.tau));
            }
        }
        Ok(())
    }

    /// OU rates `k_j = λ_j(1 + ρλ_j)²` of the linearized SAM drift.
    pub fn drift_rates(&self) -> Vec<T> {
        self.eigenvalues
            .iter()
            .map(|&l| {
                let s = T::one() + self.rho * l;
                l * s * s
            })
            .collect()
    }

    /// Per-direction diffusion coefficients `D_j = η|λ_j|/(2B)`.
    pub fn diffusion_coefficients(&self) -> Vec<T> {
        self.eigenvalues.iter().map(|l| self.eta * l.abs() / (T::of(2.0) * self.batch_size)).collect()
    }

    /// `Q diag(v) Qᵀ`.
    pub(crate) fn in_original_coordinates(&self, diag: &[T]) -> Matrix<T> {
        let q = &self.eigenvectors;
        q.matmul(&Matrix::from_diag(diag)).matmul(&q.transpose())
    }

    pub(crate) fn to_eigen(&self, w: &[T]) -> Vec<T> {
        self.eigenvectors.transpose().matvec(w)
    }

    pub(crate) fn eigen_to_original(&self, z: &[T]) -> Vec<T> {
        self.eigenvectors.matvec(z)
    }
}

/// Linearized SAM drift `−Q diag(λ_j(1+ρλ_j)²) Qᵀ · offset`.
pub fn sde_drift<T: Scalar>(offset: &Point<T>, model: &SaddleModel<T>) -> Result<Vec<T>, DiffusionError> {
    if offset.dim() != model.dim() {
        return Err(DiffusionError::InvalidArgument(format!(
            "offset has dimension {}, model {}",
            offset.dim(),
            model.dim()
        )));
    }
    let z = model.to_eigen(offset.as_slice());
    let scaled: Vec<T> = z.iter().zip(model.drift_rates()).map(|(&zi, k)| -k * zi).collect();
    Ok(model.eigen_to_original(&scaled))
}

/// `Q diag(η|λ_j|/(2B)) Qᵀ`.
pub fn diffusion_matrix<T: Scalar>(model: &SaddleModel<T>) -> Matrix<T> {
    model.in_original_coordinates(&model.diffusion_coefficients())
}
