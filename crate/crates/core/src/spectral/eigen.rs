use crate::linalg::Matrix;
use crate::scalar::Scalar;
use crate::spectral::SpectralError;

const MAX_SWEEPS: usize = 100;

/// Eigenvalues in ascending order with matching orthonormal eigenvector columns.
#[derive(Clone, Debug, PartialEq)]
pub struct Eigen<T> {
    pub values: Vec<T>,
    pub vectors: Matrix<T>,
}

impl<T: Scalar> Eigen<T> {
    /// `Q diag(λ) Qᵀ`.
    pub fn reconstruct(&self) -> Matrix<T> {
        let n = self.values.len();
        let mut out = Matrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                let mut s = T::zero();
                for k in 0..n {
                    s += self.vectors[(i, k)] * self.values[k] * self.vectors[(j, k)];
                }
                out[(i, j)] = s;
            }
        }
        out
    }
}

fn off_diagonal_norm<T: Scalar>(a: &Matrix<T>) -> T {
    let n = a.dim();
    let mut s = T::zero();
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[(i, j)] * a[(i, j)];
            }
        }
    }
    s.sqrt()
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
///
/// Stops once the off-diagonal Frobenius norm falls below `1e-12·max(1, ‖H‖_F)`
/// (or a few ulps of `‖H‖_F` in single precision).
pub fn eigendecompose<T: Scalar>(h: &Matrix<T>) -> Result<Eigen<T>, SpectralError> {
    if !h.is_finite() {
        return Err(SpectralError::NonFinite);
    }
    let scale = T::one().max(h.max_abs());
    let asym = h.asymmetry();
    if asym > T::of(1e-9) * scale {
        return Err(SpectralError::Asymmetric(asym.as_f64()));
    }
    let n = h.dim();
    // Symmetrize so the rotations act on an exactly symmetric matrix.
    let mut a = Matrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            a[(i, j)] = (h[(i, j)] + h[(j, i)]) * T::of(0.5);
        }
    }
    let mut v = Matrix::identity(n);
    let rel = T::of(1e-12).max(T::epsilon() * T::of(8.0));
    let tol = rel * T::one().max(a.frobenius());

    let mut converged = off_diagonal_norm(&a) <= tol;
    let mut sweeps = 0;
    while !converged {
        if sweeps == MAX_SWEEPS {
            return Err(SpectralError::NoConvergence(MAX_SWEEPS));
        }
        sweeps += 1;
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == T::zero() {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (T::of(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[(k, p)], a[(k, q)]);
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[(p, k)], a[(q, k)]);
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                a[(p, q)] = T::zero();
                a[(q, p)] = T::zero();
                for k in 0..n {
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
        converged = off_diagonal_norm(&a) <= tol;
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].partial_cmp(&a[(j, j)]).expect("finite eigenvalues"));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let mut vectors = Matrix::zeros(n);
    for (col, &src) in order.iter().enumerate() {
        // Sign convention: the largest-magnitude component is positive.
        let mut pivot = 0;
        for k in 0..n {
            if v[(k, src)].abs() > v[(pivot, src)].abs() {
                pivot = k;
            }
        }
        let sign = if v[(pivot, src)] < T::zero() { -T::one() } else { T::one() };
        for k in 0..n {
            vectors[(k, col)] = sign * v[(k, src)];
        }
    }
    Ok(Eigen { values, vectors })
}
