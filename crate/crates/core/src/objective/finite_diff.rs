//! Central-difference oracle for analytic derivatives.

use crate::linalg::Point;
use crate::objective::{check_point, Objective, ObjectiveError};
use crate::scalar::Scalar;

/// Scale below which the comparison switches from relative to absolute error.
pub const ABS_FLOOR: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FdPath {
    /// `max |analytic − numeric| / max |analytic|`
    Relative,
    /// `max |analytic − numeric|`; taken when the analytic quantity is below [`ABS_FLOOR`].
    Absolute,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FdComparison {
    pub error: f64,
    pub path: FdPath,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FdReport {
    pub gradient: FdComparison,
    /// `None` when the objective has no Hessian.
    pub hessian: Option<FdComparison>,
}

fn compare(analytic: &[f64], numeric: &[f64]) -> FdComparison {
    let scale = analytic.iter().fold(0.0_f64, |m, a| m.max(a.abs()));
    let diff = analytic.iter().zip(numeric).fold(0.0_f64, |m, (a, n)| m.max((a - n).abs()));
    if scale > ABS_FLOOR {
        FdComparison { error: diff / scale, path: FdPath::Relative }
    } else {
        FdComparison { error: diff, path: FdPath::Absolute }
    }
}

/// Compares the analytic gradient against central differences of the value, and the
/// analytic Hessian against central differences of the analytic gradient.
pub fn finite_diff_check<T: Scalar, O: Objective<T> + ?Sized>(
    obj: &O,
    p: &Point<T>,
    h: T,
) -> Result<FdReport, ObjectiveError> {
    check_point(obj.dim(), p)?;
    if !(h > T::zero()) || !h.is_finite() {
        return Err(ObjectiveError::DegenerateStep(h.as_f64()));
    }
    let n = p.dim();
    let w = p.as_slice();
    for &x in w {
        if x + h == x || x - h == x {
            return Err(ObjectiveError::DegenerateStep(h.as_f64()));
        }
    }

    let two_h = T::of(2.0) * h;
    let mut plus = w.to_vec();
    let mut minus = w.to_vec();
    let mut fd_grad = Vec::with_capacity(n);
    let mut fd_hess = Vec::with_capacity(n * n);
    let mut gp = vec![T::zero(); n];
    let mut gm = vec![T::zero(); n];
    for j in 0..n {
        plus[j] = w[j] + h;
        minus[j] = w[j] - h;
        fd_grad.push(((obj.value(&plus) - obj.value(&minus)) / two_h).as_f64());
        obj.gradient_into(&plus, &mut gp);
        obj.gradient_into(&minus, &mut gm);
        // column j of the Hessian
        fd_hess.extend(gp.iter().zip(&gm).map(|(&a, &b)| ((a - b) / two_h).as_f64()));
        plus[j] = w[j];
        minus[j] = w[j];
    }

    let analytic_grad: Vec<f64> = obj.gradient(w).iter().map(|g| g.as_f64()).collect();
    let gradient = compare(&analytic_grad, &fd_grad);
    let hessian = obj.hessian(w).map(|hm| {
        // fd_hess is column-major; read the analytic matrix the same way.
        let analytic: Vec<f64> =
            (0..n).flat_map(|j| (0..n).map(move |i| (i, j))).map(|(i, j)| hm[(i, j)].as_f64()).collect();
        compare(&analytic, &fd_hess)
    });
    Ok(FdReport { gradient, hessian })
}
