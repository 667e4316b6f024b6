use crate::linalg::{Matrix, Point};
use crate::objective::{Objective, ObjectiveError, ObjectiveEval};
use crate::scalar::Scalar;

const COEFFS: [f64; 3] = [1.5, 2.25, 2.625];

/// `f(x, y) = (1.5 − x + xy)² + (2.25 − x + xy²)² + (2.625 − x + xy³)²`.
///
/// Global minimum `f(3, 0.5) = 0`; single saddle at `(0, 1)`.
#[derive(Clone, Copy, Debug, Default)]
pub struct Beale;

impl<T: Scalar> Objective<T> for Beale {
    fn name(&self) -> &str {
        "beale"
    }

    fn dim(&self) -> usize {
        2
    }

    fn value(&self, w: &[T]) -> T {
        let (x, y) = (w[0], w[1]);
        let mut yi = T::one();
        let mut acc = T::zero();
        for c in COEFFS {
            yi *= y;
            let r = T::of(c) - x + x * yi;
            acc += r * r;
        }
        acc
    }

    fn gradient_into(&self, w: &[T], out: &mut [T]) {
        let (x, y) = (w[0], w[1]);
        let two = T::of(2.0);
        let (mut gx, mut gy) = (T::zero(), T::zero());
        // y^(i-1) and y^i
        let mut ypm = T::one();
        for (k, c) in COEFFS.iter().enumerate() {
            let i = T::of((k + 1) as f64);
            let yi = ypm * y;
            let r = T::of(*c) - x + x * yi;
            gx += two * r * (yi - T::one());
            gy += two * r * i * x * ypm;
            ypm = yi;
        }
        out[0] = gx;
        out[1] = gy;
    }

    fn hessian(&self, w: &[T]) -> Option<Matrix<T>> {
        let (x, y) = (w[0], w[1]);
        let two = T::of(2.0);
        let (mut hxx, mut hxy, mut hyy) = (T::zero(), T::zero(), T::zero());
        let mut ypm2 = T::zero(); // y^(i-2), zero for i = 1
        let mut ypm = T::one();
        for (k, c) in COEFFS.iter().enumerate() {
            let i = T::of((k + 1) as f64);
            let yi = ypm * y;
            let r = T::of(*c) - x + x * yi;
            let rx = yi - T::one();
            let ry = i * x * ypm;
            let rxy = i * ypm;
            let ryy = i * (i - T::one()) * x * ypm2;
            hxx += two * rx * rx;
            hxy += two * (rx * ry + r * rxy);
            hyy += two * (ry * ry + r * ryy);
            ypm2 = ypm;
            ypm = yi;
        }
        Some(Matrix::from_rows(&[vec![hxx, hxy], vec![hxy, hyy]]))
    }
}

pub fn eval_beale<T: Scalar>(p: &Point<T>) -> Result<ObjectiveEval<T>, ObjectiveError> {
    Beale.evaluate(p)
}
