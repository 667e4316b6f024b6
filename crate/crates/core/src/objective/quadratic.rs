use crate::linalg::{Matrix, Point};
use crate::objective::{Objective, ObjectiveError, ObjectiveEval};
use crate::scalar::Scalar;

/// `f(x, y) = x² − y²`, index-one saddle at the origin with Hessian `diag(2, −2)`.
#[derive(Clone, Copy, Debug, Default)]
pub struct QuadraticSaddle;

impl<T: Scalar> Objective<T> for QuadraticSaddle {
    fn name(&self) -> &str {
        "quadratic_saddle"
    }

    fn dim(&self) -> usize {
        2
    }

    fn value(&self, w: &[T]) -> T {
        w[0] * w[0] - w[1] * w[1]
    }

    fn gradient_into(&self, w: &[T], out: &mut [T]) {
        let two = T::of(2.0);
        out[0] = two * w[0];
        out[1] = -two * w[1];
    }

    fn hessian(&self, _w: &[T]) -> Option<Matrix<T>> {
        Some(Matrix::from_diag(&[T::of(2.0), T::of(-2.0)]))
    }
}

pub fn eval_quadratic_saddle<T: Scalar>(p: &Point<T>) -> Result<ObjectiveEval<T>, ObjectiveError> {
    QuadraticSaddle.evaluate(p)
}

/// General quadratic `ℓ(w) = ℓ₀ + ½ (w − d)ᵀ H (w − d)` with constant symmetric `H`.
#[derive(Clone, Debug)]
pub struct Quadratic<T> {
    center: Vec<T>,
    hessian: Matrix<T>,
    offset: T,
}

impl<T: Scalar> Quadratic<T> {
    pub fn new(center: Vec<T>, hessian: Matrix<T>, offset: T) -> Self {
        assert_eq!(center.len(), hessian.dim(), "center and Hessian dimensions differ");
        Self { center, hessian, offset }
    }

    pub fn center(&self) -> &[T] {
        &self.center
    }

    pub fn hessian_matrix(&self) -> &Matrix<T> {
        &self.hessian
    }
}

impl<T: Scalar> Objective<T> for Quadratic<T> {
    fn name(&self) -> &str {
        "quadratic"
    }

    fn dim(&self) -> usize {
        self.center.len()
    }

    fn value(&self, w: &[T]) -> T {
        let d: Vec<T> = w.iter().zip(&self.center).map(|(&a, &b)| a - b).collect();
        let hd = self.hessian.matvec(&d);
        self.offset + T::of(0.5) * crate::linalg::dot(&d, &hd)
    }

    fn gradient_into(&self, w: &[T], out: &mut [T]) {
        let n = self.center.len();
        for (i, o) in out.iter_mut().enumerate().take(n) {
            *o = (0..n).map(|j| self.hessian[(i, j)] * (w[j] - self.center[j])).sum();
        }
    }

    fn hessian(&self, _w: &[T]) -> Option<Matrix<T>> {
        Some(self.hessian.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn saddle_origin() {
        let e = eval_quadratic_saddle(&Point::new(vec![0.0, 0.0])).unwrap();
        assert_eq!(e.value, 0.0);
        assert_eq!(e.gradient, vec![0.0, 0.0]);
    }

    #[test]
    fn saddle_gradient_formula() {
        let e = eval_quadratic_saddle(&Point::new(vec![-3.0, -0.01])).unwrap();
        assert_eq!(e.gradient, vec![-6.0, 0.02]);
        assert_eq!(e.hessian.unwrap(), Matrix::from_diag(&[2.0, -2.0]));
    }

    #[test]
    fn general_quadratic_matches_saddle() {
        let q = Quadratic::new(vec![0.0, 0.0], Matrix::from_diag(&[2.0, -2.0]), 0.0);
        let w = [0.7, -1.3];
        assert_eq!(q.value(&w), Objective::<f64>::value(&QuadraticSaddle, &w));
        assert_eq!(q.gradient(&w), Objective::<f64>::gradient(&QuadraticSaddle, &w));
    }
}
