//! One-neuron two-layer network with activation `x ↦ x²`, input fixed at 1 and
//! labels `{−1, +2}` drawn with probability ½ each, under squared error.
//!
//! With `u = w₂ w₁²` the per-sample loss is `(u − y)²` and the expected loss is
//! `u² − u + 2.5`: minima (2.25) on `w₂ w₁² = ½`, saddles (2.5) on `w₁ = 0`.

use crate::linalg::{Matrix, Point};
use crate::objective::{check_point, Objective, ObjectiveError, ObjectiveEval, Sample, StochasticObjective};
use crate::scalar::Scalar;

pub const TOY_NN_LABELS: [f64; 2] = [-1.0, 2.0];

#[derive(Clone, Debug)]
pub struct ToyNn<T> {
    samples: [Sample<T>; 2],
}

impl<T: Scalar> Default for ToyNn<T> {
    fn default() -> Self {
        let half = T::of(0.5);
        Self { samples: TOY_NN_LABELS.map(|y| Sample { label: T::of(y), probability: half }) }
    }
}

/// `u`, `∇u` and `∇²u` for `u = w₂ w₁²`.
fn activation_terms<T: Scalar>(w: &[T]) -> (T, [T; 2], [[T; 2]; 2]) {
    let (w1, w2) = (w[0], w[1]);
    let two = T::of(2.0);
    let u = w2 * w1 * w1;
    let du = [two * w1 * w2, w1 * w1];
    let d2u = [[two * w2, two * w1], [two * w1, T::zero()]];
    (u, du, d2u)
}

/// Gradient and Hessian of `φ(u)` given `φ'(u)` and `φ''(u)`.
fn chain<T: Scalar>(w: &[T], dphi: T, d2phi: T) -> ([T; 2], Matrix<T>) {
    let (_, du, d2u) = activation_terms(w);
    let g = [dphi * du[0], dphi * du[1]];
    let mut h = Matrix::zeros(2);
    for i in 0..2 {
        for j in 0..2 {
            h[(i, j)] = d2phi * du[i] * du[j] + dphi * d2u[i][j];
        }
    }
    (g, h)
}

impl<T: Scalar> ToyNn<T> {
    fn label_index(&self, label: T) -> Option<usize> {
        self.samples.iter().position(|s| s.label == label)
    }

    pub fn sample_eval_by_label(&self, p: &Point<T>, label: T) -> Result<ObjectiveEval<T>, ObjectiveError> {
        let index = self.label_index(label).ok_or_else(|| ObjectiveError::InvalidSample(label.as_f64()))?;
        StochasticObjective::sample_eval(self, p, index)
    }
}

/// Closed-form expected loss `u² − u + 2.5`.
impl<T: Scalar> Objective<T> for ToyNn<T> {
    fn name(&self) -> &str {
        "toy_nn"
    }

    fn dim(&self) -> usize {
        2
    }

    fn value(&self, w: &[T]) -> T {
        let (u, _, _) = activation_terms(w);
        u * u - u + T::of(2.5)
    }

    fn gradient_into(&self, w: &[T], out: &mut [T]) {
        let (u, du, _) = activation_terms(w);
        let dphi = T::of(2.0) * u - T::one();
        out[0] = dphi * du[0];
        out[1] = dphi * du[1];
    }

    fn hessian(&self, w: &[T]) -> Option<Matrix<T>> {
        let (u, _, _) = activation_terms(w);
        Some(chain(w, T::of(2.0) * u - T::one(), T::of(2.0)).1)
    }
}

impl<T: Scalar> StochasticObjective<T> for ToyNn<T> {
    fn dim(&self) -> usize {
        2
    }

    fn samples(&self) -> &[Sample<T>] {
        &self.samples
    }

    fn sample_value(&self, w: &[T], index: usize) -> T {
        let (u, _, _) = activation_terms(w);
        let r = u - self.samples[index].label;
        r * r
    }

    fn sample_gradient_into(&self, w: &[T], index: usize, out: &mut [T]) {
        let (u, du, _) = activation_terms(w);
        let dphi = T::of(2.0) * (u - self.samples[index].label);
        out[0] = dphi * du[0];
        out[1] = dphi * du[1];
    }

    fn sample_hessian(&self, w: &[T], index: usize) -> Option<Matrix<T>> {
        let (u, _, _) = activation_terms(w);
        let dphi = T::of(2.0) * (u - self.samples[index].label);
        Some(chain(w, dphi, T::of(2.0)).1)
    }
}

pub fn eval_toy_nn_expected<T: Scalar>(p: &Point<T>) -> Result<ObjectiveEval<T>, ObjectiveError> {
    check_point(2, p)?;
    ToyNn::default().evaluate(p)
}

pub fn eval_toy_nn_sample<T: Scalar>(p: &Point<T>, label: T) -> Result<ObjectiveEval<T>, ObjectiveError> {
    ToyNn::default().sample_eval_by_label(p, label)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(a: f64, b: f64) -> Point<f64> {
        Point::new(vec![a, b])
    }

    #[test]
    fn minima_and_saddle_line() {
        assert_eq!(eval_toy_nn_expected(&pt(1.0, 0.5)).unwrap().value, 2.25);
        for w2 in [0.0, 0.3, 1.0, 7.5] {
            let e = eval_toy_nn_expected(&pt(0.0, w2)).unwrap();
            assert_eq!(e.value, 2.5);
            assert_eq!(e.gradient, vec![0.0, 0.0]);
        }
        assert_eq!(eval_toy_nn_expected(&pt(1.0, 1.0)).unwrap().value, 2.5);
    }

    #[test]
    fn per_sample_losses() {
        let a = eval_toy_nn_sample(&pt(1.0, 1.0), 2.0).unwrap().value;
        let b = eval_toy_nn_sample(&pt(1.0, 1.0), -1.0).unwrap().value;
        assert_eq!(a, 1.0);
        assert_eq!(b, 4.0);
        assert_eq!(0.5 * (a + b), eval_toy_nn_expected(&pt(1.0, 1.0)).unwrap().value);
    }

    #[test]
    fn unknown_label_rejected() {
        assert_eq!(eval_toy_nn_sample(&pt(1.0, 1.0), 0.5), Err(ObjectiveError::InvalidSample(0.5)));
    }

    #[test]
    fn saddle_line_hessian_is_singular() {
        let h = eval_toy_nn_expected(&pt(0.0, 0.8)).unwrap().hessian.unwrap();
        assert_eq!(h, Matrix::from_rows(&[vec![-1.6, 0.0], vec![0.0, 0.0]]));
    }
}
