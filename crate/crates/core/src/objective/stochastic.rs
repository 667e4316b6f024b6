use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

use crate::linalg::{Matrix, Point};
use crate::objective::{check_point, ObjectiveError, ObjectiveEval};
use crate::scalar::Scalar;

/// One labeled training sample and its probability under the data distribution.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sample<T> {
    pub label: T,
    pub probability: T,
}

/// A loss defined per sample over a finite sample space.
///
/// The expected loss is the probability-weighted sum of per-sample losses.
pub trait StochasticObjective<T: Scalar>: Send + Sync {
    fn dim(&self) -> usize;

    fn samples(&self) -> &[Sample<T>];

    fn sample_value(&self, w: &[T], index: usize) -> T;

    fn sample_gradient_into(&self, w: &[T], index: usize, out: &mut [T]);

    fn sample_hessian(&self, w: &[T], index: usize) -> Option<Matrix<T>>;

    fn sample_eval(&self, p: &Point<T>, index: usize) -> Result<ObjectiveEval<T>, ObjectiveError> {
        check_point(self.dim(), p)?;
        let w = p.as_slice();
        let mut g = vec![T::zero(); w.len()];
        self.sample_gradient_into(w, index, &mut g);
        Ok(ObjectiveEval { value: self.sample_value(w, index), gradient: g, hessian: self.sample_hessian(w, index) })
    }

    /// Expected loss by enumeration of the sample space.
    fn expected_eval(&self, p: &Point<T>) -> Result<ObjectiveEval<T>, ObjectiveError> {
        check_point(self.dim(), p)?;
        let n = self.dim();
        let mut value = T::zero();
        let mut gradient = vec![T::zero(); n];
        let mut hessian = Some(Matrix::zeros(n));
        for (i, s) in self.samples().iter().enumerate() {
            let e = self.sample_eval(p, i)?;
            value += s.probability * e.value;
            for (g, gi) in gradient.iter_mut().zip(&e.gradient) {
                *g += s.probability * *gi;
            }
            hessian = match (hessian, e.hessian) {
                (Some(mut acc), Some(h)) => {
                    for r in 0..n {
                        for c in 0..n {
                            acc[(r, c)] += s.probability * h[(r, c)];
                        }
                    }
                    Some(acc)
                }
                _ => None,
            };
        }
        Ok(ObjectiveEval { value, gradient, hessian })
    }

    fn expected_value(&self, w: &[T]) -> T {
        self.samples().iter().enumerate().map(|(i, s)| s.probability * self.sample_value(w, i)).sum()
    }
}

/// Draws mini-batches of sample indices, with replacement, from a sample space.
#[derive(Clone, Debug)]
pub struct BatchSampler {
    index: WeightedIndex<f64>,
}

impl BatchSampler {
    pub fn new<T: Scalar>(samples: &[Sample<T>]) -> Self {
        let weights: Vec<f64> = samples.iter().map(|s| s.probability.as_f64()).collect();
        let index = WeightedIndex::new(weights).expect("sample probabilities must be positive and finite");
        Self { index }
    }

    pub fn draw<R: Rng + ?Sized>(&self, batch_size: usize, rng: &mut R) -> Vec<usize> {
        (0..batch_size).map(|_| self.index.sample(rng)).collect()
    }

    pub fn draw_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [usize]) {
        for slot in out {
            *slot = self.index.sample(rng);
        }
    }
}
