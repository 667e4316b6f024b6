use serde::{Deserialize, Serialize};

use crate::linalg::{all_finite, norm, Point};
use crate::objective::{check_point, Objective};
use crate::scalar::Scalar;
use crate::spectral::SpectralError;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum FlowKind<T> {
    /// `dw/dt = −∇ℓ(w)`.
    Gd,
    /// `dw/dt = −∇ℓ(w + ρ∇ℓ(w))`.
    Sam { rho: T },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepControl<T> {
    pub h: T,
    /// Truncate once `‖w‖` exceeds this.
    pub divergence_threshold: T,
    /// Keep every `record_every`-th point (the endpoint is always kept).
    pub record_every: usize,
}

impl<T: Scalar> Default for StepControl<T> {
    fn default() -> Self {
        Self { h: T::of(1e-3), divergence_threshold: T::of(1e8), record_every: 1 }
    }
}

impl<T: Scalar> StepControl<T> {
    pub fn with_h(mut self, h: T) -> Self {
        self.h = h;
        self
    }

    pub fn with_record_every(mut self, k: usize) -> Self {
        self.record_every = k;
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowPath<T> {
    pub kind: FlowKind<T>,
    pub times: Vec<T>,
    pub points: Vec<Point<T>>,
    /// Integration stopped early on a non-finite or out-of-bounds state.
    pub diverged: bool,
}

impl<T: Scalar> FlowPath<T> {
    pub fn endpoint(&self) -> &Point<T> {
        self.points.last().expect("a flow path holds at least its start")
    }

    pub fn end_time(&self) -> T {
        *self.times.last().expect("a flow path holds at least its start")
    }
}

pub(crate) fn vector_field<T: Scalar, O: Objective<T> + ?Sized>(
    obj: &O,
    kind: FlowKind<T>,
    w: &[T],
    scratch: &mut [T],
    out: &mut [T],
) {
    match kind {
        FlowKind::Gd => obj.gradient_into(w, out),
        FlowKind::Sam { rho } => {
            obj.gradient_into(w, out);
            for ((s, &wi), &gi) in scratch.iter_mut().zip(w).zip(out.iter()) {
                *s = wi + rho * gi;
            }
            obj.gradient_into(scratch, out);
        }
    }
    for o in out.iter_mut() {
        *o = -*o;
    }
}

/// The flow velocity `dw/dt` at `w`.
pub fn flow_velocity<T: Scalar, O: Objective<T> + ?Sized>(obj: &O, kind: FlowKind<T>, w: &[T]) -> Vec<T> {
    let mut scratch = vec![T::zero(); w.len()];
    let mut out = vec![T::zero(); w.len()];
    vector_field(obj, kind, w, &mut scratch, &mut out);
    out
}

/// Classical fourth-order Runge–Kutta with fixed step; holds its buffers.
pub(crate) struct Rk4<T> {
    k: [Vec<T>; 4],
    tmp: Vec<T>,
    scratch: Vec<T>,
}

impl<T: Scalar> Rk4<T> {
    pub(crate) fn new(n: usize) -> Self {
        Self { k: std::array::from_fn(|_| vec![T::zero(); n]), tmp: vec![T::zero(); n], scratch: vec![T::zero(); n] }
    }

    pub(crate) fn step<O: Objective<T> + ?Sized>(&mut self, obj: &O, kind: FlowKind<T>, w: &mut [T], h: T) {
        let half = h * T::of(0.5);
        let [k1, k2, k3, k4] = &mut self.k;
        vector_field(obj, kind, w, &mut self.scratch, k1);
        for ((t, &wi), &ki) in self.tmp.iter_mut().zip(w.iter()).zip(k1.iter()) {
            *t = wi + half * ki;
        }
        vector_field(obj, kind, &self.tmp, &mut self.scratch, k2);
        for ((t, &wi), &ki) in self.tmp.iter_mut().zip(w.iter()).zip(k2.iter()) {
            *t = wi + half * ki;
        }
        vector_field(obj, kind, &self.tmp, &mut self.scratch, k3);
        for ((t, &wi), &ki) in self.tmp.iter_mut().zip(w.iter()).zip(k3.iter()) {
            *t = wi + h * ki;
        }
        vector_field(obj, kind, &self.tmp, &mut self.scratch, k4);
        let sixth = h / T::of(6.0);
        for i in 0..w.len() {
            w[i] += sixth * (k1[i] + T::of(2.0) * (k2[i] + k3[i]) + k4[i]);
        }
    }
}

/// Number of steps and the length of the last (possibly shortened) step.
pub(crate) fn step_plan<T: Scalar>(t_end: T, h: T) -> (usize, T) {
    let n = (t_end / h).ceil().to_usize().unwrap_or(usize::MAX).max(1);
    let last = t_end - h * T::of((n - 1) as f64);
    if last <= T::zero() {
        (n - 1, h)
    } else {
        (n, last)
    }
}

pub(crate) fn check_control<T: Scalar>(t_end: T, control: &StepControl<T>) -> Result<(), SpectralError> {
    if !(t_end > T::zero()) || !t_end.is_finite() {
        return Err(SpectralError::InvalidArgument(format!("t_end must be positive, got {t_end}")));
    }
    if !(control.h > T::zero()) || !control.h.is_finite() {
        return Err(SpectralError::InvalidArgument(format!("step h must be positive, got {}", control.h)));
    }
    if control.record_every == 0 {
        return Err(SpectralError::InvalidArgument("record_every must be at least 1".to_owned()));
    }
    Ok(())
}

/// Integrates the GD or SAM gradient flow from `w0` up to `t_end`.
pub fn integrate_flow<T: Scalar, O: Objective<T> + ?Sized>(
    obj: &O,
    w0: &Point<T>,
    kind: FlowKind<T>,
    t_end: T,
    control: &StepControl<T>,
) -> Result<FlowPath<T>, SpectralError> {
    check_point(obj.dim(), w0)?;
    check_control(t_end, control)?;
    let (n_steps, last_h) = step_plan(t_end, control.h);
    let mut w = w0.as_slice().to_vec();
    let mut rk = Rk4::new(w.len());
    let mut path = FlowPath { kind, times: vec![T::zero()], points: vec![w0.clone()], diverged: false };
    for i in 0..n_steps {
        let h = if i + 1 == n_steps { last_h } else { control.h };
        rk.step(obj, kind, &mut w, h);
        let t = if i + 1 == n_steps { t_end } else { control.h * T::of((i + 1) as f64) };
        if !all_finite(&w) || norm(&w) > control.divergence_threshold {
            path.diverged = true;
            break;
        }
        if (i + 1) % control.record_every == 0 || i + 1 == n_steps {
            path.times.push(t);
            path.points.push(Point::new(w.clone()));
        }
    }
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::QuadraticSaddle;

    fn pt(a: f64, b: f64) -> Point<f64> {
        Point::new(vec![a, b])
    }

    #[test]
    fn gd_flow_matches_exponential_on_stable_axis() {
        let path =
            integrate_flow(&QuadraticSaddle, &pt(-3.0, 0.0), FlowKind::Gd, 1.0, &StepControl::default()).unwrap();
        let exact = -3.0 * (-2.0f64).exp();
        assert!(((path.endpoint()[0] - exact) / exact).abs() < 1e-6);
        assert_eq!(path.endpoint()[1], 0.0);
        assert_eq!(path.end_time(), 1.0);
        assert_eq!(path.points.len(), 1001);
    }

    #[test]
    fn gd_flow_escapes() {
        let ctl = StepControl::default().with_record_every(100);
        let path = integrate_flow(&QuadraticSaddle, &pt(-3.0, 0.01), FlowKind::Gd, 5.0, &ctl).unwrap();
        let ys: Vec<f64> = path.points.iter().map(|p| p[1].abs()).collect();
        assert!(ys.windows(2).all(|w| w[1] > w[0]));
        assert!(ys.last().unwrap() > &100.0);
    }

    #[test]
    fn sam_flow_converges_to_saddle() {
        let ctl = StepControl::default().with_record_every(1000);
        let path = integrate_flow(&QuadraticSaddle, &pt(-3.0, -0.01), FlowKind::Sam { rho: 1.0 }, 10.0, &ctl).unwrap();
        assert!(path.endpoint().norm() < 1e-3);
        assert!(!path.diverged);
    }

    #[test]
    fn divergence_truncates() {
        let path =
            integrate_flow(&QuadraticSaddle, &pt(0.0, 1.0), FlowKind::Gd, 50.0, &StepControl::default()).unwrap();
        assert!(path.diverged);
        assert!(path.points.iter().all(|p| p.is_finite()));
        assert!(path.end_time() < 50.0);
    }

    #[test]
    fn partial_last_step_lands_on_t_end() {
        let ctl = StepControl::default().with_h(0.3);
        let path = integrate_flow(&QuadraticSaddle, &pt(1.0, 0.0), FlowKind::Gd, 1.0, &ctl).unwrap();
        assert_eq!(path.times.len(), 5);
        assert_eq!(path.end_time(), 1.0);
    }

    #[test]
    fn rejects_bad_horizon() {
        assert!(integrate_flow(&QuadraticSaddle, &pt(1.0, 0.0), FlowKind::Gd, 0.0, &StepControl::default()).is_err());
    }
}
