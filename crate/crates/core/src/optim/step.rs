use rand::Rng;

use crate::linalg::{all_finite, dot, norm, Point};
use crate::objective::{check_point, BatchSampler, Objective, StochasticObjective};
use crate::optim::{Method, OptimConfig, OptimError, RhoMode};
use crate::scalar::Scalar;

/// Which gradient feeds the update (and the momentum buffer).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GradSource {
    /// `∇ℓ(w)`
    Plain,
    /// `∇ℓ(w_p)`
    Sam,
}

/// Ascent-perturbed point `w_p` for the configured radius mode.
///
/// For [`Method::Gd`] the perturbation is skipped and `w_p = w`.
pub fn perturbed_point<T: Scalar>(w: &[T], g: &[T], cfg: &OptimConfig<T>, out: &mut [T]) {
    out.copy_from_slice(w);
    if cfg.method == Method::Gd {
        return;
    }
    let scale = match cfg.rho_mode {
        RhoMode::Constant => cfg.rho,
        RhoMode::GradNormalized => {
            let n = norm(g);
            if n < cfg.grad_eps {
                return;
            }
            cfg.rho / n.max(cfg.grad_eps)
        }
    };
    for (o, &gi) in out.iter_mut().zip(g) {
        *o += scale * gi;
    }
}

/// Cosine between two gradients; `None` if either norm is below `grad_eps`.
pub fn grad_cosine<T: Scalar>(g1: &[T], g2: &[T], grad_eps: T) -> Option<T> {
    assert_eq!(g1.len(), g2.len(), "gradient dimensions differ");
    let (n1, n2) = (norm(g1), norm(g2));
    if n1 < grad_eps || n2 < grad_eps {
        return None;
    }
    Some((dot(g1, g2) / (n1 * n2)).max(-T::one()).min(T::one()))
}

fn finite_or<T: Scalar>(v: &[T], what: &'static str) -> Result<(), OptimError> {
    if all_finite(v) {
        Ok(())
    } else {
        Err(OptimError::Divergence(what))
    }
}

/// `w − η ∇ℓ(w)`
pub fn gd_step<T: Scalar, O: Objective<T> + ?Sized>(obj: &O, w: &Point<T>, eta: T) -> Result<Point<T>, OptimError> {
    check_point(obj.dim(), w)?;
    let g = obj.gradient(w.as_slice());
    finite_or(&g, "gradient")?;
    let next: Vec<T> = w.as_slice().iter().zip(&g).map(|(&wi, &gi)| wi - eta * gi).collect();
    finite_or(&next, "iterate")?;
    Ok(Point::new(next))
}

#[derive(Clone, Debug, PartialEq)]
pub struct SamStep<T> {
    pub w_p: Point<T>,
    pub w_next: Point<T>,
    pub gradient: Vec<T>,
    pub perturbed_gradient: Vec<T>,
}

/// One SAM update. `cfg.method` is ignored: the perturbation is always applied.
pub fn sam_step<T: Scalar, O: Objective<T> + ?Sized>(
    obj: &O,
    w: &Point<T>,
    cfg: &OptimConfig<T>,
) -> Result<SamStep<T>, OptimError> {
    cfg.validate()?;
    check_point(obj.dim(), w)?;
    let ws = w.as_slice();
    let g = obj.gradient(ws);
    finite_or(&g, "gradient")?;
    let sam_cfg = OptimConfig { method: Method::Sam, ..cfg.clone() };
    let mut wp = vec![T::zero(); ws.len()];
    perturbed_point(ws, &g, &sam_cfg, &mut wp);
    finite_or(&wp, "perturbed point")?;
    let gp = obj.gradient(&wp);
    finite_or(&gp, "perturbed gradient")?;
    let next: Vec<T> = ws.iter().zip(&gp).map(|(&wi, &gi)| wi - cfg.eta * gi).collect();
    finite_or(&next, "iterate")?;
    Ok(SamStep { w_p: Point::new(wp), w_next: Point::new(next), gradient: g, perturbed_gradient: gp })
}

/// Heavy-ball buffer `m_t = γ m_{t−1} + (1 − τ) g_t`, zero-initialized.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentumState<T> {
    pub m: Vec<T>,
}

impl<T: Scalar> MomentumState<T> {
    pub fn new(dim: usize) -> Self {
        Self { m: vec![T::zero(); dim] }
    }

    /// Friction `φ = (1 − γ)/dt` of the continuous-time limit with `dt = η`.
    pub fn friction(cfg: &OptimConfig<T>) -> T {
        (T::one() - cfg.gamma) / cfg.eta
    }

    /// Mass `M = dt/(1 − τ)` of the continuous-time limit with `dt = η`.
    pub fn mass(cfg: &OptimConfig<T>) -> T {
        cfg.eta / (T::one() - cfg.tau)
    }

    pub(crate) fn accumulate(&mut self, g: &[T], gamma: T, tau: T) {
        let damp = T::one() - tau;
        for (mi, &gi) in self.m.iter_mut().zip(g) {
            *mi = gamma * *mi + damp * gi;
        }
    }
}

pub fn momentum_step<T: Scalar, O: Objective<T> + ?Sized>(
    obj: &O,
    w: &Point<T>,
    state: &MomentumState<T>,
    cfg: &OptimConfig<T>,
    source: GradSource,
) -> Result<(Point<T>, MomentumState<T>), OptimError> {
    cfg.validate()?;
    check_point(obj.dim(), w)?;
    if state.m.len() != w.dim() {
        return Err(OptimError::DimensionMismatch { expected: w.dim(), got: state.m.len() });
    }
    let ws = w.as_slice();
    let g = match source {
        GradSource::Plain => obj.gradient(ws),
        GradSource::Sam => sam_step(obj, w, cfg)?.perturbed_gradient,
    };
    finite_or(&g, "gradient")?;
    let mut next_state = state.clone();
    next_state.accumulate(&g, cfg.gamma, cfg.tau);
    let next: Vec<T> = ws.iter().zip(&next_state.m).map(|(&wi, &mi)| wi - cfg.eta * mi).collect();
    finite_or(&next, "iterate")?;
    Ok((Point::new(next), next_state))
}

/// Mean of the per-sample gradients over `batch`.
pub fn batch_gradient<T: Scalar, S: StochasticObjective<T> + ?Sized>(obj: &S, w: &[T], batch: &[usize], out: &mut [T]) {
    let mut scratch = vec![T::zero(); w.len()];
    out.iter_mut().for_each(|o| *o = T::zero());
    for &i in batch {
        obj.sample_gradient_into(w, i, &mut scratch);
        for (o, &s) in out.iter_mut().zip(&scratch) {
            *o += s;
        }
    }
    let b = T::of(batch.len() as f64);
    out.iter_mut().for_each(|o| *o /= b);
}

#[derive(Clone, Debug, PartialEq)]
pub struct SgdStep<T> {
    pub w_p: Point<T>,
    pub w_next: Point<T>,
    /// Sample indices drawn for this step.
    pub batch: Vec<usize>,
    pub gradient: Vec<T>,
}

/// One mini-batch step (GD or SAM per `cfg.method`); the perturbation and the
/// update share the same batch.
pub fn sgd_step<T: Scalar, S: StochasticObjective<T> + ?Sized, R: Rng + ?Sized>(
    obj: &S,
    w: &Point<T>,
    cfg: &OptimConfig<T>,
    rng: &mut R,
) -> Result<SgdStep<T>, OptimError> {
    cfg.validate()?;
    check_point(obj.dim(), w)?;
    let sampler = BatchSampler::new(obj.samples());
    let batch = sampler.draw(cfg.batch_size, rng);
    let ws = w.as_slice();
    let mut g = vec![T::zero(); ws.len()];
    batch_gradient(obj, ws, &batch, &mut g);
    finite_or(&g, "gradient")?;
    let mut wp = vec![T::zero(); ws.len()];
    perturbed_point(ws, &g, cfg, &mut wp);
    let gp = match cfg.method {
        Method::Gd => g.clone(),
        Method::Sam => {
            let mut gp = vec![T::zero(); ws.len()];
            batch_gradient(obj, &wp, &batch, &mut gp);
            gp
        }
    };
    finite_or(&gp, "perturbed gradient")?;
    let next: Vec<T> = ws.iter().zip(&gp).map(|(&wi, &gi)| wi - cfg.eta * gi).collect();
    finite_or(&next, "iterate")?;
    Ok(SgdStep { w_p: Point::new(wp), w_next: Point::new(next), batch, gradient: g })
}
