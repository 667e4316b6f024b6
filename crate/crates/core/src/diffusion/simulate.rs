use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diffusion::closed_form::{msd_momentum, sigma_sq};
use crate::diffusion::model::SaddleModel;
use crate::diffusion::DiffusionError;
use crate::scalar::Scalar;

const MAX_STEP_RATE: f64 = 0.1;
const Z95: f64 = 1.959963984540054;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig<T> {
    pub t_end: T,
    pub n_paths: usize,
    /// `None` uses [`default_dt`].
    pub dt: Option<T>,
    pub seed: u64,
    /// Simulate the second-order momentum system (needs `model.momentum`).
    pub with_momentum: bool,
    /// Report times are `t_end·i/checkpoints` for `i = 1..=checkpoints`.
    pub checkpoints: usize,
    /// Path groups for the batch-means confidence interval.
    pub n_groups: usize,
    /// Multiplies the noise amplitude; `0` removes diffusion.
    pub noise_scale: T,
    /// Each step's Brownian increment is the scaled sum of this many normal
    /// draws, so a run at `dt` with refinement `2r` sees exactly the Brownian
    /// path of a run at `dt/2` with refinement `r`.
    pub noise_refinement: usize,
}

impl<T: Scalar> SimulationConfig<T> {
    pub fn new(t_end: T, n_paths: usize, seed: u64) -> Self {
        Self {
            t_end,
            n_paths,
            dt: None,
            seed,
            with_momentum: false,
            checkpoints: 1,
            n_groups: 20,
            noise_scale: T::one(),
            noise_refinement: 1,
        }
    }

    pub fn with_dt(mut self, dt: T) -> Self {
        self.dt = Some(dt);
        self
    }

    pub fn with_checkpoints(mut self, n: usize) -> Self {
        self.checkpoints = n;
        self
    }
}

/// `min(1e-3, 0.01 / max_j |λ_j(1+ρλ_j)²|)`.
pub fn default_dt<T: Scalar>(model: &SaddleModel<T>) -> T {
    let kmax = model.drift_rates().iter().fold(T::zero(), |m, k| m.max(k.abs()));
    let cap = T::of(1e-3);
    if kmax == T::zero() {
        cap
    } else {
        cap.min(T::of(0.01) / kmax)
    }
}

/// Monte Carlo mean of `Δw_j²` along one eigendirection.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MsdEstimate<T> {
    pub direction: usize,
    pub mean: T,
    /// Standard error of the mean from path-group means.
    pub std_error: T,
    /// 95% normal-approximation half-width.
    pub ci_halfwidth: T,
    pub n_paths: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint<T> {
    pub t: T,
    pub estimates: Vec<MsdEstimate<T>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationResult<T> {
    pub dt: T,
    pub n_steps: usize,
    pub n_paths: usize,
    pub with_momentum: bool,
    pub checkpoints: Vec<Checkpoint<T>>,
}

impl<T: Scalar> SimulationResult<T> {
    pub fn final_estimates(&self) -> &[MsdEstimate<T>] {
        &self.checkpoints.last().expect("at least one checkpoint").estimates
    }

    /// One CSV row per checkpoint and direction, paired with the closed form
    /// (σ² for first-order runs, the momentum MSD for undamped momentum runs,
    /// NaN otherwise).
    pub fn rows(&self, model: &SaddleModel<T>) -> Vec<DiffusionRow> {
        let mut out = Vec::new();
        for cp in &self.checkpoints {
            for e in &cp.estimates {
                let l = model.eigenvalues[e.direction];
                let closed = if !self.with_momentum {
                    sigma_sq(cp.t, l, model.eta, model.batch_size, model.rho).map(|s| s.value.as_f64())
                } else {
                    match model.momentum {
                        Some(mp) if mp.tau == T::zero() => {
                            msd_momentum(cp.t, l, model.eta, model.batch_size, model.rho, mp.gamma)
                                .map(|m| m.value.as_f64())
                        }
                        _ => Ok(f64::NAN),
                    }
                };
                out.push(DiffusionRow {
                    t: cp.t.as_f64(),
                    direction: e.direction,
                    sigma_sq_closed: closed.unwrap_or(f64::NAN),
                    msd_mc: e.mean.as_f64(),
                    ci_halfwidth: e.ci_halfwidth.as_f64(),
                });
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiffusionRow {
    pub t: f64,
    pub direction: usize,
    pub sigma_sq_closed: f64,
    pub msd_mc: f64,
    pub ci_halfwidth: f64,
}

/// CSV `t,direction,sigma_sq_closed,msd_mc,ci_halfwidth`.
pub fn write_diffusion_csv<W: Write>(rows: &[DiffusionRow], out: W) -> csv::Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    for r in rows {
        wtr.serialize(r)?;
    }
    wtr.flush()?;
    Ok(())
}

fn check_rate<T: Scalar>(dt: T, rate: T) -> Result<(), DiffusionError> {
    let product = (dt * rate.abs()).as_f64();
    if product > MAX_STEP_RATE {
        return Err(DiffusionError::StepContract { dt: dt.as_f64(), rate: rate.abs().as_f64(), product });
    }
    Ok(())
}

/// Per-direction coefficients of one Euler–Maruyama step.
struct Stepper<T> {
    rates: Vec<T>,
    /// `noise_scale·√(2D_j)`; the momentum system divides by the mass.
    amplitude: Vec<T>,
    /// `(φ/M, 1/M)` for the momentum system.
    inertia: Option<(T, T)>,
}

/// Euler–Maruyama simulation of the linearized SDE from the saddle (zero
/// offset), in eigencoordinates where the directions decouple.
///
/// First order: `dz_j = −k_j z_j dt + √(η|λ_j|/B) dW_j`.
/// Momentum: `dz_j = v_j dt`, `M dv_j = (−φ v_j − k_j z_j) dt + √(η|λ_j|/B) dW_j`
/// with `φ = (1−γ)/η`, `M = η/(1−τ)`.
///
/// Path `i` draws from ChaCha8 keyed by `seed` on stream `i`, so two models
/// simulated with the same seed share their noise increments.
pub fn simulate_sde<T: Scalar>(
    model: &SaddleModel<T>,
    cfg: &SimulationConfig<T>,
) -> Result<SimulationResult<T>, DiffusionError> {
    model.validate()?;
    let invalid = |m: String| Err(DiffusionError::InvalidArgument(m));
    if !(cfg.t_end > T::zero()) || !cfg.t_end.is_finite() {
        return invalid(format!("t_end must be positive, got {}", cfg.t_end));
    }
    if cfg.n_paths < 100 {
        return invalid(format!("need at least 100 paths, got {}", cfg.n_paths));
    }
    if cfg.n_groups < 2 || cfg.n_groups > cfg.n_paths {
        return invalid(format!("group count {} must lie in [2, n_paths]", cfg.n_groups));
    }
    if cfg.noise_refinement == 0 {
        return invalid("noise refinement must be at least 1".to_owned());
    }
    if cfg.checkpoints == 0 {
        return invalid("need at least one checkpoint".to_owned());
    }
    if !(cfg.noise_scale >= T::zero()) {
        return invalid(format!("noise scale must be nonnegative, got {}", cfg.noise_scale));
    }
    let dt_req = cfg.dt.unwrap_or_else(|| default_dt(model));
    if !(dt_req > T::zero()) || !dt_req.is_finite() {
        return invalid(format!("dt must be positive, got {dt_req}"));
    }
    let n_steps = (cfg.t_end / dt_req).round().to_usize().unwrap_or(0).max(1);
    let dt = cfg.t_end / T::of(n_steps as f64);

    let rates = model.drift_rates();
    let two = T::of(2.0);
    let mut amplitude: Vec<T> =
        model.diffusion_coefficients().iter().map(|&d| cfg.noise_scale * (two * d).sqrt()).collect();
    let inertia = if cfg.with_momentum {
        let Some(mp) = model.momentum else {
            return invalid("momentum simulation needs gamma and tau on the model".to_owned());
        };
        let (phi, mass) = (mp.friction(model.eta), mp.mass(model.eta));
        check_rate(dt, phi / mass)?;
        for &k in &rates {
            check_rate(dt, (k.abs() / mass).sqrt())?;
        }
        for a in &mut amplitude {
            *a /= mass;
        }
        Some((phi / mass, T::one() / mass))
    } else {
        for &k in &rates {
            check_rate(dt, k)?;
        }
        None
    };
    let stepper = Stepper { rates, amplitude, inertia };

    let report_steps: Vec<usize> =
        (1..=cfg.checkpoints).map(|i| ((n_steps * i) as f64 / cfg.checkpoints as f64).round() as usize).collect();
    let n_dir = model.dim();
    let groups = cfg.n_groups;
    let refinement = cfg.noise_refinement;
    let sqrt_dt = (dt / T::of(refinement as f64)).sqrt();

    // Per group: sum over its paths of z_j² at each checkpoint.
    let group_sums: Vec<Vec<Vec<T>>> = (0..groups)
        .into_par_iter()
        .map(|g| {
            let lo = cfg.n_paths * g / groups;
            let hi = cfg.n_paths * (g + 1) / groups;
            let mut sums = vec![vec![T::zero(); n_dir]; report_steps.len()];
            let mut z = vec![T::zero(); n_dir];
            let mut v = vec![T::zero(); n_dir];
            let mut xi = vec![0.0f64; n_dir];
            for path in lo..hi {
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                rng.set_stream(path as u64);
                z.iter_mut().for_each(|x| *x = T::zero());
                v.iter_mut().for_each(|x| *x = T::zero());
                let mut next_report = 0;
                for step in 1..=n_steps {
                    xi.iter_mut().for_each(|x| *x = 0.0);
                    for _ in 0..refinement {
                        for x in xi.iter_mut() {
                            *x += rng.sample::<f64, _>(StandardNormal);
                        }
                    }
                    for j in 0..n_dir {
                        let noise = stepper.amplitude[j] * sqrt_dt * T::of(xi[j]);
                        match stepper.inertia {
                            None => {
                                let zj = z[j];
                                z[j] = zj - stepper.rates[j] * zj * dt + noise;
                            }
                            Some((damp, inv_mass)) => {
                                let (zj, vj) = (z[j], v[j]);
                                z[j] = zj + vj * dt;
                                v[j] = vj - (damp * vj + inv_mass * stepper.rates[j] * zj) * dt + noise;
                            }
                        }
                    }
                    while next_report < report_steps.len() && report_steps[next_report] == step {
                        for (s, &zj) in sums[next_report].iter_mut().zip(&z) {
                            *s += zj * zj;
                        }
                        next_report += 1;
                    }
                }
            }
            sums
        })
        .collect();

    let checkpoints = report_steps
        .iter()
        .enumerate()
        .map(|(c, &step)| {
            let estimates = (0..n_dir)
                .map(|j| {
                    let mut total = T::zero();
                    let means: Vec<T> = (0..groups)
                        .map(|g| {
                            let size = cfg.n_paths * (g + 1) / groups - cfg.n_paths * g / groups;
                            total += group_sums[g][c][j];
                            group_sums[g][c][j] / T::of(size as f64)
                        })
                        .collect();
                    let mean = total / T::of(cfg.n_paths as f64);
                    let gm = means.iter().copied().sum::<T>() / T::of(groups as f64);
                    let var = means.iter().map(|&m| (m - gm) * (m - gm)).sum::<T>() / T::of((groups - 1) as f64);
                    let std_error = (var / T::of(groups as f64)).sqrt();
                    MsdEstimate {
                        direction: j,
                        mean,
                        std_error,
                        ci_halfwidth: T::of(Z95) * std_error,
                        n_paths: cfg.n_paths,
                    }
                })
                .collect();
            Checkpoint { t: dt * T::of(step as f64), estimates }
        })
        .collect();

    Ok(SimulationResult { dt, n_steps, n_paths: cfg.n_paths, with_momentum: cfg.with_momentum, checkpoints })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(l: &[f64], rho: f64) -> SaddleModel<f64> {
        SaddleModel::diagonal(l.to_vec(), 0.1, 1.0, rho).unwrap()
    }

    #[test]
    fn zero_noise_stays_at_saddle() {
        let mut cfg = SimulationConfig::new(0.2, 200, 3).with_dt(1e-3);
        cfg.noise_scale = 0.0;
        let r = simulate_sde(&model(&[-2.0, 1.0], 0.1), &cfg).unwrap();
        assert!(r.final_estimates().iter().all(|e| e.mean == 0.0 && e.ci_halfwidth == 0.0));
    }

    #[test]
    fn deterministic_given_seed() {
        let cfg = SimulationConfig::new(0.1, 400, 11).with_dt(1e-3);
        let a = simulate_sde(&model(&[-2.0], 0.1), &cfg).unwrap();
        let b = simulate_sde(&model(&[-2.0], 0.1), &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn step_contract() {
        let cfg = SimulationConfig::new(1.0, 100, 1).with_dt(0.1);
        let err = simulate_sde(&model(&[-2.0], 0.0), &cfg).unwrap_err();
        assert!(matches!(err, DiffusionError::StepContract { .. }));
    }

    #[test]
    fn momentum_requires_parameters() {
        let mut cfg = SimulationConfig::new(0.1, 100, 1);
        cfg.with_momentum = true;
        assert!(simulate_sde(&model(&[-2.0], 0.0), &cfg).is_err());
    }

    #[test]
    fn too_few_paths() {
        assert!(simulate_sde(&model(&[-2.0], 0.0), &SimulationConfig::new(0.1, 50, 1)).is_err());
    }

    #[test]
    fn default_dt_rule() {
        assert_eq!(default_dt(&model(&[-2.0], 0.0)), 1e-3);
        assert!((default_dt(&model(&[-50.0], 0.0)) - 2e-4).abs() < 1e-18);
    }

    #[test]
    fn csv_rows() {
        let cfg = SimulationConfig::new(0.1, 200, 5).with_dt(1e-3).with_checkpoints(2);
        let m = model(&[-2.0, 1.0], 0.0);
        let rows = simulate_sde(&m, &cfg).unwrap().rows(&m);
        assert_eq!(rows.len(), 4);
        let mut buf = Vec::new();
        write_diffusion_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), "t,direction,sigma_sq_closed,msd_mc,ci_halfwidth");
        assert!(text.lines().nth(1).unwrap().starts_with("0.05,0,"));
    }
}
