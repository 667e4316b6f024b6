use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::linalg::{all_finite, norm, Point};
use crate::objective::{check_point, BatchSampler, Objective, StochasticObjective};
use crate::optim::step::{batch_gradient, grad_cosine, perturbed_point, MomentumState};
use crate::optim::{Method, OptimConfig, OptimError};
use crate::scalar::Scalar;

/// State at step `t`, before the update that produces `w_{t+1}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord<T> {
    pub t: usize,
    pub w: Point<T>,
    /// Perturbed point; equals `w` for GD.
    pub w_p: Point<T>,
    pub loss: T,
    pub grad_norm: T,
    /// `cos(∇ℓ(w), ∇ℓ(w_p))`; `None` when either norm is below `grad_eps`.
    pub grad_cosine: Option<T>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    MaxSteps,
    GradTolerance,
    /// Iterate became non-finite or left the divergence ball; the offending
    /// state is not recorded.
    Diverged,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory<T> {
    pub objective: String,
    pub config: OptimConfig<T>,
    pub w0: Point<T>,
    pub records: Vec<StepRecord<T>>,
    pub termination: Termination,
    /// Number of updates applied.
    pub steps_taken: usize,
}

/// JSON run manifest: everything except the per-step records.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryManifest<T> {
    pub objective: String,
    pub config: OptimConfig<T>,
    pub w0: Point<T>,
    pub termination: Termination,
    pub steps_taken: usize,
    pub n_records: usize,
    pub final_point: Option<Point<T>>,
}

impl<T: Scalar> Trajectory<T> {
    pub fn last(&self) -> Option<&StepRecord<T>> {
        self.records.last()
    }

    pub fn final_point(&self) -> Option<&Point<T>> {
        self.records.last().map(|r| &r.w)
    }

    pub fn dim(&self) -> usize {
        self.w0.dim()
    }

    pub fn csv_header(&self) -> Vec<String> {
        let n = self.dim();
        let mut h = vec!["t".to_owned()];
        h.extend((1..=n).map(|i| format!("w{i}")));
        h.extend((1..=n).map(|i| format!("wp{i}")));
        h.extend(["loss", "grad_norm", "grad_cosine"].map(String::from));
        h
    }

    /// CSV with header `t,w1..wn,wp1..wpn,loss,grad_norm,grad_cosine`;
    /// undefined cosines are written as `nan`.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(self.csv_header())?;
        for r in &self.records {
            let mut row = vec![r.t.to_string()];
            row.extend(r.w.as_slice().iter().map(|v| v.to_string()));
            row.extend(r.w_p.as_slice().iter().map(|v| v.to_string()));
            row.push(r.loss.to_string());
            row.push(r.grad_norm.to_string());
            row.push(r.grad_cosine.map_or_else(|| "nan".to_owned(), |c| c.to_string()));
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("in-memory CSV write");
        String::from_utf8(buf).expect("CSV is UTF-8")
    }

    pub fn manifest(&self) -> TrajectoryManifest<T> {
        TrajectoryManifest {
            objective: self.objective.clone(),
            config: self.config.clone(),
            w0: self.w0.clone(),
            termination: self.termination,
            steps_taken: self.steps_taken,
            n_records: self.records.len(),
            final_point: self.final_point().cloned(),
        }
    }
}

/// Gradient provider for one step of the driver loop.
trait StepOracle<T: Scalar> {
    fn begin_step(&mut self);
    fn gradient(&self, w: &[T], out: &mut [T]);
    fn loss(&self, w: &[T]) -> T;
    /// Full-objective gradient norm; `step_gradient` is the gradient just used.
    fn full_grad_norm(&self, w: &[T], step_gradient: &[T]) -> T;
    /// Whether the step gradient is the full gradient (tolerance checked every step).
    fn exact(&self) -> bool;
}

struct Deterministic<'a, T: Scalar, O: Objective<T> + ?Sized> {
    obj: &'a O,
    _t: std::marker::PhantomData<T>,
}

impl<T: Scalar, O: Objective<T> + ?Sized> StepOracle<T> for Deterministic<'_, T, O> {
    fn begin_step(&mut self) {}

    fn gradient(&self, w: &[T], out: &mut [T]) {
        self.obj.gradient_into(w, out);
    }

    fn loss(&self, w: &[T]) -> T {
        self.obj.value(w)
    }

    fn full_grad_norm(&self, _w: &[T], step_gradient: &[T]) -> T {
        norm(step_gradient)
    }

    fn exact(&self) -> bool {
        true
    }
}

struct MiniBatch<'a, T: Scalar, S: StochasticObjective<T> + ?Sized> {
    obj: &'a S,
    sampler: BatchSampler,
    rng: ChaCha8Rng,
    batch: Vec<usize>,
    _t: std::marker::PhantomData<T>,
}

impl<T: Scalar, S: StochasticObjective<T> + ?Sized> StepOracle<T> for MiniBatch<'_, T, S> {
    fn begin_step(&mut self) {
        self.sampler.draw_into(&mut self.rng, &mut self.batch);
    }

    fn gradient(&self, w: &[T], out: &mut [T]) {
        batch_gradient(self.obj, w, &self.batch, out);
    }

    fn loss(&self, w: &[T]) -> T {
        self.obj.expected_value(w)
    }

    fn full_grad_norm(&self, w: &[T], _step_gradient: &[T]) -> T {
        let mut g = vec![T::zero(); w.len()];
        let mut acc = vec![T::zero(); w.len()];
        for (i, s) in self.obj.samples().iter().enumerate() {
            self.obj.sample_gradient_into(w, i, &mut g);
            for (a, &gi) in acc.iter_mut().zip(&g) {
                *a += s.probability * gi;
            }
        }
        norm(&acc)
    }

    fn exact(&self) -> bool {
        false
    }
}

fn drive<T: Scalar, Q: StepOracle<T>>(
    oracle: &mut Q,
    name: &str,
    cfg: &OptimConfig<T>,
    w0: &Point<T>,
) -> Trajectory<T> {
    let n = w0.dim();
    let mut w = w0.as_slice().to_vec();
    let mut g = vec![T::zero(); n];
    let mut gp = vec![T::zero(); n];
    let mut wp = vec![T::zero(); n];
    let mut momentum = MomentumState::new(n);
    let use_momentum = cfg.uses_momentum();
    let mut records = Vec::new();
    let mut steps_taken = 0;

    let termination = 'run: {
        for t in 0..=cfg.max_steps {
            oracle.begin_step();
            oracle.gradient(&w, &mut g);
            if !all_finite(&g) {
                break 'run Termination::Diverged;
            }
            perturbed_point(&w, &g, cfg, &mut wp);
            match cfg.method {
                Method::Gd => gp.copy_from_slice(&g),
                Method::Sam => oracle.gradient(&wp, &mut gp),
            }
            if !all_finite(&gp) {
                break 'run Termination::Diverged;
            }

            let final_step = t == cfg.max_steps;
            let on_stride = t % cfg.record_stride == 0 || final_step;
            let check_tol = oracle.exact() || on_stride;
            let full_norm = if check_tol { Some(oracle.full_grad_norm(&w, &g)) } else { None };
            let converged = full_norm.is_some_and(|gn| gn < cfg.grad_tol);
            if on_stride || converged {
                records.push(StepRecord {
                    t,
                    w: Point::new(w.clone()),
                    w_p: Point::new(wp.clone()),
                    loss: oracle.loss(&w),
                    grad_norm: full_norm.unwrap_or_else(|| oracle.full_grad_norm(&w, &g)),
                    grad_cosine: grad_cosine(&g, &gp, cfg.grad_eps),
                });
            }
            if converged {
                break 'run Termination::GradTolerance;
            }
            if final_step {
                break 'run Termination::MaxSteps;
            }

            let step_dir = &gp;
            if use_momentum {
                momentum.accumulate(step_dir, cfg.gamma, cfg.tau);
                for (wi, &mi) in w.iter_mut().zip(&momentum.m) {
                    *wi -= cfg.eta * mi;
                }
            } else {
                for (wi, &di) in w.iter_mut().zip(step_dir) {
                    *wi -= cfg.eta * di;
                }
            }
            steps_taken = t + 1;
            if !all_finite(&w) || norm(&w) > cfg.divergence_threshold {
                break 'run Termination::Diverged;
            }
        }
        Termination::MaxSteps
    };

    Trajectory { objective: name.to_owned(), config: cfg.clone(), w0: w0.clone(), records, termination, steps_taken }
}

/// Iterates the configured rule from `w0` until `max_steps` updates, the gradient
/// tolerance, or divergence. Divergence is a termination reason, not an error.
pub fn run_trajectory<T: Scalar, O: Objective<T> + ?Sized>(
    obj: &O,
    cfg: &OptimConfig<T>,
    w0: &Point<T>,
) -> Result<Trajectory<T>, OptimError> {
    cfg.validate()?;
    check_point(obj.dim(), w0)?;
    let mut oracle = Deterministic { obj, _t: std::marker::PhantomData };
    Ok(drive(&mut oracle, obj.name(), cfg, w0))
}

/// Mini-batch variant: each step draws `cfg.batch_size` samples with replacement
/// from a ChaCha8 stream seeded by `cfg.seed`. Recorded losses and gradient norms
/// refer to the expected loss; the gradient tolerance is checked at recorded steps.
pub fn run_stochastic_trajectory<T: Scalar, S: StochasticObjective<T> + ?Sized>(
    obj: &S,
    name: &str,
    cfg: &OptimConfig<T>,
    w0: &Point<T>,
) -> Result<Trajectory<T>, OptimError> {
    cfg.validate()?;
    check_point(obj.dim(), w0)?;
    let mut oracle = MiniBatch {
        obj,
        sampler: BatchSampler::new(obj.samples()),
        rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        batch: vec![0; cfg.batch_size],
        _t: std::marker::PhantomData,
    };
    Ok(drive(&mut oracle, name, cfg, w0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::{Beale, QuadraticSaddle, ToyNn};
    use crate::optim::RhoMode;

    fn pt(a: f64, b: f64) -> Point<f64> {
        Point::new(vec![a, b])
    }

    #[test]
    fn zero_steps_records_initial_state_only() {
        let cfg = OptimConfig::gd(0.1).with_max_steps(0);
        let tr = run_trajectory(&Beale, &cfg, &pt(1.0, 1.0)).unwrap();
        assert_eq!(tr.records.len(), 1);
        assert_eq!(tr.records[0].t, 0);
        assert_eq!(tr.termination, Termination::MaxSteps);
        assert_eq!(tr.steps_taken, 0);
    }

    #[test]
    fn converges_by_tolerance_at_critical_point() {
        let cfg = OptimConfig::gd(0.1);
        let tr = run_trajectory(&QuadraticSaddle, &cfg, &pt(0.0, 0.0)).unwrap();
        assert_eq!(tr.termination, Termination::GradTolerance);
        assert_eq!(tr.records.len(), 1);
    }

    #[test]
    fn divergence_is_a_termination() {
        let cfg = OptimConfig::gd(0.1).with_max_steps(100_000);
        let tr = run_trajectory(&QuadraticSaddle, &cfg, &pt(0.0, 1.0)).unwrap();
        assert_eq!(tr.termination, Termination::Diverged);
        assert!(tr.records.iter().all(|r| r.w.is_finite()));
    }

    #[test]
    fn stride_keeps_final_record_and_increasing_t() {
        let cfg = OptimConfig::gd(1e-3).with_max_steps(1003).with_stride(100);
        let tr = run_trajectory(&Beale, &cfg, &pt(1.0, 1.5)).unwrap();
        let ts: Vec<usize> = tr.records.iter().map(|r| r.t).collect();
        assert_eq!(ts.len(), 12);
        assert_eq!(*ts.last().unwrap(), 1003);
        assert!(ts.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn csv_header_and_rows() {
        let cfg = OptimConfig::sam(1e-3, 0.05, RhoMode::Constant).with_max_steps(3);
        let tr = run_trajectory(&Beale, &cfg, &pt(0.5, 1.2)).unwrap();
        let csv = tr.to_csv_string();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "t,w1,w2,wp1,wp2,loss,grad_norm,grad_cosine");
        assert_eq!(lines.count(), 4);
    }

    #[test]
    fn undefined_cosine_written_as_nan() {
        let cfg = OptimConfig::gd(0.1).with_max_steps(0);
        let tr = run_trajectory(&QuadraticSaddle, &cfg, &pt(0.0, 0.0)).unwrap();
        assert!(tr.to_csv_string().lines().nth(1).unwrap().ends_with(",nan"));
    }

    #[test]
    fn manifest_carries_config() {
        let cfg = OptimConfig::sam(1e-4, 0.1, RhoMode::Constant).with_max_steps(5);
        let tr = run_trajectory(&Beale, &cfg, &pt(0.5, 1.2)).unwrap();
        let json = serde_json::to_value(tr.manifest()).unwrap();
        assert_eq!(json["config"]["rho"], 0.1);
        assert_eq!(json["objective"], "beale");
        assert_eq!(json["n_records"], 6);
    }

    #[test]
    fn stochastic_full_batch_matches_deterministic_direction() {
        // B = 2 draws may repeat a label, so only determinism is exact here.
        let toy = ToyNn::<f64>::default();
        let cfg = OptimConfig::sam(0.01, 0.1, RhoMode::GradNormalized).with_max_steps(200).with_seed(9);
        let a = run_stochastic_trajectory(&toy, "toy_nn", &cfg, &pt(0.05, 0.5)).unwrap();
        let b = run_stochastic_trajectory(&toy, "toy_nn", &cfg, &pt(0.05, 0.5)).unwrap();
        assert_eq!(a.to_csv_string(), b.to_csv_string());
        let c = run_stochastic_trajectory(&toy, "toy_nn", &cfg.clone().with_seed(10), &pt(0.05, 0.5)).unwrap();
        assert_ne!(a.to_csv_string(), c.to_csv_string());
    }
}
