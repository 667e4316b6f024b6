use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use saddle_core::linalg::rotation2;
use saddle_core::objective::{Quadratic, QuadraticSaddle};
use saddle_core::optim::{run_trajectory, OptimConfig, RhoMode};
use saddle_core::spectral::{attractor_condition, flow_velocity, integrate_flow, FlowKind, FlowPath, StepControl};
use saddle_core::{Matrix64, Point64};
use serde::Serialize;

use super::{write_thinned_csv, ScenarioSpec};
use crate::config::Params;
use crate::error::LabError;
use crate::output::OutputDir;
use crate::report::{Comparison, Outcome};

pub const FIG5: ScenarioSpec = ScenarioSpec {
    id: "fig5_flows",
    description: "Quadratic saddle x^2 - y^2: GD escapes, SAM with rho = 1 converges to the saddle; attractor oracle on random quadratics",
    defaults: &[
        ("seed", "0"),
        ("rho", "1"),
        ("start_x", "-3"),
        ("offset", "0.01"),
        ("t_end", "10"),
        ("h", "1e-3"),
        ("field_n", "21"),
        ("field_extent", "3"),
        ("eta", "0.01"),
        ("max_steps", "100000"),
        ("csv_stride", "100"),
        ("saddle_tolerance", "1e-3"),
        ("oracle_cases", "1000"),
        ("oracle_t", "20"),
        ("oracle_offset", "1e-2"),
        ("oracle_boundary", "1e-3"),
    ],
    run: run_fig5,
};

#[derive(Clone, Copy, Debug)]
pub struct OracleConfig {
    pub cases: usize,
    pub seed: u64,
    pub t_end: f64,
    pub offset: f64,
    /// Draws with some `|λ + ρλ²|` below this are excluded.
    pub boundary: f64,
    pub tolerance: f64,
    pub h: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self { cases: 1000, seed: 0, t_end: 20.0, offset: 1e-2, boundary: 1e-3, tolerance: 1e-3, h: 1e-3 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct OracleCase {
    pub case: usize,
    pub lam1: f64,
    pub lam2: f64,
    pub rho: f64,
    pub theta: f64,
    pub predicted: bool,
    pub converged: bool,
    pub distance: f64,
    pub excluded: bool,
}

#[derive(Clone, Debug)]
pub struct AttractorOracle {
    pub cases: Vec<OracleCase>,
    pub evaluated: usize,
    pub agreement: f64,
}

/// Random index-one quadratics `λ₁ ~ −U[1,10]`, `λ₂ ~ U[1,10]`, `ρ ~ U[0,2]`,
/// random rotation and center. Each SAM flow starts at `center + offset·q₁`.
pub fn attractor_oracle(cfg: &OracleConfig) -> Result<AttractorOracle, LabError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let draws: Vec<[f64; 6]> = (0..cfg.cases)
        .map(|_| {
            [
                -rng.random_range(1.0..10.0),
                rng.random_range(1.0..10.0),
                rng.random_range(0.0..2.0),
                rng.random_range(0.0..std::f64::consts::PI),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            ]
        })
        .collect();
    let control = StepControl::default().with_h(cfg.h).with_record_every(usize::MAX);
    let cases = draws
        .par_iter()
        .enumerate()
        .map(|(case, &[lam1, lam2, rho, theta, cx, cy])| {
            let r = rotation2(theta);
            let h = r.matmul(&Matrix64::from_diag(&[lam1, lam2])).matmul(&r.transpose());
            let obj = Quadratic::new(vec![cx, cy], h, 0.0);
            let q1 = r.column(0);
            let w0 = Point64::new(vec![cx + cfg.offset * q1[0], cy + cfg.offset * q1[1]]);
            let path = integrate_flow(&obj, &w0, FlowKind::Sam { rho }, cfg.t_end, &control)?;
            let distance =
                if path.diverged { f64::INFINITY } else { path.endpoint().distance(&Point64::new(vec![cx, cy])) };
            let excluded = [lam1, lam2].iter().any(|&l| (l + rho * l * l).abs() < cfg.boundary);
            Ok(OracleCase {
                case,
                lam1,
                lam2,
                rho,
                theta,
                predicted: attractor_condition(&[lam1, lam2], rho).overall,
                converged: distance < cfg.tolerance,
                distance,
                excluded,
            })
        })
        .collect::<Result<Vec<_>, LabError>>()?;
    let kept: Vec<&OracleCase> = cases.iter().filter(|c| !c.excluded).collect();
    let agree = kept.iter().filter(|c| c.predicted == c.converged).count();
    let evaluated = kept.len();
    Ok(AttractorOracle { agreement: agree as f64 / evaluated.max(1) as f64, evaluated, cases })
}

fn write_path(out: &mut OutputDir, name: &str, path: &FlowPath<f64>) -> Result<(), LabError> {
    out.write_csv(name, |buf| {
        let mut w = csv::Writer::from_writer(buf);
        w.write_record(["t", "x", "y"])?;
        for (t, p) in path.times.iter().zip(&path.points) {
            w.write_record([t.to_string(), p[0].to_string(), p[1].to_string()])?;
        }
        w.flush()?;
        Ok(())
    })
}

fn write_field(out: &mut OutputDir, name: &str, kind: FlowKind<f64>, n: usize, extent: f64) -> Result<(), LabError> {
    out.write_csv(name, |buf| {
        let mut w = csv::Writer::from_writer(buf);
        w.write_record(["x", "y", "u", "v"])?;
        let step = if n > 1 { 2.0 * extent / (n - 1) as f64 } else { 0.0 };
        for j in 0..n {
            for i in 0..n {
                let (x, y) = (-extent + step * i as f64, -extent + step * j as f64);
                let v = flow_velocity(&QuadraticSaddle, kind, &[x, y]);
                w.write_record([x, y, v[0], v[1]].map(|c| c.to_string()))?;
            }
        }
        w.flush()?;
        Ok(())
    })
}

fn run_fig5(p: &Params, out: &mut OutputDir) -> Result<Outcome, LabError> {
    let rho: f64 = p.get("rho")?;
    let x0: f64 = p.get("start_x")?;
    let offset: f64 = p.get("offset")?;
    let t_end = p.positive("t_end")?;
    let tol: f64 = p.get("saddle_tolerance")?;
    let control = StepControl::default().with_h(p.positive("h")?).with_record_every(10);
    let origin = Point64::new(vec![0.0, 0.0]);
    let mut o = Outcome::default();

    let mut sam_worst: f64 = 0.0;
    let mut gd_least_y = f64::INFINITY;
    for (sign, side) in [(1.0, "plus"), (-1.0, "minus")] {
        let w0 = Point64::new(vec![x0, sign * offset]);
        let gd = integrate_flow(&QuadraticSaddle, &w0, FlowKind::Gd, t_end, &control)?;
        let sam = integrate_flow(&QuadraticSaddle, &w0, FlowKind::Sam { rho }, t_end, &control)?;
        write_path(out, &format!("flow_gd_{side}.csv"), &gd)?;
        write_path(out, &format!("flow_sam_{side}.csv"), &sam)?;
        let y_max = gd.points.iter().fold(0.0f64, |m, q| m.max(q[1].abs()));
        gd_least_y = gd_least_y.min(if gd.diverged { f64::INFINITY } else { y_max });
        let d = if sam.diverged { f64::INFINITY } else { sam.endpoint().distance(&origin) };
        sam_worst = sam_worst.max(d);
    }
    o.check("sam_flow_distance_to_saddle", sam_worst, Comparison::Less, tol);
    o.check("gd_flow_max_abs_y", gd_least_y, Comparison::Greater, 1.0);

    let n = p.count("field_n")?;
    let extent = p.positive("field_extent")?;
    write_field(out, "field_gd.csv", FlowKind::Gd, n, extent)?;
    write_field(out, "field_sam.csv", FlowKind::Sam { rho }, n, extent)?;

    // Discrete dynamics from (x0, −offset).
    let eta = p.positive("eta")?;
    let max_steps = p.count("max_steps")?;
    let stride = p.count("csv_stride")?;
    let w0 = Point64::new(vec![x0, -offset]);
    let gd = run_trajectory(&QuadraticSaddle, &OptimConfig::gd(eta).with_max_steps(max_steps), &w0)?;
    let sam_cfg = OptimConfig::sam(eta, rho, RhoMode::Constant).with_max_steps(max_steps);
    let sam = run_trajectory(&QuadraticSaddle, &sam_cfg, &w0)?;
    write_thinned_csv(out, "discrete_gd.csv", &gd, stride)?;
    write_thinned_csv(out, "discrete_sam.csv", &sam, stride)?;
    out.write_json("trajectories.json", &[gd.manifest(), sam.manifest()])?;
    let sam_final = sam.final_point().map_or(f64::NAN, |q| q.distance(&origin));
    o.check("discrete_sam_distance_to_saddle", sam_final, Comparison::Less, tol);
    let gd_y = gd.records.iter().fold(0.0f64, |m, r| m.max(r.w[1].abs()));
    o.check("discrete_gd_max_abs_y", gd_y, Comparison::Greater, 1.0);
    if let Some(first) = sam.records.iter().find(|r| r.w.distance(&origin) < tol) {
        o.metric("discrete_sam_first_step_within_tolerance", first.t as f64);
    }

    let oracle = attractor_oracle(&OracleConfig {
        cases: p.count("oracle_cases")?,
        seed: p.get("seed")?,
        t_end: p.positive("oracle_t")?,
        offset: p.positive("oracle_offset")?,
        boundary: p.get("oracle_boundary")?,
        tolerance: tol,
        h: p.positive("h")?,
    })?;
    out.write_csv("attractor_oracle.csv", |buf| {
        let mut w = csv::Writer::from_writer(buf);
        for c in &oracle.cases {
            w.serialize(c)?;
        }
        w.flush()?;
        Ok(())
    })?;
    o.metric("attractor_oracle_evaluated", oracle.evaluated as f64);
    o.check("attractor_oracle_agreement", oracle.agreement, Comparison::GreaterEq, 0.99);
    Ok(o)
}
