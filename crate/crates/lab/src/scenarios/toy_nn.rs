use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use saddle_core::objective::ToyNn;
use saddle_core::optim::{run_stochastic_trajectory, Method, OptimConfig, RhoMode, Termination};
use saddle_core::Point64;
use serde::Serialize;

use super::beale::parse_rho_mode;
use super::{tag, ScenarioSpec};
use crate::config::Params;
use crate::error::LabError;
use crate::output::OutputDir;
use crate::report::{Comparison, Outcome};

pub const FIG7: ScenarioSpec = ScenarioSpec {
    id: "fig7_toynn",
    description: "Toy network: SGD reaches the minima, SAM stalls on the saddle line w1 = 0",
    defaults: &[
        ("seed", "0"),
        ("seeds", "1000"),
        ("eta", "0.005"),
        ("max_steps", "40000"),
        ("batch_size", "1"),
        ("rho", "0.1"),
        ("rho_mode", "normalized"),
        ("saturation_w1", "0.05"),
        ("saturation_loss", "2.45"),
        ("sgd_loss_threshold", "2.30"),
    ],
    run: run_fig7,
};

pub const SWEEP: ScenarioSpec = ScenarioSpec {
    id: "toy_nn_sweep",
    description: "Toy network: mean converged loss as the SAM radius grows",
    defaults: &[
        ("seed", "0"),
        ("seeds", "1000"),
        ("eta", "0.005"),
        ("max_steps", "40000"),
        ("batch_size", "1"),
        ("rhos", "0,0.01,0.05,0.1,0.2,0.5"),
        ("rho_mode", "normalized"),
        ("saturation_w1", "0.05"),
        ("saturation_loss", "2.45"),
    ],
    run: run_sweep,
};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ToyNnRun {
    pub seed: usize,
    pub w1_init: f64,
    pub w2_init: f64,
    pub w1: f64,
    pub w2: f64,
    pub loss: f64,
    pub saturated: bool,
    pub diverged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ToyNnSummary {
    pub rho: f64,
    pub runs: usize,
    pub diverged: usize,
    pub mean_loss: f64,
    pub std_error: f64,
    pub saturated_fraction: f64,
}

/// Trains from `seeds` initializations `w₁ ~ U[−0.1, 0.1]`, `w₂ ~ U[0, 1]`.
/// Run `i` draws its start and its minibatches from streams of `base_seed`.
pub fn train_toy_nn(
    cfg: &OptimConfig<f64>,
    seeds: usize,
    base_seed: u64,
    saturation: (f64, f64),
) -> Result<(Vec<ToyNnRun>, ToyNnSummary), LabError> {
    let toy = ToyNn::<f64>::default();
    let runs = (0..seeds)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
            rng.set_stream(i as u64);
            let (w1, w2) = (rng.random_range(-0.1..=0.1), rng.random_range(0.0..=1.0));
            let run_cfg = cfg.clone().with_seed(rng.random()).with_stride(cfg.max_steps.max(1));
            let tr = run_stochastic_trajectory(&toy, "toy_nn", &run_cfg, &Point64::new(vec![w1, w2]))?;
            let last = tr.last().expect("the start is always recorded");
            let diverged = tr.termination == Termination::Diverged;
            Ok(ToyNnRun {
                seed: i,
                w1_init: w1,
                w2_init: w2,
                w1: last.w[0],
                w2: last.w[1],
                loss: last.loss,
                saturated: !diverged && last.w[0].abs() < saturation.0 && last.loss > saturation.1,
                diverged,
            })
        })
        .collect::<Result<Vec<_>, LabError>>()?;

    let kept: Vec<&ToyNnRun> = runs.iter().filter(|r| !r.diverged).collect();
    let n = kept.len() as f64;
    let mean = kept.iter().map(|r| r.loss).sum::<f64>() / n;
    let var = kept.iter().map(|r| (r.loss - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let summary = ToyNnSummary {
        rho: if cfg.method == Method::Sam { cfg.rho } else { 0.0 },
        runs: runs.len(),
        diverged: runs.len() - kept.len(),
        mean_loss: mean,
        std_error: (var / n).sqrt(),
        saturated_fraction: kept.iter().filter(|r| r.saturated).count() as f64 / n,
    };
    Ok((runs, summary))
}

struct Common {
    seeds: usize,
    base_seed: u64,
    eta: f64,
    max_steps: usize,
    batch_size: usize,
    mode: RhoMode,
    saturation: (f64, f64),
}

impl Common {
    fn read(p: &Params) -> Result<Self, LabError> {
        let seeds = p.count("seeds")?;
        if seeds < 100 {
            return Err(LabError::BadValue {
                key: "seeds".to_owned(),
                value: p.raw("seeds").to_owned(),
                message: "need at least 100 runs per configuration".to_owned(),
            });
        }
        Ok(Self {
            seeds,
            base_seed: p.get("seed")?,
            eta: p.positive("eta")?,
            max_steps: p.count("max_steps")?,
            batch_size: p.count("batch_size")?,
            mode: parse_rho_mode(p, "rho_mode")?,
            saturation: (p.positive("saturation_w1")?, p.get("saturation_loss")?),
        })
    }

    fn config(&self, rho: f64) -> OptimConfig<f64> {
        let cfg = if rho == 0.0 { OptimConfig::gd(self.eta) } else { OptimConfig::sam(self.eta, rho, self.mode) };
        cfg.with_max_steps(self.max_steps).with_batch_size(self.batch_size)
    }

    fn train(&self, rho: f64) -> Result<(Vec<ToyNnRun>, ToyNnSummary), LabError> {
        train_toy_nn(&self.config(rho), self.seeds, self.base_seed, self.saturation)
    }
}

fn write_runs(out: &mut OutputDir, name: &str, runs: &[ToyNnRun]) -> Result<(), LabError> {
    out.write_csv(name, |buf| {
        let mut w = csv::Writer::from_writer(buf);
        for r in runs {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    })
}

fn run_fig7(p: &Params, out: &mut OutputDir) -> Result<Outcome, LabError> {
    let c = Common::read(p)?;
    let rho: f64 = p.get("rho")?;
    let (sgd_runs, sgd) = c.train(0.0)?;
    let (sam_runs, sam) = c.train(rho)?;
    write_runs(out, "converged_sgd.csv", &sgd_runs)?;
    write_runs(out, "converged_sam.csv", &sam_runs)?;
    out.write_json("summary.json", &[&sgd, &sam])?;
    out.write_json("optimizers.json", &[c.config(0.0), c.config(rho)])?;

    let mut o = Outcome::default();
    o.check("sgd_mean_loss", sgd.mean_loss, Comparison::Less, p.get("sgd_loss_threshold")?);
    // SAM fraction minus three times the SGD fraction.
    o.check(
        "sam_saturation_excess_over_3x_sgd",
        sam.saturated_fraction - 3.0 * sgd.saturated_fraction,
        Comparison::Greater,
        0.0,
    );
    for (name, s) in [("sgd", &sgd), ("sam", &sam)] {
        o.metric(format!("{name}_mean_loss"), s.mean_loss);
        o.metric(format!("{name}_saturated_fraction"), s.saturated_fraction);
        o.metric(format!("{name}_diverged"), s.diverged as f64);
    }
    Ok(o)
}

fn run_sweep(p: &Params, out: &mut OutputDir) -> Result<Outcome, LabError> {
    let c = Common::read(p)?;
    let mut rhos: Vec<f64> = p.list("rhos")?;
    if rhos.len() < 2 || rhos.iter().any(|r| !(*r >= 0.0)) {
        return Err(LabError::BadValue {
            key: "rhos".to_owned(),
            value: p.raw("rhos").to_owned(),
            message: "need at least two non-negative radii".to_owned(),
        });
    }
    rhos.sort_by(f64::total_cmp);
    let mut summaries = Vec::new();
    for &rho in &rhos {
        let (runs, s) = c.train(rho)?;
        write_runs(out, &format!("converged_rho{}.csv", tag(rho)), &runs)?;
        summaries.push(s);
    }
    out.write_csv("sweep.csv", |buf| {
        let mut w = csv::Writer::from_writer(buf);
        for s in &summaries {
            w.serialize(s)?;
        }
        w.flush()?;
        Ok(())
    })?;
    out.write_json("optimizers.json", &rhos.iter().map(|&r| c.config(r)).collect::<Vec<_>>())?;

    let mut o = Outcome::default();
    // Largest drop between neighbouring radii beyond their combined standard error.
    let worst_drop = summaries
        .windows(2)
        .map(|w| w[0].mean_loss - w[1].mean_loss - w[0].std_error.hypot(w[1].std_error))
        .fold(f64::NEG_INFINITY, f64::max);
    o.check("mean_loss_drop_beyond_std_error", worst_drop, Comparison::LessEq, 0.0);
    for s in &summaries {
        o.metric(format!("rho{}_mean_loss", tag(s.rho)), s.mean_loss);
        o.metric(format!("rho{}_std_error", tag(s.rho)), s.std_error);
        o.metric(format!("rho{}_saturated_fraction", tag(s.rho)), s.saturated_fraction);
        o.metric(format!("rho{}_diverged", tag(s.rho)), s.diverged as f64);
    }
    Ok(o)
}
