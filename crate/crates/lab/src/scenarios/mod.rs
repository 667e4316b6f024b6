//! The scenario catalog and shared helpers.

mod beale;
mod diffusion;
mod flows;
mod heatmap;
mod toy_nn;

use saddle_core::optim::Trajectory;
use saddle_core::Scalar;

use crate::config::Params;
use crate::error::LabError;
use crate::output::OutputDir;
use crate::report::Outcome;

pub use flows::{attractor_oracle, AttractorOracle, OracleConfig};
pub use toy_nn::{train_toy_nn, ToyNnRun, ToyNnSummary};

pub type RunFn = fn(&Params, &mut OutputDir) -> Result<Outcome, LabError>;

pub struct ScenarioSpec {
    pub id: &'static str,
    pub description: &'static str,
    /// Every accepted parameter with its default value.
    pub defaults: &'static [(&'static str, &'static str)],
    pub run: RunFn,
}

pub const CATALOG: &[ScenarioSpec] = &[
    beale::FIG1,
    beale::FIG4,
    flows::FIG5,
    heatmap::FIG6,
    toy_nn::FIG7,
    toy_nn::SWEEP,
    diffusion::THM2,
    diffusion::THM3,
];

pub fn find(id: &str) -> Result<&'static ScenarioSpec, LabError> {
    CATALOG.iter().find(|s| s.id == id).ok_or_else(|| LabError::UnknownScenario(id.to_owned()))
}

/// Fraction of consecutive defined cosines that change sign.
pub fn alternation_rate<T: Scalar>(cosines: impl IntoIterator<Item = Option<T>>) -> f64 {
    let cs: Vec<T> = cosines.into_iter().flatten().collect();
    if cs.len() < 2 {
        return f64::NAN;
    }
    let flips = cs
        .windows(2)
        .filter(|p| (p[0] > T::zero() && p[1] < T::zero()) || (p[0] < T::zero() && p[1] > T::zero()))
        .count();
    flips as f64 / (cs.len() - 1) as f64
}

/// Writes every `stride`-th record plus the last one.
pub fn write_thinned_csv<T: Scalar>(
    out: &mut OutputDir,
    name: &str,
    traj: &Trajectory<T>,
    stride: usize,
) -> Result<(), LabError> {
    let n = traj.records.len();
    let records = traj
        .records
        .iter()
        .enumerate()
        .filter(|(i, _)| i % stride.max(1) == 0 || i + 1 == n)
        .map(|(_, r)| r.clone())
        .collect();
    let thinned = Trajectory {
        objective: traj.objective.clone(),
        config: traj.config.clone(),
        w0: traj.w0.clone(),
        records,
        termination: traj.termination,
        steps_taken: traj.steps_taken,
    };
    out.write_csv(name, |buf| thinned.write_csv(buf))
}

/// `value` formatted for file names (`0.1` → `0.1`, `1` → `1`).
pub fn tag(value: f64) -> String {
    format!("{value}")
}
