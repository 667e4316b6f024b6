//! Named, configured experiment pipelines that write CSV/JSON artifacts and a
//! pass/fail report.

// `!(x > 0)` is how NaN gets rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod error;
pub mod output;
pub mod report;
pub mod scenarios;

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;

pub use config::{parse_config, Params};
pub use error::LabError;
pub use output::{sha256_hex, FileRecord, OutputDir};
pub use report::{Check, Comparison, Outcome, RunReport};
pub use scenarios::{find, ScenarioSpec, CATALOG};

/// What a run was asked to do: the scenario, an optional config-file layer and
/// `--set` overrides, applied in that order over the scenario defaults.
#[derive(Clone, Debug, Default)]
pub struct RunRequest {
    pub scenario: String,
    pub file: BTreeMap<String, String>,
    pub overrides: BTreeMap<String, String>,
}

impl RunRequest {
    pub fn new(scenario: impl Into<String>) -> Self {
        Self { scenario: scenario.into(), ..Self::default() }
    }

    pub fn set(mut self, key: &str, value: impl ToString) -> Self {
        self.overrides.insert(key.to_owned(), value.to_string());
        self
    }

    pub fn params(&self) -> Result<(&'static ScenarioSpec, Params), LabError> {
        let spec = find(&self.scenario)?;
        let params = Params::resolve(spec.id, spec.defaults, &[&self.file, &self.overrides])?;
        Ok((spec, params))
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    scenario: &'a str,
    config: &'a BTreeMap<String, String>,
    files: &'a [FileRecord],
}

/// Runs a scenario into `out_dir`, then writes `manifest.json` (resolved config
/// and file hashes) and `report.json`.
pub fn run_scenario(request: &RunRequest, out_dir: &Path) -> Result<RunReport, LabError> {
    let (spec, params) = request.params()?;
    let mut out = OutputDir::create(out_dir)?;
    let started = Instant::now();
    let outcome = (spec.run)(&params, &mut out)?;
    let wall_clock_seconds = started.elapsed().as_secs_f64();

    let mut manifest =
        serde_json::to_vec_pretty(&Manifest { scenario: spec.id, config: params.as_map(), files: out.files() })?;
    manifest.push(b'\n');
    out.write_untracked("manifest.json", &manifest)?;

    let report = RunReport {
        scenario: spec.id.to_owned(),
        passed: outcome.checks.iter().all(|c| c.pass),
        checks: outcome.checks,
        metrics: outcome.metrics,
        wall_clock_seconds,
        manifest_hash: sha256_hex(&manifest),
    };
    let mut bytes = serde_json::to_vec_pretty(&report)?;
    bytes.push(b'\n');
    out.write_untracked("report.json", &bytes)?;
    Ok(report)
}

/// One line per scenario: `id  description`.
pub fn catalog_text() -> String {
    let width = CATALOG.iter().map(|s| s.id.len()).max().unwrap_or(0);
    CATALOG.iter().map(|s| format!("{:<width$}  {}\n", s.id, s.description)).collect()
}

#[cfg(test)]
mod tests {
    use std::fs;

    use super::*;

    /// Small versions of every scenario.
    fn quick(id: &str) -> RunRequest {
        let r = RunRequest::new(id);
        match id {
            "fig1_beale" => r.set("max_steps", 3000).set("case_steps", 1000),
            "fig4_cosine" => r.set("max_steps", 2000),
            "fig5_flows" => r.set("oracle_cases", 20).set("t_end", 2).set("max_steps", 2000),
            "fig6_heatmap" => r.set("n", 21),
            "fig7_toynn" => r.set("seeds", 100).set("max_steps", 300),
            "toy_nn_sweep" => r.set("seeds", 100).set("max_steps", 300).set("rhos", "0,0.1"),
            "thm2_mc" => r.set("n_paths", 200).set("dt", 1e-3).set("lambdas", "-2").set("rhos", "0.1"),
            "thm3_sweep" => r.set("draws", 10),
            other => panic!("no quick config for {other}"),
        }
    }

    fn manifest(dir: &Path) -> serde_json::Value {
        serde_json::from_slice(&fs::read(dir.join("manifest.json")).unwrap()).unwrap()
    }

    #[test]
    fn every_scenario_writes_hashed_files_with_named_columns() {
        for s in CATALOG {
            let dir = tempfile::tempdir().unwrap();
            let report = run_scenario(&quick(s.id), dir.path()).unwrap_or_else(|e| panic!("{}: {e}", s.id));
            assert!(!report.checks.is_empty(), "{} has no checks", s.id);
            assert!(dir.path().join("report.json").exists());
            let m = manifest(dir.path());
            assert_eq!(m["scenario"], s.id);
            for f in m["files"].as_array().unwrap() {
                let name = f["name"].as_str().unwrap();
                let bytes = fs::read(dir.path().join(name)).unwrap();
                assert_eq!(f["sha256"], sha256_hex(&bytes), "{name}");
                if name.ends_with(".csv") {
                    let text = String::from_utf8_lossy(&bytes);
                    let header = text.lines().next().unwrap_or_default();
                    let named = header.split(',').all(|c| c.starts_with(|ch: char| ch.is_ascii_alphabetic()));
                    assert!(named, "{}/{name}: `{header}`", s.id);
                }
            }
        }
    }

    #[test]
    fn manifests_hash_equal_across_runs() {
        for id in ["fig1_beale", "fig7_toynn", "thm2_mc"] {
            let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
            let ra = run_scenario(&quick(id), a.path()).unwrap();
            let rb = run_scenario(&quick(id), b.path()).unwrap();
            assert_eq!(ra.manifest_hash, rb.manifest_hash, "{id}");
            assert_eq!(ra.checks, rb.checks, "{id}");
        }
    }

    #[test]
    fn seed_changes_stochastic_outputs() {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let ra = run_scenario(&quick("fig7_toynn"), a.path()).unwrap();
        let rb = run_scenario(&quick("fig7_toynn").set("seed", 1), b.path()).unwrap();
        assert_ne!(ra.manifest_hash, rb.manifest_hash);
        assert_ne!(
            fs::read(a.path().join("converged_sgd.csv")).unwrap(),
            fs::read(b.path().join("converged_sgd.csv")).unwrap()
        );
    }

    #[test]
    fn trajectory_manifest_holds_optimizer_config() {
        let dir = tempfile::tempdir().unwrap();
        run_scenario(&quick("fig1_beale"), dir.path()).unwrap();
        let v: serde_json::Value =
            serde_json::from_slice(&fs::read(dir.path().join("trajectories.json")).unwrap()).unwrap();
        let sam = &v[2]["config"];
        assert_eq!(sam["method"], "sam");
        assert_eq!(sam["rho"], 0.1);
        assert_eq!(sam["rho_mode"], "constant");
        assert_eq!(sam["eta"], 1e-4);
        let csv = fs::read_to_string(dir.path().join("gd.csv")).unwrap();
        assert!(csv.starts_with("t,w1,w2,wp1,wp2,loss,grad_norm,grad_cosine\n"), "{}", &csv[..60]);
    }

    #[test]
    fn catalog_entries_resolve() {
        assert_eq!(catalog_text(), catalog_text());
        for s in CATALOG {
            assert!(RunRequest::new(s.id).params().is_ok());
            assert!(catalog_text().contains(s.description));
        }
    }
}
