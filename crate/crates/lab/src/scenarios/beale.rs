use saddle_core::objective::Beale;
use saddle_core::optim::{run_trajectory, OptimConfig, RhoMode, Termination, Trajectory};
use saddle_core::spectral::{
    classify_case, critical_point_records, find_critical_points, BasinConfig, BasinLabel, CaseConfig, CaseLabel,
    CaseWindow, CriticalPoint, FlowClassifier, MinimumSite, NewtonConfig, SaddleSideClassifier, StepControl,
};
use saddle_core::Point64;
use serde::Serialize;

use super::{alternation_rate, tag, write_thinned_csv, ScenarioSpec};
use crate::config::Params;
use crate::error::LabError;
use crate::output::OutputDir;
use crate::report::{Comparison, Outcome};

pub const FIG1: ScenarioSpec = ScenarioSpec {
    id: "fig1_beale",
    description: "Beale: GD reaches the minimum while constant-radius SAM is trapped at the saddle (0, 1)",
    defaults: &[
        ("seed", "0"),
        ("start", "0.25,1.25"),
        ("eta", "1e-4"),
        ("rhos", "0.05,0.1,0.2"),
        ("rho_mode", "constant"),
        ("checked_rho", "0.1"),
        ("max_steps", "200000"),
        ("csv_stride", "100"),
        ("case_steps", "10000"),
        ("alternation_steps", "1000"),
        ("side_radius", "0.05"),
        ("minimum_tolerance", "1e-2"),
        ("saddle_tolerance", "1e-1"),
    ],
    run: run_fig1,
};

pub const FIG4: ScenarioSpec = ScenarioSpec {
    id: "fig4_cosine",
    description: "Beale: cosine between the gradient and the SAM update gradient, constant vs normalized radius",
    defaults: &[
        ("seed", "0"),
        ("start", "0.25,1.25"),
        ("eta", "1e-4"),
        ("rho", "0.1"),
        ("max_steps", "200000"),
        ("csv_stride", "10"),
        ("alternation_steps", "1000"),
    ],
    run: run_fig4,
};

pub(crate) const SADDLE: [f64; 2] = [0.0, 1.0];
pub(crate) const MINIMUM: [f64; 2] = [3.0, 0.5];

pub(crate) fn parse_rho_mode(p: &Params, key: &str) -> Result<RhoMode, LabError> {
    match p.raw(key) {
        "constant" => Ok(RhoMode::Constant),
        "normalized" => Ok(RhoMode::GradNormalized),
        other => Err(LabError::BadValue {
            key: key.to_owned(),
            value: other.to_owned(),
            message: "expected `constant` or `normalized`".to_owned(),
        }),
    }
}

fn dist(p: Option<&Point64>, target: [f64; 2]) -> f64 {
    p.map_or(f64::NAN, |p| p.distance(&Point64::new(target.to_vec())))
}

fn tail_alternation(traj: &Trajectory<f64>, steps: usize) -> f64 {
    let n = traj.records.len();
    alternation_rate(traj.records[n.saturating_sub(steps + 1)..].iter().map(|r| r.grad_cosine))
}

fn termination_code(t: Termination) -> f64 {
    match t {
        Termination::MaxSteps => 0.0,
        Termination::GradTolerance => 1.0,
        Termination::Diverged => 2.0,
    }
}

#[derive(Serialize)]
struct CaseRow {
    start_t: usize,
    end_t: usize,
    label: &'static str,
    perturbed_crossings: usize,
    iterate_crossings: usize,
    alternation_rate: f64,
    mean_saddle_distance: f64,
}

fn write_cases(out: &mut OutputDir, name: &str, windows: &[CaseWindow]) -> Result<(), LabError> {
    out.write_csv(name, |buf| {
        let mut w = csv::Writer::from_writer(buf);
        for c in windows {
            w.serialize(CaseRow {
                start_t: c.start_t,
                end_t: c.end_t,
                label: c.label.as_str(),
                perturbed_crossings: c.evidence.perturbed_crossings,
                iterate_crossings: c.evidence.iterate_crossings,
                alternation_rate: c.evidence.alternation_rate,
                mean_saddle_distance: c.evidence.mean_saddle_distance,
            })?;
        }
        w.flush()?;
        Ok(())
    })
}

/// Labels the last `steps` records (rounded down to whole windows).
fn case_windows(traj: &Trajectory<f64>, rho: f64, steps: usize, side_radius: f64) -> Result<Vec<CaseWindow>, LabError> {
    let cfg = CaseConfig::for_rho(rho);
    let n = traj.records.len();
    let keep = (steps.min(n) / cfg.window) * cfg.window;
    let tail = Trajectory { records: traj.records[n - keep..].to_vec(), ..traj.clone() };

    let saddle = CriticalPoint::at(&Beale, Point64::new(SADDLE.to_vec()))?;
    let basin_cfg = BasinConfig { control: StepControl::default().with_h(1e-2), ..BasinConfig::default() };
    let fallback = FlowClassifier::new(&Beale, vec![MinimumSite::Point(Point64::new(MINIMUM.to_vec()))], basin_cfg)?;
    let classifier = SaddleSideClassifier::calibrate(&Beale, &saddle, side_radius, fallback, 1e-4, 50.0)?;
    Ok(classify_case(&tail, &SADDLE, &classifier, &cfg))
}

fn beale_critical_points(rhos: &[f64]) -> Result<Vec<saddle_core::spectral::CriticalPointRecord>, LabError> {
    let seeds: Vec<Point64> =
        (0..9).flat_map(|i| (0..9).map(move |j| Point64::new(vec![-4.0 + i as f64, -2.0 + 0.5 * j as f64]))).collect();
    let search = find_critical_points(&Beale, &seeds, &NewtonConfig::default())?;
    Ok(critical_point_records(&search.points, rhos))
}

fn run_fig1(p: &Params, out: &mut OutputDir) -> Result<Outcome, LabError> {
    let start = Point64::new(p.point("start")?.to_vec());
    let eta = p.positive("eta")?;
    let rhos: Vec<f64> = p.list("rhos")?;
    let mode = parse_rho_mode(p, "rho_mode")?;
    let checked_rho: f64 = p.get("checked_rho")?;
    let max_steps = p.count("max_steps")?;
    let stride = p.count("csv_stride")?;
    let seed: u64 = p.get("seed")?;
    let mut o = Outcome::default();

    let base = OptimConfig::gd(eta).with_max_steps(max_steps).with_seed(seed);
    let gd = run_trajectory(&Beale, &base, &start)?;
    write_thinned_csv(out, "gd.csv", &gd, stride)?;
    let mut manifests = vec![gd.manifest()];
    o.check("gd_distance_to_minimum", dist(gd.final_point(), MINIMUM), Comparison::Less, p.get("minimum_tolerance")?);
    o.metric("gd_steps", gd.steps_taken as f64);

    let mut checked = None;
    for &rho in &rhos {
        let cfg = OptimConfig::sam(eta, rho, mode).with_max_steps(max_steps).with_seed(seed);
        let tr = run_trajectory(&Beale, &cfg, &start)?;
        write_thinned_csv(out, &format!("sam_rho{}.csv", tag(rho)), &tr, stride)?;
        o.metric(format!("sam_rho{}_distance_to_saddle", tag(rho)), dist(tr.final_point(), SADDLE));
        o.metric(format!("sam_rho{}_distance_to_minimum", tag(rho)), dist(tr.final_point(), MINIMUM));
        o.metric(format!("sam_rho{}_termination", tag(rho)), termination_code(tr.termination));
        manifests.push(tr.manifest());
        if rho == checked_rho {
            checked = Some(tr);
        }
    }
    out.write_json("trajectories.json", &manifests)?;
    out.write_json("critical_points.json", &beale_critical_points(&rhos)?)?;

    let Some(tr) = checked else {
        return Err(LabError::BadValue {
            key: "checked_rho".to_owned(),
            value: p.raw("checked_rho").to_owned(),
            message: "must be one of `rhos`".to_owned(),
        });
    };
    o.check("sam_distance_to_saddle", dist(tr.final_point(), SADDLE), Comparison::Less, p.get("saddle_tolerance")?);

    let windows = case_windows(&tr, checked_rho, p.count("case_steps")?, p.positive("side_radius")?)?;
    write_cases(out, "cases.csv", &windows)?;
    let share =
        |label: CaseLabel| windows.iter().filter(|w| w.label == label).count() as f64 / windows.len().max(1) as f64;
    o.check("sam_case_iii_ii_fraction", share(CaseLabel::CaseIIIii), Comparison::Greater, 0.5);
    for label in [CaseLabel::CaseI, CaseLabel::CaseII, CaseLabel::CaseIIIi, CaseLabel::Unclassified] {
        o.metric(format!("sam_case_fraction_{}", label.as_str()), share(label));
    }
    let minority_side = windows.iter().filter(|w| w.evidence.basin_w != BasinLabel::Minimum(0)).count();
    o.metric("sam_case_windows", windows.len() as f64);
    o.metric("sam_case_windows_off_minimum_basin", minority_side as f64);
    o.check("sam_cosine_alternation", tail_alternation(&tr, p.count("alternation_steps")?), Comparison::Greater, 0.4);
    Ok(o)
}

fn run_fig4(p: &Params, out: &mut OutputDir) -> Result<Outcome, LabError> {
    let start = Point64::new(p.point("start")?.to_vec());
    let eta = p.positive("eta")?;
    let rho: f64 = p.get("rho")?;
    let max_steps = p.count("max_steps")?;
    let stride = p.count("csv_stride")?;
    let tail = p.count("alternation_steps")?;
    let seed: u64 = p.get("seed")?;
    let mut o = Outcome::default();
    let mut manifests = Vec::new();
    let mut max_abs: f64 = 0.0;
    for (name, mode) in [("constant", RhoMode::Constant), ("normalized", RhoMode::GradNormalized)] {
        let cfg = OptimConfig::sam(eta, rho, mode).with_max_steps(max_steps).with_seed(seed);
        let tr = run_trajectory(&Beale, &cfg, &start)?;
        write_thinned_csv(out, &format!("cosine_{name}.csv"), &tr, stride)?;
        max_abs = tr.records.iter().filter_map(|r| r.grad_cosine).fold(max_abs, |m, c| m.max(c.abs()));
        o.metric(format!("{name}_alternation"), tail_alternation(&tr, tail));
        o.metric(format!("{name}_distance_to_saddle"), dist(tr.final_point(), SADDLE));
        let last = tr.last().and_then(|r| r.grad_cosine).unwrap_or(f64::NAN);
        o.metric(format!("{name}_final_cosine"), last);
        manifests.push(tr.manifest());
    }
    out.write_json("trajectories.json", &manifests)?;
    o.check("cosine_within_unit_interval", max_abs, Comparison::LessEq, 1.0);
    Ok(o)
}
