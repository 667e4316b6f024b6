use saddle_core::objective::Beale;
use saddle_core::spectral::{eigen_condition_field, GridSpec};

use super::ScenarioSpec;
use crate::config::Params;
use crate::error::LabError;
use crate::output::OutputDir;
use crate::report::{Comparison, Outcome};

pub const FIG6: ScenarioSpec = ScenarioSpec {
    id: "fig6_heatmap",
    description: "Beale: eigenvalues and lambda + rho*lambda^2 of the Hessian on a grid around the saddle (0, 1)",
    defaults: &[
        ("seed", "0"),
        ("rho", "0.1"),
        ("x_range", "-1,1"),
        ("y_range", "0,2"),
        ("n", "200"),
        ("center", "0,1"),
        ("radius", "0.05"),
    ],
    run: run_fig6,
};

fn run_fig6(p: &Params, out: &mut OutputDir) -> Result<Outcome, LabError> {
    let [x_min, x_max] = p.point("x_range")?;
    let [y_min, y_max] = p.point("y_range")?;
    let n = p.count("n")?;
    let rho: f64 = p.get("rho")?;
    let [cx, cy] = p.point("center")?;
    let radius = p.positive("radius")?;
    let grid = GridSpec { x_min, x_max, nx: n, y_min, y_max, ny: n };
    let field = eigen_condition_field(&Beale, &grid, rho)?;
    out.write_csv("eigen_field.csv", |buf| field.write_csv(buf))?;

    let near: Vec<_> = field.cells.iter().filter(|c| (c.x - cx).hypot(c.y - cy) <= radius).collect();
    let min_cond = near.iter().map(|c| c.cond1.min(c.cond2)).fold(f64::INFINITY, f64::min);
    let mut o = Outcome::default();
    o.metric("cells_near_center", near.len() as f64);
    o.metric("non_finite_cells", field.non_finite_cells() as f64);
    o.metric(
        "positive_fraction",
        field.cells.iter().filter(|c| c.cond1 > 0.0 && c.cond2 > 0.0).count() as f64 / field.cells.len() as f64,
    );
    o.check("cells_near_center_present", near.len() as f64, Comparison::Greater, 0.0);
    o.check("min_condition_near_center", if near.is_empty() { f64::NAN } else { min_cond }, Comparison::Greater, 0.0);
    Ok(o)
}
