use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::objective::Objective;
use crate::scalar::Scalar;
use crate::spectral::eigen::eigendecompose;
use crate::spectral::SpectralError;

/// Regular grid over `[x_min, x_max] × [y_min, y_max]`, endpoints included.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub nx: usize,
    pub y_min: f64,
    pub y_max: f64,
    pub ny: usize,
}

impl GridSpec {
    pub fn square(lo: f64, hi: f64, n: usize) -> Self {
        Self { x_min: lo, x_max: hi, nx: n, y_min: lo, y_max: hi, ny: n }
    }

    fn coord(lo: f64, hi: f64, n: usize, i: usize) -> f64 {
        if n == 1 {
            lo
        } else {
            lo + (hi - lo) * i as f64 / (n - 1) as f64
        }
    }

    pub fn x(&self, i: usize) -> f64 {
        Self::coord(self.x_min, self.x_max, self.nx, i)
    }

    pub fn y(&self, j: usize) -> f64 {
        Self::coord(self.y_min, self.y_max, self.ny, j)
    }

    pub fn validate(&self) -> Result<(), SpectralError> {
        let ok = self.nx > 0
            && self.ny > 0
            && [self.x_min, self.x_max, self.y_min, self.y_max].iter().all(|v| v.is_finite())
            && self.x_min <= self.x_max
            && self.y_min <= self.y_max;
        if ok {
            Ok(())
        } else {
            Err(SpectralError::InvalidArgument(format!("bad grid {self:?}")))
        }
    }
}

/// Eigenvalues and `λ + ρλ²` at one grid cell; `finite` is false (and the
/// values NaN) where the Hessian was not finite.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldCell {
    pub x: f64,
    pub y: f64,
    pub lam1: f64,
    pub lam2: f64,
    pub cond1: f64,
    pub cond2: f64,
    pub finite: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenField {
    pub grid: GridSpec,
    pub rho: f64,
    /// Row-major in `y`, then `x`.
    pub cells: Vec<FieldCell>,
}

impl EigenField {
    pub fn non_finite_cells(&self) -> usize {
        self.cells.iter().filter(|c| !c.finite).count()
    }

    pub fn cell(&self, i: usize, j: usize) -> &FieldCell {
        &self.cells[j * self.grid.nx + i]
    }

    /// CSV `x,y,lam1,lam2,cond1,cond2`.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(["x", "y", "lam1", "lam2", "cond1", "cond2"])?;
        for c in &self.cells {
            wtr.write_record([c.x, c.y, c.lam1, c.lam2, c.cond1, c.cond2].map(|v| v.to_string()))?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Evaluates `λ_j + ρλ_j²` of the Hessian on every grid cell of a 2-D objective.
pub fn eigen_condition_field<T: Scalar, O: Objective<T> + ?Sized>(
    obj: &O,
    grid: &GridSpec,
    rho: T,
) -> Result<EigenField, SpectralError> {
    grid.validate()?;
    if obj.dim() != 2 {
        return Err(SpectralError::InvalidArgument(format!(
            "field needs a 2-D objective, got dimension {}",
            obj.dim()
        )));
    }
    if obj.hessian(&[T::zero(), T::zero()]).is_none() {
        return Err(SpectralError::NoHessian(obj.name().to_owned()));
    }
    let cells = (0..grid.nx * grid.ny)
        .into_par_iter()
        .map(|k| {
            let (i, j) = (k % grid.nx, k / grid.nx);
            let (x, y) = (grid.x(i), grid.y(j));
            let spectrum =
                obj.hessian(&[T::of(x), T::of(y)]).filter(|h| h.is_finite()).and_then(|h| eigendecompose(&h).ok());
            match spectrum {
                Some(e) => {
                    let (l1, l2) = (e.values[0], e.values[1]);
                    FieldCell {
                        x,
                        y,
                        lam1: l1.as_f64(),
                        lam2: l2.as_f64(),
                        cond1: (l1 + rho * l1 * l1).as_f64(),
                        cond2: (l2 + rho * l2 * l2).as_f64(),
                        finite: true,
                    }
                }
                None => {
                    FieldCell { x, y, lam1: f64::NAN, lam2: f64::NAN, cond1: f64::NAN, cond2: f64::NAN, finite: false }
                }
            }
        })
        .collect();
    Ok(EigenField { grid: *grid, rho: rho.as_f64(), cells })
}
