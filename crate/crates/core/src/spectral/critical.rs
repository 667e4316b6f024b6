use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::linalg::{norm, Matrix, Point};
use crate::objective::{check_point, Objective};
use crate::scalar::Scalar;
use crate::spectral::eigen::eigendecompose;
use crate::spectral::SpectralError;

/// Eigenvalues with `|λ| < DEGENERATE_EIGENVALUE` make a report degenerate.
pub const DEGENERATE_EIGENVALUE: f64 = 1e-8;
const DEDUP_DISTANCE: f64 = 1e-6;

/// Per-eigenvalue flags `λ_j + ρλ_j² ≥ 0`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttractorCondition {
    pub flags: Vec<bool>,
    /// Every negative eigenvalue satisfies its flag.
    pub overall: bool,
}

pub fn attractor_condition<T: Scalar>(eigenvalues: &[T], rho: T) -> AttractorCondition {
    let flags: Vec<bool> = eigenvalues.iter().map(|&l| l + rho * l * l >= T::zero()).collect();
    let overall = eigenvalues.iter().zip(&flags).all(|(&l, &f)| l >= T::zero() || f);
    AttractorCondition { flags, overall }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport<T> {
    /// Ascending.
    pub eigenvalues: Vec<T>,
    /// Orthonormal columns aligned with `eigenvalues`.
    pub eigenvectors: Matrix<T>,
    /// Number of negative eigenvalues.
    pub index: usize,
    /// Some `|λ| < 1e-8`; attractor classification is skipped.
    pub degenerate: bool,
}

impl<T: Scalar> SpectralReport<T> {
    pub fn from_hessian(h: &Matrix<T>) -> Result<Self, SpectralError> {
        let e = eigendecompose(h)?;
        let cutoff = T::of(DEGENERATE_EIGENVALUE);
        Ok(Self {
            index: e.values.iter().filter(|&&l| l < T::zero()).count(),
            degenerate: e.values.iter().any(|l| l.abs() < cutoff),
            eigenvalues: e.values,
            eigenvectors: e.vectors,
        })
    }

    pub fn attractor_flags(&self, rho: T) -> Vec<bool> {
        attractor_condition(&self.eigenvalues, rho).flags
    }

    /// `None` for degenerate reports.
    pub fn attractor(&self, rho: T) -> Option<AttractorCondition> {
        (!self.degenerate).then(|| attractor_condition(&self.eigenvalues, rho))
    }

    /// Eigenvector of the most negative eigenvalue, if any.
    pub fn unstable_direction(&self) -> Option<Vec<T>> {
        (self.index > 0).then(|| self.eigenvectors.column(0))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoint<T> {
    pub location: Point<T>,
    pub grad_norm_at_solution: T,
    pub spectral: SpectralReport<T>,
}

impl<T: Scalar> CriticalPoint<T> {
    /// Spectral report at a known location, without a Newton solve.
    pub fn at<O: Objective<T> + ?Sized>(obj: &O, location: Point<T>) -> Result<Self, SpectralError> {
        check_point(obj.dim(), &location)?;
        let w = location.as_slice();
        let h = obj.hessian(w).ok_or_else(|| SpectralError::NoHessian(obj.name().to_owned()))?;
        Ok(Self {
            grad_norm_at_solution: norm(&obj.gradient(w)),
            spectral: SpectralReport::from_hessian(&h)?,
            location,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NewtonConfig<T> {
    pub tol: T,
    pub max_iter: usize,
    pub max_halvings: usize,
}

impl<T: Scalar> Default for NewtonConfig<T> {
    fn default() -> Self {
        Self { tol: T::of(1e-12), max_iter: 100, max_halvings: 40 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedFailure {
    pub seed_index: usize,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CriticalSearch<T> {
    /// Deduplicated, in order of first discovery by seed index.
    pub points: Vec<CriticalPoint<T>>,
    pub failures: Vec<SeedFailure>,
}

/// Pseudo-inverse Newton direction `−Σ (qᵢ·g / λᵢ) qᵢ` over the non-negligible eigenvalues.
fn newton_direction<T: Scalar>(h: &Matrix<T>, g: &[T]) -> Result<Vec<T>, String> {
    let e = eigendecompose(h).map_err(|err| err.to_string())?;
    let lmax = e.values.iter().fold(T::zero(), |m, l| m.max(l.abs()));
    let cutoff = lmax * T::of(1e-10);
    if lmax == T::zero() {
        return Err("Hessian is zero".to_owned());
    }
    let n = g.len();
    let mut d = vec![T::zero(); n];
    for (k, &l) in e.values.iter().enumerate() {
        if l.abs() <= cutoff {
            continue;
        }
        let q = e.vectors.column(k);
        let coef = q.iter().zip(g).map(|(&a, &b)| a * b).sum::<T>() / l;
        for (di, &qi) in d.iter_mut().zip(&q) {
            *di -= coef * qi;
        }
    }
    Ok(d)
}

fn newton<T: Scalar, O: Objective<T> + ?Sized>(
    obj: &O,
    seed: &[T],
    cfg: &NewtonConfig<T>,
) -> Result<(Vec<T>, T), String> {
    let mut w = seed.to_vec();
    let mut g = obj.gradient(&w);
    let mut gn = norm(&g);
    for _ in 0..cfg.max_iter {
        if !gn.is_finite() {
            return Err("non-finite gradient".to_owned());
        }
        if gn < cfg.tol {
            return Ok((w, gn));
        }
        let h = obj.hessian(&w).ok_or("objective provides no Hessian")?;
        let d = newton_direction(&h, &g)?;
        let mut alpha = T::one();
        let mut accepted = false;
        for _ in 0..=cfg.max_halvings {
            let trial: Vec<T> = w.iter().zip(&d).map(|(&wi, &di)| wi + alpha * di).collect();
            let tg = obj.gradient(&trial);
            let tn = norm(&tg);
            if tn.is_finite() && tn <= gn {
                w = trial;
                g = tg;
                gn = tn;
                accepted = true;
                break;
            }
            alpha *= T::of(0.5);
        }
        if !accepted {
            return Err("damped step failed to reduce the gradient".to_owned());
        }
    }
    if gn < cfg.tol {
        Ok((w, gn))
    } else {
        Err(format!("no convergence in {} iterations (|grad| = {:e})", cfg.max_iter, gn.as_f64()))
    }
}

/// Damped Newton on `∇ℓ = 0` from every seed. Seeds that fail are reported, not fatal.
pub fn find_critical_points<T: Scalar, O: Objective<T> + ?Sized>(
    obj: &O,
    seeds: &[Point<T>],
    cfg: &NewtonConfig<T>,
) -> Result<CriticalSearch<T>, SpectralError> {
    if !(cfg.tol > T::zero()) {
        return Err(SpectralError::InvalidArgument(format!("tolerance must be positive, got {}", cfg.tol)));
    }
    for s in seeds {
        check_point(obj.dim(), s)?;
    }
    let outcomes: Vec<Result<CriticalPoint<T>, String>> = seeds
        .par_iter()
        .map(|seed| {
            let (w, gn) = newton(obj, seed.as_slice(), cfg)?;
            let h = obj.hessian(&w).ok_or("objective provides no Hessian")?;
            let spectral = SpectralReport::from_hessian(&h).map_err(|e| e.to_string())?;
            Ok(CriticalPoint { location: Point::new(w), grad_norm_at_solution: gn, spectral })
        })
        .collect();

    let mut points: Vec<CriticalPoint<T>> = Vec::new();
    let mut failures = Vec::new();
    let dedup = T::of(DEDUP_DISTANCE);
    for (seed_index, out) in outcomes.into_iter().enumerate() {
        match out {
            Ok(cp) => {
                if points.iter().all(|p| p.location.distance(&cp.location) >= dedup) {
                    points.push(cp);
                }
            }
            Err(reason) => failures.push(SeedFailure { seed_index, reason }),
        }
    }
    Ok(CriticalSearch { points, failures })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RhoAttractor {
    pub rho: f64,
    pub flags: Vec<bool>,
    pub overall: bool,
}

/// JSON record for one critical point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalPointRecord {
    pub location: Vec<f64>,
    pub eigenvalues: Vec<f64>,
    pub index: usize,
    pub degenerate: bool,
    pub grad_norm: f64,
    /// Empty for degenerate points.
    pub attractor: Vec<RhoAttractor>,
}

pub fn critical_point_records<T: Scalar>(points: &[CriticalPoint<T>], rhos: &[f64]) -> Vec<CriticalPointRecord> {
    points
        .iter()
        .map(|cp| CriticalPointRecord {
            location: cp.location.to_f64(),
            eigenvalues: cp.spectral.eigenvalues.iter().map(|l| l.as_f64()).collect(),
            index: cp.spectral.index,
            degenerate: cp.spectral.degenerate,
            grad_norm: cp.grad_norm_at_solution.as_f64(),
            attractor: rhos
                .iter()
                .filter_map(|&rho| {
                    cp.spectral.attractor(T::of(rho)).map(|a| RhoAttractor { rho, flags: a.flags, overall: a.overall })
                })
                .collect(),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::{Beale, QuadraticSaddle, ToyNn};

    fn grid(lo: f64, hi: f64, n: usize) -> Vec<Point<f64>> {
        let step = (hi - lo) / (n - 1) as f64;
        let mut out = Vec::new();
        for i in 0..n {
            for j in 0..n {
                out.push(Point::new(vec![lo + i as f64 * step, lo + j as f64 * step]));
            }
        }
        out
    }

    #[test]
    fn attractor_examples() {
        let l = [2.0, -2.0];
        assert_eq!(attractor_condition(&l, 1.0), AttractorCondition { flags: vec![true, true], overall: true });
        assert!(!attractor_condition(&l, 0.25).overall);
        assert!(attractor_condition(&l, 0.5).overall);
        assert!(!attractor_condition(&l, 0.0).overall);
    }

    #[test]
    fn beale_grid_finds_saddle() {
        let found = find_critical_points(&Beale, &grid(-4.0, 4.0, 9), &NewtonConfig::default()).unwrap();
        let saddle = found
            .points
            .iter()
            .find(|p| p.location.distance(&Point::new(vec![0.0, 1.0])) < 1e-8)
            .expect("saddle at (0, 1)");
        assert_eq!(saddle.spectral.index, 1);
        assert!((saddle.spectral.eigenvalues[0] + 27.75).abs() < 1e-9);
        assert!(saddle.grad_norm_at_solution < 1e-12);
        for (i, a) in found.points.iter().enumerate() {
            for b in &found.points[i + 1..] {
                assert!(a.location.distance(&b.location) >= 1e-6);
            }
        }
    }

    #[test]
    fn quadratic_saddle_from_any_seed() {
        let seeds = vec![Point::new(vec![3.0, -7.0]), Point::new(vec![-0.1, 0.2])];
        let found = find_critical_points(&QuadraticSaddle, &seeds, &NewtonConfig::default()).unwrap();
        assert_eq!(found.points.len(), 1);
        assert_eq!(found.points[0].location.as_slice(), &[0.0, 0.0]);
        assert_eq!(found.points[0].spectral.index, 1);
    }

    #[test]
    fn toy_nn_saddle_line() {
        let seeds = vec![Point::new(vec![0.05, 0.5]), Point::new(vec![0.05, 1.5])];
        let found = find_critical_points(&ToyNn::<f64>::default(), &seeds, &NewtonConfig::default()).unwrap();
        assert!(!found.points.is_empty());
        for p in &found.points {
            assert!(p.location[0].abs() < 1e-5, "{:?}", p.location);
            assert!(p.location[1] >= 0.0);
            assert_eq!(p.spectral.index, 1);
            // Along the line the Hessian is diag(−2w₂, 0).
            assert!((p.spectral.eigenvalues[0] + 2.0 * p.location[1]).abs() < 1e-6);
            assert!(p.spectral.eigenvalues[1].abs() < 1e-6);
        }
    }

    #[test]
    fn non_positive_tolerance_rejected() {
        let cfg = NewtonConfig { tol: 0.0, ..NewtonConfig::default() };
        assert!(find_critical_points(&Beale, &[], &cfg).is_err());
    }

    #[test]
    fn records_serialize_flags_per_rho() {
        let cp = CriticalPoint::at(&QuadraticSaddle, Point::new(vec![0.0, 0.0])).unwrap();
        let recs = critical_point_records(&[cp], &[0.25, 1.0]);
        let json = serde_json::to_value(&recs).unwrap();
        assert_eq!(json[0]["index"], 1);
        assert_eq!(json[0]["attractor"][0]["overall"], false);
        assert_eq!(json[0]["attractor"][1]["overall"], true);
        assert_eq!(json[0]["eigenvalues"][0], -2.0);
    }
}
