use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::linalg::distance;
use crate::optim::Trajectory;
use crate::scalar::Scalar;
use crate::spectral::basin::{BasinClassifier, BasinLabel};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CaseLabel {
    #[serde(rename = "Case-I")]
    CaseI,
    #[serde(rename = "Case-II")]
    CaseII,
    #[serde(rename = "Case-III-i")]
    CaseIIIi,
    #[serde(rename = "Case-III-ii")]
    CaseIIIii,
    #[serde(rename = "unclassified")]
    Unclassified,
}

impl CaseLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            CaseLabel::CaseI => "Case-I",
            CaseLabel::CaseII => "Case-II",
            CaseLabel::CaseIIIi => "Case-III-i",
            CaseLabel::CaseIIIii => "Case-III-ii",
            CaseLabel::Unclassified => "unclassified",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CaseConfig {
    /// Records per window.
    pub window: usize,
    /// Same-basin windows closer than this (on average) to the saddle are Case-II.
    pub near_distance: f64,
    /// Minimum fraction of consecutive cosine pairs that flip sign for Case-III-ii.
    pub alternation_threshold: f64,
}

impl CaseConfig {
    /// 100-record windows, near distance `10ρ`, 40% alternation.
    pub fn for_rho(rho: f64) -> Self {
        Self { window: 100, near_distance: 10.0 * rho, alternation_threshold: 0.4 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseEvidence {
    /// Records with `basin(w_p) ≠ basin(w)`.
    pub perturbed_crossings: usize,
    /// Consecutive records where `basin(w)` changes.
    pub iterate_crossings: usize,
    pub cosine_sign_flips: usize,
    pub alternation_rate: f64,
    pub mean_saddle_distance: f64,
    pub basin_w: BasinLabel,
    pub basin_wp_majority: BasinLabel,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseWindow {
    pub start_t: usize,
    pub end_t: usize,
    pub label: CaseLabel,
    pub evidence: CaseEvidence,
}

fn majority(labels: &[BasinLabel]) -> BasinLabel {
    let mut best = (BasinLabel::Unclassified, 0);
    for &l in labels {
        let c = labels.iter().filter(|&&m| m == l).count();
        if c > best.1 {
            best = (l, c);
        }
    }
    best.0
}

/// Splits the recorded trajectory into consecutive windows of `cfg.window`
/// records and labels each. A trailing window shorter than `cfg.window` is
/// unclassified. Windows count records, so trajectories meant for case labels
/// should be recorded every step.
pub fn classify_case<T: Scalar, C: BasinClassifier<T>>(
    trajectory: &Trajectory<T>,
    saddle: &[T],
    classifier: &C,
    cfg: &CaseConfig,
) -> Vec<CaseWindow> {
    let records = &trajectory.records;
    let labels: Vec<(BasinLabel, BasinLabel)> = records
        .par_iter()
        .map(|r| {
            let bw = classifier.classify(r.w.as_slice());
            let bp = if r.w_p == r.w { bw } else { classifier.classify(r.w_p.as_slice()) };
            (bw, bp)
        })
        .collect();
    let window = cfg.window.max(2);

    records
        .chunks(window)
        .zip(labels.chunks(window))
        .map(|(recs, labs)| {
            let bw: Vec<BasinLabel> = labs.iter().map(|l| l.0).collect();
            let bp: Vec<BasinLabel> = labs.iter().map(|l| l.1).collect();
            let perturbed_crossings = labs.iter().filter(|(a, b)| a != b).count();
            let iterate_crossings = bw.windows(2).filter(|p| p[0] != p[1]).count();
            let cosine_sign_flips = recs
                .windows(2)
                .filter(|p| match (p[0].grad_cosine, p[1].grad_cosine) {
                    (Some(a), Some(b)) => (a > T::zero() && b < T::zero()) || (a < T::zero() && b > T::zero()),
                    _ => false,
                })
                .count();
            let alternation_rate = cosine_sign_flips as f64 / (recs.len().max(2) - 1) as f64;
            let mean_saddle_distance =
                recs.iter().map(|r| distance(r.w.as_slice(), saddle).as_f64()).sum::<f64>() / recs.len() as f64;

            let label = if recs.len() < window {
                CaseLabel::Unclassified
            } else if perturbed_crossings > 0 {
                if alternation_rate >= cfg.alternation_threshold {
                    CaseLabel::CaseIIIii
                } else if iterate_crossings == 0 {
                    CaseLabel::CaseIIIi
                } else {
                    CaseLabel::Unclassified
                }
            } else if mean_saddle_distance < cfg.near_distance {
                CaseLabel::CaseII
            } else {
                CaseLabel::CaseI
            };
            CaseWindow {
                start_t: recs[0].t,
                end_t: recs[recs.len() - 1].t,
                label,
                evidence: CaseEvidence {
                    perturbed_crossings,
                    iterate_crossings,
                    cosine_sign_flips,
                    alternation_rate,
                    mean_saddle_distance,
                    basin_w: majority(&bw),
                    basin_wp_majority: majority(&bp),
                },
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Point;
    use crate::objective::Beale;
    use crate::optim::{run_trajectory, OptimConfig, StepRecord, Termination};

    struct HalfPlane;

    impl BasinClassifier<f64> for HalfPlane {
        fn classify(&self, w: &[f64]) -> BasinLabel {
            if w[0] >= 0.0 {
                BasinLabel::Minimum(0)
            } else {
                BasinLabel::Diverged
            }
        }
    }

    fn synthetic(points: impl Fn(usize) -> ([f64; 2], [f64; 2], Option<f64>), n: usize) -> Trajectory<f64> {
        let records = (0..n)
            .map(|t| {
                let (w, wp, c) = points(t);
                StepRecord {
                    t,
                    w: Point::new(w.to_vec()),
                    w_p: Point::new(wp.to_vec()),
                    loss: 0.0,
                    grad_norm: 1.0,
                    grad_cosine: c,
                }
            })
            .collect();
        Trajectory {
            objective: "synthetic".into(),
            config: OptimConfig::gd(0.1),
            w0: Point::new(vec![0.0, 0.0]),
            records,
            termination: Termination::MaxSteps,
            steps_taken: n,
        }
    }

    #[test]
    fn oscillating_perturbation_is_case_three_ii() {
        let tr = synthetic(
            |t| {
                let s = if t % 2 == 0 { 1.0 } else { -1.0 };
                ([0.01, 0.0], [0.01 - 0.05 * (1.0 + s), 0.0], Some(s))
            },
            250,
        );
        let w = classify_case(&tr, &[0.0, 0.0], &HalfPlane, &CaseConfig::for_rho(0.1));
        assert_eq!(w.len(), 3);
        assert_eq!(w[0].label, CaseLabel::CaseIIIii);
        assert_eq!(w[1].label, CaseLabel::CaseIIIii);
        assert_eq!(w[2].label, CaseLabel::Unclassified);
        assert!(w[0].evidence.alternation_rate > 0.98);
    }

    #[test]
    fn steady_crossing_without_flips_is_case_three_i() {
        let tr = synthetic(|_| ([0.01, 0.0], [-0.05, 0.0], Some(-0.9)), 100);
        let w = classify_case(&tr, &[0.0, 0.0], &HalfPlane, &CaseConfig::for_rho(0.1));
        assert_eq!(w[0].label, CaseLabel::CaseIIIi);
    }

    #[test]
    fn same_basin_near_and_far() {
        let near = synthetic(|_| ([0.2, 0.0], [0.3, 0.0], Some(1.0)), 100);
        let far = synthetic(|_| ([5.0, 0.0], [5.1, 0.0], Some(1.0)), 100);
        let cfg = CaseConfig::for_rho(0.1);
        assert_eq!(classify_case(&near, &[0.0, 0.0], &HalfPlane, &cfg)[0].label, CaseLabel::CaseII);
        assert_eq!(classify_case(&far, &[0.0, 0.0], &HalfPlane, &cfg)[0].label, CaseLabel::CaseI);
    }

    #[test]
    fn gd_run_is_case_one() {
        let cfg = OptimConfig::gd(1e-4).with_max_steps(999);
        let tr = run_trajectory(&Beale, &cfg, &Point::new(vec![2.5, 0.3])).unwrap();
        let w = classify_case(&tr, &[0.0, 1.0], &HalfPlane, &CaseConfig::for_rho(0.0));
        assert_eq!(w.len(), 10);
        assert!(w.iter().all(|x| x.label == CaseLabel::CaseI));
    }
}
