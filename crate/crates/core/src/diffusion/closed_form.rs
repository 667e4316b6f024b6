use serde::{Deserialize, Serialize};

use crate::diffusion::model::SaddleModel;
use crate::diffusion::DiffusionError;
use crate::linalg::Matrix;
use crate::scalar::Scalar;

/// Below this `1 − γ` the momentum MSD returns its `γ → 1` asymptote.
pub const MOMENTUM_GUARD: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaBranch {
    Closed,
    /// `λ(1+ρλ)² = 0`: the limit `η|λ|t/B`.
    RemovableLimit,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SigmaSq<T> {
    pub value: T,
    pub branch: SigmaBranch,
}

fn check_common<T: Scalar>(t: T, eta: T, batch: T) -> Result<(), DiffusionError> {
    if !(t >= T::zero()) || !t.is_finite() {
        return Err(DiffusionError::InvalidArgument(format!("t must be nonnegative, got {t}")));
    }
    if !(eta > T::zero()) {
        return Err(DiffusionError::InvalidArgument(format!("eta must be positive, got {eta}")));
    }
    if !(batch >= T::one()) {
        return Err(DiffusionError::InvalidArgument(format!("batch size must be at least 1, got {batch}")));
    }
    Ok(())
}

/// `(1 − e^{−2kt})/(2k)`, continuous through `k = 0` where it equals `t`.
fn ou_kernel<T: Scalar>(k: T, t: T) -> (T, SigmaBranch) {
    if k == T::zero() {
        (t, SigmaBranch::RemovableLimit)
    } else {
        let two_k = T::of(2.0) * k;
        (-(-two_k * t).exp_m1() / two_k, SigmaBranch::Closed)
    }
}

/// Variance along one eigendirection at time `t` after starting at the saddle:
/// `η|λ| / (2Bλ(1+ρλ)²) · (1 − exp(−2λ(1+ρλ)² t))`.
pub fn sigma_sq<T: Scalar>(t: T, lambda: T, eta: T, batch: T, rho: T) -> Result<SigmaSq<T>, DiffusionError> {
    check_common(t, eta, batch)?;
    let s = T::one() + rho * lambda;
    let (kernel, branch) = ou_kernel(lambda * s * s, t);
    Ok(SigmaSq { value: eta * lambda.abs() / batch * kernel, branch })
}

/// Small-`|λ|t` gap between SGD and SAM mean squared displacement: `2ηt²|λ|³ρ/B`.
pub fn msd_gap<T: Scalar>(t: T, lambda: T, eta: T, batch: T, rho: T) -> T {
    let a = lambda.abs();
    T::of(2.0) * eta * t * t * a * a * a * rho / batch
}

/// Constants of the momentum MSD.
///
/// `c2 = η/t` depends on `t`; it is kept exactly in that form.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentumConstants<T> {
    pub c1: T,
    pub c2: T,
    pub c3: T,
    pub c4: T,
}

/// `C₁ = η²|λ|/2`, `C₂ = η/t`, `C₃ = η|λ|/(2λ(1+ρλ)²)`, `C₄ = 2λ(1+ρλ)²t`.
pub fn momentum_constants<T: Scalar>(t: T, lambda: T, eta: T, rho: T) -> MomentumConstants<T> {
    let s = T::one() + rho * lambda;
    let k = lambda * s * s;
    let two = T::of(2.0);
    MomentumConstants {
        c1: eta * eta * lambda.abs() / two,
        c2: eta / t,
        c3: eta * lambda.abs() / (two * k),
        c4: two * k * t,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentumBranch {
    Formula,
    /// `1 − γ` below the guard: `(C₁C₂² + C₃)/((1−γ)B)`.
    Asymptote,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentumMsd<T> {
    pub value: T,
    pub asymptote: T,
    pub branch: MomentumBranch,
}

/// Mean squared displacement with heavy-ball momentum `γ` (no dampening):
///
/// `C₁(1−e^{−C₂(1−γ)})²/((1−γ)³B) + C₃(1−e^{−C₄/(1−γ)})/((1−γ)B)`.
///
/// The `1/((1−γ)B)` asymptote is the `γ → 1` limit only when `C₄ > 0`; for a
/// negative eigenvalue the second term grows like `e^{|C₄|/(1−γ)}` instead.
/// At `γ = 0` this does not reduce to [`sigma_sq`]; the two come from inertial
/// and overdamped descriptions respectively.
pub fn msd_momentum<T: Scalar>(
    t: T,
    lambda: T,
    eta: T,
    batch: T,
    rho: T,
    gamma: T,
) -> Result<MomentumMsd<T>, DiffusionError> {
    check_common(t, eta, batch)?;
    if !(t > T::zero()) {
        return Err(DiffusionError::InvalidArgument("t must be positive for the momentum MSD".to_owned()));
    }
    if !(gamma >= T::zero() && gamma < T::one()) {
        return Err(DiffusionError::InvalidArgument(format!("gamma must lie in [0, 1), got {gamma}")));
    }
    let c = momentum_constants(t, lambda, eta, rho);
    let x = T::one() - gamma;
    let asymptote = (c.c1 * c.c2 * c.c2 + c.c3) / (x * batch);
    if x < T::of(MOMENTUM_GUARD) {
        return Ok(MomentumMsd { value: asymptote, asymptote, branch: MomentumBranch::Asymptote });
    }
    let inertial = -(-c.c2 * x).exp_m1();
    let first = c.c1 * inertial * inertial / (x * x * x * batch);
    // C₃(1 − e^{−C₄/x}) written through the OU kernel so a zero rate stays finite.
    let s = T::one() + rho * lambda;
    let (kernel, _) = ou_kernel(lambda * s * s, t / x);
    let second = eta * lambda.abs() * kernel / (x * batch);
    Ok(MomentumMsd { value: first + second, asymptote, branch: MomentumBranch::Formula })
}

/// Closed-form Gaussian law of `w(t)` started at the saddle: mean `d`,
/// covariance `Q diag(σ²(t)) Qᵀ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiffusionForecast<T> {
    pub t: T,
    pub sigma_sq: Vec<T>,
    pub branches: Vec<SigmaBranch>,
    pub covariance: Matrix<T>,
    pub momentum_constants: Vec<MomentumConstants<T>>,
}

pub fn forecast<T: Scalar>(model: &SaddleModel<T>, t: T) -> Result<DiffusionForecast<T>, DiffusionError> {
    model.validate()?;
    let mut sigma = Vec::with_capacity(model.dim());
    let mut branches = Vec::with_capacity(model.dim());
    for &l in &model.eigenvalues {
        let s = sigma_sq(t, l, model.eta, model.batch_size, model.rho)?;
        sigma.push(s.value);
        branches.push(s.branch);
    }
    Ok(DiffusionForecast {
        t,
        covariance: model.in_original_coordinates(&sigma),
        momentum_constants: model.eigenvalues.iter().map(|&l| momentum_constants(t, l, model.eta, model.rho)).collect(),
        sigma_sq: sigma,
        branches,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sigma(t: f64, l: f64, eta: f64, b: f64, rho: f64) -> f64 {
        sigma_sq(t, l, eta, b, rho).unwrap().value
    }

    #[test]
    fn sgd_form_at_zero_rho() {
        let (t, l, eta, b): (f64, f64, f64, f64) = (0.7, -1.3, 0.05, 4.0);
        let direct = eta * l.abs() / (2.0 * b * l) * (1.0 - (-2.0 * l * t).exp());
        assert!((sigma(t, l, eta, b, 0.0) - direct).abs() < 1e-14 * direct.abs());
    }

    #[test]
    fn worked_value() {
        let expected = 0.05 * (2.0f64.exp() - 1.0);
        assert!((sigma(0.5, -2.0, 0.1, 1.0, 1.0) - expected).abs() < 1e-12);
        assert!((expected - 0.31945).abs() < 1e-5);
    }

    #[test]
    fn zero_time_is_zero() {
        assert_eq!(sigma(0.0, -2.0, 0.1, 1.0, 0.3), 0.0);
    }

    #[test]
    fn small_time_is_linear() {
        let (t, l, eta, b): (f64, f64, f64, f64) = (1e-6, -2.0, 0.1, 3.0);
        let lin = eta * l.abs() * t / b;
        assert!(((sigma(t, l, eta, b, 0.4) - lin) / lin).abs() < 1e-4);
    }

    #[test]
    fn removable_singularity() {
        let s = sigma_sq(0.3f64, -2.0, 0.1, 2.0, 0.5).unwrap();
        assert_eq!(s.branch, SigmaBranch::RemovableLimit);
        assert!((s.value - 0.1 * 2.0 * 0.3 / 2.0).abs() < 1e-15);
        // Continuity from either side.
        for rho in [0.5 - 1e-9, 0.5 + 1e-9] {
            assert!((sigma(0.3, -2.0, 0.1, 2.0, rho) - s.value).abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(sigma_sq(-1.0, -2.0, 0.1, 1.0, 0.0).is_err());
        assert!(sigma_sq(1.0, -2.0, 0.1, 0.5, 0.0).is_err());
    }

    #[test]
    fn gap_examples() {
        assert_eq!(msd_gap(1.0f64, -2.0, 0.01, 16.0, 0.0), 0.0);
        assert!((msd_gap(1.0f64, -2.0, 0.01, 16.0, 0.1) - 0.001).abs() < 1e-15);
    }

    #[test]
    fn gap_matches_exact_difference_at_small_lambda_t() {
        let (l, eta, b, rho): (f64, f64, f64, f64) = (-0.5, 0.1, 1.0, 0.1);
        let t = 0.01 / l.abs();
        let exact = sigma(t, l, eta, b, 0.0) - sigma(t, l, eta, b, rho);
        let approx = msd_gap(t, l, eta, b, rho);
        assert!(exact > 0.0);
        assert!(((exact - approx) / approx).abs() < 0.2);
    }

    #[test]
    fn momentum_monotone_example() {
        let v = |g: f64| msd_momentum(1.0, -2.0, 0.1, 1.0, 0.1, g).unwrap().value;
        assert!(v(0.9) > v(0.5));
        assert!(v(0.5) > v(0.0));
    }

    #[test]
    fn momentum_batch_scaling() {
        let v = |b: f64| msd_momentum(1.0, -2.0, 0.1, b, 0.1, 0.5).unwrap().value;
        assert!((v(1.0) - 8.0 * v(8.0)).abs() < 1e-12 * v(1.0));
    }

    #[test]
    fn momentum_asymptote_for_positive_curvature() {
        let m = msd_momentum(1.0f64, 2.0, 0.1, 1.0, 0.1, 0.9999).unwrap();
        assert_eq!(m.branch, MomentumBranch::Formula);
        assert!(((m.value - m.asymptote) / m.asymptote).abs() < 0.01);
    }

    #[test]
    fn momentum_guard_branch() {
        let m = msd_momentum(1.0f64, 2.0, 0.1, 1.0, 0.1, 1.0 - 1e-12).unwrap();
        assert_eq!(m.branch, MomentumBranch::Asymptote);
        assert!(m.value.is_finite());
        assert!(msd_momentum(1.0, 2.0, 0.1, 1.0, 0.1, 1.0).is_err());
    }

    #[test]
    fn momentum_constants_as_defined() {
        let c = momentum_constants(2.0f64, -2.0, 0.1, 0.1);
        let k = -2.0 * 0.8f64 * 0.8;
        assert!((c.c1 - 0.01).abs() < 1e-15);
        assert!((c.c2 - 0.05).abs() < 1e-15);
        assert!((c.c3 - 0.2 / (2.0 * k)).abs() < 1e-15);
        assert!((c.c4 - 2.0 * k * 2.0).abs() < 1e-15);
    }

    #[test]
    fn forecast_covariance_rotates() {
        let q = crate::linalg::rotation2(0.4);
        let m = SaddleModel::new(vec![-1.0, 2.0], q, 0.1, 1.0, 0.2).unwrap();
        let f = forecast(&m, 0.5).unwrap();
        let trace = f.covariance[(0, 0)] + f.covariance[(1, 1)];
        assert!((trace - f.sigma_sq.iter().sum::<f64>()).abs() < 1e-14);
        assert!(f.sigma_sq.iter().all(|&s| s > 0.0));
    }
}
