use serde::{Deserialize, Serialize};

use crate::linalg::{all_finite, dot, norm, Point};
use crate::objective::{check_point, Objective};
use crate::scalar::Scalar;
use crate::spectral::critical::CriticalPoint;
use crate::spectral::flow::{check_control, integrate_flow, step_plan, FlowKind, FlowPath, Rk4, StepControl};
use crate::spectral::SpectralError;

/// Where pure GD flow from a point ends up.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "label", content = "site")]
pub enum BasinLabel {
    /// Index into the list of minimum sites.
    Minimum(usize),
    Diverged,
    /// Still moving slowly near a non-minimal critical point at `t_max`.
    SaddleTrapped,
    Unclassified,
}

/// An attracting set to test arrival against.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MinimumSite<T> {
    Point(Point<T>),
    /// The toy network's minima `w₂w₁² = ½`; "distance" is `|w₂w₁² − ½|`.
    ToyNnManifold,
}

impl<T: Scalar> MinimumSite<T> {
    pub fn distance(&self, w: &[T]) -> T {
        match self {
            MinimumSite::Point(p) => p.distance(&Point::new(w.to_vec())),
            MinimumSite::ToyNnManifold => (w[1] * w[0] * w[0] - T::of(0.5)).abs(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BasinConfig<T> {
    pub control: StepControl<T>,
    pub t_max: T,
    /// Arrival radius around a minimum site.
    pub radius: T,
    /// Below this gradient norm at `t_max` the point counts as saddle-trapped.
    pub trapped_grad_norm: T,
}

impl<T: Scalar> Default for BasinConfig<T> {
    fn default() -> Self {
        Self {
            control: StepControl::default(),
            t_max: T::of(50.0),
            radius: T::of(1e-3),
            trapped_grad_norm: T::of(1e-6),
        }
    }
}

/// Integrates GD flow from `w` until it comes within `cfg.radius` of a minimum
/// site, leaves the divergence ball, or reaches `cfg.t_max`.
pub fn classify_basin<T: Scalar, O: Objective<T> + ?Sized>(
    obj: &O,
    w: &Point<T>,
    minima: &[MinimumSite<T>],
    cfg: &BasinConfig<T>,
) -> Result<BasinLabel, SpectralError> {
    check_point(obj.dim(), w)?;
    check_control(cfg.t_max, &cfg.control)?;
    Ok(classify_unchecked(obj, w.as_slice(), minima, cfg))
}

fn arrived<T: Scalar>(w: &[T], minima: &[MinimumSite<T>], radius: T) -> Option<usize> {
    minima.iter().position(|m| m.distance(w) < radius)
}

fn classify_unchecked<T: Scalar, O: Objective<T> + ?Sized>(
    obj: &O,
    w0: &[T],
    minima: &[MinimumSite<T>],
    cfg: &BasinConfig<T>,
) -> BasinLabel {
    if !all_finite(w0) {
        return BasinLabel::Diverged;
    }
    if let Some(i) = arrived(w0, minima, cfg.radius) {
        return BasinLabel::Minimum(i);
    }
    let (n_steps, last_h) = step_plan(cfg.t_max, cfg.control.h);
    let mut w = w0.to_vec();
    let mut rk = Rk4::new(w.len());
    for i in 0..n_steps {
        let h = if i + 1 == n_steps { last_h } else { cfg.control.h };
        rk.step(obj, FlowKind::Gd, &mut w, h);
        if !all_finite(&w) || norm(&w) > cfg.control.divergence_threshold {
            return BasinLabel::Diverged;
        }
        if let Some(i) = arrived(&w, minima, cfg.radius) {
            return BasinLabel::Minimum(i);
        }
    }
    if norm(&obj.gradient(&w)) < cfg.trapped_grad_norm {
        BasinLabel::SaddleTrapped
    } else {
        BasinLabel::Unclassified
    }
}

/// Assigns a basin label to a point.
pub trait BasinClassifier<T: Scalar>: Sync {
    fn classify(&self, w: &[T]) -> BasinLabel;
}

/// Classifies by integrating GD flow (see [`classify_basin`]).
pub struct FlowClassifier<'a, T, O: ?Sized> {
    pub obj: &'a O,
    pub minima: Vec<MinimumSite<T>>,
    pub config: BasinConfig<T>,
}

impl<'a, T: Scalar, O: Objective<T> + ?Sized> FlowClassifier<'a, T, O> {
    pub fn new(obj: &'a O, minima: Vec<MinimumSite<T>>, config: BasinConfig<T>) -> Result<Self, SpectralError> {
        check_control(config.t_max, &config.control)?;
        Ok(Self { obj, minima, config })
    }
}

impl<T: Scalar, O: Objective<T> + ?Sized> BasinClassifier<T> for FlowClassifier<'_, T, O> {
    fn classify(&self, w: &[T]) -> BasinLabel {
        classify_unchecked(self.obj, w, &self.minima, &self.config)
    }
}

/// Near an index-one saddle the basin boundary is its stable manifold, which is
/// tangent to the hyperplane orthogonal to the unstable eigenvector. Inside
/// `radius` this classifier uses the side of that hyperplane; outside it defers
/// to `fallback`.
pub struct SaddleSideClassifier<T, C> {
    pub saddle: Vec<T>,
    pub direction: Vec<T>,
    pub radius: T,
    /// Labels of the `+direction` and `−direction` sides.
    pub sides: [BasinLabel; 2],
    pub fallback: C,
}

impl<T: Scalar, C: BasinClassifier<T>> SaddleSideClassifier<T, C> {
    /// Labels the two sides by classifying the endpoints of the unstable-manifold probe.
    pub fn calibrate<O: Objective<T> + ?Sized>(
        obj: &O,
        saddle: &CriticalPoint<T>,
        radius: T,
        fallback: C,
        eps: T,
        t_probe: T,
    ) -> Result<Self, SpectralError> {
        let control = StepControl::default().with_record_every(usize::MAX);
        let [plus, minus] = unstable_manifold_probe(obj, saddle, eps, t_probe, &control)?;
        let sides = [plus, minus].map(|p| {
            if p.diverged {
                BasinLabel::Diverged
            } else {
                fallback.classify(p.endpoint().as_slice())
            }
        });
        Ok(Self {
            saddle: saddle.location.as_slice().to_vec(),
            direction: saddle.spectral.unstable_direction().expect("probe checked the index"),
            radius,
            sides,
            fallback,
        })
    }
}

impl<T: Scalar, C: BasinClassifier<T>> BasinClassifier<T> for SaddleSideClassifier<T, C> {
    fn classify(&self, w: &[T]) -> BasinLabel {
        let offset: Vec<T> = w.iter().zip(&self.saddle).map(|(&a, &b)| a - b).collect();
        if norm(&offset) < self.radius {
            let side = dot(&offset, &self.direction);
            if side > T::zero() {
                return self.sides[0];
            }
            if side < T::zero() {
                return self.sides[1];
            }
        }
        self.fallback.classify(w)
    }
}

/// GD flow from `saddle ± eps·q₁`, where `q₁` is the eigenvector of the most
/// negative eigenvalue. Returns the `+` branch first.
pub fn unstable_manifold_probe<T: Scalar, O: Objective<T> + ?Sized>(
    obj: &O,
    saddle: &CriticalPoint<T>,
    eps: T,
    t_end: T,
    control: &StepControl<T>,
) -> Result<[FlowPath<T>; 2], SpectralError> {
    let q = saddle.spectral.unstable_direction().ok_or_else(|| {
        SpectralError::Contract("unstable-manifold probe needs a critical point of index at least 1".to_owned())
    })?;
    let start =
        |sign: T| Point::new(saddle.location.as_slice().iter().zip(&q).map(|(&d, &qi)| d + sign * eps * qi).collect());
    let plus = integrate_flow(obj, &start(T::one()), FlowKind::Gd, t_end, control)?;
    let minus = integrate_flow(obj, &start(-T::one()), FlowKind::Gd, t_end, control)?;
    Ok([plus, minus])
}
