use proptest::prelude::*;
use saddle_core::objective::{Objective, ObjectiveId, QuadraticSaddle, ToyNn};
use saddle_core::optim::{
    run_stochastic_trajectory, run_trajectory, sam_step, Method, OptimConfig, RhoMode, Termination,
};
use saddle_core::Point64;

fn objective(i: usize) -> Box<dyn Objective<f64>> {
    ObjectiveId::ALL[i % ObjectiveId::ALL.len()].build()
}

fn rho_mode(normalized: bool) -> RhoMode {
    if normalized {
        RhoMode::GradNormalized
    } else {
        RhoMode::Constant
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn zero_rho_sam_is_gd(
        which in 0usize..3,
        x in -1.5f64..1.5,
        y in -1.5f64..1.5,
        eta in 1e-4f64..1e-2,
        normalized in any::<bool>(),
        gamma in prop_oneof![Just(0.0), 0.0f64..0.95],
    ) {
        let obj = objective(which);
        let w0 = Point64::new(vec![x, y]);
        let gd = OptimConfig::gd(eta).with_momentum(gamma, 0.0).with_max_steps(300);
        let mut sam = gd.clone();
        sam.method = Method::Sam;
        sam.rho_mode = rho_mode(normalized);
        let a = run_trajectory(obj.as_ref(), &gd, &w0).unwrap();
        let b = run_trajectory(obj.as_ref(), &sam, &w0).unwrap();
        prop_assert_eq!(a.records, b.records);
        prop_assert_eq!(a.termination, b.termination);
    }

    #[test]
    fn zero_momentum_is_plain(
        which in 0usize..3,
        x in -1.5f64..1.5,
        y in -1.5f64..1.5,
        rho in 0.0f64..0.3,
        normalized in any::<bool>(),
    ) {
        let obj = objective(which);
        let w0 = Point64::new(vec![x, y]);
        let plain = OptimConfig::sam(1e-3, rho, rho_mode(normalized)).with_max_steps(300);
        let zero_momentum = plain.clone().with_momentum(0.0, 0.0);
        let a = run_trajectory(obj.as_ref(), &plain, &w0).unwrap();
        let b = run_trajectory(obj.as_ref(), &zero_momentum, &w0).unwrap();
        prop_assert_eq!(a.records, b.records);
    }

    #[test]
    fn cosine_in_range(which in 0usize..3, x in -2.0f64..2.0, y in -2.0f64..2.0, rho in 0.0f64..1.0) {
        let obj = objective(which);
        let cfg = OptimConfig::sam(1e-3, rho, RhoMode::GradNormalized).with_max_steps(50);
        let tr = run_trajectory(obj.as_ref(), &cfg, &Point64::new(vec![x, y])).unwrap();
        for r in &tr.records {
            if let Some(c) = r.grad_cosine {
                prop_assert!((-1.0..=1.0).contains(&c));
            }
        }
    }
}

#[test]
fn identical_inputs_give_identical_bytes() {
    let toy = ToyNn::<f64>::default();
    let cfg = OptimConfig::sam(0.005, 0.1, RhoMode::GradNormalized).with_max_steps(2000).with_seed(42);
    let w0 = Point64::new(vec![0.03, 0.7]);
    let run = || {
        let tr = run_stochastic_trajectory(&toy, "toy_nn", &cfg, &w0).unwrap();
        (tr.to_csv_string(), serde_json::to_string(&tr.manifest()).unwrap())
    };
    assert_eq!(run(), run());
}

#[test]
fn sam_fixed_point_on_quadratic_saddle() {
    // ∇ℓ(0,1) = (0,−2); w_p = (0,1) + 0.5·(0,−2) = (0,0), where the gradient vanishes.
    let cfg = OptimConfig::sam(0.1, 0.5, RhoMode::Constant);
    let w = Point64::new(vec![0.0, 1.0]);
    let step = sam_step(&QuadraticSaddle, &w, &cfg).unwrap();
    assert_eq!(step.w_next, w);
    let tr = run_trajectory(&QuadraticSaddle, &cfg.with_max_steps(1000), &w).unwrap();
    assert!(tr.records.iter().all(|r| r.w == w));
    assert_eq!(tr.termination, Termination::MaxSteps);
}

#[test]
fn single_precision_tracks_double() {
    let cfg64 = OptimConfig::<f64>::sam(1e-3, 0.05, RhoMode::GradNormalized).with_max_steps(500);
    let cfg32 = OptimConfig::<f32>::sam(1e-3, 0.05, RhoMode::GradNormalized).with_max_steps(500);
    let obj64 = ObjectiveId::Beale.build::<f64>();
    let obj32 = ObjectiveId::Beale.build::<f32>();
    let a = run_trajectory(obj64.as_ref(), &cfg64, &Point64::new(vec![1.0, 1.0])).unwrap();
    let b = run_trajectory(obj32.as_ref(), &cfg32, &saddle_core::Point32::new(vec![1.0, 1.0])).unwrap();
    let (pa, pb) = (a.final_point().unwrap(), b.final_point().unwrap());
    for i in 0..2 {
        assert!((pa[i] - pb[i] as f64).abs() < 1e-3, "{pa:?} {pb:?} {:?} {:?}", a.termination, b.termination);
    }
}
