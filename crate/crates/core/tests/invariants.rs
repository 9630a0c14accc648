use nalgebra::DMatrix;
use proptest::prelude::*;

use cocycle_core::cocycle::{
    identity_defect, matrix_identity_defect, AdditiveCocycle, Coboundary, FiberCocycle, FiberData, IntegralCocycle,
    LogNormCocycle, Observable, OrbitDisplacement, Potential, SubadditiveCocycle,
};
use cocycle_core::density::{dlim_estimate, horizons_up_to, theorem1_exceptional_set, PhiFunction, PhiKind};
use cocycle_core::flow::{BaseSystem, RoofFunction};
use cocycle_core::met::{lyapunov_report, lyapunov_spectrum_qr, QrOptions};
use cocycle_core::{FiberPoint, MatrixCocycle, SuspensionFlow, TimeSet};

fn flows() -> Vec<SuspensionFlow> {
    vec![
        SuspensionFlow::golden_sine(),
        SuspensionFlow::golden_unit(),
        SuspensionFlow::example2(),
        SuspensionFlow::new(BaseSystem::rotation(0.3819660112501051), RoofFunction::power(0.5, 1e-9).unwrap()),
    ]
}

fn point_on(flow: &SuspensionFlow, y: f64, frac: f64) -> FiberPoint {
    FiberPoint::new(y, frac * flow.roof().eval(y))
}

fn trig() -> Observable {
    Observable::Trig {
        offset: 0.1,
        cos_amp: 0.8,
        sin_amp: 0.4,
        freq: 3.0,
        tau_coeff: -0.2,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn flow_is_a_group_action(k in 0usize..4, y in 0.0f64..1.0, frac in 0.0f64..0.999, t in 0.0f64..100.0, s in 0.0f64..100.0) {
        let flow = &flows()[k];
        let x = point_on(flow, y, frac);
        prop_assert_eq!(flow.evolve(x, 0.0).unwrap(), x);
        let whole = flow.evolve(x, t + s).unwrap();
        let split = flow.evolve(flow.evolve(x, t).unwrap(), s).unwrap();
        prop_assert!(whole.distance(&split) < 1e-9, "{whole:?} vs {split:?}");
        prop_assert!(flow.check_point(whole).is_ok());
    }

    #[test]
    fn roof_is_bounded_below(k in 0usize..4, y in 0.0f64..1.0) {
        let roof = flows()[k].roof().clone();
        prop_assert!(roof.lower_bound() > 0.0);
        prop_assert!(roof.eval(y) >= roof.lower_bound());
        prop_assert!(roof.mean() > 0.0);
    }

    #[test]
    fn additive_identity(y in 0.0f64..1.0, frac in 0.0f64..0.999, t in 0.0f64..60.0, s in 0.0f64..60.0) {
        let flow = SuspensionFlow::golden_sine();
        let x = point_on(&flow, y, frac);
        let cs: Vec<Box<dyn AdditiveCocycle>> = vec![
            Box::new(IntegralCocycle::new(flow.clone(), trig())),
            Box::new(Coboundary::new(flow.clone(), Potential::Bounded { amp: 0.5 })),
            Box::new(FiberCocycle::new(flow.clone(), FiberData::sin_times_y()).unwrap()),
        ];
        for c in &cs {
            prop_assert!(identity_defect(c.as_ref(), t, s, x).unwrap() < 1e-9, "{}", c.name());
        }
    }

    #[test]
    fn matrix_derived_cocycles_are_subadditive(y in 0.0f64..1.0, frac in 0.0f64..0.999, t in 0.0f64..40.0, s in 0.0f64..40.0, seed in 0u64..8) {
        let flow = SuspensionFlow::golden_sine();
        let a = MatrixCocycle::random_sl2(flow.clone(), seed, 8).unwrap();
        let cs: Vec<Box<dyn SubadditiveCocycle>> = vec![
            Box::new(LogNormCocycle::new(a.clone())),
            Box::new(OrbitDisplacement::new(a)),
        ];
        let x = point_on(&flow, y, frac);
        let xt = flow.evolve(x, t).unwrap();
        for c in &cs {
            let lhs = c.eval_forward(t + s, x).unwrap();
            let rhs = c.eval_forward(t, x).unwrap() + c.eval_forward(s, xt).unwrap();
            prop_assert!(lhs <= rhs + 1e-9, "{}: {lhs} > {rhs}", c.name());
        }
    }

    #[test]
    fn matrix_identity_and_nonsingular(y in 0.0f64..1.0, frac in 0.0f64..0.999, t in 0.0f64..20.0, s in 0.0f64..20.0, seed in 0u64..8) {
        let flow = SuspensionFlow::golden_sine();
        let a = MatrixCocycle::random_sl2(flow.clone(), seed, 8).unwrap();
        let x = point_on(&flow, y, frac);
        prop_assert!(matrix_identity_defect(&a, t, s, x).unwrap() < 1e-8);
        prop_assert!(a.eval(t, x).unwrap().determinant() != 0.0);
    }

    #[test]
    fn fiber_data_vanishes_at_zero(y in 0.0f64..1.0, c in -5.0f64..5.0) {
        prop_assert_eq!(FiberData::linear(c).eval(0.0, y), 0.0);
        prop_assert_eq!(FiberData::sin_times_y().eval(0.0, y), 0.0);
    }

    #[test]
    fn exponents_are_flow_invariant(s in 0.0f64..10.0, seed in 0u64..4) {
        let a = MatrixCocycle::random_sl2(SuspensionFlow::golden_sine(), seed, 8).unwrap();
        let x = FiberPoint::new(0.3, 0.45);
        let here = lyapunov_spectrum_qr(&a, x, 2000.0, QrOptions::default()).unwrap();
        let there = lyapunov_spectrum_qr(&a, a.flow().evolve(x, s).unwrap(), 2000.0, QrOptions::default()).unwrap();
        let band = here.band.iter().chain(&there.band).copied().fold(0.0, f64::max);
        for (u, v) in here.spectrum.iter().zip(&there.spectrum) {
            prop_assert!((u - v).abs() <= 2.0 * band.max(1e-9), "{u} vs {v}, band {band}");
        }
    }
}

#[test]
fn invalid_fiber_points_are_rejected() {
    let flow = SuspensionFlow::golden_unit();
    assert!(flow.check_point(FiberPoint::new(0.5, 1.0)).is_err());
    assert!(flow.check_point(FiberPoint::new(0.5, -0.1)).is_err());
    assert!(flow.check_point(FiberPoint::new(1.0, 0.1)).is_err());
}

#[test]
fn dlim_residuals_sit_inside_the_band() {
    let c = IntegralCocycle::new(SuspensionFlow::golden_sine(), trig());
    let x = FiberPoint::new(0.2, 0.1);
    let d = dlim_estimate(&c, x, &horizons_up_to(100.0, 5000.0), &TimeSet::empty(), 1e-2).unwrap();
    assert_eq!(d.exceptional_measure, d.exceptional.measure());
    let n = d.residuals.len();
    for r in &d.residuals[n - n.div_ceil(3)..] {
        assert!((r - d.beta).abs() <= d.band + 1e-15, "{r} vs {} ± {}", d.beta, d.band);
    }

    let e = theorem1_exceptional_set(&Coboundary::example1(), x, None, 500.0, Default::default()).unwrap();
    let d = dlim_estimate(&Coboundary::example1(), x, &horizons_up_to(50.0, 400.0), &e.set, 1e-2).unwrap();
    assert_eq!(d.exceptional_measure, e.set.measure());
}

#[test]
fn phi_shapes() {
    let inc = PhiFunction::power(0.25).unwrap();
    assert_eq!(inc.kind(), PhiKind::Increasing);
    let grid: Vec<f64> = (1..200).map(|k| k as f64 * 0.5).collect();
    assert!(grid.windows(2).all(|w| inc.eval(w[1]) > inc.eval(w[0])));

    let blow = PhiFunction::power(-0.5).unwrap();
    assert_eq!(blow.kind(), PhiKind::ConvexBlowup);
    let probe: Vec<f64> = (1..12).map(|k| 10f64.powi(-k) * blow.eval(10f64.powi(-k))).collect();
    assert!(probe.windows(2).all(|w| w[1] < w[0]) && probe[probe.len() - 1] < 1e-5);
}

#[test]
fn lyapunov_report_structure() {
    let a = MatrixCocycle::diagonal_exp(SuspensionFlow::golden_sine(), vec![0.5, 0.5, -0.2]).unwrap();
    let r = lyapunov_report(&a, FiberPoint::new(0.4, 0.3), 2000.0, QrOptions::default()).unwrap();
    assert_eq!(r.multiplicities.iter().sum::<usize>(), 3);
    assert_eq!(r.multiplicities, vec![2, 1]);
    let lambda = DMatrix::from_fn(3, 3, |i, j| r.lambda_matrix[i][j]);
    assert!((&lambda - lambda.transpose()).norm() < 1e-10);
    let eig = lambda.clone().symmetric_eigen().eigenvalues;
    assert!(eig.iter().all(|e| *e > 0.0));
    let mut logs: Vec<f64> = eig.iter().map(|e| e.ln()).collect();
    logs.sort_by(|a, b| b.total_cmp(a));
    for (l, s) in logs.iter().zip(&r.spectrum) {
        assert!((l - s).abs() <= r.group_tolerance);
    }
    let dims: Vec<usize> = r.filtration.iter().map(|v| v.first().map_or(0, |row| row.len())).collect();
    assert_eq!(dims, vec![3, 1]);
}
