use proptest::prelude::*;
use sle_lab_core::limit::{
    density_oscillation, full_support_density, support_time, SupportTime,
};
use sle_lab_core::loewner::{forward_flow, reverse_flow, DrivingPath, FlowOutcome};
use sle_lab_core::sde::{simulate, InitSpec, SimulationConfig, WeightSpec, GAP_FLOOR};
use sle_lab_core::semigroup::{characteristic_solve, eta_semigroup, GeneratorS};
use sle_lab_core::{CircleMeasure, Complex64, HerglotzField};
use std::f64::consts::PI;
use std::sync::Arc;

fn start() -> CircleMeasure {
    CircleMeasure::atoms(&[0.2, 1.7, 4.0], &[0.5, 0.3, 0.2]).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn herglotz_schwarz_and_subordination(
        r in 0.0f64..0.9,
        phi in 0.0f64..std::f64::consts::TAU,
        t in 0.0f64..2.0,
    ) {
        let mu0 = start();
        let s = GeneratorS::burgers();
        let z = Complex64::from_polar(r, phi);
        let m = characteristic_solve(&mu0, &s, t, z).unwrap();
        let w = eta_semigroup(&mu0, &s, t, z).unwrap();
        prop_assert!(m.re >= -1e-10);
        prop_assert!(w.norm() <= z.norm() + 1e-12);
        prop_assert!((mu0.eval(w).unwrap() - m).norm() <= 1e-10 * (1.0 + m.norm()));
    }

    #[test]
    fn forward_and_reverse_flows_invert(
        r in 0.0f64..0.5,
        phi in 0.0f64..std::f64::consts::TAU,
    ) {
        let path = DrivingPath::constant(start(), 0.3).unwrap();
        let z = Complex64::from_polar(r, phi);
        if let FlowOutcome::Value(g) = forward_flow(&path, z, 0.3).unwrap() {
            let back = reverse_flow(&path, 0.3, g).unwrap();
            prop_assert!((back - z).norm() < 1e-7);
        }
    }
}

#[test]
fn value_at_origin_is_one() {
    let s = GeneratorS::burgers();
    for t in [0.0, 0.5, 3.0] {
        let m = characteristic_solve(&start(), &s, t, Complex64::new(0.0, 0.0)).unwrap();
        assert!((m - Complex64::new(1.0, 0.0)).norm() < 1e-12);
    }
}

#[test]
fn antipodal_pair_support_time_matches_detection() {
    let mu0 = CircleMeasure::two_atoms(PI);
    let t_star = match support_time(&mu0).unwrap() {
        SupportTime::At(r) => r.t,
        other => panic!("{other:?}"),
    };
    assert!((t_star - 0.5).abs() < 1e-9);
    let grid: Vec<f64> = (0..=20).map(|j| 0.25 + 0.025 * j as f64).collect();
    let m0: Arc<dyn HerglotzField> = Arc::new(mu0);
    let (t, density) = full_support_density(m0, &GeneratorS::burgers(), &grid, 1024)
        .unwrap()
        .expect("full support within the grid");
    assert!((t - t_star).abs() <= 0.05, "{t}");
    // continuous, positive density at the detection time
    assert!(density_oscillation(&density) < 0.01);
}

#[test]
fn point_mass_density_is_smooth_at_detection() {
    let grid: Vec<f64> = (0..=12).map(|j| 0.9 + 0.025 * j as f64).collect();
    let m0: Arc<dyn HerglotzField> = Arc::new(CircleMeasure::delta_one());
    let (t, density) = full_support_density(m0, &GeneratorS::burgers(), &grid, 1024)
        .unwrap()
        .expect("full support within the grid");
    assert!((t - 1.0).abs() <= 0.05);
    assert!(density.is_probability());
    assert!(density_oscillation(&density) < 0.01);
}

#[test]
fn cluster_stays_ordered() {
    let cfg = SimulationConfig {
        n: 64,
        kappa: 4.0,
        weights: WeightSpec::Harmonic,
        init: InitSpec::Cluster {
            center: 1.0,
            spread: 1e-3,
        },
        dt: 1e-3,
        t_end: 0.5,
        seed: 99,
        n_runs: 2,
        record_times: vec![0.01, 0.1, 0.5],
        keep_path: false,
    };
    for run in simulate(&cfg).unwrap() {
        for snap in &run.snapshots {
            assert!(snap.state.min_gap() > GAP_FLOOR);
            assert!(snap.state.theta.windows(2).all(|w| w[1] > w[0]));
            assert!(snap.mu.is_probability() && snap.alpha.is_probability());
        }
    }
}
