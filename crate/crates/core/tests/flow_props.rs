mod common;

use common::*;
use geoflow::cascade::build_liouville;
use geoflow::flow::{conservation_report, flow_for, integrate, Controls, Observable, PhaseState, SystemSpec};
use geoflow::FourierField;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn rescaled_momenta_trace_the_same_geodesic(seed in any::<u64>(), lambda in 0.3..3.0f64) {
        let mut r = rng(seed);
        let spec = SystemSpec::geodesic(metric(&mut r, 2)).unwrap();
        let s0 = on_level(&mut r, &spec, 1.0);
        let fast = PhaseState::new(s0.x, s0.y, lambda * s0.px, lambda * s0.py);
        let a = state_after(&spec, s0, 3.0);
        let b = state_after(&spec, fast, 3.0 / lambda);
        prop_assert!((a.x - b.x).abs() <= 1e-8 && (a.y - b.y).abs() <= 1e-8);
        prop_assert!((lambda * a.px - b.px).abs() <= 1e-8 * lambda);
    }

    #[test]
    fn forward_then_backward_returns_home(seed in any::<u64>()) {
        let mut r = rng(seed);
        let b = real_field(&mut r, 2, 0.5);
        let spec = SystemSpec::magnetic(metric(&mut r, 2), b).unwrap();
        let s0 = on_level(&mut r, &spec, 1.5);
        let s1 = state_after(&spec, s0, 4.0);
        let back = state_after(&spec, s1, -4.0);
        prop_assert!((back.x - s0.x).abs() + (back.y - s0.y).abs() <= 1e-8);
        prop_assert!((back.px - s0.px).abs() + (back.py - s0.py).abs() <= 1e-8);
    }
}

#[test]
fn energy_is_conserved_on_random_systems() {
    let mut r = rng(3);
    for i in 0..6 {
        let g = metric(&mut r, 3);
        let spec = if i % 2 == 0 {
            SystemSpec::geodesic(g).unwrap()
        } else {
            SystemSpec::magnetic(g, real_field(&mut r, 2, 0.7)).unwrap()
        };
        let s0 = on_level(&mut r, &spec, 2.0);
        let traj = integrate(&spec, s0, 50.0, &Controls::with_tolerance(1e-11), &[]).unwrap();
        let h = traj.drift("H").unwrap();
        assert!(h <= 1e-8, "energy drift {h:e}");
        assert_eq!(conservation_report(&traj)[0].name, "H");
    }
}

#[test]
fn liouville_integral_drifts_on_a_perturbed_metric() {
    let lat = lattice();
    let v = FourierField::cosine(lat, 1, 0, 1.0).unwrap().add_constant(1.25);
    let w = FourierField::cosine(lat, 0, 1, 1.0).unwrap().add_constant(1.25);
    let sys = build_liouville(&v, &w).unwrap();
    let bumped = &sys.g + &geoflow::cli::mixed(lat, 0.3).unwrap();
    let spec = SystemSpec::geodesic(bumped).unwrap();
    let s0 = spec.state_on_level(0.3, 1.1, 0.9, 1.0);
    let obs = Observable::polynomial("F2", sys.f2.clone(), 1.0);
    let traj = integrate(&spec, s0, 100.0, &Controls::with_tolerance(1e-10), &[obs]).unwrap();
    let drift = traj.drift("F2").unwrap();
    assert!(drift >= 1e-3, "drift {drift:e}");
}

#[test]
fn trajectories_sample_uniformly() {
    let spec = SystemSpec::geodesic(FourierField::cosine(lattice(), 1, 1, 0.3).unwrap().add_constant(1.0)).unwrap();
    let traj = integrate(
        &spec,
        PhaseState::new(0.0, 0.0, 1.0, 0.5),
        10.0,
        &Controls::default().with_samples(50),
        &[Observable::momentum_x()],
    )
    .unwrap();
    assert_eq!(traj.len(), 51);
    for (i, t) in traj.times.iter().enumerate() {
        assert!((t - 0.2 * i as f64).abs() <= 1e-12);
    }
    let csv = traj.to_csv();
    assert!(csv.starts_with("t,x,y,px,py,H,px\n"));
    assert_eq!(csv.lines().count(), 52);
}

#[test]
fn flow_for_matches_integrate_endpoint() {
    let mut r = rng(9);
    let spec = SystemSpec::geodesic(metric(&mut r, 2)).unwrap();
    let s0 = on_level(&mut r, &spec, 1.0);
    let c = Controls::with_tolerance(1e-12);
    let end = *integrate(&spec, s0, 5.0, &c, &[]).unwrap().states.last().unwrap();
    let direct = flow_for(&spec, s0, 5.0, &c).unwrap().reduced(spec.lattice());
    assert!((end.x - direct.x).abs() + (end.px - direct.px).abs() <= 1e-9);
}
