//! Shared generators for the integration tests.
#![allow(dead_code)]

use std::f64::consts::TAU;

use geoflow::flow::{flow_for, rate_along_flow, Controls, PhaseState, SystemSpec};
use geoflow::fourier::{random_metric, random_real_field};
use geoflow::momentum::MomentumPolynomial;
use geoflow::{FourierField, TorusLattice};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub use rand::SeedableRng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn lattice() -> TorusLattice {
    TorusLattice::square(32)
}

pub fn metric(rng: &mut ChaCha8Rng, band: u32) -> FourierField {
    random_metric(lattice(), band, 0.5, rng).unwrap()
}

pub fn real_field(rng: &mut ChaCha8Rng, band: u32, amp: f64) -> FourierField {
    random_real_field(lattice(), band, rng).unwrap().scale(amp)
}

pub fn complex_field(rng: &mut ChaCha8Rng, band: u32, amp: f64) -> FourierField {
    let re = real_field(rng, band, amp);
    let im = real_field(rng, band, amp);
    let c = Complex64::new(rng.gen_range(-amp..amp), rng.gen_range(-amp..amp));
    (&re + &im.scale(Complex64::new(0.0, 1.0))).add_constant(c)
}

/// Random degree-`k` polynomial with a real `a_0`.
pub fn polynomial(rng: &mut ChaCha8Rng, k: usize, band: u32) -> MomentumPolynomial {
    let mut coeffs = vec![real_field(rng, band, 0.5).add_constant(rng.gen_range(-1.0..1.0))];
    for _ in 1..=k {
        coeffs.push(complex_field(rng, band, 0.5));
    }
    MomentumPolynomial::new(coeffs).unwrap()
}

pub fn on_level(rng: &mut ChaCha8Rng, spec: &SystemSpec, energy: f64) -> PhaseState {
    let (x, y, a) = (rng.gen::<f64>() * TAU, rng.gen::<f64>() * TAU, rng.gen::<f64>() * TAU);
    spec.state_on_level(x, y, a, energy)
}

/// Five-point derivative of `F` along the flow at `s0`.
pub fn numerical_rate(spec: &SystemSpec, s0: PhaseState, poly: &MomentumPolynomial, energy: f64) -> f64 {
    let f = |s: &PhaseState| poly.evaluate(s.x, s.y, s.px, s.py, energy).unwrap();
    rate_along_flow(spec, s0, &f, 2.5e-3, &Controls::with_tolerance(1e-13)).unwrap()
}

pub fn state_after(spec: &SystemSpec, s0: PhaseState, t: f64) -> PhaseState {
    flow_for(spec, s0, t, &Controls::with_tolerance(1e-12)).unwrap()
}
