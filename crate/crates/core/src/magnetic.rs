//! Magnetic geodesic flows: exactness of the field, linear and quadratic
//! integrals, the DGRW family, and multi-level conservation experiments.
//!
//! The bracket is deformed by `{p_x, p_y} = B`. A degree-`k` integral forces
//! `B = (2i/(k a_k)) ∂̄a_{k−1}`, which is a total derivative, so `B` has zero
//! mean. For quadratic integrals with `a_2` constant the conditions read
//!
//! ```text
//! ∂̄a_1 + i a_2 B = 0
//! ∂̄a_0 + E a_2 ∂g + (i/2) a_1 B = 0
//! ∂(g a_1) + ∂̄(g ā_1) = 0
//! ```

use nalgebra::Vector2;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use ode_solvers::dop853::Dop853;
use ode_solvers::dop_shared::{OutputType, System};

use crate::error::{Error, Result};
use crate::flow::{integrate, Controls, Observable, SystemSpec};
use crate::fourier::{FourierField, TorusLattice, Truncation, GRID_SIZE};
use crate::momentum::{check_metric, EnergyPoly, MomentumPolynomial, REALITY_TOL};

/// A magnetic field extracted from an integral together with its potential.
#[derive(Debug, Clone)]
pub struct ExactField {
    pub b: FourierField,
    /// `(P, Q)` with `B dx∧dy = d(P dx + Q dy)`.
    pub potential: (FourierField, FourierField),
    pub mean: f64,
}

/// `B = (2i/(k a_k)) ∂̄a_{k−1}` and a potential realizing it.
pub fn extract_b(a_k: Complex64, a_km1: &FourierField, k: usize) -> Result<ExactField> {
    if k == 0 {
        return Err(Error::Precondition("degree must be at least 1".into()));
    }
    if a_k.norm() == 0.0 {
        return Err(Error::Precondition("leading coefficient must be nonzero".into()));
    }
    let scaled = a_km1.scale(1.0 / (a_k * k as f64));
    let b = scaled.d_zbar().scale(Complex64::new(0.0, 2.0));
    let check = b.is_real(REALITY_TOL * b.max_abs_coeff().max(1.0));
    if !check.is_real {
        return Err(Error::Inconsistent(format!("extracted field is not real (asymmetry {:e})", check.max_asymmetry)));
    }
    let b = b.symmetrize_real();
    Ok(ExactField { mean: b.mean().re, potential: (scaled.re(), -&scaled.im()), b })
}

/// `g = g(y)`, `a_0 = a_0(y)`: `F = p_x + a_0` is an integral on every level
/// for `B = −a_0'`.
pub fn linear_magnetic_system(a0: &FourierField, g: &FourierField) -> Result<(SystemSpec, MomentumPolynomial)> {
    if !a0.depends_on_y_only() || !g.depends_on_y_only() {
        return Err(Error::Precondition("a_0 and g must depend on y only".into()));
    }
    if !a0.lattice().same_torus(g.lattice()) {
        return Err(Error::LatticeMismatch);
    }
    let b = -&a0.d_y();
    let spec = SystemSpec::magnetic(g.clone(), b)?;
    let lattice = *g.lattice();
    let f = MomentumPolynomial::new(vec![a0.clone(), FourierField::constant(lattice, 1.0)])?;
    Ok((spec, f))
}

/// The three residual fields of the quadratic system, in the order listed
/// in the module docs.
pub fn quadratic_residuals(
    f2: &MomentumPolynomial,
    g: &FourierField,
    b: &FourierField,
    energy: f64,
) -> Result<[FourierField; 3]> {
    if f2.degree() != 2 {
        return Err(Error::Precondition(format!("expected a quadratic polynomial, got degree {}", f2.degree())));
    }
    let a2 = f2.coeff_at(2, energy);
    if a2.band() != 0 {
        return Err(Error::Precondition("a_2 must be constant".into()));
    }
    let a2 = a2.mean();
    let a1 = f2.coeff_at(1, energy);
    let a0 = f2.coeff_at(0, energy);
    let a1b = a1.mul(b)?;
    let r1 = &a1.d_zbar() + &b.scale(Complex64::new(0.0, 1.0) * a2);
    let r2 = &(&a0.d_zbar() + &g.d_z().scale(energy * a2)) + &a1b.scale(Complex64::new(0.0, 0.5));
    let ga1 = g.mul(&a1)?;
    let r3 = &ga1.d_z() + &ga1.conj().d_zbar();
    Ok([r1, r2, r3])
}

/// Best quadratic candidate for a given `(g, B, E)` with `a_2 = 1`.
#[derive(Debug, Clone)]
pub struct QuadraticAudit {
    pub f2: MomentumPolynomial,
    /// Grid sup-norms of the three residuals.
    pub residuals: [f64; 3],
    /// Mean of the right side of the `a_0` equation.
    pub a0_obstruction: Complex64,
    /// Grid sup-norm of `Im a_0` before `a_0` is projected to a real field.
    pub a0_imaginary: f64,
}

impl QuadraticAudit {
    pub fn worst(&self) -> f64 {
        self.residuals.iter().copied().fold(self.a0_obstruction.norm().max(self.a0_imaginary), f64::max)
    }
}

/// Solve the first two equations for `a_1 = ∂̄⁻¹(−iB) + c_1` and `a_0`, then
/// measure everything that must vanish for a genuine integral.
pub fn quadratic_candidate(g: &FourierField, b: &FourierField, energy: f64, c1: Complex64) -> Result<QuadraticAudit> {
    check_metric(g)?;
    let a1 = b.scale(Complex64::new(0.0, -1.0)).inv_d_zbar_unchecked().add_constant(c1);
    candidate_with_a1(g, b, &a1, energy)
}

fn candidate_with_a1(g: &FourierField, b: &FourierField, a1: &FourierField, energy: f64) -> Result<QuadraticAudit> {
    let rhs = &g.d_z().scale(-energy) - &a1.mul(b)?.scale(Complex64::new(0.0, 0.5));
    let a0 = rhs.inv_d_zbar_unchecked();
    let a0_imaginary = a0.im().sup_on_grid(GRID_SIZE);
    let lattice = *g.lattice();
    let f2 = MomentumPolynomial::new(vec![a0.re(), a1.clone(), FourierField::constant(lattice, 1.0)])?;
    let r = quadratic_residuals(&f2, g, b, energy)?;
    Ok(QuadraticAudit {
        residuals: [r[0].sup_on_grid(GRID_SIZE), r[1].sup_on_grid(GRID_SIZE), r[2].sup_on_grid(GRID_SIZE)],
        a0_obstruction: rhs.mean(),
        a0_imaginary,
        f2,
    })
}

/// Split `a_0(E) = a_00 + E a_01` from its values at two levels and return
/// `∂̄(a_00 − a_1²/(4 a_2))`, which vanishes for an integral on both levels.
pub fn two_level_reduction(
    a0_e1: &FourierField,
    a0_e2: &FourierField,
    e1: f64,
    e2: f64,
    a1: &FourierField,
    a2: Complex64,
) -> Result<FourierField> {
    if e1 == e2 {
        return Err(Error::Precondition("the two levels must differ".into()));
    }
    let a01 = (a0_e2 - a0_e1).scale(1.0 / (e2 - e1));
    let a00 = a0_e1 - &a01.scale(e1);
    let sq = a1.mul(a1)?.scale(1.0 / (4.0 * a2));
    Ok((&a00 - &sq).d_zbar())
}

/// Candidate magnetic fields for the negative control on Liouville metrics.
pub fn trial_fields(lattice: TorusLattice) -> Result<Vec<FourierField>> {
    Ok(vec![
        FourierField::cosine(lattice, 1, 0, 0.5)?,
        FourierField::cosine(lattice, 0, 1, 0.5)?,
        FourierField::sine(lattice, 1, 1, 0.3)?,
        &FourierField::cosine(lattice, 1, 0, 0.4)? + &FourierField::cosine(lattice, 0, 1, 0.4)?,
        &FourierField::cosine(lattice, 2, 1, 0.2)? + &FourierField::sine(lattice, 1, 0, 0.3)?,
    ])
}

/// Cubic `f(u) = α_3 u³ + α_2 u² + α_1 u + α_0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cubic {
    pub alpha3: f64,
    pub alpha2: f64,
    pub alpha1: f64,
    pub alpha0: f64,
}

impl Cubic {
    pub fn apply(&self, u: &FourierField) -> Result<FourierField> {
        let u2 = u.mul(u)?;
        let u3 = u2.mul(u)?;
        let sum = &(&u3.scale(self.alpha3) + &u2.scale(self.alpha2)) + &u.scale(self.alpha1);
        Ok(sum.add_constant(self.alpha0))
    }
}

/// Trigonometric member: `v = a cos(μx)`, `w = b cos(νy)`, `α_3 = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DgrwTrigParams {
    pub a: f64,
    pub mu: i32,
    pub b: f64,
    pub nu: i32,
    pub alpha1: f64,
    pub alpha0: f64,
    #[serde(rename = "E")]
    pub energy: f64,
}

impl Default for DgrwTrigParams {
    fn default() -> Self {
        Self { a: 0.1, mu: 1, b: 0.1, nu: 1, alpha1: 0.0, alpha0: 1.0, energy: 1.0 }
    }
}

impl DgrwTrigParams {
    /// The only `α_2` for which `a_0` is real.
    pub fn alpha2(&self, lattice: &TorusLattice) -> f64 {
        let (m, _) = lattice.wavenumbers(self.mu, 0);
        let (_, n) = lattice.wavenumbers(0, self.nu);
        -(m * m + n * n) / (2.0 * self.energy)
    }
}

/// General cubic member with `v`, `w` from the ODEs `v'' = ½P'(v)`,
/// `w'' = ½Q'(w)`, periods fixed by shooting on the quadratic coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DgrwCubicParams {
    pub alpha3: f64,
    pub alpha1: f64,
    pub alpha0: f64,
    /// Turning-point values `v(0)` and `w(0)`.
    pub amp_v: f64,
    pub amp_w: f64,
    /// Number of periods of `v` along `x` and of `w` along `y`.
    pub periods_v: u32,
    pub periods_w: u32,
    #[serde(rename = "E")]
    pub energy: f64,
}

impl Default for DgrwCubicParams {
    fn default() -> Self {
        Self {
            alpha3: 0.5,
            alpha1: 0.0,
            alpha0: 1.0,
            amp_v: 0.15,
            amp_w: 0.12,
            periods_v: 1,
            periods_w: 1,
            energy: 1.0,
        }
    }
}

/// Result of one period-matching shot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShootingReport {
    pub c2: f64,
    pub iterations: usize,
    pub residual: f64,
    pub dropped_mass: f64,
}

/// A member of the DGRW family with its audit.
#[derive(Debug, Clone)]
pub struct DgrwSystem {
    pub spec: SystemSpec,
    pub f2: MomentumPolynomial,
    pub energy: f64,
    pub cubic: Cubic,
    pub v: FourierField,
    pub w: FourierField,
    pub audit: QuadraticAudit,
    pub shooting: Option<[ShootingReport; 2]>,
}

impl DgrwSystem {
    pub fn observable(&self) -> Observable {
        Observable::polynomial("F2", self.f2.clone(), self.energy)
    }
}

fn check_energy(energy: f64) -> Result<()> {
    if !(energy.is_finite() && energy > 0.0) {
        return Err(Error::Precondition(format!("energy must be positive, got {energy}")));
    }
    Ok(())
}

/// Build `B = v'' + w''`, `a_1 = −2(w' + iv')`, `g = f(v − w)` and solve for `a_0`.
fn assemble(v: FourierField, w: FourierField, cubic: Cubic, energy: f64, tol: f64) -> Result<DgrwSystem> {
    let u = &v - &w;
    let g = cubic.apply(&u)?;
    check_metric(&g)?;
    let b = &v.d_x().d_x() + &w.d_y().d_y();
    let a1 = (&w.d_y() + &v.d_x().scale(Complex64::new(0.0, 1.0))).scale(-2.0);
    let audit = candidate_with_a1(&g, &b, &a1, energy)?;
    if audit.worst() > tol {
        return Err(Error::Inconsistent(format!(
            "quadratic residuals {:?}, a_0 obstruction {:e}, Im a_0 {:e} exceed {tol:e}",
            audit.residuals,
            audit.a0_obstruction.norm(),
            audit.a0_imaginary
        )));
    }
    let spec = SystemSpec::magnetic(g, b)?.with_design_energy(energy);
    Ok(DgrwSystem { spec, f2: audit.f2.clone(), energy, cubic, v, w, audit, shooting: None })
}

pub fn dgrw_trig(lattice: TorusLattice, p: &DgrwTrigParams, tol: f64) -> Result<DgrwSystem> {
    check_energy(p.energy)?;
    let v = FourierField::cosine(lattice, p.mu, 0, p.a)?;
    let w = FourierField::cosine(lattice, 0, p.nu, p.b)?;
    let cubic = Cubic { alpha3: 0.0, alpha2: p.alpha2(&lattice), alpha1: p.alpha1, alpha0: p.alpha0 };
    assemble(v, w, cubic, p.energy, tol)
}

#[derive(Clone, Copy)]
struct Oscillator {
    quad: f64,
    lin: f64,
}

impl System<f64, Vector2<f64>> for Oscillator {
    fn system(&self, _t: f64, y: &Vector2<f64>, dy: &mut Vector2<f64>) {
        dy[0] = y[1];
        dy[1] = self.quad * y[0] * y[0] + self.lin * y[0];
    }
}

const SHOOT_TOL: f64 = 1e-13;

fn propagate(osc: &Oscillator, y0: Vector2<f64>, t0: f64, t1: f64) -> Result<Vector2<f64>> {
    let mut stepper = Dop853::from_param(
        *osc,
        t0,
        t1,
        t1 - t0,
        y0,
        1e-14,
        1e-14,
        0.9,
        0.0,
        0.333,
        6.0,
        t1 - t0,
        0.0,
        200_000,
        1000,
        OutputType::Sparse,
    );
    stepper.integrate().map_err(|e| Error::Shooting(format!("{e:?}")))?;
    Ok(*stepper.y_out().last().expect("solver emits the final point"))
}

/// Find `c2` so that `y'' = quad·y² + c2·y`, `y(0) = amp`, `y'(0) = 0` has period `period`.
fn shoot(quad: f64, amp: f64, period: f64) -> Result<(f64, usize, f64)> {
    let half = period / 2.0;
    let miss = |c2: f64| -> Result<f64> {
        Ok(propagate(&Oscillator { quad, lin: c2 }, Vector2::new(amp, 0.0), 0.0, half)?[1])
    };
    let omega = 2.0 * PI / period;
    let mut c_prev = -omega * omega;
    let mut c = c_prev * 1.02;
    let mut f_prev = miss(c_prev)?;
    let mut f = miss(c)?;
    for it in 0..80 {
        if f.abs() <= SHOOT_TOL * (1.0 + amp.abs() * omega) {
            return Ok((c, it, f.abs()));
        }
        if f == f_prev {
            break;
        }
        let next = c - f * (c - c_prev) / (f - f_prev);
        c_prev = c;
        f_prev = f;
        c = next;
        f = miss(c)?;
    }
    Err(Error::Shooting(format!("period {period} not matched; last miss {f:e} at c2 = {c}")))
}

/// One period of the oscillator sampled uniformly and turned into lattice modes
/// along one axis (`along_x` picks `k`, otherwise `l`).
fn periodic_field(
    lattice: TorusLattice,
    quad: f64,
    c2: f64,
    amp: f64,
    periods: u32,
    along_x: bool,
) -> Result<(FourierField, Truncation)> {
    const SAMPLES: usize = 256;
    let length = if along_x { lattice.lx() } else { lattice.ly() };
    let period = length / periods as f64;
    let dt = period / SAMPLES as f64;
    let osc = Oscillator { quad, lin: c2 };
    let mut y = Vector2::new(amp, 0.0);
    let mut buf = Vec::with_capacity(SAMPLES);
    for i in 0..SAMPLES {
        buf.push(Complex64::new(y[0], 0.0));
        y = propagate(&osc, y, i as f64 * dt, (i + 1) as f64 * dt)?;
    }
    FftPlanner::new().plan_fft_forward(SAMPLES).process(&mut buf);
    let scale = 1.0 / SAMPLES as f64;
    let peak = buf.iter().map(|c| c.norm()).fold(0.0, f64::max) * scale;
    let band = lattice.band_limit() as i64;
    let mut modes = Vec::new();
    let mut trunc = Truncation::default();
    for (j, c) in buf.iter().enumerate() {
        let j = if j < SAMPLES / 2 { j as i64 } else { j as i64 - SAMPLES as i64 };
        let c = c * scale;
        if c.norm() <= 1e-17 * peak.max(1e-300) {
            continue;
        }
        let idx = j * periods as i64;
        if idx.abs() > band {
            trunc.dropped_modes += 1;
            trunc.mass += c.norm();
            continue;
        }
        let idx = idx as i32;
        modes.push(if along_x { (idx, 0, c) } else { (0, idx, c) });
    }
    Ok((FourierField::new(lattice, modes)?.symmetrize_real(), trunc))
}

pub fn dgrw_cubic(lattice: TorusLattice, p: &DgrwCubicParams, tol: f64) -> Result<DgrwSystem> {
    check_energy(p.energy)?;
    if p.periods_v == 0 || p.periods_w == 0 {
        return Err(Error::Precondition("period counts must be positive".into()));
    }
    // P(v) = 2Eα_3 v³ + c_v v², Q(w) = −2Eα_3 w³ + c_w w²; y'' = ½P'(y).
    let quad = 3.0 * p.energy * p.alpha3;
    let (cv, it_v, miss_v) = shoot(quad, p.amp_v, lattice.lx() / p.periods_v as f64)?;
    let (cw, it_w, miss_w) = shoot(-quad, p.amp_w, lattice.ly() / p.periods_w as f64)?;
    let (v, tv) = periodic_field(lattice, quad, cv, p.amp_v, p.periods_v, true)?;
    let (w, tw) = periodic_field(lattice, -quad, cw, p.amp_w, p.periods_w, false)?;
    let cubic = Cubic { alpha3: p.alpha3, alpha2: (cv + cw) / (2.0 * p.energy), alpha1: p.alpha1, alpha0: p.alpha0 };
    let mut sys = assemble(v, w, cubic, p.energy, tol)?;
    sys.shooting = Some([
        ShootingReport { c2: cv, iterations: it_v, residual: miss_v, dropped_mass: tv.mass },
        ShootingReport { c2: cw, iterations: it_w, residual: miss_w, dropped_mass: tw.mass },
    ]);
    Ok(sys)
}

/// Drift of one observable at one energy level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelDrift {
    #[serde(rename = "E")]
    pub energy: f64,
    pub max_drift: f64,
    pub mean_drift: f64,
    pub trajectories: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiLevelReport {
    pub levels: Vec<LevelDrift>,
}

impl MultiLevelReport {
    /// `max_drift[i] / max_drift[j]`.
    pub fn ratio(&self, i: usize, j: usize) -> f64 {
        self.levels[i].max_drift / self.levels[j].max_drift.max(f64::MIN_POSITIVE)
    }

    /// Index of the single level whose drift is at least `factor` times smaller
    /// than every other level, if there is one.
    pub fn single_level(&self, factor: f64) -> Option<usize> {
        let (best, min) =
            self.levels.iter().enumerate().map(|(i, l)| (i, l.max_drift)).min_by(|a, b| a.1.total_cmp(&b.1))?;
        let separated = self.levels.iter().enumerate().all(|(i, l)| i == best || l.max_drift >= factor * min);
        (separated && self.levels.len() >= 2).then_some(best)
    }
}

/// Trajectories per level in [`multi_level_test`].
pub const POINTS_PER_LEVEL: usize = 8;

/// Integrate from `POINTS_PER_LEVEL` states on each level (random positions,
/// momentum directions stratified over the circle) and record drift of `f`.
pub fn multi_level_test(
    spec: &SystemSpec,
    f: &Observable,
    energies: &[f64],
    duration: f64,
    controls: &Controls,
    seed: u64,
) -> Result<MultiLevelReport> {
    if energies.len() < 2 {
        return Err(Error::Precondition("need at least two energy levels".into()));
    }
    for &e in energies {
        check_energy(e)?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lat = *spec.lattice();
    let starts: Vec<(usize, f64, f64, f64)> = energies
        .iter()
        .enumerate()
        .flat_map(|(li, _)| (0..POINTS_PER_LEVEL).map(move |i| (li, i)))
        .map(|(li, i)| {
            let x = rng.gen::<f64>() * lat.lx();
            let y = rng.gen::<f64>() * lat.ly();
            let angle = 2.0 * PI * (i as f64 + rng.gen::<f64>()) / POINTS_PER_LEVEL as f64;
            (li, x, y, angle)
        })
        .collect();
    let drifts: Vec<(usize, f64)> = starts
        .par_iter()
        .map(|&(li, x, y, angle)| {
            let s0 = spec.state_on_level(x, y, angle, energies[li]);
            let traj = integrate(spec, s0, duration, controls, std::slice::from_ref(f))?;
            Ok((li, traj.drift(f.name()).unwrap_or(f64::NAN)))
        })
        .collect::<Result<_>>()?;
    let levels = energies
        .iter()
        .enumerate()
        .map(|(li, &energy)| {
            let d: Vec<f64> = drifts.iter().filter(|(l, _)| *l == li).map(|(_, d)| *d).collect();
            LevelDrift {
                energy,
                max_drift: d.iter().copied().fold(0.0, f64::max),
                mean_drift: d.iter().sum::<f64>() / d.len() as f64,
                trajectories: d.len(),
            }
        })
        .collect();
    Ok(MultiLevelReport { levels })
}

/// `F = cos(p_x/B − y)`, conserved for `g ≡ 1` and constant `B`.
pub fn flat_constant_b(lattice: TorusLattice, b: f64) -> Result<(SystemSpec, Observable)> {
    if b == 0.0 || !b.is_finite() {
        return Err(Error::Precondition("the field strength must be finite and nonzero".into()));
    }
    let spec = SystemSpec::magnetic(FourierField::constant(lattice, 1.0), FourierField::constant(lattice, b))?;
    Ok((spec, Observable::new("F", move |s| (s.px / b - s.y).cos())))
}

/// Named systems reachable from the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    DgrwTrig,
    DgrwCubic,
    LinearMagnetic,
    FlatConstantB,
}

/// A preset turned into a system, an observable and the energy it targets.
pub struct PresetSystem {
    pub spec: SystemSpec,
    pub observable: Observable,
    pub energy: f64,
    pub polynomial: Option<MomentumPolynomial>,
    pub audit: Option<QuadraticAudit>,
}

/// Parameters for every preset; unused sections are ignored.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PresetParams {
    pub lattice: Option<TorusLattice>,
    pub dgrw_trig: DgrwTrigParams,
    pub dgrw_cubic: DgrwCubicParams,
    pub linear: LinearParams,
    pub flat: FlatParams,
    pub tolerance: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LinearParams {
    /// `a_0 = amp · cos(l y)` and `g = g0 + g_amp · cos(y)`.
    pub amp: f64,
    pub l: i32,
    pub g0: f64,
    pub g_amp: f64,
    #[serde(rename = "E")]
    pub energy: f64,
}

impl Default for LinearParams {
    fn default() -> Self {
        Self { amp: 1.0, l: 1, g0: 2.0, g_amp: 0.5, energy: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FlatParams {
    pub b: f64,
    #[serde(rename = "E")]
    pub energy: f64,
}

impl Default for FlatParams {
    fn default() -> Self {
        Self { b: 1.0, energy: 0.5 }
    }
}

pub fn build_preset(preset: Preset, params: &PresetParams) -> Result<PresetSystem> {
    let lattice = params.lattice.unwrap_or_else(|| TorusLattice::square(32));
    let tol = params.tolerance.unwrap_or(1e-9);
    match preset {
        Preset::DgrwTrig | Preset::DgrwCubic => {
            let sys = if preset == Preset::DgrwTrig {
                dgrw_trig(lattice, &params.dgrw_trig, tol)?
            } else {
                dgrw_cubic(lattice, &params.dgrw_cubic, tol)?
            };
            Ok(PresetSystem {
                observable: sys.observable(),
                energy: sys.energy,
                polynomial: Some(sys.f2.clone()),
                audit: Some(sys.audit.clone()),
                spec: sys.spec,
            })
        }
        Preset::LinearMagnetic => {
            let p = &params.linear;
            let a0 = FourierField::cosine(lattice, 0, p.l, p.amp)?;
            let g = FourierField::cosine(lattice, 0, 1, p.g_amp)?.add_constant(p.g0);
            let (spec, f) = linear_magnetic_system(&a0, &g)?;
            Ok(PresetSystem {
                observable: Observable::polynomial("F1", f.clone(), p.energy),
                spec,
                energy: p.energy,
                polynomial: Some(f),
                audit: None,
            })
        }
        Preset::FlatConstantB => {
            let (spec, observable) = flat_constant_b(lattice, params.flat.b)?;
            Ok(PresetSystem { spec, observable, energy: params.flat.energy, polynomial: None, audit: None })
        }
    }
}

/// The same polynomial with every coefficient frozen at one energy.
pub fn fixed_energy(f: &MomentumPolynomial, energy: f64) -> Result<MomentumPolynomial> {
    MomentumPolynomial::from_energy_coeffs(
        (0..=f.degree()).map(|m| EnergyPoly::constant(f.coeff_at(m, energy))).collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lat() -> TorusLattice {
        TorusLattice::square(16)
    }

    #[test]
    fn extract_b_from_liouville_like_pair() {
        let v = FourierField::cosine(lat(), 1, 0, 0.3).unwrap();
        let w = FourierField::cosine(lat(), 0, 2, 0.2).unwrap();
        let a1 = (&w.d_y() + &v.d_x().scale(Complex64::new(0.0, 1.0))).scale(-2.0);
        let ex = extract_b(Complex64::new(1.0, 0.0), &a1, 2).unwrap();
        let expected = &v.d_x().d_x() + &w.d_y().d_y();
        assert!(ex.b.max_coeff_diff(&expected) < 1e-14);
        let (p, q) = &ex.potential;
        let curl = &q.d_x() - &p.d_y();
        assert!(curl.max_coeff_diff(&ex.b) < 1e-14);
        assert!(ex.mean.abs() < 1e-14);
    }

    #[test]
    fn constant_coefficient_gives_no_field() {
        let ex =
            extract_b(Complex64::new(2.0, 0.0), &FourierField::constant(lat(), Complex64::new(1.0, 3.0)), 3).unwrap();
        assert!(ex.b.is_zero());
    }

    #[test]
    fn non_real_field_is_inconsistent() {
        let a = FourierField::cosine(lat(), 1, 0, 1.0).unwrap();
        assert!(matches!(extract_b(Complex64::new(1.0, 0.0), &a, 2), Err(Error::Inconsistent(_))));
    }

    #[test]
    fn linear_system_field() {
        let a0 = FourierField::cosine(lat(), 0, 1, 1.0).unwrap();
        let (spec, f) = linear_magnetic_system(&a0, &FourierField::constant(lat(), 1.0)).unwrap();
        let expected = FourierField::sine(lat(), 0, 1, 1.0).unwrap();
        assert!(spec.magnetic_field().unwrap().max_coeff_diff(&expected) < 1e-15);
        assert_eq!(f.evaluate(0.0, 0.0, 2.0, 5.0, 1.0).unwrap(), 2.0 + 1.0);

        let (spec, _) =
            linear_magnetic_system(&FourierField::constant(lat(), 0.5), &FourierField::constant(lat(), 1.0)).unwrap();
        assert!(spec.magnetic_field().unwrap().is_zero());
        assert!(linear_magnetic_system(
            &FourierField::cosine(lat(), 1, 0, 1.0).unwrap(),
            &FourierField::constant(lat(), 1.0)
        )
        .is_err());
    }

    #[test]
    fn zero_quadratic_residuals() {
        let g = FourierField::cosine(lat(), 1, 1, 0.5).unwrap().add_constant(2.0);
        let b = FourierField::cosine(lat(), 1, 0, 0.3).unwrap();
        let zero = MomentumPolynomial::zero(lat(), 2);
        let e = 1.7;
        let [r1, r2, r3] = quadratic_residuals(&zero, &g, &b, e).unwrap();
        assert!(r1.is_zero() && r3.is_zero());
        assert!(r2.is_zero());

        let one = MomentumPolynomial::new(vec![
            FourierField::zero(lat()),
            FourierField::zero(lat()),
            FourierField::constant(lat(), 1.0),
        ])
        .unwrap();
        let [_, r2, _] = quadratic_residuals(&one, &g, &b, e).unwrap();
        assert!(r2.max_coeff_diff(&g.d_z().scale(e)) < 1e-15);
    }

    #[test]
    fn liouville_has_vanishing_residuals_without_field() {
        let v = FourierField::cosine(lat(), 1, 0, 0.5).unwrap().add_constant(1.0);
        let w = FourierField::cosine(lat(), 0, 1, 0.5).unwrap().add_constant(1.0);
        let sys = crate::cascade::build_liouville(&v, &w).unwrap();
        let e = 0.9;
        let f = fixed_energy(&sys.f2, e).unwrap();
        for r in quadratic_residuals(&f, &sys.g, &FourierField::zero(lat()), e).unwrap() {
            assert!(r.sup_on_grid(GRID_SIZE) < 1e-10);
        }
    }

    #[test]
    fn degenerate_dgrw_is_flat() {
        let p = DgrwTrigParams { a: 0.0, b: 0.0, ..DgrwTrigParams::default() };
        let sys = dgrw_trig(lat(), &p, 1e-12).unwrap();
        assert!(sys.spec.magnetic_field().unwrap().is_zero());
        assert!(sys.spec.metric().max_coeff_diff(&FourierField::constant(lat(), 1.0)) < 1e-15);
        assert!(sys.f2.coeff_at(0, 1.0).is_zero());
    }

    #[test]
    fn trig_dgrw_passes_audit() {
        let p = DgrwTrigParams::default();
        let sys = dgrw_trig(lat(), &p, 1e-9).unwrap();
        assert!((sys.cubic.alpha2 + 1.0).abs() < 1e-15);
        assert!(sys.audit.worst() < 1e-12, "{:?}", sys.audit);
        let wrong = Cubic { alpha2: -8.0, ..sys.cubic };
        let r = assemble(sys.v.clone(), sys.w.clone(), wrong, p.energy, 1e-9);
        assert!(matches!(r, Err(Error::Inconsistent(_))));
    }

    #[test]
    fn cubic_dgrw_passes_audit() {
        let sys = dgrw_cubic(TorusLattice::square(32), &DgrwCubicParams::default(), 1e-9).unwrap();
        let shots = sys.shooting.unwrap();
        assert!(shots.iter().all(|s| s.dropped_mass < 1e-12));
        assert!(sys.audit.worst() < 1e-9, "{:?}", sys.audit);
    }

    #[test]
    fn two_level_bookkeeping() {
        let sys = dgrw_trig(lat(), &DgrwTrigParams::default(), 1e-9).unwrap();
        let b = sys.spec.magnetic_field().unwrap();
        let g = sys.spec.metric();
        let a1 = sys.f2.coeff_at(1, 1.0);
        let a0 = |e: f64| {
            let rhs = &g.d_z().scale(-e) - &a1.mul(b).unwrap().scale(Complex64::new(0.0, 0.5));
            rhs.inv_d_zbar_unchecked()
        };
        let r = two_level_reduction(&a0(1.0), &a0(2.5), 1.0, 2.5, &a1, Complex64::new(1.0, 0.0)).unwrap();
        assert!(r.max_abs_coeff() < 1e-14);
    }

    #[test]
    fn liouville_rejects_trial_fields() {
        let g = &FourierField::cosine(lat(), 1, 0, 0.5).unwrap().add_constant(2.0)
            + &FourierField::cosine(lat(), 0, 1, 0.4).unwrap();
        for b in trial_fields(lat()).unwrap() {
            let audit = quadratic_candidate(&g, &b, 1.0, Complex64::default()).unwrap();
            assert!(audit.worst() >= 1e-3, "{:?}", audit.residuals);
        }
    }

    #[test]
    fn single_level_flag() {
        let mk = |d: &[f64]| MultiLevelReport {
            levels: d
                .iter()
                .map(|&x| LevelDrift { energy: 1.0, max_drift: x, mean_drift: x, trajectories: 8 })
                .collect(),
        };
        assert_eq!(mk(&[1e-10, 1e-4]).single_level(1e3), Some(0));
        assert_eq!(mk(&[1e-10, 1e-9]).single_level(1e3), None);
    }
}
