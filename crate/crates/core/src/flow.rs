//! Geodesic and magnetic geodesic flows on `T*T²` and conservation drift.
//!
//! With `H = ½ h (p_x² + p_y²)`, `h = 1/g`, and the bracket deformed by
//! `{p_x, p_y} = B`, the equations of motion are
//!
//! ```text
//! ẋ = h p_x,   ṗ_x = −½ h_x (p_x² + p_y²) + B h p_y,
//! ẏ = h p_y,   ṗ_y = −½ h_y (p_x² + p_y²) − B h p_x.
//! ```
//!
//! Integration uses an adaptive 8(5,3) embedded Runge–Kutta pair whose step
//! controller lands exactly on each uniform sample time.

use std::fmt::Write as _;
use std::sync::Arc;

use nalgebra::Vector4;
use num_complex::Complex64;
use ode_solvers::dop853::Dop853;
use ode_solvers::dop_shared::{IntegrationError, OutputType, System};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier::{FourierField, TorusLattice};
use crate::momentum::{check_metric, HomogeneousPolynomial, MomentumPolynomial, REALITY_TOL};

type State = Vector4<f64>;

/// A point of `T*T²` in canonical coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseState {
    pub x: f64,
    pub y: f64,
    pub px: f64,
    pub py: f64,
}

impl PhaseState {
    pub fn new(x: f64, y: f64, px: f64, py: f64) -> Self {
        Self { x, y, px, py }
    }

    fn to_vector(self) -> State {
        State::new(self.x, self.y, self.px, self.py)
    }

    fn from_vector(v: &State) -> Self {
        Self::new(v[0], v[1], v[2], v[3])
    }

    pub fn reduced(self, lattice: &TorusLattice) -> Self {
        let (x, y) = lattice.reduce(self.x, self.y);
        Self { x, y, ..self }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.px.is_finite() && self.py.is_finite()
    }
}

const NEGLIGIBLE: f64 = 1e-19;

/// Value and gradient of a real field, evaluated by direct mode summation.
#[derive(Debug, Clone)]
struct RealEvaluator {
    modes: Vec<(f64, f64, Complex64)>,
}

impl RealEvaluator {
    /// Modes below `NEGLIGIBLE · max|c|` are skipped; products of fields
    /// accumulate thousands of such roundoff-level coefficients.
    fn new(f: &FourierField) -> Self {
        let floor = NEGLIGIBLE * f.max_abs_coeff();
        let modes = f
            .modes()
            .filter(|(_, c)| c.norm() > floor)
            .map(|((k, l), c)| {
                let (kx, ly) = f.lattice().wavenumbers(k, l);
                (kx, ly, c)
            })
            .collect();
        Self { modes }
    }

    fn value(&self, x: f64, y: f64) -> f64 {
        self.modes.iter().map(|&(kx, ly, c)| (c * Complex64::cis(kx * x + ly * y)).re).sum()
    }

    fn value_and_gradient(&self, x: f64, y: f64) -> (f64, f64, f64) {
        let (mut v, mut gx, mut gy) = (0.0, 0.0, 0.0);
        for &(kx, ly, c) in &self.modes {
            let (s, co) = (kx * x + ly * y).sin_cos();
            // c·e^{iθ} = (c.re cos − c.im sin) + i(…); derivative of the real part.
            let re = c.re * co - c.im * s;
            let d = -c.re * s - c.im * co;
            v += re;
            gx += kx * d;
            gy += ly * d;
        }
        (v, gx, gy)
    }
}

/// Metric conformal factor, optional magnetic field and design energy.
#[derive(Debug, Clone)]
pub struct SystemSpec {
    g: FourierField,
    b: Option<FourierField>,
    e_design: Option<f64>,
    g_eval: RealEvaluator,
    b_eval: Option<RealEvaluator>,
}

impl SystemSpec {
    pub fn new(g: FourierField, b: Option<FourierField>) -> Result<Self> {
        check_metric(&g)?;
        let g = g.symmetrize_real();
        let b = match b {
            Some(b) => {
                if !b.lattice().same_torus(g.lattice()) {
                    return Err(Error::LatticeMismatch);
                }
                let check = b.is_real(REALITY_TOL * b.max_abs_coeff());
                if !check.is_real {
                    return Err(Error::Reality { residue: check.max_asymmetry });
                }
                Some(b.symmetrize_real())
            }
            None => None,
        };
        Ok(Self { g_eval: RealEvaluator::new(&g), b_eval: b.as_ref().map(RealEvaluator::new), g, b, e_design: None })
    }

    pub fn geodesic(g: FourierField) -> Result<Self> {
        Self::new(g, None)
    }

    pub fn magnetic(g: FourierField, b: FourierField) -> Result<Self> {
        Self::new(g, Some(b))
    }

    pub fn with_design_energy(mut self, energy: f64) -> Self {
        self.e_design = Some(energy);
        self
    }

    pub fn metric(&self) -> &FourierField {
        &self.g
    }

    pub fn magnetic_field(&self) -> Option<&FourierField> {
        self.b.as_ref()
    }

    pub fn design_energy(&self) -> Option<f64> {
        self.e_design
    }

    pub fn lattice(&self) -> &TorusLattice {
        self.g.lattice()
    }

    /// The same system with `B → −B`, whose forward flow is the time
    /// reversal of this one after negating momenta.
    pub fn reversed(&self) -> Self {
        let b = self.b.as_ref().map(|b| b.scale(-1.0));
        Self { b_eval: b.as_ref().map(RealEvaluator::new), b, ..self.clone() }
    }

    pub fn conformal_factor(&self, x: f64, y: f64) -> f64 {
        self.g_eval.value(x, y)
    }

    pub fn field_at(&self, x: f64, y: f64) -> f64 {
        self.b_eval.as_ref().map_or(0.0, |b| b.value(x, y))
    }

    pub fn hamiltonian(&self, s: &PhaseState) -> f64 {
        0.5 * (s.px * s.px + s.py * s.py) / self.conformal_factor(s.x, s.y)
    }

    /// Tangent vector `(ẋ, ẏ, ṗ_x, ṗ_y)`.
    pub fn rhs(&self, s: &PhaseState) -> [f64; 4] {
        let (g, gx, gy) = self.g_eval.value_and_gradient(s.x, s.y);
        let h = 1.0 / g;
        let (hx, hy) = (-gx * h * h, -gy * h * h);
        let p2 = s.px * s.px + s.py * s.py;
        let mut dpx = -0.5 * hx * p2;
        let mut dpy = -0.5 * hy * p2;
        if let Some(b) = &self.b_eval {
            let bv = b.value(s.x, s.y);
            dpx += bv * h * s.py;
            dpy -= bv * h * s.px;
        }
        [h * s.px, h * s.py, dpx, dpy]
    }

    /// The point above `(x, y)` on the level `H = E` with momentum direction `angle`.
    pub fn state_on_level(&self, x: f64, y: f64, angle: f64, energy: f64) -> PhaseState {
        let speed = (2.0 * energy * self.conformal_factor(x, y)).sqrt();
        PhaseState::new(x, y, speed * angle.cos(), speed * angle.sin())
    }
}

struct Vectorfield<'a>(&'a SystemSpec);

impl System<f64, State> for Vectorfield<'_> {
    fn system(&self, _t: f64, y: &State, dy: &mut State) {
        let d = self.0.rhs(&PhaseState::from_vector(y));
        dy.copy_from_slice(&d);
    }
}

/// Step-size controls of the adaptive integrator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Controls {
    pub rtol: f64,
    pub atol: f64,
    /// Number of uniform sample intervals on `[0, T]`.
    pub samples: usize,
    pub max_steps: u32,
}

impl Default for Controls {
    fn default() -> Self {
        Self { rtol: 1e-10, atol: 1e-10, samples: 200, max_steps: 2_000_000 }
    }
}

impl Controls {
    pub fn with_tolerance(tol: f64) -> Self {
        Self { rtol: tol, atol: tol, ..Self::default() }
    }

    pub fn with_samples(self, samples: usize) -> Self {
        Self { samples, ..self }
    }
}

/// A named function on phase space recorded along trajectories.
#[derive(Clone)]
pub struct Observable {
    name: String,
    f: Arc<dyn Fn(&PhaseState) -> f64 + Send + Sync>,
}

impl std::fmt::Debug for Observable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Observable").field("name", &self.name).finish()
    }
}

impl Observable {
    pub fn new(name: impl Into<String>, f: impl Fn(&PhaseState) -> f64 + Send + Sync + 'static) -> Self {
        Self { name: name.into(), f: Arc::new(f) }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn eval(&self, s: &PhaseState) -> f64 {
        (self.f)(s)
    }

    pub fn hamiltonian(spec: &SystemSpec) -> Self {
        let spec = spec.clone();
        Self::new("H", move |s| spec.hamiltonian(s))
    }

    /// A level-restricted polynomial evaluated at a fixed energy.
    pub fn polynomial(name: impl Into<String>, poly: MomentumPolynomial, energy: f64) -> Self {
        let poly = poly.at_energy(energy);
        Self::new(name, move |s| poly.evaluate(s.x, s.y, s.px, s.py, energy).unwrap_or(f64::NAN))
    }

    pub fn homogeneous(name: impl Into<String>, poly: HomogeneousPolynomial) -> Self {
        Self::new(name, move |s| poly.evaluate(s.x, s.y, s.px, s.py))
    }

    pub fn momentum_x() -> Self {
        Self::new("px", |s| s.px)
    }
}

/// Drift statistics of one observable along a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftStats {
    pub name: String,
    pub initial: f64,
    pub max_abs: f64,
    pub mean_abs: f64,
    pub max_rel: f64,
    pub mean_rel: f64,
}

/// Uniformly sampled trajectory with recorded observables.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// States with `(x, y)` reduced to the fundamental domain.
    pub states: Vec<PhaseState>,
    pub observables: Vec<(String, Vec<f64>)>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn observable(&self, name: &str) -> Option<&[f64]> {
        self.observables.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_slice())
    }

    /// `max_t |F(t) − F(0)|` for a named observable.
    pub fn drift(&self, name: &str) -> Option<f64> {
        self.observable(name).map(|v| v.iter().map(|f| (f - v[0]).abs()).fold(0.0, f64::max))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,x,y,px,py");
        for (name, _) in &self.observables {
            out.push(',');
            out.push_str(name);
        }
        out.push('\n');
        for (i, (t, s)) in self.times.iter().zip(&self.states).enumerate() {
            let _ = write!(out, "{t:.12e},{:.16e},{:.16e},{:.16e},{:.16e}", s.x, s.y, s.px, s.py);
            for (_, vals) in &self.observables {
                let _ = write!(out, ",{:.16e}", vals[i]);
            }
            out.push('\n');
        }
        out
    }
}

/// Max/mean absolute and relative drift per observable.
pub fn conservation_report(traj: &Trajectory) -> Vec<DriftStats> {
    traj.observables
        .iter()
        .map(|(name, vals)| {
            let f0 = vals[0];
            let scale = f0.abs().max(f64::MIN_POSITIVE);
            let diffs: Vec<f64> = vals.iter().map(|f| (f - f0).abs()).collect();
            let n = diffs.len().max(1) as f64;
            let max_abs = diffs.iter().copied().fold(0.0, f64::max);
            let mean_abs = diffs.iter().sum::<f64>() / n;
            DriftStats {
                name: name.clone(),
                initial: f0,
                max_abs,
                mean_abs,
                max_rel: max_abs / scale,
                mean_rel: mean_abs / scale,
            }
        })
        .collect()
}

fn integration_error(e: IntegrationError, max_steps: u32) -> Error {
    match e {
        IntegrationError::MaxNumStepReached { x, .. } => {
            Error::Integration { t: x, reason: format!("step budget of {max_steps} exhausted") }
        }
        IntegrationError::StepSizeUnderflow { x } => Error::Integration { t: x, reason: "step size underflow".into() },
        IntegrationError::StiffnessDetected { x } => Error::Integration { t: x, reason: "problem became stiff".into() },
    }
}

/// Unwrapped states at `samples + 1` uniform times on `[0, duration]`.
///
/// Each sample interval is a separate adaptive solve ending exactly on the
/// sample time, so the recorded states carry the full step accuracy.
fn solve(spec: &SystemSpec, s0: PhaseState, duration: f64, controls: &Controls) -> Result<(Vec<f64>, Vec<PhaseState>)> {
    if !(duration.is_finite() && duration > 0.0) {
        return Err(Error::Precondition(format!("integration time must be positive, got {duration}")));
    }
    if !s0.is_finite() {
        return Err(Error::Precondition("initial state is not finite".into()));
    }
    let samples = controls.samples.max(1);
    let dt = duration / samples as f64;
    let mut times = Vec::with_capacity(samples + 1);
    let mut states = Vec::with_capacity(samples + 1);
    times.push(0.0);
    states.push(s0);
    let mut y = s0.to_vector();
    let mut budget = controls.max_steps;
    for i in 0..samples {
        let (t0, t1) = (i as f64 * dt, if i + 1 == samples { duration } else { (i + 1) as f64 * dt });
        if budget == 0 {
            return Err(Error::Integration {
                t: t0,
                reason: format!("step budget of {} exhausted", controls.max_steps),
            });
        }
        let mut stepper = Dop853::from_param(
            Vectorfield(spec),
            t0,
            t1,
            t1 - t0,
            y,
            controls.rtol,
            controls.atol,
            0.9,
            0.0,
            0.333,
            6.0,
            t1 - t0,
            0.0,
            budget,
            1000,
            OutputType::Sparse,
        );
        let stats = stepper.integrate().map_err(|e| integration_error(e, controls.max_steps))?;
        budget = budget.saturating_sub(stats.accepted_steps + stats.rejected_steps);
        y = *stepper.y_out().last().expect("solver emits the final point");
        let s = PhaseState::from_vector(&y);
        if !s.is_finite() {
            return Err(Error::Integration { t: t1, reason: "state became non-finite".into() });
        }
        times.push(t1);
        states.push(s);
    }
    Ok((times, states))
}

/// Integrate on `[0, duration]` and record `H` plus the given observables.
pub fn integrate(
    spec: &SystemSpec,
    s0: PhaseState,
    duration: f64,
    controls: &Controls,
    observables: &[Observable],
) -> Result<Trajectory> {
    let (times, raw) = solve(spec, s0, duration, controls)?;
    let mut all = vec![Observable::hamiltonian(spec)];
    all.extend(observables.iter().cloned());
    let recorded = all.iter().map(|o| (o.name.clone(), raw.iter().map(|s| o.eval(s)).collect())).collect();
    let lattice = *spec.lattice();
    Ok(Trajectory { times, states: raw.into_iter().map(|s| s.reduced(&lattice)).collect(), observables: recorded })
}

/// Final state after flowing for time `t`, which may be negative.
pub fn flow_for(spec: &SystemSpec, s0: PhaseState, t: f64, controls: &Controls) -> Result<PhaseState> {
    if t == 0.0 {
        return Ok(s0);
    }
    let single = Controls { samples: 1, ..*controls };
    if t > 0.0 {
        let (_, states) = solve(spec, s0, t, &single)?;
        return Ok(*states.last().expect("solver emits the initial point"));
    }
    let flipped = PhaseState { px: -s0.px, py: -s0.py, ..s0 };
    let (_, states) = solve(&spec.reversed(), flipped, -t, &single)?;
    let end = states.last().expect("solver emits the initial point");
    Ok(PhaseState { px: -end.px, py: -end.py, ..*end })
}

/// `dF/dt` at `s0` from a five-point central difference of `F` along the flow.
pub fn rate_along_flow(
    spec: &SystemSpec,
    s0: PhaseState,
    f: &dyn Fn(&PhaseState) -> f64,
    step: f64,
    controls: &Controls,
) -> Result<f64> {
    let at = |t: f64| flow_for(spec, s0, t, controls).map(|s| f(&s));
    let (m2, m1, p1, p2) = (at(-2.0 * step)?, at(-step)?, at(step)?, at(2.0 * step)?);
    Ok((m2 - 8.0 * m1 + 8.0 * p1 - p2) / (12.0 * step))
}
