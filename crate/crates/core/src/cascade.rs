//! The downward cascade for a polynomial integral on a fixed energy level.
//!
//! Starting from a constant leading coefficient `a_k`, each lower coefficient
//! solves
//!
//! ```text
//! ∂̄a_n = −(E/2)((n+2) a_{n+2} ∂g + g ∂a_{n+2}),
//! ```
//!
//! which has a periodic solution exactly when the right side has zero mean.
//! The mean is the obstruction at step `n`. Once the bottom is reached a
//! closing reality condition decides whether the result is a genuine integral.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier::{FourierField, Truncation, GRID_SIZE};
use crate::momentum::{check_metric, EnergyPoly, HomogeneousPolynomial, MomentumPolynomial};

/// Default relative tolerance for obstructions.
pub const OBSTRUCTION_TOL: f64 = 1e-10;
/// Default tolerance for the closing residual, relative to `1 + scale`.
pub const CLOSING_TOL: f64 = 1e-10;

/// Tuning knobs for [`run_cascade`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CascadeOptions {
    pub obstruction_tol: f64,
    pub closing_tol: f64,
    /// Additive constants `c_n`; missing entries are zero.
    pub constants: BTreeMap<usize, Complex64>,
    /// Cap on the band of every product; `None` keeps products exact.
    pub band_cap: Option<u32>,
}

impl Default for CascadeOptions {
    fn default() -> Self {
        Self { obstruction_tol: OBSTRUCTION_TOL, closing_tol: CLOSING_TOL, constants: BTreeMap::new(), band_cap: None }
    }
}

impl CascadeOptions {
    pub fn with_constant(mut self, n: usize, c: impl Into<Complex64>) -> Self {
        self.constants.insert(n, c.into());
        self
    }
}

/// Measured obstruction at one step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Obstruction {
    pub value: Complex64,
    /// `|value|` divided by the coefficient scale of the right side.
    pub relative: f64,
}

/// Working state of a cascade: `g`, `k`, `E`, `a_k`, and what has been solved.
#[derive(Debug, Clone)]
pub struct CascadeState {
    g: FourierField,
    gz: FourierField,
    k: usize,
    energy: f64,
    a_k: Complex64,
    solved: BTreeMap<usize, FourierField>,
    constants: BTreeMap<usize, Complex64>,
    obstructions: BTreeMap<usize, Obstruction>,
    truncation: Truncation,
    obstruction_tol: f64,
    band_cap: Option<u32>,
}

impl CascadeState {
    pub fn new(g: &FourierField, k: usize, energy: f64, a_k: Complex64, options: &CascadeOptions) -> Result<Self> {
        if k == 0 {
            return Err(Error::Precondition("degree k must be at least 1".into()));
        }
        if !(energy.is_finite() && energy > 0.0) {
            return Err(Error::Precondition(format!("energy must be positive, got {energy}")));
        }
        if a_k == Complex64::default() || !a_k.is_finite() {
            return Err(Error::Precondition("leading coefficient a_k must be finite and nonzero".into()));
        }
        check_metric(g)?;
        let g = g.symmetrize_real();
        let lattice = *g.lattice();
        let mut solved = BTreeMap::new();
        solved.insert(k, FourierField::constant(lattice, a_k));
        Ok(Self {
            gz: g.d_z(),
            g,
            k,
            energy,
            a_k,
            solved,
            constants: options.constants.clone(),
            obstructions: BTreeMap::new(),
            truncation: Truncation::default(),
            obstruction_tol: options.obstruction_tol,
            band_cap: options.band_cap,
        })
    }

    pub fn metric(&self) -> &FourierField {
        &self.g
    }

    pub fn degree(&self) -> usize {
        self.k
    }

    pub fn energy(&self) -> f64 {
        self.energy
    }

    pub fn leading(&self) -> Complex64 {
        self.a_k
    }

    /// `λ = k a_k E`.
    pub fn lambda(&self) -> Complex64 {
        self.a_k * (self.k as f64 * self.energy)
    }

    pub fn solved(&self, n: usize) -> Option<&FourierField> {
        self.solved.get(&n)
    }

    pub fn constant(&self, n: usize) -> Complex64 {
        self.constants.get(&n).copied().unwrap_or_default()
    }

    pub fn obstructions(&self) -> &BTreeMap<usize, Obstruction> {
        &self.obstructions
    }

    pub fn truncation(&self) -> Truncation {
        self.truncation
    }

    /// Add `c` to an already-solved coefficient.
    pub fn perturb(&mut self, n: usize, c: Complex64) -> Result<()> {
        let a = self.solved.get_mut(&n).ok_or_else(|| Error::Precondition(format!("a_{n} is not solved")))?;
        *a = a.add_constant(c);
        *self.constants.entry(n).or_default() += c;
        Ok(())
    }

    fn product(&mut self, a: &FourierField, b: &FourierField) -> Result<FourierField> {
        match self.band_cap {
            None => a.mul(b),
            Some(cap) => {
                let (p, t) = a.multiply(b, cap)?;
                self.truncation.absorb(t);
                Ok(p)
            }
        }
    }

    /// Right side of the `∂̄a_n` equation together with its coefficient scale.
    pub fn step_rhs(&mut self, n: usize) -> Result<(FourierField, f64)> {
        let a = self
            .solved
            .get(&(n + 2))
            .cloned()
            .ok_or_else(|| Error::Precondition(format!("a_{} must be solved before step {n}", n + 2)))?;
        let gz = self.gz.clone();
        let g = self.g.clone();
        let t1 = self.product(&a, &gz)?.scale((n + 2) as f64);
        let t2 = self.product(&g, &a.d_z())?;
        let half_e = -0.5 * self.energy;
        let scale = 0.5 * self.energy * t1.max_abs_coeff().max(t2.max_abs_coeff());
        Ok(((&t1 + &t2).scale(half_e), scale))
    }

    /// Solve for `a_n`, recording the obstruction even when it passes.
    pub fn cascade_step(&mut self, n: usize) -> Result<FourierField> {
        let (rhs, scale) = self.step_rhs(n)?;
        let value = rhs.mean();
        let relative = if scale > 0.0 { value.norm() / scale } else { 0.0 };
        self.obstructions.insert(n, Obstruction { value, relative });
        if relative > self.obstruction_tol {
            return Err(Error::Obstruction { n, value });
        }
        let a_n = rhs.inv_d_zbar_unchecked().add_constant(self.constant(n));
        self.solved.insert(n, a_n.clone());
        Ok(a_n)
    }

    /// The field whose vanishing closes the cascade.
    ///
    /// Odd `k`: `Re ∂(g a_1)`. Even `k`: `Im(a_0 − mean a_0)`.
    pub fn closing_field(&mut self) -> Result<FourierField> {
        let bottom = self.k % 2;
        let a = self
            .solved
            .get(&bottom)
            .cloned()
            .ok_or_else(|| Error::Precondition("the cascade has not reached the bottom".into()))?;
        if bottom == 1 {
            let g = self.g.clone();
            Ok(self.product(&g, &a)?.d_z().re())
        } else {
            Ok(a.zero_mean().im())
        }
    }

    /// The integral candidate with `a_{k−2j}` stored as `E^j · (a_{k−2j}/E^j)`.
    pub fn polynomial(&self) -> Result<MomentumPolynomial> {
        let lattice = *self.g.lattice();
        let coeffs = (0..=self.k)
            .map(|m| match self.solved.get(&m) {
                Some(a) if (self.k - m).is_multiple_of(2) => {
                    let j = (self.k - m) / 2;
                    let field = if m == 0 { a.symmetrize_real() } else { a.clone() };
                    EnergyPoly::monomial(j, field.scale(self.energy.powi(-(j as i32))))
                }
                _ => EnergyPoly::constant(FourierField::zero(lattice)),
            })
            .collect();
        MomentumPolynomial::from_energy_coeffs(coeffs)
    }
}

/// Outcome of a full cascade.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Verdict {
    IntegralFound,
    ObstructionHit { n: usize },
    RealityFailed,
}

impl Verdict {
    /// CLI exit code: 0, 2 or 3.
    pub fn exit_code(&self) -> i32 {
        match self {
            Verdict::IntegralFound => 0,
            Verdict::ObstructionHit { .. } => 2,
            Verdict::RealityFailed => 3,
        }
    }
}

/// Sup-norm on the evaluation grid and coefficient `l∞` of the closing field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClosingNorms {
    pub grid_sup: f64,
    pub coeff_max: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone)]
pub struct CascadeReport {
    pub k: usize,
    pub energy: f64,
    pub a_k: Complex64,
    pub lambda: Complex64,
    pub obstructions: BTreeMap<usize, Obstruction>,
    pub closing_residual: Option<FourierField>,
    pub closing_norms: Option<ClosingNorms>,
    pub verdict: Verdict,
    pub constants: BTreeMap<usize, Complex64>,
    pub truncation: Truncation,
    pub coefficients: BTreeMap<usize, FourierField>,
    state: CascadeState,
}

#[derive(Serialize)]
struct ObstructionJson {
    n: usize,
    re: f64,
    im: f64,
    relative: f64,
}

#[derive(Serialize)]
struct ConstantJson {
    n: usize,
    re: f64,
    im: f64,
}

#[derive(Serialize)]
struct ReportJson<'a> {
    k: usize,
    #[serde(rename = "E")]
    energy: f64,
    a_k: [f64; 2],
    lambda: [f64; 2],
    obstructions: Vec<ObstructionJson>,
    closing: Option<ClosingNorms>,
    verdict: &'a Verdict,
    constants: Vec<ConstantJson>,
    truncation: TruncationJson,
}

#[derive(Serialize)]
struct TruncationJson {
    dropped_modes: usize,
    mass: f64,
}

impl CascadeReport {
    pub fn state(&self) -> &CascadeState {
        &self.state
    }

    /// The candidate integral, available once every step has been solved.
    pub fn polynomial(&self) -> Result<MomentumPolynomial> {
        if matches!(self.verdict, Verdict::ObstructionHit { .. }) {
            return Err(Error::Precondition("the cascade stopped at an obstruction".into()));
        }
        self.state.polynomial()
    }

    pub fn max_obstruction(&self) -> f64 {
        self.obstructions.values().map(|o| o.relative).fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let report = ReportJson {
            k: self.k,
            energy: self.energy,
            a_k: [self.a_k.re, self.a_k.im],
            lambda: [self.lambda.re, self.lambda.im],
            obstructions: self
                .obstructions
                .iter()
                .rev()
                .map(|(&n, o)| ObstructionJson { n, re: o.value.re, im: o.value.im, relative: o.relative })
                .collect(),
            closing: self.closing_norms,
            verdict: &self.verdict,
            constants: self.constants.iter().map(|(&n, c)| ConstantJson { n, re: c.re, im: c.im }).collect(),
            truncation: TruncationJson { dropped_modes: self.truncation.dropped_modes, mass: self.truncation.mass },
        };
        serde_json::to_value(report).expect("report serializes")
    }
}

/// Run the cascade from `a_k` down to `a_1` (odd `k`) or `a_0` (even `k`).
///
/// An obstruction beyond tolerance ends the run with
/// [`Verdict::ObstructionHit`]; only bad inputs produce an error.
pub fn run_cascade(
    g: &FourierField,
    k: usize,
    energy: f64,
    a_k: Complex64,
    options: &CascadeOptions,
) -> Result<CascadeReport> {
    let mut state = CascadeState::new(g, k, energy, a_k, options)?;
    run_from(&mut state, k)?;
    Ok(finish(state, options))
}

fn run_from(state: &mut CascadeState, from: usize) -> Result<Option<usize>> {
    let mut n = from;
    while n >= 2 {
        n -= 2;
        match state.cascade_step(n) {
            Ok(_) => {}
            Err(Error::Obstruction { n, .. }) => return Ok(Some(n)),
            Err(e) => return Err(e),
        }
    }
    Ok(None)
}

fn finish(mut state: CascadeState, options: &CascadeOptions) -> CascadeReport {
    let bottom = state.k % 2;
    let hit = state.obstructions.iter().find(|(_, o)| o.relative > state.obstruction_tol).map(|(&n, _)| n);
    let (verdict, closing_residual, closing_norms) = match hit {
        Some(n) => (Verdict::ObstructionHit { n }, None, None),
        None => {
            let field = state.closing_field().expect("bottom coefficient is solved");
            let scale = state.solved[&bottom].max_abs_coeff().max(state.g.max_abs_coeff());
            let norms = ClosingNorms {
                grid_sup: field.sup_on_grid(GRID_SIZE),
                coeff_max: field.max_abs_coeff(),
                tolerance: options.closing_tol * (1.0 + scale),
            };
            let ok = norms.grid_sup <= norms.tolerance && norms.coeff_max <= norms.tolerance;
            (if ok { Verdict::IntegralFound } else { Verdict::RealityFailed }, Some(field), Some(norms))
        }
    };
    CascadeReport {
        k: state.k,
        energy: state.energy,
        a_k: state.a_k,
        lambda: state.lambda(),
        obstructions: state.obstructions.clone(),
        closing_residual,
        closing_norms,
        verdict,
        constants: state.constants.clone(),
        truncation: state.truncation,
        coefficients: state.solved.clone(),
        state,
    }
}

/// Solve the cascade, then add `c` to `a_m` and re-solve every step below `m`.
/// Returns the obstructions before and after.
pub fn perturbed_obstructions(
    g: &FourierField,
    k: usize,
    energy: f64,
    a_k: Complex64,
    m: usize,
    c: Complex64,
    options: &CascadeOptions,
) -> Result<(BTreeMap<usize, Obstruction>, BTreeMap<usize, Obstruction>)> {
    if m > k || !(k - m).is_multiple_of(2) {
        return Err(Error::Precondition(format!("a_{m} is not a cascade coefficient for k = {k}")));
    }
    let base = run_cascade(g, k, energy, a_k, options)?;
    let mut after = CascadeState::new(g, k, energy, a_k, options)?;
    let mut n = k;
    while n > m {
        n -= 2;
        after.cascade_step(n)?;
    }
    after.perturb(m, c)?;
    run_from(&mut after, m)?;
    let mut before = base.obstructions.clone();
    before.retain(|&n, _| n < m);
    Ok((before, after.obstructions))
}

/// `mean(a ∂g)`; the step-`n` obstruction equals `−(E/2)(n+1)` times this.
pub fn obstruction_reduced(a: &FourierField, g: &FourierField) -> Result<Complex64> {
    Ok(a.mul(&g.d_z())?.mean())
}

/// Mean of the full right side `−(E/2)((n+2) a ∂g + g ∂a)`.
pub fn obstruction_full(a: &FourierField, g: &FourierField, n: usize, energy: f64) -> Result<Complex64> {
    let t1 = a.mul(&g.d_z())?.scale((n + 2) as f64);
    let t2 = g.mul(&a.d_z())?;
    Ok((&t1 + &t2).mean() * (-0.5 * energy))
}

/// The Liouville family `g = v(x) + w(y)` with its quadratic integral.
#[derive(Debug, Clone)]
pub struct LiouvilleSystem {
    pub v: FourierField,
    pub w: FourierField,
    pub g: FourierField,
    /// `p_z² + p_z̄² − E(v − w)` with the `E` dependence kept symbolic.
    pub f2: MomentumPolynomial,
}

impl LiouvilleSystem {
    /// `(p_x² w − p_y² v)/(v + w)`.
    pub fn closed_form(&self, x: f64, y: f64, px: f64, py: f64) -> f64 {
        let v = self.v.evaluate(x, y).re;
        let w = self.w.evaluate(x, y).re;
        (px * px * w - py * py * v) / (v + w)
    }

    pub fn homogeneous(&self) -> Result<HomogeneousPolynomial> {
        crate::momentum::homogenize(&self.f2, &self.g)
    }
}

pub fn build_liouville(v: &FourierField, w: &FourierField) -> Result<LiouvilleSystem> {
    if !v.depends_on_x_only() {
        return Err(Error::Precondition("v must depend on x only".into()));
    }
    if !w.depends_on_y_only() {
        return Err(Error::Precondition("w must depend on y only".into()));
    }
    if !v.lattice().same_torus(w.lattice()) {
        return Err(Error::LatticeMismatch);
    }
    for f in [v, w] {
        let check = f.is_real(1e-12 * f.max_abs_coeff().max(1.0));
        if !check.is_real {
            return Err(Error::Reality { residue: check.max_asymmetry });
        }
    }
    let (v, w) = (v.symmetrize_real(), w.symmetrize_real());
    let g = &v + &w;
    check_metric(&g)?;
    let lattice = *g.lattice();
    let f2 = MomentumPolynomial::from_energy_coeffs(vec![
        EnergyPoly::monomial(1, -&(&v - &w)),
        EnergyPoly::constant(FourierField::zero(lattice)),
        EnergyPoly::constant(FourierField::constant(lattice, 1.0)),
    ])?;
    Ok(LiouvilleSystem { v, w, g, f2 })
}

/// Residuals `∂(uv) + ∂̄(u v̄)` and `∂̄v − ∂u` of the stationary Hopf-type system.
pub fn hopf_residual(u: &FourierField, v: &FourierField) -> Result<(FourierField, FourierField)> {
    let check = u.is_real(1e-12 * u.max_abs_coeff().max(1.0));
    if !check.is_real {
        return Err(Error::Reality { residue: check.max_asymmetry });
    }
    let uv = u.mul(v)?;
    let first = &uv.d_z() + &u.mul(&v.conj())?.d_zbar();
    let second = &v.d_zbar() - &u.d_z();
    Ok((first, second))
}
