//! Momentum polynomials on `T*T²` and the bracket with the geodesic
//! Hamiltonian restricted to an energy level.
//!
//! Momenta enter through `p_z = (p_x − i p_y)/2` and its conjugate. The
//! Hamiltonian is `H = 2h p_z p_z̄` with `h = 1/g`. On the level `H = E` every
//! real momentum polynomial reduces to
//!
//! ```text
//! F = a_k p_z^k + … + a_1 p_z + a_0 + ā_1 p_z̄ + … + ā_k p_z̄^k,   a_0 real,
//! ```
//!
//! which is what [`MomentumPolynomial`] stores (the conjugate tail is implicit).
//! Coefficients are tracked as polynomials in `E` so that a level-restricted
//! integral can be turned back into a homogeneous one.
//!
//! The magnetic bracket uses `{p_x, p_y} = B`, which in complex momenta reads
//! `{p_z, p_z̄} = iB/2`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier::{FieldJson, FourierField, TorusLattice, GRID_SIZE};

/// Tolerance for the reality of `a_0`, relative to its largest coefficient.
pub const REALITY_TOL: f64 = 1e-10;

/// A polynomial in the energy `E` with field coefficients; index = power.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyPoly {
    terms: Vec<FourierField>,
}

impl EnergyPoly {
    pub fn constant(field: FourierField) -> Self {
        Self { terms: vec![field] }
    }

    /// `E^power · field`.
    pub fn monomial(power: usize, field: FourierField) -> Self {
        let zero = FourierField::zero(*field.lattice());
        let mut terms = vec![zero; power];
        terms.push(field);
        Self { terms }
    }

    pub fn from_terms(terms: Vec<FourierField>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::Input("energy polynomial needs at least one term".into()));
        }
        Ok(Self { terms })
    }

    pub fn terms(&self) -> &[FourierField] {
        &self.terms
    }

    /// Highest power with a nonzero field (0 for the zero polynomial).
    pub fn degree(&self) -> usize {
        self.terms.iter().rposition(|f| !f.is_zero()).unwrap_or(0)
    }

    pub fn at(&self, energy: f64) -> FourierField {
        let mut acc = FourierField::zero(*self.terms[0].lattice());
        let mut pow = 1.0;
        for f in &self.terms {
            if !f.is_zero() {
                acc = &acc + &f.scale(pow);
            }
            pow *= energy;
        }
        acc
    }

    fn lattice(&self) -> &TorusLattice {
        self.terms[0].lattice()
    }

    fn map(&self, f: impl Fn(&FourierField) -> FourierField) -> Self {
        Self { terms: self.terms.iter().map(f).collect() }
    }
}

/// `F = Σ_{m=1..k} (a_m p_z^m + ā_m p_z̄^m) + a_0` with coefficients that may
/// depend polynomially on the energy.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentumPolynomial {
    coeffs: Vec<EnergyPoly>,
}

impl MomentumPolynomial {
    /// Energy-independent polynomial from `a_0..a_k`.
    pub fn new(coeffs: Vec<FourierField>) -> Result<Self> {
        Self::from_energy_coeffs(coeffs.into_iter().map(EnergyPoly::constant).collect())
    }

    pub fn from_energy_coeffs(coeffs: Vec<EnergyPoly>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::Input("a momentum polynomial needs at least a_0".into()));
        }
        let lattice = *coeffs[0].lattice();
        for c in &coeffs {
            for f in c.terms() {
                if !f.lattice().same_torus(&lattice) {
                    return Err(Error::LatticeMismatch);
                }
            }
        }
        let mut coeffs = coeffs;
        // a_0 must be real; enforce it exactly once it passes the check.
        let a0 = &coeffs[0];
        for f in a0.terms() {
            let check = f.is_real(REALITY_TOL * f.max_abs_coeff());
            if !check.is_real {
                return Err(Error::Reality { residue: check.max_asymmetry });
            }
        }
        coeffs[0] = a0.map(FourierField::symmetrize_real);
        Ok(Self { coeffs })
    }

    /// The zero polynomial of degree `k`.
    pub fn zero(lattice: TorusLattice, k: usize) -> Self {
        Self { coeffs: vec![EnergyPoly::constant(FourierField::zero(lattice)); k + 1] }
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn energy_degree(&self) -> usize {
        self.coeffs.iter().map(EnergyPoly::degree).max().unwrap_or(0)
    }

    pub fn lattice(&self) -> &TorusLattice {
        self.coeffs[0].lattice()
    }

    pub fn energy_coeffs(&self) -> &[EnergyPoly] {
        &self.coeffs
    }

    /// Coefficient `a_m` at the given energy.
    pub fn coeff_at(&self, m: usize, energy: f64) -> FourierField {
        match self.coeffs.get(m) {
            Some(c) => c.at(energy),
            None => FourierField::zero(*self.lattice()),
        }
    }

    /// Collapse the energy dependence at a fixed level.
    pub fn at_energy(&self, energy: f64) -> MomentumPolynomial {
        Self { coeffs: self.coeffs.iter().map(|c| EnergyPoly::constant(c.at(energy))).collect() }
    }

    /// Whether every coefficient vanishes identically at the given level.
    pub fn is_zero_at(&self, energy: f64, tol: f64) -> bool {
        self.max_coeff_norm(energy) <= tol
    }

    /// Largest coefficient magnitude over all `a_m` at the given level.
    pub fn max_coeff_norm(&self, energy: f64) -> f64 {
        (0..=self.degree()).map(|m| self.coeff_at(m, energy).max_abs_coeff()).fold(0.0, f64::max)
    }

    /// Value at a phase point, using `p_z = (p_x − i p_y)/2`.
    pub fn evaluate(&self, x: f64, y: f64, px: f64, py: f64, energy: f64) -> Result<f64> {
        let pz = Complex64::new(px, -py) / 2.0;
        let a0 = self.coeff_at(0, energy).evaluate(x, y);
        let mut tail = Complex64::default();
        let mut pow = Complex64::new(1.0, 0.0);
        for m in 1..=self.degree() {
            pow *= pz;
            tail += self.coeff_at(m, energy).evaluate(x, y) * pow;
        }
        let value = a0.re + 2.0 * tail.re;
        if a0.im.abs() > 1e-12 * (1.0 + value.abs()) {
            return Err(Error::Reality { residue: a0.im.abs() });
        }
        Ok(value)
    }

    /// Split by index parity into `(F_even, F_odd)`.
    pub fn split_parity(&self) -> (MomentumPolynomial, MomentumPolynomial) {
        let zero = EnergyPoly::constant(FourierField::zero(*self.lattice()));
        let pick = |parity: usize| Self {
            coeffs: self
                .coeffs
                .iter()
                .enumerate()
                .map(|(m, c)| if m % 2 == parity { c.clone() } else { zero.clone() })
                .collect(),
        };
        (pick(0), pick(1))
    }

    pub fn add(&self, other: &MomentumPolynomial) -> Result<MomentumPolynomial> {
        if !self.lattice().same_torus(other.lattice()) {
            return Err(Error::LatticeMismatch);
        }
        let k = self.degree().max(other.degree());
        let zero = FourierField::zero(*self.lattice());
        let coeffs = (0..=k)
            .map(|m| {
                let a = self.coeffs.get(m).map(|c| c.terms()).unwrap_or(&[]);
                let b = other.coeffs.get(m).map(|c| c.terms()).unwrap_or(&[]);
                let n = a.len().max(b.len()).max(1);
                let terms = (0..n).map(|d| a.get(d).unwrap_or(&zero) + b.get(d).unwrap_or(&zero)).collect();
                EnergyPoly { terms }
            })
            .collect();
        Ok(Self { coeffs })
    }

    pub fn to_json(&self) -> PolynomialJson {
        PolynomialJson {
            k: self.degree(),
            e_degree: self.energy_degree(),
            coeffs: self
                .coeffs
                .iter()
                .map(|c| {
                    if c.terms().len() == 1 {
                        CoeffJson::Field(c.terms()[0].to_json())
                    } else {
                        CoeffJson::EnergyPoly(c.terms().iter().map(FourierField::to_json).collect())
                    }
                })
                .collect(),
        }
    }

    pub fn from_json(json: &PolynomialJson) -> Result<Self> {
        if json.coeffs.len() != json.k + 1 {
            return Err(Error::Input(format!(
                "degree {} needs {} coefficients, got {}",
                json.k,
                json.k + 1,
                json.coeffs.len()
            )));
        }
        let coeffs = json
            .coeffs
            .iter()
            .map(|c| match c {
                CoeffJson::Field(f) => Ok(EnergyPoly::constant(FourierField::from_json(f)?)),
                CoeffJson::EnergyPoly(fs) => {
                    EnergyPoly::from_terms(fs.iter().map(FourierField::from_json).collect::<Result<_>>()?)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let poly = Self::from_energy_coeffs(coeffs)?;
        if poly.energy_degree() > json.e_degree {
            return Err(Error::Input(format!(
                "declared E_degree {} but coefficients reach degree {}",
                json.e_degree,
                poly.energy_degree()
            )));
        }
        Ok(poly)
    }
}

/// JSON polynomial schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolynomialJson {
    pub k: usize,
    #[serde(rename = "E_degree", default)]
    pub e_degree: usize,
    pub coeffs: Vec<CoeffJson>,
}

/// A coefficient is either a single field or a list of fields indexed by the
/// power of `E`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CoeffJson {
    Field(FieldJson),
    EnergyPoly(Vec<FieldJson>),
}

/// Check that `g` is positive on the evaluation grid.
pub fn check_metric(g: &FourierField) -> Result<()> {
    let check = g.is_real(REALITY_TOL * g.max_abs_coeff());
    if !check.is_real {
        return Err(Error::Reality { residue: check.max_asymmetry });
    }
    let (min, x, y) = g.min_real_on_grid(GRID_SIZE);
    if min.is_nan() || min <= 0.0 {
        return Err(Error::Metric { x, y, value: min });
    }
    Ok(())
}

fn check_energy(energy: f64) -> Result<()> {
    if !(energy.is_finite() && energy > 0.0) {
        return Err(Error::Precondition(format!("energy must be positive, got {energy}")));
    }
    Ok(())
}

/// `g·{F, H}_E` for the geodesic flow.
pub fn bracket_restricted(f: &MomentumPolynomial, g: &FourierField, energy: f64) -> Result<MomentumPolynomial> {
    bracket_impl(f, g, None, energy)
}

/// `g·{F, H}_E` for the magnetic geodesic flow with field `B` (`{p_x, p_y} = B`).
pub fn bracket_restricted_magnetic(
    f: &MomentumPolynomial,
    g: &FourierField,
    b: &FourierField,
    energy: f64,
) -> Result<MomentumPolynomial> {
    let check = b.is_real(REALITY_TOL * b.max_abs_coeff());
    if !check.is_real {
        return Err(Error::Reality { residue: check.max_asymmetry });
    }
    bracket_impl(f, g, Some(b), energy)
}

// Coefficient at p_z^j of g·{F,H}_E (a_j = 0 for j > k):
//   2 ∂̄a_{j−1} + i j B a_j + E g ∂a_{j+1} + (j+1) E a_{j+1} ∂g
// and the constant term E(∂(g a_1) + conj).
fn bracket_impl(
    f: &MomentumPolynomial,
    g: &FourierField,
    b: Option<&FourierField>,
    energy: f64,
) -> Result<MomentumPolynomial> {
    check_energy(energy)?;
    check_metric(g)?;
    if !f.lattice().same_torus(g.lattice()) {
        return Err(Error::LatticeMismatch);
    }
    let k = f.degree();
    let a: Vec<FourierField> = (0..=k + 2).map(|m| f.coeff_at(m, energy)).collect();
    let gz = g.d_z();
    let mut out = Vec::with_capacity(k + 2);

    let ga1 = g.mul(&a[1])?.d_z();
    out.push((&ga1 + &ga1.conj()).scale(energy));

    for j in 1..=k + 1 {
        let mut c = a[j - 1].d_zbar().scale(2.0);
        if let Some(b) = b {
            if !a[j].is_zero() {
                c = &c + &b.mul(&a[j])?.scale(Complex64::new(0.0, j as f64));
            }
        }
        if !a[j + 1].is_zero() {
            c = &c + &g.mul(&a[j + 1].d_z())?.scale(energy);
            c = &c + &a[j + 1].mul(&gz)?.scale(energy * (j + 1) as f64);
        }
        out.push(c);
    }
    MomentumPolynomial::new(out)
}

/// One term `a_{k−l,l} p_z^{k−l} p_z̄^l` of a homogeneous polynomial, with
/// coefficient `field · h^h_power` (`h = 1/g`).
#[derive(Debug, Clone, PartialEq)]
pub struct HomogeneousTerm {
    pub field: FourierField,
    pub h_power: u32,
}

/// A real homogeneous polynomial of degree `k` in `p_z, p_z̄`.
///
/// Coefficients are stored as `field · h^e` so that powers of `h = 1/g`
/// produced by substituting `E → H` stay exact.
#[derive(Debug, Clone)]
pub struct HomogeneousPolynomial {
    metric: FourierField,
    terms: Vec<HomogeneousTerm>,
}

impl HomogeneousPolynomial {
    /// `terms[l]` multiplies `p_z^{k−l} p_z̄^l`; reality requires the mirror
    /// relation `terms[k−l] = conj(terms[l])`.
    pub fn new(metric: FourierField, terms: Vec<HomogeneousTerm>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::Input("homogeneous polynomial needs at least one term".into()));
        }
        let k = terms.len() - 1;
        for l in 0..=k {
            let (a, b) = (&terms[l], &terms[k - l]);
            if a.h_power != b.h_power {
                return Err(Error::Reality { residue: f64::INFINITY });
            }
            let asym = a.field.max_coeff_diff(&b.field.conj());
            if asym > REALITY_TOL * a.field.max_abs_coeff().max(1.0) {
                return Err(Error::Reality { residue: asym });
            }
        }
        Ok(Self { metric, terms })
    }

    pub fn degree(&self) -> usize {
        self.terms.len() - 1
    }

    pub fn terms(&self) -> &[HomogeneousTerm] {
        &self.terms
    }

    pub fn metric(&self) -> &FourierField {
        &self.metric
    }

    pub fn evaluate(&self, x: f64, y: f64, px: f64, py: f64) -> f64 {
        let k = self.degree();
        let pz = Complex64::new(px, -py) / 2.0;
        let pzb = pz.conj();
        let h = 1.0 / self.metric.evaluate(x, y).re;
        let mut acc = Complex64::default();
        for (l, t) in self.terms.iter().enumerate() {
            acc += t.field.evaluate(x, y) * h.powi(t.h_power as i32) * pz.powi((k - l) as i32) * pzb.powi(l as i32);
        }
        acc.re
    }
}

/// Replace every pair `p_z p_z̄` by `E/(2h) = Eg/2`. The output keeps `E`
/// symbolic; collapse it with [`MomentumPolynomial::at_energy`].
pub fn substitute_energy(f: &HomogeneousPolynomial, g: &FourierField) -> Result<MomentumPolynomial> {
    check_metric(g)?;
    let k = f.degree();
    let lattice = *g.lattice();
    let mut coeffs = vec![EnergyPoly::constant(FourierField::zero(lattice)); k + 1];
    for l in 0..=k / 2 {
        let term = &f.terms[l];
        let e = term.h_power as usize;
        if e > l {
            return Err(Error::Unsupported(format!(
                "term p_z^{} p_z̄^{l} carries h^{e}, more than the {l} pairs available",
                k - l
            )));
        }
        let field = term.field.mul(&g.powi((l - e) as u32)?)?.scale(0.5f64.powi(l as i32));
        coeffs[k - 2 * l] = EnergyPoly::monomial(l, field);
    }
    MomentumPolynomial::from_energy_coeffs(coeffs)
}

/// Substitute `E → H = 2h p_z p_z̄`. Every coefficient `a_m` must be a single
/// power `E^d` with `m + 2d = k`.
pub fn homogenize(f: &MomentumPolynomial, g: &FourierField) -> Result<HomogeneousPolynomial> {
    let k = f.degree();
    let lattice = *g.lattice();
    let mut terms = vec![HomogeneousTerm { field: FourierField::zero(lattice), h_power: 0 }; k + 1];
    for (m, c) in f.energy_coeffs().iter().enumerate() {
        for (d, field) in c.terms().iter().enumerate() {
            if field.is_zero() {
                continue;
            }
            if m + 2 * d != k {
                return Err(Error::Unsupported(format!(
                    "coefficient a_{m} has an E^{d} part, which does not homogenize to degree {k}"
                )));
            }
            let scaled = field.scale(2f64.powi(d as i32));
            // p_z^m E^d → 2^d h^d p_z^{m+d} p_z̄^d, mirrored for the conjugate tail.
            terms[d] = HomogeneousTerm { field: scaled.clone(), h_power: d as u32 };
            terms[k - d] = HomogeneousTerm { field: scaled.conj(), h_power: d as u32 };
        }
    }
    HomogeneousPolynomial::new(g.clone(), terms)
}
