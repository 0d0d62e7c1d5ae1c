//! Truncated double Fourier series on a rectangular torus.
//!
//! A [`FourierField`] is a sparse map from lattice modes `(k, l)` to complex
//! coefficients, representing
//!
//! ```text
//! f(x, y) = Σ f_{k,l} exp(i(2πk x / Lx + 2πl y / Ly))
//! ```
//!
//! All derivative operators act mode-wise. With `κ = 2πk/Lx` and `ι = 2πl/Ly`
//! the complex derivatives `∂ = ½(∂x − i∂y)` and `∂̄ = ½(∂x + i∂y)` multiply a
//! mode by `(iκ + ι)/2` and `(iκ − ι)/2`. Both symbols vanish only at the zero
//! mode, so on mean-zero fields the operators are invertible; every inverse
//! returns the mean-zero representative.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance on the mean used by the checked inverse operators.
pub const DEFAULT_SOLVABILITY_TOL: f64 = 1e-10;

/// Side of the evaluation grid used for sup-norms.
pub const GRID_SIZE: usize = 64;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Period lattice of the configuration torus plus the band limit of
/// retained modes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TorusLattice {
    #[serde(rename = "Lx")]
    lx: f64,
    #[serde(rename = "Ly")]
    ly: f64,
    #[serde(rename = "N")]
    band_limit: u32,
}

impl TorusLattice {
    pub fn new(lx: f64, ly: f64, band_limit: u32) -> Result<Self> {
        if !(lx.is_finite() && lx > 0.0 && ly.is_finite() && ly > 0.0) {
            return Err(Error::Input(format!("lattice periods must be positive, got ({lx}, {ly})")));
        }
        if band_limit == 0 {
            return Err(Error::Input("band limit must be at least 1".into()));
        }
        Ok(Self { lx, ly, band_limit })
    }

    /// The square lattice `2πZ²`.
    pub fn square(band_limit: u32) -> Self {
        Self::new(2.0 * PI, 2.0 * PI, band_limit).expect("band limit must be at least 1")
    }

    pub fn lx(&self) -> f64 {
        self.lx
    }

    pub fn ly(&self) -> f64 {
        self.ly
    }

    pub fn band_limit(&self) -> u32 {
        self.band_limit
    }

    pub fn with_band(&self, band_limit: u32) -> Self {
        Self { band_limit: band_limit.max(1), ..*self }
    }

    /// Same periods; band limits may differ.
    pub fn same_torus(&self, other: &TorusLattice) -> bool {
        self.lx == other.lx && self.ly == other.ly
    }

    /// Physical wavenumbers `(2πk/Lx, 2πl/Ly)` of a mode.
    pub fn wavenumbers(&self, k: i32, l: i32) -> (f64, f64) {
        (2.0 * PI * k as f64 / self.lx, 2.0 * PI * l as f64 / self.ly)
    }

    /// Reduce a point to the fundamental domain `[0, Lx) × [0, Ly)`.
    pub fn reduce(&self, x: f64, y: f64) -> (f64, f64) {
        (x.rem_euclid(self.lx), y.rem_euclid(self.ly))
    }
}

impl Default for TorusLattice {
    fn default() -> Self {
        Self::square(16)
    }
}

/// Outcome of a conjugate-symmetry check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RealityCheck {
    pub is_real: bool,
    pub max_asymmetry: f64,
}

/// Modes dropped by a band-limited product.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Truncation {
    pub dropped_modes: usize,
    /// Sum of the magnitudes of the dropped coefficients.
    pub mass: f64,
}

impl Truncation {
    pub fn absorb(&mut self, other: Truncation) {
        self.dropped_modes += other.dropped_modes;
        self.mass += other.mass;
    }
}

/// A truncated double Fourier series.
#[derive(Clone, PartialEq)]
pub struct FourierField {
    lattice: TorusLattice,
    modes: BTreeMap<(i32, i32), Complex64>,
}

impl fmt::Debug for FourierField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FourierField").field("lattice", &self.lattice).field("modes", &self.modes.len()).finish()
    }
}

impl FourierField {
    /// Build a field from explicit modes. Unlisted modes are zero.
    pub fn new<It>(lattice: TorusLattice, modes: It) -> Result<Self>
    where
        It: IntoIterator<Item = (i32, i32, Complex64)>,
    {
        let band = lattice.band_limit as i64;
        let mut map = BTreeMap::new();
        for (k, l, c) in modes {
            if (k as i64).abs() > band || (l as i64).abs() > band {
                return Err(Error::BandLimit { k, l, band: lattice.band_limit });
            }
            if !(c.re.is_finite() && c.im.is_finite()) {
                return Err(Error::Input(format!("non-finite coefficient at mode ({k}, {l})")));
            }
            if map.insert((k, l), c).is_some() {
                return Err(Error::Input(format!("duplicate mode ({k}, {l})")));
            }
        }
        Ok(Self { lattice, modes: map })
    }

    pub fn zero(lattice: TorusLattice) -> Self {
        Self { lattice, modes: BTreeMap::new() }
    }

    pub fn constant(lattice: TorusLattice, value: impl Into<Complex64>) -> Self {
        let mut modes = BTreeMap::new();
        let c = value.into();
        if c != Complex64::new(0.0, 0.0) {
            modes.insert((0, 0), c);
        }
        Self { lattice, modes }
    }

    /// `amplitude · cos(2πk x/Lx + 2πl y/Ly)`.
    pub fn cosine(lattice: TorusLattice, k: i32, l: i32, amplitude: f64) -> Result<Self> {
        if (k, l) == (0, 0) {
            return Ok(Self::constant(lattice, amplitude));
        }
        let half = Complex64::new(amplitude / 2.0, 0.0);
        Self::new(lattice, [(k, l, half), (-k, -l, half)])
    }

    /// `amplitude · sin(2πk x/Lx + 2πl y/Ly)`.
    pub fn sine(lattice: TorusLattice, k: i32, l: i32, amplitude: f64) -> Result<Self> {
        if (k, l) == (0, 0) {
            return Ok(Self::zero(lattice));
        }
        let c = Complex64::new(0.0, -amplitude / 2.0);
        Self::new(lattice, [(k, l, c), (-k, -l, c.conj())])
    }

    /// Internal constructor that drops exact zeros and anything outside the
    /// lattice band, returning what was dropped.
    fn from_map(lattice: TorusLattice, raw: BTreeMap<(i32, i32), Complex64>) -> (Self, Truncation) {
        let band = lattice.band_limit as i32;
        let mut trunc = Truncation::default();
        let mut modes = BTreeMap::new();
        for ((k, l), c) in raw {
            if c == Complex64::new(0.0, 0.0) {
                continue;
            }
            if k.abs() > band || l.abs() > band {
                trunc.dropped_modes += 1;
                trunc.mass += c.norm();
            } else {
                modes.insert((k, l), c);
            }
        }
        (Self { lattice, modes }, trunc)
    }

    pub fn lattice(&self) -> &TorusLattice {
        &self.lattice
    }

    pub fn modes(&self) -> impl Iterator<Item = ((i32, i32), Complex64)> + '_ {
        self.modes.iter().map(|(&kl, &c)| (kl, c))
    }

    pub fn num_modes(&self) -> usize {
        self.modes.len()
    }

    pub fn coeff(&self, k: i32, l: i32) -> Complex64 {
        self.modes.get(&(k, l)).copied().unwrap_or_default()
    }

    /// Largest `max(|k|, |l|)` over stored nonzero modes.
    pub fn band(&self) -> u32 {
        self.modes
            .iter()
            .filter(|(_, c)| c.norm() > 0.0)
            .map(|(&(k, l), _)| k.unsigned_abs().max(l.unsigned_abs()))
            .max()
            .unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.modes.values().all(|c| c.norm() == 0.0)
    }

    /// Returns the same coefficients re-homed on a lattice with a different
    /// band limit; modes beyond it are dropped and reported.
    pub fn rebanded(&self, band_limit: u32) -> (Self, Truncation) {
        Self::from_map(self.lattice.with_band(band_limit), self.modes.clone())
    }

    pub fn evaluate(&self, x: f64, y: f64) -> Complex64 {
        self.modes
            .iter()
            .map(|(&(k, l), &c)| {
                let (kx, ly) = self.lattice.wavenumbers(k, l);
                c * Complex64::cis(kx * x + ly * y)
            })
            .sum()
    }

    /// The zero-mode coefficient.
    pub fn mean(&self) -> Complex64 {
        self.coeff(0, 0)
    }

    /// Largest coefficient magnitude (the coefficient-space l∞ norm).
    pub fn max_abs_coeff(&self) -> f64 {
        self.modes.values().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Conjugate-symmetry test `f_{-k,-l} = conj(f_{k,l})`.
    pub fn is_real(&self, tol: f64) -> RealityCheck {
        let max_asymmetry =
            self.modes.iter().map(|(&(k, l), &c)| (c - self.coeff(-k, -l).conj()).norm()).fold(0.0, f64::max);
        RealityCheck { is_real: max_asymmetry <= tol, max_asymmetry }
    }

    /// Pointwise complex conjugate of the function: `(k, l) ↦ conj(f_{-k,-l})`.
    pub fn conj(&self) -> Self {
        let raw = self.modes.iter().map(|(&(k, l), &c)| ((-k, -l), c.conj())).collect();
        Self::from_map(self.lattice, raw).0
    }

    /// `Re f` as a field.
    pub fn re(&self) -> Self {
        (self + &self.conj()).scale(0.5)
    }

    /// `Im f` as a field.
    pub fn im(&self) -> Self {
        (self - &self.conj()).scale(Complex64::new(0.0, -0.5))
    }

    /// Project onto the nearest real field.
    pub fn symmetrize_real(&self) -> Self {
        self.re()
    }

    pub fn scale(&self, factor: impl Into<Complex64>) -> Self {
        let s = factor.into();
        self.map_modes(|_, _, c| c * s)
    }

    pub fn add_constant(&self, c: impl Into<Complex64>) -> Self {
        let mut out = self.clone();
        *out.modes.entry((0, 0)).or_default() += c.into();
        out
    }

    /// The same field with its zero mode removed.
    pub fn zero_mean(&self) -> Self {
        let mut out = self.clone();
        out.modes.remove(&(0, 0));
        out
    }

    fn map_modes(&self, f: impl Fn(f64, f64, Complex64) -> Complex64) -> Self {
        let raw = self
            .modes
            .iter()
            .map(|(&(k, l), &c)| {
                let (kx, ly) = self.lattice.wavenumbers(k, l);
                ((k, l), f(kx, ly, c))
            })
            .collect();
        Self::from_map(self.lattice, raw).0
    }

    /// Exact convolution of coefficients, truncated to `|k|, |l| ≤ out_band`.
    pub fn multiply(&self, other: &FourierField, out_band: u32) -> Result<(FourierField, Truncation)> {
        if !self.lattice.same_torus(&other.lattice) {
            return Err(Error::LatticeMismatch);
        }
        let mut raw: BTreeMap<(i32, i32), Complex64> = BTreeMap::new();
        for (&(k1, l1), &a) in &self.modes {
            for (&(k2, l2), &b) in &other.modes {
                *raw.entry((k1 + k2, l1 + l2)).or_default() += a * b;
            }
        }
        Ok(Self::from_map(self.lattice.with_band(out_band), raw))
    }

    /// Product with the output band wide enough that nothing is truncated.
    pub fn mul(&self, other: &FourierField) -> Result<FourierField> {
        let band = (self.band() + other.band()).max(1);
        Ok(self.multiply(other, band)?.0)
    }

    pub fn powi(&self, n: u32) -> Result<FourierField> {
        let mut acc = FourierField::constant(self.lattice, 1.0);
        for _ in 0..n {
            acc = acc.mul(self)?;
        }
        Ok(acc)
    }

    pub fn d_x(&self) -> Self {
        self.map_modes(|kx, _, c| c * I * kx)
    }

    pub fn d_y(&self) -> Self {
        self.map_modes(|_, ly, c| c * I * ly)
    }

    /// `∂ = ½(∂x − i∂y)`.
    pub fn d_z(&self) -> Self {
        self.map_modes(|kx, ly, c| c * dz_symbol(kx, ly))
    }

    /// `∂̄ = ½(∂x + i∂y)`.
    pub fn d_zbar(&self) -> Self {
        self.map_modes(|kx, ly, c| c * dzbar_symbol(kx, ly))
    }

    /// The flat Laplacian `Δ = 4∂∂̄`.
    pub fn laplacian(&self) -> Self {
        self.map_modes(|kx, ly, c| c * -(kx * kx + ly * ly))
    }

    fn check_solvable(&self, tol: f64) -> Result<()> {
        let mean = self.mean();
        if mean.norm() > tol * self.max_abs_coeff() {
            return Err(Error::Unsolvable { mean });
        }
        Ok(())
    }

    fn invert_with(&self, symbol: impl Fn(f64, f64) -> Complex64) -> Self {
        let raw = self
            .modes
            .iter()
            .filter(|(&kl, _)| kl != (0, 0))
            .map(|(&(k, l), &c)| {
                let (kx, ly) = self.lattice.wavenumbers(k, l);
                ((k, l), c / symbol(kx, ly))
            })
            .collect();
        Self::from_map(self.lattice, raw).0
    }

    /// Mean-zero solution `u` of `∂u = f`.
    pub fn inv_d_z(&self) -> Result<Self> {
        self.inv_d_z_with_tol(DEFAULT_SOLVABILITY_TOL)
    }

    pub fn inv_d_z_with_tol(&self, tol: f64) -> Result<Self> {
        self.check_solvable(tol)?;
        Ok(self.inv_d_z_unchecked())
    }

    /// Inverts `∂` on the mean-zero part, discarding the mean without checking it.
    pub fn inv_d_z_unchecked(&self) -> Self {
        self.invert_with(dz_symbol)
    }

    /// Mean-zero solution `v` of `∂̄v = f`.
    pub fn inv_d_zbar(&self) -> Result<Self> {
        self.inv_d_zbar_with_tol(DEFAULT_SOLVABILITY_TOL)
    }

    pub fn inv_d_zbar_with_tol(&self, tol: f64) -> Result<Self> {
        self.check_solvable(tol)?;
        Ok(self.inv_d_zbar_unchecked())
    }

    pub fn inv_d_zbar_unchecked(&self) -> Self {
        self.invert_with(dzbar_symbol)
    }

    /// Mean-zero solution `u` of `∂∂̄u = f` (that is `Δu = 4f`).
    pub fn inv_laplace(&self) -> Result<Self> {
        self.inv_laplace_with_tol(DEFAULT_SOLVABILITY_TOL)
    }

    pub fn inv_laplace_with_tol(&self, tol: f64) -> Result<Self> {
        self.check_solvable(tol)?;
        Ok(self.invert_with(|kx, ly| dz_symbol(kx, ly) * dzbar_symbol(kx, ly)))
    }

    /// Drop modes beyond `band`.
    pub fn truncate(&self, band: u32) -> (Self, Truncation) {
        let (mut f, t) = Self::from_map(self.lattice.with_band(band), self.modes.clone());
        f.lattice = self.lattice;
        (f, t)
    }

    /// Values on the uniform `m × m` grid, row-major in `y` then `x`
    /// (index `j * m + i` holds the point `(i Lx/m, j Ly/m)`).
    pub fn grid_values(&self, m: usize) -> Vec<Complex64> {
        let xs: Vec<f64> = (0..m).map(|i| self.lattice.lx * i as f64 / m as f64).collect();
        let ys: Vec<f64> = (0..m).map(|j| self.lattice.ly * j as f64 / m as f64).collect();
        // Group by k so the sum separates into x and y factors.
        let mut by_k: BTreeMap<i32, Vec<(i32, Complex64)>> = BTreeMap::new();
        for (&(k, l), &c) in &self.modes {
            by_k.entry(k).or_default().push((l, c));
        }
        let mut out = vec![Complex64::default(); m * m];
        for (k, row) in &by_k {
            let (kx, _) = self.lattice.wavenumbers(*k, 0);
            let inner: Vec<Complex64> = ys
                .iter()
                .map(|&y| row.iter().map(|&(l, c)| c * Complex64::cis(self.lattice.wavenumbers(0, l).1 * y)).sum())
                .collect();
            for (i, &x) in xs.iter().enumerate() {
                let ex = Complex64::cis(kx * x);
                for (j, v) in inner.iter().enumerate() {
                    out[j * m + i] += ex * v;
                }
            }
        }
        out
    }

    /// Sup-norm of `|f|` over the `m × m` evaluation grid.
    pub fn sup_on_grid(&self, m: usize) -> f64 {
        self.grid_values(m).iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Smallest real part on the `m × m` grid together with where it occurs.
    pub fn min_real_on_grid(&self, m: usize) -> (f64, f64, f64) {
        let vals = self.grid_values(m);
        let (idx, v) = vals
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.re.total_cmp(&b.1.re))
            .map(|(i, v)| (i, v.re))
            .unwrap_or((0, 0.0));
        let (i, j) = (idx % m, idx / m);
        (v, self.lattice.lx * i as f64 / m as f64, self.lattice.ly * j as f64 / m as f64)
    }

    /// Whether every stored mode has `l = 0`.
    pub fn depends_on_x_only(&self) -> bool {
        self.modes.keys().all(|&(_, l)| l == 0)
    }

    /// Whether every stored mode has `k = 0`.
    pub fn depends_on_y_only(&self) -> bool {
        self.modes.keys().all(|&(k, _)| k == 0)
    }

    /// Largest coefficient difference against another field on the same torus.
    pub fn max_coeff_diff(&self, other: &FourierField) -> f64 {
        (self - other).max_abs_coeff()
    }

    pub fn to_json(&self) -> FieldJson {
        FieldJson {
            lattice: self.lattice,
            modes: self.modes.iter().map(|(&(k, l), c)| ModeJson { k, l, re: c.re, im: c.im }).collect(),
            real: None,
        }
    }

    pub fn from_json(json: &FieldJson) -> Result<Self> {
        TorusLattice::new(json.lattice.lx, json.lattice.ly, json.lattice.band_limit)?;
        let field = Self::new(json.lattice, json.modes.iter().map(|m| (m.k, m.l, Complex64::new(m.re, m.im))))?;
        if json.real == Some(true) {
            let check = field.is_real(DEFAULT_SOLVABILITY_TOL * field.max_abs_coeff().max(1.0));
            if !check.is_real {
                return Err(Error::Reality { residue: check.max_asymmetry });
            }
        }
        Ok(field)
    }
}

fn dz_symbol(kx: f64, ly: f64) -> Complex64 {
    Complex64::new(ly, kx) / 2.0
}

fn dzbar_symbol(kx: f64, ly: f64) -> Complex64 {
    Complex64::new(-ly, kx) / 2.0
}

fn combine(a: &FourierField, b: &FourierField, sign: f64) -> FourierField {
    assert!(a.lattice.same_torus(&b.lattice), "fields live on different lattices");
    let mut raw = a.modes.clone();
    for (&kl, &c) in &b.modes {
        *raw.entry(kl).or_default() += c * sign;
    }
    let lattice = a.lattice.with_band(a.lattice.band_limit.max(b.lattice.band_limit));
    FourierField::from_map(lattice, raw).0
}

impl std::ops::Add for &FourierField {
    type Output = FourierField;
    fn add(self, rhs: &FourierField) -> FourierField {
        combine(self, rhs, 1.0)
    }
}

impl std::ops::Sub for &FourierField {
    type Output = FourierField;
    fn sub(self, rhs: &FourierField) -> FourierField {
        combine(self, rhs, -1.0)
    }
}

impl std::ops::Neg for &FourierField {
    type Output = FourierField;
    fn neg(self) -> FourierField {
        self.scale(-1.0)
    }
}

/// One coefficient in the JSON field schema.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeJson {
    pub k: i32,
    pub l: i32,
    pub re: f64,
    pub im: f64,
}

/// JSON field schema: `{"lattice": {...}, "modes": [...], "real": bool?}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldJson {
    pub lattice: TorusLattice,
    pub modes: Vec<ModeJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub real: Option<bool>,
}

impl Serialize for FourierField {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_json().serialize(s)
    }
}

impl<'de> Deserialize<'de> for FourierField {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let json = FieldJson::deserialize(d)?;
        FourierField::from_json(&json).map_err(serde::de::Error::custom)
    }
}

/// A random real field with modes up to `band`, zero mean and largest
/// coefficient magnitude at most one.
pub fn random_real_field<R: Rng + ?Sized>(lattice: TorusLattice, band: u32, rng: &mut R) -> Result<FourierField> {
    let b = band.min(lattice.band_limit) as i32;
    let mut modes = Vec::new();
    for k in 0..=b {
        for l in -b..=b {
            if k == 0 && l <= 0 {
                continue;
            }
            let c = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) / 2f64.sqrt();
            modes.push((k, l, c));
            modes.push((-k, -l, c.conj()));
        }
    }
    FourierField::new(lattice, modes)
}

/// `g = 1 + contrast · f / sup|f|` for a random real `f`; positive whenever
/// `contrast < 1`.
pub fn random_metric<R: Rng + ?Sized>(
    lattice: TorusLattice,
    band: u32,
    contrast: f64,
    rng: &mut R,
) -> Result<FourierField> {
    let f = random_real_field(lattice, band, rng)?;
    let sup = f.sup_on_grid(GRID_SIZE);
    if sup == 0.0 {
        return Ok(FourierField::constant(lattice, 1.0));
    }
    Ok(f.scale(contrast / sup).add_constant(1.0))
}
