//! Command-line front end: JSON configs in, JSON/CSV reports out.
//!
//! Exit codes: 0 success, 1 usage or input error, 2 obstruction, 3 reality
//! failure, 4 integration failure.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{de::DeserializeOwned, Deserialize, Serialize};
use serde_json::{json, Value};

use crate::cascade::{build_liouville, run_cascade, CascadeOptions};
use crate::error::{Error, Result};
use crate::flow::{conservation_report, integrate, Controls, Observable, PhaseState, SystemSpec};
use crate::fourier::{random_metric, FieldJson, FourierField, TorusLattice};
use crate::magnetic::{build_preset, multi_level_test, Preset, PresetParams};
use crate::momentum::{MomentumPolynomial, PolynomialJson};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_OBSTRUCTION: i32 = 2;
pub const EXIT_REALITY: i32 = 3;
pub const EXIT_INTEGRATION: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "geoflow", version, about = "Polynomial integrals of geodesic and magnetic flows on the torus")]
pub struct Cli {
    /// JSON configuration for the subcommand; defaults are used when absent.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Seed for random metrics and initial states.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Relative tolerance of the integrator.
    #[arg(long, global = true)]
    pub rtol: Option<f64>,
    /// Absolute tolerance of the integrator.
    #[arg(long, global = true)]
    pub atol: Option<f64>,
    /// Lattice band limit for generated fields.
    #[arg(long, global = true)]
    pub band: Option<u32>,
    /// Integration time.
    #[arg(long = "T", global = true)]
    pub duration: Option<f64>,
    /// Number of uniform sample intervals on the trajectory.
    #[arg(long, global = true)]
    pub samples: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Run the coefficient cascade for a metric.
    Cascade,
    /// Integrate a flow and report conservation drift.
    Simulate,
    /// Sweep constants or metric families.
    Scan,
    /// Build a Liouville metric and check its quadratic integral.
    Liouville,
    /// Build a magnetic preset and run the multi-level test.
    Magnetic,
}

/// Parse arguments and run; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
        }
    };
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Obstruction { .. } | Error::Unsolvable { .. } => EXIT_OBSTRUCTION,
        Error::Reality { .. } | Error::Inconsistent(_) => EXIT_REALITY,
        Error::Integration { .. } => EXIT_INTEGRATION,
        _ => EXIT_USAGE,
    }
}

pub fn run(cli: &Cli) -> Result<i32> {
    for (name, v) in [("rtol", cli.rtol), ("atol", cli.atol), ("T", cli.duration)] {
        if let Some(v) = v {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Input(format!("--{name} must be positive, got {v}")));
            }
        }
    }
    fs::create_dir_all(&cli.out)?;
    match cli.command {
        Command::Cascade => cmd_cascade(cli, &load(cli)?),
        Command::Simulate => cmd_simulate(cli, &load(cli)?),
        Command::Scan => cmd_scan(cli, &load(cli)?),
        Command::Liouville => cmd_liouville(cli, &load(cli)?),
        Command::Magnetic => cmd_magnetic(cli, &load(cli)?),
    }
}

fn load<T: DeserializeOwned + Default>(cli: &Cli) -> Result<T> {
    match &cli.config {
        Some(path) => Ok(serde_json::from_str(&fs::read_to_string(path)?)?),
        None => Ok(T::default()),
    }
}

fn write_json(dir: &Path, name: &str, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(dir.join(name), text)?;
    Ok(())
}

fn controls(cli: &Cli) -> Controls {
    let mut c = Controls::default();
    if let Some(r) = cli.rtol {
        c.rtol = r;
    }
    if let Some(a) = cli.atol {
        c.atol = a;
    }
    if let Some(s) = cli.samples {
        c.samples = s;
    }
    c
}

fn lattice(cli: &Cli) -> TorusLattice {
    TorusLattice::square(cli.band.unwrap_or(16))
}

fn pair(c: Complex64) -> [f64; 2] {
    [c.re, c.im]
}

/// How a metric is specified in configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MetricSpec {
    Field {
        field: FieldJson,
    },
    /// `g = v(x) + w(y)`.
    Liouville {
        v: FieldJson,
        w: FieldJson,
    },
    /// `1 + contrast · f` for a random band-limited `f` drawn from the seed.
    Random {
        band: u32,
        contrast: f64,
    },
    /// `mean + amp · cos(kx + ly)`.
    Cosine {
        k: i32,
        l: i32,
        amp: f64,
        mean: f64,
    },
}

impl Default for MetricSpec {
    fn default() -> Self {
        MetricSpec::Random { band: 2, contrast: 0.5 }
    }
}

impl MetricSpec {
    pub fn build(&self, lattice: TorusLattice, rng: &mut ChaCha8Rng) -> Result<FourierField> {
        match self {
            MetricSpec::Field { field } => FourierField::from_json(field),
            MetricSpec::Liouville { v, w } => {
                Ok(build_liouville(&FourierField::from_json(v)?, &FourierField::from_json(w)?)?.g)
            }
            MetricSpec::Random { band, contrast } => random_metric(lattice, *band, *contrast, rng),
            MetricSpec::Cosine { k, l, amp, mean } => {
                Ok(FourierField::cosine(lattice, *k, *l, *amp)?.add_constant(*mean))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CascadeConfig {
    pub metric: MetricSpec,
    pub k: usize,
    #[serde(rename = "E")]
    pub energy: f64,
    pub a_k: [f64; 2],
    /// Additive constants keyed by coefficient index.
    pub constants: BTreeMap<usize, [f64; 2]>,
    pub band_cap: Option<u32>,
    pub obstruction_tol: f64,
    pub closing_tol: f64,
}

impl Default for CascadeConfig {
    fn default() -> Self {
        let o = CascadeOptions::default();
        Self {
            metric: MetricSpec::default(),
            k: 3,
            energy: 1.0,
            a_k: [1.0, 0.0],
            constants: BTreeMap::new(),
            band_cap: None,
            obstruction_tol: o.obstruction_tol,
            closing_tol: o.closing_tol,
        }
    }
}

impl CascadeConfig {
    fn options(&self) -> CascadeOptions {
        CascadeOptions {
            obstruction_tol: self.obstruction_tol,
            closing_tol: self.closing_tol,
            constants: self.constants.iter().map(|(&n, c)| (n, Complex64::new(c[0], c[1]))).collect(),
            band_cap: self.band_cap,
        }
    }
}

fn cmd_cascade(cli: &Cli, cfg: &CascadeConfig) -> Result<i32> {
    let mut rng = ChaCha8Rng::seed_from_u64(cli.seed);
    let g = cfg.metric.build(lattice(cli), &mut rng)?;
    let a_k = Complex64::new(cfg.a_k[0], cfg.a_k[1]);
    let report = run_cascade(&g, cfg.k, cfg.energy, a_k, &cfg.options())?;
    let mut json = report.to_json();
    json["seed"] = json!(cli.seed);
    write_json(&cli.out, "report.json", &json)?;
    write_json(&cli.out, "metric.json", &g.to_json())?;
    for (n, a) in &report.coefficients {
        write_json(&cli.out, &format!("a_{n}.json"), &a.to_json())?;
    }
    println!("{}", serde_json::to_string(&json["verdict"])?);
    Ok(report.verdict.exit_code())
}

/// An observable named in a config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ObservableSpec {
    Px,
    Py,
    /// A momentum polynomial evaluated at a fixed energy.
    Polynomial {
        name: String,
        polynomial: PolynomialJson,
        #[serde(rename = "E")]
        energy: f64,
    },
    /// The observable that comes with the preset.
    Preset,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulateConfig {
    pub metric: MetricSpec,
    /// Magnetic field as an explicit field; absent means the geodesic flow.
    pub field: Option<FieldJson>,
    pub preset: Option<Preset>,
    pub params: PresetParams,
    pub observables: Vec<ObservableSpec>,
    /// `[x, y, px, py]`; when absent, states are placed on the energy levels.
    pub initial: Option<[f64; 4]>,
    pub position: [f64; 2],
    pub angle: f64,
    pub energies: Vec<f64>,
    #[serde(rename = "T")]
    pub duration: f64,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            metric: MetricSpec::Cosine { k: 0, l: 0, amp: 1.0, mean: 0.0 },
            field: None,
            preset: None,
            params: PresetParams::default(),
            observables: vec![ObservableSpec::Px],
            initial: None,
            position: [0.0, 0.0],
            angle: 0.7,
            energies: vec![0.5],
            duration: 10.0,
        }
    }
}

fn observables(specs: &[ObservableSpec], preset: Option<&Observable>) -> Result<Vec<Observable>> {
    specs
        .iter()
        .map(|s| match s {
            ObservableSpec::Px => Ok(Observable::momentum_x()),
            ObservableSpec::Py => Ok(Observable::new("py", |s: &PhaseState| s.py)),
            ObservableSpec::Polynomial { name, polynomial, energy } => {
                Ok(Observable::polynomial(name.clone(), MomentumPolynomial::from_json(polynomial)?, *energy))
            }
            ObservableSpec::Preset => {
                preset.cloned().ok_or_else(|| Error::Input("the preset observable needs a preset".into()))
            }
        })
        .collect()
}

fn cmd_simulate(cli: &Cli, cfg: &SimulateConfig) -> Result<i32> {
    let mut rng = ChaCha8Rng::seed_from_u64(cli.seed);
    let (spec, preset_obs, preset_energy) = match cfg.preset {
        Some(p) => {
            let built = build_preset(p, &cfg.params)?;
            (built.spec, Some(built.observable), Some(built.energy))
        }
        None => {
            let g = cfg.metric.build(lattice(cli), &mut rng)?;
            let b = cfg.field.as_ref().map(FourierField::from_json).transpose()?;
            (SystemSpec::new(g, b)?, None, None)
        }
    };
    let obs = observables(&cfg.observables, preset_obs.as_ref())?;
    let duration = cli.duration.unwrap_or(cfg.duration);
    let c = controls(cli);
    let energies = if cfg.energies.is_empty() { vec![preset_energy.unwrap_or(0.5)] } else { cfg.energies.clone() };

    let s0 = match cfg.initial {
        Some([x, y, px, py]) => PhaseState::new(x, y, px, py),
        None => spec.state_on_level(cfg.position[0], cfg.position[1], cfg.angle, energies[0]),
    };
    let traj = integrate(&spec, s0, duration, &c, &obs)?;
    fs::write(cli.out.join("trajectory.csv"), traj.to_csv())?;
    let mut report = json!({
        "seed": cli.seed,
        "T": duration,
        "rtol": c.rtol,
        "atol": c.atol,
        "initial": s0,
        "drift": conservation_report(&traj),
    });
    if energies.len() >= 2 {
        let mut levels = BTreeMap::new();
        for o in &obs {
            levels.insert(o.name().to_string(), multi_level_test(&spec, o, &energies, duration, &c, cli.seed)?);
        }
        report["levels"] = serde_json::to_value(levels)?;
    }
    write_json(&cli.out, "drift.json", &report)?;
    Ok(EXIT_OK)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ScanConfig {
    /// Sweep the constant `c_n` and record the obstructions below `n`.
    Constants {
        metric: MetricSpec,
        k: usize,
        #[serde(rename = "E")]
        energy: f64,
        n: usize,
        values: Vec<[f64; 2]>,
    },
    /// `g = (1.25 + cos x) + (1.25 + a cos y)` for each amplitude `a`.
    LiouvilleAmplitude {
        amplitudes: Vec<f64>,
        #[serde(rename = "E")]
        energy: f64,
    },
    /// `g = 2 + 0.3 cos x + 0.3 cos y + ε sin x sin y`: k = 2 reality residual versus ε.
    MixedDerivative {
        magnitudes: Vec<f64>,
        #[serde(rename = "E")]
        energy: f64,
    },
}

impl Default for ScanConfig {
    fn default() -> Self {
        ScanConfig::MixedDerivative { magnitudes: vec![0.0, 0.05, 0.1, 0.2, 0.4], energy: 1.0 }
    }
}

fn cmd_scan(cli: &Cli, cfg: &ScanConfig) -> Result<i32> {
    let lat = lattice(cli);
    let one = Complex64::new(1.0, 0.0);
    let rows: Vec<Value> = match cfg {
        ScanConfig::Constants { metric, k, energy, n, values } => {
            let g = metric.build(lat, &mut ChaCha8Rng::seed_from_u64(cli.seed))?;
            values
                .par_iter()
                .map(|c| {
                    let opts = CascadeOptions::default().with_constant(*n, Complex64::new(c[0], c[1]));
                    let r = run_cascade(&g, *k, *energy, one, &opts)?;
                    let obs: BTreeMap<String, [f64; 2]> = r
                        .obstructions
                        .iter()
                        .filter(|(&m, _)| m < *n)
                        .map(|(m, o)| (m.to_string(), pair(o.value)))
                        .collect();
                    Ok(json!({ "c": c, "obstructions": obs, "verdict": r.verdict }))
                })
                .collect::<Result<_>>()?
        }
        ScanConfig::LiouvilleAmplitude { amplitudes, energy } => amplitudes
            .par_iter()
            .map(|&a| {
                let v = FourierField::cosine(lat, 1, 0, 1.0)?.add_constant(1.25);
                let w = FourierField::cosine(lat, 0, 1, a)?.add_constant(1.25);
                let sys = build_liouville(&v, &w)?;
                let r = run_cascade(&sys.g, 2, *energy, one, &CascadeOptions::default())?;
                Ok(json!({ "amplitude": a, "verdict": r.verdict, "exit": r.verdict.exit_code() }))
            })
            .collect::<Result<_>>()?,
        ScanConfig::MixedDerivative { magnitudes, energy } => magnitudes
            .par_iter()
            .map(|&eps| {
                let g = &(&FourierField::cosine(lat, 1, 0, 0.3)? + &FourierField::cosine(lat, 0, 1, 0.3)?)
                    .add_constant(2.0)
                    + &mixed(lat, eps)?;
                let r = run_cascade(&g, 2, *energy, one, &CascadeOptions::default())?;
                let norms = r.closing_norms;
                Ok(json!({
                    "epsilon": eps,
                    "residual": norms.map(|n| n.grid_sup),
                    "verdict": r.verdict,
                }))
            })
            .collect::<Result<_>>()?,
    };
    write_json(&cli.out, "scan.json", &json!({ "seed": cli.seed, "config": cfg, "rows": rows }))?;
    Ok(EXIT_OK)
}

/// `ε sin x sin y = (ε/2)(cos(x − y) − cos(x + y))`.
pub fn mixed(lattice: TorusLattice, eps: f64) -> Result<FourierField> {
    Ok(&FourierField::cosine(lattice, 1, -1, eps / 2.0)? - &FourierField::cosine(lattice, 1, 1, eps / 2.0)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LiouvilleConfig {
    pub v: Option<FieldJson>,
    pub w: Option<FieldJson>,
    #[serde(rename = "E")]
    pub energy: f64,
    /// Level for the homogenized integral.
    pub second_energy: f64,
    #[serde(rename = "T")]
    pub duration: f64,
    pub position: [f64; 2],
    pub angle: f64,
}

impl Default for LiouvilleConfig {
    fn default() -> Self {
        Self { v: None, w: None, energy: 1.0, second_energy: 2.5, duration: 100.0, position: [0.3, 1.1], angle: 0.9 }
    }
}

fn cmd_liouville(cli: &Cli, cfg: &LiouvilleConfig) -> Result<i32> {
    let lat = lattice(cli);
    let v = match &cfg.v {
        Some(f) => FourierField::from_json(f)?,
        None => FourierField::cosine(lat, 1, 0, 1.0)?.add_constant(1.25),
    };
    let w = match &cfg.w {
        Some(f) => FourierField::from_json(f)?,
        None => FourierField::cosine(lat, 0, 1, 1.0)?.add_constant(1.25),
    };
    let sys = build_liouville(&v, &w)?;
    let report = run_cascade(&sys.g, 2, cfg.energy, Complex64::new(1.0, 0.0), &CascadeOptions::default())?;
    let closed = sys.f2.coeff_at(0, cfg.energy);
    let a0_error = report.coefficients[&0].max_coeff_diff(&closed.zero_mean());

    let spec = SystemSpec::geodesic(sys.g.clone())?;
    let duration = cli.duration.unwrap_or(cfg.duration);
    let c = controls(cli);
    let f2 = Observable::polynomial("F2", sys.f2.clone(), cfg.energy);
    let s0 = spec.state_on_level(cfg.position[0], cfg.position[1], cfg.angle, cfg.energy);
    let traj = integrate(&spec, s0, duration, &c, &[f2])?;
    fs::write(cli.out.join("trajectory.csv"), traj.to_csv())?;

    let hom = Observable::homogeneous("F2h", sys.homogeneous()?);
    let s1 = spec.state_on_level(cfg.position[0], cfg.position[1], cfg.angle, cfg.second_energy);
    let traj2 = integrate(&spec, s1, duration, &c, &[hom])?;

    let out = json!({
        "seed": cli.seed,
        "E": cfg.energy,
        "second_energy": cfg.second_energy,
        "T": duration,
        "cascade": report.to_json(),
        "a0_error": a0_error,
        "drift_F2": traj.drift("F2"),
        "drift_F2_homogenized": traj2.drift("F2h"),
    });
    write_json(&cli.out, "liouville.json", &out)?;
    Ok(report.verdict.exit_code())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MagneticConfig {
    pub preset: Preset,
    pub params: PresetParams,
    /// Levels for the multi-level test; defaults to `[E, 2E]`.
    pub energies: Option<Vec<f64>>,
    #[serde(rename = "T")]
    pub duration: f64,
}

impl Default for MagneticConfig {
    fn default() -> Self {
        Self { preset: Preset::DgrwTrig, params: PresetParams::default(), energies: None, duration: 50.0 }
    }
}

fn cmd_magnetic(cli: &Cli, cfg: &MagneticConfig) -> Result<i32> {
    let built = build_preset(cfg.preset, &cfg.params)?;
    let duration = cli.duration.unwrap_or(cfg.duration);
    let c = controls(cli);
    let energies = cfg.energies.clone().unwrap_or_else(|| vec![built.energy, 2.0 * built.energy]);
    let table = multi_level_test(&built.spec, &built.observable, &energies, duration, &c, cli.seed)?;
    let s0 = built.spec.state_on_level(0.4, 1.3, 0.8, built.energy);
    let traj = integrate(&built.spec, s0, duration, &c, std::slice::from_ref(&built.observable))?;
    fs::write(cli.out.join("trajectory.csv"), traj.to_csv())?;
    let audit = built.audit.as_ref().map(|a| {
        json!({
            "residuals": a.residuals,
            "a0_obstruction": pair(a.a0_obstruction),
            "a0_imaginary": a.a0_imaginary,
        })
    });
    let ratio = (table.levels.len() >= 2).then(|| table.ratio(1, 0));
    let out = json!({
        "seed": cli.seed,
        "preset": cfg.preset,
        "E_design": built.energy,
        "T": duration,
        "audit": audit,
        "levels": table,
        "ratio": ratio,
        "single_level": table.single_level(1e3),
        "polynomial": built.polynomial.map(|p| p.to_json()),
    });
    write_json(&cli.out, "magnetic.json", &out)?;
    Ok(EXIT_OK)
}
