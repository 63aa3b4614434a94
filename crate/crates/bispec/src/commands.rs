//! Subcommands of the `bispec` binary. Every command resolves its
//! parameters as flag, then config file, then default, and validates them
//! before doing any work.

use std::path::{Path, PathBuf};

use bispec_core::band::{
    band_of, classical_schedule, fundamental_weights, greedy_expansion, halfband_split,
    marching_pair, Family, GroupType,
};
use bispec_core::bispectrum::{
    cubic_invariant_gap, s1_bispectrum, s1_counterexample, s1_orbit_distance, s1_recover, S1Signal,
};
use bispec_core::c64;
use bispec_core::moments::{moments, MomentBlocks};
use bispec_core::mra::CHUNK_SIZE;
use bispec_core::recovery::{recover_orbit, RecoveryOptions};
use bispec_core::signal::{random_signal, RealStructure, RepSpec};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::binary::{cg_table, write_samples};
use crate::checks::{run_checks, write_csv, CheckParams};
use crate::config::{parse_list, Config};
use crate::error::{CliError, Result};
use crate::json::{
    emit, pair, read, MarchStepJson, MomentsJson, ReportJson, SignalJson, FORMAT_VERSION,
};
use crate::sweep::{rate_sweep, simulate_moments_par, RateSweep, SweepParams};

#[derive(Debug, Parser)]
#[command(
    name = "bispec",
    version,
    about = "Third-moment orbit recovery for band-limited signals"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Band calculus for a dominant weight of a classical group.
    Band(BandArgs),
    /// Recover a random signal from its exact or simulated third moment.
    Recover(RecoverArgs),
    /// Cross-validation suites; CSV summary.
    Check(CheckArgs),
    /// Frequency marching on the circle.
    S1(S1Args),
    /// Error scaling of simulated moments in the number of observations.
    Mra(MraArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StructureArg {
    Cryo,
    Complex,
}

impl StructureArg {
    fn parse(s: &str) -> std::result::Result<Self, String> {
        <Self as ValueEnum>::from_str(s, true)
    }
}

impl std::str::FromStr for StructureArg {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Self::parse(s)
    }
}

impl From<StructureArg> for RealStructure {
    fn from(s: StructureArg) -> Self {
        match s {
            StructureArg::Cryo => RealStructure::CryoReal,
            StructureArg::Complex => RealStructure::GenericComplex,
        }
    }
}

/// Comma-separated list flag value.
#[derive(Debug, Clone, PartialEq)]
pub struct List<T>(pub Vec<T>);

impl<T: std::str::FromStr> std::str::FromStr for List<T>
where
    T::Err: std::fmt::Display,
{
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        parse_list(s).map(List)
    }
}

fn load(path: &Option<PathBuf>, keys: &[&str]) -> Result<Config> {
    Config::load_opt(path.as_deref(), keys)
}

fn arg(msg: impl Into<String>) -> CliError {
    CliError::Argument(msg.into())
}

// ---------------------------------------------------------------- band

#[derive(Debug, Clone, Args)]
pub struct BandArgs {
    /// A, B, C or D.
    #[arg(long)]
    pub family: Option<String>,
    /// Lie rank. Type A of rank r is SU(r+1).
    #[arg(long)]
    pub rank: Option<usize>,
    /// Highest weight in L_i coordinates. Type A accepts r coordinates
    /// (the last of r+1 is taken as 0) or all r+1.
    #[arg(long, allow_hyphen_values = true)]
    pub weight: Option<List<i64>>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

const BAND_KEYS: &[&str] = &["family", "rank", "weight"];

#[derive(Debug, Serialize)]
pub struct NamedWeight {
    pub name: String,
    pub weight: Vec<i64>,
}

#[derive(Debug, Serialize)]
pub struct BandOutput {
    pub format_version: u32,
    pub group: String,
    pub compact_group: String,
    pub weight: Vec<i64>,
    pub admissible: bool,
    pub band: u64,
    /// Greedy coefficients over `band_one`.
    pub expansion: Vec<u64>,
    pub band_one: Vec<NamedWeight>,
    /// `null` for band at most one.
    pub marching_pair: Option<MarchStepJson>,
    pub halfband_split: Option<[Vec<i64>; 2]>,
    pub schedule: Vec<MarchStepJson>,
}

pub fn group_from(family: &str, rank: usize) -> Result<GroupType> {
    let mut chars = family.trim().chars();
    let fam = match (chars.next(), chars.next()) {
        (Some(c), None) => Family::from_letter(c),
        _ => None,
    }
    .ok_or_else(|| arg(format!("unknown family {family:?}, expected A, B, C or D")))?;
    let n = if fam == Family::A { rank + 1 } else { rank };
    Ok(GroupType::new(fam, n)?)
}

pub fn band_output(family: &str, rank: usize, coords: &[i64]) -> Result<BandOutput> {
    let g = group_from(family, rank)?;
    let mut coords = coords.to_vec();
    if g.family() == Family::A && coords.len() + 1 == g.n() {
        coords.push(0);
    }
    let w = g.weight(&coords)?;
    let expansion = greedy_expansion(g, &w)?;
    let band = band_of(g, &w)?;
    let (pair, split) = if band > 1 {
        let (mu, nu) = halfband_split(g, &w)?;
        (
            Some(MarchStepJson::from_step(&marching_pair(g, &w)?)),
            Some([mu.into_coords(), nu.into_coords()]),
        )
    } else {
        (None, None)
    };
    Ok(BandOutput {
        format_version: FORMAT_VERSION,
        group: g.to_string(),
        compact_group: g.compact_name(),
        weight: w.coords().to_vec(),
        admissible: true,
        band,
        expansion,
        band_one: fundamental_weights(g)
            .into_iter()
            .map(|(name, w)| NamedWeight {
                name,
                weight: w.into_coords(),
            })
            .collect(),
        marching_pair: pair,
        halfband_split: split,
        schedule: classical_schedule(g)
            .iter()
            .map(MarchStepJson::from_step)
            .collect(),
    })
}

pub fn cmd_band(a: &BandArgs) -> Result<()> {
    let cfg = load(&a.config, BAND_KEYS)?;
    let family: String = cfg
        .pick_opt(a.family.clone(), "family")?
        .ok_or_else(|| arg("--family is required"))?;
    let rank: usize = cfg
        .pick_opt(a.rank, "rank")?
        .ok_or_else(|| arg("--rank is required"))?;
    let weight: List<i64> = cfg
        .pick_opt(a.weight.clone(), "weight")?
        .ok_or_else(|| arg("--weight is required"))?;
    emit(&band_output(&family, rank, &weight.0)?, a.out.as_deref())
}

// ---------------------------------------------------------------- recover

#[derive(Debug, Clone, Args)]
pub struct RecoverArgs {
    /// Band limit.
    #[arg(long = "L")]
    pub big_l: Option<usize>,
    /// Multiplicity of every band.
    #[arg(long = "R", conflicts_with = "multiplicities")]
    pub big_r: Option<usize>,
    /// Per-band multiplicities R_0,...,R_L.
    #[arg(long)]
    pub multiplicities: Option<List<usize>>,
    #[arg(long)]
    pub structure: Option<StructureArg>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Noise level; requires --N.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Number of simulated observations. Switches to empirical moments.
    #[arg(long = "N")]
    pub big_n: Option<usize>,
    /// Seed of the observation noise and rotations. Defaults to a value
    /// derived from --seed.
    #[arg(long)]
    pub noise_seed: Option<u64>,
    /// Largest accepted rel_error. Defaults to 1e-6 for exact moments and
    /// 0.1 for empirical ones.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Also write the moments used for recovery.
    #[arg(long)]
    pub moments_out: Option<PathBuf>,
    /// Recover from a moments file instead of a generated signal. Band
    /// limit and multiplicities are read from the file; no error against a
    /// ground truth is reported.
    #[arg(long, conflicts_with_all = ["big_l", "big_r", "multiplicities", "sigma", "big_n", "seed", "noise_seed"])]
    pub moments: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

const RECOVER_KEYS: &[&str] = &[
    "L",
    "R",
    "multiplicities",
    "structure",
    "seed",
    "sigma",
    "N",
    "noise_seed",
    "tol",
];

pub const EXACT_TOL: f64 = 1e-6;
pub const EMPIRICAL_TOL: f64 = 0.1;
const NOISE_SEED_OFFSET: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Debug, Clone, PartialEq)]
pub struct RecoverParams {
    pub spec: RepSpec,
    pub structure: RealStructure,
    pub seed: u64,
    /// `(sigma, N, noise_seed)` in empirical mode.
    pub empirical: Option<(f64, usize, u64)>,
    pub tol: f64,
}

impl RecoverParams {
    pub fn resolve(a: &RecoverArgs) -> Result<Self> {
        let cfg = load(&a.config, RECOVER_KEYS)?;
        let big_l: usize = cfg
            .pick_opt(a.big_l, "L")?
            .ok_or_else(|| arg("--L is required"))?;
        if big_l < 1 {
            return Err(arg("--L must be >= 1"));
        }
        let cfg_r: Option<usize> = cfg.get("R")?;
        let cfg_m: Option<List<usize>> = cfg.get("multiplicities")?;
        if a.big_r.is_none() && a.multiplicities.is_none() && cfg_r.is_some() && cfg_m.is_some() {
            return Err(arg("config sets both R and multiplicities"));
        }
        let uniform = a.big_r.or(if a.multiplicities.is_none() {
            cfg_r
        } else {
            None
        });
        let bands: Vec<(usize, usize)> = match (uniform, a.multiplicities.clone().or(cfg_m)) {
            (Some(r), _) => (0..=big_l).map(|l| (l, r)).collect(),
            (None, Some(List(m))) => {
                if m.len() != big_l + 1 {
                    return Err(arg(format!(
                        "--multiplicities needs {} entries (l = 0..={big_l}), got {}",
                        big_l + 1,
                        m.len()
                    )));
                }
                m.into_iter().enumerate().collect()
            }
            (None, None) => return Err(arg("one of --R or --multiplicities is required")),
        };
        if bands.iter().any(|&(_, r)| r == 0) {
            return Err(arg("multiplicities must be >= 1"));
        }
        let spec = RepSpec::new(bands)?;
        let structure: StructureArg = cfg.pick(a.structure, "structure", StructureArg::Cryo)?;
        let seed: u64 = cfg.pick(a.seed, "seed", 0)?;
        let sigma: Option<f64> = cfg.pick_opt(a.sigma, "sigma")?;
        let n: Option<usize> = cfg.pick_opt(a.big_n, "N")?;
        let noise_seed: u64 = cfg.pick(
            a.noise_seed,
            "noise_seed",
            seed.wrapping_add(NOISE_SEED_OFFSET),
        )?;
        let empirical = match (sigma, n) {
            (None, None) => None,
            (_, Some(0)) => return Err(arg("--N must be >= 1")),
            (s, Some(n)) => {
                let s = s.unwrap_or(0.0);
                if !(s.is_finite() && s >= 0.0) {
                    return Err(arg(format!("--sigma must be finite and >= 0, got {s}")));
                }
                Some((s, n, noise_seed))
            }
            (Some(_), None) => return Err(arg("--sigma needs --N")),
        };
        let default_tol = if empirical.is_some() {
            EMPIRICAL_TOL
        } else {
            EXACT_TOL
        };
        let tol: f64 = cfg.pick(a.tol, "tol", default_tol)?;
        if tol.is_nan() || tol < 0.0 {
            return Err(arg(format!("--tol must be >= 0, got {tol}")));
        }
        Ok(RecoverParams {
            spec,
            structure: structure.into(),
            seed,
            empirical,
            tol,
        })
    }
}

#[derive(Debug, Serialize)]
pub struct EmpiricalJson {
    pub sigma: f64,
    #[serde(rename = "N")]
    pub n: usize,
    pub noise_seed: u64,
    /// Largest standard error of the third-moment blocks relative to their norm.
    pub relative_std_error: f64,
    pub warnings: Vec<String>,
}

#[derive(Debug, Serialize)]
pub struct RecoverOutput {
    pub format_version: u32,
    #[serde(rename = "L")]
    pub big_l: usize,
    pub multiplicities: Vec<usize>,
    pub seed: u64,
    pub tol: f64,
    pub empirical: Option<EmpiricalJson>,
    pub truth: SignalJson,
    pub report: ReportJson,
}

/// Runs the pipeline. The output is returned even when `rel_error`
/// exceeds the tolerance; [`cmd_recover`] turns that into an exit code.
pub fn run_recover(p: &RecoverParams) -> Result<(RecoverOutput, MomentsJson)> {
    let f = random_signal(&p.spec, p.structure, p.seed);
    let table = cg_table(p.spec.max_l())?;
    let (m, empirical, opts) = match p.empirical {
        None => (moments(&f, &table)?, None, RecoveryOptions::default()),
        Some((sigma, n, noise_seed)) => {
            let e =
                simulate_moments_par(&f, sigma, n, p.structure, noise_seed, &table, f64::INFINITY)?;
            let info = EmpiricalJson {
                sigma,
                n,
                noise_seed,
                relative_std_error: e.relative_std_error,
                warnings: e.warnings.clone(),
            };
            (e.moments, Some(info), RecoveryOptions::empirical())
        }
    };
    let mut report = recover_orbit(&m.m3, &p.spec, p.structure, &table, &opts)?;
    report.register(&f)?;
    let out = RecoverOutput {
        format_version: FORMAT_VERSION,
        big_l: p.spec.max_l(),
        multiplicities: p.spec.bands().iter().map(|&(_, r)| r).collect(),
        seed: p.seed,
        tol: p.tol,
        empirical,
        truth: SignalJson::from_signal(&f),
        report: ReportJson::from_report(&report),
    };
    Ok((out, MomentsJson::from_moments(&m)))
}

#[derive(Debug, Serialize)]
pub struct MomentsRecoverOutput {
    pub format_version: u32,
    pub moments: String,
    pub report: ReportJson,
}

/// Band layout implied by the second-moment blocks.
pub fn spec_of(m: &MomentBlocks) -> Result<RepSpec> {
    if m.m2.is_empty() {
        return Err(arg("moments file has no second-moment blocks"));
    }
    for (l, g) in &m.m2 {
        if g.nrows() != g.ncols() {
            return Err(arg(format!("second-moment block {l} is not square")));
        }
    }
    Ok(RepSpec::new(
        m.m2.iter().map(|(&l, g)| (l, g.nrows())).collect(),
    )?)
}

pub fn recover_from_moments(path: &Path, structure: RealStructure) -> Result<MomentsRecoverOutput> {
    let doc: MomentsJson = read(path)?;
    let m = doc.to_moments().map_err(|detail| CliError::Format {
        path: path.to_path_buf(),
        detail,
    })?;
    let spec = spec_of(&m)?;
    let table = cg_table(spec.max_l())?;
    let report = recover_orbit(&m.m3, &spec, structure, &table, &RecoveryOptions::default())?;
    Ok(MomentsRecoverOutput {
        format_version: FORMAT_VERSION,
        moments: path.display().to_string(),
        report: ReportJson::from_report(&report),
    })
}

pub fn cmd_recover(a: &RecoverArgs) -> Result<()> {
    if let Some(path) = &a.moments {
        let cfg = load(&a.config, RECOVER_KEYS)?;
        let structure: StructureArg = cfg.pick(a.structure, "structure", StructureArg::Cryo)?;
        return emit(
            &recover_from_moments(path, structure.into())?,
            a.out.as_deref(),
        );
    }
    let p = RecoverParams::resolve(a)?;
    let (out, m) = run_recover(&p)?;
    if let Some(path) = &a.moments_out {
        emit(&m, Some(path))?;
    }
    emit(&out, a.out.as_deref())?;
    let rel_error = out.report.rel_error.unwrap_or(f64::INFINITY);
    if rel_error.is_nan() || rel_error > p.tol {
        return Err(CliError::Tolerance {
            rel_error,
            tol: p.tol,
        });
    }
    Ok(())
}

// ---------------------------------------------------------------- check

#[derive(Debug, Clone, Args)]
pub struct CheckArgs {
    #[arg(long = "L")]
    pub big_l: Option<usize>,
    #[arg(long = "R")]
    pub big_r: Option<usize>,
    #[arg(long)]
    pub seeds: Option<u64>,
    #[arg(long)]
    pub first_seed: Option<u64>,
    #[arg(long)]
    pub structure: Option<StructureArg>,
    /// Degree of the Haar quadrature; defaults to 3L, the smallest exact one.
    #[arg(long)]
    pub quadrature_degree: Option<usize>,
    /// Random rotations per seed for the intertwining and invariance checks.
    #[arg(long)]
    pub rotations: Option<usize>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// CSV destination; stdout by default.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

const CHECK_KEYS: &[&str] = &[
    "L",
    "R",
    "seeds",
    "first_seed",
    "structure",
    "quadrature_degree",
    "rotations",
];

pub fn check_params(a: &CheckArgs) -> Result<CheckParams> {
    let cfg = load(&a.config, CHECK_KEYS)?;
    let d = CheckParams::default();
    let p = CheckParams {
        max_l: cfg.pick(a.big_l, "L", d.max_l)?,
        multiplicity: cfg.pick(a.big_r, "R", d.multiplicity)?,
        seeds: cfg.pick(a.seeds, "seeds", d.seeds)?,
        first_seed: cfg.pick(a.first_seed, "first_seed", d.first_seed)?,
        structure: cfg
            .pick::<StructureArg>(a.structure, "structure", StructureArg::Cryo)?
            .into(),
        quadrature_degree: cfg.pick_opt(a.quadrature_degree, "quadrature_degree")?,
        rotations: cfg.pick(a.rotations, "rotations", d.rotations)?,
    };
    if p.multiplicity == 0 {
        return Err(arg("--R must be >= 1"));
    }
    if p.rotations == 0 {
        return Err(arg("--rotations must be >= 1"));
    }
    Ok(p)
}

pub fn cmd_check(a: &CheckArgs) -> Result<()> {
    let p = check_params(a)?;
    let table = cg_table(p.max_l)?;
    let rows = run_checks(&p, &table)?;
    match &a.out {
        Some(path) => {
            let file = std::fs::File::create(path).map_err(|e| CliError::io(path, e))?;
            write_csv(&rows, file)?;
        }
        None => write_csv(&rows, std::io::stdout().lock())?,
    }
    match rows.iter().find(|r| !r.passed()) {
        Some(r) => Err(CliError::CheckFailed(format!(
            "{}/{} seed {}: {:.3e} > {:.0e}",
            r.suite, r.metric, r.seed, r.value, r.tolerance
        ))),
        None => Ok(()),
    }
}

// ---------------------------------------------------------------- s1

#[derive(Debug, Clone, Args)]
pub struct S1Args {
    #[arg(long)]
    pub band: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Emit the pair with equal invariants of degree at most three.
    #[arg(long)]
    pub counterexample: bool,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

const S1_KEYS: &[&str] = &["band", "seed"];

#[derive(Debug, Serialize)]
pub struct S1Json {
    /// `f_n` for `n = -b..=b`.
    pub coeffs: Vec<[f64; 2]>,
}

impl S1Json {
    fn from_signal(s: &S1Signal) -> Self {
        S1Json {
            coeffs: s.coeffs().iter().map(|&z| pair(z)).collect(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct S1Output {
    pub format_version: u32,
    pub band: usize,
    pub seed: u64,
    pub signal: S1Json,
    pub recovered: S1Json,
    /// Rotation angle aligning the signal with the recovered one.
    pub theta: f64,
    /// `min_θ ‖rotate(f, θ) - h‖ / ‖f‖`.
    pub error: f64,
}

#[derive(Debug, Serialize)]
pub struct CounterexampleOutput {
    pub format_version: u32,
    pub first: S1Json,
    pub second: S1Json,
    /// Largest difference over all invariant monomials of degree <= 3.
    pub invariant_gap: f64,
    pub orbit_distance: f64,
}

pub fn random_s1(band: usize, seed: u64) -> S1Signal {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coeffs = (0..2 * band + 1)
        .map(|_| c64(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    S1Signal::new(coeffs).expect("odd length")
}

pub fn s1_demo(band: usize, seed: u64) -> Result<S1Output> {
    let f = random_s1(band, seed);
    let h = s1_recover(&s1_bispectrum(&f))?;
    let (error, theta) = s1_orbit_distance(&f, &h)?;
    Ok(S1Output {
        format_version: FORMAT_VERSION,
        band,
        seed,
        signal: S1Json::from_signal(&f),
        recovered: S1Json::from_signal(&h),
        theta,
        error,
    })
}

pub fn s1_counterexample_output() -> Result<CounterexampleOutput> {
    let (a, b) = s1_counterexample();
    let (orbit_distance, _) = s1_orbit_distance(&a, &b)?;
    Ok(CounterexampleOutput {
        format_version: FORMAT_VERSION,
        invariant_gap: cubic_invariant_gap(&a, &b),
        first: S1Json::from_signal(&a),
        second: S1Json::from_signal(&b),
        orbit_distance,
    })
}

pub fn cmd_s1(a: &S1Args) -> Result<()> {
    let cfg = load(&a.config, S1_KEYS)?;
    if a.counterexample {
        return emit(&s1_counterexample_output()?, a.out.as_deref());
    }
    let band: usize = cfg
        .pick_opt(a.band, "band")?
        .ok_or_else(|| arg("--band is required"))?;
    let seed: u64 = cfg.pick(a.seed, "seed", 0)?;
    emit(&s1_demo(band, seed)?, a.out.as_deref())
}

// ---------------------------------------------------------------- mra

#[derive(Debug, Clone, Args)]
pub struct MraArgs {
    #[arg(long = "L")]
    pub big_l: Option<usize>,
    #[arg(long = "R")]
    pub big_r: Option<usize>,
    #[arg(long)]
    pub structure: Option<StructureArg>,
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Seed of the signal.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub noise_seed: Option<u64>,
    /// Batch sizes, each a multiple of 10000.
    #[arg(long)]
    pub sizes: Option<List<usize>>,
    /// Total observations; defaults to twice the largest batch size.
    #[arg(long)]
    pub total: Option<usize>,
    /// Also recover from batch moments and report the registered error.
    #[arg(long)]
    pub recover: bool,
    /// Batches recovered per size.
    #[arg(long)]
    pub max_recover: Option<usize>,
    /// Accepted relative deviation of each error ratio from sqrt(N_k/N_{k+1}).
    #[arg(long)]
    pub rate_band: Option<f64>,
    /// Write the first observations (at most 10000) in the binary sample format.
    #[arg(long)]
    pub dump: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

const MRA_KEYS: &[&str] = &[
    "L",
    "R",
    "structure",
    "sigma",
    "seed",
    "noise_seed",
    "sizes",
    "total",
    "recover",
    "max_recover",
    "rate_band",
];

#[derive(Debug, Serialize)]
pub struct MraOutput {
    pub format_version: u32,
    #[serde(rename = "L")]
    pub big_l: usize,
    #[serde(rename = "R")]
    pub big_r: usize,
    pub structure: String,
    pub sigma: f64,
    pub seed: u64,
    pub noise_seed: u64,
    pub sweep: RateSweep,
}

pub fn cmd_mra(a: &MraArgs) -> Result<()> {
    let cfg = load(&a.config, MRA_KEYS)?;
    let big_l: usize = cfg.pick(a.big_l, "L", 2)?;
    let big_r: usize = cfg.pick(a.big_r, "R", 4)?;
    let structure: RealStructure = cfg
        .pick(a.structure, "structure", StructureArg::Cryo)?
        .into();
    let sigma: f64 = cfg.pick(a.sigma, "sigma", 0.3)?;
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(arg(format!("--sigma must be finite and >= 0, got {sigma}")));
    }
    let seed: u64 = cfg.pick(a.seed, "seed", 0)?;
    let noise_seed: u64 = cfg.pick(
        a.noise_seed,
        "noise_seed",
        seed.wrapping_add(NOISE_SEED_OFFSET),
    )?;
    let default_sizes = List((0..4).map(|k| CHUNK_SIZE << (2 * k)).collect());
    let sizes: List<usize> = cfg.pick(a.sizes.clone(), "sizes", default_sizes)?;
    let largest = sizes
        .0
        .iter()
        .copied()
        .max()
        .ok_or_else(|| arg("--sizes is empty"))?;
    let total: usize = cfg.pick(a.total, "total", 2 * largest)?;
    if total < largest {
        return Err(arg(format!(
            "--total {total} is below the largest size {largest}"
        )));
    }
    let recover = a.recover || cfg.get::<bool>("recover")?.unwrap_or(false);
    let max_recover: usize = cfg.pick(a.max_recover, "max_recover", 16)?;
    let rate_band: f64 = cfg.pick(a.rate_band, "rate_band", 0.3)?;
    if big_r == 0 {
        return Err(arg("--R must be >= 1"));
    }
    let spec = RepSpec::uniform(big_l, big_r)?;
    let f = random_signal(&spec, structure, seed);
    let table = cg_table(big_l)?;
    if let Some(path) = &a.dump {
        dump_samples(
            path,
            &f,
            sigma,
            structure,
            noise_seed,
            total.min(CHUNK_SIZE),
        )?;
    }
    let params = SweepParams {
        sigma,
        structure,
        seed: noise_seed,
        ns: sizes.0,
        total,
        recover,
        max_recover,
        rate_band,
    };
    let sweep = rate_sweep(&f, &params, &table)?;
    let out = MraOutput {
        format_version: FORMAT_VERSION,
        big_l,
        big_r,
        structure: structure.name().to_string(),
        sigma,
        seed,
        noise_seed,
        sweep,
    };
    emit(&out, a.out.as_deref())?;
    if !out.sweep.rate_ok {
        return Err(CliError::CheckFailed(format!(
            "error ratios {:?} outside the band",
            out.sweep.ratios
        )));
    }
    if out.sweep.recovery_monotone == Some(false) {
        return Err(CliError::CheckFailed(
            "recovery error does not decrease with N".into(),
        ));
    }
    Ok(())
}

fn dump_samples(
    path: &Path,
    f: &bispec_core::signal::Signal,
    sigma: f64,
    structure: RealStructure,
    seed: u64,
    count: usize,
) -> Result<()> {
    let sampler = bispec_core::mra::MraSampler::new(f, sigma, structure, seed)?;
    write_samples(path, f.spec(), &sampler.chunk(0, count, false))
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Band(a) => cmd_band(a),
        Command::Recover(a) => cmd_recover(a),
        Command::Check(a) => cmd_check(a),
        Command::S1(a) => cmd_s1(a),
        Command::Mra(a) => cmd_mra(a),
    }
}
