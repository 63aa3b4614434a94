//! Cross-validation suites run by `bispec check` and the acceptance tests.

use std::io::Write;

use bispec_core::bispectrum::{bispectrum, bispectrum_block, invert_block, FourierCoeffs};
use bispec_core::linalg::kron;
use bispec_core::moments::{moment1, moment2, moments, recover_m1_m2_from_m3};
use bispec_core::quadrature::{
    build_quadrature, oracle_moment, quadrature_of_degree, schur_orthogonality_error,
    QuadratureRule,
};
use bispec_core::signal::{random_signal, random_signal_with, RealStructure, RepSpec, Signal};
use bispec_core::su2::{coupling_matrix, wigner_big_d, CgTable};
use bispec_core::{CMat, Rotation};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckRow {
    pub suite: &'static str,
    pub seed: u64,
    pub metric: &'static str,
    pub value: f64,
    pub tolerance: f64,
}

impl CheckRow {
    pub fn passed(&self) -> bool {
        self.value <= self.tolerance
    }
}

fn row(
    suite: &'static str,
    seed: u64,
    metric: &'static str,
    value: f64,
    tolerance: f64,
) -> CheckRow {
    CheckRow {
        suite,
        seed,
        metric,
        value,
        tolerance,
    }
}

fn max_block_diff<K: Ord>(
    a: &std::collections::BTreeMap<K, CMat>,
    b: &std::collections::BTreeMap<K, CMat>,
) -> f64 {
    let mut worst = 0.0f64;
    for (k, x) in a {
        worst = match b.get(k) {
            Some(y) if y.shape() == x.shape() => worst.max((x - y).norm()),
            _ => f64::INFINITY,
        };
    }
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    worst
}

/// Largest blockwise Frobenius difference between closed-form and
/// quadrature moments of each order, `[m1, m2, m3]`.
pub fn oracle_errors(f: &Signal, table: &CgTable, rule: &QuadratureRule) -> Result<[f64; 3]> {
    let exact = moments(f, table)?;
    let o1 = oracle_moment(f, 1, rule)?;
    let o2 = oracle_moment(f, 2, rule)?;
    let o3 = oracle_moment(f, 3, rule)?;
    let e1 = exact
        .m1
        .iter()
        .zip(&o1.m1)
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    let e1 = if exact.m1.len() == o1.m1.len() {
        e1
    } else {
        f64::INFINITY
    };
    Ok([
        e1,
        max_block_diff(&exact.m2, &o2.m2),
        max_block_diff(&exact.m3, &o3.m3),
    ])
}

/// Intertwining and unitarity defects of the coupling matrix of `(l1, l2)`
/// at the given rotations.
pub fn coupling_errors(
    l1: usize,
    l2: usize,
    rotations: &[Rotation],
    table: &CgTable,
) -> Result<(f64, f64)> {
    let c = coupling_matrix(l1, l2, table)?;
    let n = c.nrows();
    let unitarity = (c.ad_mul(&c) - CMat::identity(n, n)).norm();
    let mut inter = 0.0f64;
    for g in rotations {
        let left = kron(&wigner_big_d(l1, g), &wigner_big_d(l2, g)) * &c;
        let mut block = CMat::zeros(n, n);
        let mut pos = 0;
        for l3 in l1.abs_diff(l2)..=l1 + l2 {
            let d = wigner_big_d(l3, g);
            block.view_mut((pos, pos), d.shape()).copy_from(&d);
            pos += d.nrows();
        }
        inter = inter.max((left - &c * block).norm());
    }
    Ok((inter, unitarity))
}

pub fn random_rotations(count: usize, seed: u64) -> Vec<Rotation> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| Rotation::random(&mut rng)).collect()
}

/// Fourier coefficients with full-rank square blocks, `l = 0..=max_l`.
pub fn random_fourier(max_l: usize, seed: u64) -> FourierCoeffs {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spec = RepSpec::new((0..=max_l).map(|l| (l, 2 * l + 1)).collect()).expect("valid spec");
    let f = random_signal_with(&spec, RealStructure::GenericComplex, &mut rng);
    FourierCoeffs::new(f.blocks().to_vec()).expect("square blocks")
}

/// Translation-invariance defect of the bispectrum, relative per block.
pub fn bispectrum_invariance(f: &FourierCoeffs, g: &Rotation, table: &CgTable) -> Result<f64> {
    let a = bispectrum(f, table)?;
    let b = bispectrum(&f.translate(g), table)?;
    Ok(a.iter()
        .map(|(k, x)| (x - &b[k]).norm() / x.norm().max(1e-300))
        .fold(0.0, f64::max))
}

/// Largest relative error of the `F_{l3}` recovered from every bispectrum
/// block `(l1, l2)` with `1 <= l1 <= l2`, `l1 + l2 <= L`.
pub fn inversion_error(f: &FourierCoeffs, table: &CgTable) -> Result<f64> {
    let big_l = f.band_limit();
    let mut worst = 0.0f64;
    for l1 in 1..=big_l {
        for l2 in l1..=big_l - l1 {
            let a2 = bispectrum_block(f, l1, l2, table)?;
            let (f1, f2) = (f.get(l1).expect("band"), f.get(l2).expect("band"));
            for (l3, fl) in invert_block(f1, f2, &a2, table)? {
                if let Some(truth) = f.get(l3) {
                    worst = worst.max((&fl - truth).norm() / truth.norm());
                }
            }
        }
    }
    Ok(worst)
}

/// Error of `(m1, m2)` recovered from `m3` against direct computation.
pub fn m1m2_error(f: &Signal, table: &CgTable) -> Result<f64> {
    let m3 = moments(f, table)?.m3;
    let (m1, m2) = recover_m1_m2_from_m3(&m3, f.spec())?;
    let e1 = moment1(f)
        .iter()
        .zip(&m1)
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    Ok(e1.max(max_block_diff(&moment2(f), &m2)))
}

#[derive(Debug, Clone)]
pub struct CheckParams {
    pub max_l: usize,
    pub multiplicity: usize,
    pub seeds: u64,
    pub first_seed: u64,
    pub structure: RealStructure,
    /// Overrides the quadrature degree `3L`.
    pub quadrature_degree: Option<usize>,
    pub rotations: usize,
}

impl Default for CheckParams {
    fn default() -> Self {
        CheckParams {
            max_l: 2,
            multiplicity: 2,
            seeds: 3,
            first_seed: 0,
            structure: RealStructure::CryoReal,
            quadrature_degree: None,
            rotations: 5,
        }
    }
}

pub const ORACLE_TOL: f64 = 1e-9;
pub const INTERTWINING_TOL: f64 = 1e-10;
pub const UNITARITY_TOL: f64 = 1e-12;
pub const SCHUR_TOL: f64 = 1e-11;
pub const INVARIANCE_TOL: f64 = 1e-10;
pub const INVERSION_TOL: f64 = 1e-9;
pub const M1M2_TOL: f64 = 1e-9;

fn seed_rows(
    p: &CheckParams,
    seed: u64,
    table: &CgTable,
    rule: &QuadratureRule,
) -> Result<Vec<CheckRow>> {
    let spec = RepSpec::uniform(p.max_l, p.multiplicity)?;
    let f = random_signal(&spec, p.structure, seed);
    let [e1, e2, e3] = oracle_errors(&f, table, rule)?;
    let mut out = vec![
        row("oracle", seed, "m1", e1, ORACLE_TOL),
        row("oracle", seed, "m2", e2, ORACLE_TOL),
        row("oracle", seed, "m3", e3, ORACLE_TOL),
    ];
    let rotations = random_rotations(p.rotations, seed);
    let (mut inter, mut unit) = (0.0f64, 0.0f64);
    for l1 in 0..=p.max_l {
        for l2 in 0..=p.max_l {
            let (i, u) = coupling_errors(l1, l2, &rotations, table)?;
            inter = inter.max(i);
            unit = unit.max(u);
        }
    }
    out.push(row("cg", seed, "intertwining", inter, INTERTWINING_TOL));
    out.push(row("cg", seed, "unitarity", unit, UNITARITY_TOL));
    let fc = random_fourier(p.max_l, seed);
    let inv = rotations
        .iter()
        .map(|g| bispectrum_invariance(&fc, g, table))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    out.push(row(
        "bispectrum",
        seed,
        "translation_invariance",
        inv,
        INVARIANCE_TOL,
    ));
    out.push(row(
        "bispectrum",
        seed,
        "block_inversion",
        inversion_error(&fc, table)?,
        INVERSION_TOL,
    ));
    out.push(row(
        "m3_to_m1m2",
        seed,
        "round_trip",
        m1m2_error(&f, table)?,
        M1M2_TOL,
    ));
    Ok(out)
}

/// All suites over `p.seeds` consecutive seeds; seeds run in parallel and
/// rows come back in seed order.
pub fn run_checks(p: &CheckParams, table: &CgTable) -> Result<Vec<CheckRow>> {
    if p.seeds == 0 {
        return Err(CliError::Argument("--seeds must be >= 1".into()));
    }
    let rule = match p.quadrature_degree {
        Some(q) => quadrature_of_degree(q),
        None => build_quadrature(p.max_l, 3)?,
    };
    let schur = schur_orthogonality_error(p.max_l, &rule)?;
    let per_seed: Vec<Vec<CheckRow>> = (p.first_seed..p.first_seed + p.seeds)
        .into_par_iter()
        .map(|s| seed_rows(p, s, table, &rule))
        .collect::<Result<_>>()?;
    let mut rows = vec![row(
        "quadrature",
        p.first_seed,
        "schur_orthogonality",
        schur,
        SCHUR_TOL,
    )];
    rows.extend(per_seed.into_iter().flatten());
    Ok(rows)
}

pub fn write_csv<W: Write>(rows: &[CheckRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| CliError::Argument(format!("csv: {e}"));
    w.write_record(["suite", "seed", "metric", "value", "tolerance", "status"])
        .map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.suite.to_string(),
            r.seed.to_string(),
            r.metric.to_string(),
            format!("{:.3e}", r.value),
            format!("{:.0e}", r.tolerance),
            if r.passed() { "PASS" } else { "FAIL" }.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| CliError::io("<csv>", e))
}
