//! Parallel MRA simulation. Chunks are generated on the rayon pool and
//! merged in index order, so results match the sequential core routines
//! bit for bit.

use bispec_core::mra::{
    batch_sweep, chunks, EmpiricalMoments, MomentAccumulator, MraSampler, SweepPoint, CHUNK_SIZE,
};
use bispec_core::recovery::RecoveryOptions;
use bispec_core::signal::{RealStructure, Signal};
use bispec_core::su2::CgTable;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{CliError, Result};

pub fn chunk_accumulators_par(
    sampler: &MraSampler,
    n_total: usize,
    table: &CgTable,
) -> Result<Vec<MomentAccumulator>> {
    let layout: Vec<(usize, usize)> = chunks(n_total).collect();
    Ok(layout
        .into_par_iter()
        .map(|(c, count)| sampler.accumulate_chunk(c, count, table))
        .collect::<bispec_core::Result<Vec<_>>>()?)
}

/// Debiased moments of `n` simulated observations.
#[allow(clippy::too_many_arguments)]
pub fn simulate_moments_par(
    f: &Signal,
    sigma: f64,
    n: usize,
    structure: RealStructure,
    seed: u64,
    table: &CgTable,
    max_rel_se: f64,
) -> Result<EmpiricalMoments> {
    if n == 0 {
        return Err(CliError::Argument("--N must be >= 1".into()));
    }
    let sampler = MraSampler::new(f, sigma, structure, seed)?;
    let accs = chunk_accumulators_par(&sampler, n, table)?;
    let mut total = MomentAccumulator::new(f.spec(), table)?;
    for a in &accs {
        total.merge(a);
    }
    Ok(total.finish(sigma, structure, table, max_rel_se)?)
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepPointJson {
    pub n: usize,
    pub batches: usize,
    pub moment_rms: f64,
    pub rel_error_mean: Option<f64>,
    pub recovered_batches: usize,
    pub recovery_failures: usize,
}

impl From<&SweepPoint> for SweepPointJson {
    fn from(p: &SweepPoint) -> Self {
        SweepPointJson {
            n: p.n,
            batches: p.batches,
            moment_rms: p.moment_rms,
            rel_error_mean: p.rel_error_mean,
            recovered_batches: p.recovered_batches,
            recovery_failures: p.recovery_failures,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RateSweep {
    pub total_samples: usize,
    pub points: Vec<SweepPointJson>,
    /// `moment_rms(N_{k+1}) / moment_rms(N_k)`.
    pub ratios: Vec<f64>,
    /// `sqrt(N_k / N_{k+1})`, the ratio under exact `N^{-1/2}` scaling.
    pub expected_ratios: Vec<f64>,
    /// Every ratio within `rate_band` (relative) of the expected one.
    pub rate_ok: bool,
    /// Mean recovery error strictly decreasing, no failed recoveries.
    pub recovery_monotone: Option<bool>,
}

#[derive(Debug, Clone)]
pub struct SweepParams {
    pub sigma: f64,
    pub structure: RealStructure,
    pub seed: u64,
    pub ns: Vec<usize>,
    /// Samples simulated in total; a multiple of the largest `N` gives
    /// that many top-level batches.
    pub total: usize,
    pub recover: bool,
    pub max_recover: usize,
    pub rate_band: f64,
}

pub fn rate_sweep(f: &Signal, p: &SweepParams, table: &CgTable) -> Result<RateSweep> {
    if p.ns.is_empty() || p.ns.iter().any(|&n| n == 0 || n % CHUNK_SIZE != 0) {
        return Err(CliError::Argument(format!(
            "sample sizes must be positive multiples of {CHUNK_SIZE}"
        )));
    }
    let sampler = MraSampler::new(f, p.sigma, p.structure, p.seed)?;
    let accs = chunk_accumulators_par(&sampler, p.total, table)?;
    let opts = RecoveryOptions::empirical();
    let pts = batch_sweep(
        f,
        p.sigma,
        p.structure,
        &accs,
        &p.ns,
        table,
        p.recover.then_some(&opts),
        p.max_recover,
    )?;
    let ratios: Vec<f64> = pts
        .windows(2)
        .map(|w| w[1].moment_rms / w[0].moment_rms)
        .collect();
    let expected: Vec<f64> = pts
        .windows(2)
        .map(|w| (w[0].n as f64 / w[1].n as f64).sqrt())
        .collect();
    let rate_ok = ratios
        .iter()
        .zip(&expected)
        .all(|(r, e)| (r / e - 1.0).abs() <= p.rate_band);
    let recovery_monotone = p.recover.then(|| {
        pts.iter()
            .all(|q| q.recovery_failures == 0 && q.rel_error_mean.is_some())
            && pts
                .windows(2)
                .all(|w| w[1].rel_error_mean < w[0].rel_error_mean)
    });
    Ok(RateSweep {
        total_samples: p.total,
        points: pts.iter().map(SweepPointJson::from).collect(),
        ratios,
        expected_ratios: expected,
        rate_ok,
        recovery_monotone,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use bispec_core::mra::simulate_moments;
    use bispec_core::signal::{random_signal, RepSpec};

    #[test]
    fn parallel_matches_sequential() {
        let spec = RepSpec::uniform(1, 2).unwrap();
        let f = random_signal(&spec, RealStructure::CryoReal, 1);
        let table = CgTable::new(1);
        let n = 2 * CHUNK_SIZE + 17;
        let a = simulate_moments_par(&f, 0.4, n, RealStructure::CryoReal, 5, &table, 1.0).unwrap();
        let b = simulate_moments(&f, 0.4, n, RealStructure::CryoReal, 5, &table, 1.0).unwrap();
        assert_eq!(a.moments, b.moments);
        assert_eq!(a.count, n);
    }

    #[test]
    fn small_sweep_halves() {
        let spec = RepSpec::uniform(1, 3).unwrap();
        let f = random_signal(&spec, RealStructure::CryoReal, 2);
        let p = SweepParams {
            sigma: 0.3,
            structure: RealStructure::CryoReal,
            seed: 1,
            ns: vec![CHUNK_SIZE, 4 * CHUNK_SIZE],
            total: 16 * CHUNK_SIZE,
            recover: false,
            max_recover: 0,
            rate_band: 0.3,
        };
        let s = rate_sweep(&f, &p, &CgTable::new(1)).unwrap();
        assert_eq!(s.points[0].batches, 16);
        assert_eq!(s.points[1].batches, 4);
        assert!(s.rate_ok, "{:?}", s.ratios);
        assert_eq!(s.recovery_monotone, None);
    }

    #[test]
    fn sizes_must_align_with_chunks() {
        let spec = RepSpec::uniform(1, 1).unwrap();
        let f = random_signal(&spec, RealStructure::CryoReal, 2);
        let p = SweepParams {
            sigma: 0.3,
            structure: RealStructure::CryoReal,
            seed: 1,
            ns: vec![123],
            total: CHUNK_SIZE,
            recover: false,
            max_recover: 0,
            rate_band: 0.3,
        };
        assert!(rate_sweep(&f, &p, &CgTable::new(1)).is_err());
    }
}
