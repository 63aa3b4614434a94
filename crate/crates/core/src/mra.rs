//! Multi-reference alignment: noisy randomly rotated copies of a signal and
//! debiased empirical moments.
//!
//! Sample `i` lives in chunk `i / CHUNK_SIZE`; each chunk draws from its own
//! ChaCha stream of the user seed, so any prefix of the sample sequence is
//! reproducible and chunks can be generated in any order.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::DMatrix;
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::moments::{expected_triples, moments, MomentBlocks, Projector, Triple};
use crate::recovery::{recover_orbit, RecoveryOptions};
use crate::rotation::Rotation;
use crate::signal::{RealStructure, RepSpec, Signal};
use crate::su2::{real_basis, wigner_big_d_all, CgTable};
use crate::{c64, CMat, C64};

pub const CHUNK_SIZE: usize = 10_000;

/// One observation `y = g·f + ε`. The hidden rotation and noise are kept
/// only when the sampler runs in debug mode.
#[derive(Debug, Clone)]
pub struct MraSample {
    pub y: Signal,
    pub rotation: Option<Rotation>,
    pub noise: Option<Signal>,
}

fn chunk_rng(seed: u64, chunk: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk as u64);
    rng
}

/// Generator of observations of a fixed signal.
#[derive(Debug, Clone)]
pub struct MraSampler {
    f: Signal,
    sigma: f64,
    structure: RealStructure,
    seed: u64,
    // noise map from real coordinates, cryo only
    lift: Vec<CMat>,
}

impl MraSampler {
    pub fn new(f: &Signal, sigma: f64, structure: RealStructure, seed: u64) -> Result<Self> {
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(Error::Parameter(format!(
                "noise level {sigma} must be finite and >= 0"
            )));
        }
        let lift = f
            .iter()
            .map(|(l, _)| {
                let u = real_basis(l);
                if l % 2 == 1 {
                    u * c64(0.0, 1.0)
                } else {
                    u
                }
            })
            .collect();
        Ok(MraSampler {
            f: f.clone(),
            sigma,
            structure,
            seed,
            lift,
        })
    }

    pub fn signal(&self) -> &Signal {
        &self.f
    }

    fn draw<R: Rng>(
        &self,
        rng: &mut R,
        y: &mut Signal,
        keep_noise: bool,
    ) -> (Rotation, Option<Signal>) {
        let g = Rotation::random(rng);
        let ds = wigner_big_d_all(self.f.spec().max_l(), &g);
        let mut noise = keep_noise.then(|| Signal::zeros(self.f.spec().clone()));
        let bands: Vec<usize> = self.f.spec().bands().iter().map(|&(l, _)| l).collect();
        for (k, &l) in bands.iter().enumerate() {
            let a = self.f.block(l).expect("band present");
            let (n, r) = a.shape();
            let eta = match self.structure {
                RealStructure::CryoReal => {
                    let e = CMat::from_fn(n, r, |_, _| {
                        let x: f64 = rng.sample(StandardNormal);
                        c64(self.sigma * x, 0.0)
                    });
                    &self.lift[k] * e
                }
                RealStructure::GenericComplex => CMat::from_fn(n, r, |_, _| {
                    let x: f64 = rng.sample(StandardNormal);
                    let z: f64 = rng.sample(StandardNormal);
                    c64(self.sigma * x, self.sigma * z)
                }),
            };
            let out = y.block_mut(l).expect("band present");
            *out = &ds[l] * a + &eta;
            if let Some(nz) = noise.as_mut() {
                *nz.block_mut(l).expect("band present") = eta;
            }
        }
        (g, noise)
    }

    /// Visits the first `count` samples of `chunk`.
    fn run_chunk(
        &self,
        chunk: usize,
        count: usize,
        mut visit: impl FnMut(&Signal, Rotation, Option<Signal>),
        debug: bool,
    ) {
        let mut rng = chunk_rng(self.seed, chunk);
        let mut y = Signal::zeros(self.f.spec().clone());
        for _ in 0..count {
            let (g, noise) = self.draw(&mut rng, &mut y, debug);
            visit(&y, g, noise);
        }
    }

    /// The first `count` samples of `chunk` (`count ≤ CHUNK_SIZE`).
    pub fn chunk(&self, chunk: usize, count: usize, debug: bool) -> Vec<MraSample> {
        let mut out = Vec::with_capacity(count.min(CHUNK_SIZE));
        self.run_chunk(
            chunk,
            count.min(CHUNK_SIZE),
            |y, g, noise| {
                out.push(MraSample {
                    y: y.clone(),
                    rotation: debug.then_some(g),
                    noise,
                })
            },
            debug,
        );
        out
    }

    /// Moment accumulator over the first `count` samples of `chunk`.
    pub fn accumulate_chunk(
        &self,
        chunk: usize,
        count: usize,
        table: &CgTable,
    ) -> Result<MomentAccumulator> {
        let mut acc = MomentAccumulator::new(self.f.spec(), table)?;
        self.run_chunk(chunk, count.min(CHUNK_SIZE), |y, _, _| acc.add(y), false);
        Ok(acc)
    }

    /// Iterator over samples `0..n`.
    pub fn stream(&self, n: usize, debug: bool) -> MraStream<'_> {
        MraStream {
            sampler: self,
            n,
            next: 0,
            rng: chunk_rng(self.seed, 0),
            debug,
        }
    }
}

/// Lazy sample stream; see [`MraSampler::stream`].
pub struct MraStream<'a> {
    sampler: &'a MraSampler,
    n: usize,
    next: usize,
    rng: ChaCha8Rng,
    debug: bool,
}

impl Iterator for MraStream<'_> {
    type Item = MraSample;

    fn next(&mut self) -> Option<MraSample> {
        if self.next >= self.n {
            return None;
        }
        if self.next > 0 && self.next.is_multiple_of(CHUNK_SIZE) {
            self.rng = chunk_rng(self.sampler.seed, self.next / CHUNK_SIZE);
        }
        self.next += 1;
        let mut y = Signal::zeros(self.sampler.f.spec().clone());
        let (g, noise) = self.sampler.draw(&mut self.rng, &mut y, self.debug);
        Some(MraSample {
            y,
            rotation: self.debug.then_some(g),
            noise,
        })
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = self.n - self.next;
        (left, Some(left))
    }
}

/// `N` observations of `f` with noise level `sigma`.
pub fn sample_mra(
    f: &Signal,
    sigma: f64,
    n: usize,
    structure: RealStructure,
    seed: u64,
) -> Result<Vec<MraSample>> {
    if n == 0 {
        return Err(Error::Parameter("sample count must be >= 1".into()));
    }
    let sampler = MraSampler::new(f, sigma, structure, seed)?;
    Ok(sampler.stream(n, false).collect())
}

/// Running sums of the raw moment contractions. Only triples with
/// `l1 <= l2` are accumulated; the others follow from the exchange symmetry
/// of the coupling coefficients.
#[derive(Debug, Clone)]
pub struct MomentAccumulator {
    spec: RepSpec,
    count: usize,
    sum1: Vec<C64>,
    sum2: Vec<CMat>,
    projectors: Vec<Projector>,
    // row-major (r3, (r1, r2)) sums per projector
    sum3: Vec<Vec<C64>>,
    // per entry: Σ |contribution|², for standard errors
    sq3: Vec<Vec<f64>>,
    // band slots of (l1, l2, l3) per projector
    slots: Vec<[usize; 3]>,
    // current sample, row-major, split into real and imaginary parts
    rows: Vec<(Vec<f64>, Vec<f64>)>,
    work: [Vec<f64>; 4],
}

impl MomentAccumulator {
    pub fn new(spec: &RepSpec, table: &CgTable) -> Result<Self> {
        if spec.max_l() > table.max_l() {
            return Err(Error::Parameter(format!(
                "coupling table covers l <= {}, signal needs {}",
                table.max_l(),
                spec.max_l()
            )));
        }
        let projectors: Vec<Projector> = expected_triples(spec)
            .into_iter()
            .filter(|&(l1, l2, _)| l1 <= l2)
            .map(|(l1, l2, l3)| Projector::new(l1, l2, l3, table).expect("admissible triple"))
            .collect();
        let sizes: Vec<usize> = projectors
            .iter()
            .map(|p| spec.multiplicity(p.l3) * spec.multiplicity(p.l1) * spec.multiplicity(p.l2))
            .collect();
        Ok(MomentAccumulator {
            spec: spec.clone(),
            count: 0,
            sum1: alloc::vec![c64(0.0, 0.0); spec.multiplicity(0)],
            sum2: spec
                .bands()
                .iter()
                .map(|&(_, r)| CMat::zeros(r, r))
                .collect(),
            sum3: sizes
                .iter()
                .map(|&n| alloc::vec![c64(0.0, 0.0); n])
                .collect(),
            sq3: sizes.iter().map(|&n| alloc::vec![0.0; n]).collect(),
            slots: projectors
                .iter()
                .map(|p| [p.l1, p.l2, p.l3].map(|l| spec.position(l).expect("band")))
                .collect(),
            rows: alloc::vec![(Vec::new(), Vec::new()); spec.bands().len()],
            work: Default::default(),
            projectors,
        })
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn add(&mut self, y: &Signal) {
        debug_assert_eq!(y.spec(), &self.spec);
        self.count += 1;
        if let Some(a0) = y.block(0) {
            for (s, z) in self.sum1.iter_mut().zip(a0.row(0).iter()) {
                *s += *z;
            }
        }
        for (s, (_, a)) in self.sum2.iter_mut().zip(y.iter()) {
            *s += a.ad_mul(a);
        }
        let Self {
            rows,
            work,
            projectors,
            slots,
            sum3,
            sq3,
            ..
        } = self;
        for ((re, im), (_, a)) in rows.iter_mut().zip(y.iter()) {
            re.clear();
            im.clear();
            for m in 0..a.nrows() {
                for r in 0..a.ncols() {
                    re.push(a[(m, r)].re);
                    im.push(a[(m, r)].im);
                }
            }
        }
        let [pre, pim, zre, zim] = work;
        for (k, proj) in projectors.iter().enumerate() {
            let [s1, s2, s3] = slots[k];
            let (r1, r2) = (
                rows[s1].0.len() / (2 * proj.l1 + 1),
                rows[s2].0.len() / (2 * proj.l2 + 1),
            );
            let n3 = 2 * proj.l3 + 1;
            let r3n = rows[s3].0.len() / n3;
            let width = r1 * r2;
            pre.clear();
            pre.resize(n3 * width, 0.0);
            pim.clear();
            pim.resize(n3 * width, 0.0);
            for &(row, m1, m2, c) in proj.entries() {
                let (ar, ai) = (
                    &rows[s1].0[m1 * r1..(m1 + 1) * r1],
                    &rows[s1].1[m1 * r1..(m1 + 1) * r1],
                );
                let (br, bi) = (
                    &rows[s2].0[m2 * r2..(m2 + 1) * r2],
                    &rows[s2].1[m2 * r2..(m2 + 1) * r2],
                );
                for p in 0..r1 {
                    let (xr, xi) = (c * ar[p], c * ai[p]);
                    let off = row * width + p * r2;
                    let dr = &mut pre[off..off + r2];
                    let di = &mut pim[off..off + r2];
                    for q in 0..r2 {
                        dr[q] += xr * br[q] - xi * bi[q];
                        di[q] += xr * bi[q] + xi * br[q];
                    }
                }
            }
            zre.clear();
            zre.resize(r3n * width, 0.0);
            zim.clear();
            zim.resize(r3n * width, 0.0);
            let (cr, ci) = (&rows[s3].0, &rows[s3].1);
            for m in 0..n3 {
                let pr = &pre[m * width..(m + 1) * width];
                let pi = &pim[m * width..(m + 1) * width];
                for r3 in 0..r3n {
                    // conjugated coefficient
                    let (wr, wi) = (cr[m * r3n + r3], -ci[m * r3n + r3]);
                    let zr = &mut zre[r3 * width..(r3 + 1) * width];
                    let zi = &mut zim[r3 * width..(r3 + 1) * width];
                    for c in 0..width {
                        zr[c] += wr * pr[c] - wi * pi[c];
                        zi[c] += wr * pi[c] + wi * pr[c];
                    }
                }
            }
            for (((acc, sq), &x), &y) in sum3[k]
                .iter_mut()
                .zip(sq3[k].iter_mut())
                .zip(zre.iter())
                .zip(zim.iter())
            {
                *acc += c64(x, y);
                *sq += x * x + y * y;
            }
        }
    }

    /// Adds the sums of `other` (same spec) into `self`.
    pub fn merge(&mut self, other: &MomentAccumulator) {
        self.count += other.count;
        for (a, b) in self.sum1.iter_mut().zip(&other.sum1) {
            *a += *b;
        }
        for (a, b) in self.sum2.iter_mut().zip(&other.sum2) {
            *a += b;
        }
        for (a, b) in self.sum3.iter_mut().zip(&other.sum3) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += *y;
            }
        }
        for (a, b) in self.sq3.iter_mut().zip(&other.sq3) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += *y;
            }
        }
    }

    /// All third-moment blocks of `data` (sums or squares), with the
    /// `l1 > l2` blocks obtained by exchanging factors.
    fn expand<T: Copy + core::ops::Mul<f64, Output = T>>(
        &self,
        data: &[Vec<T>],
        scale: f64,
        signed: bool,
    ) -> BTreeMap<Triple, (usize, usize, Vec<T>)> {
        let mut out = BTreeMap::new();
        for (p, v) in self.projectors.iter().zip(data) {
            let (r1, r2, r3) = (
                self.spec.multiplicity(p.l1),
                self.spec.multiplicity(p.l2),
                self.spec.multiplicity(p.l3),
            );
            out.insert(
                (p.l1, p.l2, p.l3),
                (r3, r1 * r2, v.iter().map(|&x| x * scale).collect()),
            );
            if p.l1 != p.l2 {
                let sign = if !signed || (p.l1 + p.l2 - p.l3) % 2 == 0 {
                    1.0
                } else {
                    -1.0
                };
                let mut w = Vec::with_capacity(v.len());
                for i3 in 0..r3 {
                    for j2 in 0..r2 {
                        for j1 in 0..r1 {
                            w.push(v[i3 * r1 * r2 + j1 * r2 + j2] * (sign * scale));
                        }
                    }
                }
                out.insert((p.l2, p.l1, p.l3), (r3, r1 * r2, w));
            }
        }
        out
    }

    /// Averages without any noise correction.
    pub fn raw(&self) -> MomentBlocks {
        let inv = 1.0 / self.count.max(1) as f64;
        MomentBlocks {
            m1: self.sum1.iter().map(|z| z * inv).collect(),
            m2: self
                .spec
                .bands()
                .iter()
                .zip(&self.sum2)
                .map(|(&(l, _), s)| (l, s * c64(inv, 0.0)))
                .collect(),
            m3: self
                .expand(&self.sum3, inv, true)
                .into_iter()
                .map(|(t, (r, c, v))| (t, CMat::from_row_slice(r, c, &v)))
                .collect(),
        }
    }

    /// Debiased averages with standard errors. A warning is attached when
    /// the relative standard error of the third moment exceeds `max_rel_se`.
    pub fn finish(
        &self,
        sigma: f64,
        structure: RealStructure,
        table: &CgTable,
        max_rel_se: f64,
    ) -> Result<EmpiricalMoments> {
        if self.count == 0 {
            return Err(Error::Parameter("no samples accumulated".into()));
        }
        let raw = self.raw();
        let n = self.count as f64;
        let mut std_errors = BTreeMap::new();
        let mut entry_std_errors = BTreeMap::new();
        let mut se_total = 0.0;
        for (t, (r, c, sq)) in self.expand(&self.sq3, 1.0 / n, false) {
            let mean = &raw.m3[&t];
            let se = DMatrix::from_fn(r, c, |i, j| {
                ((sq[i * c + j] - mean[(i, j)].norm_sqr()).max(0.0) / n).sqrt()
            });
            let block = se.norm_squared();
            se_total += block;
            std_errors.insert(t, block.sqrt());
            entry_std_errors.insert(t, se);
        }
        let mut moments = raw.clone();
        debias(&mut moments, sigma, structure, table);
        let scale = moments
            .m3
            .values()
            .map(|m| m.norm_squared())
            .sum::<f64>()
            .sqrt();
        let relative_std_error = if scale > 0.0 {
            se_total.sqrt() / scale
        } else {
            f64::INFINITY
        };
        let mut warnings = Vec::new();
        if relative_std_error > max_rel_se {
            warnings.push(format!(
                "relative standard error {relative_std_error:.3e} of the third moment exceeds {max_rel_se:.3e}; N = {} may be too small",
                self.count
            ));
        }
        Ok(EmpiricalMoments {
            moments,
            raw,
            count: self.count,
            std_errors,
            entry_std_errors,
            relative_std_error,
            warnings,
        })
    }
}

/// Result of [`empirical_moments`].
#[derive(Debug, Clone)]
pub struct EmpiricalMoments {
    /// Debiased estimates.
    pub moments: MomentBlocks,
    /// Plain sample averages.
    pub raw: MomentBlocks,
    pub count: usize,
    /// Frobenius-norm standard error of each third-moment block.
    pub std_errors: BTreeMap<Triple, f64>,
    /// Standard error of every third-moment entry.
    pub entry_std_errors: BTreeMap<Triple, DMatrix<f64>>,
    pub relative_std_error: f64,
    pub warnings: Vec<String>,
}

/// `E[ε ε^*]` per entry, relative to `σ²`.
fn kappa(structure: RealStructure) -> f64 {
    match structure {
        RealStructure::CryoReal => 1.0,
        RealStructure::GenericComplex => 2.0,
    }
}

/// `σ² Σ_m <l m l -m | 0 0> E[ε_m ε_{-m}] / σ²` for one column of cryo noise.
fn pseudo_contraction(l: usize, structure: RealStructure, table: &CgTable) -> f64 {
    if structure == RealStructure::GenericComplex {
        return 0.0;
    }
    let u = real_basis(l);
    let k = &u * u.transpose();
    let sign = if l % 2 == 1 { -1.0 } else { 1.0 };
    let j = l as i64;
    let mut s = c64(0.0, 0.0);
    for m in -j..=j {
        s += k[((m + j) as usize, (-m + j) as usize)] * table.cg(l, m, l, -m, 0, 0);
    }
    sign * s.re
}

/// Removes the Gaussian noise contributions from averaged moments in place.
pub fn debias(m: &mut MomentBlocks, sigma: f64, structure: RealStructure, table: &CgTable) {
    let s2 = sigma * sigma;
    let kap = kappa(structure);
    for (&l, g) in m.m2.iter_mut() {
        let shift = kap * s2 * (2 * l + 1) as f64;
        for i in 0..g.nrows() {
            g[(i, i)] -= c64(shift, 0.0);
        }
    }
    let m1 = m.m1.clone();
    for (&(l1, l2, l3), block) in m.m3.iter_mut() {
        let r2 = if l1 == 0 {
            block.ncols() / m1.len().max(1)
        } else {
            0
        };
        // noise in A_{l1} and A_{l2} paired, signal in A_{l3} = A_0
        if l3 == 0 && l1 == l2 {
            let c = s2 * pseudo_contraction(l1, structure, table);
            let r = block.ncols().isqrt();
            for (r3, z) in m1.iter().enumerate() {
                for p in 0..r {
                    block[(r3, p * r + p)] -= z.conj() * c;
                }
            }
        }
        // noise in A_{l2} and A_{l3}, signal in A_{l1} = A_0
        if l1 == 0 && l2 == l3 {
            let c = kap * s2 * (2 * l2 + 1) as f64;
            for (p, z) in m1.iter().enumerate() {
                for q in 0..r2 {
                    block[(q, p * r2 + q)] -= z * c;
                }
            }
        }
        // noise in A_{l1} and A_{l3}, signal in A_{l2} = A_0
        if l2 == 0 && l1 == l3 {
            let c = kap * s2 * (2 * l1 + 1) as f64;
            let r0 = m1.len();
            for p in 0..block.nrows() {
                for (q, z) in m1.iter().enumerate() {
                    block[(p, p * r0 + q)] -= z * c;
                }
            }
        }
    }
}

/// Debiased moments of an explicit sample collection.
pub fn empirical_moments<'a>(
    samples: impl IntoIterator<Item = &'a Signal>,
    sigma: f64,
    structure: RealStructure,
    table: &CgTable,
) -> Result<EmpiricalMoments> {
    let mut it = samples.into_iter().peekable();
    let first = it
        .peek()
        .ok_or_else(|| Error::Parameter("no samples".into()))?;
    let mut acc = MomentAccumulator::new(first.spec(), table)?;
    for y in it {
        if y.spec() != &acc.spec {
            return Err(Error::Parameter("samples of different shapes".into()));
        }
        acc.add(y);
    }
    acc.finish(sigma, structure, table, f64::INFINITY)
}

/// Chunk layout of `n` samples: `(chunk index, count)`.
pub fn chunks(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n.div_ceil(CHUNK_SIZE)).map(move |c| (c, CHUNK_SIZE.min(n - c * CHUNK_SIZE)))
}

/// Simulates `n` observations and returns their debiased moments; chunks
/// are merged in index order.
pub fn simulate_moments(
    f: &Signal,
    sigma: f64,
    n: usize,
    structure: RealStructure,
    seed: u64,
    table: &CgTable,
    max_rel_se: f64,
) -> Result<EmpiricalMoments> {
    if n == 0 {
        return Err(Error::Parameter("sample count must be >= 1".into()));
    }
    let sampler = MraSampler::new(f, sigma, structure, seed)?;
    let mut total = MomentAccumulator::new(f.spec(), table)?;
    for (c, count) in chunks(n) {
        total.merge(&sampler.accumulate_chunk(c, count, table)?);
    }
    total.finish(sigma, structure, table, max_rel_se)
}

/// Third-moment error with every entry measured in units of its own
/// per-sample standard deviation, `sqrt(Σ |Δ|² / (N se²)) `; entries with
/// vanishing spread are skipped.
pub fn standardized_error(est: &EmpiricalMoments, exact: &MomentBlocks) -> f64 {
    let n = est.count as f64;
    let mut s = 0.0;
    for (k, x) in &exact.m3 {
        let (Some(y), Some(se)) = (est.moments.m3.get(k), est.entry_std_errors.get(k)) else {
            continue;
        };
        for ((a, b), e) in x.iter().zip(y.iter()).zip(se.iter()) {
            let sd2 = e * e * n;
            if sd2 > 1e-24 {
                s += (a - b).norm_sqr() / sd2;
            }
        }
    }
    s.sqrt()
}

/// Moment and recovery errors at one sample size of a [`batch_sweep`].
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub n: usize,
    /// Disjoint batches of size `n` that entered the moment statistics.
    pub batches: usize,
    /// Root mean square over batches of the debiased moment error.
    pub moment_rms: f64,
    /// Mean over the recovered batches of the registered relative error.
    pub rel_error_mean: Option<f64>,
    pub recovered_batches: usize,
    pub recovery_failures: usize,
}

/// Accumulators for the first `n_total` samples, one per chunk, in order.
pub fn chunk_accumulators(
    sampler: &MraSampler,
    n_total: usize,
    table: &CgTable,
) -> Result<Vec<MomentAccumulator>> {
    chunks(n_total)
        .map(|(c, count)| sampler.accumulate_chunk(c, count, table))
        .collect()
}

/// Splits the chunk accumulators into disjoint batches of each size in
/// `ns` (multiples of [`CHUNK_SIZE`]) and measures the debiased moment
/// error against `f`. When `recover` is given, the first `max_recover`
/// batches of each size also go through orbit recovery.
#[allow(clippy::too_many_arguments)]
pub fn batch_sweep(
    f: &Signal,
    sigma: f64,
    structure: RealStructure,
    accs: &[MomentAccumulator],
    ns: &[usize],
    table: &CgTable,
    recover: Option<&RecoveryOptions>,
    max_recover: usize,
) -> Result<Vec<SweepPoint>> {
    let exact = moments(f, table)?;
    let mut out = Vec::with_capacity(ns.len());
    for &n in ns {
        if n == 0 || n % CHUNK_SIZE != 0 {
            return Err(Error::Parameter(format!(
                "sample size {n} is not a multiple of {CHUNK_SIZE}"
            )));
        }
        let k = n / CHUNK_SIZE;
        let batches = accs.len() / k;
        if batches == 0 {
            return Err(Error::Parameter(format!(
                "sample size {n} exceeds the simulated total"
            )));
        }
        let mut sq = 0.0;
        let mut rel = Vec::new();
        let mut failures = 0;
        for b in 0..batches {
            let mut acc = accs[b * k].clone();
            for other in &accs[b * k + 1..(b + 1) * k] {
                acc.merge(other);
            }
            let est = acc.finish(sigma, structure, table, f64::INFINITY)?;
            sq += moment_error(&est.moments, &exact).powi(2);
            if let Some(opts) = recover.filter(|_| b < max_recover) {
                match recover_orbit(&est.moments.m3, f.spec(), structure, table, opts)
                    .and_then(|mut r| r.register(f))
                {
                    Ok(e) => rel.push(e),
                    Err(_) => failures += 1,
                }
            }
        }
        out.push(SweepPoint {
            n,
            batches,
            moment_rms: (sq / batches as f64).sqrt(),
            rel_error_mean: (!rel.is_empty()).then(|| rel.iter().sum::<f64>() / rel.len() as f64),
            recovered_batches: rel.len(),
            recovery_failures: failures,
        });
    }
    Ok(out)
}

/// Frobenius distance between two moment collections over the keys of `a`.
pub fn moment_error(a: &MomentBlocks, b: &MomentBlocks) -> f64 {
    let mut s = 0.0;
    for (x, y) in a.m1.iter().zip(&b.m1) {
        s += (x - y).norm_sqr();
    }
    for (k, x) in &a.m2 {
        if let Some(y) = b.m2.get(k) {
            s += (x - y).norm_squared();
        }
    }
    for (k, x) in &a.m3 {
        if let Some(y) = b.m3.get(k) {
            s += (x - y).norm_squared();
        }
    }
    s.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{distance_up_to_group, random_signal};

    fn setup(l: usize, r: usize, structure: RealStructure, seed: u64) -> (Signal, CgTable) {
        let spec = RepSpec::uniform(l, r).unwrap();
        (random_signal(&spec, structure, seed), CgTable::new(l))
    }

    #[test]
    fn noiseless_samples_lie_on_the_orbit() {
        let (f, _) = setup(2, 4, RealStructure::CryoReal, 1);
        for s in sample_mra(&f, 0.0, 5, RealStructure::CryoReal, 3).unwrap() {
            let (_, d) = distance_up_to_group(&f, &s.y).unwrap();
            assert!(d <= 1e-8, "{d}");
        }
    }

    #[test]
    fn noise_has_the_stated_variance() {
        for structure in [RealStructure::CryoReal, RealStructure::GenericComplex] {
            let (f, _) = setup(2, 3, structure, 2);
            let sigma = 0.7;
            let sampler = MraSampler::new(&f, sigma, structure, 4).unwrap();
            let real_dim = match structure {
                RealStructure::CryoReal => f.spec().dim(),
                RealStructure::GenericComplex => 2 * f.spec().dim(),
            } as f64;
            let vals: Vec<f64> = sampler
                .stream(4000, true)
                .map(|s| {
                    let e = s.noise.unwrap();
                    e.norm().powi(2) / real_dim
                })
                .collect();
            let n = vals.len() as f64;
            let mean = vals.iter().sum::<f64>() / n;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
            assert!(
                (mean - sigma * sigma).abs() < 3.0 * (var / n).sqrt(),
                "{mean}"
            );
        }
    }

    #[test]
    fn rotations_are_haar() {
        let (f, _) = setup(1, 1, RealStructure::CryoReal, 2);
        let sampler = MraSampler::new(&f, 0.0, RealStructure::CryoReal, 9).unwrap();
        let n = 20_000;
        let mut mean = CMat::zeros(3, 3);
        for s in sampler.stream(n, true) {
            mean += crate::su2::wigner_big_d(1, &s.rotation.unwrap());
        }
        mean /= c64(n as f64, 0.0);
        assert!(mean.iter().all(|z| z.norm() < 3.0 / (n as f64).sqrt()));
    }

    #[test]
    fn stream_and_chunks_agree() {
        let (f, _) = setup(1, 2, RealStructure::GenericComplex, 3);
        let sampler = MraSampler::new(&f, 0.2, RealStructure::GenericComplex, 5).unwrap();
        let all: Vec<_> = sampler.stream(CHUNK_SIZE + 3, false).collect();
        let second = sampler.chunk(1, 3, false);
        for (a, b) in all[CHUNK_SIZE..].iter().zip(&second) {
            assert_eq!(a.y, b.y);
        }
        assert_eq!(sampler.chunk(0, 2, false)[1].y, all[1].y);
    }

    #[test]
    fn single_noiseless_sample_gives_its_gram() {
        let (f, table) = setup(2, 2, RealStructure::CryoReal, 6);
        let s = sample_mra(&f, 0.0, 1, RealStructure::CryoReal, 1).unwrap();
        let e = empirical_moments([&s[0].y], 0.0, RealStructure::CryoReal, &table).unwrap();
        for (l, a) in s[0].y.iter() {
            assert!((&e.moments.m2[&l] - a.ad_mul(a)).norm() < 1e-12);
        }
        let exact = moments(&s[0].y, &table).unwrap();
        assert!(moment_error(&e.moments, &exact) < 1e-12);
    }

    #[test]
    fn noiseless_moments_converge() {
        let (f, table) = setup(2, 2, RealStructure::CryoReal, 7);
        let exact = moments(&f, &table).unwrap();
        let n = 10_000;
        let e = simulate_moments(&f, 0.0, n, RealStructure::CryoReal, 2, &table, 1.0).unwrap();
        for (k, x) in &exact.m3 {
            let scale = f.norm().powi(3);
            assert!(
                (&e.moments.m3[k] - x).norm() < 5.0 / (n as f64).sqrt() * scale,
                "{k:?}"
            );
        }
    }

    #[test]
    fn debiasing_removes_noise_bias() {
        for (structure, seed) in [
            (RealStructure::CryoReal, 11),
            (RealStructure::GenericComplex, 12),
        ] {
            let (f, table) = setup(2, 2, structure, seed);
            let exact = moments(&f, &table).unwrap();
            let sigma = 0.5;
            let n = 100_000;
            let e = simulate_moments(&f, sigma, n, structure, 3, &table, 1.0).unwrap();
            // the raw Gram diagonal sits high by about κσ²(2l+1)
            for (&l, g) in &exact.m2 {
                let shift = kappa(structure) * sigma * sigma * (2 * l + 1) as f64;
                for i in 0..g.nrows() {
                    let bias = e.raw.m2[&l][(i, i)].re - g[(i, i)].re;
                    assert!((bias - shift).abs() < 0.2 * shift, "{l} {bias} {shift}");
                }
            }
            // every third-moment block lands within a few standard errors
            for (k, x) in &exact.m3 {
                let err = (&e.moments.m3[k] - x).norm();
                let se = e.std_errors[k];
                assert!(
                    err < 4.0 * se + 1e-12,
                    "{structure:?} {k:?} err {err} se {se}"
                );
            }
            assert!(e.warnings.is_empty());
        }
    }

    #[test]
    fn tiny_sample_warns() {
        let (f, table) = setup(1, 2, RealStructure::CryoReal, 1);
        let e = simulate_moments(&f, 3.0, 10, RealStructure::CryoReal, 1, &table, 0.1).unwrap();
        assert_eq!(e.warnings.len(), 1);
    }

    #[test]
    fn accumulation_is_bit_stable() {
        let (f, table) = setup(1, 2, RealStructure::CryoReal, 1);
        let a = simulate_moments(&f, 0.3, 25_000, RealStructure::CryoReal, 8, &table, 1.0).unwrap();
        let b = simulate_moments(&f, 0.3, 25_000, RealStructure::CryoReal, 8, &table, 1.0).unwrap();
        assert_eq!(a.moments, b.moments);
    }
}
