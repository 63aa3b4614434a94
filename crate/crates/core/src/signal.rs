//! Signals in `V = ⊕_l V_l^{R_l}`: coefficient blocks, the SO(3) action and
//! random generation.

use alloc::vec::Vec;

use nalgebra::DMatrix;
#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{fro, singular_values};
use crate::rotation::Rotation;
use crate::su2::{real_basis, spherical_to_cartesian, wigner_big_d, CgTable};
use crate::{c64, CMat};

/// Multiplicities `R_l` of each irreducible `V_l`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RepSpec {
    bands: Vec<(usize, usize)>,
}

impl RepSpec {
    /// `bands` holds `(l, R_l)` pairs with distinct, ascending `l`.
    pub fn new(bands: Vec<(usize, usize)>) -> Result<Self> {
        if bands.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(Error::Parameter(
                "band labels must be distinct and ascending".into(),
            ));
        }
        if bands.iter().all(|&(_, r)| r == 0) {
            return Err(Error::Parameter(
                "at least one multiplicity must be positive".into(),
            ));
        }
        Ok(RepSpec { bands })
    }

    /// Every `l = 0..=max_l` with the same multiplicity `r`.
    pub fn uniform(max_l: usize, r: usize) -> Result<Self> {
        Self::new((0..=max_l).map(|l| (l, r)).collect())
    }

    pub fn bands(&self) -> &[(usize, usize)] {
        &self.bands
    }

    pub fn max_l(&self) -> usize {
        self.bands.last().map_or(0, |b| b.0)
    }

    /// `R_l`, zero when `l` is absent.
    pub fn multiplicity(&self, l: usize) -> usize {
        self.position(l).map_or(0, |i| self.bands[i].1)
    }

    pub fn position(&self, l: usize) -> Option<usize> {
        self.bands.binary_search_by_key(&l, |b| b.0).ok()
    }

    /// Complex dimension `Σ (2l+1) R_l`.
    pub fn dim(&self) -> usize {
        self.bands.iter().map(|&(l, r)| (2 * l + 1) * r).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RealStructure {
    GenericComplex,
    /// Coefficients of a real function: in the real harmonic basis, blocks
    /// are real for even `l` and purely imaginary for odd `l`.
    CryoReal,
}

impl RealStructure {
    pub fn name(self) -> &'static str {
        match self {
            RealStructure::GenericComplex => "complex",
            RealStructure::CryoReal => "cryo",
        }
    }
}

/// Coefficient matrices `A_l` (`(2l+1) × R_l`, rows `m = -l..=l`) in the
/// complex Condon–Shortley basis.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    spec: RepSpec,
    blocks: Vec<CMat>,
}

impl Signal {
    pub fn new(spec: RepSpec, blocks: Vec<CMat>) -> Result<Self> {
        if blocks.len() != spec.bands.len() {
            return Err(Error::Parameter("one block per band required".into()));
        }
        for (&(l, r), b) in spec.bands.iter().zip(&blocks) {
            if b.nrows() != 2 * l + 1 || b.ncols() != r {
                return Err(Error::Parameter(alloc::format!(
                    "block l = {l} has shape {}x{}, expected {}x{r}",
                    b.nrows(),
                    b.ncols(),
                    2 * l + 1
                )));
            }
        }
        Ok(Signal { spec, blocks })
    }

    pub fn zeros(spec: RepSpec) -> Self {
        let blocks = spec
            .bands
            .iter()
            .map(|&(l, r)| CMat::zeros(2 * l + 1, r))
            .collect();
        Signal { spec, blocks }
    }

    pub fn spec(&self) -> &RepSpec {
        &self.spec
    }

    pub fn block(&self, l: usize) -> Option<&CMat> {
        self.spec.position(l).map(|i| &self.blocks[i])
    }

    pub fn block_mut(&mut self, l: usize) -> Option<&mut CMat> {
        self.spec.position(l).map(move |i| &mut self.blocks[i])
    }

    /// `(l, A_l)` in ascending `l`.
    pub fn iter(&self) -> impl Iterator<Item = (usize, &CMat)> {
        self.spec.bands.iter().map(|b| b.0).zip(&self.blocks)
    }

    pub fn blocks(&self) -> &[CMat] {
        &self.blocks
    }

    pub fn norm(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| fro(b).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// `‖self - other‖` over matching shapes.
    pub fn distance(&self, other: &Signal) -> Result<f64> {
        if self.spec != other.spec {
            return Err(Error::Parameter("signals have different specs".into()));
        }
        Ok(self
            .blocks
            .iter()
            .zip(&other.blocks)
            .map(|(a, b)| fro(&(a - b)).powi(2))
            .sum::<f64>()
            .sqrt())
    }

    /// Coefficients in the real harmonic basis with the odd-`l` factor of
    /// `i` removed: real for a [`RealStructure::CryoReal`] signal.
    pub fn real_view(&self, l: usize) -> Option<CMat> {
        let a = self.block(l)?;
        let v = real_basis(l).adjoint() * a;
        Some(if l % 2 == 1 { v * c64(0.0, -1.0) } else { v })
    }

    /// Largest imaginary part of any [`Signal::real_view`] entry.
    pub fn structure_defect(&self) -> f64 {
        self.iter()
            .filter_map(|(l, _)| self.real_view(l))
            .flat_map(|v| v.iter().map(|z| z.im.abs()).collect::<Vec<_>>())
            .fold(0.0, f64::max)
    }
}

/// `g · f`: every block becomes `D^l(g) A_l`.
pub fn act(g: &Rotation, f: &Signal) -> Signal {
    let blocks = f.iter().map(|(l, a)| wigner_big_d(l, g) * a).collect();
    Signal {
        spec: f.spec.clone(),
        blocks,
    }
}

/// Gaussian signal, deterministic in `seed`. Complex entries have unit
/// variance split evenly between real and imaginary parts; real-structure
/// entries are standard normal in the real harmonic basis.
pub fn random_signal(spec: &RepSpec, structure: RealStructure, seed: u64) -> Signal {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_signal_with(spec, structure, &mut rng)
}

pub fn random_signal_with<R: Rng + ?Sized>(
    spec: &RepSpec,
    structure: RealStructure,
    rng: &mut R,
) -> Signal {
    let h = core::f64::consts::FRAC_1_SQRT_2;
    let blocks = spec
        .bands
        .iter()
        .map(|&(l, r)| {
            let n = 2 * l + 1;
            match structure {
                RealStructure::GenericComplex => CMat::from_fn(n, r, |_, _| {
                    let re: f64 = rng.sample(StandardNormal);
                    let im: f64 = rng.sample(StandardNormal);
                    c64(h * re, h * im)
                }),
                RealStructure::CryoReal => {
                    let x = CMat::from_fn(n, r, |_, _| c64(rng.sample(StandardNormal), 0.0));
                    from_real_view(l, &x)
                }
            }
        })
        .collect();
    Signal {
        spec: spec.clone(),
        blocks,
    }
}

/// Inverse of [`Signal::real_view`] for a single block.
pub fn from_real_view(l: usize, x: &CMat) -> CMat {
    let a = real_basis(l) * x;
    if l % 2 == 1 {
        a * c64(0.0, 1.0)
    } else {
        a
    }
}

/// Ranks that the recovery pipeline relies on.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    /// `(l, rank A_l)`.
    pub block_ranks: Vec<(usize, usize)>,
    /// `(l, rank B_l, rows of B_l)` for the projections `B_l` of
    /// `A_1 ⊗ A_{l-1}` onto `V_l`.
    pub march_ranks: Vec<(usize, usize, usize)>,
}

pub fn numerical_rank(a: &CMat, rtol: f64) -> usize {
    let s = singular_values(a);
    let top = s.first().copied().unwrap_or(0.0);
    s.iter().filter(|&&x| x > rtol * top && x > 0.0).count()
}

pub fn diagnostics(f: &Signal, table: &CgTable) -> Diagnostics {
    let block_ranks = f
        .iter()
        .map(|(l, a)| (l, numerical_rank(a, 1e-10)))
        .collect();
    let mut march_ranks = Vec::new();
    if let Some(a1) = f.block(1) {
        for l in 2..=f.spec.max_l() {
            if let (Some(prev), true) = (f.block(l - 1), f.spec.position(l).is_some()) {
                if let Some(b) = crate::moments::cg_project(a1, prev, l, table) {
                    march_ranks.push((l, numerical_rank(&b, 1e-10), b.nrows()));
                }
            }
        }
    }
    Diagnostics {
        block_ranks,
        march_ranks,
    }
}

/// Rotation `g` minimizing `‖g·f - h‖` and the relative error
/// `‖g·f - h‖ / ‖f‖` at that rotation.
///
/// The start is the orthogonal Procrustes solution on the `l = 1` blocks in
/// Cartesian coordinates; a pattern search polishes it against all blocks.
pub fn distance_up_to_group(f: &Signal, h: &Signal) -> Result<(Rotation, f64)> {
    if f.spec != h.spec {
        return Err(Error::Parameter("signals have different specs".into()));
    }
    let scale = f.norm().max(f64::MIN_POSITIVE);
    let (Some(a), Some(b)) = (f.block(1), h.block(1)) else {
        return Err(Error::AlignmentUnavailable { rank: 0 });
    };
    let t = spherical_to_cartesian();
    let x = &t * a;
    let y = &t * b;
    let rank = numerical_rank(&x, 1e-8);
    if rank <= 1 {
        return Err(Error::AlignmentUnavailable { rank });
    }
    let cross = y * x.adjoint();
    let m = DMatrix::from_fn(3, 3, |i, j| cross[(i, j)].re);
    let r = crate::linalg::nearest_rotation(&m);
    let rows: [[f64; 3]; 3] = core::array::from_fn(|i| core::array::from_fn(|j| r[(i, j)]));
    let start = Rotation::from_matrix(&rows)?;

    let objective = |g: &Rotation| act(g, f).distance(h).unwrap_or(f64::INFINITY) / scale;
    let mut best = start;
    let mut best_val = objective(&best);
    if best_val > 1e-13 {
        let mut step = 0.05;
        while step > 1e-13 {
            let mut moved = false;
            for axis in 0..3 {
                for sign in [1.0, -1.0] {
                    let mut v = [0.0; 3];
                    v[axis] = 1.0;
                    let delta = Rotation::from_axis_angle(v, sign * step)?;
                    let cand = delta.compose(&best);
                    let val = objective(&cand);
                    if val < best_val {
                        best = cand;
                        best_val = val;
                        moved = true;
                    }
                }
            }
            if !moved {
                step *= 0.5;
            }
        }
    }
    Ok((best, best_val))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(l: usize, r: usize) -> RepSpec {
        RepSpec::uniform(l, r).unwrap()
    }

    #[test]
    fn spec_validation() {
        assert!(RepSpec::new(alloc::vec![(1, 2), (1, 3)]).is_err());
        assert!(RepSpec::new(alloc::vec![(0, 0)]).is_err());
        let s = RepSpec::new(alloc::vec![(0, 1), (2, 3)]).unwrap();
        assert_eq!(s.dim(), 1 + 15);
        assert_eq!(s.multiplicity(1), 0);
        assert_eq!(s.max_l(), 2);
    }

    #[test]
    fn action_is_a_norm_preserving_homomorphism() {
        let f = random_signal(&spec(3, 2), RealStructure::GenericComplex, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let g1 = Rotation::random(&mut rng);
        let g2 = Rotation::random(&mut rng);
        let lhs = act(&g1, &act(&g2, &f));
        let rhs = act(&g1.compose(&g2), &f);
        assert!(lhs.distance(&rhs).unwrap() < 1e-11);
        assert!((act(&g1, &f).norm() - f.norm()).abs() < 1e-12);
        assert_eq!(act(&Rotation::identity(), &f).distance(&f).unwrap(), 0.0);
    }

    #[test]
    fn cryo_structure() {
        let f = random_signal(&spec(3, 2), RealStructure::CryoReal, 4);
        assert!(f.structure_defect() < 1e-15);
        let v = f.real_view(1).unwrap();
        assert!(v.iter().all(|z| z.im == 0.0));
        // real functions stay real under rotation
        let g = Rotation::random(&mut ChaCha8Rng::seed_from_u64(3));
        assert!(act(&g, &f).structure_defect() < 1e-12);
        for (_, a) in f.iter() {
            let gram = a.adjoint() * a;
            assert!(gram.iter().all(|z| z.im.abs() < 1e-12));
        }
    }

    #[test]
    fn seeds_are_deterministic() {
        let s = spec(2, 3);
        assert_eq!(
            random_signal(&s, RealStructure::CryoReal, 9),
            random_signal(&s, RealStructure::CryoReal, 9)
        );
        assert_ne!(
            random_signal(&s, RealStructure::CryoReal, 9),
            random_signal(&s, RealStructure::CryoReal, 10)
        );
    }

    #[test]
    fn ranks_are_generic() {
        let table = CgTable::new(3);
        for seed in 0..100 {
            let f = random_signal(&spec(3, 5), RealStructure::GenericComplex, seed);
            let d = diagnostics(&f, &table);
            for (l, r) in d.block_ranks {
                assert_eq!(r, (2 * l + 1).min(5));
            }
            for (_, r, rows) in d.march_ranks {
                assert_eq!(r, rows);
            }
        }
    }

    #[test]
    fn registration() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for seed in 0..100 {
            let f = random_signal(&spec(3, 2), RealStructure::GenericComplex, seed);
            let g = Rotation::random(&mut rng);
            let h = act(&g, &f);
            let (gb, err) = distance_up_to_group(&f, &h).unwrap();
            assert!(err < 1e-8, "seed {seed}: {err}");
            assert!(gb.angle_to(&g) < 1e-6);
        }
        let f = random_signal(&spec(2, 3), RealStructure::CryoReal, 1);
        let (g, err) = distance_up_to_group(&f, &f).unwrap();
        assert!(err == 0.0 || err < 1e-15);
        assert!(g.angle_to(&Rotation::identity()) < 1e-12);
    }

    #[test]
    fn registration_under_perturbation() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let f = random_signal(&spec(2, 3), RealStructure::CryoReal, 5);
        for eps in [1e-6, 1e-3] {
            let noise = random_signal(f.spec(), RealStructure::CryoReal, 77);
            let scale = eps * f.norm() / noise.norm();
            let g = Rotation::random(&mut rng);
            let moved = act(&g, &f);
            let blocks = moved
                .blocks()
                .iter()
                .zip(noise.blocks())
                .map(|(a, n)| a + n * c64(scale, 0.0))
                .collect();
            let h = Signal::new(f.spec().clone(), blocks).unwrap();
            let (_, err) = distance_up_to_group(&f, &h).unwrap();
            assert!(err <= eps * 1.0001, "{eps}: {err}");
        }
    }

    #[test]
    fn degenerate_alignment() {
        let mut f = Signal::zeros(spec(1, 2));
        f.block_mut(1).unwrap()[(0, 0)] = c64(1.0, 0.0);
        let err = distance_up_to_group(&f, &f).unwrap_err();
        assert!(matches!(err, Error::AlignmentUnavailable { rank: 1 }));
    }
}
