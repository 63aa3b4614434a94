//! Weight-lattice engine for the classical families.
//!
//! Weights are integer vectors in the `L_i` basis. Type A weights carry `n`
//! coordinates and are normalized so the last one is zero. Rank-one type B
//! (`SO(3)`) is the one exception: its single coordinate uses the `SU(2)`
//! highest-weight normalization, so the spin-`l` representation has weight
//! `2l` and the odd weights are the spin representations that do not descend.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::ops::{Add, Sub};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Family {
    A,
    B,
    C,
    D,
}

impl Family {
    pub fn from_letter(c: char) -> Option<Self> {
        match c.to_ascii_uppercase() {
            'A' => Some(Family::A),
            'B' => Some(Family::B),
            'C' => Some(Family::C),
            'D' => Some(Family::D),
            _ => None,
        }
    }

    pub fn letter(self) -> char {
        match self {
            Family::A => 'A',
            Family::B => 'B',
            Family::C => 'C',
            Family::D => 'D',
        }
    }
}

/// A classical group, identified by family and the parameter `n`:
/// `A_{n-1} = SU(n)`, `B_n = SO(2n+1)`, `C_n = Sp(n)`, `D_n = SO(2n)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GroupType {
    family: Family,
    n: usize,
}

impl GroupType {
    pub fn new(family: Family, n: usize) -> Result<Self> {
        let min = match family {
            Family::A | Family::D => 2,
            Family::B | Family::C => 1,
        };
        if n < min {
            return Err(Error::Parameter(format!(
                "family {} needs n >= {min}, got {n}",
                family.letter()
            )));
        }
        Ok(GroupType { family, n })
    }

    pub fn family(&self) -> Family {
        self.family
    }

    /// Number of `L_i` coordinates.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn lie_rank(&self) -> usize {
        match self.family {
            Family::A => self.n - 1,
            _ => self.n,
        }
    }

    pub fn compact_name(&self) -> String {
        match self.family {
            Family::A => format!("SU({})", self.n),
            Family::B => format!("SO({})", 2 * self.n + 1),
            Family::C => format!("Sp({})", self.n),
            Family::D => format!("SO({})", 2 * self.n),
        }
    }

    /// Builds a weight from `L_i` coordinates, normalizing type A to `λ_n = 0`.
    pub fn weight(&self, coords: &[i64]) -> Result<Weight> {
        if coords.len() != self.n {
            return Err(Error::Parameter(format!(
                "{self} weights have {} coordinates, got {}",
                self.n,
                coords.len()
            )));
        }
        let mut w = coords.to_vec();
        if self.family == Family::A {
            let last = w[self.n - 1];
            w.iter_mut().for_each(|c| *c -= last);
        }
        Ok(Weight(w))
    }

    pub fn zero(&self) -> Weight {
        Weight(vec![0; self.n])
    }

    fn ones(&self, k: usize) -> Weight {
        let mut w = vec![0; self.n];
        w[..k].iter_mut().for_each(|c| *c = 1);
        Weight(w)
    }
}

impl fmt::Display for GroupType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.family.letter(), self.lie_rank())
    }
}

/// Integer weight in `L_i` coordinates.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Weight(Vec<i64>);

impl Weight {
    pub fn coords(&self) -> &[i64] {
        &self.0
    }

    pub fn into_coords(self) -> Vec<i64> {
        self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0)
    }

    fn scaled(&self, k: i64) -> Weight {
        Weight(self.0.iter().map(|c| c * k).collect())
    }
}

impl Add for &Weight {
    type Output = Weight;
    fn add(self, rhs: &Weight) -> Weight {
        Weight(self.0.iter().zip(&rhs.0).map(|(a, b)| a + b).collect())
    }
}

impl Sub for &Weight {
    type Output = Weight;
    fn sub(self, rhs: &Weight) -> Weight {
        Weight(self.0.iter().zip(&rhs.0).map(|(a, b)| a - b).collect())
    }
}

impl fmt::Display for Weight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{c}")?;
        }
        f.write_str(")")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Justification {
    HighestWeightAdditivity,
    WedgeContainment,
    ContractionKernel,
}

impl Justification {
    pub fn name(self) -> &'static str {
        match self {
            Justification::HighestWeightAdditivity => "highest-weight-additivity",
            Justification::WedgeContainment => "wedge-containment",
            Justification::ContractionKernel => "contraction-kernel",
        }
    }
}

/// One step of a marching schedule: the target irreducible is recovered from
/// the bispectrum block of `left ⊗ right`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MarchStep {
    pub left: Weight,
    pub right: Weight,
    pub target: Weight,
    /// Further irreducibles produced by the same step (type D: `V_{n+1}`).
    pub co_targets: Vec<Weight>,
    pub justification: Justification,
    /// Indices of earlier steps whose targets this step consumes.
    pub prerequisites: Vec<usize>,
    /// Irreducible summands of the right factor when it is a reducible
    /// exterior power (type C).
    pub right_decomposition: Vec<Weight>,
    /// Irreducible summands of the exterior power containing the target.
    pub target_decomposition: Vec<Weight>,
}

/// The banding system: fundamental weights (with the even/spin replacements
/// for the orthogonal groups), each of band one.
pub fn fundamental_weights(g: GroupType) -> Vec<(String, Weight)> {
    let n = g.n;
    match g.family {
        Family::A => (1..n).map(|i| (format!("w{i}"), g.ones(i))).collect(),
        Family::C => (1..=n).map(|i| (format!("w{i}"), g.ones(i))).collect(),
        Family::B if n == 1 => vec![(String::from("w'1"), Weight(vec![2]))],
        Family::B => {
            let mut out: Vec<_> = (1..n).map(|i| (format!("w{i}"), g.ones(i))).collect();
            out.push((format!("w'{n}"), g.ones(n)));
            out
        }
        Family::D => {
            let mut out: Vec<_> = (1..n - 1).map(|i| (format!("w{i}"), g.ones(i))).collect();
            out.push((format!("w'{}", n - 1), g.ones(n - 1)));
            out.push((format!("w'{n}"), g.ones(n)));
            let mut last = g.ones(n);
            last.0[n - 1] = -1;
            out.push((format!("w'{}", n + 1), last));
            out
        }
    }
}

/// Band-one irreducibles, in the order of [`fundamental_weights`].
pub fn band_one_irreps(g: GroupType) -> Vec<Weight> {
    fundamental_weights(g).into_iter().map(|(_, w)| w).collect()
}

fn check_len(g: GroupType, w: &Weight) -> Result<()> {
    if w.0.len() != g.n {
        return Err(Error::Parameter(format!(
            "{g} weights have {} coordinates, got {}",
            g.n,
            w.0.len()
        )));
    }
    if g.family == Family::A && w.0[g.n - 1] != 0 {
        return Err(Error::Parameter(format!(
            "{g} weight {w} is not normalized to a zero last coordinate"
        )));
    }
    Ok(())
}

/// Checks dominance; the error names the violated inequality.
pub fn check_dominant(g: GroupType, w: &Weight) -> Result<()> {
    check_len(g, w)?;
    let c = &w.0;
    let fail = |rule: String| {
        Err(Error::NotDominant {
            weight: c.clone(),
            rule,
        })
    };
    let chain_end = match g.family {
        Family::D => g.n - 1,
        _ => g.n,
    };
    for i in 1..chain_end {
        if c[i - 1] < c[i] {
            return fail(format!(
                "λ{} >= λ{} fails ({} < {})",
                i,
                i + 1,
                c[i - 1],
                c[i]
            ));
        }
    }
    match g.family {
        Family::A => {}
        Family::B | Family::C => {
            if c[g.n - 1] < 0 {
                return fail(format!("λ{} >= 0 fails ({})", g.n, c[g.n - 1]));
            }
        }
        Family::D => {
            let (a, b) = (c[g.n - 2], c[g.n - 1]);
            if a < b.abs() {
                return fail(format!(
                    "λ{} >= |λ{}| fails ({a} < {})",
                    g.n - 1,
                    g.n,
                    b.abs()
                ));
            }
        }
    }
    Ok(())
}

/// Whether a dominant weight labels a representation of the (possibly
/// non-simply-connected) compact group.
pub fn is_admissible(g: GroupType, w: &Weight) -> Result<bool> {
    check_dominant(g, w)?;
    // Integer L-coordinates already force the parity condition for B_n (n >= 2)
    // and D_n; only the SU(2)-normalized rank-one B weights can be spin.
    Ok(!(g.family == Family::B && g.n == 1 && w.0[0] % 2 != 0))
}

fn check_admissible(g: GroupType, w: &Weight) -> Result<()> {
    if is_admissible(g, w)? {
        Ok(())
    } else {
        Err(Error::Inadmissible {
            weight: w.0.clone(),
            rule: String::from("coefficient of the spin weight must be even"),
        })
    }
}

/// Deterministic non-negative expansion in the banding system.
pub fn greedy_expansion(g: GroupType, w: &Weight) -> Result<Vec<u64>> {
    check_admissible(g, w)?;
    let c = &w.0;
    let n = g.n;
    let diffs = |upto: usize| -> Vec<u64> { (0..upto).map(|i| (c[i] - c[i + 1]) as u64).collect() };
    Ok(match g.family {
        Family::A => diffs(n - 1),
        Family::B if n == 1 => vec![(c[0] / 2) as u64],
        Family::B | Family::C => {
            let mut b = diffs(n - 1);
            b.push(c[n - 1] as u64);
            b
        }
        Family::D => {
            let mut b = diffs(n - 2);
            let (a, last) = (c[n - 2], c[n - 1]);
            b.push((a - last.abs()) as u64);
            b.push(last.max(0) as u64);
            b.push((-last).max(0) as u64);
            b
        }
    })
}

/// Every non-negative expansion of `w` in the banding system, by bounded
/// exhaustive search (each coefficient at most the largest coordinate).
pub fn expansions(g: GroupType, w: &Weight) -> Result<Vec<Vec<u64>>> {
    check_admissible(g, w)?;
    let basis = band_one_irreps(g);
    let bound = w.0.iter().map(|c| c.unsigned_abs()).max().unwrap_or(0);
    let mut out = Vec::new();
    let mut coeffs = vec![0u64; basis.len()];
    fn dfs(
        idx: usize,
        residual: Weight,
        basis: &[Weight],
        bound: u64,
        coeffs: &mut Vec<u64>,
        out: &mut Vec<Vec<u64>>,
    ) {
        if idx == basis.len() {
            if residual.is_zero() {
                out.push(coeffs.clone());
            }
            return;
        }
        let mut r = residual;
        for k in 0..=bound {
            // every banding weight has a positive first coordinate
            if r.0[0] < 0 {
                break;
            }
            coeffs[idx] = k;
            dfs(idx + 1, r.clone(), basis, bound, coeffs, out);
            r = &r - &basis[idx];
        }
        coeffs[idx] = 0;
    }
    dfs(0, w.clone(), &basis, bound, &mut coeffs, &mut out);
    Ok(out)
}

/// Band of an admissible dominant weight: the coefficient sum of any
/// expansion in the banding system.
pub fn band_of(g: GroupType, w: &Weight) -> Result<u64> {
    Ok(greedy_expansion(g, w)?.iter().sum())
}

fn combine(basis: &[Weight], coeffs: &[u64], zero: Weight) -> Weight {
    basis
        .iter()
        .zip(coeffs)
        .fold(zero, |acc, (b, &k)| &acc + &b.scaled(k as i64))
}

/// Splits `w` as (band one) + (band b-1). The band-one factor is the
/// highest-index banding weight with a positive greedy coefficient.
pub fn marching_pair(g: GroupType, w: &Weight) -> Result<MarchStep> {
    let b = greedy_expansion(g, w)?;
    let band: u64 = b.iter().sum();
    if band <= 1 {
        return Err(Error::BandTooSmall { band });
    }
    let basis = band_one_irreps(g);
    let i = b.iter().rposition(|&k| k > 0).expect("band > 1");
    let left = basis[i].clone();
    let right = w - &left;
    Ok(MarchStep {
        left,
        right,
        target: w.clone(),
        co_targets: Vec::new(),
        justification: Justification::HighestWeightAdditivity,
        prerequisites: Vec::new(),
        right_decomposition: Vec::new(),
        target_decomposition: Vec::new(),
    })
}

/// Splits `w` into two weights each of band at most `ceil(b/2)`, taking
/// `ceil(b_i/2)` of each greedy coefficient left to right for the first part.
pub fn halfband_split(g: GroupType, w: &Weight) -> Result<(Weight, Weight)> {
    let b = greedy_expansion(g, w)?;
    let band: u64 = b.iter().sum();
    if band <= 1 {
        return Err(Error::BandTooSmall { band });
    }
    let target = band.div_ceil(2);
    let mut taken = 0;
    let first: Vec<u64> = b
        .iter()
        .map(|&k| {
            let take = k.div_ceil(2).min(target - taken);
            taken += take;
            take
        })
        .collect();
    let basis = band_one_irreps(g);
    let mu = combine(&basis, &first, g.zero());
    let nu = w - &mu;
    Ok((mu, nu))
}

/// Order in which every band-one irreducible is determined from the
/// defining representation `V_1`.
pub fn classical_schedule(g: GroupType) -> Vec<MarchStep> {
    let n = g.n;
    let v = |k: usize| g.ones(k);
    let wedge = |k: usize, prereq: Vec<usize>| MarchStep {
        left: v(1),
        right: v(k),
        target: v(k + 1),
        co_targets: Vec::new(),
        justification: Justification::WedgeContainment,
        prerequisites: prereq,
        right_decomposition: Vec::new(),
        target_decomposition: Vec::new(),
    };
    // steps are pushed in order of k, so the step producing V_k has index k - 2
    let prev = |k: usize| if k >= 2 { vec![k - 2] } else { Vec::new() };
    match g.family {
        Family::A => (1..n.saturating_sub(1))
            .map(|k| wedge(k, prev(k)))
            .collect(),
        Family::B if n == 1 => Vec::new(),
        Family::B => (1..n).map(|k| wedge(k, prev(k))).collect(),
        Family::C => {
            // ∧^k V_1 = V_k ⊕ V_{k-2} ⊕ ... ending in V_1 or the trivial rep
            let wedge_parts =
                |k: usize| -> Vec<Weight> { (0..=k / 2).map(|j| v(k - 2 * j)).collect() };
            (1..n)
                .map(|k| {
                    let right_decomposition = wedge_parts(k);
                    let prerequisites = (0..=k / 2)
                        .map(|j| k - 2 * j)
                        .filter(|&m| m >= 2)
                        .map(|m| m - 2)
                        .rev()
                        .collect();
                    MarchStep {
                        left: v(1),
                        right: v(k),
                        target: v(k + 1),
                        co_targets: Vec::new(),
                        justification: Justification::ContractionKernel,
                        prerequisites,
                        right_decomposition,
                        target_decomposition: wedge_parts(k + 1),
                    }
                })
                .collect()
        }
        Family::D => {
            let mut steps: Vec<MarchStep> = (1..n - 1).map(|k| wedge(k, prev(k))).collect();
            let mut spin_minus = g.ones(n);
            spin_minus.0[n - 1] = -1;
            steps.push(MarchStep {
                left: v(1),
                right: v(n - 1),
                target: v(n),
                co_targets: vec![spin_minus.clone()],
                justification: Justification::WedgeContainment,
                prerequisites: prev(n - 1),
                right_decomposition: Vec::new(),
                target_decomposition: vec![v(n), spin_minus],
            });
            steps
        }
    }
}
