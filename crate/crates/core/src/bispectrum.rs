//! Fourier-side picture: bispectrum blocks on `L²(SO(3))`, their inversion,
//! and the abelian reference case on the circle.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::linalg::{condition_number, kron};
use crate::rotation::Rotation;
use crate::su2::{wigner_big_d, CgTable};
use crate::{c64, CMat, C64};

/// Fourier coefficients `F_l = ∫ f(g) D^l(g)^* dg` for `l = 0..=L`.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierCoeffs {
    blocks: Vec<CMat>,
}

impl FourierCoeffs {
    pub fn new(blocks: Vec<CMat>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::Parameter(
                "at least the l = 0 coefficient is required".into(),
            ));
        }
        for (l, b) in blocks.iter().enumerate() {
            if b.nrows() != 2 * l + 1 || b.ncols() != 2 * l + 1 {
                return Err(Error::Parameter(alloc::format!(
                    "coefficient {l} is not {0}x{0}",
                    2 * l + 1
                )));
            }
        }
        Ok(FourierCoeffs { blocks })
    }

    pub fn band_limit(&self) -> usize {
        self.blocks.len() - 1
    }

    pub fn get(&self, l: usize) -> Option<&CMat> {
        self.blocks.get(l)
    }

    pub fn blocks(&self) -> &[CMat] {
        &self.blocks
    }

    /// Coefficients of `h ↦ f(g^{-1} h)`: `F_l D^l(g)^*`.
    pub fn translate(&self, g: &Rotation) -> FourierCoeffs {
        let blocks = self
            .blocks
            .iter()
            .enumerate()
            .map(|(l, f)| f * wigner_big_d(l, g).adjoint())
            .collect();
        FourierCoeffs { blocks }
    }

    /// `f(g) = Σ_l (2l+1) tr(F_l D^l(g))`.
    pub fn evaluate(&self, g: &Rotation) -> C64 {
        self.blocks
            .iter()
            .enumerate()
            .map(|(l, f)| (f * wigner_big_d(l, g)).trace() * (2 * l + 1) as f64)
            .sum()
    }
}

fn check_band(f: &FourierCoeffs, l1: usize, l2: usize) -> Result<()> {
    if l1 + l2 > f.band_limit() {
        return Err(Error::Parameter(alloc::format!(
            "l1 + l2 = {} exceeds band limit {}",
            l1 + l2,
            f.band_limit()
        )));
    }
    Ok(())
}

fn block_diagonal(parts: &[&CMat]) -> CMat {
    let n = parts.iter().map(|p| p.nrows()).sum();
    let mut out = CMat::zeros(n, n);
    let mut off = 0;
    for p in parts {
        out.view_mut((off, off), (p.nrows(), p.ncols()))
            .copy_from(p);
        off += p.nrows();
    }
    out
}

/// `F(V_l1 ⊗ V_l2) = C (⊕_l3 F_l3) C^*`.
pub fn tensor_fourier(f: &FourierCoeffs, l1: usize, l2: usize, table: &CgTable) -> Result<CMat> {
    check_band(f, l1, l2)?;
    let c = table.coupling(l1, l2)?.map(|x| c64(x, 0.0));
    let parts: Vec<&CMat> = (l1.abs_diff(l2)..=l1 + l2).map(|l| &f.blocks[l]).collect();
    Ok(&c * block_diagonal(&parts) * c.transpose())
}

/// `a2(V_l1 ⊗ V_l2) = (F_l1 ⊗ F_l2) F(V_l1 ⊗ V_l2)^*`.
pub fn bispectrum_block(f: &FourierCoeffs, l1: usize, l2: usize, table: &CgTable) -> Result<CMat> {
    let t = tensor_fourier(f, l1, l2, table)?;
    Ok(kron(&f.blocks[l1], &f.blocks[l2]) * t.adjoint())
}

/// Every block with `l1 <= l2`, `l1 + l2 <= L`.
pub fn bispectrum(f: &FourierCoeffs, table: &CgTable) -> Result<BTreeMap<(usize, usize), CMat>> {
    let big_l = f.band_limit();
    let mut out = BTreeMap::new();
    for l1 in 0..=big_l {
        for l2 in l1..=big_l - l1 {
            out.insert((l1, l2), bispectrum_block(f, l1, l2, table)?);
        }
    }
    Ok(out)
}

/// Condition numbers above this count as singular.
pub const SINGULAR_CONDITION: f64 = 1e12;

/// Recovers `F_l3` for every `l3` in `|l1-l2|..=l1+l2` from `F_l1`, `F_l2`
/// and the block `a2 = (F_l1 ⊗ F_l2) F(V_l1 ⊗ V_l2)^*`.
pub fn invert_block(
    f1: &CMat,
    f2: &CMat,
    a2: &CMat,
    table: &CgTable,
) -> Result<BTreeMap<usize, CMat>> {
    let l1 = (f1.nrows().saturating_sub(1)) / 2;
    let l2 = (f2.nrows().saturating_sub(1)) / 2;
    let n = f1.nrows() * f2.nrows();
    if a2.nrows() != n || a2.ncols() != n {
        return Err(Error::Parameter(
            "bispectrum block has the wrong shape".into(),
        ));
    }
    for (l, m) in [(l1, f1), (l2, f2)] {
        let condition = condition_number(m);
        if !(condition < SINGULAR_CONDITION) {
            return Err(Error::Singular { ell: l, condition });
        }
    }
    let k = kron(f1, f2);
    let t_adj = k.lu().solve(a2).ok_or(Error::Singular {
        ell: l1,
        condition: f64::INFINITY,
    })?;
    let c = table.coupling(l1, l2)?.map(|x| c64(x, 0.0));
    let diag = c.transpose() * t_adj.adjoint() * &c;
    let mut out = BTreeMap::new();
    let mut off = 0;
    for l3 in l1.abs_diff(l2)..=l1 + l2 {
        let m = 2 * l3 + 1;
        out.insert(l3, diag.view((off, off), (m, m)).into_owned());
        off += m;
    }
    Ok(out)
}

/// Band-limited function on the circle, `f_n` for `n = -b..=b`.
#[derive(Debug, Clone, PartialEq)]
pub struct S1Signal {
    coeffs: Vec<C64>,
}

impl S1Signal {
    pub fn new(coeffs: Vec<C64>) -> Result<Self> {
        if coeffs.len().is_multiple_of(2) {
            return Err(Error::Parameter("need 2b+1 coefficients".into()));
        }
        Ok(S1Signal { coeffs })
    }

    pub fn zeros(band: usize) -> Self {
        S1Signal {
            coeffs: alloc::vec![c64(0.0, 0.0); 2 * band + 1],
        }
    }

    /// Places the listed `(n, f_n)` in a zero signal of band `band`.
    pub fn from_sparse(band: usize, entries: &[(i64, C64)]) -> Result<Self> {
        let mut s = Self::zeros(band);
        for &(n, v) in entries {
            *s.get_mut(n).ok_or_else(|| {
                Error::Parameter(alloc::format!("frequency {n} outside band {band}"))
            })? = v;
        }
        Ok(s)
    }

    pub fn band(&self) -> usize {
        self.coeffs.len() / 2
    }

    pub fn get(&self, n: i64) -> Option<C64> {
        let b = self.band() as i64;
        (n.abs() <= b).then(|| self.coeffs[(n + b) as usize])
    }

    pub fn get_mut(&mut self, n: i64) -> Option<&mut C64> {
        let b = self.band() as i64;
        if n.abs() <= b {
            Some(&mut self.coeffs[(n + b) as usize])
        } else {
            None
        }
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    /// `f_n ↦ e^{inθ} f_n`.
    pub fn rotate(&self, theta: f64) -> S1Signal {
        let b = self.band() as i64;
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, z)| z * C64::from_polar(1.0, (i as i64 - b) as f64 * theta))
            .collect();
        S1Signal { coeffs }
    }

    pub fn norm(&self) -> f64 {
        self.coeffs.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// `b(k, l) = f_k f_l conj(f_{k+l})` for `|k|, |l|, |k+l| <= b`.
pub fn s1_bispectrum(f: &S1Signal) -> BTreeMap<(i64, i64), C64> {
    let b = f.band() as i64;
    let mut out = BTreeMap::new();
    for k in -b..=b {
        for l in -b..=b {
            if let Some(s) = f.get(k + l) {
                out.insert((k, l), f.get(k).unwrap() * f.get(l).unwrap() * s.conj());
            }
        }
    }
    out
}

fn lookup(b: &BTreeMap<(i64, i64), C64>, k: i64, l: i64) -> Result<C64> {
    b.get(&(k, l))
        .copied()
        .ok_or_else(|| Error::Parameter(alloc::format!("bispectrum entry ({k}, {l}) missing")))
}

/// Frequency marching from `f_0` and `f_1`:
/// `f_{n+1} = conj(b(1, n) / (f_1 f_n))`, and for negative frequencies
/// `f_{-1} = b(1, -1) / (f_1 conj(f_0))`, then
/// `f_{-(n+1)} = conj(b(-1, -n) / (f_{-1} f_{-n}))`.
pub fn s1_march(b: &BTreeMap<(i64, i64), C64>, f0: C64, f1: C64) -> Result<S1Signal> {
    let band = b.keys().map(|k| k.0.abs()).max().unwrap_or(0);
    let mut out = S1Signal::zeros(band as usize);
    *out.get_mut(0).expect("band >= 0") = f0;
    if band == 0 {
        return Ok(out);
    }
    let scale = f0.norm().max(f1.norm());
    let tiny = 1e-13 * scale.max(f64::MIN_POSITIVE);
    if f1.norm() <= tiny {
        return Err(Error::MarchingBreak { index: 1 });
    }
    *out.get_mut(1).expect("band >= 1") = f1;
    for n in 1..band {
        let fn_ = out.get(n).expect("in band");
        if fn_.norm() <= tiny {
            return Err(Error::MarchingBreak { index: n });
        }
        *out.get_mut(n + 1).expect("in band") = (lookup(b, 1, n)? / (f1 * fn_)).conj();
    }
    if f0.norm() <= tiny {
        return Err(Error::MarchingBreak { index: 0 });
    }
    let fm1 = lookup(b, 1, -1)? / (f1 * f0.conj());
    *out.get_mut(-1).expect("band >= 1") = fm1;
    for n in 1..band {
        let fn_ = out.get(-n).expect("in band");
        if fn_.norm() <= tiny || fm1.norm() <= tiny {
            return Err(Error::MarchingBreak { index: -n });
        }
        *out.get_mut(-(n + 1)).expect("in band") = (lookup(b, -1, -n)? / (fm1 * fn_)).conj();
    }
    Ok(out)
}

/// Marching with `f_0` and `|f_1|` read off the bispectrum and the phase of
/// `f_1` fixed at zero.
pub fn s1_recover(b: &BTreeMap<(i64, i64), C64>) -> Result<S1Signal> {
    let z = lookup(b, 0, 0)?;
    let f0 = if z.norm() == 0.0 {
        z
    } else {
        z / z.norm().powf(2.0 / 3.0)
    };
    let band = b.keys().map(|k| k.0.abs()).max().unwrap_or(0);
    if band == 0 {
        return s1_march(b, f0, c64(0.0, 0.0));
    }
    if f0.norm() == 0.0 {
        return Err(Error::MarchingBreak { index: 0 });
    }
    let m = (lookup(b, 1, 0)? / f0).re.max(0.0).sqrt();
    s1_march(b, f0, c64(m, 0.0))
}

/// `min_θ ‖rotate(f, θ) - h‖ / ‖f‖` and the minimizing `θ`.
pub fn s1_orbit_distance(f: &S1Signal, h: &S1Signal) -> Result<(f64, f64)> {
    if f.band() != h.band() {
        return Err(Error::Parameter("signals have different bands".into()));
    }
    let scale = f.norm().max(f64::MIN_POSITIVE);
    let dist = |t: f64| {
        let r = f.rotate(t);
        r.coeffs
            .iter()
            .zip(&h.coeffs)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt()
            / scale
    };
    let grid = 720 * (f.band() + 1);
    let step = 2.0 * PI / grid as f64;
    let (mut best_t, mut best) = (0.0, dist(0.0));
    for i in 1..grid {
        let t = i as f64 * step;
        let d = dist(t);
        if d < best {
            best = d;
            best_t = t;
        }
    }
    // golden-section refinement in the bracketing cell
    let (mut a, mut b) = (best_t - step, best_t + step);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..100 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if dist(c) < dist(d) {
            b = d;
        } else {
            a = c;
        }
    }
    let t = (a + b) / 2.0;
    let v = dist(t);
    if v < best {
        Ok((v, t))
    } else {
        Ok((best, best_t))
    }
}

/// A monomial `Π f_{n_i} Π conj(f_{m_j})` as frequency lists.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Monomial {
    pub plain: Vec<i64>,
    pub conjugated: Vec<i64>,
}

impl Monomial {
    pub fn evaluate(&self, f: &S1Signal) -> C64 {
        let mut v = c64(1.0, 0.0);
        for &n in &self.plain {
            v *= f.get(n).unwrap_or_default();
        }
        for &n in &self.conjugated {
            v *= f.get(n).unwrap_or_default().conj();
        }
        v
    }
}

/// All translation-invariant monomials of degree `1..=max_degree` in the
/// coefficients `f_n, conj(f_n)`, `|n| <= band`.
pub fn invariant_monomials(band: usize, max_degree: usize) -> Vec<Monomial> {
    let freqs: Vec<i64> = (-(band as i64)..=band as i64).collect();
    let mut out = Vec::new();
    for deg in 1..=max_degree {
        for plain_count in 0..=deg {
            let plains = multisets(&freqs, plain_count);
            let conjs = multisets(&freqs, deg - plain_count);
            for p in &plains {
                let sp: i64 = p.iter().sum();
                for c in &conjs {
                    if sp == c.iter().sum::<i64>() {
                        out.push(Monomial {
                            plain: p.clone(),
                            conjugated: c.clone(),
                        });
                    }
                }
            }
        }
    }
    out
}

fn multisets(items: &[i64], k: usize) -> Vec<Vec<i64>> {
    fn rec(items: &[i64], k: usize, start: usize, cur: &mut Vec<i64>, out: &mut Vec<Vec<i64>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..items.len() {
            cur.push(items[i]);
            rec(items, k, i, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(items, k, 0, &mut Vec::new(), &mut out);
    out
}

/// Largest difference of the invariant monomials of degree `<= 3`.
pub fn cubic_invariant_gap(f: &S1Signal, h: &S1Signal) -> f64 {
    invariant_monomials(f.band().max(h.band()), 3)
        .iter()
        .map(|m| (m.evaluate(f) - m.evaluate(h)).norm())
        .fold(0.0, f64::max)
}

/// Two signals supported on frequencies `{0, 1, 3}` with equal invariants
/// of degree `<= 3` but different orbits.
pub fn s1_counterexample() -> (S1Signal, S1Signal) {
    let one = c64(1.0, 0.0);
    let a = S1Signal::from_sparse(3, &[(0, one), (1, one), (3, one)]).expect("in band");
    let b = S1Signal::from_sparse(3, &[(0, one), (1, one), (3, c64(0.0, 1.0))]).expect("in band");
    (a, b)
}
