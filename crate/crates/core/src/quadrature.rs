//! Haar quadrature on SO(3) and the brute-force moment oracle.
//!
//! The oracle integrates moment entries of `g · f` directly and never touches
//! the Racah Clebsch–Gordan code: the coupling constants it needs are
//! themselves obtained from integrals of Wigner matrix entries.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::moments::{triangle, MomentBlocks, Triple};
use crate::rotation::Rotation;
use crate::signal::Signal;
use crate::su2::wigner_big_d_all;
use crate::{c64, CMat, C64};

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        dp = if d != 0.0 { d } else { dp };
        let weight = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = weight;
        w[n - 1 - i] = weight;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, z);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Weighted rotations integrating band-limited functions against the
/// normalized Haar measure.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub nodes: Vec<(Rotation, f64)>,
    /// Products of Wigner entries with total degree up to this are exact.
    pub degree: usize,
}

/// Product rule exact for products of `d` Wigner entries of degree `<= l_max`.
pub fn build_quadrature(l_max: usize, d: usize) -> Result<QuadratureRule> {
    if l_max == 0 || d == 0 {
        return Err(Error::Parameter(
            "quadrature needs L >= 1 and d >= 1".into(),
        ));
    }
    Ok(quadrature_of_degree(l_max * d))
}

/// Equispaced `α, γ` with `2·degree + 1` points and Gauss–Legendre in
/// `cos β` with `degree + 1` nodes.
pub fn quadrature_of_degree(degree: usize) -> QuadratureRule {
    let n = 2 * degree + 1;
    let (x, w) = gauss_legendre(degree + 1);
    let mut nodes = Vec::with_capacity(n * n * x.len());
    let scale = 1.0 / (2.0 * (n * n) as f64);
    for (xb, wb) in x.iter().zip(&w) {
        let beta = xb.clamp(-1.0, 1.0).acos();
        for i in 0..n {
            let alpha = 2.0 * PI * i as f64 / n as f64;
            for j in 0..n {
                let gamma = 2.0 * PI * j as f64 / n as f64;
                nodes.push((Rotation::from_euler_zyz(alpha, beta, gamma), wb * scale));
            }
        }
    }
    QuadratureRule { nodes, degree }
}

impl QuadratureRule {
    /// `∫ h(g) dg`.
    pub fn integrate<F: FnMut(&Rotation) -> C64>(&self, mut h: F) -> C64 {
        self.nodes.iter().map(|(g, w)| h(g) * *w).sum()
    }

    /// Fourier coefficient `∫ h(g) D^l(g)^* dg`.
    pub fn fourier<F: FnMut(&Rotation) -> C64>(&self, l: usize, mut h: F) -> CMat {
        let n = 2 * l + 1;
        let mut out = CMat::zeros(n, n);
        for (g, w) in &self.nodes {
            let d = crate::su2::wigner_big_d(l, g);
            out += d.adjoint() * (h(g) * *w);
        }
        out
    }

    fn require(&self, degree: usize) -> Result<()> {
        if self.degree < degree {
            return Err(Error::Parameter(alloc::format!(
                "quadrature degree {} below required {degree}",
                self.degree
            )));
        }
        Ok(())
    }

    fn transformed(&self, f: &Signal) -> impl Iterator<Item = (f64, Vec<CMat>)> + '_ {
        let ls: Vec<usize> = f.spec().bands().iter().map(|b| b.0).collect();
        let max_l = f.spec().max_l();
        let blocks: Vec<CMat> = f.blocks().to_vec();
        self.nodes.iter().map(move |(g, w)| {
            let d = wigner_big_d_all(max_l, g);
            let y = ls.iter().zip(&blocks).map(|(&l, a)| &d[l] * a).collect();
            (*w, y)
        })
    }
}

/// Coupling constants of `V_l1 ⊗ V_l2 → V_l3` from Haar integrals.
///
/// `I(m; k) = ∫ D^l1_{m1 k1} D^l2_{m2 k2} conj(D^l3_{m3 k3}) = c(m) c(k) / (2 l3 + 1)`,
/// so with the reference index `k* = (l1, l3 - l1, l3)`, whose coefficient
/// is positive in the Condon–Shortley convention, `c(k*)^2 = N3 I(k*; k*)`.
/// Returns `c(k*)`.
pub fn reference_coupling(l1: usize, l2: usize, l3: usize, rule: &QuadratureRule) -> Result<f64> {
    if !triangle(l1, l2, l3) {
        return Ok(0.0);
    }
    rule.require(l1 + l2 + l3)?;
    let (j1, j3) = (l1 as i64, l3 as i64);
    let idx1 = 2 * l1; // m1 = l1
    let idx2 = (j3 - j1 + l2 as i64) as usize; // m2 = l3 - l1
    let idx3 = 2 * l3; // m3 = l3
    let v = rule.integrate(|g| {
        let d1 = crate::su2::wigner_big_d(l1, g);
        let d2 = crate::su2::wigner_big_d(l2, g);
        let d3 = crate::su2::wigner_big_d(l3, g);
        d1[(idx1, idx1)] * d2[(idx2, idx2)] * d3[(idx3, idx3)].conj()
    });
    Ok(((2 * l3 + 1) as f64 * v.re).max(0.0).sqrt())
}

/// Reference moments by direct integration over `rule`.
///
/// * `d = 1`: `m1 = ∫ g·A_0`.
/// * `d = 2`: `G_l[r', r] = N_l ∫ (g·A_l)[l, r] conj((g·A_l)[l, r'])`.
/// * `d = 3`: `M[r3, (r1, r2)] = N3 / c(k*) · ∫ (g·A_l1)[k1, r1] (g·A_l2)[k2, r2] conj((g·A_l3)[k3, r3])`
///   at the reference index `k*` of [`reference_coupling`].
///
/// Only the requested moment is filled in.
pub fn oracle_moment(f: &Signal, d: usize, rule: &QuadratureRule) -> Result<MomentBlocks> {
    let max_l = f.spec().max_l();
    if !(1..=3).contains(&d) {
        return Err(Error::Parameter(alloc::format!(
            "moment degree {d} not in 1..=3"
        )));
    }
    rule.require(d * max_l)?;
    let bands: Vec<(usize, usize)> = f.spec().bands().to_vec();
    let mut out = MomentBlocks::default();
    match d {
        1 => {
            let mut acc: Vec<CMat> = bands
                .iter()
                .map(|&(l, r)| CMat::zeros(2 * l + 1, r))
                .collect();
            for (w, y) in rule.transformed(f) {
                for (a, yl) in acc.iter_mut().zip(&y) {
                    *a += yl * c64(w, 0.0);
                }
            }
            if let Some(i) = f.spec().position(0) {
                out.m1 = acc[i].iter().copied().collect();
            }
        }
        2 => {
            let mut acc: Vec<CMat> = bands.iter().map(|&(_, r)| CMat::zeros(r, r)).collect();
            for (w, y) in rule.transformed(f) {
                for ((a, yl), &(l, r)) in acc.iter_mut().zip(&y).zip(&bands) {
                    let top = 2 * l;
                    for p in 0..r {
                        for q in 0..r {
                            a[(p, q)] += yl[(top, q)] * yl[(top, p)].conj() * w;
                        }
                    }
                }
            }
            for (a, &(l, _)) in acc.into_iter().zip(&bands) {
                out.m2.insert(l, a * c64((2 * l + 1) as f64, 0.0));
            }
        }
        _ => {
            let mut keys: Vec<(Triple, [usize; 3], [usize; 3])> = Vec::new();
            for (i1, &(l1, _)) in bands.iter().enumerate() {
                for (i2, &(l2, _)) in bands.iter().enumerate() {
                    for (i3, &(l3, _)) in bands.iter().enumerate() {
                        if triangle(l1, l2, l3) {
                            // row indices of k* = (l1, l3 - l1, l3)
                            let k = [2 * l1, (l3 as i64 - l1 as i64 + l2 as i64) as usize, 2 * l3];
                            keys.push(((l1, l2, l3), [i1, i2, i3], k));
                        }
                    }
                }
            }
            let mut acc: Vec<CMat> = keys
                .iter()
                .map(|&(_, [i1, i2, i3], _)| CMat::zeros(bands[i3].1, bands[i1].1 * bands[i2].1))
                .collect();
            for (w, y) in rule.transformed(f) {
                for (a, &(_, [i1, i2, i3], [k1, k2, k3])) in acc.iter_mut().zip(&keys) {
                    let (y1, y2, y3) = (&y[i1], &y[i2], &y[i3]);
                    let r2 = y2.ncols();
                    for p in 0..y1.ncols() {
                        let x1 = y1[(k1, p)] * w;
                        for q in 0..r2 {
                            let x12 = x1 * y2[(k2, q)];
                            for s in 0..y3.ncols() {
                                a[(s, p * r2 + q)] += x12 * y3[(k3, s)].conj();
                            }
                        }
                    }
                }
            }
            let mut cache: BTreeMap<Triple, f64> = BTreeMap::new();
            for (a, &(key, _, _)) in acc.into_iter().zip(&keys) {
                let c = match cache.get(&key) {
                    Some(&c) => c,
                    None => {
                        let c = reference_coupling(key.0, key.1, key.2, rule)?;
                        cache.insert(key, c);
                        c
                    }
                };
                let n3 = (2 * key.2 + 1) as f64;
                out.m3.insert(key, a * c64(n3 / c, 0.0));
            }
        }
    }
    Ok(out)
}

/// Largest integral `|∫ (g·A_l1)[m1,r1] (g·A_l2)[m2,r2] conj((g·A_l3)[m3,r3])|`
/// over triples violating the selection rule; zero by Schur's lemma.
pub fn selection_leakage(f: &Signal, rule: &QuadratureRule) -> Result<f64> {
    rule.require(3 * f.spec().max_l())?;
    let bands: Vec<(usize, usize)> = f.spec().bands().to_vec();
    let mut forbidden = Vec::new();
    for i1 in 0..bands.len() {
        for i2 in 0..bands.len() {
            for i3 in 0..bands.len() {
                if !triangle(bands[i1].0, bands[i2].0, bands[i3].0) {
                    forbidden.push([i1, i2, i3]);
                }
            }
        }
    }
    let mut acc: Vec<Vec<C64>> = forbidden
        .iter()
        .map(|t| {
            let n: usize = t
                .iter()
                .map(|&i| (2 * bands[i].0 + 1) * bands[i].1)
                .product();
            vec![c64(0.0, 0.0); n]
        })
        .collect();
    for (w, y) in rule.transformed(f) {
        for (a, t) in acc.iter_mut().zip(&forbidden) {
            let (y1, y2, y3) = (&y[t[0]], &y[t[1]], &y[t[2]]);
            let mut idx = 0;
            for u in y1.iter() {
                let uw = *u * w;
                for v in y2.iter() {
                    let uv = uw * v;
                    for z in y3.iter() {
                        a[idx] += uv * z.conj();
                        idx += 1;
                    }
                }
            }
        }
    }
    Ok(acc.iter().flatten().fold(0.0, |m, z| m.max(z.norm())))
}

/// Largest deviation of `(2l+1) ∫ D^l_{mk} conj(D^l'_{m'k'})` from
/// `δ_{ll'} δ_{mm'} δ_{kk'}` over `l, l' <= max_l`.
pub fn schur_orthogonality_error(max_l: usize, rule: &QuadratureRule) -> Result<f64> {
    rule.require(2 * max_l)?;
    let sizes: Vec<usize> = (0..=max_l).map(|l| (2 * l + 1) * (2 * l + 1)).collect();
    let total: usize = sizes.iter().sum();
    let mut gram = CMat::zeros(total, total);
    let mut v = nalgebra::DVector::<C64>::zeros(total);
    for (g, w) in &rule.nodes {
        let d = wigner_big_d_all(max_l, g);
        let mut pos = 0;
        for dl in &d {
            for z in dl.iter() {
                v[pos] = *z;
                pos += 1;
            }
        }
        gram.gerc(c64(*w, 0.0), &v, &v, c64(1.0, 0.0));
    }
    let mut err: f64 = 0.0;
    let mut offsets = vec![0usize];
    for s in &sizes {
        offsets.push(offsets.last().unwrap() + s);
    }
    for l in 0..=max_l {
        for l2 in 0..=max_l {
            for i in 0..sizes[l] {
                for j in 0..sizes[l2] {
                    let expect = if l == l2 && i == j { 1.0 } else { 0.0 };
                    let got = gram[(offsets[l] + i, offsets[l2] + j)] * (2 * l + 1) as f64;
                    err = err.max((got - c64(expect, 0.0)).norm());
                }
            }
        }
    }
    Ok(err)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs;
    use crate::moments::moments;
    use crate::signal::{random_signal, RealStructure, RepSpec};
    use crate::su2::{clebsch_gordan, wigner_big_d, CgTable};

    #[test]
    fn legendre_nodes() {
        let (x, w) = gauss_legendre(5);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
        // exact for x^8
        let i: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(8)).sum();
        assert!((i - 2.0 / 9.0).abs() < 1e-14);
        assert!(x.windows(2).all(|p| p[0] > p[1]));
    }

    #[test]
    fn haar_integrals() {
        let rule = build_quadrature(3, 2).unwrap();
        let total: f64 = rule.nodes.iter().map(|n| n.1).sum();
        assert!((total - 1.0).abs() < 1e-13);
        for l in 1..=3 {
            let n = 2 * l + 1;
            let mut mean = CMat::zeros(n, n);
            let mut sq = CMat::zeros(n, n);
            for (g, w) in &rule.nodes {
                let d = wigner_big_d(l, g);
                mean += &d * c64(*w, 0.0);
                sq += d.map(|z| c64(z.norm_sqr() * n as f64 * w, 0.0));
            }
            assert!(max_abs(&mean) < 1e-12);
            assert!(max_abs(&(sq - CMat::from_element(n, n, c64(1.0, 0.0)))) < 1e-12);
        }
        assert!(schur_orthogonality_error(3, &build_quadrature(3, 3).unwrap()).unwrap() < 1e-11);
        assert!(build_quadrature(0, 3).is_err());
    }

    #[test]
    fn quadrature_couplings_match_racah() {
        let rule = quadrature_of_degree(9);
        for (l1, l2, l3) in [(1, 1, 2), (1, 1, 0), (2, 1, 2), (3, 3, 3), (2, 3, 1)] {
            let c = reference_coupling(l1, l2, l3, &rule).unwrap();
            let r = clebsch_gordan(
                l1 as i64,
                l1 as i64,
                l2 as i64,
                l3 as i64 - l1 as i64,
                l3 as i64,
                l3 as i64,
            );
            assert!((c - r).abs() < 1e-12, "{l1} {l2} {l3}");
        }
        // <1 0 1 0 | 2 0> and <1 1 1 -1 | 0 0> through the full integral relation
        let i = rule.integrate(|g| {
            let d = wigner_big_d(1, g);
            let d2 = wigner_big_d(2, g);
            d[(1, 2)] * d[(1, 2)] * d2[(2, 4)].conj()
        });
        let c_ref = reference_coupling(1, 1, 2, &rule).unwrap();
        assert!((5.0 * i.re / c_ref - (2.0f64 / 3.0).sqrt()).abs() < 1e-12);
        let c00 = reference_coupling(1, 1, 0, &rule).unwrap();
        assert!((c00 - 1.0 / 3f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn oracle_matches_closed_form() {
        let table = CgTable::new(2);
        let spec = RepSpec::uniform(2, 2).unwrap();
        let f = random_signal(&spec, RealStructure::GenericComplex, 3);
        let m = moments(&f, &table).unwrap();
        let rule = build_quadrature(2, 3).unwrap();
        let o1 = oracle_moment(&f, 1, &rule).unwrap();
        for (a, b) in o1.m1.iter().zip(&m.m1) {
            assert!((a - b).norm() < 1e-12);
        }
        let o2 = oracle_moment(&f, 2, &rule).unwrap();
        for (l, g) in &m.m2 {
            assert!(max_abs(&(g - &o2.m2[l])) < 1e-11);
        }
        let o3 = oracle_moment(&f, 3, &rule).unwrap();
        assert_eq!(o3.m3.len(), m.m3.len());
        for (k, v) in &m.m3 {
            assert!(max_abs(&(v - &o3.m3[k])) < 1e-9, "{k:?}");
        }
        assert!(selection_leakage(&f, &rule).unwrap() < 1e-12);
        assert!(oracle_moment(&f, 3, &build_quadrature(2, 2).unwrap()).is_err());
    }
}
