//! Small dense linear-algebra helpers over complex matrices.

use alloc::vec::Vec;

use nalgebra::{DMatrix, SymmetricEigen};
#[allow(unused_imports)]
use num_traits::Float;

use crate::{c64, CMat, C64};

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

pub fn max_abs(a: &CMat) -> f64 {
    a.iter().fold(0.0, |m, z| m.max(z.norm()))
}

pub fn fro(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn to_complex(a: &DMatrix<f64>) -> CMat {
    a.map(|x| c64(x, 0.0))
}

/// Least-squares solution of `A X = B` via a truncated SVD, with the
/// numerical rank of `A` (singular values above `rtol · σ_max`).
pub fn lstsq(a: &CMat, b: &CMat, rtol: f64) -> (CMat, usize) {
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.iter().fold(0.0f64, |m, &s| m.max(s));
    let cut = rtol * smax;
    let rank = svd
        .singular_values
        .iter()
        .filter(|&&s| s > cut && s > 0.0)
        .count();
    let u = svd.u.as_ref().expect("u requested");
    let vt = svd.v_t.as_ref().expect("v_t requested");
    let k = svd.singular_values.len();
    let mut x = CMat::zeros(a.ncols(), b.ncols());
    let ub = u.adjoint() * b;
    for i in 0..k {
        let s = svd.singular_values[i];
        if s > cut && s > 0.0 {
            let row = ub.row(i) / c64(s, 0.0);
            x += vt.row(i).adjoint() * row;
        }
    }
    (x, rank)
}

/// Moore–Penrose pseudo-inverse with relative cutoff `rtol`.
pub fn pinv(a: &CMat, rtol: f64) -> CMat {
    lstsq(a, &CMat::identity(a.nrows(), a.nrows()), rtol).0
}

/// Singular values, descending.
pub fn singular_values(a: &CMat) -> Vec<f64> {
    let mut s: Vec<f64> = a
        .clone()
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .collect();
    s.sort_by(|x, y| y.partial_cmp(x).unwrap_or(core::cmp::Ordering::Equal));
    s
}

/// 2-norm condition number; infinite for singular or empty input.
pub fn condition_number(a: &CMat) -> f64 {
    let s = singular_values(a);
    match (s.first(), s.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        _ => f64::INFINITY,
    }
}

/// Eigenpairs of a Hermitian matrix, eigenvalues descending.
pub fn hermitian_eigen(a: &CMat) -> (Vec<f64>, CMat) {
    let h = (a + a.adjoint()) * c64(0.5, 0.0);
    let eig = SymmetricEigen::new(h);
    let n = a.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[j]
            .partial_cmp(&eig.eigenvalues[i])
            .unwrap_or(core::cmp::Ordering::Equal)
    });
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = CMat::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (vals, vecs)
}

/// Real symmetric eigen-decomposition, eigenvalues descending.
pub fn real_symmetric_eigen(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let h = (a + a.transpose()) * 0.5;
    let eig = SymmetricEigen::new(h);
    let n = a.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[j]
            .partial_cmp(&eig.eigenvalues[i])
            .unwrap_or(core::cmp::Ordering::Equal)
    });
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (vals, vecs)
}

pub fn det3(m: &CMat) -> C64 {
    m[(0, 0)] * (m[(1, 1)] * m[(2, 2)] - m[(1, 2)] * m[(2, 1)])
        - m[(0, 1)] * (m[(1, 0)] * m[(2, 2)] - m[(1, 2)] * m[(2, 0)])
        + m[(0, 2)] * (m[(1, 0)] * m[(2, 1)] - m[(1, 1)] * m[(2, 0)])
}

pub fn det3_real(m: &DMatrix<f64>) -> f64 {
    m[(0, 0)] * (m[(1, 1)] * m[(2, 2)] - m[(1, 2)] * m[(2, 1)])
        - m[(0, 1)] * (m[(1, 0)] * m[(2, 2)] - m[(1, 2)] * m[(2, 0)])
        + m[(0, 2)] * (m[(1, 0)] * m[(2, 1)] - m[(1, 1)] * m[(2, 0)])
}

/// Nearest proper rotation (det +1) to a real 3×3 matrix.
pub fn nearest_rotation(m: &DMatrix<f64>) -> DMatrix<f64> {
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("u requested");
    let vt = svd.v_t.expect("v_t requested");
    let mut r = &u * &vt;
    if det3_real(&r) < 0.0 {
        let mut fix = DMatrix::identity(3, 3);
        fix[(2, 2)] = -1.0;
        r = &u * fix * &vt;
    }
    r
}

/// Takagi factorization `S = W^T W` with `W` real orthogonal up to phases,
/// for a symmetric unitary `S`. Returns `W` unitary.
///
/// `S = X + iY` with `X`, `Y` real symmetric and commuting, so a generic real
/// combination `X + tY` shares their eigenvectors.
pub fn takagi_symmetric_unitary(s: &CMat) -> CMat {
    let n = s.nrows();
    let sym = (s + s.transpose()) * c64(0.5, 0.0);
    let x = sym.map(|z| z.re);
    let y = sym.map(|z| z.im);
    let mut best: Option<(f64, DMatrix<f64>)> = None;
    for &t in &[
        0.618_033_988_75,
        1.324_717_957_24,
        -0.377_964_473,
        2.236_067_977_5,
    ] {
        let (_, o) = real_symmetric_eigen(&(&x + &y * t));
        // residual of simultaneous diagonalization
        let dx = o.transpose() * &x * &o;
        let dy = o.transpose() * &y * &o;
        let mut off = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    off += dx[(i, j)].powi(2) + dy[(i, j)].powi(2);
                }
            }
        }
        if best.as_ref().is_none_or(|(b, _)| off < *b) {
            best = Some((off, o));
        }
    }
    let o = best.expect("at least one trial").1;
    let dx = o.transpose() * &x * &o;
    let dy = o.transpose() * &y * &o;
    // S = O diag(e^{iθ}) O^T = W^T W with W = diag(e^{iθ/2}) O^T
    let mut w = to_complex(&o.transpose());
    for i in 0..n {
        let half = C64::from_polar(1.0, dy[(i, i)].atan2(dx[(i, i)]) / 2.0);
        for j in 0..n {
            w[(i, j)] *= half;
        }
    }
    w
}
