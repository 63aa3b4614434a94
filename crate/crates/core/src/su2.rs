//! Representation theory of SU(2)/SO(3): Wigner matrices, Clebsch–Gordan
//! coefficients and the coupling matrices that decompose `V_l1 ⊗ V_l2`.
//!
//! Conventions: ZYZ Euler angles, `D^l_{m'm}(α,β,γ) = e^{-im'α} d^l_{m'm}(β) e^{-imγ}`,
//! Condon–Shortley phases. Row and column `i` of every `(2l+1)`-square
//! matrix corresponds to `m = i - l`.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use num_bigint::{BigInt, BigUint, Sign};
#[allow(unused_imports)]
use num_traits::Float;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::rotation::Rotation;
use crate::{c64, CMat, C64};

const FACT_MAX: usize = 170;

fn factorial(n: usize) -> f64 {
    // exact through 22!, correctly rounded products beyond
    let mut f = 1.0;
    for k in 2..=n {
        f *= k as f64;
    }
    f
}

struct FactTable(Vec<f64>);

impl FactTable {
    fn new(n: usize) -> Self {
        FactTable((0..=n.min(FACT_MAX)).map(factorial).collect())
    }
    fn get(&self, n: i64) -> f64 {
        self.0[n as usize]
    }
}

/// Wigner small-d matrix `d^l(β)` by the explicit factorial sum.
pub fn wigner_d_small(l: usize, beta: f64) -> Result<DMatrix<f64>> {
    if !beta.is_finite() || !(-1e-12..=core::f64::consts::PI + 1e-12).contains(&beta) {
        return Err(Error::Parameter(alloc::format!(
            "beta = {beta} outside [0, π]"
        )));
    }
    if 2 * l + 2 > FACT_MAX {
        return Err(Error::Parameter(alloc::format!("l = {l} too large")));
    }
    Ok(small_d(l, beta))
}

pub(crate) fn small_d(l: usize, beta: f64) -> DMatrix<f64> {
    let n = 2 * l + 1;
    let j = l as i64;
    let fact = FactTable::new(2 * l + 1);
    let (s, c) = (beta / 2.0).sin_cos();
    DMatrix::from_fn(n, n, |row, col| {
        let mp = row as i64 - j;
        let m = col as i64 - j;
        let pre = (fact.get(j + mp) * fact.get(j - mp) * fact.get(j + m) * fact.get(j - m)).sqrt();
        let kmin = 0.max(m - mp);
        let kmax = (j + m).min(j - mp);
        let mut sum = 0.0;
        for k in kmin..=kmax {
            let den =
                fact.get(j + m - k) * fact.get(k) * fact.get(j - k - mp) * fact.get(k - m + mp);
            let sign = if (k - m + mp) % 2 == 0 { 1.0 } else { -1.0 };
            let ce = (2 * j - 2 * k + m - mp) as i32;
            let se = (2 * k - m + mp) as i32;
            sum += sign * c.powi(ce) * s.powi(se) / den;
        }
        pre * sum
    })
}

/// Wigner D-matrix of `g` in the spin-`l` representation (unitary).
pub fn wigner_big_d(l: usize, g: &Rotation) -> CMat {
    let (alpha, beta, gamma) = g.euler_zyz();
    let d = small_d(l, beta);
    let j = l as i64;
    let n = 2 * l + 1;
    let phase = |m: i64, angle: f64| C64::from_polar(1.0, -(m as f64) * angle);
    let pa: Vec<C64> = (0..n).map(|i| phase(i as i64 - j, alpha)).collect();
    let pg: Vec<C64> = (0..n).map(|i| phase(i as i64 - j, gamma)).collect();
    CMat::from_fn(n, n, |r, c| pa[r] * d[(r, c)] * pg[c])
}

/// Wigner D-matrices for `l = 0..=max_l`.
pub fn wigner_big_d_all(max_l: usize, g: &Rotation) -> Vec<CMat> {
    (0..=max_l).map(|l| wigner_big_d(l, g)).collect()
}

fn primes_upto(n: usize) -> Vec<usize> {
    let mut sieve = vec![true; n + 1];
    let mut out = Vec::new();
    for p in 2..=n {
        if sieve[p] {
            out.push(p);
            let mut q = p * p;
            while q <= n {
                sieve[q] = false;
                q += p;
            }
        }
    }
    out
}

/// Exponents of each prime in `k!` (Legendre's formula).
fn factorial_exponents(k: usize, primes: &[usize], out: &mut [i64], sign: i64) {
    for (e, &p) in out.iter_mut().zip(primes) {
        let mut pk = p;
        while pk <= k {
            *e += sign * (k / pk) as i64;
            pk *= p;
        }
    }
}

fn integer_exponents(mut k: usize, primes: &[usize], out: &mut [i64], sign: i64) {
    for (e, &p) in out.iter_mut().zip(primes) {
        while k > 0 && k.is_multiple_of(p) {
            *e += sign;
            k /= p;
        }
    }
}

fn prime_power_product(primes: &[usize], exps: &[i64]) -> BigUint {
    let mut acc = BigUint::one();
    for (&p, &e) in primes.iter().zip(exps) {
        for _ in 0..e {
            acc *= p as u64;
        }
    }
    acc
}

/// `x / y` rounded to f64 from exact big integers.
fn ratio_to_f64(x: &BigUint, y: &BigUint) -> f64 {
    if x.is_zero() {
        return 0.0;
    }
    let shift = 64 + y.bits() as i64 - x.bits() as i64;
    let q = if shift >= 0 {
        (x << shift as usize) / y
    } else {
        x / (y << (-shift) as usize)
    };
    libm::ldexp(q.to_f64().unwrap_or(f64::INFINITY), -shift as i32)
}

/// Clebsch–Gordan coefficient `<l1 m1 l2 m2 | l3 m3>` (Condon–Shortley).
///
/// Racah's closed-form sum is evaluated exactly over the integers, with every
/// factorial ratio kept in prime-factorized form, and rounded once.
pub fn clebsch_gordan(l1: i64, m1: i64, l2: i64, m2: i64, l3: i64, m3: i64) -> f64 {
    if l1 < 0 || l2 < 0 || l3 < 0 {
        return 0.0;
    }
    if m1.abs() > l1 || m2.abs() > l2 || m3.abs() > l3 || m1 + m2 != m3 {
        return 0.0;
    }
    if l3 < (l1 - l2).abs() || l3 > l1 + l2 {
        return 0.0;
    }
    let top = (l1 + l2 + l3 + 1) as usize;
    let primes = primes_upto(top.max(2 * l3 as usize + 1));
    let np = primes.len();

    // squared prefactor, as signed prime exponents
    let mut pre = vec![0i64; np];
    integer_exponents((2 * l3 + 1) as usize, &primes, &mut pre, 1);
    for k in [
        l3 + l1 - l2,
        l3 - l1 + l2,
        l1 + l2 - l3,
        l3 + m3,
        l3 - m3,
        l1 - m1,
        l1 + m1,
        l2 - m2,
        l2 + m2,
    ] {
        factorial_exponents(k as usize, &primes, &mut pre, 1);
    }
    factorial_exponents(top, &primes, &mut pre, -1);

    let kmin = 0.max(l2 - l3 - m1).max(l1 - l3 + m2);
    let kmax = (l1 + l2 - l3).min(l1 - m1).min(l2 + m2);
    let dens: Vec<(i64, Vec<i64>)> = (kmin..=kmax)
        .map(|k| {
            let mut e = vec![0i64; np];
            for f in [
                k,
                l1 + l2 - l3 - k,
                l1 - m1 - k,
                l2 + m2 - k,
                l3 - l2 + m1 + k,
                l3 - l1 - m2 + k,
            ] {
                factorial_exponents(f as usize, &primes, &mut e, 1);
            }
            (k, e)
        })
        .collect();
    if dens.is_empty() {
        return 0.0;
    }
    let common: Vec<i64> = (0..np)
        .map(|i| dens.iter().map(|(_, e)| e[i]).max().unwrap_or(0))
        .collect();
    let mut numer = BigInt::zero();
    for (k, e) in &dens {
        let diff: Vec<i64> = common.iter().zip(e).map(|(c, x)| c - x).collect();
        let term = BigInt::from_biguint(Sign::Plus, prime_power_product(&primes, &diff));
        if k % 2 == 0 {
            numer += term;
        } else {
            numer -= term;
        }
    }
    if numer.is_zero() {
        return 0.0;
    }
    let negative = numer.sign() == Sign::Minus;
    let n_abs = numer.magnitude();

    // value^2 = pre * numer^2 / common^2
    let mut num_exp = vec![0i64; np];
    let mut den_exp = vec![0i64; np];
    for i in 0..np {
        let e = pre[i] - 2 * common[i];
        if e >= 0 {
            num_exp[i] = e;
        } else {
            den_exp[i] = -e;
        }
    }
    let x = prime_power_product(&primes, &num_exp) * n_abs * n_abs;
    let y = prime_power_product(&primes, &den_exp);
    let v = ratio_to_f64(&x, &y).sqrt();
    if negative {
        -v
    } else {
        v
    }
}

/// Clebsch–Gordan coefficients and coupling matrices for all
/// `l1, l2 <= max_l` (hence all `l3 <= 2 max_l`). Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct CgTable {
    max_l: usize,
    couplings: Vec<DMatrix<f64>>,
}

impl CgTable {
    pub fn new(max_l: usize) -> Self {
        let mut couplings = Vec::with_capacity((max_l + 1) * (max_l + 1));
        for l1 in 0..=max_l {
            for l2 in 0..=max_l {
                couplings.push(build_coupling(l1, l2));
            }
        }
        CgTable { max_l, couplings }
    }

    pub fn max_l(&self) -> usize {
        self.max_l
    }

    fn index(&self, l1: usize, l2: usize) -> Result<usize> {
        if l1 > self.max_l || l2 > self.max_l {
            return Err(Error::Parameter(alloc::format!(
                "coupling ({l1}, {l2}) outside table range max_l = {}",
                self.max_l
            )));
        }
        Ok(l1 * (self.max_l + 1) + l2)
    }

    /// Coupling matrix `C` with `D^l1 ⊗ D^l2 = C (⊕_l3 D^l3) C^T`.
    ///
    /// Rows are indexed by `(m1, m2)` with `m1` outer; columns by `l3`
    /// ascending from `|l1 - l2|`, then `m3` ascending. Real orthogonal.
    pub fn coupling(&self, l1: usize, l2: usize) -> Result<&DMatrix<f64>> {
        Ok(&self.couplings[self.index(l1, l2)?])
    }

    /// Table lookup of `<l1 m1 l2 m2 | l3 m3>`; zero outside the selection
    /// rules and outside the table.
    pub fn cg(&self, l1: usize, m1: i64, l2: usize, m2: i64, l3: usize, m3: i64) -> f64 {
        let (li1, li2, li3) = (l1 as i64, l2 as i64, l3 as i64);
        if m1.abs() > li1 || m2.abs() > li2 || m3.abs() > li3 || m1 + m2 != m3 {
            return 0.0;
        }
        if l3 < l1.abs_diff(l2) || l3 > l1 + l2 {
            return 0.0;
        }
        let Ok(idx) = self.index(l1, l2) else {
            return 0.0;
        };
        let c = &self.couplings[idx];
        let row = ((m1 + li1) * (2 * li2 + 1) + (m2 + li2)) as usize;
        let lmin = l1.abs_diff(l2);
        let col = l3 * l3 - lmin * lmin + (m3 + li3) as usize;
        c[(row, col)]
    }

    /// All coupling matrices concatenated row-major, in `(l1, l2)` order.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for c in &self.couplings {
            for r in 0..c.nrows() {
                for k in 0..c.ncols() {
                    out.push(c[(r, k)]);
                }
            }
        }
        out
    }

    /// Rebuilds a table from [`CgTable::to_flat`] output.
    pub fn from_flat(max_l: usize, data: &[f64]) -> Result<Self> {
        let mut couplings = Vec::new();
        let mut pos = 0;
        for l1 in 0..=max_l {
            for l2 in 0..=max_l {
                let n = (2 * l1 + 1) * (2 * l2 + 1);
                let end = pos + n * n;
                if end > data.len() {
                    return Err(Error::Parameter(alloc::format!(
                        "flat table truncated at ({l1}, {l2})"
                    )));
                }
                couplings.push(DMatrix::from_row_slice(n, n, &data[pos..end]));
                pos = end;
            }
        }
        if pos != data.len() {
            return Err(Error::Parameter(alloc::format!(
                "flat table has {} trailing values",
                data.len() - pos
            )));
        }
        Ok(CgTable { max_l, couplings })
    }
}

fn build_coupling(l1: usize, l2: usize) -> DMatrix<f64> {
    let (n1, n2) = (2 * l1 + 1, 2 * l2 + 1);
    let n = n1 * n2;
    let mut c = DMatrix::zeros(n, n);
    let mut col = 0;
    for l3 in l1.abs_diff(l2)..=l1 + l2 {
        for m3 in -(l3 as i64)..=l3 as i64 {
            for i1 in 0..n1 {
                let m1 = i1 as i64 - l1 as i64;
                let m2 = m3 - m1;
                if m2.abs() > l2 as i64 {
                    continue;
                }
                let i2 = (m2 + l2 as i64) as usize;
                c[(i1 * n2 + i2, col)] =
                    clebsch_gordan(l1 as i64, m1, l2 as i64, m2, l3 as i64, m3);
            }
            col += 1;
        }
    }
    c
}

/// Complex view of the coupling matrix for `(l1, l2)`.
pub fn coupling_matrix(l1: usize, l2: usize, table: &CgTable) -> Result<CMat> {
    Ok(table.coupling(l1, l2)?.map(|x| c64(x, 0.0)))
}

/// Unitary change of basis from real spherical harmonics to the complex
/// Condon–Shortley basis: column `k` holds the complex coefficients of the
/// real harmonic with index `k - l`. `U^* D^l(g) U` is real orthogonal.
pub fn real_basis(l: usize) -> CMat {
    let n = 2 * l + 1;
    let j = l as i64;
    let h = core::f64::consts::FRAC_1_SQRT_2;
    let mut u = CMat::zeros(n, n);
    let idx = |m: i64| (m + j) as usize;
    u[(idx(0), idx(0))] = c64(1.0, 0.0);
    for p in 1..=j {
        let sign = if p % 2 == 0 { 1.0 } else { -1.0 };
        // real harmonic with index +p
        u[(idx(-p), idx(p))] = c64(h, 0.0);
        u[(idx(p), idx(p))] = c64(sign * h, 0.0);
        // real harmonic with index -p
        u[(idx(-p), idx(-p))] = c64(0.0, h);
        u[(idx(p), idx(-p))] = c64(0.0, -sign * h);
    }
    u
}

/// Maps spherical-basis coordinates of `V_1` to Cartesian `(x, y, z)`:
/// `R(g) = T D^1(g) T^*` with `R` the active rotation matrix.
pub fn spherical_to_cartesian() -> CMat {
    let h = core::f64::consts::FRAC_1_SQRT_2;
    // columns are the spherical unit vectors e_{-1}, e_0, e_{+1}
    CMat::from_row_slice(
        3,
        3,
        &[
            c64(h, 0.0),
            c64(0.0, 0.0),
            c64(-h, 0.0),
            c64(0.0, -h),
            c64(0.0, 0.0),
            c64(0.0, -h),
            c64(0.0, 0.0),
            c64(1.0, 0.0),
            c64(0.0, 0.0),
        ],
    )
}
