//! Closed-form invariant moments of a [`Signal`].

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::signal::{RepSpec, Signal};
use crate::su2::CgTable;
use crate::{c64, CMat, C64};

/// Key of a third-moment block.
pub type Triple = (usize, usize, usize);

/// First, second and third moments in invariant block form.
///
/// * `m1`: the `l = 0` coefficients (length `R_0`).
/// * `m2[l]`: Gram matrix `A_l^* A_l`.
/// * `m3[(l1, l2, l3)]`: `A_{l3}^* P` where `P` projects `A_{l1} ⊗ A_{l2}`
///   onto `V_{l3}`; columns `(r1, r2)` with `r1` outer.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MomentBlocks {
    pub m1: Vec<C64>,
    pub m2: BTreeMap<usize, CMat>,
    pub m3: BTreeMap<Triple, CMat>,
}

pub fn triangle(l1: usize, l2: usize, l3: usize) -> bool {
    l1.abs_diff(l2) <= l3 && l3 <= l1 + l2
}

/// Projection of `A ⊗ B` onto the `V_{l3}` component:
/// `out[m3, (r1, r2)] = Σ <l1 m1 l2 m2 | l3 m3> A[m1, r1] B[m2, r2]`.
///
/// `None` when the selection rule fails or the table does not cover
/// `(l1, l2)`.
pub fn cg_project(a: &CMat, b: &CMat, l3: usize, table: &CgTable) -> Option<CMat> {
    let l1 = (a.nrows().checked_sub(1)?) / 2;
    let l2 = (b.nrows().checked_sub(1)?) / 2;
    if !triangle(l1, l2, l3) || l1.max(l2) > table.max_l() {
        return None;
    }
    let (r1, r2) = (a.ncols(), b.ncols());
    let mut out = CMat::zeros(2 * l3 + 1, r1 * r2);
    let (j1, j2, j3) = (l1 as i64, l2 as i64, l3 as i64);
    for m3 in -j3..=j3 {
        let row = (m3 + j3) as usize;
        for m1 in (-j1).max(m3 - j2)..=j1.min(m3 + j2) {
            let m2 = m3 - m1;
            let c = table.cg(l1, m1, l2, m2, l3, m3);
            if c == 0.0 {
                continue;
            }
            let i1 = (m1 + j1) as usize;
            let i2 = (m2 + j2) as usize;
            for p in 0..r1 {
                let x = a[(i1, p)] * c;
                for q in 0..r2 {
                    out[(row, p * r2 + q)] += x * b[(i2, q)];
                }
            }
        }
    }
    Some(out)
}

/// Sparse Clebsch–Gordan pattern of one projection `V_l1 ⊗ V_l2 → V_l3`,
/// for repeated application to blocks of fixed shape.
#[derive(Debug, Clone)]
pub struct Projector {
    pub l1: usize,
    pub l2: usize,
    pub l3: usize,
    /// `(row m3, row m1, row m2, coefficient)`.
    entries: Vec<(usize, usize, usize, f64)>,
}

impl Projector {
    pub fn new(l1: usize, l2: usize, l3: usize, table: &CgTable) -> Option<Self> {
        if !triangle(l1, l2, l3) || l1.max(l2) > table.max_l() {
            return None;
        }
        let (j1, j2, j3) = (l1 as i64, l2 as i64, l3 as i64);
        let mut entries = Vec::new();
        for m3 in -j3..=j3 {
            for m1 in (-j1).max(m3 - j2)..=j1.min(m3 + j2) {
                let m2 = m3 - m1;
                let c = table.cg(l1, m1, l2, m2, l3, m3);
                if c != 0.0 {
                    entries.push((
                        (m3 + j3) as usize,
                        (m1 + j1) as usize,
                        (m2 + j2) as usize,
                        c,
                    ));
                }
            }
        }
        Some(Projector {
            l1,
            l2,
            l3,
            entries,
        })
    }

    /// Nonzero coefficients as `(row m3, row m1, row m2, value)`.
    pub fn entries(&self) -> &[(usize, usize, usize, f64)] {
        &self.entries
    }

    /// Projection of `a ⊗ b` written row-major into `out`:
    /// `out[m3 * (r1 r2) + r1' r2 + r2']`.
    pub fn apply_into(&self, a: &CMat, b: &CMat, out: &mut Vec<C64>) {
        let (r1, r2) = (a.ncols(), b.ncols());
        let (n1, n2) = (a.nrows(), b.nrows());
        let width = r1 * r2;
        out.clear();
        out.resize((2 * self.l3 + 1) * width, c64(0.0, 0.0));
        let (a, b) = (a.as_slice(), b.as_slice());
        for &(row, i1, i2, c) in &self.entries {
            let dst = &mut out[row * width..(row + 1) * width];
            for p in 0..r1 {
                let x = a[i1 + n1 * p] * c;
                let d = &mut dst[p * r2..(p + 1) * r2];
                for (q, z) in d.iter_mut().enumerate() {
                    *z += x * b[i2 + n2 * q];
                }
            }
        }
    }
}

pub fn moment1(f: &Signal) -> Vec<C64> {
    f.block(0)
        .map_or_else(Vec::new, |a| a.iter().copied().collect())
}

pub fn moment2(f: &Signal) -> BTreeMap<usize, CMat> {
    f.iter().map(|(l, a)| (l, a.adjoint() * a)).collect()
}

/// Every third-moment block allowed by the selection rule, over ordered
/// triples of bands present in `f`.
pub fn moment3(f: &Signal, table: &CgTable) -> Result<BTreeMap<Triple, CMat>> {
    let max_l = f.spec().max_l();
    if max_l > table.max_l() {
        return Err(Error::Parameter(alloc::format!(
            "table covers l <= {}, signal needs {max_l}",
            table.max_l()
        )));
    }
    let mut out = BTreeMap::new();
    for (l1, a1) in f.iter() {
        for (l2, a2) in f.iter() {
            for (l3, a3) in f.iter() {
                if !triangle(l1, l2, l3) {
                    continue;
                }
                let p = cg_project(a1, a2, l3, table).expect("checked above");
                out.insert((l1, l2, l3), a3.adjoint() * p);
            }
        }
    }
    Ok(out)
}

pub fn moments(f: &Signal, table: &CgTable) -> Result<MomentBlocks> {
    Ok(MomentBlocks {
        m1: moment1(f),
        m2: moment2(f),
        m3: moment3(f, table)?,
    })
}

/// Triples that [`moment3`] produces for `spec`.
pub fn expected_triples(spec: &RepSpec) -> Vec<Triple> {
    let ls: Vec<usize> = spec.bands().iter().map(|b| b.0).collect();
    let mut out = Vec::new();
    for &a in &ls {
        for &b in &ls {
            for &c in &ls {
                if triangle(a, b, c) {
                    out.push((a, b, c));
                }
            }
        }
    }
    out
}

fn block(m3: &BTreeMap<Triple, CMat>, key: Triple) -> Result<&CMat> {
    m3.get(&key)
        .ok_or_else(|| Error::Parameter(alloc::format!("missing third-moment block {key:?}")))
}

/// First and second moments from the third.
///
/// The `(0,0,0)` diagonal holds `w |w|^2` for each `l = 0` coefficient `w`,
/// which inverts as `w = z / |z|^{2/3}`. The `(0,l,l)` blocks equal
/// `w_j G_l`, divided out with the largest `|w_j|`.
pub fn recover_m1_m2_from_m3(
    m3: &BTreeMap<Triple, CMat>,
    spec: &RepSpec,
) -> Result<(Vec<C64>, BTreeMap<usize, CMat>)> {
    let r0 = spec.multiplicity(0);
    if r0 == 0 {
        return Err(Error::Unrecoverable("no l = 0 component".into()));
    }
    let b000 = block(m3, (0, 0, 0))?;
    if b000.nrows() != r0 || b000.ncols() != r0 * r0 {
        return Err(Error::Parameter("block (0,0,0) has the wrong shape".into()));
    }
    let m1: Vec<C64> = (0..r0)
        .map(|j| {
            let z = b000[(j, j * r0 + j)];
            let n = z.norm();
            if n == 0.0 {
                c64(0.0, 0.0)
            } else {
                z / n.powf(2.0 / 3.0)
            }
        })
        .collect();
    let (j, pivot) = m1
        .iter()
        .enumerate()
        .max_by(|a, b| {
            a.1.norm()
                .partial_cmp(&b.1.norm())
                .unwrap_or(core::cmp::Ordering::Equal)
        })
        .map(|(j, w)| (j, *w))
        .expect("r0 > 0");
    if pivot.norm() == 0.0 {
        return Err(Error::Unrecoverable("l = 0 component vanishes".into()));
    }
    let mut m2 = BTreeMap::new();
    for &(l, r) in spec.bands() {
        if r == 0 {
            continue;
        }
        let b = block(m3, (0, l, l))?;
        if b.nrows() != r || b.ncols() != r0 * r {
            return Err(Error::Parameter(alloc::format!(
                "block (0,{l},{l}) has the wrong shape"
            )));
        }
        let g = CMat::from_fn(r, r, |p, q| b[(p, j * r + q)] / pivot);
        m2.insert(l, (&g + g.adjoint()) * c64(0.5, 0.0));
    }
    Ok((m1, m2))
}

#[cfg(test)]
mod tests {
    #[test]
    fn projector_matches_cg_project() {
        use crate::signal::{random_signal, RealStructure};
        let spec = RepSpec::uniform(2, 3).unwrap();
        let f = random_signal(&spec, RealStructure::GenericComplex, 4);
        let table = CgTable::new(2);
        let mut buf = Vec::new();
        for (l1, l2, l3) in expected_triples(&spec) {
            let (a, b) = (f.block(l1).unwrap(), f.block(l2).unwrap());
            let dense = cg_project(a, b, l3, &table).unwrap();
            Projector::new(l1, l2, l3, &table)
                .unwrap()
                .apply_into(a, b, &mut buf);
            let w = dense.ncols();
            for m in 0..dense.nrows() {
                for c in 0..w {
                    assert!((dense[(m, c)] - buf[m * w + c]).norm() < 1e-14);
                }
            }
        }
    }

    use super::*;
    use crate::linalg::max_abs;
    use crate::rotation::Rotation;
    use crate::signal::{act, random_signal, RealStructure};
    use crate::su2::wigner_big_d;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn projection_trivial_and_equivariant() {
        let table = CgTable::new(3);
        let a = CMat::from_element(1, 2, c64(2.0, 1.0));
        let b = CMat::from_element(1, 1, c64(0.5, -1.0));
        let p = cg_project(&a, &b, 0, &table).unwrap();
        assert_eq!(p[(0, 0)], c64(2.0, 1.0) * c64(0.5, -1.0));
        assert!(cg_project(&a, &b, 1, &table).is_none());

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = random_signal(
            &RepSpec::uniform(3, 2).unwrap(),
            RealStructure::GenericComplex,
            2,
        );
        for _ in 0..5 {
            let g = Rotation::random(&mut rng);
            for l1 in 0..=3usize {
                for l2 in 0..=3usize {
                    for l3 in l1.abs_diff(l2)..=(l1 + l2).min(3) {
                        let a1 = f.block(l1).unwrap();
                        let a2 = f.block(l2).unwrap();
                        let lhs = cg_project(
                            &(wigner_big_d(l1, &g) * a1),
                            &(wigner_big_d(l2, &g) * a2),
                            l3,
                            &table,
                        )
                        .unwrap();
                        let rhs = wigner_big_d(l3, &g) * cg_project(a1, a2, l3, &table).unwrap();
                        assert!(max_abs(&(lhs - rhs)) < 1e-11);
                    }
                }
            }
        }
    }

    #[test]
    fn l1_self_coupling_is_antisymmetric() {
        let table = CgTable::new(1);
        let f = random_signal(
            &RepSpec::new(alloc::vec![(1, 2)]).unwrap(),
            RealStructure::GenericComplex,
            1,
        );
        let a = f.block(1).unwrap().columns(0, 1).into_owned();
        let b = f.block(1).unwrap().columns(1, 1).into_owned();
        let ab = cg_project(&a, &b, 1, &table).unwrap();
        let ba = cg_project(&b, &a, 1, &table).unwrap();
        assert!(max_abs(&(ab + ba)) < 1e-15);
        assert!(max_abs(&cg_project(&a, &a, 1, &table).unwrap()) < 1e-15);
    }

    #[test]
    fn moments_are_invariant() {
        let table = CgTable::new(3);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let f = random_signal(
            &RepSpec::uniform(3, 2).unwrap(),
            RealStructure::GenericComplex,
            7,
        );
        let m = moments(&f, &table).unwrap();
        assert_eq!(m.m3.len(), expected_triples(f.spec()).len());
        for _ in 0..20 {
            let mg = moments(&act(&Rotation::random(&mut rng), &f), &table).unwrap();
            for (k, v) in &m.m3 {
                assert!(max_abs(&(v - &mg.m3[k])) < 1e-10, "{k:?}");
            }
            for (k, v) in &m.m2 {
                assert!(max_abs(&(v - &mg.m2[k])) < 1e-10);
            }
            for (a, b) in m.m1.iter().zip(&mg.m1) {
                assert!((a - b).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn diagonal_of_trivial_block() {
        let table = CgTable::new(0);
        let f = random_signal(
            &RepSpec::new(alloc::vec![(0, 3)]).unwrap(),
            RealStructure::GenericComplex,
            4,
        );
        let b = &moment3(&f, &table).unwrap()[&(0, 0, 0)];
        for (j, w) in moment1(&f).iter().enumerate() {
            assert!((b[(j, j * 3 + j)] - w * w.norm_sqr()).norm() < 1e-14);
        }
    }

    #[test]
    fn m1_m2_round_trip() {
        let table = CgTable::new(3);
        for seed in 0..100 {
            let spec = RepSpec::uniform(3, 2).unwrap();
            let structure = if seed % 2 == 0 {
                RealStructure::CryoReal
            } else {
                RealStructure::GenericComplex
            };
            let f = random_signal(&spec, structure, seed);
            let m = moments(&f, &table).unwrap();
            let (m1, m2) = recover_m1_m2_from_m3(&m.m3, &spec).unwrap();
            for (a, b) in m1.iter().zip(&m.m1) {
                assert!((a - b).norm() < 1e-9);
            }
            for (l, g) in &m.m2 {
                assert!(max_abs(&(g - &m2[l])) < 1e-9);
            }
        }
    }

    #[test]
    fn m1_m2_needs_trivial_component() {
        let table = CgTable::new(2);
        let spec = RepSpec::uniform(2, 2).unwrap();
        let mut f = random_signal(&spec, RealStructure::CryoReal, 1);
        f.block_mut(0).unwrap().fill(c64(0.0, 0.0));
        let m = moments(&f, &table).unwrap();
        assert!(matches!(
            recover_m1_m2_from_m3(&m.m3, &spec),
            Err(Error::Unrecoverable(_))
        ));
        let one = Signal::new(
            RepSpec::new(alloc::vec![(0, 1)]).unwrap(),
            alloc::vec![CMat::from_element(1, 1, c64(1.0, 0.0))],
        )
        .unwrap();
        let m = moments(&one, &table).unwrap();
        let (m1, _) = recover_m1_m2_from_m3(&m.m3, one.spec()).unwrap();
        assert!((m1[0] - c64(1.0, 0.0)).norm() < 1e-15);
        let no_zero = RepSpec::new(alloc::vec![(1, 3)]).unwrap();
        assert!(recover_m1_m2_from_m3(&BTreeMap::new(), &no_zero).is_err());
    }
}
