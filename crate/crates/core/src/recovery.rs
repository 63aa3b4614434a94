//! Orbit recovery from the third moment: Gram factorization, resolution of
//! the residual `U(3)`/`O(3)` ambiguity of the `l = 1` block, and frequency
//! marching through `V_1 ⊗ V_{l-1} → V_l`.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use nalgebra::DMatrix;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result, Stage};
use crate::linalg::{
    det3, fro, hermitian_eigen, lstsq, real_symmetric_eigen, takagi_symmetric_unitary,
};
use crate::moments::{cg_project, moment3, recover_m1_m2_from_m3, Triple};
use crate::rotation::Rotation;
use crate::signal::{distance_up_to_group, from_real_view, RealStructure, RepSpec, Signal};
use crate::su2::{spherical_to_cartesian, CgTable};
use crate::{c64, CMat, C64};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecoveryOptions {
    /// Largest relative least-squares residual accepted at each step.
    pub residual_tol: f64,
    /// The `(1,1,1)` block must exceed this multiple of `‖Ã_1‖^3`.
    pub sign_threshold: f64,
    /// Singular values below this multiple of the largest are rank-deficient.
    pub rank_rtol: f64,
}

impl Default for RecoveryOptions {
    fn default() -> Self {
        RecoveryOptions {
            residual_tol: 1e-6,
            sign_threshold: 1e-8,
            rank_rtol: 1e-10,
        }
    }
}

impl RecoveryOptions {
    /// Settings for moments estimated from samples: residuals are reported
    /// but never rejected.
    pub fn empirical() -> Self {
        RecoveryOptions {
            residual_tol: f64::INFINITY,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignChoice {
    Plus,
    Minus,
}

impl SignChoice {
    pub fn symbol(self) -> &'static str {
        match self {
            SignChoice::Plus => "+",
            SignChoice::Minus => "-",
        }
    }
}

/// One marching step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub ell: usize,
    /// `‖B^* Ã_l - M^*‖ / ‖M‖`.
    pub residual: f64,
    pub rank: usize,
    /// Rows of `B`, i.e. `2l + 1`.
    pub rows: usize,
    /// Ratio of the extreme retained singular values of `B`.
    pub condition: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignResolution {
    pub choice: SignChoice,
    pub winner_residual: f64,
    pub loser_residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryReport {
    pub recovered: Signal,
    pub structure: RealStructure,
    /// Top three eigenvalues of the `l = 1` Gram matrix.
    pub gram_eigenvalues: [f64; 3],
    /// Relative residual of the `U(3)` reduction (complex signals only).
    pub unitary_residual: Option<f64>,
    pub sign: SignResolution,
    pub steps: Vec<StepReport>,
    /// Largest relative deviation between the third moment of the recovered
    /// signal and the input, over all blocks.
    pub moment_residual: f64,
    /// Filled by [`RecoveryReport::register`].
    pub align: Option<Rotation>,
    pub rel_error: Option<f64>,
}

impl RecoveryReport {
    /// Aligns the recovered signal with `truth`, recording `g` with
    /// `g · truth ≈ recovered` and the relative error.
    pub fn register(&mut self, truth: &Signal) -> Result<f64> {
        let (g, err) = distance_up_to_group(truth, &self.recovered)?;
        self.align = Some(g);
        self.rel_error = Some(err);
        Ok(err)
    }
}

fn rel(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        num
    }
}

/// A `3 × R_1` factor `Ã_1` with `Ã_1^* Ã_1 = G_1` from the top three
/// eigenpairs. For real-structure input the factor is real in the real
/// harmonic basis (up to the odd-`l` factor `i`).
pub fn factor_gram(g1: &CMat, structure: RealStructure) -> Result<(CMat, [f64; 3])> {
    let r = g1.nrows();
    if r < 3 || g1.ncols() != r {
        return Err(Error::Genericity {
            ell: Some(1),
            detail: alloc::format!(
                "l = 1 Gram matrix is {r}x{}, rank 3 needs R_1 >= 3",
                g1.ncols()
            ),
        });
    }
    let (vals, top): (Vec<f64>, CMat) = match structure {
        RealStructure::GenericComplex => {
            let (vals, vecs) = hermitian_eigen(g1);
            (vals, vecs.columns(0, 3).adjoint())
        }
        RealStructure::CryoReal => {
            let re = DMatrix::from_fn(r, r, |i, j| g1[(i, j)].re);
            let (vals, vecs) = real_symmetric_eigen(&re);
            (vals, vecs.columns(0, 3).transpose().map(|x| c64(x, 0.0)))
        }
    };
    let lead = vals[0].max(0.0);
    if !(vals[2] > 1e-10 * lead) {
        return Err(Error::Genericity {
            ell: Some(1),
            detail: alloc::format!(
                "l = 1 Gram matrix has rank below 3 (eigenvalues {:.3e}, {:.3e}, {:.3e})",
                vals[0],
                vals[1],
                vals[2]
            ),
        });
    }
    let mut factor = top;
    for i in 0..3 {
        let s = vals[i].sqrt();
        for j in 0..r {
            factor[(i, j)] *= s;
        }
    }
    let factor = match structure {
        RealStructure::GenericComplex => factor,
        RealStructure::CryoReal => from_real_view(1, &factor),
    };
    Ok((factor, [vals[0], vals[1], vals[2]]))
}

/// Predicted `(1,1,1)` block `A^* P(A ⊗ A → V_1)`.
pub fn predicted_111(a1: &CMat, table: &CgTable) -> CMat {
    a1.adjoint() * cg_project(a1, a1, 1, table).expect("1 ⊗ 1 contains 1")
}

/// Picks the sign of `Ã_1` reproducing the observed `(1,1,1)` block; the
/// block is odd under `Ã_1 ↦ -Ã_1`.
pub fn resolve_sign(
    a1: &CMat,
    m111: &CMat,
    table: &CgTable,
    opts: &RecoveryOptions,
) -> Result<(CMat, SignResolution)> {
    let norm = fro(m111);
    let threshold = opts.sign_threshold * fro(a1).powi(3);
    if !(norm > threshold) {
        return Err(Error::SignUndetermined { norm, threshold });
    }
    let p = predicted_111(a1, table);
    let plus = fro(&(&p - m111)) / norm;
    let minus = fro(&(&p + m111)) / norm;
    let (choice, winner, loser) = if plus <= minus {
        (SignChoice::Plus, plus, minus)
    } else {
        (SignChoice::Minus, minus, plus)
    };
    if winner > opts.residual_tol {
        return Err(Error::Inconsistent {
            detail: "neither sign of the l = 1 factor reproduces the (1,1,1) block".into(),
            residual: winner,
        });
    }
    let signed = match choice {
        SignChoice::Plus => a1.clone(),
        SignChoice::Minus => -a1,
    };
    Ok((
        signed,
        SignResolution {
            choice,
            winner_residual: winner,
            loser_residual: loser,
        },
    ))
}

fn cross(a: &[C64; 3], b: &[C64; 3]) -> [C64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Constant `c` with `T P(a ⊗ b → V_1) = c (T a × T b)` for the Cartesian
/// map `T` of [`spherical_to_cartesian`].
pub fn cross_product_constant(table: &CgTable) -> C64 {
    let t = spherical_to_cartesian();
    let back = t.adjoint();
    let ex = back.columns(0, 1).into_owned();
    let ey = back.columns(1, 1).into_owned();
    let p = cg_project(&ex, &ey, 1, table).expect("1 ⊗ 1 contains 1");
    (&t * p)[(2, 0)]
}

/// Reduces a complex factor `F = Q_0 A_1` (`Q_0 ∈ U(3)` unknown) to an
/// `O(3)` image of `A_1` using the `(1,1,1)` block.
///
/// In Cartesian coordinates the block reads
/// `M = c conj(det Q_0) F^* S X` with `S = Q_0 Q_0^T` and `X` the cross
/// products of the columns of `F`. `S` is symmetric unitary; a Takagi
/// factor `S = W^T W` gives `conj(W) F = O A_1` with `O` real orthogonal.
pub fn resolve_unitary(
    f: &CMat,
    m111: &CMat,
    table: &CgTable,
    opts: &RecoveryOptions,
) -> Result<(CMat, f64)> {
    let t = spherical_to_cartesian();
    let fc = &t * f;
    let r = fc.ncols();
    let cols: Vec<[C64; 3]> = (0..r)
        .map(|j| [fc[(0, j)], fc[(1, j)], fc[(2, j)]])
        .collect();
    let mut x = CMat::zeros(3, r * r);
    for p in 0..r {
        for q in 0..r {
            let v = cross(&cols[p], &cols[q]);
            for i in 0..3 {
                x[(i, p * r + q)] = v[i];
            }
        }
    }
    let c = cross_product_constant(table);
    // K = (1/c) (F^*)^+ M X^+
    let (left, rank_f) = lstsq(&fc.adjoint(), m111, opts.rank_rtol);
    let (k_adj, rank_x) = lstsq(&x.adjoint(), &left.adjoint(), opts.rank_rtol);
    if rank_f < 3 || rank_x < 3 {
        return Err(Error::Genericity {
            ell: Some(1),
            detail: alloc::format!("cross-product system has rank {}", rank_f.min(rank_x)),
        });
    }
    let k = k_adj.adjoint() / c;
    let d = det3(&k);
    if !(d.norm() > 1e-12) {
        return Err(Error::Genericity {
            ell: Some(1),
            detail: "unitary reduction is singular".into(),
        });
    }
    let s = &k / d;
    let w = takagi_symmetric_unitary(&s);
    let oc = w.map(|z| z.conj()) * &fc;
    let reduced = t.adjoint() * oc;
    // residual of the predicted block from the reduced factor, up to sign
    let p = predicted_111(&reduced, table);
    let norm = fro(m111).max(f64::MIN_POSITIVE);
    let residual = (fro(&(&p - m111)).min(fro(&(&p + m111)))) / norm;
    if residual > opts.residual_tol {
        return Err(Error::Inconsistent {
            detail: "unitary reduction does not reproduce the (1,1,1) block".into(),
            residual,
        });
    }
    Ok((reduced, residual))
}

fn get_block(m3: &BTreeMap<Triple, CMat>, key: Triple) -> Result<&CMat> {
    m3.get(&key)
        .ok_or_else(|| Error::Parameter(alloc::format!("missing third-moment block {key:?}")))
}

/// Marches `Ã_l` for `l = 2..=L` by solving `B^* Ã_l = M(1, l-1, l)^*` with
/// `B = P(Ã_1 ⊗ Ã_{l-1} → V_l)`.
pub fn frequency_march(
    m3: &BTreeMap<Triple, CMat>,
    a0: &[C64],
    a1: &CMat,
    spec: &RepSpec,
    table: &CgTable,
    opts: &RecoveryOptions,
) -> Result<(Signal, Vec<StepReport>)> {
    let big_l = spec.max_l();
    if big_l > table.max_l() {
        return Err(Error::Parameter(alloc::format!(
            "table covers l <= {}, signal needs {big_l}",
            table.max_l()
        )));
    }
    for l in 0..=big_l {
        if spec.multiplicity(l) == 0 {
            return Err(Error::Parameter(alloc::format!(
                "marching needs every l <= {big_l}; l = {l} missing"
            )));
        }
    }
    if a0.len() != spec.multiplicity(0) || a1.nrows() != 3 || a1.ncols() != spec.multiplicity(1) {
        return Err(Error::Parameter(
            "starting blocks do not match the band layout".into(),
        ));
    }
    let mut blocks: Vec<CMat> = Vec::with_capacity(big_l + 1);
    blocks.push(CMat::from_row_slice(1, a0.len(), a0));
    blocks.push(a1.clone());
    let mut steps = Vec::new();
    for l in 2..=big_l {
        let b = cg_project(a1, &blocks[l - 1], l, table).expect("selection rule holds");
        let m = get_block(m3, (1, l - 1, l))?;
        let bh = b.adjoint();
        let rhs = m.adjoint();
        let (x, rank) = lstsq(&bh, &rhs, opts.rank_rtol);
        let sv = crate::linalg::singular_values(&b);
        let condition = if rank > 0 {
            sv[0] / sv[rank - 1]
        } else {
            f64::INFINITY
        };
        if rank < 2 * l + 1 {
            return Err(Error::Genericity {
                ell: Some(l),
                detail: alloc::format!(
                    "B has rank {rank} < {} (R_1 R_{} = {})",
                    2 * l + 1,
                    l - 1,
                    bh.nrows()
                ),
            });
        }
        let residual = rel(fro(&(&bh * &x - &rhs)), fro(&rhs));
        if residual > opts.residual_tol {
            return Err(Error::Inconsistent {
                detail: alloc::format!("least-squares step l = {l}"),
                residual,
            });
        }
        steps.push(StepReport {
            ell: l,
            residual,
            rank,
            rows: 2 * l + 1,
            condition,
        });
        blocks.push(x);
    }
    Ok((Signal::new(spec.clone(), blocks)?, steps))
}

/// Largest relative block deviation between `m3` and the moments of `f`.
pub fn moment_residual(f: &Signal, m3: &BTreeMap<Triple, CMat>, table: &CgTable) -> Result<f64> {
    let own = moment3(f, table)?;
    let scale = m3
        .values()
        .map(fro)
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let mut worst: f64 = 0.0;
    for (k, v) in m3 {
        let w = own
            .get(k)
            .ok_or_else(|| Error::Parameter(alloc::format!("unexpected block {k:?}")))?;
        worst = worst.max(fro(&(v - w)) / scale);
    }
    Ok(worst)
}

/// Full pipeline: `m3 → (m1, m2) → Ã_1 → sign → marching`.
pub fn recover_orbit(
    m3: &BTreeMap<Triple, CMat>,
    spec: &RepSpec,
    structure: RealStructure,
    table: &CgTable,
    opts: &RecoveryOptions,
) -> Result<RecoveryReport> {
    let (m1, m2) = recover_m1_m2_from_m3(m3, spec).map_err(|e| e.at(Stage::RecoverM1M2))?;
    let g1 = m2.get(&1).ok_or_else(|| {
        Error::Genericity {
            ell: Some(1),
            detail: "no l = 1 component".into(),
        }
        .at(Stage::FactorGram)
    })?;
    let (factor, gram_eigenvalues) =
        factor_gram(g1, structure).map_err(|e| e.at(Stage::FactorGram))?;
    let m111 = get_block(m3, (1, 1, 1)).map_err(|e| e.at(Stage::ResolveSign))?;
    let (factor, unitary_residual) = match structure {
        RealStructure::CryoReal => (factor, None),
        RealStructure::GenericComplex => {
            let (f, r) = resolve_unitary(&factor, m111, table, opts)
                .map_err(|e| e.at(Stage::ResolveUnitary))?;
            (f, Some(r))
        }
    };
    let (a1, sign) =
        resolve_sign(&factor, m111, table, opts).map_err(|e| e.at(Stage::ResolveSign))?;
    let (recovered, steps) = frequency_march(m3, &m1, &a1, spec, table, opts)
        .map_err(|e| e.at(Stage::FrequencyMarch))?;
    let moment_residual = moment_residual(&recovered, m3, table)?;
    Ok(RecoveryReport {
        recovered,
        structure,
        gram_eigenvalues,
        unitary_residual,
        sign,
        steps,
        moment_residual,
        align: None,
        rel_error: None,
    })
}
