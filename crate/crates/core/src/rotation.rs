use core::f64::consts::PI;

#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Element of SO(3), stored as a unit quaternion `(w, x, y, z)`.
///
/// Euler angles follow the ZYZ convention: `g = Rz(α) Ry(β) Rz(γ)` acting
/// actively on column vectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation {
    q: [f64; 4],
}

impl Default for Rotation {
    fn default() -> Self {
        Self::identity()
    }
}

impl Rotation {
    pub fn identity() -> Self {
        Rotation {
            q: [1.0, 0.0, 0.0, 0.0],
        }
    }

    pub fn from_quaternion(q: [f64; 4]) -> Result<Self> {
        let norm = q.iter().map(|c| c * c).sum::<f64>().sqrt();
        if !(norm > 1e-300) || !norm.is_finite() {
            return Err(Error::Parameter(alloc::format!(
                "degenerate quaternion {q:?}"
            )));
        }
        Ok(Rotation {
            q: [q[0] / norm, q[1] / norm, q[2] / norm, q[3] / norm],
        })
    }

    pub fn quaternion(&self) -> [f64; 4] {
        self.q
    }

    pub fn from_euler_zyz(alpha: f64, beta: f64, gamma: f64) -> Self {
        let (sb, cb) = (beta / 2.0).sin_cos();
        let (ss, cs) = ((alpha + gamma) / 2.0).sin_cos();
        let (sd, cd) = ((alpha - gamma) / 2.0).sin_cos();
        Rotation {
            q: [cb * cs, -sb * sd, sb * cd, cb * ss],
        }
    }

    /// ZYZ Euler angles with `α, γ ∈ [0, 2π)` and `β ∈ [0, π]`. At the
    /// gimbal-lock poles the split between `α` and `γ` puts everything in `α`.
    pub fn euler_zyz(&self) -> (f64, f64, f64) {
        let [w, x, y, z] = self.q;
        let beta = 2.0 * (x * x + y * y).sqrt().atan2((w * w + z * z).sqrt());
        let sum_ok = w * w + z * z > 1e-28;
        let diff_ok = x * x + y * y > 1e-28;
        let half_sum = if sum_ok { z.atan2(w) } else { 0.0 };
        let half_diff = if diff_ok { (-x).atan2(y) } else { 0.0 };
        let (alpha, gamma) = match (sum_ok, diff_ok) {
            (true, true) => (half_sum + half_diff, half_sum - half_diff),
            (true, false) => (2.0 * half_sum, 0.0),
            (false, true) => (2.0 * half_diff, 0.0),
            (false, false) => (0.0, 0.0),
        };
        (wrap_angle(alpha), beta.clamp(0.0, PI), wrap_angle(gamma))
    }

    pub fn from_axis_angle(axis: [f64; 3], angle: f64) -> Result<Self> {
        let n = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
        if !(n > 0.0) {
            return Err(Error::Parameter(alloc::string::String::from(
                "zero rotation axis",
            )));
        }
        let (s, c) = (angle / 2.0).sin_cos();
        Ok(Rotation {
            q: [c, s * axis[0] / n, s * axis[1] / n, s * axis[2] / n],
        })
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &Rotation) -> Rotation {
        let [a1, b1, c1, d1] = self.q;
        let [a2, b2, c2, d2] = other.q;
        let q = [
            a1 * a2 - b1 * b2 - c1 * c2 - d1 * d2,
            a1 * b2 + b1 * a2 + c1 * d2 - d1 * c2,
            a1 * c2 - b1 * d2 + c1 * a2 + d1 * b2,
            a1 * d2 + b1 * c2 - c1 * b2 + d1 * a2,
        ];
        let n = q.iter().map(|c| c * c).sum::<f64>().sqrt();
        Rotation {
            q: [q[0] / n, q[1] / n, q[2] / n, q[3] / n],
        }
    }

    pub fn inverse(&self) -> Rotation {
        let [w, x, y, z] = self.q;
        Rotation { q: [w, -x, -y, -z] }
    }

    /// Active rotation matrix, row-major.
    pub fn matrix(&self) -> [[f64; 3]; 3] {
        let [w, x, y, z] = self.q;
        [
            [
                1.0 - 2.0 * (y * y + z * z),
                2.0 * (x * y - w * z),
                2.0 * (x * z + w * y),
            ],
            [
                2.0 * (x * y + w * z),
                1.0 - 2.0 * (x * x + z * z),
                2.0 * (y * z - w * x),
            ],
            [
                2.0 * (x * z - w * y),
                2.0 * (y * z + w * x),
                1.0 - 2.0 * (x * x + y * y),
            ],
        ]
    }

    /// Inverse of [`Rotation::matrix`] for a proper orthogonal matrix.
    pub fn from_matrix(m: &[[f64; 3]; 3]) -> Result<Self> {
        let tr = m[0][0] + m[1][1] + m[2][2];
        let q = if tr > 0.0 {
            let s = (tr + 1.0).sqrt() * 2.0;
            [
                0.25 * s,
                (m[2][1] - m[1][2]) / s,
                (m[0][2] - m[2][0]) / s,
                (m[1][0] - m[0][1]) / s,
            ]
        } else if m[0][0] > m[1][1] && m[0][0] > m[2][2] {
            let s = (1.0 + m[0][0] - m[1][1] - m[2][2]).sqrt() * 2.0;
            [
                (m[2][1] - m[1][2]) / s,
                0.25 * s,
                (m[0][1] + m[1][0]) / s,
                (m[0][2] + m[2][0]) / s,
            ]
        } else if m[1][1] > m[2][2] {
            let s = (1.0 + m[1][1] - m[0][0] - m[2][2]).sqrt() * 2.0;
            [
                (m[0][2] - m[2][0]) / s,
                (m[0][1] + m[1][0]) / s,
                0.25 * s,
                (m[1][2] + m[2][1]) / s,
            ]
        } else {
            let s = (1.0 + m[2][2] - m[0][0] - m[1][1]).sqrt() * 2.0;
            [
                (m[1][0] - m[0][1]) / s,
                (m[0][2] + m[2][0]) / s,
                (m[1][2] + m[2][1]) / s,
                0.25 * s,
            ]
        };
        Self::from_quaternion(q)
    }

    /// Haar-uniform rotation from a normalized 4-dimensional Gaussian.
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        loop {
            let q: [f64; 4] = core::array::from_fn(|_| rng.sample(StandardNormal));
            if let Ok(r) = Self::from_quaternion(q) {
                return r;
            }
        }
    }

    /// Geodesic angle between two rotations, in `[0, π]`.
    pub fn angle_to(&self, other: &Rotation) -> f64 {
        let [w, x, y, z] = self.inverse().compose(other).q;
        2.0 * (x * x + y * y + z * z).sqrt().atan2(w.abs())
    }
}

fn wrap_angle(a: f64) -> f64 {
    let t = a - 2.0 * PI * (a / (2.0 * PI)).floor();
    if t >= 2.0 * PI {
        0.0
    } else {
        t
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn close(a: &Rotation, b: &Rotation) -> bool {
        a.angle_to(b) < 1e-10
    }

    #[test]
    fn euler_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let r = Rotation::random(&mut rng);
            let (a, b, g) = r.euler_zyz();
            assert!((0.0..2.0 * PI).contains(&a) && (0.0..=PI).contains(&b));
            assert!(close(&Rotation::from_euler_zyz(a, b, g), &r));
        }
        let pole = Rotation::from_euler_zyz(0.7, 0.0, 0.4);
        let (a, b, g) = pole.euler_zyz();
        assert!(b.abs() < 1e-12 && (a + g - 1.1).abs() < 1e-12);
    }

    #[test]
    fn matrix_round_trip_and_composition() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let r1 = Rotation::random(&mut rng);
            let r2 = Rotation::random(&mut rng);
            assert!(close(&Rotation::from_matrix(&r1.matrix()).unwrap(), &r1));
            let m1 = r1.matrix();
            let m2 = r2.matrix();
            let m12 = r1.compose(&r2).matrix();
            for i in 0..3 {
                for j in 0..3 {
                    let p: f64 = (0..3).map(|k| m1[i][k] * m2[k][j]).sum();
                    assert!((p - m12[i][j]).abs() < 1e-12);
                }
            }
            assert!(close(&r1.compose(&r1.inverse()), &Rotation::identity()));
        }
    }

    #[test]
    fn zyz_matches_elementary_rotations() {
        let rz = |t: f64| Rotation::from_axis_angle([0.0, 0.0, 1.0], t).unwrap();
        let ry = |t: f64| Rotation::from_axis_angle([0.0, 1.0, 0.0], t).unwrap();
        let (a, b, g) = (0.3, 1.1, 2.5);
        let expect = rz(a).compose(&ry(b)).compose(&rz(g));
        assert!(close(&Rotation::from_euler_zyz(a, b, g), &expect));
    }
}
