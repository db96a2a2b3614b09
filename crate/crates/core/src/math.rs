//! Small fixed-size linear algebra: 3-vectors, 3x3 matrices, symmetric
//! eigendecomposition and a 3x3 SVD built on top of it.

use serde::{Deserialize, Serialize};
use std::ops::{Add, Div, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 0.0 };

    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn normalized(self) -> Vec3 {
        let n = self.norm();
        if n == 0.0 {
            Vec3::ZERO
        } else {
            self / n
        }
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn component(self, i: usize) -> f64 {
        match i {
            0 => self.x,
            1 => self.y,
            _ => self.z,
        }
    }

    pub fn min_component_wise(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x.min(o.x), self.y.min(o.y), self.z.min(o.z))
    }

    pub fn max_component_wise(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x.max(o.x), self.y.max(o.y), self.z.max(o.z))
    }

    /// Any unit vector orthogonal to `self` (which must be non-zero).
    pub fn any_orthonormal(self) -> Vec3 {
        let axis = if self.x.abs() <= self.y.abs() && self.x.abs() <= self.z.abs() {
            Vec3::new(1.0, 0.0, 0.0)
        } else if self.y.abs() <= self.z.abs() {
            Vec3::new(0.0, 1.0, 0.0)
        } else {
            Vec3::new(0.0, 0.0, 1.0)
        };
        self.cross(axis).normalized()
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Div<f64> for Vec3 {
    type Output = Vec3;
    fn div(self, s: f64) -> Vec3 {
        Vec3::new(self.x / s, self.y / s, self.z / s)
    }
}

/// Row-major 3x3 matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mat3 {
    pub m: [[f64; 3]; 3],
}

impl Mat3 {
    pub fn identity() -> Mat3 {
        Mat3 { m: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]] }
    }

    pub fn zeros() -> Mat3 {
        Mat3 { m: [[0.0; 3]; 3] }
    }

    pub fn from_rows(r0: Vec3, r1: Vec3, r2: Vec3) -> Mat3 {
        Mat3 {
            m: [
                [r0.x, r0.y, r0.z],
                [r1.x, r1.y, r1.z],
                [r2.x, r2.y, r2.z],
            ],
        }
    }

    pub fn from_columns(c0: Vec3, c1: Vec3, c2: Vec3) -> Mat3 {
        Mat3 {
            m: [
                [c0.x, c1.x, c2.x],
                [c0.y, c1.y, c2.y],
                [c0.z, c1.z, c2.z],
            ],
        }
    }

    pub fn column(&self, j: usize) -> Vec3 {
        Vec3::new(self.m[0][j], self.m[1][j], self.m[2][j])
    }

    pub fn row(&self, i: usize) -> Vec3 {
        Vec3::new(self.m[i][0], self.m[i][1], self.m[i][2])
    }

    pub fn transpose(&self) -> Mat3 {
        let m = &self.m;
        Mat3 {
            m: [
                [m[0][0], m[1][0], m[2][0]],
                [m[0][1], m[1][1], m[2][1]],
                [m[0][2], m[1][2], m[2][2]],
            ],
        }
    }

    pub fn det(&self) -> f64 {
        let m = &self.m;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    pub fn outer(a: Vec3, b: Vec3) -> Mat3 {
        Mat3 {
            m: [
                [a.x * b.x, a.x * b.y, a.x * b.z],
                [a.y * b.x, a.y * b.y, a.y * b.z],
                [a.z * b.x, a.z * b.y, a.z * b.z],
            ],
        }
    }

    pub fn scale(&self, s: f64) -> Mat3 {
        let mut r = *self;
        for i in 0..3 {
            for j in 0..3 {
                r.m[i][j] *= s;
            }
        }
        r
    }

    pub fn add(&self, o: &Mat3) -> Mat3 {
        let mut r = *self;
        for i in 0..3 {
            for j in 0..3 {
                r.m[i][j] += o.m[i][j];
            }
        }
        r
    }
}

impl Mul<Vec3> for Mat3 {
    type Output = Vec3;
    fn mul(self, v: Vec3) -> Vec3 {
        Vec3::new(
            self.m[0][0] * v.x + self.m[0][1] * v.y + self.m[0][2] * v.z,
            self.m[1][0] * v.x + self.m[1][1] * v.y + self.m[1][2] * v.z,
            self.m[2][0] * v.x + self.m[2][1] * v.y + self.m[2][2] * v.z,
        )
    }
}

impl Mul<Mat3> for Mat3 {
    type Output = Mat3;
    fn mul(self, o: Mat3) -> Mat3 {
        let mut r = Mat3::zeros();
        for i in 0..3 {
            for j in 0..3 {
                let mut s = 0.0;
                for k in 0..3 {
                    s += self.m[i][k] * o.m[k][j];
                }
                r.m[i][j] = s;
            }
        }
        r
    }
}

/// Eigendecomposition of a symmetric 3x3 matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in descending order with the matching unit
/// eigenvectors as columns of the returned matrix. Deterministic for a
/// given input.
pub fn sym_eigen(a: &Mat3) -> ([f64; 3], Mat3) {
    let mut a = a.m;
    let mut v = Mat3::identity().m;

    for _sweep in 0..50 {
        let off = a[0][1] * a[0][1] + a[0][2] * a[0][2] + a[1][2] * a[1][2];
        let diag = a[0][0] * a[0][0] + a[1][1] * a[1][1] + a[2][2] * a[2][2];
        if off <= f64::EPSILON * f64::EPSILON * (diag + 1e-300) {
            break;
        }
        for &(p, q) in &[(0usize, 1usize), (0, 2), (1, 2)] {
            let apq = a[p][q];
            if apq == 0.0 {
                continue;
            }
            let app = a[p][p];
            let aqq = a[q][q];
            let tau = (aqq - app) / (2.0 * apq);
            let t = if tau >= 0.0 {
                1.0 / (tau + (1.0 + tau * tau).sqrt())
            } else {
                -1.0 / (-tau + (1.0 + tau * tau).sqrt())
            };
            let c = 1.0 / (1.0 + t * t).sqrt();
            let s = t * c;

            for k in 0..3 {
                let akp = a[k][p];
                let akq = a[k][q];
                a[k][p] = c * akp - s * akq;
                a[k][q] = s * akp + c * akq;
            }
            for k in 0..3 {
                let apk = a[p][k];
                let aqk = a[q][k];
                a[p][k] = c * apk - s * aqk;
                a[q][k] = s * apk + c * aqk;
            }
            for k in 0..3 {
                let vkp = v[k][p];
                let vkq = v[k][q];
                v[k][p] = c * vkp - s * vkq;
                v[k][q] = s * vkp + c * vkq;
            }
        }
    }

    let mut pairs = [
        (a[0][0], 0usize),
        (a[1][1], 1usize),
        (a[2][2], 2usize),
    ];
    // descending eigenvalues, stable for equal values
    pairs.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap().then(x.1.cmp(&y.1)));

    let vals = [pairs[0].0, pairs[1].0, pairs[2].0];
    let vm = Mat3 { m: v };
    let vecs = Mat3::from_columns(
        vm.column(pairs[0].1),
        vm.column(pairs[1].1),
        vm.column(pairs[2].1),
    );
    (vals, vecs)
}

/// SVD of a general 3x3 matrix: `a = u * diag(s) * v^T`, singular values
/// descending, `u` and `v` with orthonormal columns.
///
/// Built from the symmetric eigendecomposition of `a^T a`; rank-deficient
/// inputs get the missing left columns completed by cross products.
pub fn svd3(a: &Mat3) -> (Mat3, [f64; 3], Mat3) {
    let ata = a.transpose() * *a;
    let (vals, v) = sym_eigen(&ata);
    let s = [
        vals[0].max(0.0).sqrt(),
        vals[1].max(0.0).sqrt(),
        vals[2].max(0.0).sqrt(),
    ];
    let scale = s[0].max(1e-300);
    let tol = 1e-12 * scale;

    let mut u_cols = [Vec3::ZERO; 3];
    let mut rank = 0;
    for i in 0..3 {
        if s[i] > tol {
            u_cols[i] = (*a * v.column(i)) / s[i];
            rank = i + 1;
        }
    }
    match rank {
        0 => {
            u_cols[0] = Vec3::new(1.0, 0.0, 0.0);
            u_cols[1] = Vec3::new(0.0, 1.0, 0.0);
            u_cols[2] = Vec3::new(0.0, 0.0, 1.0);
        }
        1 => {
            u_cols[1] = u_cols[0].any_orthonormal();
            u_cols[2] = u_cols[0].cross(u_cols[1]).normalized();
        }
        2 => {
            u_cols[2] = u_cols[0].cross(u_cols[1]).normalized();
        }
        _ => {}
    }
    let u = Mat3::from_columns(u_cols[0], u_cols[1], u_cols[2]);
    (u, s, v)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn approx(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn eigen_diagonal() {
        let m = Mat3 { m: [[3.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 2.0]] };
        let (vals, vecs) = sym_eigen(&m);
        assert!(approx(vals[0], 3.0, 1e-12));
        assert!(approx(vals[1], 2.0, 1e-12));
        assert!(approx(vals[2], 1.0, 1e-12));
        assert!(approx(vecs.column(0).x.abs(), 1.0, 1e-12));
    }

    #[test]
    fn eigen_reconstructs() {
        let m = Mat3 { m: [[4.0, 1.0, -0.5], [1.0, 3.0, 0.25], [-0.5, 0.25, 2.0]] };
        let (vals, v) = sym_eigen(&m);
        // A v_i = lambda_i v_i
        for i in 0..3 {
            let av = m * v.column(i);
            let lv = v.column(i) * vals[i];
            assert!((av - lv).norm() < 1e-10);
        }
        // orthonormality
        for i in 0..3 {
            for j in 0..3 {
                let d = v.column(i).dot(v.column(j));
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!(approx(d, expect, 1e-12));
            }
        }
    }

    #[test]
    fn svd_reconstructs() {
        let a = Mat3 { m: [[1.0, 2.0, 3.0], [-4.0, 0.5, 6.0], [7.0, 8.0, -9.0]] };
        let (u, s, v) = svd3(&a);
        let sd = Mat3 { m: [[s[0], 0.0, 0.0], [0.0, s[1], 0.0], [0.0, 0.0, s[2]]] };
        let r = u * sd * v.transpose();
        for i in 0..3 {
            for j in 0..3 {
                assert!(approx(r.m[i][j], a.m[i][j], 1e-9));
            }
        }
        assert!(s[0] >= s[1] && s[1] >= s[2] && s[2] >= 0.0);
    }

    #[test]
    fn svd_rank_deficient() {
        // rank 2: third row is a combination of the first two
        let a = Mat3 { m: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 1.0, 0.0]] };
        let (u, s, v) = svd3(&a);
        assert!(s[2].abs() < 1e-9);
        let sd = Mat3 { m: [[s[0], 0.0, 0.0], [0.0, s[1], 0.0], [0.0, 0.0, s[2]]] };
        let r = u * sd * v.transpose();
        for i in 0..3 {
            for j in 0..3 {
                assert!(approx(r.m[i][j], a.m[i][j], 1e-9));
            }
        }
        // u still orthonormal
        let utu = u.transpose() * u;
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!(approx(utu.m[i][j], expect, 1e-9));
            }
        }
    }
}
