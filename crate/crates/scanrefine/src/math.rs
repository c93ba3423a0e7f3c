//! Minimal fixed-size linear algebra used throughout the crate.
//!
//! Everything is `f64`; the pipeline depends on double precision for its
//! finite-difference gradient checks.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the 3D cross product of two in-plane vectors.
    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.norm_sq().sqrt()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

impl AddAssign for Vec2 {
    fn add_assign(&mut self, o: Vec2) {
        self.x += o.x;
        self.y += o.y;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
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

    pub fn splat(v: f64) -> Self {
        Vec3::new(v, v, v)
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
        assert!(n > 0.0, "cannot normalize the zero vector");
        self * (1.0 / n)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Vec3::new(a[0], a[1], a[2])
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

impl AddAssign for Vec3 {
    fn add_assign(&mut self, o: Vec3) {
        self.x += o.x;
        self.y += o.y;
        self.z += o.z;
    }
}

/// Row-major 3x3 matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat3 {
    pub m: [[f64; 3]; 3],
}

impl Mat3 {
    pub const IDENTITY: Mat3 = Mat3 {
        m: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
    };

    pub fn from_rows(r0: Vec3, r1: Vec3, r2: Vec3) -> Self {
        Mat3 {
            m: [r0.to_array(), r1.to_array(), r2.to_array()],
        }
    }

    pub fn row(&self, i: usize) -> Vec3 {
        Vec3::from_array(self.m[i])
    }

    pub fn col(&self, j: usize) -> Vec3 {
        Vec3::new(self.m[0][j], self.m[1][j], self.m[2][j])
    }

    pub fn transpose(&self) -> Mat3 {
        Mat3::from_rows(self.col(0), self.col(1), self.col(2))
    }

    pub fn mul_vec(&self, v: Vec3) -> Vec3 {
        Vec3::new(self.row(0).dot(v), self.row(1).dot(v), self.row(2).dot(v))
    }

    /// R^T v without materializing the transpose.
    pub fn transpose_mul_vec(&self, v: Vec3) -> Vec3 {
        Vec3::new(self.col(0).dot(v), self.col(1).dot(v), self.col(2).dot(v))
    }

    pub fn mul_mat(&self, o: &Mat3) -> Mat3 {
        let mut out = [[0.0; 3]; 3];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = self.row(i).dot(o.col(j));
            }
        }
        Mat3 { m: out }
    }

    pub fn trace(&self) -> f64 {
        self.m[0][0] + self.m[1][1] + self.m[2][2]
    }

    pub fn determinant(&self) -> f64 {
        self.row(0).dot(self.row(1).cross(self.row(2)))
    }

    /// Skew-symmetric matrix [v]_x such that [v]_x w = v x w.
    pub fn skew(v: Vec3) -> Mat3 {
        Mat3 {
            m: [
                [0.0, -v.z, v.y],
                [v.z, 0.0, -v.x],
                [-v.y, v.x, 0.0],
            ],
        }
    }

    pub fn scale(&self, s: f64) -> Mat3 {
        let mut m = self.m;
        for row in m.iter_mut() {
            for cell in row.iter_mut() {
                *cell *= s;
            }
        }
        Mat3 { m }
    }

    pub fn add_mat(&self, o: &Mat3) -> Mat3 {
        let mut m = self.m;
        for (i, row) in m.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell += o.m[i][j];
            }
        }
        Mat3 { m }
    }

    /// max-norm of R^T R - I, the orthonormality defect.
    pub fn orthonormality_error(&self) -> f64 {
        let g = self.transpose().mul_mat(self);
        let mut err: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                let target = if i == j { 1.0 } else { 0.0 };
                err = err.max((g.m[i][j] - target).abs());
            }
        }
        err
    }

    /// Project onto the nearest rotation via modified Gram-Schmidt on rows,
    /// preserving handedness by rebuilding the last row from a cross product.
    pub fn orthonormalized(&self) -> Mat3 {
        let r0 = self.row(0).normalized();
        let mut r1 = self.row(1);
        r1 = r1 - r0 * r0.dot(r1);
        let r1 = r1.normalized();
        let r2 = r0.cross(r1);
        Mat3::from_rows(r0, r1, r2)
    }

    /// Rotation about an arbitrary axis by `angle_rad` (Rodrigues).
    pub fn rotation_axis_angle(axis_angle: Vec3) -> Mat3 {
        so3_exp(axis_angle)
    }

    pub fn rotation_x(angle_rad: f64) -> Mat3 {
        so3_exp(Vec3::new(angle_rad, 0.0, 0.0))
    }

    pub fn rotation_y(angle_rad: f64) -> Mat3 {
        so3_exp(Vec3::new(0.0, angle_rad, 0.0))
    }

    pub fn rotation_z(angle_rad: f64) -> Mat3 {
        so3_exp(Vec3::new(0.0, 0.0, angle_rad))
    }

    pub fn is_finite(&self) -> bool {
        self.m.iter().flatten().all(|v| v.is_finite())
    }
}

/// Rodrigues formula: exp([w]_x).
pub fn so3_exp(w: Vec3) -> Mat3 {
    let theta_sq = w.norm_sq();
    let theta = theta_sq.sqrt();
    // sin(t)/t and (1-cos(t))/t^2 with series fallbacks near zero.
    let (a, b) = if theta < 1e-8 {
        (1.0 - theta_sq / 6.0, 0.5 - theta_sq / 24.0)
    } else {
        (theta.sin() / theta, (1.0 - theta.cos()) / theta_sq)
    };
    let k = Mat3::skew(w);
    let k2 = k.mul_mat(&k);
    Mat3::IDENTITY.add_mat(&k.scale(a)).add_mat(&k2.scale(b))
}

/// Right Jacobian of SO(3):
/// exp(w + dw) ~= exp(w) exp(J_r(w) dw) for small dw.
pub fn so3_right_jacobian(w: Vec3) -> Mat3 {
    let theta_sq = w.norm_sq();
    let theta = theta_sq.sqrt();
    let (b, c) = if theta < 1e-5 {
        (0.5 - theta_sq / 24.0, 1.0 / 6.0 - theta_sq / 120.0)
    } else {
        (
            (1.0 - theta.cos()) / theta_sq,
            (theta - theta.sin()) / (theta_sq * theta),
        )
    };
    let k = Mat3::skew(w);
    let k2 = k.mul_mat(&k);
    Mat3::IDENTITY.add_mat(&k.scale(-b)).add_mat(&k2.scale(c))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn exp_of_zero_is_identity() {
        assert_eq!(so3_exp(Vec3::ZERO), Mat3::IDENTITY);
    }

    #[test]
    fn exp_matches_rodrigues_about_z() {
        let angle = 0.7;
        let r = so3_exp(Vec3::new(0.0, 0.0, angle));
        assert_abs_diff_eq!(r.m[0][0], angle.cos(), epsilon = 1e-15);
        assert_abs_diff_eq!(r.m[0][1], -angle.sin(), epsilon = 1e-15);
        assert_abs_diff_eq!(r.m[1][0], angle.sin(), epsilon = 1e-15);
        assert!(r.orthonormality_error() < 1e-14);
        assert_abs_diff_eq!(r.determinant(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn exp_is_orthonormal_for_random_axes() {
        let cases = [
            Vec3::new(0.3, -1.1, 0.5),
            Vec3::new(1e-9, 2e-9, -1e-9),
            Vec3::new(3.0, 0.1, -0.2),
        ];
        for w in cases {
            let r = so3_exp(w);
            assert!(r.orthonormality_error() < 1e-13, "w = {w:?}");
            assert_abs_diff_eq!(r.determinant(), 1.0, epsilon = 1e-13);
        }
    }

    // Finite-difference validation of the right Jacobian relation
    // exp(w + dw) ~ exp(w) exp(J_r dw).
    #[test]
    fn right_jacobian_matches_finite_difference() {
        let ws = [
            Vec3::new(0.4, -0.2, 0.9),
            Vec3::new(1e-7, -2e-7, 5e-8),
            Vec3::new(0.0, 0.0, 1.3),
        ];
        let eps = 1e-6;
        for w in ws {
            let jr = so3_right_jacobian(w);
            let r = so3_exp(w);
            for k in 0..3 {
                let mut dw = Vec3::ZERO;
                match k {
                    0 => dw.x = eps,
                    1 => dw.y = eps,
                    _ => dw.z = eps,
                }
                let lhs = so3_exp(w + dw);
                let rhs = r.mul_mat(&so3_exp(jr.mul_vec(dw)));
                for i in 0..3 {
                    for j in 0..3 {
                        assert_abs_diff_eq!(lhs.m[i][j], rhs.m[i][j], epsilon = 1e-9);
                    }
                }
            }
        }
    }

    #[test]
    fn orthonormalized_restores_rotation() {
        let mut r = so3_exp(Vec3::new(0.2, 0.5, -0.3));
        // inject drift
        r.m[0][0] += 1e-4;
        r.m[1][2] -= 2e-4;
        let fixed = r.orthonormalized();
        assert!(fixed.orthonormality_error() < 1e-14);
        assert!(fixed.determinant() > 0.0);
    }

    #[test]
    fn cross_and_skew_agree() {
        let a = Vec3::new(1.0, 2.0, 3.0);
        let b = Vec3::new(-0.5, 0.25, 2.0);
        let c1 = a.cross(b);
        let c2 = Mat3::skew(a).mul_vec(b);
        assert_eq!(c1, c2);
    }
}
