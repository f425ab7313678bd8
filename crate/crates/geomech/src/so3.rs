//! Vector calculus on oriented Euclidean 3-space and its rotation group.
//!
//! The Lie algebra of the rotation group is identified with 3-vectors in the
//! usual way: the bracket becomes the cross product, the dual pairing becomes
//! the dot product, and group elements are orthogonal matrices with unit
//! determinant. Everything here is a pure function over immutable values.

use std::fmt;

use crate::error::GeomechError;

/// A vector of oriented Euclidean 3-space. Doubles as an element of the
/// rotation algebra and of its dual under the standard identifications.
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

    pub fn basis(k: usize) -> Self {
        match k {
            0 => Vec3::new(1.0, 0.0, 0.0),
            1 => Vec3::new(0.0, 1.0, 0.0),
            2 => Vec3::new(0.0, 0.0, 1.0),
            _ => panic!("basis index {k} out of range for dimension 3"),
        }
    }

    pub fn from_slice(s: &[f64]) -> Self {
        Vec3::new(s[0], s[1], s[2])
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn dot(self, other: Vec3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.norm_squared().sqrt()
    }

    pub fn scale(self, a: f64) -> Vec3 {
        Vec3::new(a * self.x, a * self.y, a * self.z)
    }

    pub fn normalized(self) -> Vec3 {
        let n = self.norm();
        assert!(n > 0.0, "cannot normalize the zero vector");
        self.scale(1.0 / n)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl std::ops::Add for Vec3 {
    type Output = Vec3;
    fn add(self, rhs: Vec3) -> Vec3 {
        Vec3::new(self.x + rhs.x, self.y + rhs.y, self.z + rhs.z)
    }
}

impl std::ops::Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, rhs: Vec3) -> Vec3 {
        Vec3::new(self.x - rhs.x, self.y - rhs.y, self.z - rhs.z)
    }
}

impl std::ops::Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

impl std::ops::Mul<Vec3> for f64 {
    type Output = Vec3;
    fn mul(self, v: Vec3) -> Vec3 {
        v.scale(self)
    }
}

impl fmt::Display for Vec3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.x, self.y, self.z)
    }
}

/// Cross product `u × v`.
pub fn cross(u: Vec3, v: Vec3) -> Vec3 {
    Vec3::new(
        u.y * v.z - u.z * v.y,
        u.z * v.x - u.x * v.z,
        u.x * v.y - u.y * v.x,
    )
}

/// Mixed product `u · (v × w)`, a skew-symmetric trilinear form.
pub fn mixed(u: Vec3, v: Vec3, w: Vec3) -> f64 {
    u.dot(cross(v, w))
}

/// Coadjoint action on the dual algebra: `coad(X, ξ) = ξ × X`.
///
/// Satisfies the duality relation `⟨coad(X, ξ), Y⟩ = ⟨ξ, X × Y⟩`.
pub fn coad(x: Vec3, xi: Vec3) -> Vec3 {
    cross(xi, x)
}

/// Row-major 3×3 real matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Matrix3 {
    pub m: [[f64; 3]; 3],
}

impl Matrix3 {
    pub const IDENTITY: Matrix3 = Matrix3 {
        m: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
    };

    pub fn new(m: [[f64; 3]; 3]) -> Self {
        Matrix3 { m }
    }

    pub fn zeros() -> Self {
        Matrix3 { m: [[0.0; 3]; 3] }
    }

    pub fn diag(a: f64, b: f64, c: f64) -> Self {
        Matrix3::new([[a, 0.0, 0.0], [0.0, b, 0.0], [0.0, 0.0, c]])
    }

    pub fn transpose(&self) -> Matrix3 {
        let mut t = Matrix3::zeros();
        for i in 0..3 {
            for j in 0..3 {
                t.m[i][j] = self.m[j][i];
            }
        }
        t
    }

    pub fn mul_vec(&self, v: Vec3) -> Vec3 {
        let a = v.to_array();
        let mut out = [0.0; 3];
        for (i, row) in self.m.iter().enumerate() {
            out[i] = row[0] * a[0] + row[1] * a[1] + row[2] * a[2];
        }
        Vec3::from_slice(&out)
    }

    pub fn mul_mat(&self, other: &Matrix3) -> Matrix3 {
        let mut out = Matrix3::zeros();
        for i in 0..3 {
            for j in 0..3 {
                let mut s = 0.0;
                for (k, row) in other.m.iter().enumerate() {
                    s += self.m[i][k] * row[j];
                }
                out.m[i][j] = s;
            }
        }
        out
    }

    pub fn add(&self, other: &Matrix3) -> Matrix3 {
        let mut out = Matrix3::zeros();
        for i in 0..3 {
            for j in 0..3 {
                out.m[i][j] = self.m[i][j] + other.m[i][j];
            }
        }
        out
    }

    pub fn scale(&self, a: f64) -> Matrix3 {
        let mut out = *self;
        for row in out.m.iter_mut() {
            for e in row.iter_mut() {
                *e *= a;
            }
        }
        out
    }

    pub fn det(&self) -> f64 {
        let m = &self.m;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    /// Inverse via the adjugate. Panics on a singular matrix.
    pub fn inverse(&self) -> Matrix3 {
        let d = self.det();
        assert!(d.abs() > 1e-300, "matrix is singular");
        let m = &self.m;
        let c = |i1: usize, i2: usize, j1: usize, j2: usize| {
            m[i1][j1] * m[i2][j2] - m[i1][j2] * m[i2][j1]
        };
        Matrix3::new([
            [c(1, 2, 1, 2), -c(0, 2, 1, 2), c(0, 1, 1, 2)],
            [-c(1, 2, 0, 2), c(0, 2, 0, 2), -c(0, 1, 0, 2)],
            [c(1, 2, 0, 1), -c(0, 2, 0, 1), c(0, 1, 0, 1)],
        ])
        .scale(1.0 / d)
    }

    /// Max-norm deviation of `MᵀM` from the identity.
    pub fn orthogonality_defect(&self) -> f64 {
        let g = self.transpose().mul_mat(self);
        let mut worst: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g.m[i][j] - target).abs());
            }
        }
        worst
    }

    /// True when the matrix is a rotation within `tol` (orthonormal columns
    /// and determinant +1).
    pub fn is_rotation(&self, tol: f64) -> bool {
        self.orthogonality_defect() <= tol && (self.det() - 1.0).abs() <= tol
    }

    /// One Newton step of the polar projection, `R ← R(3I − RᵀR)/2`.
    ///
    /// Contracts quadratically towards the nearest orthogonal matrix; used to
    /// keep reconstructed group trajectories on the rotation group.
    pub fn reorthonormalized(&self) -> Matrix3 {
        let g = self.transpose().mul_mat(self);
        let correction = Matrix3::IDENTITY.scale(3.0).add(&g.scale(-1.0)).scale(0.5);
        self.mul_mat(&correction)
    }
}

impl fmt::Display for Matrix3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for row in &self.m {
            writeln!(f, "[{:+.6e} {:+.6e} {:+.6e}]", row[0], row[1], row[2])?;
        }
        Ok(())
    }
}

/// Skew-symmetric matrix of a vector: `hat(X)·v = X × v` for all `v`.
pub fn hat(x: Vec3) -> Matrix3 {
    Matrix3::new([
        [0.0, -x.z, x.y],
        [x.z, 0.0, -x.x],
        [-x.y, x.x, 0.0],
    ])
}

/// Inverse of [`hat`]. Rejects input that is not antisymmetric within `1e-10`.
pub fn unhat(m: &Matrix3) -> Result<Vec3, GeomechError> {
    let mut defect: f64 = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            defect = defect.max((m.m[i][j] + m.m[j][i]).abs());
        }
    }
    if defect > 1e-10 {
        return Err(GeomechError::NotAntisymmetric { defect });
    }
    Ok(Vec3::new(
        0.5 * (m.m[2][1] - m.m[1][2]),
        0.5 * (m.m[0][2] - m.m[2][0]),
        0.5 * (m.m[1][0] - m.m[0][1]),
    ))
}

/// Rotation exponential `exp(hat(X))` in closed form.
///
/// Below `‖X‖ = 1e-4` the trigonometric coefficients switch to their series
/// expansions to avoid cancellation.
pub fn exp_so3(x: Vec3) -> Matrix3 {
    let theta2 = x.norm_squared();
    let theta = theta2.sqrt();
    let (a, b) = if theta < 1e-4 {
        // sin θ / θ and (1 − cos θ)/θ² by series.
        (
            1.0 - theta2 / 6.0 + theta2 * theta2 / 120.0,
            0.5 - theta2 / 24.0 + theta2 * theta2 / 720.0,
        )
    } else {
        (theta.sin() / theta, (1.0 - theta.cos()) / theta2)
    };
    let k = hat(x);
    let k2 = k.mul_mat(&k);
    Matrix3::IDENTITY.add(&k.scale(a)).add(&k2.scale(b))
}
