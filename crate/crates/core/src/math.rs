//! Small fixed-size linear algebra for placing shapes: 3-vectors, row-major 4×4
//! matrices and affine transforms.
//!
//! Points are column vectors, so a transform `M` maps `p` to `M · p`, and a
//! chain `[M1, M2, …, Mn]` (first element applied first) composes to
//! `Mn · … · M2 · M1`. Angles cross the API in degrees. The frame is
//! right-handed.

use std::ops::{Add, Mul, Neg, Sub};

use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MathError {
    #[error("rotation axis has zero length")]
    ZeroAxis,
    #[error("matrix bottom row is not (0, 0, 0, 1)")]
    NonAffine,
    #[error("matrix is singular")]
    Singular,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec3<T> {
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Scalar> Vec3<T> {
    pub fn new(x: T, y: T, z: T) -> Self {
        Vec3 { x, y, z }
    }

    pub fn zero() -> Self {
        Vec3::new(T::zero(), T::zero(), T::zero())
    }

    pub fn from_array(a: [T; 3]) -> Self {
        Vec3::new(a[0], a[1], a[2])
    }

    pub fn to_array(self) -> [T; 3] {
        [self.x, self.y, self.z]
    }

    pub fn dot(self, o: Self) -> T {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Self) -> Self {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm(self) -> T {
        self.dot(self).sqrt()
    }

    pub fn scale(self, s: T) -> Self {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl<T: Scalar> Add for Vec3<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl<T: Scalar> Sub for Vec3<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl<T: Scalar> Neg for Vec3<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

/// Row-major 4×4 matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat4<T> {
    pub rows: [[T; 4]; 4],
}

impl<T: Scalar> Mat4<T> {
    pub fn identity() -> Self {
        let mut rows = [[T::zero(); 4]; 4];
        for (i, row) in rows.iter_mut().enumerate() {
            row[i] = T::one();
        }
        Mat4 { rows }
    }

    /// Builds from sixteen values in row-major order.
    pub fn from_row_major(v: [T; 16]) -> Self {
        let mut rows = [[T::zero(); 4]; 4];
        for (i, x) in v.into_iter().enumerate() {
            rows[i / 4][i % 4] = x;
        }
        Mat4 { rows }
    }

    pub fn to_row_major(&self) -> [T; 16] {
        let mut out = [T::zero(); 16];
        for (i, x) in out.iter_mut().enumerate() {
            *x = self.rows[i / 4][i % 4];
        }
        out
    }

    pub fn is_affine(&self) -> bool {
        let r = &self.rows[3];
        r[0] == T::zero() && r[1] == T::zero() && r[2] == T::zero() && r[3] == T::one()
    }

    pub fn transform_point(&self, p: Vec3<T>) -> Vec3<T> {
        let m = &self.rows;
        Vec3::new(
            m[0][0] * p.x + m[0][1] * p.y + m[0][2] * p.z + m[0][3],
            m[1][0] * p.x + m[1][1] * p.y + m[1][2] * p.z + m[1][3],
            m[2][0] * p.x + m[2][1] * p.y + m[2][2] * p.z + m[2][3],
        )
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> T {
        self.rows
            .iter()
            .flatten()
            .fold(T::zero(), |acc, x| acc.max(x.abs()))
    }
}

impl<T: Scalar> Mul for Mat4<T> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        let mut rows = [[T::zero(); 4]; 4];
        for (i, row) in rows.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                let mut acc = T::zero();
                for k in 0..4 {
                    acc = acc + self.rows[i][k] * o.rows[k][j];
                }
                *cell = acc;
            }
        }
        Mat4 { rows }
    }
}

/// A 4×4 matrix whose bottom row is exactly `(0, 0, 0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineTransform<T> {
    m: Mat4<T>,
}

impl<T: Scalar> Default for AffineTransform<T> {
    fn default() -> Self {
        Self::identity()
    }
}

impl<T: Scalar> AffineTransform<T> {
    pub fn identity() -> Self {
        AffineTransform { m: Mat4::identity() }
    }

    pub fn new(m: Mat4<T>) -> Result<Self, MathError> {
        if m.is_affine() {
            Ok(AffineTransform { m })
        } else {
            Err(MathError::NonAffine)
        }
    }

    pub fn from_row_major(v: [T; 16]) -> Result<Self, MathError> {
        Self::new(Mat4::from_row_major(v))
    }

    pub fn translation(t: Vec3<T>) -> Self {
        let mut m = Mat4::identity();
        m.rows[0][3] = t.x;
        m.rows[1][3] = t.y;
        m.rows[2][3] = t.z;
        AffineTransform { m }
    }

    pub fn scaling(s: Vec3<T>) -> Self {
        let mut m = Mat4::identity();
        m.rows[0][0] = s.x;
        m.rows[1][1] = s.y;
        m.rows[2][2] = s.z;
        AffineTransform { m }
    }

    /// Right-handed rotation of `angle_deg` degrees about `axis` (Rodrigues form).
    pub fn rotation(axis: Vec3<T>, angle_deg: T) -> Result<Self, MathError> {
        let n = axis.norm();
        if !(n > T::zero()) || !n.is_finite() {
            return Err(MathError::ZeroAxis);
        }
        let a = axis.scale(T::one() / n);
        let rad = angle_deg.to_radians();
        let (s, c) = rad.sin_cos();
        let t = T::one() - c;
        let mut m = Mat4::identity();
        m.rows[0][0] = t * a.x * a.x + c;
        m.rows[0][1] = t * a.x * a.y - s * a.z;
        m.rows[0][2] = t * a.x * a.z + s * a.y;
        m.rows[1][0] = t * a.x * a.y + s * a.z;
        m.rows[1][1] = t * a.y * a.y + c;
        m.rows[1][2] = t * a.y * a.z - s * a.x;
        m.rows[2][0] = t * a.x * a.z - s * a.y;
        m.rows[2][1] = t * a.y * a.z + s * a.x;
        m.rows[2][2] = t * a.z * a.z + c;
        Ok(AffineTransform { m })
    }

    pub fn matrix(&self) -> &Mat4<T> {
        &self.m
    }

    pub fn to_row_major(&self) -> [T; 16] {
        self.m.to_row_major()
    }

    /// `self · other`: `other` is applied first.
    pub fn then_local(&self, other: &Self) -> Self {
        AffineTransform { m: self.m * other.m }
    }

    pub fn transform_point(&self, p: Vec3<T>) -> Vec3<T> {
        self.m.transform_point(p)
    }

    pub fn translation_part(&self) -> Vec3<T> {
        Vec3::new(self.m.rows[0][3], self.m.rows[1][3], self.m.rows[2][3])
    }

    /// Determinant of the upper-left 3×3 block.
    pub fn linear_determinant(&self) -> T {
        let r = &self.m.rows;
        r[0][0] * (r[1][1] * r[2][2] - r[1][2] * r[2][1])
            - r[0][1] * (r[1][0] * r[2][2] - r[1][2] * r[2][0])
            + r[0][2] * (r[1][0] * r[2][1] - r[1][1] * r[2][0])
    }

    /// Inverse via the adjugate of the linear block. Near-singular matrices
    /// (relative to the cube of their largest linear entry) are rejected.
    pub fn inverse(&self) -> Result<Self, MathError> {
        let r = &self.m.rows;
        let det = self.linear_determinant();
        let mut scale = T::zero();
        for row in r.iter().take(3) {
            for x in row.iter().take(3) {
                scale = scale.max(x.abs());
            }
        }
        let floor = T::epsilon() * scale * scale * scale * T::lit(16.0);
        if !det.is_finite() || det.abs() <= floor || det == T::zero() {
            return Err(MathError::Singular);
        }
        let inv_det = T::one() / det;
        let mut a = [[T::zero(); 3]; 3];
        a[0][0] = (r[1][1] * r[2][2] - r[1][2] * r[2][1]) * inv_det;
        a[0][1] = (r[0][2] * r[2][1] - r[0][1] * r[2][2]) * inv_det;
        a[0][2] = (r[0][1] * r[1][2] - r[0][2] * r[1][1]) * inv_det;
        a[1][0] = (r[1][2] * r[2][0] - r[1][0] * r[2][2]) * inv_det;
        a[1][1] = (r[0][0] * r[2][2] - r[0][2] * r[2][0]) * inv_det;
        a[1][2] = (r[0][2] * r[1][0] - r[0][0] * r[1][2]) * inv_det;
        a[2][0] = (r[1][0] * r[2][1] - r[1][1] * r[2][0]) * inv_det;
        a[2][1] = (r[0][1] * r[2][0] - r[0][0] * r[2][1]) * inv_det;
        a[2][2] = (r[0][0] * r[1][1] - r[0][1] * r[1][0]) * inv_det;
        let t = self.translation_part();
        let mut m = Mat4::identity();
        for i in 0..3 {
            for j in 0..3 {
                m.rows[i][j] = a[i][j];
            }
            m.rows[i][3] = -(a[i][0] * t.x + a[i][1] * t.y + a[i][2] * t.z);
        }
        Ok(AffineTransform { m })
    }

    /// Whether `self` and `other` agree entry-wise within
    /// `rel · max(|self|, |other|) + abs`, using the largest entry as the scale.
    pub fn approx_eq(&self, other: &Self, rel: T, abs: T) -> bool {
        let scale = self.m.max_abs().max(other.m.max_abs());
        let bound = rel * scale + abs;
        self.m
            .rows
            .iter()
            .flatten()
            .zip(other.m.rows.iter().flatten())
            .all(|(&a, &b)| a == b || (a - b).abs() <= bound)
    }
}

/// One element of a transform chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TransformOp<T> {
    Translation(Vec3<T>),
    Rotation { axis: Vec3<T>, angle_deg: T },
    Scaling(Vec3<T>),
    Raw(Mat4<T>),
}

impl<T: Scalar> TransformOp<T> {
    pub fn to_transform(&self) -> Result<AffineTransform<T>, MathError> {
        match *self {
            TransformOp::Translation(t) => Ok(AffineTransform::translation(t)),
            TransformOp::Rotation { axis, angle_deg } => AffineTransform::rotation(axis, angle_deg),
            TransformOp::Scaling(s) => Ok(AffineTransform::scaling(s)),
            TransformOp::Raw(m) => AffineTransform::new(m),
        }
    }
}

/// Composes a chain whose first element is applied first to local
/// coordinates: the result is `Mn · … · M2 · M1`.
pub fn compose_transforms<T: Scalar>(
    chain: &[TransformOp<T>],
) -> Result<AffineTransform<T>, MathError> {
    chain.iter().try_fold(AffineTransform::identity(), |acc, op| {
        Ok(op.to_transform()?.then_local(&acc))
    })
}
