//! Shared geometric types and primitives: vectors, rotations, poses, twists
//! and the handful of operations every controller builds on.

use nalgebra::{Matrix3, Rotation3, Unit, Vector3, Vector6};

use crate::error::{Error, Result};

/// Position, direction or force in the world frame (meters / newtons).
pub type Vec3 = Vector3<f64>;
/// Unit-norm direction.
pub type UnitVec3 = Unit<Vector3<f64>>;
/// Proper rotation; the columns are the frame axes `[x y z]`.
pub type Rotation = Rotation3<f64>;

/// Orthonormality tolerance for rotations.
pub const ORTHO_TOL: f64 = 1e-9;
/// Norm below which a vector is treated as zero.
pub const DEGENERACY_TOL: f64 = 1e-12;

/// End-effector pose in the world frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub position: Vec3,
    pub orientation: Rotation,
}

impl Pose {
    pub fn new(position: Vec3, orientation: Rotation) -> Self {
        Self {
            position,
            orientation,
        }
    }

    pub fn x_axis(&self) -> Vec3 {
        self.orientation.matrix().column(0).into_owned()
    }

    pub fn y_axis(&self) -> Vec3 {
        self.orientation.matrix().column(1).into_owned()
    }

    /// Viewing direction for camera frames.
    pub fn z_axis(&self) -> Vec3 {
        self.orientation.matrix().column(2).into_owned()
    }

    /// Expresses a world point in this frame.
    pub fn to_local(&self, p: &Vec3) -> Vec3 {
        self.orientation.inverse() * (p - self.position)
    }

    pub fn to_world(&self, p: &Vec3) -> Vec3 {
        self.orientation * p + self.position
    }

    /// Orientation whose z axis points along `view` with x kept as close as
    /// possible to horizontal (orthogonal to world z).
    pub fn looking_along(position: Vec3, view: &Vec3) -> Result<Self> {
        let z = unit(view)?;
        let mut x = Vec3::z().cross(&z);
        if x.norm() < 1e-6 {
            x = Vec3::x();
        }
        let x = x.normalize();
        let y = z.cross(&x);
        let m = Matrix3::from_columns(&[x, y, z.into_inner()]);
        Ok(Self::new(position, Rotation::from_matrix_unchecked(m)))
    }
}

/// Stacked end-effector velocity `[linear; angular]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Twist {
    /// m/s
    pub linear: Vec3,
    /// rad/s
    pub angular: Vec3,
}

impl Twist {
    pub fn new(linear: Vec3, angular: Vec3) -> Self {
        Self { linear, angular }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn is_zero(&self) -> bool {
        self.linear == Vec3::zeros() && self.angular == Vec3::zeros()
    }

    pub fn is_finite(&self) -> bool {
        self.linear.iter().chain(self.angular.iter()).all(|v| v.is_finite())
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self::new(self.linear * s, self.angular * s)
    }

    pub fn to_vector(&self) -> Vector6<f64> {
        Vector6::new(
            self.linear.x,
            self.linear.y,
            self.linear.z,
            self.angular.x,
            self.angular.y,
            self.angular.z,
        )
    }

    pub fn from_vector(v: &Vector6<f64>) -> Self {
        Self::new(
            Vec3::new(v[0], v[1], v[2]),
            Vec3::new(v[3], v[4], v[5]),
        )
    }

    /// Uniformly scales the whole twist so that neither part exceeds its bound.
    /// The direction of the 6-vector is preserved.
    pub fn saturated(&self, max_linear: f64, max_angular: f64) -> Self {
        let mut scale: f64 = 1.0;
        let lin = self.linear.norm();
        let ang = self.angular.norm();
        if lin > max_linear {
            scale = scale.min(max_linear / lin);
        }
        if ang > max_angular {
            scale = scale.min(max_angular / ang);
        }
        if scale < 1.0 {
            self.scaled(scale)
        } else {
            *self
        }
    }
}

impl std::ops::Add for Twist {
    type Output = Twist;

    fn add(self, rhs: Twist) -> Twist {
        Twist::new(self.linear + rhs.linear, self.angular + rhs.angular)
    }
}

/// Skew-symmetric matrix with `skew(v) * w == v × w`.
pub fn skew(v: &Vec3) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Normalizes `v`, failing on (near) zero vectors.
pub fn unit(v: &Vec3) -> Result<UnitVec3> {
    let n = v.norm();
    if !(n > DEGENERACY_TOL) || !n.is_finite() {
        return Err(Error::Degenerate("zero-length vector"));
    }
    Ok(Unit::new_unchecked(v / n))
}

/// Angle and axis of the minimal rotation taking the direction of `a` onto
/// the direction of `b`.
///
/// Parallel inputs yield `theta = 0` with the fixed axis `+z`; callers that
/// multiply by `theta` get a zero command regardless of the axis.
/// Anti-parallel inputs have no unique axis and are reported as
/// [`Error::AntiParallel`].
pub fn angle_axis_between(a: &Vec3, b: &Vec3) -> Result<(f64, UnitVec3)> {
    let na = a.norm();
    let nb = b.norm();
    if !(na > DEGENERACY_TOL) || !(nb > DEGENERACY_TOL) {
        return Err(Error::Degenerate("angle between zero-length vectors"));
    }
    let cos = (a.dot(b) / (na * nb)).clamp(-1.0, 1.0);
    let theta = cos.acos();
    let cross = a.cross(b);
    let cn = cross.norm();
    // relative to |a||b| so the test is scale free
    if cn <= DEGENERACY_TOL * na * nb {
        if cos > 0.0 {
            return Ok((0.0, Vec3::z_axis()));
        }
        return Err(Error::AntiParallel);
    }
    Ok((theta, Unit::new_unchecked(cross / cn)))
}

/// Radial projection of `p` onto the sphere of `radius` around `center`.
pub fn project_onto_sphere(p: &Vec3, center: &Vec3, radius: f64) -> Result<Vec3> {
    if !(radius > 0.0) {
        return Err(Error::InvalidParameter("sphere radius must be positive"));
    }
    let d = p - center;
    let n = d.norm();
    if !(n > DEGENERACY_TOL) {
        return Err(Error::Degenerate("point coincides with sphere center"));
    }
    Ok(d * (radius / n) + center)
}

/// Rotation matrix `exp(skew(w))` (Rodrigues).
pub fn exp_so3(w: &Vec3) -> Rotation {
    Rotation::new(*w)
}

/// Re-orthonormalizes a nearly orthonormal matrix by Gram-Schmidt on its
/// columns, keeping the z axis direction exact.
pub fn orthonormalize(m: &Matrix3<f64>) -> Rotation {
    let z = m.column(2).normalize();
    let y0 = m.column(1).into_owned();
    let x = y0.cross(&z).normalize();
    let y = z.cross(&x);
    Rotation::from_matrix_unchecked(Matrix3::from_columns(&[x, y, z]))
}

/// Largest entry of `|RᵀR - I|`.
pub fn orthonormality_error(r: &Rotation) -> f64 {
    let m = r.matrix();
    (m.transpose() * m - Matrix3::identity()).amax()
}

/// Principal axes of a point set, sorted by decreasing variance.
#[derive(Debug, Clone, Copy)]
pub struct PrincipalAxes {
    pub mean: Vec3,
    pub values: [f64; 3],
    pub vectors: [Vec3; 3],
}

/// PCA of a non-empty point list (population covariance).
pub fn principal_axes(points: &[Vec3]) -> PrincipalAxes {
    let m = mean(points).unwrap_or_else(Vec3::zeros);
    let mut cov = Matrix3::zeros();
    for p in points {
        let d = p - m;
        cov += d * d.transpose();
    }
    cov /= points.len().max(1) as f64;
    let eig = cov.symmetric_eigen();
    let mut idx = [0usize, 1, 2];
    idx.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    PrincipalAxes {
        mean: m,
        values: idx.map(|i| eig.eigenvalues[i]),
        vectors: idx.map(|i| eig.eigenvectors.column(i).normalize()),
    }
}

/// Mean of a non-empty point list.
pub fn mean(points: &[Vec3]) -> Option<Vec3> {
    if points.is_empty() {
        return None;
    }
    let sum = points.iter().fold(Vec3::zeros(), |acc, p| acc + p);
    Some(sum / points.len() as f64)
}

/// Deterministic total order on points, used to fix summation orders.
pub fn lexicographic(a: &Vec3, b: &Vec3) -> std::cmp::Ordering {
    a.x.total_cmp(&b.x)
        .then(a.y.total_cmp(&b.y))
        .then(a.z.total_cmp(&b.z))
}
