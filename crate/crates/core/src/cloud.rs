//! Point cloud data model: points, organized/unorganized clouds, rigid
//! transforms and axis-aligned bounding boxes.

use crate::error::{Error, Result};
use crate::math::{svd3, Mat3, Vec3};
use serde::{Deserialize, Serialize};

/// A single point. Invalid points carry NaN in all three coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub rgb: Option<[u8; 3]>,
    pub normal: Option<Vec3>,
}

impl Point3 {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Point3 { x, y, z, rgb: None, normal: None }
    }

    pub fn invalid() -> Self {
        Point3::new(f64::NAN, f64::NAN, f64::NAN)
    }

    pub fn with_rgb(mut self, rgb: [u8; 3]) -> Self {
        self.rgb = Some(rgb);
        self
    }

    pub fn with_normal(mut self, n: Vec3) -> Self {
        self.normal = Some(n);
        self
    }

    pub fn is_valid(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn position(&self) -> Vec3 {
        Vec3::new(self.x, self.y, self.z)
    }
}

/// A point cloud, possibly organized on the sensor pixel grid.
///
/// Organized clouds (`height > 1`) store the point of pixel `(row, col)`
/// at index `row * width + col`.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Point3>,
    pub width: usize,
    pub height: usize,
    pub dense: bool,
}

impl PointCloud {
    /// Unorganized cloud (height = 1).
    pub fn unorganized(points: Vec<Point3>) -> Self {
        let width = points.len();
        let dense = points.iter().all(|p| p.is_valid());
        PointCloud { points, width, height: 1, dense }
    }

    pub fn organized(points: Vec<Point3>, width: usize, height: usize) -> Result<Self> {
        if width * height != points.len() {
            return Err(Error::DimensionMismatch(format!(
                "width {} x height {} != {} points",
                width,
                height,
                points.len()
            )));
        }
        let dense = points.iter().all(|p| p.is_valid());
        Ok(PointCloud { points, width, height, dense })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn is_organized(&self) -> bool {
        self.height > 1
    }

    pub fn at(&self, row: usize, col: usize) -> &Point3 {
        &self.points[row * self.width + col]
    }

    pub fn valid_count(&self) -> usize {
        self.points.iter().filter(|p| p.is_valid()).count()
    }

    pub fn has_rgb(&self) -> bool {
        self.points.iter().any(|p| p.rgb.is_some())
    }

    pub fn has_normals(&self) -> bool {
        self.points.iter().any(|p| p.normal.is_some())
    }

    /// Checks the structural invariants, returning a description of the
    /// first violation found.
    pub fn validate(&self) -> Result<()> {
        if self.width * self.height != self.points.len() {
            return Err(Error::DimensionMismatch(format!(
                "width {} x height {} != {} points",
                self.width,
                self.height,
                self.points.len()
            )));
        }
        if self.dense && self.points.iter().any(|p| !p.is_valid()) {
            return Err(Error::InvalidInput("dense cloud contains invalid points".into()));
        }
        for (i, p) in self.points.iter().enumerate() {
            let nans = [p.x.is_nan(), p.y.is_nan(), p.z.is_nan()];
            if nans.iter().any(|&b| b) && !nans.iter().all(|&b| b) {
                return Err(Error::InvalidInput(format!(
                    "point {i} is partially NaN-marked"
                )));
            }
            if let Some(n) = p.normal {
                if (n.norm() - 1.0).abs() > 1e-6 {
                    return Err(Error::InvalidInput(format!(
                        "point {i} normal is not unit length"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// A rotation plus translation; rotation must be a proper orthogonal matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidTransform {
    pub rotation: Mat3,
    pub translation: Vec3,
}

impl RigidTransform {
    pub fn identity() -> Self {
        RigidTransform { rotation: Mat3::identity(), translation: Vec3::ZERO }
    }

    pub fn new(rotation: Mat3, translation: Vec3) -> Self {
        RigidTransform { rotation, translation }
    }

    pub fn translation_only(t: Vec3) -> Self {
        RigidTransform { rotation: Mat3::identity(), translation: t }
    }

    /// Rotation about a unit axis by an angle (Rodrigues formula).
    pub fn from_axis_angle(axis: Vec3, angle: f64, translation: Vec3) -> Self {
        let a = axis.normalized();
        let (s, c) = angle.sin_cos();
        let k = Mat3 {
            m: [
                [0.0, -a.z, a.y],
                [a.z, 0.0, -a.x],
                [-a.y, a.x, 0.0],
            ],
        };
        let r = Mat3::identity()
            .add(&k.scale(s))
            .add(&(k * k).scale(1.0 - c));
        RigidTransform { rotation: r, translation }
    }

    pub fn apply(&self, p: Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    pub fn rotate(&self, v: Vec3) -> Vec3 {
        self.rotation * v
    }

    pub fn inverse(&self) -> RigidTransform {
        let rt = self.rotation.transpose();
        RigidTransform { rotation: rt, translation: -(rt * self.translation) }
    }

    /// `self` applied after `other`: (self ∘ other)(p) = self(other(p)).
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        RigidTransform {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    /// Orthonormality and determinant check at the stated tolerance.
    pub fn validate(&self, tol: f64) -> Result<()> {
        let rtr = self.rotation.transpose() * self.rotation;
        let id = Mat3::identity();
        for i in 0..3 {
            for j in 0..3 {
                if (rtr.m[i][j] - id.m[i][j]).abs() > tol {
                    return Err(Error::InvalidInput("rotation is not orthonormal".into()));
                }
            }
        }
        if (self.rotation.det() - 1.0).abs() > tol {
            return Err(Error::InvalidInput("rotation determinant is not +1".into()));
        }
        Ok(())
    }

    /// Row-major 3x4 flattening [R | t].
    pub fn to_row_major_3x4(&self) -> [f64; 12] {
        let m = &self.rotation.m;
        let t = self.translation;
        [
            m[0][0], m[0][1], m[0][2], t.x,
            m[1][0], m[1][1], m[1][2], t.y,
            m[2][0], m[2][1], m[2][2], t.z,
        ]
    }

    pub fn from_row_major_3x4(v: &[f64; 12]) -> Self {
        RigidTransform {
            rotation: Mat3 {
                m: [
                    [v[0], v[1], v[2]],
                    [v[4], v[5], v[6]],
                    [v[8], v[9], v[10]],
                ],
            },
            translation: Vec3::new(v[3], v[7], v[11]),
        }
    }

    /// Row-major 4x4 homogeneous matrix.
    pub fn to_row_major_4x4(&self) -> [f64; 16] {
        let r = self.to_row_major_3x4();
        [
            r[0], r[1], r[2], r[3],
            r[4], r[5], r[6], r[7],
            r[8], r[9], r[10], r[11],
            0.0, 0.0, 0.0, 1.0,
        ]
    }

    pub fn from_row_major_4x4(v: &[f64; 16]) -> Self {
        RigidTransform::from_row_major_3x4(&[
            v[0], v[1], v[2], v[3],
            v[4], v[5], v[6], v[7],
            v[8], v[9], v[10], v[11],
        ])
    }

    /// Re-projects the rotation onto SO(3); useful after composing many
    /// transforms or parsing from text.
    pub fn orthonormalized(&self) -> RigidTransform {
        let (u, _s, v) = svd3(&self.rotation);
        let mut r = u * v.transpose();
        if r.det() < 0.0 {
            let u2 = Mat3::from_columns(u.column(0), u.column(1), -u.column(2));
            r = u2 * v.transpose();
        }
        RigidTransform { rotation: r, translation: self.translation }
    }

    /// Rotation angle (radians) between this transform's rotation and
    /// another's; 0 means identical rotations.
    pub fn rotation_angle_to(&self, other: &RigidTransform) -> f64 {
        let d = self.rotation.transpose() * other.rotation;
        let tr = d.m[0][0] + d.m[1][1] + d.m[2][2];
        ((tr - 1.0) / 2.0).clamp(-1.0, 1.0).acos()
    }
}

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn new(min: Vec3, max: Vec3) -> Result<Self> {
        if min.x > max.x || min.y > max.y || min.z > max.z {
            return Err(Error::InvalidInput("aabb min exceeds max".into()));
        }
        Ok(Aabb { min, max })
    }

    pub fn volume(&self) -> f64 {
        (self.max.x - self.min.x) * (self.max.y - self.min.y) * (self.max.z - self.min.z)
    }

    pub fn intersection(&self, o: &Aabb) -> Option<Aabb> {
        let min = self.min.max_component_wise(o.min);
        let max = self.max.min_component_wise(o.max);
        if min.x <= max.x && min.y <= max.y && min.z <= max.z {
            Some(Aabb { min, max })
        } else {
            None
        }
    }

    pub fn overlaps(&self, o: &Aabb) -> bool {
        self.intersection(o).is_some()
    }
}

/// Applies a rigid transform to every valid point (and its normal);
/// invalid points and organization are preserved.
pub fn transform_cloud(cloud: &PointCloud, t: &RigidTransform) -> PointCloud {
    let points = cloud
        .points
        .iter()
        .map(|p| {
            if !p.is_valid() {
                return *p;
            }
            let q = t.apply(p.position());
            let mut out = Point3::new(q.x, q.y, q.z);
            out.rgb = p.rgb;
            out.normal = p.normal.map(|n| t.rotate(n));
            out
        })
        .collect();
    PointCloud {
        points,
        width: cloud.width,
        height: cloud.height,
        dense: cloud.dense,
    }
}

/// Tight axis-aligned bounding box over the valid points.
pub fn bounding_box(cloud: &PointCloud) -> Result<Aabb> {
    let mut min = Vec3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY);
    let mut max = Vec3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    let mut any = false;
    for p in &cloud.points {
        if !p.is_valid() {
            continue;
        }
        any = true;
        min = min.min_component_wise(p.position());
        max = max.max_component_wise(p.position());
    }
    if !any {
        return Err(Error::Empty("cloud has no valid points".into()));
    }
    Ok(Aabb { min, max })
}
