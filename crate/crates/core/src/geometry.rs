//! Normal estimation, local reference frames and the Darboux-frame pair
//! features that the PFH descriptor family is built on.

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::math::{sym_eigen, Mat3, Vec3};
use crate::spatial::KdTree3;
use rayon::prelude::*;

/// Orthonormal right-handed frame at a keypoint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalReferenceFrame {
    pub x: Vec3,
    pub y: Vec3,
    pub z: Vec3,
}

impl LocalReferenceFrame {
    /// Coordinates of a world-space offset vector in this frame.
    pub fn to_local(&self, v: Vec3) -> Vec3 {
        Vec3::new(self.x.dot(v), self.y.dot(v), self.z.dot(v))
    }

    pub fn validate(&self, tol: f64) -> Result<()> {
        for (a, b) in [(self.x, self.y), (self.x, self.z), (self.y, self.z)] {
            if a.dot(b).abs() > tol {
                return Err(Error::InvalidInput("LRF axes not orthogonal".into()));
            }
        }
        for a in [self.x, self.y, self.z] {
            if (a.norm() - 1.0).abs() > tol {
                return Err(Error::InvalidInput("LRF axis not unit length".into()));
            }
        }
        if (self.x.cross(self.y) - self.z).norm() > tol {
            return Err(Error::InvalidInput("LRF is not right-handed".into()));
        }
        Ok(())
    }
}

/// Darboux-frame features of an ordered point pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairFeatures {
    /// angle(v, n_t) in [0, pi]
    pub alpha: f64,
    /// angle(u, (p_t - p_s)/d) in [0, pi]
    pub phi: f64,
    /// atan2(w . n_t, u . n_t) in (-pi, pi]
    pub theta: f64,
    /// |p_t - p_s| in meters
    pub d: f64,
    /// true when the second argument of [`pair_features`] was chosen as
    /// the source by the Darboux ordering convention
    pub swapped: bool,
}

/// Estimates a normal per valid point from the covariance of its k nearest
/// neighbors; the smallest-eigenvalue eigenvector, sign-flipped to face
/// `viewpoint`. Degenerate (rank < 2) neighborhoods yield `None`.
pub fn estimate_normals(
    cloud: &PointCloud,
    tree: &KdTree3,
    k: usize,
    viewpoint: Vec3,
) -> Vec<Option<Vec3>> {
    assert!(k >= 3, "normal estimation needs k >= 3");
    let normals: Vec<Option<Vec3>> = cloud
        .points
        .par_iter()
        .map(|p| {
            if !p.is_valid() {
                return None;
            }
            let q = p.position();
            let nbrs = tree.knn(q, k);
            if nbrs.len() < 3 {
                return None;
            }
            let mut centroid = Vec3::ZERO;
            for (i, _) in &nbrs {
                centroid = centroid + cloud.points[*i].position();
            }
            centroid = centroid / nbrs.len() as f64;
            let mut cov = Mat3::zeros();
            for (i, _) in &nbrs {
                let d = cloud.points[*i].position() - centroid;
                cov = cov.add(&Mat3::outer(d, d));
            }
            cov = cov.scale(1.0 / nbrs.len() as f64);
            let (vals, vecs) = sym_eigen(&cov);
            // rank < 2: the two largest eigenvalues must carry real spread
            if vals[1] <= 1e-12 * vals[0].max(1e-300) || vals[0] <= 0.0 {
                return None;
            }
            let mut n = vecs.column(2).normalized();
            if n.dot(viewpoint - q) < 0.0 {
                n = -n;
            }
            Some(n)
        })
        .collect();
    normals
}

/// Convenience wrapper: returns a copy of the cloud with normals attached.
pub fn cloud_with_normals(
    cloud: &PointCloud,
    tree: &KdTree3,
    k: usize,
    viewpoint: Vec3,
) -> PointCloud {
    let normals = estimate_normals(cloud, tree, k, viewpoint);
    let mut out = cloud.clone();
    for (p, n) in out.points.iter_mut().zip(normals) {
        p.normal = n;
    }
    out
}

/// SHOT-style local reference frame: eigendecomposition of the
/// radius-weighted scatter around the keypoint (weights `radius - d_i`),
/// with sign disambiguation toward the majority half-space.
pub fn compute_lrf(
    cloud: &PointCloud,
    tree: &KdTree3,
    keypoint: Vec3,
    radius: f64,
) -> Result<LocalReferenceFrame> {
    let nbrs = tree.radius_search(keypoint, radius);
    let offsets: Vec<(Vec3, f64)> = nbrs
        .iter()
        .filter(|(_, d)| *d > 0.0)
        .map(|(i, d)| (cloud.points[*i].position() - keypoint, *d))
        .collect();
    if offsets.len() < 5 {
        return Err(Error::InsufficientNeighbors { found: offsets.len(), needed: 5 });
    }

    let mut wsum = 0.0;
    let mut m = Mat3::zeros();
    for (off, d) in &offsets {
        let w = radius - d;
        wsum += w;
        m = m.add(&Mat3::outer(*off, *off).scale(w));
    }
    m = m.scale(1.0 / wsum);
    let (_vals, vecs) = sym_eigen(&m);

    let disambiguate = |axis: Vec3| -> Vec3 {
        let mut pos = 0usize;
        let mut neg = 0usize;
        for (off, _) in &offsets {
            let d = off.dot(axis);
            if d > 0.0 {
                pos += 1;
            } else if d < 0.0 {
                neg += 1;
            }
        }
        if pos > neg {
            axis
        } else if neg > pos {
            -axis
        } else {
            // count tie: fall back to the (pose-invariant) sum of
            // projections
            let total: f64 = offsets.iter().map(|(off, _)| off.dot(axis)).sum();
            if total >= 0.0 {
                axis
            } else {
                -axis
            }
        }
    };

    let x = disambiguate(vecs.column(0).normalized());
    let z = disambiguate(vecs.column(2).normalized());
    let y = z.cross(x);
    Ok(LocalReferenceFrame { x, y, z })
}

/// Darboux-frame pair features. The source point is the one whose normal
/// makes the smaller angle with the connecting line; ties keep the first
/// argument as source.
pub fn pair_features(p1: Vec3, n1: Vec3, p2: Vec3, n2: Vec3) -> Result<PairFeatures> {
    let diff = p2 - p1;
    let d = diff.norm();
    if d == 0.0 {
        return Err(Error::Degenerate("coincident points in pair features".into()));
    }
    let line = diff / d;

    // smaller angle with the line <=> larger |cos|; near-ties (e.g.
    // neighboring points whose estimated normals are almost identical)
    // keep the input order so the choice is stable under recomputation
    // noise
    let c1 = n1.dot(line).abs();
    let c2 = n2.dot(line).abs();
    let (ps, ns, pt, nt, swapped) = if c2 > c1 + 1e-6 {
        (p2, n2, p1, n1, true)
    } else {
        (p1, n1, p2, n2, false)
    };

    let dir = (pt - ps) / d;
    let u = ns;
    let mut v = u.cross(dir);
    let vn = v.norm();
    if vn < 1e-12 {
        v = u.any_orthonormal();
    } else {
        v = v / vn;
    }
    let w = u.cross(v);

    let alpha = v.dot(nt).clamp(-1.0, 1.0).acos();
    let phi = u.dot(dir).clamp(-1.0, 1.0).acos();
    let theta = (w.dot(nt)).atan2(u.dot(nt));

    Ok(PairFeatures { alpha, phi, theta, d, swapped })
}
