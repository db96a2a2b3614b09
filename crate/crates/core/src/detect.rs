//! Keypoint extraction: uniform (voxel) sampling, intrinsic shape
//! signatures, and FAST corners on the registered RGB image lifted to 3D.

use crate::cloud::{bounding_box, PointCloud};
use crate::error::{Error, Result};
use crate::io::pnm::GrayImage;
use crate::math::{sym_eigen, Mat3, Vec3};
use crate::spatial::KdTree3;
use rayon::prelude::*;
use std::collections::HashMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DetectorTag {
    #[serde(rename = "us")]
    UniformSampling,
    Iss,
    Fast,
}

impl DetectorTag {
    pub fn name(&self) -> &'static str {
        match self {
            DetectorTag::UniformSampling => "us",
            DetectorTag::Iss => "iss",
            DetectorTag::Fast => "fast",
        }
    }

    pub fn parse(s: &str) -> crate::error::Result<Self> {
        match s {
            "us" => Ok(DetectorTag::UniformSampling),
            "iss" => Ok(DetectorTag::Iss),
            "fast" => Ok(DetectorTag::Fast),
            other => Err(crate::error::Error::InvalidInput(format!(
                "unknown detector {other}"
            ))),
        }
    }
}

/// Keypoints as indices into a source cloud plus their positions.
#[derive(Debug, Clone)]
pub struct KeypointSet {
    pub indices: Vec<usize>,
    pub positions: Vec<Vec3>,
    pub detector: DetectorTag,
    pub params: String,
}

impl KeypointSet {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Uniqueness and finiteness invariants.
    pub fn validate(&self) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        for &i in &self.indices {
            if !seen.insert(i) {
                return Err(Error::InvalidInput(format!("duplicate keypoint index {i}")));
            }
        }
        if self.positions.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidInput("non-finite keypoint position".into()));
        }
        if self.positions.len() != self.indices.len() {
            return Err(Error::DimensionMismatch(
                "keypoint indices/positions length mismatch".into(),
            ));
        }
        Ok(())
    }

    /// Remaps indices through a provenance table (filtered cloud -> source
    /// cloud); positions are unchanged.
    pub fn remap(&self, source_indices: &[usize]) -> KeypointSet {
        KeypointSet {
            indices: self.indices.iter().map(|&i| source_indices[i]).collect(),
            positions: self.positions.clone(),
            detector: self.detector,
            params: self.params.clone(),
        }
    }
}

/// Voxel-grid downsampling: one keypoint per non-empty voxel, the input
/// point nearest that voxel's centroid (ties: lowest index). The grid is
/// anchored at the cloud's AABB minimum.
pub fn uniform_sampling(cloud: &PointCloud, leaf: f64) -> Result<KeypointSet> {
    assert!(leaf > 0.0, "leaf size must be positive");
    let bb = bounding_box(cloud)?;

    let mut voxels: HashMap<(i64, i64, i64), Vec<usize>> = HashMap::new();
    for (i, p) in cloud.points.iter().enumerate() {
        if !p.is_valid() {
            continue;
        }
        let q = p.position() - bb.min;
        let key = (
            (q.x / leaf).floor() as i64,
            (q.y / leaf).floor() as i64,
            (q.z / leaf).floor() as i64,
        );
        voxels.entry(key).or_default().push(i);
    }

    let mut indices = Vec::with_capacity(voxels.len());
    for members in voxels.values() {
        let mut centroid = Vec3::ZERO;
        for &i in members {
            centroid = centroid + cloud.points[i].position();
        }
        centroid = centroid / members.len() as f64;
        let mut best = members[0];
        let mut best_d2 = (cloud.points[best].position() - centroid).norm_sq();
        for &i in &members[1..] {
            let d2 = (cloud.points[i].position() - centroid).norm_sq();
            if d2 < best_d2 || (d2 == best_d2 && i < best) {
                best = i;
                best_d2 = d2;
            }
        }
        indices.push(best);
    }
    indices.sort_unstable();

    let positions = indices.iter().map(|&i| cloud.points[i].position()).collect();
    Ok(KeypointSet {
        indices,
        positions,
        detector: DetectorTag::UniformSampling,
        params: format!("leaf={leaf}"),
    })
}

#[derive(Debug, Clone)]
pub struct IssParams {
    pub salient_radius: f64,
    pub nms_radius: f64,
    pub gamma21: f64,
    pub gamma32: f64,
    pub min_neighbors: usize,
}

impl Default for IssParams {
    fn default() -> Self {
        IssParams {
            salient_radius: 0.01,
            nms_radius: 0.006,
            gamma21: 0.975,
            gamma32: 0.975,
            min_neighbors: 5,
        }
    }
}

/// Intrinsic shape signatures with density weighting (w = 1 / neighbor
/// count) and non-maximum suppression on the smallest eigenvalue.
pub fn iss_detect(cloud: &PointCloud, tree: &KdTree3, params: &IssParams) -> Result<KeypointSet> {
    assert!(params.salient_radius > 0.0 && params.nms_radius > 0.0);
    let n = cloud.len();

    // density weights: 1 / |neighborhood| within the salient radius
    let counts: Vec<usize> = cloud
        .points
        .par_iter()
        .map(|p| {
            if p.is_valid() {
                tree.radius_count(p.position(), params.salient_radius)
            } else {
                0
            }
        })
        .collect();

    // per-point smallest eigenvalue, None when not a candidate
    let lambda3: Vec<Option<f64>> = cloud
        .points
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            if !p.is_valid() {
                return None;
            }
            let q = p.position();
            let nbrs = tree.radius_search(q, params.salient_radius);
            if nbrs.len() < params.min_neighbors {
                return None;
            }
            let mut m = Mat3::zeros();
            let mut wsum = 0.0;
            for (j, _) in &nbrs {
                if *j == i {
                    continue;
                }
                let w = 1.0 / counts[*j].max(1) as f64;
                let d = cloud.points[*j].position() - q;
                m = m.add(&Mat3::outer(d, d).scale(w));
                wsum += w;
            }
            if wsum <= 0.0 {
                return None;
            }
            m = m.scale(1.0 / wsum);
            let (vals, _) = sym_eigen(&m);
            let (l1, l2, l3) = (vals[0], vals[1], vals[2]);
            // degenerate scatter (flat or linear neighborhoods) never counts
            if l1 <= 0.0 || l2 <= 0.0 || l3 <= 1e-9 * l1 {
                return None;
            }
            if l2 / l1 < params.gamma21 && l3 / l2 < params.gamma32 {
                Some(l3)
            } else {
                None
            }
        })
        .collect();

    // NMS: strict maximum of lambda3 among candidates within nms_radius,
    // ties broken toward the lowest index
    let keep: Vec<usize> = (0..n)
        .into_par_iter()
        .filter(|&i| {
            let li = match lambda3[i] {
                Some(l) => l,
                None => return false,
            };
            let nbrs = tree.radius_search(cloud.points[i].position(), params.nms_radius);
            for (j, _) in nbrs {
                if j == i {
                    continue;
                }
                if let Some(lj) = lambda3[j] {
                    if lj > li || (lj == li && j < i) {
                        return false;
                    }
                }
            }
            true
        })
        .collect();

    let mut indices = keep;
    indices.sort_unstable();
    let positions = indices.iter().map(|&i| cloud.points[i].position()).collect();
    Ok(KeypointSet {
        indices,
        positions,
        detector: DetectorTag::Iss,
        params: format!(
            "salient_radius={},nms_radius={},gamma21={},gamma32={},min_neighbors={}",
            params.salient_radius,
            params.nms_radius,
            params.gamma21,
            params.gamma32,
            params.min_neighbors
        ),
    })
}

/// A FAST corner in pixel coordinates with its score (the largest
/// threshold at which the segment test still fires).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FastKeypoint {
    pub x: usize,
    pub y: usize,
    pub score: u8,
}

const CIRCLE: [(i64, i64); 16] = [
    (0, -3),
    (1, -3),
    (2, -2),
    (3, -1),
    (3, 0),
    (3, 1),
    (2, 2),
    (1, 3),
    (0, 3),
    (-1, 3),
    (-2, 2),
    (-3, 1),
    (-3, 0),
    (-3, -1),
    (-2, -2),
    (-1, -3),
];

fn segment_test(image: &GrayImage, x: usize, y: usize, t: i16) -> bool {
    let c = image.get(x, y) as i16;
    let mut states = [0i8; 16];
    for (k, (dx, dy)) in CIRCLE.iter().enumerate() {
        let v = image.get((x as i64 + dx) as usize, (y as i64 + dy) as usize) as i16;
        states[k] = if v > c + t {
            1
        } else if v < c - t {
            -1
        } else {
            0
        };
    }
    for target in [1i8, -1i8] {
        let mut run = 0;
        // walk the circle twice to catch wrap-around runs
        for k in 0..32 {
            if states[k % 16] == target {
                run += 1;
                if run >= 9 {
                    return true;
                }
            } else {
                run = 0;
            }
        }
    }
    false
}

/// FAST-9 segment test with optional 3x3 non-maximum suppression on the
/// corner score.
pub fn fast_detect(image: &GrayImage, threshold: u8, use_nms: bool) -> Vec<FastKeypoint> {
    assert!(image.width >= 7 && image.height >= 7, "image must be at least 7x7");
    let w = image.width;
    let h = image.height;

    let scores: Vec<Option<u8>> = (0..w * h)
        .into_par_iter()
        .map(|idx| {
            let x = idx % w;
            let y = idx / w;
            if x < 3 || y < 3 || x + 3 >= w || y + 3 >= h {
                return None;
            }
            if !segment_test(image, x, y, threshold as i16) {
                return None;
            }
            // score: the largest threshold at which the corner survives;
            // segment_test is monotone in t so binary search is exact
            let mut lo = threshold as i16;
            let mut hi = 255i16;
            while lo < hi {
                let mid = (lo + hi + 1) / 2;
                if segment_test(image, x, y, mid) {
                    lo = mid;
                } else {
                    hi = mid - 1;
                }
            }
            Some(lo as u8)
        })
        .collect();

    let mut out = Vec::new();
    for y in 3..h - 3 {
        for x in 3..w - 3 {
            let s = match scores[y * w + x] {
                Some(s) => s,
                None => continue,
            };
            if use_nms {
                let mut keep = true;
                'nms: for dy in -1i64..=1 {
                    for dx in -1i64..=1 {
                        if dx == 0 && dy == 0 {
                            continue;
                        }
                        let nx = (x as i64 + dx) as usize;
                        let ny = (y as i64 + dy) as usize;
                        if let Some(ns) = scores[ny * w + nx] {
                            let my = y * w + x;
                            let theirs = ny * w + nx;
                            if ns > s || (ns == s && theirs < my) {
                                keep = false;
                                break 'nms;
                            }
                        }
                    }
                }
                if !keep {
                    continue;
                }
            }
            out.push(FastKeypoint { x, y, score: s });
        }
    }
    out
}

/// Maps 2D pixel keypoints onto the organized cloud; pixels over invalid
/// points are dropped.
pub fn lift_to_3d(keypoints2d: &[(usize, usize)], cloud: &PointCloud) -> Result<KeypointSet> {
    if !cloud.is_organized() {
        return Err(Error::InvalidInput("lift_to_3d needs an organized cloud".into()));
    }
    let mut indices = Vec::new();
    let mut positions = Vec::new();
    for &(x, y) in keypoints2d {
        if x >= cloud.width || y >= cloud.height {
            return Err(Error::InvalidInput(format!(
                "pixel ({x},{y}) outside {}x{} cloud",
                cloud.width, cloud.height
            )));
        }
        let idx = y * cloud.width + x;
        let p = &cloud.points[idx];
        if p.is_valid() {
            indices.push(idx);
            positions.push(p.position());
        }
    }
    Ok(KeypointSet {
        indices,
        positions,
        detector: DetectorTag::Fast,
        params: String::new(),
    })
}
