//! Model database, correspondence matching, geometric consistency
//! grouping, and rigid pose estimation.
//!
//! The database holds one descriptor index over every view of every
//! model. Matching is exact global nearest-neighbor: each scene keypoint
//! contributes exactly one correspondence. Correspondences are grouped
//! per model with a greedy pairwise-distance consistency check, and the
//! winning cluster yields a model-to-scene pose via Kabsch alignment.

use crate::cloud::RigidTransform;
use crate::describe::{Descriptor, DescriptorFamily};
use crate::error::{Error, Result};
use crate::math::{svd3, Mat3, Vec3};
use crate::spatial::{DescriptorIndex, Provenance};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;

/// One stored view of a model: keypoint positions already mapped into the
/// model frame, aligned row-for-row with the database index entries for
/// this view.
#[derive(Debug, Clone)]
pub struct ModelView {
    pub view_id: String,
    /// keypoints in the model frame
    pub keypoints: Vec<Vec3>,
    pub view_to_model: RigidTransform,
}

#[derive(Debug, Clone)]
pub struct ModelEntry {
    pub id: String,
    pub views: Vec<ModelView>,
}

pub struct ModelDatabase {
    pub family: DescriptorFamily,
    pub models: Vec<ModelEntry>,
    pub index: DescriptorIndex,
}

/// Collects views in any order; `finish` sorts models and views by id so
/// index row order always equals lexicographic provenance order.
pub struct DatabaseBuilder {
    family: DescriptorFamily,
    views: Vec<(String, String, Vec<Vec3>, Vec<Vec<f64>>, RigidTransform)>,
}

impl DatabaseBuilder {
    pub fn new(family: DescriptorFamily) -> Self {
        DatabaseBuilder { family, views: Vec::new() }
    }

    /// Adds one view. `keypoints` are in the view frame and must align
    /// with `descriptors`; all-zero descriptors (unusable supports) are
    /// dropped here, so stored rows are all informative.
    pub fn add_view(
        &mut self,
        model_id: &str,
        view_id: &str,
        keypoints: &[Vec3],
        descriptors: &[Descriptor],
        view_to_model: RigidTransform,
    ) -> Result<()> {
        if keypoints.len() != descriptors.len() {
            return Err(Error::DimensionMismatch(format!(
                "view {model_id}/{view_id}: {} keypoints, {} descriptors",
                keypoints.len(),
                descriptors.len()
            )));
        }
        view_to_model.validate(1e-9)?;
        if self
            .views
            .iter()
            .any(|(m, v, ..)| m == model_id && v == view_id)
        {
            return Err(Error::InvalidInput(format!(
                "duplicate view {model_id}/{view_id}"
            )));
        }
        let mut kept_kps = Vec::new();
        let mut kept_rows = Vec::new();
        for (kp, d) in keypoints.iter().zip(descriptors) {
            if d.family != self.family {
                return Err(Error::InvalidInput(format!(
                    "descriptor family {} in a {} database",
                    d.family.name(),
                    self.family.name()
                )));
            }
            d.validate()?;
            if d.is_zero() {
                continue;
            }
            kept_kps.push(view_to_model.apply(*kp));
            kept_rows.push(d.values.clone());
        }
        self.views.push((
            model_id.to_string(),
            view_id.to_string(),
            kept_kps,
            kept_rows,
            view_to_model,
        ));
        Ok(())
    }

    pub fn finish(mut self) -> Result<ModelDatabase> {
        if self.views.is_empty() {
            return Err(Error::Empty("model database has no views".into()));
        }
        self.views
            .sort_by(|a, b| (a.0.as_str(), a.1.as_str()).cmp(&(b.0.as_str(), b.1.as_str())));

        let mut models: Vec<ModelEntry> = Vec::new();
        let mut index = DescriptorIndex::new(self.family.len());
        for (model_id, view_id, kps, rows, view_to_model) in self.views {
            if models.last().map(|m| m.id.as_str()) != Some(model_id.as_str()) {
                models.push(ModelEntry { id: model_id.clone(), views: Vec::new() });
            }
            let model_idx = models.len() - 1;
            let view_idx = models[model_idx].views.len();
            for (k, row) in rows.iter().enumerate() {
                index.push(
                    row,
                    Provenance {
                        model: model_idx as u32,
                        view: view_idx as u32,
                        keypoint: k as u32,
                    },
                )?;
            }
            models[model_idx].views.push(ModelView {
                view_id,
                keypoints: kps,
                view_to_model,
            });
        }
        Ok(ModelDatabase { family: self.family, models, index })
    }
}

// ---------------------------------------------------------------------
// persistence

const DB_MAGIC: &[u8; 4] = b"SBDB";

#[derive(Serialize, Deserialize)]
struct ManifestView {
    view_id: String,
    file: String,
    view_to_model: Vec<f64>, // row-major 4x4
}

#[derive(Serialize, Deserialize)]
struct ManifestModel {
    id: String,
    views: Vec<ManifestView>,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    family: DescriptorFamily,
    models: Vec<ManifestModel>,
}

impl ModelDatabase {
    /// Writes the database to a directory: a JSON manifest plus one
    /// binary file per view (little-endian keypoints and descriptor rows).
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut manifest = Manifest { family: self.family, models: Vec::new() };
        let mut row = 0usize;
        for (mi, model) in self.models.iter().enumerate() {
            let mut mm = ManifestModel { id: model.id.clone(), views: Vec::new() };
            for (vi, view) in model.views.iter().enumerate() {
                let file = format!("m{mi:03}_v{vi:03}.bin");
                let path = dir.join(&file);
                let mut buf: Vec<u8> = Vec::new();
                buf.extend_from_slice(DB_MAGIC);
                buf.push(1u8); // version
                buf.extend_from_slice(&(self.family.len() as u32).to_le_bytes());
                buf.extend_from_slice(&(view.keypoints.len() as u32).to_le_bytes());
                for (k, kp) in view.keypoints.iter().enumerate() {
                    for c in [kp.x, kp.y, kp.z] {
                        buf.extend_from_slice(&c.to_le_bytes());
                    }
                    let r = self.index.row(row + k);
                    for v in r {
                        buf.extend_from_slice(&v.to_le_bytes());
                    }
                }
                row += view.keypoints.len();
                let mut f = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
                f.write_all(&buf).map_err(|e| Error::io(&path, e))?;
                mm.views.push(ManifestView {
                    view_id: view.view_id.clone(),
                    file,
                    view_to_model: view.view_to_model.to_row_major_4x4().to_vec(),
                });
            }
            manifest.models.push(mm);
        }
        let mpath = dir.join("manifest.json");
        let json = serde_json::to_string_pretty(&manifest)?;
        std::fs::write(&mpath, json).map_err(|e| Error::io(&mpath, e))?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<ModelDatabase> {
        let mpath = dir.join("manifest.json");
        let json = std::fs::read_to_string(&mpath).map_err(|e| Error::io(&mpath, e))?;
        let manifest: Manifest = serde_json::from_str(&json)?;
        let dim = manifest.family.len();
        let mut models = Vec::new();
        let mut index = DescriptorIndex::new(dim);
        for (mi, mm) in manifest.models.iter().enumerate() {
            let mut entry = ModelEntry { id: mm.id.clone(), views: Vec::new() };
            for (vi, mv) in mm.views.iter().enumerate() {
                let path = dir.join(&mv.file);
                let mut buf = Vec::new();
                std::fs::File::open(&path)
                    .and_then(|mut f| f.read_to_end(&mut buf))
                    .map_err(|e| Error::io(&path, e))?;
                if buf.len() < 13 || &buf[0..4] != DB_MAGIC || buf[4] != 1 {
                    return Err(Error::parse(&path, "header", "bad database file header"));
                }
                let fdim = u32::from_le_bytes(buf[5..9].try_into().unwrap()) as usize;
                let count = u32::from_le_bytes(buf[9..13].try_into().unwrap()) as usize;
                if fdim != dim {
                    return Err(Error::parse(
                        &path,
                        "header",
                        format!("dimension {fdim} does not match family {}", dim),
                    ));
                }
                let stride = (3 + dim) * 8;
                if buf.len() != 13 + count * stride {
                    return Err(Error::parse(&path, "header", "truncated database file"));
                }
                let mut kps = Vec::with_capacity(count);
                let rd = |o: usize| f64::from_le_bytes(buf[o..o + 8].try_into().unwrap());
                for k in 0..count {
                    let base = 13 + k * stride;
                    kps.push(Vec3::new(rd(base), rd(base + 8), rd(base + 16)));
                    let row: Vec<f64> =
                        (0..dim).map(|j| rd(base + 24 + j * 8)).collect();
                    index.push(
                        &row,
                        Provenance {
                            model: mi as u32,
                            view: vi as u32,
                            keypoint: k as u32,
                        },
                    )?;
                }
                if mv.view_to_model.len() != 16 {
                    return Err(Error::parse(&path, "header", "transform must have 16 entries"));
                }
                let t = RigidTransform::from_row_major_4x4(
                    mv.view_to_model.as_slice().try_into().unwrap(),
                );
                t.validate(1e-9)?;
                entry.views.push(ModelView {
                    view_id: mv.view_id.clone(),
                    keypoints: kps,
                    view_to_model: t,
                });
            }
            models.push(entry);
        }
        Ok(ModelDatabase { family: manifest.family, models, index })
    }
}

// ---------------------------------------------------------------------
// matching

/// One scene keypoint matched to its globally nearest database row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correspondence {
    pub scene_keypoint: usize,
    pub target: Provenance,
    pub distance: f64,
}

/// Exactly one correspondence per scene descriptor (all-zero scene
/// descriptors are skipped: their support was unusable). Output is in
/// scene keypoint order.
pub fn match_scene(db: &ModelDatabase, scene: &[Descriptor]) -> Result<Vec<Correspondence>> {
    if db.index.is_empty() {
        return Err(Error::Empty("descriptor index is empty".into()));
    }
    let results: Vec<Option<Correspondence>> = scene
        .par_iter()
        .map(|d| {
            if d.family != db.family {
                return Err(Error::InvalidInput(format!(
                    "scene descriptor family {} in a {} database",
                    d.family.name(),
                    db.family.name()
                )));
            }
            if d.is_zero() {
                return Ok(None);
            }
            let (prov, dist) = db.index.nearest(&d.values)?;
            Ok(Some(Correspondence {
                scene_keypoint: d.keypoint,
                target: prov,
                distance: dist,
            }))
        })
        .collect::<Result<_>>()?;
    Ok(results.into_iter().flatten().collect())
}

// ---------------------------------------------------------------------
// geometric consistency grouping

/// Greedy consistency clustering. `scene_pts[i]` and `model_pts[i]` are
/// the two endpoints of correspondence `i`. A candidate joins a cluster
/// only if `| |s_i - s_j| - |m_i - m_j| | < epsilon` against every member
/// `j`. Seeds are taken in input order; accepted members are consumed.
/// Returned clusters hold input indices and are sorted by size
/// (descending), ties by smallest seed index.
pub fn geometric_consistency_group(
    scene_pts: &[Vec3],
    model_pts: &[Vec3],
    epsilon: f64,
    min_size: usize,
) -> Result<Vec<Vec<usize>>> {
    if scene_pts.len() != model_pts.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} scene points vs {} model points",
            scene_pts.len(),
            model_pts.len()
        )));
    }
    if !(epsilon > 0.0) {
        return Err(Error::InvalidInput("epsilon must be positive".into()));
    }
    if min_size < 3 {
        return Err(Error::InvalidInput("min cluster size must be >= 3".into()));
    }
    let n = scene_pts.len();
    let mut consumed = vec![false; n];
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for seed in 0..n {
        if consumed[seed] {
            continue;
        }
        let mut cluster = vec![seed];
        for cand in (seed + 1)..n {
            if consumed[cand] {
                continue;
            }
            let ok = cluster.iter().all(|&j| {
                let ds = (scene_pts[cand] - scene_pts[j]).norm();
                let dm = (model_pts[cand] - model_pts[j]).norm();
                (ds - dm).abs() < epsilon
            });
            if ok {
                cluster.push(cand);
            }
        }
        if cluster.len() >= min_size {
            for &i in &cluster {
                consumed[i] = true;
            }
            clusters.push(cluster);
        }
    }
    clusters.sort_by(|a, b| b.len().cmp(&a.len()).then(a[0].cmp(&b[0])));
    Ok(clusters)
}

// ---------------------------------------------------------------------
// pose estimation

/// Least-squares rigid transform mapping `model_pts` onto `scene_pts`
/// (Kabsch). Requires at least 3 pairs and a non-degenerate (rank >= 2)
/// point configuration; the result is always a proper rotation.
pub fn estimate_pose(model_pts: &[Vec3], scene_pts: &[Vec3]) -> Result<RigidTransform> {
    if model_pts.len() != scene_pts.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} model points vs {} scene points",
            model_pts.len(),
            scene_pts.len()
        )));
    }
    let n = model_pts.len();
    if n < 3 {
        return Err(Error::InsufficientNeighbors { found: n, needed: 3 });
    }
    let inv_n = 1.0 / n as f64;
    let mc = model_pts.iter().fold(Vec3::ZERO, |a, &p| a + p) * inv_n;
    let sc = scene_pts.iter().fold(Vec3::ZERO, |a, &p| a + p) * inv_n;
    let mut h = Mat3::zeros();
    for (m, s) in model_pts.iter().zip(scene_pts) {
        h = h.add(&Mat3::outer(*m - mc, *s - sc));
    }
    let (u, sigma, v) = svd3(&h);
    // rank < 2 leaves a rotation axis unconstrained
    if sigma[1] <= 1e-12 * sigma[0].max(1e-300) {
        return Err(Error::Degenerate(
            "pose estimation: point configuration is rank-deficient".into(),
        ));
    }
    let mut r = v * u.transpose();
    if r.det() < 0.0 {
        let flipped = Mat3::from_columns(v.column(0), v.column(1), -v.column(2));
        r = flipped * u.transpose();
    }
    // near-degenerate configurations can leave r visibly off SO(3);
    // re-project before validating and report the leftovers as degenerate
    // so recognition can fall through to the next cluster
    let r = RigidTransform { rotation: r, translation: Vec3::ZERO }
        .orthonormalized()
        .rotation;
    let pose = RigidTransform { rotation: r, translation: sc - r * mc };
    if pose.validate(1e-6).is_err() {
        return Err(Error::Degenerate(
            "pose estimation: rotation could not be stabilized".into(),
        ));
    }
    Ok(pose)
}

// ---------------------------------------------------------------------
// recognition driver

#[derive(Debug, Clone)]
pub struct Detection {
    pub model_id: String,
    /// model frame -> scene frame
    pub pose: RigidTransform,
    /// correspondences in the winning cluster
    pub support: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct RecognitionParams {
    pub epsilon: f64,
    pub min_cluster_size: usize,
}

impl Default for RecognitionParams {
    fn default() -> Self {
        RecognitionParams { epsilon: 0.01, min_cluster_size: 3 }
    }
}

/// One geometrically consistent cluster, ready for pose estimation.
/// `model_pts` are in the model frame.
#[derive(Debug, Clone)]
pub struct ClusterCandidate {
    pub model: usize,
    pub view: usize,
    pub seed: usize,
    pub model_pts: Vec<Vec3>,
    pub scene_pts: Vec<Vec3>,
}

impl ClusterCandidate {
    pub fn size(&self) -> usize {
        self.model_pts.len()
    }
}

/// Groups correspondences per (model, view) and returns, per model, the
/// candidate clusters sorted largest first (ties: lowest view index,
/// then lowest seed index).
pub fn cluster_correspondences(
    db: &ModelDatabase,
    corrs: &[Correspondence],
    scene_keypoints: &[Vec3],
    params: &RecognitionParams,
) -> Result<Vec<Vec<ClusterCandidate>>> {
    let mut per_model = Vec::with_capacity(db.models.len());
    for (mi, model) in db.models.iter().enumerate() {
        let mut candidates: Vec<ClusterCandidate> = Vec::new();
        for (vi, view) in model.views.iter().enumerate() {
            let subset: Vec<&Correspondence> = corrs
                .iter()
                .filter(|c| c.target.model == mi as u32 && c.target.view == vi as u32)
                .collect();
            if subset.len() < params.min_cluster_size {
                continue;
            }
            let scene_pts: Vec<Vec3> = subset
                .iter()
                .map(|c| scene_keypoints[c.scene_keypoint])
                .collect();
            let model_pts: Vec<Vec3> = subset
                .iter()
                .map(|c| view.keypoints[c.target.keypoint as usize])
                .collect();
            let clusters = geometric_consistency_group(
                &scene_pts,
                &model_pts,
                params.epsilon,
                params.min_cluster_size,
            )?;
            for cluster in clusters {
                candidates.push(ClusterCandidate {
                    model: mi,
                    view: vi,
                    seed: cluster[0],
                    model_pts: cluster.iter().map(|&i| model_pts[i]).collect(),
                    scene_pts: cluster.iter().map(|&i| scene_pts[i]).collect(),
                });
            }
        }
        candidates.sort_by(|a, b| {
            b.size()
                .cmp(&a.size())
                .then(a.view.cmp(&b.view))
                .then(a.seed.cmp(&b.seed))
        });
        per_model.push(candidates);
    }
    Ok(per_model)
}

/// At most one detection per model: the largest cluster among all views
/// whose pose estimation succeeds (degenerate configurations fall
/// through to the next candidate).
pub fn poses_from_clusters(
    db: &ModelDatabase,
    per_model: &[Vec<ClusterCandidate>],
) -> Result<Vec<Detection>> {
    let mut detections = Vec::new();
    for candidates in per_model {
        for cand in candidates {
            match estimate_pose(&cand.model_pts, &cand.scene_pts) {
                Ok(pose) => {
                    detections.push(Detection {
                        model_id: db.models[cand.model].id.clone(),
                        pose,
                        support: cand.size(),
                    });
                    break;
                }
                Err(Error::Degenerate(_)) => continue,
                Err(e) => return Err(e),
            }
        }
    }
    Ok(detections)
}

/// Full per-scene recognition: match, group per (model, view), take the
/// largest cluster among all views of a model, and estimate its pose.
/// Stored keypoints already live in the model frame, so the recovered
/// transform is model frame -> scene frame directly.
pub fn recognize(
    db: &ModelDatabase,
    scene_keypoints: &[Vec3],
    scene_descriptors: &[Descriptor],
    params: &RecognitionParams,
) -> Result<Vec<Detection>> {
    let corrs = match_scene(db, scene_descriptors)?;
    let per_model = cluster_correspondences(db, &corrs, scene_keypoints, params)?;
    poses_from_clusters(db, &per_model)
}
