//! Staged scene processing for the plain (LP) and saliency-boosted
//! pipelines, with wall-clock instrumentation per stage.
//!
//! Boost semantics: 3D detectors run on the mask-filtered cloud; the 2D
//! detector runs on the full image and only its keypoints are filtered.
//! With an all-ones mask the boosted path is bitwise identical to LP —
//! both funnel through the same filtering code.

use crate::cloud::PointCloud;
use crate::config::Config;
use crate::describe::{describe_keypoints, Descriptor, DescriptorFamily};
use crate::detect::{fast_detect, iss_detect, lift_to_3d, uniform_sampling, DetectorTag, KeypointSet};
use crate::error::{Error, Result};
use crate::geometry::cloud_with_normals;
use crate::math::Vec3;
use crate::recognize::{
    cluster_correspondences, match_scene, poses_from_clusters, Detection, ModelDatabase,
    RecognitionParams,
};
use crate::saliency::{collect_valid, filter_cloud, filter_keypoints_2d, BinaryMask, FilteredCloud};
use crate::spatial::KdTree3;
use crate::synth::organized_rgb_image;
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PipelineKind {
    Lp,
    Boost,
}

impl PipelineKind {
    pub fn name(&self) -> &'static str {
        match self {
            PipelineKind::Lp => "lp",
            PipelineKind::Boost => "boost",
        }
    }
}

/// Wall-clock seconds per stage; the boundaries follow the stages a
/// recognition run actually goes through.
#[derive(Debug, Clone, Copy, Default, serde::Serialize, serde::Deserialize)]
pub struct StageTimes {
    pub saliency: f64,
    pub detect: f64,
    pub describe: f64,
    pub matching: f64,
    pub group: f64,
    pub pose: f64,
}

impl StageTimes {
    pub fn total(&self) -> f64 {
        self.saliency + self.detect + self.describe + self.matching + self.group + self.pose
    }

    pub fn add(&mut self, o: &StageTimes) {
        self.saliency += o.saliency;
        self.detect += o.detect;
        self.describe += o.describe;
        self.matching += o.matching;
        self.group += o.group;
        self.pose += o.pose;
    }

    pub fn scale(&self, s: f64) -> StageTimes {
        StageTimes {
            saliency: self.saliency * s,
            detect: self.detect * s,
            describe: self.describe * s,
            matching: self.matching * s,
            group: self.group * s,
            pose: self.pose * s,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SceneOutcome {
    pub detections: Vec<Detection>,
    pub keypoint_count: usize,
    pub times: StageTimes,
}

fn detect_3d(
    working: &PointCloud,
    detector: DetectorTag,
    cfg: &Config,
) -> Result<KeypointSet> {
    match detector {
        DetectorTag::UniformSampling => uniform_sampling(working, cfg.uniform_leaf),
        DetectorTag::Iss => {
            let tree = KdTree3::build(working)?;
            iss_detect(working, &tree, &cfg.iss.to_params())
        }
        DetectorTag::Fast => unreachable!("fast is handled on the 2D path"),
    }
}

/// Extracts keypoints and descriptors from an organized cloud without
/// any matching — shared by database building and scene processing. The
/// mask is applied per the boost rules; pass `None` for the plain path.
/// Returned positions/descriptors are index-aligned.
pub fn extract_features(
    scene: &PointCloud,
    mask: Option<&BinaryMask>,
    detector: DetectorTag,
    family: DescriptorFamily,
    cfg: &Config,
    times: &mut StageTimes,
) -> Result<(Vec<Vec3>, Vec<Descriptor>)> {
    if !scene.is_organized() {
        return Err(Error::InvalidInput(
            "scene processing needs an organized cloud".into(),
        ));
    }

    // --- saliency + detect
    let (working, keypoints): (FilteredCloud, KeypointSet) = if detector == DetectorTag::Fast {
        // 2D path: detect on the full image, filter keypoints afterwards
        let t0 = Instant::now();
        let working = collect_valid(scene);
        times.saliency += t0.elapsed().as_secs_f64();

        let t0 = Instant::now();
        let image = organized_rgb_image(scene)?.to_gray();
        let fast = fast_detect(&image, cfg.fast_threshold, cfg.fast_nms);
        let pixels: Vec<(usize, usize)> = fast.iter().map(|k| (k.x, k.y)).collect();
        times.detect += t0.elapsed().as_secs_f64();

        let t0 = Instant::now();
        let pixels = match mask {
            Some(m) => filter_keypoints_2d(&pixels, m)?,
            None => pixels,
        };
        times.saliency += t0.elapsed().as_secs_f64();

        let t0 = Instant::now();
        let lifted = lift_to_3d(&pixels, scene)?;
        // source-cloud indices -> indices into the valid-point cloud
        let mut to_working = vec![usize::MAX; scene.len()];
        for (wi, &si) in working.source_indices.iter().enumerate() {
            to_working[si] = wi;
        }
        let keypoints = KeypointSet {
            indices: lifted.indices.iter().map(|&i| to_working[i]).collect(),
            positions: lifted.positions.clone(),
            detector: lifted.detector,
            params: lifted.params.clone(),
        };
        times.detect += t0.elapsed().as_secs_f64();
        (working, keypoints)
    } else {
        // 3D path: filter the cloud before detection
        let t0 = Instant::now();
        let working = match mask {
            Some(m) => filter_cloud(scene, m)?,
            None => collect_valid(scene),
        };
        times.saliency += t0.elapsed().as_secs_f64();

        if working.cloud.len() == 0 {
            return Ok((Vec::new(), Vec::new()));
        }
        let t0 = Instant::now();
        let keypoints = detect_3d(&working.cloud, detector, cfg)?;
        times.detect += t0.elapsed().as_secs_f64();
        (working, keypoints)
    };

    if keypoints.is_empty() {
        return Ok((Vec::new(), Vec::new()));
    }

    // --- describe
    let t0 = Instant::now();
    let tree = KdTree3::build(&working.cloud)?;
    let viewpoint = Vec3::new(cfg.viewpoint[0], cfg.viewpoint[1], cfg.viewpoint[2]);
    let with_normals = cloud_with_normals(&working.cloud, &tree, cfg.normals_k, viewpoint);
    let descriptors = describe_keypoints(
        &with_normals,
        &tree,
        &keypoints.indices,
        family,
        cfg.descriptor_radius,
    )?;
    times.describe += t0.elapsed().as_secs_f64();

    Ok((keypoints.positions, descriptors))
}

/// Runs one scene end to end against the database, timing every stage.
pub fn process_scene(
    scene: &PointCloud,
    mask: Option<&BinaryMask>,
    db: &ModelDatabase,
    detector: DetectorTag,
    pipeline: PipelineKind,
    cfg: &Config,
) -> Result<SceneOutcome> {
    let mask = match (pipeline, mask) {
        (PipelineKind::Lp, _) => None,
        (PipelineKind::Boost, Some(m)) => Some(m),
        (PipelineKind::Boost, None) => {
            return Err(Error::InvalidInput(
                "boosted pipeline needs a saliency mask".into(),
            ))
        }
    };
    let mut times = StageTimes::default();
    let (positions, descriptors) =
        extract_features(scene, mask, detector, db.family, cfg, &mut times)?;
    let keypoint_count = positions.len();
    if descriptors.is_empty() {
        return Ok(SceneOutcome { detections: Vec::new(), keypoint_count, times });
    }

    let params = RecognitionParams {
        epsilon: cfg.gcg_epsilon,
        min_cluster_size: cfg.min_cluster_size,
    };

    let t0 = Instant::now();
    let corrs = match_scene(db, &descriptors)?;
    times.matching += t0.elapsed().as_secs_f64();

    let t0 = Instant::now();
    let per_model = cluster_correspondences(db, &corrs, &positions, &params)?;
    times.group += t0.elapsed().as_secs_f64();

    let t0 = Instant::now();
    let detections = poses_from_clusters(db, &per_model)?;
    times.pose += t0.elapsed().as_secs_f64();

    Ok(SceneOutcome { detections, keypoint_count, times })
}
