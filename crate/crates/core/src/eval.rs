//! Detection scoring: bounding-box IoU, TP/FP/FN classification,
//! precision/recall, the consensus-threshold PRC sweep, and AUC.

use crate::cloud::{bounding_box, transform_cloud, PointCloud, RigidTransform};
use crate::error::{Error, Result};
use crate::recognize::Detection;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::path::Path;

/// One annotated object instance in a scene.
#[derive(Debug, Clone)]
pub struct GroundTruthEntry {
    pub scene_id: String,
    pub model_id: String,
    /// model frame -> scene frame
    pub pose: RigidTransform,
}

/// Text format: one line per entry, `scene_id model_id` followed by the
/// 12 numbers of the row-major 3x4 pose.
pub fn load_ground_truth(path: &Path) -> Result<Vec<GroundTruthEntry>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() != 14 {
            return Err(Error::parse(
                path,
                format!("line {}", lineno + 1),
                format!("expected 14 fields, got {}", tokens.len()),
            ));
        }
        let mut nums = [0.0f64; 12];
        for (i, t) in tokens[2..].iter().enumerate() {
            nums[i] = t.parse().map_err(|_| {
                Error::parse(path, format!("line {}", lineno + 1), format!("bad number {t:?}"))
            })?;
        }
        let pose = RigidTransform::from_row_major_3x4(&nums);
        pose.validate(1e-6)?;
        out.push(GroundTruthEntry {
            scene_id: tokens[0].to_string(),
            model_id: tokens[1].to_string(),
            pose,
        });
    }
    Ok(out)
}

pub fn save_ground_truth(entries: &[GroundTruthEntry], path: &Path) -> Result<()> {
    let mut text = String::new();
    for e in entries {
        text.push_str(&e.scene_id);
        text.push(' ');
        text.push_str(&e.model_id);
        for v in e.pose.to_row_major_3x4() {
            text.push_str(&format!(" {v:.17e}"));
        }
        text.push('\n');
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// IoU of the axis-aligned bounding boxes of the model cloud under the
/// detected and ground-truth poses, both in the scene frame.
pub fn detection_iou(
    det: &Detection,
    gt: &GroundTruthEntry,
    model: &PointCloud,
) -> Result<f64> {
    if det.model_id != gt.model_id {
        return Err(Error::InvalidInput(format!(
            "model id mismatch: detection {} vs ground truth {}",
            det.model_id, gt.model_id
        )));
    }
    let bb_est = bounding_box(&transform_cloud(model, &det.pose))?;
    let bb_gt = bounding_box(&transform_cloud(model, &gt.pose))?;
    if bb_est.volume() == 0.0 || bb_gt.volume() == 0.0 {
        return Err(Error::Degenerate("zero-volume bounding box".into()));
    }
    let inter = match bb_est.intersection(&bb_gt) {
        Some(b) => b.volume(),
        None => return Ok(0.0),
    };
    let union = bb_est.volume() + bb_gt.volume() - inter;
    Ok(inter / union)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DetectionLabel {
    /// matched a ground-truth instance with IoU >= threshold
    TruePositive,
    /// matched a present model but below the IoU threshold
    FalseNegative,
    /// the detected model is absent from the scene
    FalsePositive,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Counts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl Counts {
    pub fn add(&mut self, o: Counts) {
        self.tp += o.tp;
        self.fp += o.fp;
        self.fn_ += o.fn_;
    }
}

/// Classifies one scene's detections against its ground truth.
///
/// Each detection is matched greedily (in detection order) to the
/// unconsumed same-model ground-truth entry with the highest IoU. A match
/// at or above `iou_min` is a true positive and consumes the entry; a
/// sub-threshold match is labelled a false negative but leaves the entry
/// for later detections; a detection of an absent model is a false
/// positive.
///
/// The FN *count* is the number of ground-truth entries never consumed: a
/// sub-threshold detection and the object it missed are one miss, so
/// counting both would double-book it (and would let recall rise as the
/// consensus threshold prunes bad detections). With this counting
/// TP + FN always equals |GT|.
pub fn classify(
    detections: &[Detection],
    ground_truth: &[GroundTruthEntry],
    models: &HashMap<String, PointCloud>,
    iou_min: f64,
) -> Result<(Counts, Vec<DetectionLabel>)> {
    let mut consumed = vec![false; ground_truth.len()];
    let mut counts = Counts::default();
    let mut labels = Vec::with_capacity(detections.len());
    for det in detections {
        let model = models.get(&det.model_id).ok_or_else(|| {
            Error::InvalidInput(format!("unknown model id {}", det.model_id))
        })?;
        let mut best: Option<(usize, f64)> = None;
        for (gi, gt) in ground_truth.iter().enumerate() {
            if consumed[gi] || gt.model_id != det.model_id {
                continue;
            }
            let iou = detection_iou(det, gt, model)?;
            if best.map_or(true, |(_, b)| iou > b) {
                best = Some((gi, iou));
            }
        }
        let label = match best {
            Some((gi, iou)) if iou >= iou_min => {
                consumed[gi] = true;
                counts.tp += 1;
                DetectionLabel::TruePositive
            }
            Some(_) => DetectionLabel::FalseNegative,
            None => {
                counts.fp += 1;
                DetectionLabel::FalsePositive
            }
        };
        labels.push(label);
    }
    counts.fn_ += consumed.iter().filter(|c| !**c).count();
    Ok((counts, labels))
}

/// Eq. 2/3 with the 0/0 convention pinned to 1.
pub fn precision_recall(counts: Counts) -> (f64, f64) {
    let precision = if counts.tp + counts.fp == 0 {
        1.0
    } else {
        counts.tp as f64 / (counts.tp + counts.fp) as f64
    };
    let recall = if counts.tp + counts.fn_ == 0 {
        1.0
    } else {
        counts.tp as f64 / (counts.tp + counts.fn_) as f64
    };
    (precision, recall)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrcPoint {
    pub threshold: usize,
    pub precision: f64,
    pub recall: f64,
}

/// One scene's recognition output paired with its annotations.
#[derive(Debug, Clone)]
pub struct SceneResult {
    pub detections: Vec<Detection>,
    pub ground_truth: Vec<GroundTruthEntry>,
}

/// Sweeps the consensus-size threshold from 3 upward until no detection
/// survives in any scene, classifying and aggregating at each step.
pub fn prc_sweep(
    scenes: &[SceneResult],
    models: &HashMap<String, PointCloud>,
    iou_min: f64,
) -> Result<Vec<PrcPoint>> {
    let mut points = Vec::new();
    let mut theta = 3usize;
    loop {
        let mut counts = Counts::default();
        let mut survivors = 0usize;
        for scene in scenes {
            let kept: Vec<Detection> = scene
                .detections
                .iter()
                .filter(|d| d.support >= theta)
                .cloned()
                .collect();
            survivors += kept.len();
            let (c, _) = classify(&kept, &scene.ground_truth, models, iou_min)?;
            counts.add(c);
        }
        if survivors == 0 {
            break;
        }
        let (precision, recall) = precision_recall(counts);
        points.push(PrcPoint { threshold: theta, precision, recall });
        theta += 1;
    }
    Ok(points)
}

/// Area under the precision-recall curve: points sorted by recall,
/// duplicate recalls collapsed to their maximum precision, the curve
/// extended flat from recall 0 to the lowest-recall point, then
/// trapezoidal integration.
pub fn auc(points: &[PrcPoint]) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::Empty("auc needs at least one PRC point".into()));
    }
    let mut curve: Vec<(f64, f64)> =
        points.iter().map(|p| (p.recall, p.precision)).collect();
    curve.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut merged: Vec<(f64, f64)> = Vec::new();
    for (r, p) in curve {
        match merged.last_mut() {
            Some((lr, lp)) if *lr == r => *lp = lp.max(p),
            _ => merged.push((r, p)),
        }
    }
    let mut area = 0.0;
    let (r0, p0) = merged[0];
    area += r0 * p0; // flat extension from recall 0
    for w in merged.windows(2) {
        let (r1, p1) = w[0];
        let (r2, p2) = w[1];
        area += (r2 - r1) * (p1 + p2) / 2.0;
    }
    Ok(area)
}

/// Serialized form of one detection, tagged with its scene.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub scene_id: String,
    pub model_id: String,
    /// row-major 3x4 model -> scene pose
    pub pose: Vec<f64>,
    pub support: usize,
}

impl DetectionRecord {
    pub fn from_detection(scene_id: &str, det: &Detection) -> Self {
        DetectionRecord {
            scene_id: scene_id.to_string(),
            model_id: det.model_id.clone(),
            pose: det.pose.to_row_major_3x4().to_vec(),
            support: det.support,
        }
    }

    pub fn to_detection(&self) -> Result<Detection> {
        let nums: [f64; 12] = self
            .pose
            .as_slice()
            .try_into()
            .map_err(|_| Error::InvalidInput("pose must have 12 entries".into()))?;
        let pose = RigidTransform::from_row_major_3x4(&nums);
        pose.validate(1e-6)?;
        Ok(Detection {
            model_id: self.model_id.clone(),
            pose,
            support: self.support,
        })
    }
}

pub fn load_detections(path: &Path) -> Result<Vec<DetectionRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn save_detections(records: &[DetectionRecord], path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(records)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Groups detections and ground truth into per-scene results, covering
/// every scene id present on either side.
pub fn group_by_scene(
    records: &[DetectionRecord],
    ground_truth: &[GroundTruthEntry],
) -> Result<Vec<SceneResult>> {
    let mut ids: Vec<&str> = records
        .iter()
        .map(|r| r.scene_id.as_str())
        .chain(ground_truth.iter().map(|g| g.scene_id.as_str()))
        .collect();
    ids.sort_unstable();
    ids.dedup();
    ids.iter()
        .map(|id| {
            let detections = records
                .iter()
                .filter(|r| r.scene_id == *id)
                .map(|r| r.to_detection())
                .collect::<Result<_>>()?;
            Ok(SceneResult {
                detections,
                ground_truth: ground_truth
                    .iter()
                    .filter(|g| g.scene_id == *id)
                    .cloned()
                    .collect(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cloud::Point3;
    use crate::math::Vec3;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn unit_cube_cloud() -> PointCloud {
        let mut pts = Vec::new();
        for x in [0.0, 1.0] {
            for y in [0.0, 1.0] {
                for z in [0.0, 1.0] {
                    pts.push(Point3::new(x, y, z));
                }
            }
        }
        PointCloud::unorganized(pts)
    }

    fn det(model: &str, pose: RigidTransform, support: usize) -> Detection {
        Detection { model_id: model.to_string(), pose, support }
    }

    fn gt(scene: &str, model: &str, pose: RigidTransform) -> GroundTruthEntry {
        GroundTruthEntry {
            scene_id: scene.to_string(),
            model_id: model.to_string(),
            pose,
        }
    }

    fn cube_models() -> HashMap<String, PointCloud> {
        let mut m = HashMap::new();
        m.insert("cube".to_string(), unit_cube_cloud());
        m.insert("other".to_string(), unit_cube_cloud());
        m
    }

    #[test]
    fn iou_identical_pose_is_one() {
        let cube = unit_cube_cloud();
        let pose = RigidTransform::from_axis_angle(
            Vec3::new(1.0, 2.0, 3.0),
            0.7,
            Vec3::new(0.1, -0.2, 0.3),
        );
        let d = det("cube", pose, 5);
        let g = gt("s0", "cube", pose);
        assert!((detection_iou(&d, &g, &cube).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn iou_disjoint_is_zero() {
        let cube = unit_cube_cloud();
        let d = det(
            "cube",
            RigidTransform::translation_only(Vec3::new(10.0, 0.0, 0.0)),
            5,
        );
        let g = gt("s0", "cube", RigidTransform::identity());
        assert_eq!(detection_iou(&d, &g, &cube).unwrap(), 0.0);
    }

    #[test]
    fn iou_half_offset_is_one_third() {
        let cube = unit_cube_cloud();
        let d = det(
            "cube",
            RigidTransform::translation_only(Vec3::new(0.5, 0.0, 0.0)),
            5,
        );
        let g = gt("s0", "cube", RigidTransform::identity());
        assert!((detection_iou(&d, &g, &cube).unwrap() - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn iou_id_mismatch_errors() {
        let cube = unit_cube_cloud();
        let d = det("cube", RigidTransform::identity(), 5);
        let g = gt("s0", "other", RigidTransform::identity());
        assert!(detection_iou(&d, &g, &cube).is_err());
    }

    #[test]
    fn classify_perfect_detections() {
        let models = cube_models();
        let gts = vec![
            gt("s0", "cube", RigidTransform::identity()),
            gt(
                "s0",
                "other",
                RigidTransform::translation_only(Vec3::new(5.0, 0.0, 0.0)),
            ),
        ];
        let dets = vec![
            det("cube", RigidTransform::identity(), 4),
            det(
                "other",
                RigidTransform::translation_only(Vec3::new(5.0, 0.0, 0.0)),
                4,
            ),
        ];
        let (c, labels) = classify(&dets, &gts, &models, 0.25).unwrap();
        assert_eq!(c, Counts { tp: 2, fp: 0, fn_: 0 });
        assert!(labels.iter().all(|l| *l == DetectionLabel::TruePositive));
    }

    #[test]
    fn classify_absent_model_is_fp() {
        let models = cube_models();
        let gts = vec![gt("s0", "cube", RigidTransform::identity())];
        let dets = vec![det("other", RigidTransform::identity(), 4)];
        let (c, labels) = classify(&dets, &gts, &models, 0.25).unwrap();
        assert_eq!(c, Counts { tp: 0, fp: 1, fn_: 1 });
        assert_eq!(labels, vec![DetectionLabel::FalsePositive]);
    }

    #[test]
    fn classify_subthreshold_is_fn_and_gt_stays() {
        let models = cube_models();
        let gts = vec![gt("s0", "cube", RigidTransform::identity())];
        let dets = vec![det(
            "cube",
            RigidTransform::translation_only(Vec3::new(0.95, 0.0, 0.0)),
            4,
        )];
        let (c, labels) = classify(&dets, &gts, &models, 0.25).unwrap();
        // the bad detection and the object it missed are one FN
        assert_eq!(c, Counts { tp: 0, fp: 0, fn_: 1 });
        assert_eq!(labels, vec![DetectionLabel::FalseNegative]);
    }

    /// Independent reference classifier: recomputes labels with a
    /// different control flow (GT-major loop for TPs first).
    fn reference_classify(
        dets: &[Detection],
        gts: &[GroundTruthEntry],
        models: &HashMap<String, PointCloud>,
        iou_min: f64,
    ) -> Counts {
        let mut gt_used = vec![false; gts.len()];
        let mut det_label: Vec<Option<DetectionLabel>> = vec![None; dets.len()];
        for (di, d) in dets.iter().enumerate() {
            let mut best: Option<(usize, f64)> = None;
            for (gi, g) in gts.iter().enumerate() {
                if gt_used[gi] || g.model_id != d.model_id {
                    continue;
                }
                let iou = detection_iou(d, g, &models[&d.model_id]).unwrap();
                let better = match best {
                    None => true,
                    Some((_, b)) => iou > b,
                };
                if better {
                    best = Some((gi, iou));
                }
            }
            det_label[di] = Some(match best {
                Some((gi, iou)) if iou >= iou_min => {
                    gt_used[gi] = true;
                    DetectionLabel::TruePositive
                }
                Some(_) => DetectionLabel::FalseNegative,
                None => DetectionLabel::FalsePositive,
            });
        }
        let mut c = Counts::default();
        for l in det_label.into_iter().flatten() {
            match l {
                DetectionLabel::TruePositive => c.tp += 1,
                DetectionLabel::FalseNegative => {}
                DetectionLabel::FalsePositive => c.fp += 1,
            }
        }
        c.fn_ = gt_used.iter().filter(|u| !**u).count();
        c
    }

    #[test]
    fn classify_matches_reference_on_random_scenarios() {
        let models = cube_models();
        let mut rng = StdRng::seed_from_u64(21);
        for _ in 0..50 {
            let n_gt = rng.gen_range(0..=6);
            let n_det = rng.gen_range(0..=6);
            let pick = |rng: &mut StdRng| {
                if rng.gen_bool(0.5) { "cube" } else { "other" }
            };
            let gts: Vec<GroundTruthEntry> = (0..n_gt)
                .map(|_| {
                    gt(
                        "s",
                        pick(&mut rng),
                        RigidTransform::translation_only(Vec3::new(
                            rng.gen_range(-1.0..1.0),
                            0.0,
                            0.0,
                        )),
                    )
                })
                .collect();
            let dets: Vec<Detection> = (0..n_det)
                .map(|_| {
                    det(
                        pick(&mut rng),
                        RigidTransform::translation_only(Vec3::new(
                            rng.gen_range(-1.0..1.0),
                            0.0,
                            0.0,
                        )),
                        rng.gen_range(3..8),
                    )
                })
                .collect();
            let (c, _) = classify(&dets, &gts, &models, 0.25).unwrap();
            let r = reference_classify(&dets, &gts, &models, 0.25);
            assert_eq!(c, r);
        }
    }

    #[test]
    fn precision_recall_fixtures() {
        assert_eq!(
            precision_recall(Counts { tp: 3, fp: 1, fn_: 0 }),
            (0.75, 1.0)
        );
        assert_eq!(
            precision_recall(Counts { tp: 0, fp: 0, fn_: 2 }),
            (1.0, 0.0)
        );
        assert_eq!(
            precision_recall(Counts { tp: 5, fp: 5, fn_: 5 }),
            (0.5, 0.5)
        );
        assert_eq!(
            precision_recall(Counts { tp: 0, fp: 0, fn_: 0 }),
            (1.0, 1.0)
        );
    }

    #[test]
    fn prc_single_detection_support_five() {
        let models = cube_models();
        let scenes = vec![SceneResult {
            detections: vec![det("cube", RigidTransform::identity(), 5)],
            ground_truth: vec![gt("s0", "cube", RigidTransform::identity())],
        }];
        let points = prc_sweep(&scenes, &models, 0.25).unwrap();
        assert_eq!(points.len(), 3);
        for (i, p) in points.iter().enumerate() {
            assert_eq!(p.threshold, 3 + i);
            assert_eq!(p.precision, 1.0);
            assert_eq!(p.recall, 1.0);
        }
    }

    #[test]
    fn prc_recall_monotone_and_fixture_table() {
        let models = cube_models();
        let shift =
            |dx: f64| RigidTransform::translation_only(Vec3::new(dx, 0.0, 0.0));
        // three scenes: good support-5 detection; good support-3 detection
        // plus a support-4 FP of an absent model; a miss
        let scenes = vec![
            SceneResult {
                detections: vec![det("cube", RigidTransform::identity(), 5)],
                ground_truth: vec![gt("a", "cube", RigidTransform::identity())],
            },
            SceneResult {
                detections: vec![
                    det("cube", RigidTransform::identity(), 3),
                    det("other", shift(4.0), 4),
                ],
                ground_truth: vec![gt("b", "cube", RigidTransform::identity())],
            },
            SceneResult {
                detections: vec![],
                ground_truth: vec![gt("c", "cube", RigidTransform::identity())],
            },
        ];
        let points = prc_sweep(&scenes, &models, 0.25).unwrap();
        // theta=3: TP=2 FP=1 FN=1 -> P=2/3, R=2/3
        // theta=4: TP=1 FP=1 FN=2 -> P=1/2, R=1/3
        // theta=5: TP=1 FP=0 FN=2 -> P=1,   R=1/3
        // theta=6: no survivors
        assert_eq!(points.len(), 3);
        assert!((points[0].precision - 2.0 / 3.0).abs() < 1e-12);
        assert!((points[0].recall - 2.0 / 3.0).abs() < 1e-12);
        assert!((points[1].precision - 0.5).abs() < 1e-12);
        assert!((points[1].recall - 1.0 / 3.0).abs() < 1e-12);
        assert!((points[2].precision - 1.0).abs() < 1e-12);
        assert!((points[2].recall - 1.0 / 3.0).abs() < 1e-12);
        for w in points.windows(2) {
            assert!(w[1].recall <= w[0].recall + 1e-12);
        }
    }

    #[test]
    fn auc_perfect_single_point() {
        let p = vec![PrcPoint { threshold: 3, precision: 1.0, recall: 1.0 }];
        assert!((auc(&p).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn auc_two_point_trapezoid() {
        let p = vec![
            PrcPoint { threshold: 3, precision: 0.5, recall: 1.0 },
            PrcPoint { threshold: 4, precision: 1.0, recall: 0.5 },
        ];
        assert!((auc(&p).unwrap() - 0.875).abs() < 1e-12);
    }

    #[test]
    fn auc_permutation_invariant_and_matches_riemann() {
        let mut rng = StdRng::seed_from_u64(33);
        for _ in 0..20 {
            let n = rng.gen_range(2..10);
            let mut recalls: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
            recalls.sort_by(|a, b| a.partial_cmp(b).unwrap());
            recalls.dedup();
            // precision non-increasing in recall: a monotone PRC
            let mut prec: f64 = 1.0;
            let mut points: Vec<PrcPoint> = Vec::new();
            for (i, &r) in recalls.iter().enumerate() {
                prec -= rng.gen_range(0.0..0.2);
                prec = prec.max(0.0);
                points.push(PrcPoint { threshold: 3 + i, precision: prec, recall: r });
            }
            let a = auc(&points).unwrap();

            // fine Riemann sum over the same piecewise-linear curve
            let interp = |r: f64| -> f64 {
                if r <= points[0].recall {
                    return points[0].precision;
                }
                for w in points.windows(2) {
                    if r <= w[1].recall {
                        let t = (r - w[0].recall) / (w[1].recall - w[0].recall);
                        return w[0].precision + t * (w[1].precision - w[0].precision);
                    }
                }
                points.last().unwrap().precision
            };
            let r_max = points.last().unwrap().recall;
            let steps = 2_000_000usize;
            let h = r_max / steps as f64;
            let mut riemann = 0.0;
            for i in 0..steps {
                let r = (i as f64 + 0.5) * h;
                riemann += interp(r) * h;
            }
            assert!((a - riemann).abs() < 1e-6, "{a} vs {riemann}");

            let mut shuffled = points.clone();
            shuffled.reverse();
            assert!((auc(&shuffled).unwrap() - a).abs() < 1e-15);
        }
    }

    #[test]
    fn ground_truth_round_trip() {
        let entries = vec![
            gt(
                "scene_00",
                "cube",
                RigidTransform::from_axis_angle(
                    Vec3::new(0.3, -1.0, 0.5),
                    1.1,
                    Vec3::new(0.4, 0.5, 0.6),
                ),
            ),
            gt("scene_01", "other", RigidTransform::identity()),
        ];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("gt.txt");
        save_ground_truth(&entries, &path).unwrap();
        let loaded = load_ground_truth(&path).unwrap();
        assert_eq!(loaded.len(), entries.len());
        for (a, b) in loaded.iter().zip(&entries) {
            assert_eq!(a.scene_id, b.scene_id);
            assert_eq!(a.model_id, b.model_id);
            for (x, y) in a
                .pose
                .to_row_major_3x4()
                .iter()
                .zip(b.pose.to_row_major_3x4())
            {
                assert!((x - y).abs() < 1e-15);
            }
        }
    }
}
