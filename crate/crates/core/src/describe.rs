//! Local descriptors: SHOT (352), CSHOT (1344), FPFH (33), PFHRGB (250).
//!
//! SHOT/CSHOT bin neighbors into a 32-volume spherical grid (8 azimuth x
//! 2 elevation x 2 radial) in LRF coordinates with soft (multi-linear)
//! interpolation across all bin boundaries. FPFH/PFHRGB histogram the
//! Darboux pair features with hard binning.
//!
//! The CSHOT color-bin count (31) and the PFHRGB ratio quantization
//! (5 bins of r/(1+r)) are pinned here; they are reverse-engineered from
//! the family's fixed lengths (1344 = 32x11 + 32x31, 250 = 125 + 125).

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::geometry::{pair_features, LocalReferenceFrame};
use crate::math::Vec3;
use crate::spatial::KdTree3;
use rayon::prelude::*;
use std::collections::HashMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DescriptorFamily {
    Shot,
    Cshot,
    Fpfh,
    Pfhrgb,
}

impl DescriptorFamily {
    pub fn len(&self) -> usize {
        match self {
            DescriptorFamily::Shot => 352,
            DescriptorFamily::Cshot => 1344,
            DescriptorFamily::Fpfh => 33,
            DescriptorFamily::Pfhrgb => 250,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            DescriptorFamily::Shot => "shot",
            DescriptorFamily::Cshot => "cshot",
            DescriptorFamily::Fpfh => "fpfh",
            DescriptorFamily::Pfhrgb => "pfhrgb",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "shot" => Ok(DescriptorFamily::Shot),
            "cshot" => Ok(DescriptorFamily::Cshot),
            "fpfh" => Ok(DescriptorFamily::Fpfh),
            "pfhrgb" => Ok(DescriptorFamily::Pfhrgb),
            other => Err(Error::InvalidInput(format!("unknown descriptor family {other}"))),
        }
    }

    pub fn needs_rgb(&self) -> bool {
        matches!(self, DescriptorFamily::Cshot | DescriptorFamily::Pfhrgb)
    }
}

/// A fixed-length feature vector tagged with its family and the keypoint
/// (position in the keypoint list) it describes.
#[derive(Debug, Clone, PartialEq)]
pub struct Descriptor {
    pub family: DescriptorFamily,
    pub values: Vec<f64>,
    pub keypoint: usize,
}

impl Descriptor {
    pub fn validate(&self) -> Result<()> {
        if self.values.len() != self.family.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} descriptor has {} values, expected {}",
                self.family.name(),
                self.values.len(),
                self.family.len()
            )));
        }
        if self.values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidInput("descriptor value not finite and >= 0".into()));
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }
}

// ---------------------------------------------------------------------
// SHOT / CSHOT

const SHOT_AZIMUTH: usize = 8;
const SHOT_ELEVATION: usize = 2;
const SHOT_RADIAL: usize = 2;
const SHOT_VOLUMES: usize = SHOT_AZIMUTH * SHOT_ELEVATION * SHOT_RADIAL;
const SHOT_COS_BINS: usize = 11;
const CSHOT_COLOR_BINS: usize = 31;

/// Soft-binned coordinate: up to two (bin, weight) pairs.
struct BinWeights {
    bins: [usize; 2],
    weights: [f64; 2],
}

/// Distributes unit mass over the two bins adjacent to `u * nbins - 0.5`
/// (bin centers at integer coordinates). `wrap` makes the axis circular;
/// otherwise the edge bins absorb out-of-range mass.
fn soft_bin(u: f64, nbins: usize, wrap: bool) -> BinWeights {
    let coord = u * nbins as f64 - 0.5;
    let lo = coord.floor();
    let frac = coord - lo;
    let lo = lo as i64;
    let hi = lo + 1;
    let clampi = |b: i64| -> usize {
        if wrap {
            b.rem_euclid(nbins as i64) as usize
        } else {
            b.clamp(0, nbins as i64 - 1) as usize
        }
    };
    BinWeights {
        bins: [clampi(lo), clampi(hi)],
        weights: [1.0 - frac, frac],
    }
}

struct ShotContext<'a> {
    cloud: &'a PointCloud,
    tree: &'a KdTree3,
    radius: f64,
}

/// Accumulates one neighbor into a per-volume histogram with `vbins`
/// value bins, soft-binned across azimuth/elevation/radial/value.
fn shot_accumulate(
    hist: &mut [f64],
    vbins: usize,
    local: Vec3,
    r: f64,
    radius: f64,
    value_u: f64,
) {
    let az_angle = local.y.atan2(local.x); // (-pi, pi]
    let az_u = (az_angle + std::f64::consts::PI) / (2.0 * std::f64::consts::PI);
    let el_u = ((local.z / r) + 1.0) / 2.0;
    let rad_u = r / radius;

    let az = soft_bin(az_u.clamp(0.0, 1.0), SHOT_AZIMUTH, true);
    let el = soft_bin(el_u.clamp(0.0, 1.0), SHOT_ELEVATION, false);
    let rad = soft_bin(rad_u.clamp(0.0, 1.0), SHOT_RADIAL, false);
    let val = soft_bin(value_u.clamp(0.0, 1.0), vbins, false);

    for (ai, &ab) in az.bins.iter().enumerate() {
        for (ei, &eb) in el.bins.iter().enumerate() {
            for (ri, &rb) in rad.bins.iter().enumerate() {
                for (vi, &vb) in val.bins.iter().enumerate() {
                    let w = az.weights[ai] * el.weights[ei] * rad.weights[ri] * val.weights[vi];
                    if w == 0.0 {
                        continue;
                    }
                    let volume = (ab * SHOT_ELEVATION + eb) * SHOT_RADIAL + rb;
                    hist[volume * vbins + vb] += w;
                }
            }
        }
    }
}

fn l2_normalize(values: &mut [f64]) {
    let norm: f64 = values.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        for v in values.iter_mut() {
            *v /= norm;
        }
    }
}

/// SHOT descriptor at a cloud point. Empty support (or a keypoint without
/// a valid normal) yields the all-zero vector.
pub fn shot(
    ctx_cloud: &PointCloud,
    tree: &KdTree3,
    keypoint_index: usize,
    lrf: &LocalReferenceFrame,
    radius: f64,
) -> Descriptor {
    let ctx = ShotContext { cloud: ctx_cloud, tree, radius };
    let mut values = vec![0.0; SHOT_VOLUMES * SHOT_COS_BINS];
    shot_shape_part(&ctx, keypoint_index, lrf, &mut values);
    l2_normalize(&mut values);
    Descriptor { family: DescriptorFamily::Shot, values, keypoint: keypoint_index }
}

fn shot_shape_part(
    ctx: &ShotContext,
    keypoint_index: usize,
    lrf: &LocalReferenceFrame,
    hist: &mut [f64],
) {
    let kp = &ctx.cloud.points[keypoint_index];
    let n_kp = match kp.normal {
        Some(n) => n,
        None => return,
    };
    let kp_pos = kp.position();
    for (i, d) in ctx.tree.radius_search(kp_pos, ctx.radius) {
        if d == 0.0 {
            continue;
        }
        let nb = &ctx.cloud.points[i];
        let n_nb = match nb.normal {
            Some(n) => n,
            None => continue,
        };
        let local = lrf.to_local(nb.position() - kp_pos);
        let cos = n_kp.dot(n_nb).clamp(-1.0, 1.0);
        shot_accumulate(hist, SHOT_COS_BINS, local, d, ctx.radius, (cos + 1.0) / 2.0);
    }
}

/// CSHOT: the SHOT shape part concatenated with per-volume histograms of
/// normalized CIELab L1 distance to the keypoint color.
pub fn cshot(
    ctx_cloud: &PointCloud,
    tree: &KdTree3,
    keypoint_index: usize,
    lrf: &LocalReferenceFrame,
    radius: f64,
) -> Result<Descriptor> {
    if !ctx_cloud.has_rgb() {
        return Err(Error::InvalidInput("cshot requires RGB data".into()));
    }
    let ctx = ShotContext { cloud: ctx_cloud, tree, radius };
    let mut values = vec![0.0; SHOT_VOLUMES * SHOT_COS_BINS + SHOT_VOLUMES * CSHOT_COLOR_BINS];
    let (shape, color) = values.split_at_mut(SHOT_VOLUMES * SHOT_COS_BINS);
    shot_shape_part(&ctx, keypoint_index, lrf, shape);

    let kp = &ctx_cloud.points[keypoint_index];
    let kp_pos = kp.position();
    if let Some(kp_rgb) = kp.rgb {
        let kp_lab = srgb_to_lab(kp_rgb);
        for (i, d) in tree.radius_search(kp_pos, radius) {
            if d == 0.0 {
                continue;
            }
            let nb = &ctx_cloud.points[i];
            let nb_rgb = match nb.rgb {
                Some(c) => c,
                None => continue,
            };
            let local = lrf.to_local(nb.position() - kp_pos);
            let u = lab_l1_normalized(kp_lab, srgb_to_lab(nb_rgb));
            shot_accumulate(color, CSHOT_COLOR_BINS, local, d, radius, u);
        }
    }
    l2_normalize(&mut values);
    Ok(Descriptor { family: DescriptorFamily::Cshot, values, keypoint: keypoint_index })
}

/// sRGB (D65, gamma 2.4) to CIELab.
pub fn srgb_to_lab(rgb: [u8; 3]) -> [f64; 3] {
    let lin = |c: u8| -> f64 {
        let c = c as f64 / 255.0;
        if c <= 0.04045 {
            c / 12.92
        } else {
            ((c + 0.055) / 1.055).powf(2.4)
        }
    };
    let (r, g, b) = (lin(rgb[0]), lin(rgb[1]), lin(rgb[2]));
    let x = 0.4124564 * r + 0.3575761 * g + 0.1804375 * b;
    let y = 0.2126729 * r + 0.7151522 * g + 0.0721750 * b;
    let z = 0.0193339 * r + 0.1191920 * g + 0.9503041 * b;
    let (xn, yn, zn) = (0.95047, 1.0, 1.08883);
    let f = |t: f64| -> f64 {
        if t > 0.008856 {
            t.cbrt()
        } else {
            (903.3 * t + 16.0) / 116.0
        }
    };
    let (fx, fy, fz) = (f(x / xn), f(y / yn), f(z / zn));
    [116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)]
}

/// L1 distance between two Lab triplets, normalized to [0, 1] by the
/// per-channel ranges (L: 100, a/b: 255).
pub fn lab_l1_normalized(a: [f64; 3], b: [f64; 3]) -> f64 {
    let d = (a[0] - b[0]).abs() / 100.0 + (a[1] - b[1]).abs() / 255.0 + (a[2] - b[2]).abs() / 255.0;
    (d / 3.0).clamp(0.0, 1.0)
}

// ---------------------------------------------------------------------
// FPFH

const FPFH_BINS: usize = 11;

fn hard_bin_unit(u: f64, nbins: usize) -> usize {
    ((u * nbins as f64) as usize).min(nbins - 1)
}

fn angle_bins(alpha: f64, phi: f64, theta: f64, nbins: usize) -> (usize, usize, usize) {
    // alpha, phi binned by cosine over [-1, 1]; theta over (-pi, pi]
    let a = hard_bin_unit((alpha.cos() + 1.0) / 2.0, nbins);
    let p = hard_bin_unit((phi.cos() + 1.0) / 2.0, nbins);
    let t = hard_bin_unit((theta + std::f64::consts::PI) / (2.0 * std::f64::consts::PI), nbins);
    (a, p, t)
}

/// Simplified point feature histogram of one point: raw (unnormalized)
/// counts of the pair features against each in-radius neighbor.
pub fn spfh(cloud: &PointCloud, tree: &KdTree3, point_index: usize, radius: f64) -> [f64; 33] {
    let mut hist = [0.0; 33];
    let p = &cloud.points[point_index];
    let n_p = match p.normal {
        Some(n) => n,
        None => return hist,
    };
    let pos = p.position();
    for (j, d) in tree.radius_search(pos, radius) {
        if d == 0.0 {
            continue;
        }
        let q = &cloud.points[j];
        let n_q = match q.normal {
            Some(n) => n,
            None => continue,
        };
        if let Ok(f) = pair_features(pos, n_p, q.position(), n_q) {
            let (a, p_bin, t) = angle_bins(f.alpha, f.phi, f.theta, FPFH_BINS);
            hist[a] += 1.0;
            hist[FPFH_BINS + p_bin] += 1.0;
            hist[2 * FPFH_BINS + t] += 1.0;
        }
    }
    hist
}

/// Weighted SPFH combination before block normalization:
/// `SPFH(p) + (1/K) * sum_k SPFH(p_k) / d(p, p_k)`.
pub fn fpfh_raw(
    cloud: &PointCloud,
    tree: &KdTree3,
    keypoint_index: usize,
    radius: f64,
    spfh_cache: &HashMap<usize, [f64; 33]>,
) -> [f64; 33] {
    let pos = cloud.points[keypoint_index].position();
    let nbrs: Vec<(usize, f64)> = tree
        .radius_search(pos, radius)
        .into_iter()
        .filter(|(_, d)| *d > 0.0)
        .collect();
    let mut out = spfh_cache
        .get(&keypoint_index)
        .copied()
        .unwrap_or([0.0; 33]);
    if nbrs.is_empty() {
        return [0.0; 33];
    }
    let k = nbrs.len() as f64;
    for (j, d) in &nbrs {
        let s = spfh_cache.get(j).copied().unwrap_or([0.0; 33]);
        for b in 0..33 {
            out[b] += s[b] / (*d * k);
        }
    }
    out
}

fn normalize_blocks_to_100(values: &mut [f64], block: usize) {
    for chunk in values.chunks_mut(block) {
        let sum: f64 = chunk.iter().sum();
        if sum > 0.0 {
            for v in chunk.iter_mut() {
                *v *= 100.0 / sum;
            }
        }
    }
}

/// FPFH descriptors for a batch of keypoints; the SPFH cache is built once
/// over every point any keypoint needs.
pub fn fpfh(
    cloud: &PointCloud,
    tree: &KdTree3,
    keypoint_indices: &[usize],
    radius: f64,
) -> Vec<Descriptor> {
    // every keypoint plus every in-radius neighbor needs an SPFH
    let mut needed: Vec<usize> = Vec::new();
    {
        let mut seen = std::collections::HashSet::new();
        for &kp in keypoint_indices {
            if seen.insert(kp) {
                needed.push(kp);
            }
            for (j, d) in tree.radius_search(cloud.points[kp].position(), radius) {
                if d > 0.0 && seen.insert(j) {
                    needed.push(j);
                }
            }
        }
    }
    let cache: HashMap<usize, [f64; 33]> = needed
        .par_iter()
        .map(|&i| (i, spfh(cloud, tree, i, radius)))
        .collect();

    keypoint_indices
        .par_iter()
        .enumerate()
        .map(|(ki, &kp)| {
            let mut values = fpfh_raw(cloud, tree, kp, radius, &cache).to_vec();
            normalize_blocks_to_100(&mut values, FPFH_BINS);
            Descriptor { family: DescriptorFamily::Fpfh, values, keypoint: ki }
        })
        .collect()
}

// ---------------------------------------------------------------------
// PFHRGB

const PFHRGB_BINS: usize = 5;

fn color_ratio_bin(cs: u8, ct: u8) -> usize {
    // channels clamped to >= 1/255 to keep the ratio finite
    let cs = (cs.max(1)) as f64 / 255.0;
    let ct = (ct.max(1)) as f64 / 255.0;
    let r = cs / ct;
    hard_bin_unit(r / (1.0 + r), PFHRGB_BINS)
}

/// PFHRGB at one cloud point: joint 5^3 histograms of the pair angles and
/// of the per-channel color ratios over all unordered support pairs.
pub fn pfhrgb(
    cloud: &PointCloud,
    tree: &KdTree3,
    keypoint_index: usize,
    radius: f64,
) -> Result<Descriptor> {
    if !cloud.has_rgb() {
        return Err(Error::InvalidInput("pfhrgb requires RGB data".into()));
    }
    let pos = cloud.points[keypoint_index].position();
    let mut support: Vec<usize> = vec![keypoint_index];
    for (j, d) in tree.radius_search(pos, radius) {
        if d > 0.0 && j != keypoint_index {
            support.push(j);
        }
    }
    if support.len() < 2 {
        return Err(Error::InsufficientNeighbors { found: support.len(), needed: 2 });
    }

    let mut geo = vec![0.0; 125];
    let mut col = vec![0.0; 125];
    for i in 0..support.len() {
        for j in (i + 1)..support.len() {
            let pi = &cloud.points[support[i]];
            let pj = &cloud.points[support[j]];
            let (ni, nj) = match (pi.normal, pj.normal) {
                (Some(a), Some(b)) => (a, b),
                _ => continue,
            };
            let f = match pair_features(pi.position(), ni, pj.position(), nj) {
                Ok(f) => f,
                Err(_) => continue,
            };
            let (a, p, t) = angle_bins(f.alpha, f.phi, f.theta, PFHRGB_BINS);
            geo[(a * PFHRGB_BINS + p) * PFHRGB_BINS + t] += 1.0;

            let (rgb_s, rgb_t) = if f.swapped {
                (pj.rgb, pi.rgb)
            } else {
                (pi.rgb, pj.rgb)
            };
            if let (Some(cs), Some(ct)) = (rgb_s, rgb_t) {
                let br = color_ratio_bin(cs[0], ct[0]);
                let bg = color_ratio_bin(cs[1], ct[1]);
                let bb = color_ratio_bin(cs[2], ct[2]);
                col[(br * PFHRGB_BINS + bg) * PFHRGB_BINS + bb] += 1.0;
            }
        }
    }
    normalize_blocks_to_100(&mut geo, 125);
    normalize_blocks_to_100(&mut col, 125);
    let mut values = geo;
    values.extend(col);
    Ok(Descriptor { family: DescriptorFamily::Pfhrgb, values, keypoint: keypoint_index })
}

// ---------------------------------------------------------------------
// batch driver

/// Computes descriptors of one family at every keypoint of a set whose
/// indices refer to `cloud` (which must already carry normals). Keypoints
/// whose support is unusable get the all-zero descriptor of the right
/// length; the `keypoint` field is the position in the keypoint list.
pub fn describe_keypoints(
    cloud: &PointCloud,
    tree: &KdTree3,
    keypoint_indices: &[usize],
    family: DescriptorFamily,
    radius: f64,
) -> Result<Vec<Descriptor>> {
    if family.needs_rgb() && !cloud.has_rgb() {
        return Err(Error::InvalidInput(format!(
            "{} requires RGB data",
            family.name()
        )));
    }
    let out: Vec<Descriptor> = match family {
        DescriptorFamily::Shot | DescriptorFamily::Cshot => keypoint_indices
            .par_iter()
            .enumerate()
            .map(|(ki, &kp)| {
                let pos = cloud.points[kp].position();
                let lrf = crate::geometry::compute_lrf(cloud, tree, pos, radius);
                let mut d = match (family, lrf) {
                    (DescriptorFamily::Shot, Ok(lrf)) => shot(cloud, tree, kp, &lrf, radius),
                    (DescriptorFamily::Cshot, Ok(lrf)) => {
                        cshot(cloud, tree, kp, &lrf, radius).unwrap_or(Descriptor {
                            family,
                            values: vec![0.0; family.len()],
                            keypoint: kp,
                        })
                    }
                    (_, Err(_)) => Descriptor {
                        family,
                        values: vec![0.0; family.len()],
                        keypoint: kp,
                    },
                    _ => unreachable!(),
                };
                d.keypoint = ki;
                d
            })
            .collect(),
        DescriptorFamily::Fpfh => fpfh(cloud, tree, keypoint_indices, radius),
        DescriptorFamily::Pfhrgb => keypoint_indices
            .par_iter()
            .enumerate()
            .map(|(ki, &kp)| {
                let mut d = pfhrgb(cloud, tree, kp, radius).unwrap_or(Descriptor {
                    family,
                    values: vec![0.0; family.len()],
                    keypoint: kp,
                });
                d.keypoint = ki;
                d
            })
            .collect(),
    };
    for d in &out {
        d.validate()?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cloud::{transform_cloud, Point3, RigidTransform};
    use crate::geometry::cloud_with_normals;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    /// Points on a bumpy sphere patch: a surface-like cloud with stable
    /// normals and LRFs.
    fn surface_cloud(n: usize, seed: u64, with_rgb: bool) -> PointCloud {
        let mut rng = StdRng::seed_from_u64(seed);
        let mut pts = Vec::with_capacity(n);
        for _ in 0..n {
            let u: f64 = rng.gen_range(-0.5..0.5);
            let v: f64 = rng.gen_range(-0.5..0.5);
            let z = 0.3 * (2.0 * u).sin() * (3.0 * v).cos() + 0.1 * u * u;
            let mut p = Point3::new(0.1 * u, 0.1 * v, 0.1 * z);
            if with_rgb {
                p.rgb = Some([
                    (128.0 + 120.0 * (8.0 * u).sin()) as u8,
                    (128.0 + 120.0 * (7.0 * v).cos()) as u8,
                    (128.0 + 120.0 * (5.0 * (u + v)).sin()) as u8,
                ]);
            }
            pts.push(p);
        }
        PointCloud::unorganized(pts)
    }

    fn prepared(seed: u64, with_rgb: bool) -> PointCloud {
        let c = surface_cloud(400, seed, with_rgb);
        let tree = KdTree3::build(&c).unwrap();
        cloud_with_normals(&c, &tree, 10, Vec3::new(0.0, 0.0, 1.0))
    }

    #[test]
    fn family_lengths() {
        assert_eq!(DescriptorFamily::Shot.len(), 352);
        assert_eq!(DescriptorFamily::Cshot.len(), 1344);
        assert_eq!(DescriptorFamily::Fpfh.len(), 33);
        assert_eq!(DescriptorFamily::Pfhrgb.len(), 250);
    }

    #[test]
    fn shot_empty_support_is_zero() {
        // keypoint isolated: no neighbors within the radius
        let mut pts = vec![Point3::new(0.0, 0.0, 0.0).with_normal(Vec3::new(0.0, 0.0, 1.0))];
        for i in 0..10 {
            pts.push(
                Point3::new(1.0 + i as f64 * 0.01, 0.0, 0.0)
                    .with_normal(Vec3::new(0.0, 0.0, 1.0)),
            );
        }
        let c = PointCloud::unorganized(pts);
        let tree = KdTree3::build(&c).unwrap();
        let lrf = LocalReferenceFrame {
            x: Vec3::new(1.0, 0.0, 0.0),
            y: Vec3::new(0.0, 1.0, 0.0),
            z: Vec3::new(0.0, 0.0, 1.0),
        };
        let d = shot(&c, &tree, 0, &lrf, 0.05);
        assert_eq!(d.values.len(), 352);
        assert!(d.is_zero());
    }

    #[test]
    fn shot_is_unit_norm() {
        let c = prepared(1, false);
        let tree = KdTree3::build(&c).unwrap();
        let lrf = crate::geometry::compute_lrf(&c, &tree, c.points[10].position(), 0.05).unwrap();
        let d = shot(&c, &tree, 10, &lrf, 0.05);
        let norm: f64 = d.values.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-6);
        d.validate().unwrap();
    }

    #[test]
    fn cshot_same_color_mass_in_zero_distance_region() {
        let mut c = prepared(2, true);
        for p in c.points.iter_mut() {
            p.rgb = Some([80, 160, 200]);
        }
        let tree = KdTree3::build(&c).unwrap();
        let lrf = crate::geometry::compute_lrf(&c, &tree, c.points[5].position(), 0.05).unwrap();
        let d = cshot(&c, &tree, 5, &lrf, 0.05).unwrap();
        assert_eq!(d.values.len(), 1344);
        // color part: all mass must sit in the first two bins of each
        // volume (zero distance, soft binning spreads to the neighbor bin)
        let color = &d.values[352..];
        for (i, v) in color.iter().enumerate() {
            let bin = i % CSHOT_COLOR_BINS;
            if bin > 1 {
                assert_eq!(*v, 0.0, "mass in color bin {bin}");
            }
        }
    }

    fn random_rigid(rng: &mut StdRng) -> RigidTransform {
        RigidTransform::from_axis_angle(
            Vec3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            ),
            rng.gen_range(-3.0..3.0),
            Vec3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            ),
        )
    }

    #[test]
    fn shot_rigid_invariance() {
        let c = prepared(3, false);
        let tree = KdTree3::build(&c).unwrap();
        let mut rng = StdRng::seed_from_u64(99);
        let t = random_rigid(&mut rng);
        // recompute normals in the transformed frame (viewpoint moves too)
        let base = surface_cloud(400, 3, false);
        let moved = transform_cloud(&base, &t);
        let tree2 = KdTree3::build(&moved).unwrap();
        let moved = cloud_with_normals(&moved, &tree2, 10, t.apply(Vec3::new(0.0, 0.0, 1.0)));

        for kp in [7usize, 42, 120] {
            let lrf1 =
                crate::geometry::compute_lrf(&c, &tree, c.points[kp].position(), 0.05).unwrap();
            let d1 = shot(&c, &tree, kp, &lrf1, 0.05);
            let lrf2 =
                crate::geometry::compute_lrf(&moved, &tree2, moved.points[kp].position(), 0.05)
                    .unwrap();
            let d2 = shot(&moved, &tree2, kp, &lrf2, 0.05);
            let max_dev = d1
                .values
                .iter()
                .zip(&d2.values)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(max_dev < 1e-5, "keypoint {kp}: deviation {max_dev}");
        }
    }

    #[test]
    fn fpfh_block_sums_are_100() {
        let c = prepared(4, false);
        let tree = KdTree3::build(&c).unwrap();
        let descs = fpfh(&c, &tree, &[3, 17, 200], 0.05);
        for d in descs {
            d.validate().unwrap();
            for block in d.values.chunks(11) {
                let s: f64 = block.iter().sum();
                assert!((s - 100.0).abs() < 1e-6 || s == 0.0);
            }
        }
    }

    #[test]
    fn fpfh_plane_concentrates_alpha_and_theta() {
        let mut rng = StdRng::seed_from_u64(8);
        let pts: Vec<Point3> = (0..300)
            .map(|_| {
                Point3::new(
                    rng.gen_range(-0.05..0.05),
                    rng.gen_range(-0.05..0.05),
                    0.0,
                )
                .with_normal(Vec3::new(0.0, 0.0, 1.0))
            })
            .collect();
        let c = PointCloud::unorganized(pts);
        let tree = KdTree3::build(&c).unwrap();
        let descs = fpfh(&c, &tree, &[0], 0.05);
        let v = &descs[0].values;
        // alpha = pi/2 -> cos = 0 -> center bin (index 5 of 11)
        assert!(v[5] > 99.0, "alpha histogram: {:?}", &v[0..11]);
        // theta = 0 -> center bin of the theta block
        assert!(v[22 + 5] > 99.0, "theta histogram: {:?}", &v[22..33]);
    }

    #[test]
    fn fpfh_single_neighbor_linearity() {
        let pts = vec![
            Point3::new(0.0, 0.0, 0.0).with_normal(Vec3::new(0.0, 0.0, 1.0)),
            Point3::new(0.02, 0.0, 0.0).with_normal(Vec3::new(0.0, 0.1, 1.0).normalized()),
        ];
        let c = PointCloud::unorganized(pts);
        let tree = KdTree3::build(&c).unwrap();
        let cache: HashMap<usize, [f64; 33]> = (0..2)
            .map(|i| (i, spfh(&c, &tree, i, 0.05)))
            .collect();
        let raw = fpfh_raw(&c, &tree, 0, 0.05, &cache);
        let d = 0.02;
        for b in 0..33 {
            let expect = cache[&0][b] + cache[&1][b] / d;
            assert!((raw[b] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn pfhrgb_identity_ratio_single_color_bin() {
        let mut c = prepared(5, true);
        for p in c.points.iter_mut() {
            p.rgb = Some([100, 100, 100]);
        }
        let tree = KdTree3::build(&c).unwrap();
        let d = pfhrgb(&c, &tree, 0, 0.05).unwrap();
        assert_eq!(d.values.len(), 250);
        // ratio (1,1,1): squash 0.5 -> bin 2 on each channel
        let col = &d.values[125..];
        let expect_idx = (2 * 5 + 2) * 5 + 2;
        for (i, v) in col.iter().enumerate() {
            if i == expect_idx {
                assert!(*v > 99.0);
            } else {
                assert_eq!(*v, 0.0);
            }
        }
    }

    #[test]
    fn pfhrgb_singleton_support_errors() {
        let pts = vec![
            Point3::new(0.0, 0.0, 0.0)
                .with_rgb([1, 2, 3])
                .with_normal(Vec3::new(0.0, 0.0, 1.0)),
            Point3::new(10.0, 0.0, 0.0)
                .with_rgb([1, 2, 3])
                .with_normal(Vec3::new(0.0, 0.0, 1.0)),
        ];
        let c = PointCloud::unorganized(pts);
        let tree = KdTree3::build(&c).unwrap();
        assert!(pfhrgb(&c, &tree, 0, 0.05).is_err());
    }

    #[test]
    fn permutation_invariance() {
        let c = prepared(6, true);
        let tree = KdTree3::build(&c).unwrap();
        // shuffle point storage, keep the same physical keypoint
        
        let mut perm: Vec<usize> = (0..c.len()).collect();
        let mut rng = StdRng::seed_from_u64(123);
        for i in (1..perm.len()).rev() {
            let j = rng.gen_range(0..=i);
            perm.swap(i, j);
        }
        let shuffled =
            PointCloud::unorganized(perm.iter().map(|&i| c.points[i]).collect());
        let kp2 = perm.iter().position(|&i| i == 50).unwrap();
        let tree2 = KdTree3::build(&shuffled).unwrap();

        for family in [DescriptorFamily::Fpfh, DescriptorFamily::Pfhrgb] {
            let d1 = describe_keypoints(&c, &tree, &[50], family, 0.05).unwrap();
            let d2 = describe_keypoints(&shuffled, &tree2, &[kp2], family, 0.05).unwrap();
            for (a, b) in d1[0].values.iter().zip(&d2[0].values) {
                assert!((a - b).abs() < 1e-9, "{family:?}: {a} vs {b}");
            }
        }
    }
}
