//! Saliency masks: ingestion, a spectral-residual baseline detector,
//! binarization with dilation, and the 3D/2D boost filters.

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::io::pnm::GrayImage;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use std::path::Path;

/// Per-pixel salience in [0, 1] over the registered RGB image.
#[derive(Debug, Clone, PartialEq)]
pub struct SaliencyMask {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f32>,
}

impl SaliencyMask {
    pub fn new(width: usize, height: usize, values: Vec<f32>) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} mask needs {} values, got {}",
                width,
                height,
                width * height,
                values.len()
            )));
        }
        if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidInput("mask value outside [0,1]".into()));
        }
        Ok(SaliencyMask { width, height, values })
    }

    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.values[y * self.width + x]
    }

    pub fn to_gray(&self) -> GrayImage {
        GrayImage {
            width: self.width,
            height: self.height,
            pixels: self
                .values
                .iter()
                .map(|v| (v * 255.0).round() as u8)
                .collect(),
        }
    }
}

/// Binarized (and dilated) saliency mask.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryMask {
    pub width: usize,
    pub height: usize,
    pub bits: Vec<bool>,
}

impl BinaryMask {
    pub fn all_salient(width: usize, height: usize) -> Self {
        BinaryMask { width, height, bits: vec![true; width * height] }
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn salient_count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn salient_fraction(&self) -> f64 {
        self.salient_count() as f64 / self.bits.len() as f64
    }
}

/// Loads an 8-bit PGM as a saliency mask (pixel / 255). When
/// `expected_size` is given, the mask dimensions must match it.
pub fn load_mask(path: &Path, expected_size: Option<(usize, usize)>) -> Result<SaliencyMask> {
    let img = crate::io::pnm::load_pgm(path)?;
    if let Some((w, h)) = expected_size {
        if img.width != w || img.height != h {
            return Err(Error::DimensionMismatch(format!(
                "mask {} is {}x{}, expected {}x{}",
                path.display(),
                img.width,
                img.height,
                w,
                h
            )));
        }
    }
    let values = img.pixels.iter().map(|&p| p as f32 / 255.0).collect();
    SaliencyMask::new(img.width, img.height, values)
}

pub fn mask_from_gray(img: &GrayImage) -> SaliencyMask {
    SaliencyMask {
        width: img.width,
        height: img.height,
        values: img.pixels.iter().map(|&p| p as f32 / 255.0).collect(),
    }
}

fn bilinear_resize(src: &[f64], sw: usize, sh: usize, dw: usize, dh: usize) -> Vec<f64> {
    let mut out = vec![0.0; dw * dh];
    for y in 0..dh {
        for x in 0..dw {
            let fx = if dw > 1 {
                x as f64 * (sw - 1) as f64 / (dw - 1) as f64
            } else {
                0.0
            };
            let fy = if dh > 1 {
                y as f64 * (sh - 1) as f64 / (dh - 1) as f64
            } else {
                0.0
            };
            let x0 = fx.floor() as usize;
            let y0 = fy.floor() as usize;
            let x1 = (x0 + 1).min(sw - 1);
            let y1 = (y0 + 1).min(sh - 1);
            let tx = fx - x0 as f64;
            let ty = fy - y0 as f64;
            let v00 = src[y0 * sw + x0];
            let v10 = src[y0 * sw + x1];
            let v01 = src[y1 * sw + x0];
            let v11 = src[y1 * sw + x1];
            out[y * dw + x] = v00 * (1.0 - tx) * (1.0 - ty)
                + v10 * tx * (1.0 - ty)
                + v01 * (1.0 - tx) * ty
                + v11 * tx * ty;
        }
    }
    out
}

fn fft2d(data: &mut [Complex<f64>], w: usize, h: usize, inverse: bool) {
    let mut planner = FftPlanner::new();
    let row_fft = if inverse {
        planner.plan_fft_inverse(w)
    } else {
        planner.plan_fft_forward(w)
    };
    let col_fft = if inverse {
        planner.plan_fft_inverse(h)
    } else {
        planner.plan_fft_forward(h)
    };
    for y in 0..h {
        row_fft.process(&mut data[y * w..(y + 1) * w]);
    }
    let mut col = vec![Complex::new(0.0, 0.0); h];
    for x in 0..w {
        for y in 0..h {
            col[y] = data[y * w + x];
        }
        col_fft.process(&mut col);
        for y in 0..h {
            data[y * w + x] = col[y];
        }
    }
}

fn box_filter_3x3(src: &[f64], w: usize, h: usize) -> Vec<f64> {
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut sum = 0.0;
            let mut cnt = 0.0;
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    let nx = x as i64 + dx;
                    let ny = y as i64 + dy;
                    if nx >= 0 && ny >= 0 && (nx as usize) < w && (ny as usize) < h {
                        sum += src[ny as usize * w + nx as usize];
                        cnt += 1.0;
                    }
                }
            }
            out[y * w + x] = sum / cnt;
        }
    }
    out
}

fn gaussian_blur(src: &[f64], w: usize, h: usize, sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as i64;
    let mut kernel = Vec::with_capacity((2 * radius + 1) as usize);
    for i in -radius..=radius {
        kernel.push((-(i * i) as f64 / (2.0 * sigma * sigma)).exp());
    }
    let ksum: f64 = kernel.iter().sum();
    for k in &mut kernel {
        *k /= ksum;
    }
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut s = 0.0;
            let mut wsum = 0.0;
            for (ki, i) in (-radius..=radius).enumerate() {
                let nx = x as i64 + i;
                if nx >= 0 && (nx as usize) < w {
                    s += src[y * w + nx as usize] * kernel[ki];
                    wsum += kernel[ki];
                }
            }
            tmp[y * w + x] = s / wsum;
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut s = 0.0;
            let mut wsum = 0.0;
            for (ki, i) in (-radius..=radius).enumerate() {
                let ny = y as i64 + i;
                if ny >= 0 && (ny as usize) < h {
                    s += tmp[ny as usize * w + x] * kernel[ki];
                    wsum += kernel[ki];
                }
            }
            out[y * w + x] = s / wsum;
        }
    }
    out
}

/// Spectral-residual saliency of a grayscale image: work at 64 px on the
/// long side, subtract the box-filtered log-amplitude from the log
/// spectrum, reconstruct, blur, upscale, and min-max normalize.
pub fn spectral_residual_saliency(image: &GrayImage) -> Result<SaliencyMask> {
    if image.width == 0 || image.height == 0 {
        return Err(Error::Empty("empty image".into()));
    }
    let (w0, h0) = (image.width, image.height);
    let long = w0.max(h0);
    let scale = 64.0 / long as f64;
    let w = ((w0 as f64 * scale).round() as usize).max(1);
    let h = ((h0 as f64 * scale).round() as usize).max(1);

    let gray: Vec<f64> = image.pixels.iter().map(|&p| p as f64 / 255.0).collect();
    let small = bilinear_resize(&gray, w0, h0, w, h);

    let mut freq: Vec<Complex<f64>> =
        small.iter().map(|&v| Complex::new(v, 0.0)).collect();
    fft2d(&mut freq, w, h, false);

    let amp: Vec<f64> = freq.iter().map(|c| c.norm()).collect();
    let phase: Vec<f64> = freq.iter().map(|c| c.arg()).collect();
    let log_amp: Vec<f64> = amp.iter().map(|a| (a + 1e-12).ln()).collect();
    let avg = box_filter_3x3(&log_amp, w, h);
    let residual: Vec<f64> = log_amp.iter().zip(&avg).map(|(l, a)| l - a).collect();

    let mut recon: Vec<Complex<f64>> = residual
        .iter()
        .zip(&phase)
        .map(|(r, p)| Complex::from_polar(r.exp(), *p))
        .collect();
    fft2d(&mut recon, w, h, true);
    let n = (w * h) as f64;
    let sal_small: Vec<f64> = recon.iter().map(|c| (c.norm() / n).powi(2)).collect();

    let blurred = gaussian_blur(&sal_small, w, h, 2.5);
    let full = bilinear_resize(&blurred, w, h, w0, h0);

    let mn = full.iter().cloned().fold(f64::INFINITY, f64::min);
    let mx = full.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    // relative flatness test: a structureless image is all constant DC
    // energy with float-level ripple, which must not be stretched to
    // full scale by the normalization below
    let range = mx - mn;
    let values: Vec<f32> = if range <= 1e-9 * mx.abs() + 1e-300 {
        vec![0.0; w0 * h0]
    } else {
        full.iter()
            .map(|v| (((v - mn) / range) as f32).clamp(0.0, 1.0))
            .collect()
    };
    SaliencyMask::new(w0, h0, values)
}

/// Thresholds a saliency mask and dilates the result with a square kernel
/// of the given radius.
pub fn binarize(mask: &SaliencyMask, threshold: f32, dilate_px: usize) -> BinaryMask {
    assert!(threshold > 0.0 && threshold < 1.0, "threshold must be in (0,1)");
    let (w, h) = (mask.width, mask.height);
    let mut bits: Vec<bool> = mask.values.iter().map(|&v| v >= threshold).collect();

    if dilate_px > 0 {
        let r = dilate_px as i64;
        // separable max filter: rows then columns
        let mut rows = vec![false; w * h];
        for y in 0..h {
            for x in 0..w {
                let lo = (x as i64 - r).max(0) as usize;
                let hi = ((x as i64 + r) as usize).min(w - 1);
                rows[y * w + x] = bits[y * w + lo..=y * w + hi].iter().any(|&b| b);
            }
        }
        let mut cols = vec![false; w * h];
        for x in 0..w {
            for y in 0..h {
                let lo = (y as i64 - r).max(0) as usize;
                let hi = ((y as i64 + r) as usize).min(h - 1);
                cols[y * w + x] = (lo..=hi).any(|yy| rows[yy * w + x]);
            }
        }
        bits = cols;
    }
    BinaryMask { width: w, height: h, bits }
}

/// Result of projecting a binary mask onto an organized cloud: the salient
/// valid points as an unorganized cloud plus their original indices.
#[derive(Debug, Clone)]
pub struct FilteredCloud {
    pub cloud: PointCloud,
    /// index into the source cloud for each retained point
    pub source_indices: Vec<usize>,
}

/// Keeps exactly the valid points whose pixel is salient. The cloud must
/// be organized and match the mask dimensions.
pub fn filter_cloud(cloud: &PointCloud, mask: &BinaryMask) -> Result<FilteredCloud> {
    if !cloud.is_organized() {
        return Err(Error::InvalidInput("filter_cloud needs an organized cloud".into()));
    }
    if cloud.width != mask.width || cloud.height != mask.height {
        return Err(Error::DimensionMismatch(format!(
            "cloud {}x{} vs mask {}x{}",
            cloud.width, cloud.height, mask.width, mask.height
        )));
    }
    let mut points = Vec::new();
    let mut source_indices = Vec::new();
    for (i, p) in cloud.points.iter().enumerate() {
        if p.is_valid() && mask.bits[i] {
            points.push(*p);
            source_indices.push(i);
        }
    }
    Ok(FilteredCloud { cloud: PointCloud::unorganized(points), source_indices })
}

/// Collects the valid points of any cloud in index order; the unboosted
/// counterpart of [`filter_cloud`] (identical to filtering with an
/// all-salient mask).
pub fn collect_valid(cloud: &PointCloud) -> FilteredCloud {
    let mut points = Vec::new();
    let mut source_indices = Vec::new();
    for (i, p) in cloud.points.iter().enumerate() {
        if p.is_valid() {
            points.push(*p);
            source_indices.push(i);
        }
    }
    FilteredCloud { cloud: PointCloud::unorganized(points), source_indices }
}

/// Keeps the 2D keypoints whose pixel is salient; order preserved.
pub fn filter_keypoints_2d(
    keypoints: &[(usize, usize)],
    mask: &BinaryMask,
) -> Result<Vec<(usize, usize)>> {
    for &(x, y) in keypoints {
        if x >= mask.width || y >= mask.height {
            return Err(Error::InvalidInput(format!(
                "keypoint ({x},{y}) outside {}x{} mask",
                mask.width, mask.height
            )));
        }
    }
    Ok(keypoints
        .iter()
        .copied()
        .filter(|&(x, y)| mask.get(x, y))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cloud::Point3;

    #[test]
    fn binarize_threshold() {
        let mask = SaliencyMask::new(2, 1, vec![0.4, 0.6]).unwrap();
        let b = binarize(&mask, 0.5, 0);
        assert_eq!(b.bits, vec![false, true]);
    }

    #[test]
    fn binarize_all_ones() {
        let mask = SaliencyMask::new(3, 3, vec![1.0; 9]).unwrap();
        for thr in [0.1, 0.5, 0.9] {
            let b = binarize(&mask, thr, 0);
            assert!(b.bits.iter().all(|&x| x));
        }
    }

    #[test]
    fn dilation_single_pixel() {
        let mut values = vec![0.0f32; 25];
        values[12] = 1.0; // center of 5x5
        let mask = SaliencyMask::new(5, 5, values).unwrap();
        let b = binarize(&mask, 0.5, 1);
        for y in 0..5 {
            for x in 0..5 {
                let expect = (1..=3).contains(&x) && (1..=3).contains(&y);
                assert_eq!(b.get(x, y), expect, "at ({x},{y})");
            }
        }
    }

    #[test]
    fn filter_cloud_all_salient_keeps_valid() {
        let mut pts = Vec::new();
        for i in 0..12 {
            if i % 5 == 0 {
                pts.push(Point3::invalid());
            } else {
                pts.push(Point3::new(i as f64, 0.0, 1.0));
            }
        }
        let cloud = PointCloud::organized(pts, 4, 3).unwrap();
        let mask = BinaryMask::all_salient(4, 3);
        let f = filter_cloud(&cloud, &mask).unwrap();
        assert_eq!(f.cloud.len(), cloud.valid_count());
        // identical to the plain valid-point collection
        let g = collect_valid(&cloud);
        assert_eq!(f.cloud, g.cloud);
        assert_eq!(f.source_indices, g.source_indices);
    }

    #[test]
    fn filter_cloud_all_zero_is_empty() {
        let pts = (0..4).map(|i| Point3::new(i as f64, 0.0, 1.0)).collect();
        let cloud = PointCloud::organized(pts, 2, 2).unwrap();
        let mask = BinaryMask { width: 2, height: 2, bits: vec![false; 4] };
        let f = filter_cloud(&cloud, &mask).unwrap();
        assert!(f.cloud.is_empty());
    }

    #[test]
    fn filter_cloud_left_half() {
        let w = 8;
        let h = 4;
        let pts = (0..w * h).map(|i| Point3::new(i as f64, 0.0, 1.0)).collect();
        let cloud = PointCloud::organized(pts, w, h).unwrap();
        let bits: Vec<bool> = (0..w * h).map(|i| i % w < w / 2).collect();
        let mask = BinaryMask { width: w, height: h, bits };
        let f = filter_cloud(&cloud, &mask).unwrap();
        // per-pixel scan oracle
        let expect: Vec<usize> = (0..w * h).filter(|i| i % w < w / 2).collect();
        assert_eq!(f.source_indices, expect);
    }

    #[test]
    fn filter_cloud_rejects_unorganized() {
        let cloud = PointCloud::unorganized(vec![Point3::new(0.0, 0.0, 0.0)]);
        let mask = BinaryMask::all_salient(1, 1);
        assert!(filter_cloud(&cloud, &mask).is_err());
    }

    #[test]
    fn filter_cloud_idempotent_and_monotone() {
        let w = 6;
        let h = 6;
        let pts = (0..w * h).map(|i| Point3::new(i as f64, 0.0, 1.0)).collect();
        let cloud = PointCloud::organized(pts, w, h).unwrap();
        let bits: Vec<bool> = (0..w * h).map(|i| i % 3 == 0).collect();
        let small = BinaryMask { width: w, height: h, bits: bits.clone() };
        let big_bits: Vec<bool> = (0..w * h).map(|i| i % 3 == 0 || i % 5 == 0).collect();
        let big = BinaryMask { width: w, height: h, bits: big_bits };

        let f1 = filter_cloud(&cloud, &small).unwrap();
        let f2 = filter_cloud(&cloud, &big).unwrap();
        assert!(f2.cloud.len() >= f1.cloud.len());
        // subset of valid input points
        for idx in &f1.source_indices {
            assert!(cloud.points[*idx].is_valid());
        }
    }

    #[test]
    fn filter_keypoints_matches_membership() {
        let bits: Vec<bool> = (0..16).map(|i| i % 2 == 0).collect();
        let mask = BinaryMask { width: 4, height: 4, bits };
        let kps: Vec<(usize, usize)> = vec![(0, 0), (1, 0), (2, 1), (3, 3)];
        let out = filter_keypoints_2d(&kps, &mask).unwrap();
        let expect: Vec<(usize, usize)> = kps
            .iter()
            .copied()
            .filter(|&(x, y)| mask.get(x, y))
            .collect();
        assert_eq!(out, expect);
    }

    #[test]
    fn filter_keypoints_out_of_bounds() {
        let mask = BinaryMask::all_salient(4, 4);
        assert!(filter_keypoints_2d(&[(4, 0)], &mask).is_err());
    }

    #[test]
    fn spectral_residual_constant_image_is_zero() {
        let img = GrayImage { width: 32, height: 32, pixels: vec![128; 32 * 32] };
        let mask = spectral_residual_saliency(&img).unwrap();
        assert!(mask.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn spectral_residual_blob_peaks_inside_blob() {
        let mut img = GrayImage::new(64, 64);
        for y in 20..25 {
            for x in 30..35 {
                img.set(x, y, 255);
            }
        }
        let mask = spectral_residual_saliency(&img).unwrap();
        let mut best = (0usize, 0usize);
        let mut best_v = -1.0f32;
        for y in 0..64 {
            for x in 0..64 {
                if mask.get(x, y) > best_v {
                    best_v = mask.get(x, y);
                    best = (x, y);
                }
            }
        }
        assert!(
            (28..=37).contains(&best.0) && (18..=27).contains(&best.1),
            "argmax at {best:?}"
        );
        assert!(mask.values.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }
}
