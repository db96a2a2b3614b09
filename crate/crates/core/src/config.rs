//! Single JSON configuration surface: every pipeline default is
//! overridable from one file.

use crate::describe::DescriptorFamily;
use crate::detect::{DetectorTag, IssParams};
use crate::error::{Error, Result};
use crate::synth::PinholeCamera;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IssConfig {
    pub salient_radius: f64,
    pub nms_radius: f64,
    pub gamma21: f64,
    pub gamma32: f64,
    pub min_neighbors: usize,
}

impl Default for IssConfig {
    fn default() -> Self {
        IssConfig {
            salient_radius: 0.01,
            nms_radius: 0.006,
            gamma21: 0.975,
            gamma32: 0.975,
            min_neighbors: 5,
        }
    }
}

impl IssConfig {
    pub fn to_params(&self) -> IssParams {
        IssParams {
            salient_radius: self.salient_radius,
            nms_radius: self.nms_radius,
            gamma21: self.gamma21,
            gamma32: self.gamma32,
            min_neighbors: self.min_neighbors,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub scenes: usize,
    pub models: usize,
    pub min_placements: usize,
    pub max_placements: usize,
    pub clutter: usize,
    /// clutter slab: center x/y/z and full extents, meters
    pub clutter_center: [f64; 3],
    pub clutter_extent: [f64; 3],
    pub noise_sigma: f64,
    pub seed: u64,
    pub camera: PinholeCamera,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            scenes: 10,
            models: 5,
            min_placements: 2,
            max_placements: 3,
            clutter: 60000,
            clutter_center: [0.0, 0.12, 1.05],
            clutter_extent: [0.55, 0.28, 0.012],
            noise_sigma: 0.0,
            seed: 20240817,
            camera: PinholeCamera::desk(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub normals_k: usize,
    pub viewpoint: [f64; 3],
    pub descriptor_radius: f64,
    pub uniform_leaf: f64,
    pub iss: IssConfig,
    pub fast_threshold: u8,
    pub fast_nms: bool,
    pub gcg_epsilon: f64,
    pub min_cluster_size: usize,
    pub iou_min: f64,
    pub binarize_threshold: f32,
    pub dilate_px: usize,
    pub detectors: Vec<DetectorTag>,
    pub families: Vec<DescriptorFamily>,
    pub synth: SynthConfig,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            normals_k: 10,
            viewpoint: [0.0, 0.0, 0.0],
            descriptor_radius: 0.05,
            uniform_leaf: 0.02,
            iss: IssConfig::default(),
            fast_threshold: 20,
            fast_nms: true,
            gcg_epsilon: 0.01,
            min_cluster_size: 3,
            iou_min: 0.25,
            binarize_threshold: 0.5,
            dilate_px: 8,
            detectors: vec![
                DetectorTag::UniformSampling,
                DetectorTag::Iss,
                DetectorTag::Fast,
            ],
            families: vec![
                DescriptorFamily::Shot,
                DescriptorFamily::Cshot,
                DescriptorFamily::Fpfh,
                DescriptorFamily::Pfhrgb,
            ],
            synth: SynthConfig::default(),
        }
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Config> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: Config = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn validate(&self) -> Result<()> {
        if self.descriptor_radius <= 0.0 || self.uniform_leaf <= 0.0 {
            return Err(Error::InvalidInput("radii must be positive".into()));
        }
        if self.gcg_epsilon <= 0.0 {
            return Err(Error::InvalidInput("gcg_epsilon must be positive".into()));
        }
        if self.min_cluster_size < 3 {
            return Err(Error::InvalidInput("min_cluster_size must be >= 3".into()));
        }
        if !(self.binarize_threshold > 0.0 && self.binarize_threshold < 1.0) {
            return Err(Error::InvalidInput(
                "binarize_threshold must be in (0,1)".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.iou_min) {
            return Err(Error::InvalidInput("iou_min must be in [0,1]".into()));
        }
        if self.detectors.is_empty() || self.families.is_empty() {
            return Err(Error::InvalidInput(
                "at least one detector and one descriptor family required".into(),
            ));
        }
        if self.synth.min_placements == 0
            || self.synth.min_placements > self.synth.max_placements
        {
            return Err(Error::InvalidInput("bad placement range".into()));
        }
        Ok(())
    }
}
