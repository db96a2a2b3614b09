//! Command-line interface: scene recognition, benchmarking, evaluation,
//! saliency mask generation, and synthetic data generation.

use clap::{Parser, Subcommand};
use salboost::bench::{build_artifacts, build_database, run_benchmark};
use salboost::config::Config;
use salboost::describe::DescriptorFamily;
use salboost::detect::DetectorTag;
use salboost::eval::{
    auc, group_by_scene, load_detections, load_ground_truth, prc_sweep,
    save_ground_truth, DetectionRecord,
};
use salboost::io::pnm::{load_image_as_gray, save_pgm, GrayImage};
use salboost::io::{load_cloud, save_cloud, CloudFormat};
use salboost::pipeline::{process_scene, PipelineKind};
use salboost::recognize::ModelDatabase;
use salboost::saliency::{binarize, load_mask, spectral_residual_saliency};
use std::collections::HashMap;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(name = "salboost", version, about = "Point-cloud object recognition with a saliency-boost pre-filter")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Recognize objects in one scene cloud against a model database
    Recognize {
        /// JSON config file (defaults used when omitted)
        #[arg(long)]
        config: Option<PathBuf>,
        /// model database directory
        #[arg(long)]
        db: PathBuf,
        /// organized scene cloud (PCD)
        #[arg(long)]
        scene: PathBuf,
        /// saliency mask (PGM); enables the boosted pipeline
        #[arg(long)]
        mask: Option<PathBuf>,
        #[arg(long, default_value = "us")]
        detector: String,
        /// output JSON path (stdout when omitted)
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run the full benchmark suite and write CSV/JSON reports
    Bench {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "bench-out")]
        out_dir: PathBuf,
    },
    /// Score saved detections against ground truth (PRC + AUC)
    Eval {
        /// detections JSON (as written by `recognize`)
        #[arg(long)]
        detections: PathBuf,
        /// ground-truth text file
        #[arg(long)]
        gt: PathBuf,
        /// directory with <model_id>.pcd model clouds
        #[arg(long)]
        models_dir: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Compute a spectral-residual saliency mask from an image
    Saliency {
        /// input image (PGM or PPM)
        #[arg(long)]
        input: PathBuf,
        /// output mask (PGM)
        #[arg(long)]
        output: PathBuf,
        /// emit the thresholded+dilated binary mask instead of the raw map
        #[arg(long)]
        binary: bool,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Generate the synthetic benchmark suite (scenes, masks, ground truth)
    Synth {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "synth-out")]
        out_dir: PathBuf,
    },
    /// Build and persist a model database from the synthetic models
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "db-out")]
        out_dir: PathBuf,
        #[arg(long, default_value = "us")]
        detector: String,
        #[arg(long, default_value = "shot")]
        descriptor: String,
    },
}

fn load_config(path: &Option<PathBuf>) -> salboost::Result<Config> {
    match path {
        Some(p) => Config::load(p),
        None => Ok(Config::default()),
    }
}

fn write_or_print(text: &str, output: &Option<PathBuf>) -> salboost::Result<()> {
    match output {
        Some(p) => std::fs::write(p, text).map_err(|e| salboost::Error::io(p, e)),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn run() -> salboost::Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Recognize { config, db, scene, mask, detector, output } => {
            let cfg = load_config(&config)?;
            let detector = DetectorTag::parse(&detector)?;
            let db = ModelDatabase::load(&db)?;
            let cloud = load_cloud(&scene)?;
            let scene_id = scene
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "scene".to_string());
            let (pipeline, binary_mask) = match mask {
                Some(mpath) => {
                    let m = load_mask(&mpath, Some((cloud.width, cloud.height)))?;
                    (
                        PipelineKind::Boost,
                        Some(binarize(&m, cfg.binarize_threshold, cfg.dilate_px)),
                    )
                }
                None => (PipelineKind::Lp, None),
            };
            let outcome =
                process_scene(&cloud, binary_mask.as_ref(), &db, detector, pipeline, &cfg)?;
            let records: Vec<DetectionRecord> = outcome
                .detections
                .iter()
                .map(|d| DetectionRecord::from_detection(&scene_id, d))
                .collect();
            eprintln!(
                "{}: {} keypoints, {} detections, {:.3}s",
                scene_id,
                outcome.keypoint_count,
                records.len(),
                outcome.times.total()
            );
            write_or_print(&serde_json::to_string_pretty(&records)?, &output)
        }
        Command::Bench { config, out_dir } => {
            let cfg = load_config(&config)?;
            let report = run_benchmark(&cfg)?;
            std::fs::create_dir_all(&out_dir).map_err(|e| salboost::Error::io(&out_dir, e))?;
            report.save(&out_dir.join("report.csv"), &out_dir.join("report.json"))?;
            for c in &report.combos {
                println!(
                    "{}/{}: keypoints {:.0} -> {:.0} ({:+.1}%), time {:.3}s -> {:.3}s ({:+.1}%), auc {:.3} -> {:.3}",
                    c.detector,
                    c.descriptor,
                    c.lp.mean_keypoints,
                    c.boost.mean_keypoints,
                    c.keypoints_pct,
                    c.lp.mean_total_time,
                    c.boost.mean_total_time,
                    c.time_pct,
                    c.lp.auc,
                    c.boost.auc
                );
            }
            println!("report written to {}", out_dir.display());
            Ok(())
        }
        Command::Eval { detections, gt, models_dir, config, output } => {
            let cfg = load_config(&config)?;
            let records = load_detections(&detections)?;
            let entries = load_ground_truth(&gt)?;
            let mut models = HashMap::new();
            let mut ids: Vec<&String> = records
                .iter()
                .map(|r| &r.model_id)
                .chain(entries.iter().map(|g| &g.model_id))
                .collect();
            ids.sort();
            ids.dedup();
            for id in ids {
                let path = models_dir.join(format!("{id}.pcd"));
                models.insert(id.clone(), load_cloud(&path)?);
            }
            let scenes = group_by_scene(&records, &entries)?;
            let prc = prc_sweep(&scenes, &models, cfg.iou_min)?;
            let auc_val = if prc.is_empty() { 0.0 } else { auc(&prc)? };
            let out = serde_json::json!({ "prc": prc, "auc": auc_val });
            write_or_print(&serde_json::to_string_pretty(&out)?, &output)
        }
        Command::Saliency { input, output, binary, config } => {
            let cfg = load_config(&config)?;
            let gray = load_image_as_gray(&input)?;
            let mask = spectral_residual_saliency(&gray)?;
            let img = if binary {
                let b = binarize(&mask, cfg.binarize_threshold, cfg.dilate_px);
                let mut img = GrayImage::new(b.width, b.height);
                for (i, &on) in b.bits.iter().enumerate() {
                    img.pixels[i] = if on { 255 } else { 0 };
                }
                img
            } else {
                mask.to_gray()
            };
            save_pgm(&img, &output)
        }
        Command::Synth { config, out_dir } => {
            let cfg = load_config(&config)?;
            let artifacts = build_artifacts(&cfg)?;
            let models_dir = out_dir.join("models");
            let scenes_dir = out_dir.join("scenes");
            for d in [&models_dir, &scenes_dir] {
                std::fs::create_dir_all(d).map_err(|e| salboost::Error::io(d, e))?;
            }
            for (id, cloud) in &artifacts.models {
                save_cloud(cloud, models_dir.join(format!("{id}.pcd")), CloudFormat::PcdBinary)?;
            }
            let mut gt = Vec::new();
            for scene in &artifacts.scenes {
                let id = &scene.ground_truth[0].scene_id;
                save_cloud(
                    &scene.cloud,
                    scenes_dir.join(format!("{id}.pcd")),
                    CloudFormat::PcdBinary,
                )?;
                let mut img = GrayImage::new(scene.oracle_mask.width, scene.oracle_mask.height);
                for (i, &on) in scene.oracle_mask.bits.iter().enumerate() {
                    img.pixels[i] = if on { 255 } else { 0 };
                }
                save_pgm(&img, &scenes_dir.join(format!("{id}_mask.pgm")))?;
                gt.extend(scene.ground_truth.iter().cloned());
            }
            save_ground_truth(&gt, &out_dir.join("gt.txt"))?;
            println!(
                "wrote {} models and {} scenes to {}",
                artifacts.models.len(),
                artifacts.scenes.len(),
                out_dir.display()
            );
            Ok(())
        }
        Command::Train { config, out_dir, detector, descriptor } => {
            let cfg = load_config(&config)?;
            let detector = DetectorTag::parse(&detector)?;
            let family = DescriptorFamily::parse(&descriptor)?;
            let artifacts = build_artifacts(&cfg)?;
            let db = build_database(&artifacts, detector, family, &cfg)?;
            db.save(Path::new(&out_dir))?;
            println!(
                "database with {} models / {} descriptors written to {}",
                db.models.len(),
                db.index.len(),
                out_dir.display()
            );
            Ok(())
        }
    }
}

fn main() {
    if let Err(e) = run() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
