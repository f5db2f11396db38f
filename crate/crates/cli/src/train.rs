use std::fs;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use sparse_splat::ingest::{export_ply, init_gaussians_from_points, load_depth_prior_for};
use sparse_splat::regularize::{DepthEstimator, ExternalCommand, FilePrior};
use sparse_splat::scene::TrainingConfig;
use sparse_splat::train::{TrainEvent, TrainLog, Trainer, TrainingView};

use crate::dataset;

/// Neighbors used to size the initial Gaussians.
const INIT_NEIGHBORS: usize = 3;

#[derive(Args)]
pub struct TrainArgs {
    /// COLMAP model directory (cameras/images/points3D, text or binary).
    #[arg(long)]
    colmap: PathBuf,
    /// Directory holding the images named in the model.
    #[arg(long)]
    images: PathBuf,
    /// Directory of `<image stem>.pfm` disparity priors, one per training view.
    #[arg(long)]
    priors: PathBuf,
    /// Training configuration (`key = value` lines).
    #[arg(long)]
    config: PathBuf,
    /// Output directory for checkpoints, the final PLY and the logs.
    #[arg(long)]
    out: PathBuf,
    /// Number of evenly spaced training views; all non-test views if omitted.
    #[arg(long)]
    views: Option<usize>,
    /// Integer image downsampling factor.
    #[arg(long, default_value_t = 1)]
    downsample: u32,
    /// Random seed; overrides `seed` in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Shell command producing pseudo-view priors; `{input}` is a PNG to read
    /// and `{output}` the PFM to write. Without it pseudo views are disabled.
    #[arg(long)]
    depth_command: Option<String>,
}

pub fn run(args: TrainArgs) -> Result<()> {
    let mut config = TrainingConfig::from_file(&args.config)
        .with_context(|| format!("{}: invalid training config", args.config.display()))?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let model = dataset::load_model(&args.colmap)?;
    let posed = dataset::posed_images(&model, args.downsample)?;
    let chosen = dataset::train_indices(posed.len(), args.views)?;
    let names: Vec<String> = chosen.iter().map(|i| i.to_string()).collect();
    println!("training views: {}", names.join(" "));
    for &i in &chosen {
        println!("  {i}: {} (image id {})", posed[i].name, posed[i].image_id);
    }

    let files = FilePrior::new(&args.priors);
    let mut views = Vec::with_capacity(chosen.len());
    for &i in &chosen {
        let p = &posed[i];
        let image = dataset::load_view_image(&args.images, p, args.downsample)?;
        let prior = load_depth_prior_for(&files.path_for(&p.name), image.width, image.height)?;
        views.push(TrainingView {
            name: p.name.clone(),
            camera: p.camera.clone(),
            image,
            prior: Some(prior),
        });
    }

    let positions: Vec<[f32; 3]> = model.points.iter().map(|p| p.xyz.map(|v| v as f32)).collect();
    let colors: Vec<[u8; 3]> = model.points.iter().map(|p| p.rgb).collect();
    let initial = init_gaussians_from_points(&positions, &colors, INIT_NEIGHBORS, config.sh_degree_max)
        .with_context(|| format!("{}: cannot initialize from the SfM points", args.colmap.display()))?;

    let command = args.depth_command.as_deref().map(ExternalCommand::new).transpose()?;
    let estimator: Option<&dyn DepthEstimator> = match &command {
        Some(c) => Some(c),
        None => Some(&files),
    };

    fs::create_dir_all(&args.out).with_context(|| format!("{}: cannot create", args.out.display()))?;
    let mut trainer = Trainer::new(config, views, initial, estimator)?.with_checkpoints(args.out.join("checkpoints"));
    for note in &trainer.log().notes {
        eprintln!("warning: {note}");
    }
    let result = trainer.run();
    let (set, log) = trainer.into_parts();
    write_log(&log, &args.out)?;
    result?;
    let ply = args.out.join("point_cloud.ply");
    export_ply(&set, &ply)?;
    println!("{} Gaussians written to {}", set.len(), ply.display());
    Ok(())
}

fn write_log(log: &TrainLog, out: &std::path::Path) -> Result<()> {
    let path = out.join("train_log.csv");
    let mut w = csv::Writer::from_path(&path).with_context(|| path.display().to_string())?;
    w.write_record([
        "iteration",
        "view",
        "l1",
        "dssim",
        "depth",
        "pseudo_depth",
        "total",
        "gaussians",
        "sh_degree",
        "position_lr",
        "pseudo_view",
        "wall_ms",
    ])?;
    for r in &log.records {
        w.write_record([
            r.iteration.to_string(),
            r.view.to_string(),
            r.loss.l1.to_string(),
            r.loss.dssim.to_string(),
            r.loss.depth.to_string(),
            r.loss.pseudo_depth.to_string(),
            r.loss.total.to_string(),
            r.gaussians.to_string(),
            r.active_sh_degree.to_string(),
            r.position_lr.to_string(),
            r.pseudo_view.to_string(),
            format!("{:.3}", r.wall_ms),
        ])?;
    }
    w.flush()?;

    let path = out.join("events.csv");
    let mut w = csv::Writer::from_path(&path).with_context(|| path.display().to_string())?;
    w.write_record(["iteration", "event", "cloned", "split", "unpooled", "pruned", "gaussians", "detail"])?;
    for e in &log.events {
        let mut row = vec![e.iteration().to_string(), e.kind().to_string()];
        match e {
            TrainEvent::Densify {
                cloned,
                split,
                unpooled,
                pruned,
                gaussians,
                ..
            } => {
                row.extend([cloned, split, unpooled, pruned, gaussians].map(|v| v.to_string()));
                row.push(String::new());
            }
            TrainEvent::OpacityReset { .. } => row.extend(std::iter::repeat_n(String::new(), 6)),
            TrainEvent::PseudoSkipped { reason, .. } => {
                row.extend(std::iter::repeat_n(String::new(), 5));
                row.push(reason.clone());
            }
            TrainEvent::Checkpoint { path, .. } => {
                row.extend(std::iter::repeat_n(String::new(), 5));
                row.push(path.display().to_string());
            }
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
