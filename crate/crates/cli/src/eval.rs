use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::Args;
use sparse_splat::ingest::{import_ply, load_image};
use sparse_splat::metrics::{psnr, ssim};
use sparse_splat::raster::{render_forward, RenderOptions};

use crate::dataset;

#[derive(Args)]
pub struct EvalArgs {
    /// COLMAP model directory.
    #[arg(long)]
    colmap: PathBuf,
    /// Directory of ground-truth images.
    #[arg(long)]
    images: PathBuf,
    /// Checkpoint to render the test views from.
    #[arg(long, required_unless_present = "renders")]
    ply: Option<PathBuf>,
    /// Score existing renders (same file names as the images) instead of
    /// rendering a checkpoint.
    #[arg(long, conflicts_with = "ply")]
    renders: Option<PathBuf>,
    /// Integer image downsampling factor.
    #[arg(long, default_value_t = 1)]
    downsample: u32,
    /// Per-view CSV output; standard output if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the mean row here as CSV as well as printing it.
    #[arg(long)]
    summary: Option<PathBuf>,
    /// Composite renders over white instead of black.
    #[arg(long)]
    white_background: bool,
}

struct Row {
    index: usize,
    name: String,
    psnr: f64,
    ssim: f64,
    render_ms: Option<f64>,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |v| v.to_string())
}

pub fn run(args: EvalArgs) -> Result<()> {
    let model = dataset::load_model(&args.colmap)?;
    let posed = dataset::posed_images(&model, args.downsample)?;
    let set = args.ply.as_deref().map(import_ply).transpose()?;
    let mut rows = Vec::new();
    for i in dataset::test_indices(posed.len()) {
        let view = &posed[i];
        let gt = dataset::load_view_image(&args.images, view, args.downsample)?;
        let (pred, render_ms) = match (&set, &args.renders) {
            (Some(set), _) => {
                let mut options = RenderOptions::new(set.sh_degree());
                if args.white_background {
                    options = options.white_background();
                }
                let start = Instant::now();
                let out = render_forward(set, &view.camera, &options);
                (out.color, Some(start.elapsed().as_secs_f64() * 1e3))
            }
            (None, Some(dir)) => {
                let path = dir.join(&view.name);
                let img = load_image(&path)?;
                if img.width != gt.width || img.height != gt.height {
                    bail!("{}: render is {}x{}, expected {}x{}", path.display(), img.width, img.height, gt.width, gt.height);
                }
                (img, None)
            }
            (None, None) => bail!("either --ply or --renders is required"),
        };
        rows.push(Row {
            index: i,
            name: view.name.clone(),
            psnr: psnr(&pred, &gt)?,
            ssim: ssim(&pred, &gt)?,
            render_ms,
        });
    }

    let header = ["view", "name", "psnr", "ssim", "lpips", "render_ms"];
    let sink: Box<dyn Write> = match &args.out {
        Some(p) => Box::new(std::fs::File::create(p).with_context(|| p.display().to_string())?),
        None => Box::new(std::io::stdout()),
    };
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(header)?;
    for r in &rows {
        w.write_record([
            r.index.to_string(),
            r.name.clone(),
            r.psnr.to_string(),
            r.ssim.to_string(),
            "n/a".into(),
            fmt_opt(r.render_ms),
        ])?;
    }
    w.flush()?;
    drop(w);

    let n = rows.len() as f64;
    let mean = |f: &dyn Fn(&Row) -> f64| if rows.is_empty() { f64::NAN } else { rows.iter().map(f).sum::<f64>() / n };
    let ms: Vec<f64> = rows.iter().filter_map(|r| r.render_ms).collect();
    let mean_ms = (!ms.is_empty()).then(|| ms.iter().sum::<f64>() / ms.len() as f64);
    let summary = [
        "mean".to_string(),
        rows.len().to_string(),
        mean(&|r| r.psnr).to_string(),
        mean(&|r| r.ssim).to_string(),
        "n/a".into(),
        fmt_opt(mean_ms),
    ];
    let summary_header = ["view", "count", "psnr", "ssim", "lpips", "render_ms"];
    if let Some(p) = &args.summary {
        let mut s = csv::Writer::from_path(p).with_context(|| p.display().to_string())?;
        s.write_record(summary_header)?;
        s.write_record(&summary)?;
        s.flush()?;
    }
    if args.out.is_some() {
        let mut s = csv::Writer::from_writer(std::io::stdout());
        s.write_record(summary_header)?;
        s.write_record(&summary)?;
        s.flush()?;
    }
    Ok(())
}
