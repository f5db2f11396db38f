use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use sparse_splat::ingest::{import_ply, save_pfm, save_png};
use sparse_splat::raster::{render_forward, RenderOptions};

use crate::pose;

#[derive(Args)]
pub struct RenderArgs {
    /// Gaussian checkpoint to render.
    #[arg(long)]
    ply: PathBuf,
    /// `<colmap dir>:<image id>`, or a pose file with width, height, fx, fy,
    /// cx, cy, qvec and tvec lines.
    #[arg(long)]
    camera: String,
    /// Output PNG (8-bit RGB).
    #[arg(long)]
    out: PathBuf,
    /// Also write the alpha-blended depth as a PFM.
    #[arg(long)]
    depth: Option<PathBuf>,
    /// Integer downsampling factor applied to the camera.
    #[arg(long, default_value_t = 1)]
    downsample: u32,
    /// SH degree to evaluate; defaults to the checkpoint's degree.
    #[arg(long)]
    sh_degree: Option<usize>,
    /// Composite over white instead of black.
    #[arg(long)]
    white_background: bool,
}

pub fn run(args: RenderArgs) -> Result<()> {
    let set = import_ply(&args.ply)?;
    let camera = pose::resolve_camera(&args.camera, args.downsample)?;
    let degree = args.sh_degree.unwrap_or(set.sh_degree()).min(set.sh_degree());
    let mut options = RenderOptions::new(degree);
    if args.white_background {
        options = options.white_background();
    }
    let out = render_forward(&set, &camera, &options);
    save_png(&out.color, &args.out).with_context(|| args.out.display().to_string())?;
    if let Some(path) = &args.depth {
        save_pfm(&out.depth, path)?;
    }
    Ok(())
}
