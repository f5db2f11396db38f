//! Loading posed images from a COLMAP model and the evaluation split.

use std::path::Path;

use anyhow::{bail, Context, Result};
use sparse_splat::buffer::Image;
use sparse_splat::ingest::{detect_format, downsample, load_image, parse_colmap_model, SfmModel};
use sparse_splat::scene::Camera;

/// Every `TEST_STRIDE`-th image (by name order) is held out.
pub const TEST_STRIDE: usize = 8;

pub struct PosedImage {
    pub image_id: u32,
    pub name: String,
    pub camera: Camera<f32>,
}

pub fn load_model(dir: &Path) -> Result<SfmModel> {
    let format = detect_format(dir).with_context(|| format!("{}: no COLMAP model found", dir.display()))?;
    Ok(parse_colmap_model(dir, format)?)
}

/// Images of `model` sorted by name, with cameras scaled by `factor`.
pub fn posed_images(model: &SfmModel, factor: u32) -> Result<Vec<PosedImage>> {
    if factor == 0 {
        bail!("--downsample must be positive");
    }
    let mut out = Vec::with_capacity(model.images.len());
    for (&id, img) in &model.images {
        let camera = model.camera(id)?;
        let camera = if factor > 1 { camera.downsampled(factor) } else { camera };
        out.push(PosedImage {
            image_id: id,
            name: img.name.clone(),
            camera,
        });
    }
    out.sort_by(|a, b| a.name.cmp(&b.name));
    Ok(out)
}

/// Positions (in name order) of the test images.
pub fn test_indices(count: usize) -> Vec<usize> {
    (0..count).step_by(TEST_STRIDE).collect()
}

/// `k` positions evenly spread over the non-test images, or all of them.
pub fn train_indices(count: usize, k: Option<usize>) -> Result<Vec<usize>> {
    let pool: Vec<usize> = (0..count).filter(|i| i % TEST_STRIDE != 0).collect();
    let Some(k) = k else { return Ok(pool) };
    if k == 0 || k > pool.len() {
        bail!("--views {k} but {} non-test images are available", pool.len());
    }
    if k == 1 {
        return Ok(vec![pool[0]]);
    }
    let last = (pool.len() - 1) as f64;
    Ok((0..k)
        .map(|i| pool[(i as f64 * last / (k - 1) as f64).round() as usize])
        .collect())
}

/// Load an image and bring it to the camera's size.
pub fn load_view_image(dir: &Path, view: &PosedImage, factor: u32) -> Result<Image<f32>> {
    let path = dir.join(&view.name);
    let img = load_image(&path)?;
    let img = if factor > 1 {
        downsample(&img, factor).with_context(|| path.display().to_string())?
    } else {
        img
    };
    let (w, h) = (view.camera.width as usize, view.camera.height as usize);
    if img.width != w || img.height != h {
        bail!(
            "{}: image is {}x{} but its camera expects {w}x{h}",
            path.display(),
            img.width,
            img.height
        );
    }
    Ok(img)
}
