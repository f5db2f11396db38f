//! Cameras given on the command line: a COLMAP image or a pose file.

use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use sparse_splat::scene::Camera;

use crate::dataset;

/// Parse `--camera`: `<colmap dir>:<image id>` or a pose file.
pub fn resolve_camera(spec: &str, factor: u32) -> Result<Camera<f32>> {
    if factor == 0 {
        bail!("--downsample must be positive");
    }
    let camera = match spec.rsplit_once(':') {
        Some((dir, id)) if Path::new(dir).is_dir() => {
            let id: u32 = id.parse().with_context(|| format!("bad image id {id:?}"))?;
            let model = dataset::load_model(Path::new(dir))?;
            model.camera(id)?
        }
        _ => read_pose_file(Path::new(spec))?,
    };
    Ok(if factor > 1 { camera.downsampled(factor) } else { camera })
}

/// `key = value` lines: `width`, `height`, `fx`, `fy`, `cx`, `cy`,
/// `qvec` (w x y z, world to camera) and `tvec` (x y z).
pub fn read_pose_file(path: &Path) -> Result<Camera<f32>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("{}: cannot read pose file", path.display()))?;
    parse_pose(&text).with_context(|| format!("{}: invalid pose file", path.display()))
}

fn parse_pose(text: &str) -> Result<Camera<f32>> {
    let mut fields: std::collections::BTreeMap<&str, Vec<f64>> = Default::default();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| anyhow!("line {}: expected `key = value`", n + 1))?;
        let values = v
            .split_whitespace()
            .map(str::parse)
            .collect::<Result<Vec<f64>, _>>()
            .map_err(|e| anyhow!("line {}: {e}", n + 1))?;
        fields.insert(k.trim(), values);
    }
    let get = |k: &str, n: usize| -> Result<Vec<f64>> {
        let v = fields.get(k).ok_or_else(|| anyhow!("missing `{k}`"))?;
        if v.len() != n {
            bail!("`{k}` needs {n} values, got {}", v.len());
        }
        Ok(v.clone())
    };
    for k in fields.keys() {
        if !["width", "height", "fx", "fy", "cx", "cy", "qvec", "tvec"].contains(k) {
            bail!("unknown key `{k}`");
        }
    }
    let dim = |k: &str| -> Result<u32> {
        let v = get(k, 1)?[0];
        if v.fract() != 0.0 || !(1.0..=65535.0).contains(&v) {
            bail!("`{k}` must be a positive integer");
        }
        Ok(v as u32)
    };
    let q = get("qvec", 4)?;
    let t = get("tvec", 3)?;
    let f = |k: &str| -> Result<f32> { Ok(get(k, 1)?[0] as f32) };
    Ok(Camera::from_quaternion(
        0,
        [f("fx")?, f("fy")?],
        [f("cx")?, f("cy")?],
        dim("width")?,
        dim("height")?,
        [q[0] as f32, q[1] as f32, q[2] as f32, q[3] as f32],
        [t[0] as f32, t[1] as f32, t[2] as f32],
    )?)
}
