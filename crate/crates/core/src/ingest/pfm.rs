//! Grayscale portable float maps holding depth priors.

use std::fs;
use std::path::Path;

use crate::buffer::Grid;
use crate::{Error, Result};

/// A monocular depth prior: disparity up to an unknown affine map, stored
/// top-down row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct DepthPrior {
    pub values: Grid<f32>,
    /// Pixels whose value is finite and positive.
    pub mask: Vec<bool>,
}

impl DepthPrior {
    pub fn new(values: Grid<f32>) -> Self {
        let mask = values.data.iter().map(|v| v.is_finite() && *v > 0.0).collect();
        Self { values, mask }
    }

    pub fn width(&self) -> usize {
        self.values.width
    }

    pub fn height(&self) -> usize {
        self.values.height
    }

    /// Error unless the prior is `width × height`.
    pub fn check_size(&self, width: usize, height: usize) -> Result<()> {
        if self.width() != width || self.height() != height {
            return Err(Error::InvalidInput(format!(
                "depth prior is {}x{}, paired image is {width}x{height}",
                self.width(),
                self.height()
            )));
        }
        Ok(())
    }
}

/// Read a `Pf` file. A negative scale marks little-endian data; rows are
/// stored bottom-up and returned top-down.
pub fn load_depth_prior(path: &Path) -> Result<DepthPrior> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_pfm(&bytes).map_err(|(at, msg)| Error::parse(path, format!("byte {at}"), msg))
}

/// [`load_depth_prior`] plus a size check against the paired image.
pub fn load_depth_prior_for(path: &Path, width: usize, height: usize) -> Result<DepthPrior> {
    let prior = load_depth_prior(path)?;
    prior.check_size(width, height).map_err(|e| Error::Image {
        path: path.to_owned(),
        message: e.to_string(),
    })?;
    Ok(prior)
}

fn parse_pfm(bytes: &[u8]) -> std::result::Result<DepthPrior, (usize, String)> {
    let mut pos = 0;
    let mut token = |what: &str| -> std::result::Result<(usize, String), (usize, String)> {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err((start, format!("missing {what}")));
        }
        let s = String::from_utf8_lossy(&bytes[start..pos]).into_owned();
        Ok((start, s))
    };
    let (at, magic) = token("magic")?;
    match magic.as_str() {
        "Pf" => {}
        "PF" => return Err((at, "color PFM (PF) given, expected grayscale Pf".into())),
        m => return Err((at, format!("bad magic '{m}', expected Pf"))),
    }
    let (at, w) = token("width")?;
    let width: usize = w.parse().ok().filter(|&v| v > 0).ok_or((at, format!("bad width '{w}'")))?;
    let (at, h) = token("height")?;
    let height: usize = h.parse().ok().filter(|&v| v > 0).ok_or((at, format!("bad height '{h}'")))?;
    let (at, s) = token("scale")?;
    let scale: f64 = s.parse().ok().filter(|v: &f64| *v != 0.0 && v.is_finite()).ok_or((at, format!("bad scale '{s}'")))?;
    // exactly one whitespace byte ends the header
    let data_start = pos + 1;
    let n = width * height;
    let end = data_start + 4 * n;
    if bytes.len() < end {
        return Err((bytes.len(), format!("expected {n} floats after header")));
    }
    let little = scale < 0.0;
    let mut data = vec![0.0f32; n];
    for (k, chunk) in bytes[data_start..end].chunks_exact(4).enumerate() {
        let raw: [u8; 4] = chunk.try_into().expect("4 bytes");
        let v = if little { f32::from_le_bytes(raw) } else { f32::from_be_bytes(raw) };
        let (row, col) = (k / width, k % width);
        data[(height - 1 - row) * width + col] = v;
    }
    let values = Grid { width, height, data };
    Ok(DepthPrior::new(values))
}

/// Encode a grid as `Pf` in either byte order.
pub fn encode_pfm(grid: &Grid<f32>, little_endian: bool) -> Vec<u8> {
    let scale = if little_endian { "-1.0" } else { "1.0" };
    let mut out = format!("Pf\n{} {}\n{scale}\n", grid.width, grid.height).into_bytes();
    for row in (0..grid.height).rev() {
        for &v in &grid.data[row * grid.width..(row + 1) * grid.width] {
            out.extend_from_slice(&if little_endian { v.to_le_bytes() } else { v.to_be_bytes() });
        }
    }
    out
}

pub fn save_pfm(grid: &Grid<f32>, path: &Path) -> Result<()> {
    fs::write(path, encode_pfm(grid, true)).map_err(|e| Error::io(path, e))
}
