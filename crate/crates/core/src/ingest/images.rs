//! PNG loading, saving and integer box-filter downsampling.

use std::path::Path;

use image::{DynamicImage, ImageReader};

use crate::buffer::Image;
use crate::{Error, Result};

/// Load an 8- or 16-bit PNG as RGB in `[0, 1]`. Grayscale is replicated to
/// all three channels and alpha is dropped.
pub fn load_image(path: &Path) -> Result<Image<f32>> {
    let err = |message: String| Error::Image {
        path: path.to_owned(),
        message,
    };
    let reader = ImageReader::open(path).map_err(|e| Error::io(path, e))?;
    let reader = reader.with_guessed_format().map_err(|e| Error::io(path, e))?;
    let img = reader.decode().map_err(|e| err(e.to_string()))?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data: Vec<f32> = match img {
        DynamicImage::ImageLuma8(_) | DynamicImage::ImageLumaA8(_) => {
            let g = img.to_luma8();
            g.as_raw().iter().flat_map(|&v| [f32::from(v) / 255.0; 3]).collect()
        }
        DynamicImage::ImageRgb8(_) | DynamicImage::ImageRgba8(_) => {
            img.to_rgb8().as_raw().iter().map(|&v| f32::from(v) / 255.0).collect()
        }
        DynamicImage::ImageLuma16(_) | DynamicImage::ImageLumaA16(_) => {
            let g = img.to_luma16();
            g.as_raw().iter().flat_map(|&v| [f32::from(v) / 65535.0; 3]).collect()
        }
        DynamicImage::ImageRgb16(_) | DynamicImage::ImageRgba16(_) => {
            img.to_rgb16().as_raw().iter().map(|&v| f32::from(v) / 65535.0).collect()
        }
        other => return Err(err(format!("unsupported pixel format {:?}", other.color()))),
    };
    Image::from_data(w, h, data)
}

/// Average non-overlapping `factor × factor` blocks. Trailing rows and
/// columns that do not fill a block are dropped.
pub fn downsample(img: &Image<f32>, factor: u32) -> Result<Image<f32>> {
    if factor == 0 {
        return Err(Error::InvalidParameter("downsample factor must be positive".into()));
    }
    if factor == 1 {
        return Ok(img.clone());
    }
    let f = factor as usize;
    let (w, h) = (img.width / f, img.height / f);
    if w == 0 || h == 0 {
        return Err(Error::InvalidParameter(format!(
            "{}x{} image is smaller than downsample factor {factor}",
            img.width, img.height
        )));
    }
    let norm = 1.0 / (f * f) as f32;
    let mut out = Image::zeros(w, h);
    for y in 0..h {
        for x in 0..w {
            let mut acc = [0.0f32; 3];
            for dy in 0..f {
                for dx in 0..f {
                    let p = img.pixel(x * f + dx, y * f + dy);
                    for c in 0..3 {
                        acc[c] += p[c];
                    }
                }
            }
            out.set_pixel(x, y, acc.map(|v| v * norm));
        }
    }
    Ok(out)
}

/// Write an 8-bit RGB PNG, clamping to `[0, 1]`.
pub fn save_png(img: &Image<f32>, path: &Path) -> Result<()> {
    let bytes: Vec<u8> = img
        .data
        .iter()
        .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    let buf = image::RgbImage::from_raw(img.width as u32, img.height as u32, bytes)
        .ok_or_else(|| Error::InvalidInput("image buffer size mismatch".into()))?;
    buf.save(path).map_err(|e| Error::Image {
        path: path.to_owned(),
        message: e.to_string(),
    })
}
