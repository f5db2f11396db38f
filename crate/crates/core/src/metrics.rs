//! Image quality metrics for evaluation.

use crate::buffer::Image;
use crate::regularize::dssim_loss;
use crate::{Real, Result};

/// Mean SSIM (11×11 Gaussian window, σ = 1.5), computed as one minus the
/// training D-SSIM loss so both always agree.
pub fn ssim<T: Real>(pred: &Image<T>, gt: &Image<T>) -> Result<f64> {
    Ok(1.0 - dssim_loss(pred, gt)?.as_f64())
}

/// Peak signal-to-noise ratio in dB for images in `[0, 1]`. Identical
/// images give `f64::INFINITY`.
pub fn psnr<T: Real>(pred: &Image<T>, gt: &Image<T>) -> Result<f64> {
    let mse = mse(pred, gt)?;
    Ok(if mse == 0.0 { f64::INFINITY } else { -10.0 * mse.log10() })
}

/// Mean squared error over all pixels and channels, accumulated in `f64`.
pub fn mse<T: Real>(pred: &Image<T>, gt: &Image<T>) -> Result<f64> {
    if !pred.same_shape(gt) {
        return Err(crate::Error::InvalidInput(format!(
            "image shapes differ: {}x{} vs {}x{}",
            pred.width, pred.height, gt.width, gt.height
        )));
    }
    let sum: f64 = pred
        .data
        .iter()
        .zip(&gt.data)
        .map(|(p, g)| {
            let d = p.as_f64() - g.as_f64();
            d * d
        })
        .sum();
    Ok(sum / pred.data.len().max(1) as f64)
}
