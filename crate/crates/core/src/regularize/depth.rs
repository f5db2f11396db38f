//! Pearson correlation between rendered and prior depth.

use crate::buffer::Grid;
use crate::ingest::DepthPrior;
use crate::scene::config::DepthMode;
use crate::{Error, Real, Result};

/// Offset added to rendered depth before inverting it to disparity.
pub const DISPARITY_EPS: f64 = 1e-6;

/// Centered sums over the jointly valid pixels.
struct Moments {
    n: usize,
    mean_a: f64,
    mean_b: f64,
    saa: f64,
    sbb: f64,
    sab: f64,
}

fn moments<T: Real>(a: &[T], b: &[T], mask: &[bool]) -> Moments {
    let mut n = 0usize;
    let (mut sa, mut sb) = (0.0f64, 0.0f64);
    for i in 0..a.len() {
        if mask[i] {
            n += 1;
            sa += a[i].as_f64();
            sb += b[i].as_f64();
        }
    }
    let nf = n.max(1) as f64;
    let (mean_a, mean_b) = (sa / nf, sb / nf);
    let (mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0);
    for i in 0..a.len() {
        if mask[i] {
            let da = a[i].as_f64() - mean_a;
            let db = b[i].as_f64() - mean_b;
            saa += da * da;
            sbb += db * db;
            sab += da * db;
        }
    }
    Moments {
        n,
        mean_a,
        mean_b,
        saa,
        sbb,
        sab,
    }
}

impl Moments {
    fn degenerate(&self) -> bool {
        self.n < 2 || !(self.saa > 0.0) || !(self.sbb > 0.0) || !self.saa.is_finite() || !self.sbb.is_finite()
    }

    fn corr(&self) -> f64 {
        (self.sab / (self.saa * self.sbb).sqrt()).clamp(-1.0, 1.0)
    }
}

/// Pearson correlation of `a` and `b` over pixels where `mask` is set,
/// using population statistics accumulated in `f64`.
///
/// `None` flags a degenerate input: fewer than two pixels, or no variance in
/// either grid.
pub fn pearson_correlation<T: Real>(a: &Grid<T>, b: &Grid<T>, mask: &[bool]) -> Result<Option<T>> {
    if !a.same_shape(b) || mask.len() != a.data.len() {
        return Err(Error::InvalidInput("pearson inputs differ in shape".into()));
    }
    let m = moments(&a.data, &b.data, mask);
    Ok((!m.degenerate()).then(|| T::lit(m.corr())))
}

/// Options for [`depth_regularization_loss`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DepthLossOptions {
    /// Pixels with rendered coverage below this are ignored.
    pub alpha_gate: f64,
    pub mode: DepthMode,
}

impl Default for DepthLossOptions {
    fn default() -> Self {
        Self {
            alpha_gate: 0.5,
            mode: DepthMode::Disparity,
        }
    }
}

/// Value and gradient of the depth regularizer.
#[derive(Clone, Debug, PartialEq)]
pub struct DepthLoss<T = f32> {
    pub loss: T,
    /// With respect to the rendered depth; zero off the mask.
    pub grad: Grid<T>,
    /// Pixels that entered the correlation.
    pub valid: usize,
    /// The correlation was undefined and the loss set to zero.
    pub degenerate: bool,
}

/// `1 − corr(rendered, prior)` over covered pixels with a valid prior.
///
/// In disparity mode the rendered depth is inverted as `1/(d + 1e-6)`
/// first. The loss is invariant to positive affine changes of the prior.
pub fn depth_regularization_loss<T: Real>(
    rendered_depth: &Grid<T>,
    alpha: &Grid<T>,
    prior: &DepthPrior,
    options: &DepthLossOptions,
) -> Result<DepthLoss<T>> {
    let (w, h) = (rendered_depth.width, rendered_depth.height);
    if !rendered_depth.same_shape(alpha) || prior.width() != w || prior.height() != h {
        return Err(Error::InvalidInput(format!(
            "depth {w}x{h}, alpha {}x{}, prior {}x{}",
            alpha.width,
            alpha.height,
            prior.width(),
            prior.height()
        )));
    }
    let gate = T::lit(options.alpha_gate);
    let eps = T::lit(DISPARITY_EPS);
    let n = w * h;
    let mut mask = vec![false; n];
    let mut rendered = vec![T::zero(); n];
    for i in 0..n {
        let d = rendered_depth.data[i];
        mask[i] = prior.mask[i] && alpha.data[i] >= gate && d.is_finite();
        rendered[i] = match options.mode {
            DepthMode::Disparity => T::one() / (d + eps),
            DepthMode::Metric => d,
        };
    }
    let prior_t: Vec<T> = prior.values.data.iter().map(|&v| T::lit(f64::from(v))).collect();
    let m = moments(&rendered, &prior_t, &mask);
    let valid = m.n;
    let mut grad = Grid::zeros(w, h);
    if m.degenerate() {
        return Ok(DepthLoss {
            loss: T::zero(),
            grad,
            valid,
            degenerate: true,
        });
    }
    let r = m.corr();
    let inv_norm = 1.0 / (m.saa * m.sbb).sqrt();
    for i in 0..n {
        if !mask[i] {
            continue;
        }
        let da = rendered[i].as_f64() - m.mean_a;
        let db = prior_t[i].as_f64() - m.mean_b;
        // d corr / d a_i; the mean terms cancel because centered sums vanish
        let dcorr = db * inv_norm - r * da / m.saa;
        let chain = match options.mode {
            DepthMode::Disparity => {
                let v = rendered[i].as_f64();
                -v * v
            }
            DepthMode::Metric => 1.0,
        };
        grad.data[i] = T::lit(-dcorr * chain);
    }
    Ok(DepthLoss {
        loss: T::lit(1.0 - r),
        grad,
        valid,
        degenerate: false,
    })
}
