//! Photometric losses: L1 and structural dissimilarity.

use crate::buffer::Image;
use crate::{Error, Real, Result};

const WINDOW: usize = 11;
const SIGMA: f64 = 1.5;
const C1: f64 = 0.01 * 0.01;
const C2: f64 = 0.03 * 0.03;

fn check_shapes<T: Real>(pred: &Image<T>, gt: &Image<T>) -> Result<()> {
    if !pred.same_shape(gt) {
        return Err(Error::InvalidInput(format!(
            "image shapes differ: {}x{} vs {}x{}",
            pred.width, pred.height, gt.width, gt.height
        )));
    }
    Ok(())
}

/// Mean absolute difference over all pixels and channels.
pub fn l1_loss<T: Real>(pred: &Image<T>, gt: &Image<T>) -> Result<T> {
    check_shapes(pred, gt)?;
    let n = pred.data.len().max(1);
    let sum: f64 = pred
        .data
        .iter()
        .zip(&gt.data)
        .map(|(p, g)| (*p - *g).abs().as_f64())
        .sum();
    Ok(T::lit(sum / n as f64))
}

/// [`l1_loss`] and its gradient with respect to `pred` (zero where the
/// images agree).
pub fn l1_loss_grad<T: Real>(pred: &Image<T>, gt: &Image<T>) -> Result<(T, Image<T>)> {
    let loss = l1_loss(pred, gt)?;
    let inv = T::one() / T::from_usize(pred.data.len().max(1));
    let data = pred
        .data
        .iter()
        .zip(&gt.data)
        .map(|(p, g)| {
            let d = *p - *g;
            if d > T::zero() {
                inv
            } else if d < T::zero() {
                -inv
            } else {
                T::zero()
            }
        })
        .collect();
    Ok((loss, Image { width: pred.width, height: pred.height, data }))
}

/// Normalised 1D Gaussian taps of the SSIM window.
fn taps<T: Real>() -> [T; WINDOW] {
    let half = (WINDOW / 2) as f64;
    let raw: [f64; WINDOW] = std::array::from_fn(|k| {
        let x = k as f64 - half;
        (-x * x / (2.0 * SIGMA * SIGMA)).exp()
    });
    let sum: f64 = raw.iter().sum();
    raw.map(|v| T::lit(v / sum))
}

/// Separable Gaussian blur of one plane. Near the border the window is
/// truncated to the image and renormalised, so blurring a constant returns
/// it unchanged.
struct Blur<T> {
    w: usize,
    h: usize,
    taps: [T; WINDOW],
    /// Sum of the in-bounds taps per column and per row.
    col_norm: Vec<T>,
    row_norm: Vec<T>,
}

impl<T: Real> Blur<T> {
    fn new(w: usize, h: usize) -> Self {
        let taps = taps::<T>();
        let norm = |n: usize| -> Vec<T> {
            (0..n)
                .map(|i| {
                    let mut s = T::zero();
                    for (k, &t) in taps.iter().enumerate() {
                        let j = i as isize + k as isize - (WINDOW / 2) as isize;
                        if j >= 0 && (j as usize) < n {
                            s += t;
                        }
                    }
                    s
                })
                .collect()
        };
        Self {
            w,
            h,
            taps,
            col_norm: norm(w),
            row_norm: norm(h),
        }
    }

    fn pass(&self, src: &[T], horizontal: bool, normalise: bool) -> Vec<T> {
        let (w, h) = (self.w, self.h);
        let r = (WINDOW / 2) as isize;
        let mut out = vec![T::zero(); w * h];
        for y in 0..h {
            for x in 0..w {
                let (i, n) = if horizontal { (x, w) } else { (y, h) };
                let mut acc = T::zero();
                for (k, &t) in self.taps.iter().enumerate() {
                    let j = i as isize + k as isize - r;
                    if j < 0 || j as usize >= n {
                        continue;
                    }
                    let j = j as usize;
                    let v = if horizontal { src[y * w + j] } else { src[j * w + x] };
                    acc += t * v;
                }
                if normalise {
                    acc /= if horizontal { self.col_norm[x] } else { self.row_norm[y] };
                }
                out[y * w + x] = acc;
            }
        }
        out
    }

    fn apply(&self, src: &[T]) -> Vec<T> {
        self.pass(&self.pass(src, true, true), false, true)
    }

    /// Transpose of [`Blur::apply`]: divide by the normaliser, then convolve
    /// (the taps are symmetric).
    fn adjoint(&self, g: &[T]) -> Vec<T> {
        let w = self.w;
        let scaled: Vec<T> = g
            .iter()
            .enumerate()
            .map(|(p, &v)| v / self.row_norm[p / w])
            .collect();
        let v = self.pass(&scaled, false, false);
        let scaled: Vec<T> = v
            .iter()
            .enumerate()
            .map(|(p, &v)| v / self.col_norm[p % w])
            .collect();
        self.pass(&scaled, true, false)
    }
}

struct SsimParts<T> {
    mu_x: Vec<T>,
    mu_y: Vec<T>,
    num: Vec<T>,
    den: Vec<T>,
    a1: Vec<T>,
    a2: Vec<T>,
    b1: Vec<T>,
    b2: Vec<T>,
}

fn ssim_plane<T: Real>(blur: &Blur<T>, x: &[T], y: &[T]) -> SsimParts<T> {
    let mu_x = blur.apply(x);
    let mu_y = blur.apply(y);
    let xx: Vec<T> = x.iter().map(|&v| v * v).collect();
    let yy: Vec<T> = y.iter().map(|&v| v * v).collect();
    let xy: Vec<T> = x.iter().zip(y).map(|(&a, &b)| a * b).collect();
    let bxx = blur.apply(&xx);
    let byy = blur.apply(&yy);
    let bxy = blur.apply(&xy);
    let (c1, c2, two) = (T::lit(C1), T::lit(C2), T::lit(2.0));
    let n = x.len();
    let mut parts = SsimParts {
        mu_x,
        mu_y,
        num: Vec::with_capacity(n),
        den: Vec::with_capacity(n),
        a1: Vec::with_capacity(n),
        a2: Vec::with_capacity(n),
        b1: Vec::with_capacity(n),
        b2: Vec::with_capacity(n),
    };
    for p in 0..n {
        let (mx, my) = (parts.mu_x[p], parts.mu_y[p]);
        let a1 = two * mx * my + c1;
        let a2 = two * (bxy[p] - mx * my) + c2;
        let b1 = mx * mx + my * my + c1;
        let b2 = (bxx[p] - mx * mx) + (byy[p] - my * my) + c2;
        parts.a1.push(a1);
        parts.a2.push(a2);
        parts.b1.push(b1);
        parts.b2.push(b2);
        parts.num.push(a1 * a2);
        parts.den.push(b1 * b2);
    }
    parts
}

/// Mean SSIM over pixels and channels with an 11×11 Gaussian window
/// (σ = 1.5) and the usual constants for a `[0, 1]` range.
pub fn ssim<T: Real>(a: &Image<T>, b: &Image<T>) -> Result<T> {
    check_shapes(a, b)?;
    let blur = Blur::new(a.width, a.height);
    let mut total = 0.0f64;
    for ch in 0..3 {
        let parts = ssim_plane(&blur, &a.channel(ch).data, &b.channel(ch).data);
        total += parts
            .num
            .iter()
            .zip(&parts.den)
            .map(|(&n, &d)| (n / d).as_f64())
            .sum::<f64>();
    }
    Ok(T::lit(total / (3 * a.width * a.height).max(1) as f64))
}

/// `1 − SSIM(pred, gt)`.
pub fn dssim_loss<T: Real>(pred: &Image<T>, gt: &Image<T>) -> Result<T> {
    Ok(T::one() - ssim(pred, gt)?)
}

/// [`dssim_loss`] and its gradient with respect to `pred`.
pub fn dssim_loss_grad<T: Real>(pred: &Image<T>, gt: &Image<T>) -> Result<(T, Image<T>)> {
    check_shapes(pred, gt)?;
    let (w, h) = (pred.width, pred.height);
    let blur = Blur::new(w, h);
    let n = w * h;
    let scale = -T::one() / T::from_usize((3 * n).max(1));
    let two = T::lit(2.0);
    let mut total = 0.0f64;
    let mut grad = Image::zeros(w, h);
    for ch in 0..3 {
        let x = pred.channel(ch).data;
        let y = gt.channel(ch).data;
        let p = ssim_plane(&blur, &x, &y);
        let mut g_mu = vec![T::zero(); n];
        let mut g_xx = vec![T::zero(); n];
        let mut g_xy = vec![T::zero(); n];
        for i in 0..n {
            let s = p.num[i] / p.den[i];
            total += s.as_f64();
            let (mx, my) = (p.mu_x[i], p.mu_y[i]);
            let d_num_mu = two * my * p.a2[i] - two * my * p.a1[i];
            let d_den_mu = two * mx * p.b2[i] - two * mx * p.b1[i];
            g_mu[i] = scale * (d_num_mu - s * d_den_mu) / p.den[i];
            g_xx[i] = scale * (-s * p.b1[i]) / p.den[i];
            g_xy[i] = scale * (two * p.a1[i]) / p.den[i];
        }
        let t_mu = blur.adjoint(&g_mu);
        let t_xx = blur.adjoint(&g_xx);
        let t_xy = blur.adjoint(&g_xy);
        for i in 0..n {
            grad.data[3 * i + ch] = t_mu[i] + two * x[i] * t_xx[i] + y[i] * t_xy[i];
        }
    }
    let loss = T::lit(1.0 - total / (3 * n).max(1) as f64);
    Ok((loss, grad))
}
