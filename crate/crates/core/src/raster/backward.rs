use rayon::prelude::*;

use crate::buffer::{Grid, Image};
use crate::real::sigmoid;
use crate::scene::linalg::{mul3t_vec, Vec3};
use crate::scene::sh::{num_coeffs, sh_basis, sh_basis_grad};
use crate::scene::{Camera, GaussianSet};
use crate::{Error, Real, Result};

use super::forward::{pixel_alpha, tile_geometry, PixelAlpha, RenderOutput};
use super::project::{project_geometry, view_dir};
use super::{MIN_ALPHA, MIN_TRANSMITTANCE};

/// Gradients of a scalar loss with respect to every stored parameter, plus
/// the screen-space statistics densification consumes.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientBuffer<T = f32> {
    pub means: Vec<Vec3<T>>,
    pub log_scales: Vec<Vec3<T>>,
    pub rotations: Vec<[T; 4]>,
    pub opacity_logits: Vec<T>,
    pub sh: Vec<[T; 3]>,
    /// `‖∂L/∂mean2d‖` in normalised device coordinates, summed over the
    /// views accumulated into this buffer.
    pub mean2d_norm: Vec<T>,
    /// Number of views in which each Gaussian was visible.
    pub hits: Vec<u32>,
}

impl<T: Real> GradientBuffer<T> {
    pub fn zeros(n: usize, sh_coeffs: usize) -> Self {
        let z3 = [T::zero(); 3];
        Self {
            means: vec![z3; n],
            log_scales: vec![z3; n],
            rotations: vec![[T::zero(); 4]; n],
            opacity_logits: vec![T::zero(); n],
            sh: vec![z3; n * sh_coeffs],
            mean2d_norm: vec![T::zero(); n],
            hits: vec![0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.means.len()
    }

    pub fn is_empty(&self) -> bool {
        self.means.is_empty()
    }

    /// Sum another buffer of the same shape into this one.
    pub fn accumulate(&mut self, other: &Self) {
        assert_eq!(self.len(), other.len(), "gradient buffers differ in length");
        fn add3<T: Real>(a: &mut [Vec3<T>], b: &[Vec3<T>]) {
            for (x, y) in a.iter_mut().zip(b) {
                for k in 0..3 {
                    x[k] += y[k];
                }
            }
        }
        add3(&mut self.means, &other.means);
        add3(&mut self.log_scales, &other.log_scales);
        add3(&mut self.sh, &other.sh);
        for (x, y) in self.rotations.iter_mut().zip(&other.rotations) {
            for k in 0..4 {
                x[k] += y[k];
            }
        }
        for (x, y) in self.opacity_logits.iter_mut().zip(&other.opacity_logits) {
            *x += *y;
        }
        for (x, y) in self.mean2d_norm.iter_mut().zip(&other.mean2d_norm) {
            *x += *y;
        }
        for (x, y) in self.hits.iter_mut().zip(&other.hits) {
            *x += *y;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.means.iter().flatten().all(|v| v.is_finite())
            && self.log_scales.iter().flatten().all(|v| v.is_finite())
            && self.rotations.iter().flatten().all(|v| v.is_finite())
            && self.opacity_logits.iter().all(|v| v.is_finite())
            && self.sh.iter().flatten().all(|v| v.is_finite())
    }
}

/// Screen-space gradient of one Gaussian, accumulated over pixels in
/// `f64` whatever the render precision.
#[derive(Clone, Copy, Debug, Default)]
struct ScreenGrad<T> {
    mean2d: [T; 2],
    /// With respect to the conic entries `(a, b, c)`; `b` counted once.
    conic: [T; 3],
    opacity: T,
    color: [T; 3],
    depth: T,
}

impl<T: Real> ScreenGrad<T> {
    fn add(&mut self, o: &Self) {
        for k in 0..2 {
            self.mean2d[k] += o.mean2d[k];
        }
        for k in 0..3 {
            self.conic[k] += o.conic[k];
            self.color[k] += o.color[k];
        }
        self.opacity += o.opacity;
        self.depth += o.depth;
    }

    fn cast<U: Real>(&self) -> ScreenGrad<U> {
        let c = |v: T| U::lit(v.as_f64());
        ScreenGrad {
            mean2d: self.mean2d.map(c),
            conic: self.conic.map(c),
            opacity: c(self.opacity),
            color: self.color.map(c),
            depth: c(self.depth),
        }
    }
}

struct Contribution<T> {
    pos: usize,
    pa: PixelAlpha<T>,
    trans: T,
}

fn backward_tile<T: Real>(
    tile: usize,
    out: &RenderOutput<T>,
    dl_dcolor: &Image<T>,
    dl_ddepth: &Grid<T>,
    dl_dalpha: Option<&Grid<T>>,
) -> Vec<ScreenGrad<f64>> {
    let range = out.tile_ranges[tile].clone();
    let list = &out.sorted[range];
    let mut local = vec![ScreenGrad::<f64>::default(); list.len()];
    if list.is_empty() {
        return local;
    }
    let width = out.width();
    let geo = tile_geometry(tile, out.tiles_x, width, out.height());
    let bg = out.options.background;
    let min_alpha = T::lit(MIN_ALPHA);
    let min_t = T::lit(MIN_TRANSMITTANCE);
    let half = T::lit(0.5);
    let one = T::one();
    let mut contribs: Vec<Contribution<T>> = Vec::with_capacity(list.len());

    for y in geo.y0..geo.y1 {
        let py = T::from_usize(y) + half;
        for x in geo.x0..geo.x1 {
            let px = T::from_usize(x) + half;
            let p = y * width + x;
            let gc = [
                dl_dcolor.data[3 * p],
                dl_dcolor.data[3 * p + 1],
                dl_dcolor.data[3 * p + 2],
            ];
            let gd = dl_ddepth.data[p];
            let ga = dl_dalpha.map_or(T::zero(), |g| g.data[p]);
            if gc.iter().all(|v| *v == T::zero()) && gd == T::zero() && ga == T::zero() {
                continue;
            }

            // replay the forward blend to recover per-contribution transmittance
            contribs.clear();
            let mut trans = one;
            let n = out.n_contrib[p] as usize;
            for (pos, &gi) in list[..n].iter().enumerate() {
                let g = out.projected[gi as usize].as_ref().expect("visible");
                let Some(pa) = pixel_alpha(g, px, py) else {
                    continue;
                };
                if pa.alpha < min_alpha {
                    continue;
                }
                let next = trans * (one - pa.alpha);
                if next < min_t {
                    break;
                }
                contribs.push(Contribution { pos, pa, trans });
                trans = next;
            }

            // the reverse sweep runs in f64: the depth and coverage terms
            // cancel closely when normalized depth is regularized
            let gc = gc.map(|v| v.as_f64());
            let (gd, ga) = (gd.as_f64(), ga.as_f64());
            let bg_dot = gc[0] * bg[0].as_f64() + gc[1] * bg[1].as_f64() + gc[2] * bg[2].as_f64();
            // blended quantities behind the current contribution, and the
            // transmittance product behind it
            let mut behind_color = [0.0f64; 3];
            let mut behind_depth = 0.0f64;
            let mut behind_alpha = 0.0f64;
            let mut behind_trans = 1.0f64;
            for c in contribs.iter().rev() {
                let g = out.projected[list[c.pos] as usize].as_ref().expect("visible");
                let alpha = c.pa.alpha.as_f64();
                let trans = c.trans.as_f64();
                let color = g.color.map(|v| v.as_f64());
                let z = g.z.as_f64();
                let w = alpha * trans;
                let acc = &mut local[c.pos];
                let mut dl_dalpha_i = 0.0;
                for ch in 0..3 {
                    acc.color[ch] += w * gc[ch];
                    dl_dalpha_i += (color[ch] - behind_color[ch]) * gc[ch];
                }
                acc.depth += w * gd;
                dl_dalpha_i += (z - behind_depth) * gd + (1.0 - behind_alpha) * ga;
                dl_dalpha_i = dl_dalpha_i * trans - trans * behind_trans * bg_dot;

                if !c.pa.capped {
                    acc.opacity += dl_dalpha_i * c.pa.falloff.as_f64();
                    let dl_dpower = dl_dalpha_i * alpha;
                    let (dx, dy) = (c.pa.dx.as_f64(), c.pa.dy.as_f64());
                    let [a, b, cc] = g.conic.map(|v| v.as_f64());
                    acc.mean2d[0] += dl_dpower * (-a * dx - b * dy);
                    acc.mean2d[1] += dl_dpower * (-b * dx - cc * dy);
                    acc.conic[0] += dl_dpower * -0.5 * dx * dx;
                    acc.conic[1] += dl_dpower * (-dx * dy);
                    acc.conic[2] += dl_dpower * -0.5 * dy * dy;
                }

                for ch in 0..3 {
                    behind_color[ch] = alpha * color[ch] + (1.0 - alpha) * behind_color[ch];
                }
                behind_depth = alpha * z + (1.0 - alpha) * behind_depth;
                behind_alpha = alpha + (1.0 - alpha) * behind_alpha;
                behind_trans *= 1.0 - alpha;
            }
        }
    }
    local
}

/// Gradients of one Gaussian's stored parameters from its screen-space
/// gradient.
struct ParamGrad<T> {
    mean: Vec3<T>,
    log_scale: Vec3<T>,
    rotation: [T; 4],
    opacity_logit: T,
    mean2d_ndc_norm: T,
}

#[allow(clippy::needless_range_loop)]
fn backward_gaussian<T: Real>(
    set: &GaussianSet<T>,
    i: usize,
    cam: &Camera<T>,
    cam_center: Vec3<T>,
    active_degree: usize,
    sg: &ScreenGrad<T>,
    clamped: [bool; 3],
    sh_grad: &mut [[T; 3]],
) -> ParamGrad<T> {
    let zero = T::zero();
    let two = T::lit(2.0);
    let mu = set.means[i];
    let p = project_geometry(mu, set.log_scales[i], set.rotations[i], cam)
        .expect("visible Gaussian projects");

    // color → SH coefficients and view direction
    let mut g_color = sg.color;
    for ch in 0..3 {
        if clamped[ch] {
            g_color[ch] = zero;
        }
    }
    let (dir, dist) = view_dir(mu, cam_center);
    let basis = sh_basis(dir, active_degree);
    let basis_grad = sh_basis_grad(dir, active_degree);
    let sh = set.sh_of(i);
    let active = num_coeffs(active_degree).min(sh.len());
    let mut g_dir = [zero; 3];
    for k in 0..active {
        for ch in 0..3 {
            sh_grad[k][ch] = g_color[ch] * basis[k];
        }
        let s = g_color[0] * sh[k][0] + g_color[1] * sh[k][1] + g_color[2] * sh[k][2];
        for a in 0..3 {
            g_dir[a] += s * basis_grad[k][a];
        }
    }
    let radial = g_dir[0] * dir[0] + g_dir[1] * dir[1] + g_dir[2] * dir[2];
    let mut g_mean = [zero; 3];
    for a in 0..3 {
        g_mean[a] = (g_dir[a] - dir[a] * radial) / dist;
    }

    // conic → screen covariance: dΣ′ = -M dM M with b split over both
    // off-diagonal entries
    let [ca, cb, cc] = p.cov2d;
    let det = ca * cc - cb * cb;
    let m = [[cc / det, -cb / det], [-cb / det, ca / det]];
    let gm = [
        [sg.conic[0], sg.conic[1] / two],
        [sg.conic[1] / two, sg.conic[2]],
    ];
    let mut mg = [[zero; 2]; 2];
    for r in 0..2 {
        for c in 0..2 {
            mg[r][c] = m[r][0] * gm[0][c] + m[r][1] * gm[1][c];
        }
    }
    let mut g_cov2d = [[zero; 2]; 2];
    for r in 0..2 {
        for c in 0..2 {
            g_cov2d[r][c] = -(mg[r][0] * m[0][c] + mg[r][1] * m[1][c]);
        }
    }

    // Σ′ = J Σc Jᵀ
    let jac = &p.jac;
    let mut g_cov_cam = [[zero; 3]; 3];
    for r in 0..3 {
        for c in 0..3 {
            let mut v = zero;
            for a in 0..2 {
                for b in 0..2 {
                    v += jac[a][r] * g_cov2d[a][b] * jac[b][c];
                }
            }
            g_cov_cam[r][c] = v;
        }
    }
    // ∂L/∂J = 2 G J Σc
    let mut gj_tmp = [[zero; 3]; 2];
    for a in 0..2 {
        for c in 0..3 {
            gj_tmp[a][c] = g_cov2d[a][0] * jac[0][c] + g_cov2d[a][1] * jac[1][c];
        }
    }
    let mut g_jac = [[zero; 3]; 2];
    for a in 0..2 {
        for c in 0..3 {
            let mut v = zero;
            for k in 0..3 {
                v += gj_tmp[a][k] * p.cov_cam[k][c];
            }
            g_jac[a][c] = two * v;
        }
    }

    // Σc = W Σ Wᵀ
    let w = &cam.rotation;
    let mut g_cov = [[zero; 3]; 3];
    for r in 0..3 {
        for c in 0..3 {
            let mut v = zero;
            for a in 0..3 {
                for b in 0..3 {
                    v += w[a][r] * g_cov_cam[a][b] * w[b][c];
                }
            }
            g_cov[r][c] = v;
        }
    }

    // Σ = (R S)(R S)ᵀ
    let rot = &p.rot;
    let s = p.scale;
    let mut g_m = [[zero; 3]; 3];
    for r in 0..3 {
        for c in 0..3 {
            let mut v = zero;
            for k in 0..3 {
                v += g_cov[r][k] * rot[k][c] * s[c];
            }
            g_m[r][c] = two * v;
        }
    }
    let mut g_log_scale = [zero; 3];
    let mut g_rot = [[zero; 3]; 3];
    for c in 0..3 {
        let mut gs = zero;
        for r in 0..3 {
            gs += g_m[r][c] * rot[r][c];
            g_rot[r][c] = g_m[r][c] * s[c];
        }
        g_log_scale[c] = gs * s[c];
    }

    // rotation matrix → unit quaternion → stored quaternion
    let [qw, qx, qy, qz] = p.quat_unit;
    let t2 = two;
    let t4 = T::lit(4.0);
    let gr = &g_rot;
    let gqw = gr[0][1] * (-t2 * qz) + gr[0][2] * (t2 * qy) + gr[1][0] * (t2 * qz)
        + gr[1][2] * (-t2 * qx)
        + gr[2][0] * (-t2 * qy)
        + gr[2][1] * (t2 * qx);
    let gqx = gr[0][1] * (t2 * qy) + gr[0][2] * (t2 * qz) + gr[1][0] * (t2 * qy)
        + gr[1][1] * (-t4 * qx)
        + gr[1][2] * (-t2 * qw)
        + gr[2][0] * (t2 * qz)
        + gr[2][1] * (t2 * qw)
        + gr[2][2] * (-t4 * qx);
    let gqy = gr[0][0] * (-t4 * qy) + gr[0][1] * (t2 * qx) + gr[0][2] * (t2 * qw)
        + gr[1][0] * (t2 * qx)
        + gr[1][2] * (t2 * qz)
        + gr[2][0] * (-t2 * qw)
        + gr[2][1] * (t2 * qz)
        + gr[2][2] * (-t4 * qy);
    let gqz = gr[0][0] * (-t4 * qz) + gr[0][1] * (-t2 * qw) + gr[0][2] * (t2 * qx)
        + gr[1][0] * (t2 * qw)
        + gr[1][1] * (-t4 * qz)
        + gr[1][2] * (t2 * qy)
        + gr[2][0] * (t2 * qx)
        + gr[2][1] * (t2 * qy);
    let gq = [gqw, gqx, gqy, gqz];
    let radial_q = gq[0] * qw + gq[1] * qx + gq[2] * qy + gq[3] * qz;
    let mut g_quat = [zero; 4];
    for k in 0..4 {
        g_quat[k] = (gq[k] - p.quat_unit[k] * radial_q) / p.quat_norm;
    }

    // camera-space mean: Jacobian entries, projected center and depth
    let [tx_raw, ty_raw, tz] = p.t;
    let tx = p.txtz[0] * tz;
    let ty = p.txtz[1] * tz;
    let inv_z = T::one() / tz;
    let inv_z2 = inv_z * inv_z;
    let inv_z3 = inv_z2 * inv_z;
    let (fx, fy) = (cam.fx, cam.fy);
    let mut g_t = [zero; 3];
    g_t[2] += g_jac[0][0] * (-fx * inv_z2)
        + g_jac[0][2] * (two * fx * tx * inv_z3)
        + g_jac[1][1] * (-fy * inv_z2)
        + g_jac[1][2] * (two * fy * ty * inv_z3);
    let g_tx_clamped = g_jac[0][2] * (-fx * inv_z2);
    let g_ty_clamped = g_jac[1][2] * (-fy * inv_z2);
    if p.clamped[0] {
        g_t[2] += g_tx_clamped * p.txtz[0];
    } else {
        g_t[0] += g_tx_clamped;
    }
    if p.clamped[1] {
        g_t[2] += g_ty_clamped * p.txtz[1];
    } else {
        g_t[1] += g_ty_clamped;
    }
    let [gu, gv] = sg.mean2d;
    g_t[0] += gu * fx * inv_z;
    g_t[1] += gv * fy * inv_z;
    g_t[2] += -gu * fx * tx_raw * inv_z2 - gv * fy * ty_raw * inv_z2;
    g_t[2] += sg.depth;

    let g_world = mul3t_vec(w, g_t);
    for a in 0..3 {
        g_mean[a] += g_world[a];
    }

    let op = sigmoid(set.opacity_logits[i]);
    let half_w = T::lit(0.5) * T::lit(cam.width as f64);
    let half_h = T::lit(0.5) * T::lit(cam.height as f64);
    let ndc = [gu * half_w, gv * half_h];
    ParamGrad {
        mean: g_mean,
        log_scale: g_log_scale,
        rotation: g_quat,
        opacity_logit: sg.opacity * op * (T::one() - op),
        mean2d_ndc_norm: (ndc[0] * ndc[0] + ndc[1] * ndc[1]).sqrt(),
    }
}

/// Exact gradients of a scalar loss with respect to every parameter of
/// every Gaussian, given the loss gradients with respect to the rendered
/// color, depth and (optionally) coverage.
///
/// `out` must come from [`super::render_forward`] on the same set and
/// camera. The result does not depend on the thread count: per-tile
/// partial sums are reduced in tile order.
pub fn render_backward<T: Real>(
    set: &GaussianSet<T>,
    cam: &Camera<T>,
    out: &RenderOutput<T>,
    dl_dcolor: &Image<T>,
    dl_ddepth: &Grid<T>,
    dl_dalpha: Option<&Grid<T>>,
) -> Result<GradientBuffer<T>> {
    let (w, h) = (out.width(), out.height());
    if cam.width as usize != w || cam.height as usize != h {
        return Err(Error::InvalidInput("camera does not match render size".into()));
    }
    if dl_dcolor.width != w || dl_dcolor.height != h || dl_dcolor.data.len() != 3 * w * h {
        return Err(Error::InvalidInput(format!(
            "color gradient is {}x{}, render is {w}x{h}",
            dl_dcolor.width, dl_dcolor.height
        )));
    }
    if dl_ddepth.width != w || dl_ddepth.height != h || dl_ddepth.data.len() != w * h {
        return Err(Error::InvalidInput(format!(
            "depth gradient is {}x{}, render is {w}x{h}",
            dl_ddepth.width, dl_ddepth.height
        )));
    }
    if let Some(ga) = dl_dalpha {
        if ga.width != w || ga.height != h || ga.data.len() != w * h {
            return Err(Error::InvalidInput("alpha gradient shape mismatch".into()));
        }
    }
    if out.projected.len() != set.len() {
        return Err(Error::InvalidInput(format!(
            "render holds {} Gaussians, set has {}",
            out.projected.len(),
            set.len()
        )));
    }

    let n = set.len();
    let per_tile: Vec<Vec<ScreenGrad<f64>>> = (0..out.tile_ranges.len())
        .into_par_iter()
        .map(|tile| backward_tile(tile, out, dl_dcolor, dl_ddepth, dl_dalpha))
        .collect();
    let mut screen = vec![ScreenGrad::<f64>::default(); n];
    for (tile, local) in per_tile.iter().enumerate() {
        let list = &out.sorted[out.tile_ranges[tile].clone()];
        for (g, &gi) in local.iter().zip(list) {
            screen[gi as usize].add(g);
        }
    }
    let screen: Vec<ScreenGrad<T>> = screen.iter().map(ScreenGrad::cast).collect();

    let coeffs = set.sh_coeffs();
    let mut grads = GradientBuffer::zeros(n, coeffs);
    let center = cam.center();
    let degree = out.options.active_sh_degree;
    let results: Vec<Option<ParamGrad<T>>> = grads
        .sh
        .par_chunks_mut(coeffs.max(1))
        .enumerate()
        .map(|(i, sh_grad)| {
            out.projected[i].as_ref().map(|proj| {
                backward_gaussian(
                    set,
                    i,
                    cam,
                    center,
                    degree,
                    &screen[i],
                    proj.color_clamped,
                    sh_grad,
                )
            })
        })
        .collect();
    for (i, r) in results.into_iter().enumerate() {
        if let Some(r) = r {
            grads.means[i] = r.mean;
            grads.log_scales[i] = r.log_scale;
            grads.rotations[i] = r.rotation;
            grads.opacity_logits[i] = r.opacity_logit;
            grads.mean2d_norm[i] = r.mean2d_ndc_norm;
            grads.hits[i] = 1;
        }
    }
    Ok(grads)
}
