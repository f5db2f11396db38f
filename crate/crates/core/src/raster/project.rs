use crate::real::sigmoid;
use crate::scene::linalg::{mul3, norm3, quat_norm, scale3, sub3, transpose3, unit_quat_to_rotation, Mat3, Quat, Vec3};
use crate::scene::sh::eval_sh_raw;
use crate::scene::{covariance_from_rotation_scale, Camera, Gaussian, GaussianSet};
use crate::Real;

use super::{DILATION, FRUSTUM_GUARD, NEAR_PLANE, TILE_SIZE};

/// A Gaussian after projection into one camera.
#[derive(Clone, Debug, PartialEq)]
pub struct ProjectedGaussian<T = f32> {
    /// Pixel coordinates of the projected center.
    pub mean2d: [T; 2],
    /// Upper triangle `(a, b, c)` of the inverse screen covariance.
    pub conic: [T; 3],
    /// Camera-space depth.
    pub z: T,
    /// Screen extent at 3σ, rounded up to whole pixels.
    pub radius: u32,
    pub color: [T; 3],
    /// Channels whose SH color was clamped at zero.
    pub color_clamped: [bool; 3],
    pub opacity: T,
    /// Overlapped tiles, `[x0, y0, x1, y1)`.
    pub tile_rect: [u32; 4],
}

/// Camera-space quantities shared by the forward and backward passes.
pub(crate) struct Projection<T> {
    pub t: Vec3<T>,
    /// Tangent-plane coordinates `t.x/t.z`, `t.y/t.z` after the clamp.
    pub txtz: [T; 2],
    pub clamped: [bool; 2],
    pub jac: [[T; 3]; 2],
    pub cov_cam: Mat3<T>,
    pub cov2d: [T; 3],
    pub rot: Mat3<T>,
    pub scale: Vec3<T>,
    pub quat_unit: Quat<T>,
    pub quat_norm: T,
    pub mean2d: [T; 2],
}

/// Image-space region a projected center must fall in to be kept: the
/// image grown by `FRUSTUM_GUARD` about its middle.
fn guard_bounds<T: Real>(extent: u32) -> (T, T) {
    let e = T::lit(extent as f64);
    let margin = T::lit((FRUSTUM_GUARD - 1.0) * 0.5) * e;
    (-margin, e + margin)
}

pub(crate) fn project_geometry<T: Real>(
    mu: Vec3<T>,
    log_scale: Vec3<T>,
    rotation: Quat<T>,
    cam: &Camera<T>,
) -> Option<Projection<T>> {
    let t = cam.world_to_camera(mu);
    if !(t[2] > T::lit(NEAR_PLANE)) {
        return None;
    }
    let mean2d = [
        cam.fx * t[0] / t[2] + cam.cx,
        cam.fy * t[1] / t[2] + cam.cy,
    ];
    let (umin, umax) = guard_bounds::<T>(cam.width);
    let (vmin, vmax) = guard_bounds::<T>(cam.height);
    if !(mean2d[0] >= umin && mean2d[0] <= umax && mean2d[1] >= vmin && mean2d[1] <= vmax) {
        return None;
    }

    // EWA tangent-plane clamp of the Jacobian evaluation point
    let lim = [
        ((umin - cam.cx) / cam.fx, (umax - cam.cx) / cam.fx),
        ((vmin - cam.cy) / cam.fy, (vmax - cam.cy) / cam.fy),
    ];
    let mut txtz = [t[0] / t[2], t[1] / t[2]];
    let mut clamped = [false; 2];
    for a in 0..2 {
        if txtz[a] < lim[a].0 {
            txtz[a] = lim[a].0;
            clamped[a] = true;
        } else if txtz[a] > lim[a].1 {
            txtz[a] = lim[a].1;
            clamped[a] = true;
        }
    }
    let tz = t[2];
    let tx = txtz[0] * tz;
    let ty = txtz[1] * tz;
    let inv_z = T::one() / tz;
    let inv_z2 = inv_z * inv_z;
    let zero = T::zero();
    let jac = [
        [cam.fx * inv_z, zero, -cam.fx * tx * inv_z2],
        [zero, cam.fy * inv_z, -cam.fy * ty * inv_z2],
    ];

    let qn = quat_norm(rotation);
    if !(qn > T::zero()) || !qn.is_finite() {
        return None;
    }
    let quat_unit = rotation.map(|v| v / qn);
    let rot = unit_quat_to_rotation(quat_unit);
    let scale = log_scale.map(T::exp);
    let cov = covariance_from_rotation_scale(&rot, scale);
    let w = &cam.rotation;
    let cov_cam = mul3(&mul3(w, &cov), &transpose3(w));

    // J Σc Jᵀ (2×2, symmetric)
    let mut jc = [[zero; 3]; 2];
    for i in 0..2 {
        for j in 0..3 {
            jc[i][j] = jac[i][0] * cov_cam[0][j] + jac[i][1] * cov_cam[1][j] + jac[i][2] * cov_cam[2][j];
        }
    }
    let dot = |a: &[T; 3], b: &[T; 3]| a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    let cov2d = [
        dot(&jc[0], &jac[0]) + T::lit(DILATION),
        dot(&jc[0], &jac[1]),
        dot(&jc[1], &jac[1]) + T::lit(DILATION),
    ];
    Some(Projection {
        t,
        txtz,
        clamped,
        jac,
        cov_cam,
        cov2d,
        rot,
        scale,
        quat_unit,
        quat_norm: qn,
        mean2d,
    })
}

/// Unit direction from the camera center to `mu` and the distance.
pub(crate) fn view_dir<T: Real>(mu: Vec3<T>, cam_center: Vec3<T>) -> (Vec3<T>, T) {
    let v = sub3(mu, cam_center);
    let n = norm3(v);
    if n > T::zero() {
        (scale3(v, T::one() / n), n)
    } else {
        ([T::zero(), T::zero(), T::one()], T::one())
    }
}

pub(crate) fn project_parts<T: Real>(
    mu: Vec3<T>,
    log_scale: Vec3<T>,
    rotation: Quat<T>,
    opacity_logit: T,
    sh: &[[T; 3]],
    cam: &Camera<T>,
    cam_center: Vec3<T>,
    active_degree: usize,
) -> Option<ProjectedGaussian<T>> {
    let p = project_geometry(mu, log_scale, rotation, cam)?;
    let [a, b, c] = p.cov2d;
    let det = a * c - b * b;
    if !(det > T::zero()) {
        return None;
    }
    let inv_det = T::one() / det;
    let conic = [c * inv_det, -b * inv_det, a * inv_det];
    let mid = T::lit(0.5) * (a + c);
    let lambda_max = mid + (mid * mid - det).max(T::zero()).sqrt();
    let radius_f = (T::lit(3.0) * lambda_max.sqrt()).ceil();
    let radius = radius_f.to_u32().unwrap_or(u32::MAX);
    if radius == 0 {
        return None;
    }

    let tiles_x = cam.width.div_ceil(TILE_SIZE);
    let tiles_y = cam.height.div_ceil(TILE_SIZE);
    let ts = T::lit(TILE_SIZE as f64);
    let tile_lo = |center: T, limit: u32| -> u32 {
        let v = ((center - radius_f) / ts).floor();
        if v <= T::zero() {
            0
        } else {
            v.to_u32().unwrap_or(limit).min(limit)
        }
    };
    let tile_hi = |center: T, limit: u32| -> u32 {
        let v = ((center + radius_f) / ts).ceil();
        if v <= T::zero() {
            0
        } else {
            v.to_u32().unwrap_or(limit).min(limit)
        }
    };
    let rect = [
        tile_lo(p.mean2d[0], tiles_x),
        tile_lo(p.mean2d[1], tiles_y),
        tile_hi(p.mean2d[0], tiles_x),
        tile_hi(p.mean2d[1], tiles_y),
    ];
    if rect[0] >= rect[2] || rect[1] >= rect[3] {
        return None;
    }

    let (dir, _) = view_dir(mu, cam_center);
    let raw = eval_sh_raw(sh, dir, active_degree);
    let half = T::lit(0.5);
    let mut color = [T::zero(); 3];
    let mut color_clamped = [false; 3];
    for ch in 0..3 {
        let v = raw[ch] + half;
        if v < T::zero() {
            color_clamped[ch] = true;
        } else {
            color[ch] = v;
        }
    }

    Some(ProjectedGaussian {
        mean2d: p.mean2d,
        conic,
        z: p.t[2],
        radius,
        color,
        color_clamped,
        opacity: sigmoid(opacity_logit),
        tile_rect: rect,
    })
}

/// Project one Gaussian into `cam`. Returns `None` when culled: behind the
/// near plane, centered outside the guarded image region, or not touching
/// any tile.
pub fn project_gaussian<T: Real>(
    g: &Gaussian<T>,
    cam: &Camera<T>,
    active_degree: usize,
) -> Option<ProjectedGaussian<T>> {
    project_parts(
        g.mu,
        g.log_scale,
        g.rotation,
        g.opacity_logit,
        &g.sh,
        cam,
        cam.center(),
        active_degree,
    )
}

pub(crate) fn project_index<T: Real>(
    set: &GaussianSet<T>,
    i: usize,
    cam: &Camera<T>,
    cam_center: Vec3<T>,
    active_degree: usize,
) -> Option<ProjectedGaussian<T>> {
    project_parts(
        set.means[i],
        set.log_scales[i],
        set.rotations[i],
        set.opacity_logits[i],
        set.sh_of(i),
        cam,
        cam_center,
        active_degree,
    )
}

/// Screen covariance `Σ′` of a projection including the dilation, as
/// `(a, b, c)` for `[[a, b], [b, c]]`.
pub fn screen_covariance<T: Real>(g: &Gaussian<T>, cam: &Camera<T>) -> Option<[T; 3]> {
    project_geometry(g.mu, g.log_scale, g.rotation, cam).map(|p| p.cov2d)
}
