use crate::{Error, Real, Result};

use super::gaussian::normalize_quat;
use super::linalg::{
    add3, cross3, mul3_vec, mul3t_vec, norm3, orthonormality_error, rotation_to_quat, scale3,
    sub3, unit_quat_to_rotation, Mat3, Quat, Vec3,
};

/// Pinhole camera with a world-to-camera rigid transform.
///
/// Camera space follows the COLMAP convention: x right, y down, z forward.
/// Pixel `(i, j)` covers `[i, i+1) × [j, j+1)`, so its center is at
/// `(i + 0.5, j + 0.5)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Camera<T = f32> {
    pub id: u32,
    pub fx: T,
    pub fy: T,
    pub cx: T,
    pub cy: T,
    pub width: u32,
    pub height: u32,
    pub rotation: Mat3<T>,
    pub translation: Vec3<T>,
}

impl<T: Real> Camera<T> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        id: u32,
        focal: [T; 2],
        principal_point: [T; 2],
        width: u32,
        height: u32,
        rotation: Mat3<T>,
        translation: Vec3<T>,
    ) -> Result<Self> {
        let cam = Self {
            id,
            fx: focal[0],
            fy: focal[1],
            cx: principal_point[0],
            cy: principal_point[1],
            width,
            height,
            rotation,
            translation,
        };
        cam.validate()?;
        Ok(cam)
    }

    /// Camera from a COLMAP-style `(w, x, y, z)` world-to-camera quaternion.
    pub fn from_quaternion(
        id: u32,
        focal: [T; 2],
        principal_point: [T; 2],
        width: u32,
        height: u32,
        q: Quat<T>,
        translation: Vec3<T>,
    ) -> Result<Self> {
        let r = unit_quat_to_rotation(normalize_quat(q)?);
        Self::new(id, focal, principal_point, width, height, r, translation)
    }

    /// Camera at `eye` looking at `target`. `up` is the world direction that
    /// should appear upward in the image.
    #[allow(clippy::too_many_arguments)]
    pub fn look_at(
        id: u32,
        eye: Vec3<T>,
        target: Vec3<T>,
        up: Vec3<T>,
        focal: [T; 2],
        principal_point: [T; 2],
        width: u32,
        height: u32,
    ) -> Result<Self> {
        let fwd = sub3(target, eye);
        let fl = norm3(fwd);
        if !(fl > T::zero()) {
            return Err(Error::InvalidParameter("eye coincides with target".into()));
        }
        let z = scale3(fwd, T::one() / fl);
        // camera y points down the image: x = down × z
        let x = cross3(scale3(up, -T::one()), z);
        let xl = norm3(x);
        if !(xl > T::zero()) {
            return Err(Error::InvalidParameter("up is parallel to view direction".into()));
        }
        let x = scale3(x, T::one() / xl);
        let y = cross3(z, x);
        let rotation = [x, y, z];
        let translation = scale3(mul3_vec(&rotation, eye), -T::one());
        Self::new(id, focal, principal_point, width, height, rotation, translation)
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidParameter(format!(
                "camera {} has empty image size {}x{}",
                self.id, self.width, self.height
            )));
        }
        if !(self.fx > T::zero() && self.fy > T::zero()) {
            return Err(Error::InvalidParameter(format!(
                "camera {} has non-positive focal length",
                self.id
            )));
        }
        // f32 rotations built from quaternions carry ~1e-7 rounding
        let tol = T::lit(1e-6).max(T::epsilon() * T::lit(16.0));
        let err = orthonormality_error(&self.rotation);
        if !(err <= tol) || super::linalg::det3(&self.rotation) < T::zero() {
            return Err(Error::InvalidParameter(format!(
                "camera {} rotation is not a proper rotation (error {err})",
                self.id
            )));
        }
        Ok(())
    }

    /// Camera center in world coordinates, `-Rᵀ t`.
    pub fn center(&self) -> Vec3<T> {
        scale3(mul3t_vec(&self.rotation, self.translation), -T::one())
    }

    pub fn world_to_camera(&self, p: Vec3<T>) -> Vec3<T> {
        add3(mul3_vec(&self.rotation, p), self.translation)
    }

    /// World-to-camera rotation as a unit quaternion with `w >= 0`.
    pub fn quaternion(&self) -> Quat<T> {
        rotation_to_quat(&self.rotation)
    }

    /// Same pose with a new center; translation is recomputed.
    pub fn with_center(&self, center: Vec3<T>) -> Self {
        let mut cam = self.clone();
        cam.translation = scale3(mul3_vec(&self.rotation, center), -T::one());
        cam
    }

    /// Intrinsics for an image downsampled by an integer factor.
    pub fn downsampled(&self, factor: u32) -> Self {
        let f = T::lit(factor as f64);
        let mut cam = self.clone();
        cam.fx = self.fx / f;
        cam.fy = self.fy / f;
        cam.cx = self.cx / f;
        cam.cy = self.cy / f;
        cam.width = self.width / factor;
        cam.height = self.height / factor;
        cam
    }

    pub fn cast<U: Real>(&self) -> Camera<U> {
        let c = |v: T| U::lit(v.as_f64());
        Camera {
            id: self.id,
            fx: c(self.fx),
            fy: c(self.fy),
            cx: c(self.cx),
            cy: c(self.cy),
            width: self.width,
            height: self.height,
            rotation: self.rotation.map(|r| r.map(c)),
            translation: self.translation.map(c),
        }
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }
}
