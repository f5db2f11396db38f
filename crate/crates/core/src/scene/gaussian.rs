use crate::real::sigmoid;
use crate::{Error, Real, Result};

use super::linalg::{
    det3, inverse3, mul3_vec, quat_norm, sub3, unit_quat_to_rotation, Mat3, Quat, Vec3,
};

/// One Gaussian primitive as stored (pre-activation) parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Gaussian<T = f32> {
    pub mu: Vec3<T>,
    pub log_scale: Vec3<T>,
    /// `(w, x, y, z)`, normalised on use.
    pub rotation: Quat<T>,
    pub opacity_logit: T,
    /// One RGB triple per SH coefficient.
    pub sh: Vec<[T; 3]>,
}

impl<T: Real> Gaussian<T> {
    pub fn opacity(&self) -> T {
        sigmoid(self.opacity_logit)
    }

    pub fn scale(&self) -> Vec3<T> {
        self.log_scale.map(T::exp)
    }

    pub fn covariance(&self) -> Result<Mat3<T>> {
        covariance_from_params(self.log_scale, self.rotation)
    }
}

/// Normalise a quaternion; errors on zero or non-finite norm.
pub fn normalize_quat<T: Real>(q: Quat<T>) -> Result<Quat<T>> {
    let n = quat_norm(q);
    if n == T::zero() || !n.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "quaternion {q:?} has no usable norm"
        )));
    }
    Ok(q.map(|v| v / n))
}

/// `Σ = R S Sᵀ Rᵀ` with `S = diag(exp(log_scale))` and `R` from the
/// normalised quaternion.
pub fn covariance_from_params<T: Real>(log_scale: Vec3<T>, rotation: Quat<T>) -> Result<Mat3<T>> {
    let r = unit_quat_to_rotation(normalize_quat(rotation)?);
    let s = log_scale.map(T::exp);
    Ok(covariance_from_rotation_scale(&r, s))
}

pub(crate) fn covariance_from_rotation_scale<T: Real>(r: &Mat3<T>, s: Vec3<T>) -> Mat3<T> {
    let mut m = [[T::zero(); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            m[i][j] = r[i][j] * s[j];
        }
    }
    let mut sigma = [[T::zero(); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            sigma[i][j] = m[i][0] * m[j][0] + m[i][1] * m[j][1] + m[i][2] * m[j][2];
        }
    }
    sigma
}

/// Normalised trivariate Gaussian density at `x`.
pub fn gaussian_density<T: Real>(x: Vec3<T>, mu: Vec3<T>, sigma: &Mat3<T>) -> Result<T> {
    let det = det3(sigma);
    if !(det > T::zero()) {
        return Err(Error::Singular(format!(
            "covariance determinant {det} is not positive"
        )));
    }
    let inv = inverse3(sigma).ok_or_else(|| Error::Singular("covariance not invertible".into()))?;
    let d = sub3(x, mu);
    let id = mul3_vec(&inv, d);
    let maha = d[0] * id[0] + d[1] * id[1] + d[2] * id[2];
    let two_pi = T::lit(2.0) * T::PI();
    let norm = T::one() / (two_pi.powf(T::lit(1.5)) * det.sqrt());
    Ok(norm * (T::lit(-0.5) * maha).exp())
}
