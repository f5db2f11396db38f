//! Real spherical harmonics up to degree 4.
//!
//! Degrees 0..=3 use the constants and sign convention of the common splat
//! PLY format so exported coefficients render identically in other viewers.
//! Degree 4 follows the same Condon-Shortley sign pattern.

use crate::Real;

use super::linalg::Vec3;

pub const MAX_SH_DEGREE: usize = 4;
pub const MAX_SH_COEFFS: usize = (MAX_SH_DEGREE + 1) * (MAX_SH_DEGREE + 1);

pub const SH_C0: f64 = 0.282_094_791_773_878_14;
const SH_C1: f64 = 0.488_602_511_902_919_9;
const SH_C2: [f64; 5] = [
    1.092_548_430_592_079_2,
    -1.092_548_430_592_079_2,
    0.315_391_565_252_520_05,
    -1.092_548_430_592_079_2,
    0.546_274_215_296_039_6,
];
const SH_C3: [f64; 7] = [
    -0.590_043_589_926_643_5,
    2.890_611_442_640_554,
    -0.457_045_799_464_465_8,
    0.373_176_332_590_115_4,
    -0.457_045_799_464_465_8,
    1.445_305_721_320_277,
    -0.590_043_589_926_643_5,
];
const SH_C4: [f64; 6] = [
    2.503_342_941_796_704_6,
    1.770_130_769_779_930_4,
    0.946_174_695_757_560_1,
    0.669_046_543_557_289_2,
    0.105_785_546_915_204_31,
    0.473_087_347_878_780_04,
];
const SH_C4_44: f64 = 0.625_835_735_449_176_1;

/// Number of coefficients per color channel for a given maximum degree.
pub const fn num_coeffs(degree: usize) -> usize {
    (degree + 1) * (degree + 1)
}

/// Inverse of [`num_coeffs`]; `None` if `count` is not a perfect square.
pub fn degree_for_coeffs(count: usize) -> Option<usize> {
    (0..=MAX_SH_DEGREE).find(|&d| num_coeffs(d) == count)
}

/// DC coefficient that renders as `rgb` under the +0.5 color offset.
pub fn rgb_to_dc<T: Real>(rgb: T) -> T {
    (rgb - T::lit(0.5)) / T::lit(SH_C0)
}

/// Basis values `Y_k(dir)` for `k < num_coeffs(degree)`; the rest are zero.
pub fn sh_basis<T: Real>(dir: Vec3<T>, degree: usize) -> [T; MAX_SH_COEFFS] {
    let c = T::lit;
    let mut y = [T::zero(); MAX_SH_COEFFS];
    let [x, yv, z] = dir;
    y[0] = c(SH_C0);
    if degree == 0 {
        return y;
    }
    y[1] = -c(SH_C1) * yv;
    y[2] = c(SH_C1) * z;
    y[3] = -c(SH_C1) * x;
    if degree == 1 {
        return y;
    }
    let (xx, yy, zz) = (x * x, yv * yv, z * z);
    let (xy, yz, xz) = (x * yv, yv * z, x * z);
    y[4] = c(SH_C2[0]) * xy;
    y[5] = c(SH_C2[1]) * yz;
    y[6] = c(SH_C2[2]) * (c(2.0) * zz - xx - yy);
    y[7] = c(SH_C2[3]) * xz;
    y[8] = c(SH_C2[4]) * (xx - yy);
    if degree == 2 {
        return y;
    }
    y[9] = c(SH_C3[0]) * yv * (c(3.0) * xx - yy);
    y[10] = c(SH_C3[1]) * xy * z;
    y[11] = c(SH_C3[2]) * yv * (c(4.0) * zz - xx - yy);
    y[12] = c(SH_C3[3]) * z * (c(2.0) * zz - c(3.0) * xx - c(3.0) * yy);
    y[13] = c(SH_C3[4]) * x * (c(4.0) * zz - xx - yy);
    y[14] = c(SH_C3[5]) * z * (xx - yy);
    y[15] = c(SH_C3[6]) * x * (xx - c(3.0) * yy);
    if degree == 3 {
        return y;
    }
    let seven_zz = c(7.0) * zz;
    y[16] = c(SH_C4[0]) * xy * (xx - yy);
    y[17] = -c(SH_C4[1]) * yz * (c(3.0) * xx - yy);
    y[18] = c(SH_C4[2]) * xy * (seven_zz - c(1.0));
    y[19] = -c(SH_C4[3]) * yz * (seven_zz - c(3.0));
    y[20] = c(SH_C4[4]) * (c(35.0) * zz * zz - c(30.0) * zz + c(3.0));
    y[21] = -c(SH_C4[3]) * xz * (seven_zz - c(3.0));
    y[22] = c(SH_C4[5]) * (xx - yy) * (seven_zz - c(1.0));
    y[23] = -c(SH_C4[1]) * xz * (xx - c(3.0) * yy);
    y[24] = c(SH_C4_44) * (xx * xx - c(6.0) * xx * yy + yy * yy);
    y
}

/// Cartesian gradients of the basis polynomials, `∇Y_k` evaluated at
/// `dir`. Callers project onto the tangent plane of the unit sphere.
pub fn sh_basis_grad<T: Real>(dir: Vec3<T>, degree: usize) -> [Vec3<T>; MAX_SH_COEFFS] {
    let c = T::lit;
    let zero = T::zero();
    let mut g = [[zero; 3]; MAX_SH_COEFFS];
    if degree == 0 {
        return g;
    }
    let [x, y, z] = dir;
    let c1 = c(SH_C1);
    g[1] = [zero, -c1, zero];
    g[2] = [zero, zero, c1];
    g[3] = [-c1, zero, zero];
    if degree == 1 {
        return g;
    }
    let (xx, yy, zz) = (x * x, y * y, z * z);
    let k = SH_C2;
    g[4] = [c(k[0]) * y, c(k[0]) * x, zero];
    g[5] = [zero, c(k[1]) * z, c(k[1]) * y];
    g[6] = [c(-2.0 * k[2]) * x, c(-2.0 * k[2]) * y, c(4.0 * k[2]) * z];
    g[7] = [c(k[3]) * z, zero, c(k[3]) * x];
    g[8] = [c(2.0 * k[4]) * x, c(-2.0 * k[4]) * y, zero];
    if degree == 2 {
        return g;
    }
    let k = SH_C3;
    g[9] = [c(6.0 * k[0]) * x * y, c(3.0 * k[0]) * (xx - yy), zero];
    g[10] = [c(k[1]) * y * z, c(k[1]) * x * z, c(k[1]) * x * y];
    g[11] = [
        c(-2.0 * k[2]) * x * y,
        c(k[2]) * (c(4.0) * zz - xx - c(3.0) * yy),
        c(8.0 * k[2]) * y * z,
    ];
    g[12] = [
        c(-6.0 * k[3]) * x * z,
        c(-6.0 * k[3]) * y * z,
        c(k[3]) * (c(6.0) * zz - c(3.0) * xx - c(3.0) * yy),
    ];
    g[13] = [
        c(k[4]) * (c(4.0) * zz - c(3.0) * xx - yy),
        c(-2.0 * k[4]) * x * y,
        c(8.0 * k[4]) * x * z,
    ];
    g[14] = [
        c(2.0 * k[5]) * x * z,
        c(-2.0 * k[5]) * y * z,
        c(k[5]) * (xx - yy),
    ];
    g[15] = [c(3.0 * k[6]) * (xx - yy), c(-6.0 * k[6]) * x * y, zero];
    if degree == 3 {
        return g;
    }
    let [a, b, cc, d, e, f] = SH_C4;
    let seven_zz = c(7.0) * zz;
    g[16] = [
        c(a) * (c(3.0) * xx * y - yy * y),
        c(a) * (xx * x - c(3.0) * x * yy),
        zero,
    ];
    g[17] = [
        c(-6.0 * b) * x * y * z,
        c(-3.0 * b) * (xx - yy) * z,
        c(-b) * (c(3.0) * xx * y - yy * y),
    ];
    g[18] = [
        c(cc) * y * (seven_zz - c(1.0)),
        c(cc) * x * (seven_zz - c(1.0)),
        c(14.0 * cc) * x * y * z,
    ];
    g[19] = [
        zero,
        c(-d) * z * (seven_zz - c(3.0)),
        c(-d) * y * (c(21.0) * zz - c(3.0)),
    ];
    g[20] = [zero, zero, c(e) * (c(140.0) * zz * z - c(60.0) * z)];
    g[21] = [
        c(-d) * z * (seven_zz - c(3.0)),
        zero,
        c(-d) * x * (c(21.0) * zz - c(3.0)),
    ];
    g[22] = [
        c(2.0 * f) * x * (seven_zz - c(1.0)),
        c(-2.0 * f) * y * (seven_zz - c(1.0)),
        c(14.0 * f) * z * (xx - yy),
    ];
    g[23] = [
        c(-3.0 * b) * (xx - yy) * z,
        c(6.0 * b) * x * y * z,
        c(-b) * (xx * x - c(3.0) * x * yy),
    ];
    g[24] = [
        c(SH_C4_44) * (c(4.0) * xx * x - c(12.0) * x * yy),
        c(SH_C4_44) * (c(4.0) * yy * y - c(12.0) * xx * y),
        zero,
    ];
    g
}

/// SH color before the offset and clamp: `Σ c_k Y_k(dir)`.
pub fn eval_sh_raw<T: Real>(sh: &[[T; 3]], dir: Vec3<T>, active_degree: usize) -> [T; 3] {
    let basis = sh_basis(dir, active_degree);
    let n = num_coeffs(active_degree).min(sh.len());
    let mut rgb = [T::zero(); 3];
    for (coeff, &yk) in sh[..n].iter().zip(&basis[..n]) {
        for ch in 0..3 {
            rgb[ch] += coeff[ch] * yk;
        }
    }
    rgb
}

/// View-dependent color: SH sum plus 0.5, clamped at zero from below.
///
/// Coefficients of degree above `active_degree` are ignored. `sh` holds one
/// RGB triple per coefficient, `(D+1)²` of them.
pub fn eval_sh<T: Real>(sh: &[[T; 3]], dir: Vec3<T>, active_degree: usize) -> [T; 3] {
    let raw = eval_sh_raw(sh, dir, active_degree);
    raw.map(|v| (v + T::lit(0.5)).max(T::zero()))
}
