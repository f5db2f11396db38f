use crate::densify::knn_all;
use crate::real::logit;
use crate::scene::linalg::Vec3;
use crate::scene::sh::rgb_to_dc;
use crate::scene::GaussianSet;
use crate::{Error, Real, Result};

/// Opacity every initial Gaussian starts with.
pub const INITIAL_OPACITY: f64 = 0.1;

/// Floor on the initial neighbor distance so coincident points still get a
/// finite log-scale.
const MIN_INITIAL_SCALE: f64 = 1e-7;

/// One isotropic Gaussian per point, sized by the mean distance to its `k`
/// nearest neighbors, colored by the point's RGB through the DC SH term and
/// with identity rotation and opacity 0.1. Higher SH coefficients up to
/// `sh_degree` are zero.
pub fn init_gaussians_from_points<T: Real>(
    positions: &[Vec3<T>],
    colors: &[[u8; 3]],
    k: usize,
    sh_degree: usize,
) -> Result<GaussianSet<T>> {
    if positions.len() != colors.len() {
        return Err(Error::InvalidInput(format!(
            "{} positions but {} colors",
            positions.len(),
            colors.len()
        )));
    }
    if k == 0 || positions.len() < k + 1 {
        return Err(Error::InvalidInput(format!(
            "initialization with k = {k} needs at least {} points, got {}",
            k + 1,
            positions.len()
        )));
    }
    if !positions.iter().flatten().all(|v| v.is_finite()) {
        return Err(Error::InvalidInput("non-finite point position".into()));
    }
    let knn = knn_all(positions, k);
    let mut set = GaussianSet::with_capacity(sh_degree, positions.len());
    let coeffs = set.sh_coeffs();
    let opacity = logit(T::lit(INITIAL_OPACITY));
    let zero = T::zero();
    for (i, neighbors) in knn.iter().enumerate() {
        let mean: T = neighbors.iter().map(|&(_, d2)| d2.sqrt()).sum::<T>() / T::from_usize(k);
        let log_scale = mean.max(T::lit(MIN_INITIAL_SCALE)).ln();
        set.means.push(positions[i]);
        set.log_scales.push([log_scale; 3]);
        set.rotations.push([T::one(), zero, zero, zero]);
        set.opacity_logits.push(opacity);
        set.sh.push(colors[i].map(|c| rgb_to_dc(T::lit(f64::from(c) / 255.0))));
        set.sh.extend(std::iter::repeat_n([zero; 3], coeffs - 1));
    }
    Ok(set)
}
