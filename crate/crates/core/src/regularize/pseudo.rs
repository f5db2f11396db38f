//! Virtual cameras between pairs of training views.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::scene::config::PseudoPairing;
use crate::scene::linalg::{dist2, mul3_vec, scale3, unit_quat_to_rotation, Quat, Vec3};
use crate::scene::{normalize_quat, Camera};
use crate::{Error, Real, Result};

/// A sampled virtual view.
#[derive(Clone, Debug, PartialEq)]
pub struct PseudoCamera<T = f32> {
    pub camera: Camera<T>,
    /// Indices (into the training camera list) of the two parent views.
    pub parents: (usize, usize),
    /// Offset added to the parents' midpoint.
    pub noise: Vec3<T>,
}

/// Average of two rotations as quaternions, after flipping `q2` into the
/// hemisphere of `q1`.
pub fn average_quaternion<T: Real>(q1: Quat<T>, q2: Quat<T>) -> Result<Quat<T>> {
    let d = q1[0] * q2[0] + q1[1] * q2[1] + q1[2] * q2[2] + q1[3] * q2[3];
    let s = if d < T::zero() { -T::one() } else { T::one() };
    normalize_quat([0, 1, 2, 3].map(|k| q1[k] + s * q2[k]))
}

/// Nearest other camera to `anchor` by center distance; ties go to the
/// lower index.
fn nearest_camera<T: Real>(centers: &[Vec3<T>], anchor: usize) -> usize {
    let mut best = None;
    for (j, &c) in centers.iter().enumerate() {
        if j == anchor {
            continue;
        }
        let d = dist2(centers[anchor], c);
        if best.is_none_or(|(bd, _)| d < bd) {
            best = Some((d, j));
        }
    }
    best.expect("at least two cameras").1
}

fn closest_pair<T: Real>(centers: &[Vec3<T>]) -> (usize, usize) {
    let mut best = (T::infinity(), 0, 1);
    for i in 0..centers.len() {
        for j in i + 1..centers.len() {
            let d = dist2(centers[i], centers[j]);
            if d < best.0 {
                best = (d, i, j);
            }
        }
    }
    (best.1, best.2)
}

/// Sample a pseudo view: pick two nearby training cameras, average their
/// orientations and place the camera at the midpoint of their centers plus
/// isotropic Gaussian noise of standard deviation `delta`. Intrinsics are
/// copied from the first parent.
pub fn sample_pseudo_camera<T: Real, R: Rng + ?Sized>(
    cameras: &[Camera<T>],
    rng: &mut R,
    delta: T,
    pairing: PseudoPairing,
) -> Result<PseudoCamera<T>> {
    if cameras.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "pseudo views need at least two training cameras, got {}",
            cameras.len()
        )));
    }
    if !(delta >= T::zero()) {
        return Err(Error::InvalidParameter(format!("pseudo-view noise {delta} must be non-negative")));
    }
    let centers: Vec<Vec3<T>> = cameras.iter().map(Camera::center).collect();
    let (a, b) = match pairing {
        PseudoPairing::RandomAnchor => {
            let a = rng.random_range(0..cameras.len());
            (a, nearest_camera(&centers, a))
        }
        PseudoPairing::ClosestPair => closest_pair(&centers),
    };
    let q = average_quaternion(cameras[a].quaternion(), cameras[b].quaternion())?;
    let rotation = unit_quat_to_rotation(q);
    let normal = Normal::new(0.0, delta.as_f64()).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let noise: Vec3<T> = [0; 3].map(|_| T::lit(normal.sample(rng)));
    let half = T::lit(0.5);
    let center: Vec3<T> = [0, 1, 2].map(|k| (centers[a][k] + centers[b][k]) * half + noise[k]);
    let parent = &cameras[a];
    let camera = Camera::new(
        parent.id,
        [parent.fx, parent.fy],
        [parent.cx, parent.cy],
        parent.width,
        parent.height,
        rotation,
        scale3(mul3_vec(&rotation, center), -T::one()),
    )?;
    Ok(PseudoCamera {
        camera,
        parents: (a, b),
        noise,
    })
}

/// Default pseudo-view noise: 3% of the median pairwise distance between
/// training camera centers.
pub fn default_pseudo_noise<T: Real>(cameras: &[Camera<T>]) -> T {
    let centers: Vec<Vec3<T>> = cameras.iter().map(Camera::center).collect();
    let mut d: Vec<f64> = Vec::new();
    for i in 0..centers.len() {
        for j in i + 1..centers.len() {
            d.push(dist2(centers[i], centers[j]).sqrt().as_f64());
        }
    }
    if d.is_empty() {
        return T::zero();
    }
    d.sort_by(|x, y| x.partial_cmp(y).expect("finite distances"));
    let m = d.len();
    let median = if m % 2 == 1 { d[m / 2] } else { 0.5 * (d[m / 2 - 1] + d[m / 2]) };
    T::lit(0.03 * median)
}
