//! Shared fixtures and the finite-difference oracle for integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use sparse_splat::buffer::{Grid, Image};
use sparse_splat::raster::{render_forward, GradientBuffer, RenderOptions, RenderOutput};
use sparse_splat::scene::{Camera, Gaussian, GaussianSet};
use sparse_splat::Real;

pub const SH_C0: f64 = 0.282_094_791_773_878_14;

/// Random scene in front of a camera at the origin looking down +z.
pub fn random_scene(seed: u64, n: usize, size: u32, sh_degree: usize) -> (GaussianSet<f64>, Camera<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f = 1.25 * size as f64;
    let c = 0.5 * size as f64;
    let cam = Camera::look_at(
        0,
        [0.0, 0.0, 0.0],
        [0.0, 0.0, 1.0],
        [0.0, -1.0, 0.0],
        [f, f],
        [c, c],
        size,
        size,
    )
    .unwrap();
    let mut set = GaussianSet::new(sh_degree);
    let k = (sh_degree + 1) * (sh_degree + 1);
    for _ in 0..n {
        let z: f64 = rng.random_range(3.0..5.0);
        let mu = [
            rng.random_range(-0.25..0.25) * z,
            rng.random_range(-0.25..0.25) * z,
            z,
        ];
        let log_scale = [0; 3].map(|_| rng.random_range(0.08f64..0.4).ln());
        let rotation = [0; 4].map(|_| rng.sample::<f64, _>(StandardNormal));
        let opacity: f64 = rng.random_range(0.3..0.9);
        let mut sh = vec![[0.0; 3]; k];
        sh[0] = [0; 3].map(|_| (rng.random_range(0.1..0.9) - 0.5) / SH_C0);
        for coeff in sh.iter_mut().skip(1) {
            *coeff = [0; 3].map(|_| 0.05 * rng.sample::<f64, _>(StandardNormal));
        }
        set.push(Gaussian {
            mu,
            log_scale,
            rotation,
            opacity_logit: (opacity / (1.0 - opacity)).ln(),
            sh,
        })
        .unwrap();
    }
    (set, cam)
}

/// Everything about a render that decides which terms enter the blend.
/// Finite differences straddling a change of this are meaningless.
#[derive(PartialEq, Eq)]
pub struct Structure {
    sorted: Vec<u32>,
    ranges: Vec<(usize, usize)>,
    n_contrib: Vec<u32>,
    flags: Vec<u8>,
}

pub fn structure<T: Real>(out: &RenderOutput<T>) -> Structure {
    let w = out.width();
    let mut flags = Vec::new();
    for p in 0..out.n_contrib.len() {
        let (x, y) = (p % w, p / w);
        let tile = (y / 16) * w.div_ceil(16) + x / 16;
        let list = &out.sorted[out.tile_ranges[tile].clone()];
        let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
        let mut trans = 1.0;
        for &gi in list {
            let g = out.projected[gi as usize].as_ref().unwrap();
            let dx = g.mean2d[0].as_f64() - px;
            let dy = g.mean2d[1].as_f64() - py;
            let [a, b, c] = g.conic.map(|v| v.as_f64());
            let power = -0.5 * (a * dx * dx + c * dy * dy) - b * dx * dy;
            let alpha = (g.opacity.as_f64() * power.exp()).min(0.99);
            let used = power <= 0.0 && alpha >= 1.0 / 255.0;
            flags.push(u8::from(used) | u8::from(alpha >= 0.99) << 1);
            if used {
                let next = trans * (1.0 - alpha);
                if next < 1e-4 {
                    flags.push(4);
                    break;
                }
                trans = next;
            }
        }
    }
    for g in out.projected.iter().flatten() {
        flags.push(g.color_clamped.iter().fold(16, |acc, &c| acc << 1 | u8::from(c)));
    }
    Structure {
        sorted: out.sorted.clone(),
        ranges: out.tile_ranges.iter().map(|r| (r.start, r.end)).collect(),
        n_contrib: out.n_contrib.clone(),
        flags,
    }
}

/// One scalar parameter of a set, addressed by group and flat index.
#[derive(Clone, Copy, Debug)]
pub enum Param {
    Mean(usize, usize),
    LogScale(usize, usize),
    Rotation(usize, usize),
    Opacity(usize),
    Sh(usize, usize),
}

pub fn all_params<T: Real>(set: &GaussianSet<T>) -> Vec<Param> {
    let mut v = Vec::new();
    for i in 0..set.len() {
        for a in 0..3 {
            v.push(Param::Mean(i, a));
            v.push(Param::LogScale(i, a));
        }
        for a in 0..4 {
            v.push(Param::Rotation(i, a));
        }
        v.push(Param::Opacity(i));
    }
    for j in 0..set.sh.len() * 3 {
        v.push(Param::Sh(j / 3, j % 3));
    }
    v
}

pub fn param_mut<T: Real>(set: &mut GaussianSet<T>, p: Param) -> &mut T {
    match p {
        Param::Mean(i, a) => &mut set.means[i][a],
        Param::LogScale(i, a) => &mut set.log_scales[i][a],
        Param::Rotation(i, a) => &mut set.rotations[i][a],
        Param::Opacity(i) => &mut set.opacity_logits[i],
        Param::Sh(j, c) => &mut set.sh[j][c],
    }
}

pub fn grad_of<T: Real>(g: &GradientBuffer<T>, p: Param) -> f64 {
    match p {
        Param::Mean(i, a) => g.means[i][a],
        Param::LogScale(i, a) => g.log_scales[i][a],
        Param::Rotation(i, a) => g.rotations[i][a],
        Param::Opacity(i) => g.opacity_logits[i],
        Param::Sh(j, c) => g.sh[j][c],
    }
    .as_f64()
}

/// Finite-difference step per parameter group. Color is linear in the SH
/// coefficients, so a large step there costs no truncation error and keeps
/// round-off well below the tolerance.
pub fn step_for(p: Param) -> f64 {
    match p {
        Param::Sh(..) => 1e-2,
        _ => 1e-4,
    }
}

/// Five-point central difference of `loss` along `p`, or `None` when the
/// stencil crosses a change in render structure.
pub fn finite_difference<S: PartialEq>(
    set: &GaussianSet<f64>,
    p: Param,
    h: f64,
    loss: &dyn Fn(&GaussianSet<f64>) -> (f64, S),
) -> Option<f64> {
    let (_, base) = loss(set);
    let mut vals = [0.0; 4];
    for (k, step) in [-2.0, -1.0, 1.0, 2.0].iter().enumerate() {
        let mut s = set.clone();
        *param_mut(&mut s, p) += step * h;
        let (l, st) = loss(&s);
        if st != base {
            return None;
        }
        vals[k] = l;
    }
    Some((vals[0] - 8.0 * vals[1] + 8.0 * vals[2] - vals[3]) / (12.0 * h))
}

/// Outcome of comparing analytic gradients with finite differences.
#[derive(Debug, Default)]
pub struct GradReport {
    pub checked: usize,
    pub skipped: usize,
    pub worst_rel64: f64,
    pub worst_rel32: f64,
}

/// Relative error with a floor for gradients that are zero up to
/// round-off: `|a - b| / max(|b|, floor)`.
pub fn rel_err(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / b.abs().max(floor)
}

pub fn random_image(rng: &mut impl Rng, w: usize, h: usize) -> Image<f64> {
    Image::from_data(w, h, (0..3 * w * h).map(|_| rng.random_range(0.0..1.0)).collect()).unwrap()
}

pub fn random_grid(rng: &mut impl Rng, w: usize, h: usize, lo: f64, hi: f64) -> Grid<f64> {
    Grid::from_data(w, h, (0..w * h).map(|_| rng.random_range(lo..hi)).collect()).unwrap()
}

pub fn render64(set: &GaussianSet<f64>, cam: &Camera<f64>, degree: usize) -> RenderOutput<f64> {
    render_forward(set, cam, &RenderOptions::new(degree))
}

/// Compensated (Neumaier) sum, so finite differences of large sums are not
/// swamped by accumulation error.
pub fn accurate_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}
