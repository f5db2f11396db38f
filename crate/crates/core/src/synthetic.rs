//! A small synthetic scene with known geometry, for end-to-end tests.

use std::sync::Mutex;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::buffer::{Grid, Image};
use crate::ingest::{init_gaussians_from_points, DepthPrior};
use crate::raster::{render_forward, RenderOptions};
use crate::real::logit;
use crate::regularize::{DepthEstimator, EstimateRequest};
use crate::scene::sh::rgb_to_dc;
use crate::scene::{Auto, Camera, Gaussian, GaussianSet, TrainingConfig};
use crate::train::TrainingView;
use crate::Result;

pub const TOY_WIDTH: u32 = 64;
pub const TOY_HEIGHT: u32 = 48;
pub const TOY_POSES: usize = 12;

/// Ground-truth Gaussians, the cameras that see them and the renders.
#[derive(Clone, Debug)]
pub struct SyntheticScene {
    pub gaussians: GaussianSet<f32>,
    pub cameras: Vec<Camera<f32>>,
    pub images: Vec<Image<f32>>,
}

fn hue(t: f32) -> [f32; 3] {
    let t = t.rem_euclid(1.0) * 6.0;
    let f = |k: f32| (1.0 - ((t + k).rem_euclid(6.0) - 3.0).abs().clamp(0.0, 3.0) / 1.5).clamp(0.0, 1.0);
    [0.15 + 0.7 * f(0.0), 0.15 + 0.7 * f(4.0), 0.15 + 0.7 * f(2.0)]
}

fn gaussian(mu: [f32; 3], scale: [f32; 3], rotation: [f32; 4], opacity: f32, rgb: [f32; 3]) -> Gaussian<f32> {
    Gaussian {
        mu,
        log_scale: scale.map(f32::ln),
        rotation,
        opacity_logit: logit(opacity),
        sh: vec![rgb.map(rgb_to_dc)],
    }
}

/// About 200 Gaussians: a checkered back wall, a floor, a sphere shell and
/// loose blobs, seen by [`TOY_POSES`] cameras on a horizontal arc.
pub fn toy_scene(seed: u64) -> SyntheticScene {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut set = GaussianSet::new(0);
    let id = [1.0, 0.0, 0.0, 0.0];
    for iy in 0..6 {
        for ix in 0..9 {
            let x = -3.2 + 0.8 * ix as f32;
            let y = -2.4 + 0.65 * iy as f32;
            let checker = if (ix + iy) % 2 == 0 { 1.0 } else { 0.55 };
            let c = hue(ix as f32 / 9.0 + iy as f32 * 0.07).map(|v| v * checker);
            set.push(gaussian([x, y, 1.6], [0.42, 0.36, 0.04], id, 0.95, c)).expect("degree 0");
        }
    }
    for iz in 0..6 {
        for ix in 0..8 {
            let x = -2.8 + 0.8 * ix as f32;
            let z = -1.4 + 0.55 * iz as f32;
            let shade = 0.35 + 0.5 * ((ix + 2 * iz) % 3) as f32 / 2.0;
            set.push(gaussian([x, 1.0, z], [0.42, 0.04, 0.3], id, 0.9, [shade, shade * 0.8, 0.3]))
                .expect("degree 0");
        }
    }
    let shell = 60;
    let golden = std::f32::consts::PI * (3.0 - 5f32.sqrt());
    for i in 0..shell {
        let y = 1.0 - 2.0 * (i as f32 + 0.5) / shell as f32;
        let r = (1.0 - y * y).sqrt();
        let th = golden * i as f32;
        let n = [r * th.cos(), y, r * th.sin()];
        let mu = [0.65 * n[0], 0.2 + 0.65 * n[1], 0.65 * n[2]];
        let c = hue(0.5 + 0.5 * n[0] + 0.25 * n[1]);
        set.push(gaussian(mu, [0.16; 3], id, 0.9, c)).expect("degree 0");
    }
    for _ in 0..40 {
        let mu = [rng.random_range(-2.2..2.2), rng.random_range(-1.6..0.8), rng.random_range(-1.0..1.2)];
        let scale = [0; 3].map(|_| rng.random_range(0.05f32..0.2));
        let q = [0; 4].map(|_| rng.sample::<f32, _>(StandardNormal));
        let n = q.iter().map(|v| v * v).sum::<f32>().sqrt().max(1e-6);
        let c = hue(rng.random());
        set.push(gaussian(mu, scale, q.map(|v| v / n), rng.random_range(0.6..0.95), c))
            .expect("degree 0");
    }

    let cameras: Vec<Camera<f32>> = (0..TOY_POSES)
        .map(|i| {
            let az = (-50.0 + 100.0 * i as f32 / (TOY_POSES - 1) as f32).to_radians();
            let eye = [4.2 * az.sin(), -0.6 - 0.1 * (i % 3) as f32, -4.2 * az.cos()];
            Camera::look_at(
                i as u32,
                eye,
                [0.0, 0.1, 0.3],
                [0.0, -1.0, 0.0],
                [56.0, 56.0],
                [TOY_WIDTH as f32 / 2.0, TOY_HEIGHT as f32 / 2.0],
                TOY_WIDTH,
                TOY_HEIGHT,
            )
            .expect("valid toy camera")
        })
        .collect();
    let options = RenderOptions::new(0);
    let images = cameras.iter().map(|c| render_forward(&set, c, &options).color).collect();
    SyntheticScene {
        gaussians: set,
        cameras,
        images,
    }
}

impl SyntheticScene {
    /// Sparse, noisy stand-in for an SfM point cloud: a `fraction` of the
    /// true centers jittered by `noise`, colored like their Gaussian.
    pub fn sparse_points(&self, fraction: f64, noise: f32, seed: u64) -> (Vec<[f32; 3]>, Vec<[u8; 3]>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut points = Vec::new();
        let mut colors = Vec::new();
        for i in 0..self.gaussians.len() {
            if !rng.random_bool(fraction) {
                continue;
            }
            let mu = self.gaussians.means[i];
            points.push(mu.map(|v| v + noise * rng.sample::<f32, _>(StandardNormal)));
            let dc = self.gaussians.sh_of(i)[0];
            colors.push(dc.map(|v| ((0.5 + crate::scene::sh::SH_C0 as f32 * v).clamp(0.0, 1.0) * 255.0).round() as u8));
        }
        (points, colors)
    }

    /// Initial Gaussians from [`SyntheticScene::sparse_points`].
    pub fn initial_set(&self, sh_degree: usize, seed: u64) -> Result<GaussianSet<f32>> {
        let (p, c) = self.sparse_points(0.3, 0.05, seed);
        init_gaussians_from_points(&p, &c, 3, sh_degree)
    }

    /// Training views for `indices` with priors from `oracle`.
    pub fn views(&self, indices: &[usize], oracle: &SyntheticOracle) -> Result<Vec<TrainingView>> {
        indices
            .iter()
            .map(|&i| {
                let camera = self.cameras[i].clone();
                let image = self.images[i].clone();
                let prior = oracle.estimate(&EstimateRequest {
                    image: &image,
                    camera: &camera,
                    name: None,
                })?;
                Ok(TrainingView {
                    name: format!("toy_{i:02}"),
                    camera,
                    image,
                    prior: Some(prior),
                })
            })
            .collect()
    }
}

/// Depth estimator that renders the true disparity of a known scene from
/// the requested camera, under a positive affine map plus optional noise.
/// Pixels with coverage below one half are marked invalid.
pub struct SyntheticOracle {
    scene: GaussianSet<f32>,
    pub scale: f32,
    pub shift: f32,
    /// Standard deviation of additive noise, relative to the mean disparity.
    pub noise: f32,
    rng: Mutex<ChaCha8Rng>,
}

impl SyntheticOracle {
    pub fn new(scene: GaussianSet<f32>, scale: f32, shift: f32, noise: f32, seed: u64) -> Self {
        Self {
            scene,
            scale,
            shift,
            noise,
            rng: Mutex::new(ChaCha8Rng::seed_from_u64(seed)),
        }
    }

    /// True disparity (`0` where uncovered).
    pub fn disparity(&self, camera: &Camera<f32>) -> Grid<f32> {
        let out = render_forward(&self.scene, camera, &RenderOptions::new(0));
        let data = out
            .depth
            .data
            .iter()
            .zip(&out.alpha.data)
            .map(|(&d, &a)| if a >= 0.5 && d > 0.0 { a / d } else { 0.0 })
            .collect();
        Grid {
            width: out.depth.width,
            height: out.depth.height,
            data,
        }
    }
}

impl DepthEstimator for SyntheticOracle {
    fn estimate(&self, request: &EstimateRequest<'_>) -> Result<DepthPrior> {
        let mut disp = self.disparity(request.camera);
        let valid: Vec<bool> = disp.data.iter().map(|&v| v > 0.0).collect();
        let mean = {
            let (s, n) = disp.data.iter().filter(|v| **v > 0.0).fold((0.0f64, 0usize), |(s, n), &v| (s + f64::from(v), n + 1));
            if n > 0 { (s / n as f64) as f32 } else { 0.0 }
        };
        let mut rng = self.rng.lock().expect("oracle rng poisoned");
        for (v, ok) in disp.data.iter_mut().zip(valid) {
            *v = if ok {
                let noise = if self.noise > 0.0 {
                    self.noise * mean * rng.sample::<f32, _>(StandardNormal)
                } else {
                    0.0
                };
                (self.scale * *v + self.shift + noise).max(f32::MIN_POSITIVE)
            } else {
                f32::NAN
            };
        }
        Ok(DepthPrior::new(disp))
    }
}

/// Schedule for the toy scene: the default one compressed to 2000
/// iterations, with SH degree 1 and the size and gradient thresholds scaled
/// to the toy's units and resolution.
pub fn toy_config() -> TrainingConfig {
    TrainingConfig {
        total_iters: 2000,
        densify_from: 300,
        densify_interval: 100,
        densify_until: 1500,
        pseudo_from: 800,
        opacity_reset_iters: vec![1000],
        sh_degree_max: 1,
        t_prox: 0.25,
        t_pos: 0.005,
        max_world_scale: 0.25,
        scene_extent: Auto::Auto,
        ..TrainingConfig::default()
    }
}
