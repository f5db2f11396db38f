//! Acceptance criteria, one `PASS`/`FAIL` line each.
//!
//! Runs without the libtest harness so the summary lines always reach the
//! console. Pass criterion numbers as arguments to run a subset, e.g.
//! `cargo test --test acceptance -- 3 5`.

mod common;

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use common::*;
use sparse_splat::buffer::{Grid, Image};
use sparse_splat::densify::{build_proximity_graph, gaussian_unpool};
use sparse_splat::ingest::{
    encode_pfm, import_ply, load_depth_prior, parse_colmap_model, write_ply, CameraModel, DepthPrior, Intrinsics,
    ModelFormat, SfmImage, SfmModel, SfmPoint,
};
use sparse_splat::metrics::psnr;
use sparse_splat::raster::{render_forward, RenderOptions, RenderOutput};
use sparse_splat::regularize::{depth_regularization_loss, DepthEstimator, EstimateRequest, pearson_correlation, DepthLossOptions};
use sparse_splat::scene::{Camera, Gaussian, GaussianSet, TrainingConfig};
use sparse_splat::synthetic::{toy_config, toy_scene, SyntheticOracle, SyntheticScene};
use sparse_splat::train::{evaluate_view, ObjectiveWeights, TrainEvent, Trainer};

// Tolerances and budgets.
const GRAD_REL_F64: f64 = 1e-6;
const GRAD_REL_F32: f64 = 1e-3;
const GRAD_SCENES: u64 = 24;
const GRAD_BUDGET_S: f64 = 120.0;
const KNN_SETS: usize = 200;
const KNN_MAX_N: usize = 5000;
const KNN_BUDGET_S: f64 = 60.0;
const PEARSON_GRIDS: u64 = 1000;
const PEARSON_TOL: f64 = 1e-6;
const TOY_SEEDS: u64 = 5;
const TOY_TRAIN_VIEWS: [usize; 3] = [1, 5, 10];
const TOY_MIN_GAIN_DB: f64 = 5.0;
const TOY_MIN_WINS: usize = 4;
const TOY_BUDGET_S: f64 = 600.0;
const RESET_OPACITY_TOL: f64 = 1e-6;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

type Criterion = (u32, &'static str, fn() -> Outcome);

const CRITERIA: [Criterion; 9] = [
    (1, "gradient oracle", gradient_oracle),
    (2, "blending invariants", blending_invariants),
    (3, "proximity oracle", proximity_oracle),
    (4, "unpooling correctness", unpooling_correctness),
    (5, "pearson properties", pearson_properties),
    (6, "toy reconstruction", toy_reconstruction),
    (7, "determinism", determinism),
    (8, "format round trips", format_round_trips),
    (9, "schedule conformance", schedule_conformance),
];

fn main() -> ExitCode {
    let wanted: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (id, name, check) in CRITERIA {
        if !wanted.is_empty() && !wanted.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let out = std::panic::catch_unwind(check).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Outcome::new(false, format!("panicked: {msg}"))
        });
        let verdict = if out.pass { "PASS" } else { "FAIL" };
        println!(
            "[{verdict}] criterion {id} ({name}): {} [{:.1}s]",
            out.detail,
            start.elapsed().as_secs_f64()
        );
        failed += usize::from(!out.pass);
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}

// ---------------------------------------------------------------------------
// 1. Analytic gradients of the training objective against finite differences
// of an independently computed loss.

const C1: f64 = 0.01 * 0.01;
const C2: f64 = 0.03 * 0.03;
const LAMBDA_L1: f64 = 0.8;
const LAMBDA_DSSIM: f64 = 0.2;
const LAMBDA_DEPTH: f64 = 0.5;

/// Mean SSIM from direct 2D windows, truncated at the border and
/// renormalized over the in-bounds taps.
fn oracle_ssim(a: &Image<f64>, b: &Image<f64>) -> f64 {
    let (w, h) = (a.width as isize, a.height as isize);
    let g: [f64; 11] = std::array::from_fn(|k| {
        let x = k as f64 - 5.0;
        (-x * x / (2.0 * 1.5 * 1.5)).exp()
    });
    let mut values = Vec::with_capacity(a.data.len());
    for ch in 0..3 {
        for y in 0..h {
            for x in 0..w {
                let (mut sw, mut sx, mut sy, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
                for dy in -5..=5isize {
                    for dx in -5..=5isize {
                        let (u, v) = (x + dx, y + dy);
                        if u < 0 || v < 0 || u >= w || v >= h {
                            continue;
                        }
                        let wt = g[(dx + 5) as usize] * g[(dy + 5) as usize];
                        let p = 3 * (v * w + u) as usize + ch;
                        let (pa, pb) = (a.data[p], b.data[p]);
                        sw += wt;
                        sx += wt * pa;
                        sy += wt * pb;
                        sxx += wt * pa * pa;
                        syy += wt * pb * pb;
                        sxy += wt * pa * pb;
                    }
                }
                let (mx, my) = (sx / sw, sy / sw);
                let vx = sxx / sw - mx * mx;
                let vy = syy / sw - my * my;
                let cxy = sxy / sw - mx * my;
                values.push(((2.0 * mx * my + C1) * (2.0 * cxy + C2)) / ((mx * mx + my * my + C1) * (vx + vy + C2)));
            }
        }
    }
    accurate_sum(values.iter().copied()) / values.len() as f64
}

/// Two-pass population Pearson correlation over the masked pixels.
fn oracle_pearson(a: &[f64], b: &[f64], mask: &[bool]) -> Option<f64> {
    let idx: Vec<usize> = (0..a.len()).filter(|&i| mask[i]).collect();
    if idx.len() < 2 {
        return None;
    }
    let n = idx.len() as f64;
    let ma = accurate_sum(idx.iter().map(|&i| a[i])) / n;
    let mb = accurate_sum(idx.iter().map(|&i| b[i])) / n;
    let saa = accurate_sum(idx.iter().map(|&i| (a[i] - ma).powi(2)));
    let sbb = accurate_sum(idx.iter().map(|&i| (b[i] - mb).powi(2)));
    let sab = accurate_sum(idx.iter().map(|&i| (a[i] - ma) * (b[i] - mb)));
    (saa > 0.0 && sbb > 0.0).then(|| (sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

/// Rendered depth fed to the correlation, its disparity and the joint mask.
fn oracle_depth_inputs(out: &RenderOutput<f64>, prior: &DepthPrior, normalize: bool) -> (Vec<f64>, Vec<bool>) {
    let n = out.depth.data.len();
    let mut disp = vec![0.0; n];
    let mut mask = vec![false; n];
    for i in 0..n {
        let a = out.alpha.data[i];
        let d = if normalize {
            if a > 0.0 {
                out.depth.data[i] / a
            } else {
                0.0
            }
        } else {
            out.depth.data[i]
        };
        disp[i] = 1.0 / (d + 1e-6);
        mask[i] = prior.mask[i] && a >= 0.5;
    }
    (disp, mask)
}

#[derive(PartialEq)]
struct Signature {
    blend: Structure,
    l1_signs: Vec<i8>,
    depth_mask: Vec<bool>,
}

fn oracle_objective(
    set: &GaussianSet<f64>,
    cam: &Camera<f64>,
    degree: usize,
    target: &Image<f64>,
    prior: &DepthPrior,
    normalize: bool,
) -> (f64, Signature) {
    let out = render_forward(set, cam, &RenderOptions::new(degree));
    let n = out.color.data.len() as f64;
    let l1 = accurate_sum(out.color.data.iter().zip(&target.data).map(|(p, g)| (p - g).abs())) / n;
    let l1_signs = out
        .color
        .data
        .iter()
        .zip(&target.data)
        .map(|(p, g)| (p - g).partial_cmp(&0.0).map_or(0, |o| o as i8))
        .collect();
    let dssim = 1.0 - oracle_ssim(&out.color, target);
    let prior_values: Vec<f64> = prior.values.data.iter().map(|&v| f64::from(v)).collect();
    let (disp, mask) = oracle_depth_inputs(&out, prior, normalize);
    let depth = oracle_pearson(&disp, &prior_values, &mask).map_or(0.0, |r| 1.0 - r);
    let loss = LAMBDA_L1 * l1 + LAMBDA_DSSIM * dssim + LAMBDA_DEPTH * depth;
    let sig = Signature {
        blend: structure(&out),
        l1_signs,
        depth_mask: mask,
    };
    (loss, sig)
}

fn objective_weights(normalize: bool) -> ObjectiveWeights {
    let cfg = TrainingConfig {
        lambda_l1: LAMBDA_L1,
        lambda_dssim: LAMBDA_DSSIM,
        lambda_depth: LAMBDA_DEPTH,
        normalize_depth: normalize,
        ..TrainingConfig::default()
    };
    ObjectiveWeights::training(&cfg)
}

/// Target at a random offset of at least 0.05 from the render, so no L1
/// term changes sign within a finite-difference stencil.
fn offset_target(rng: &mut impl Rng, render: &Image<f64>) -> Image<f64> {
    let data = render
        .data
        .iter()
        .map(|&p| {
            let m = rng.random_range(0.05..0.45);
            let up = if rng.random_bool(0.5) { p + m } else { p - m };
            if (0.0..=1.0).contains(&up) {
                up
            } else {
                2.0 * p - up
            }
        })
        .collect();
    Image::from_data(render.width, render.height, data).unwrap()
}

/// A positive disparity prior, invalid on some random pixels and wherever
/// coverage sits within 0.02 of the alpha gate.
fn random_prior(rng: &mut impl Rng, alpha: &Grid<f64>) -> DepthPrior {
    let data = alpha
        .data
        .iter()
        .map(|&a| {
            if rng.random_bool(0.1) || (a - 0.5).abs() < 0.02 {
                f32::NAN
            } else {
                rng.random_range(0.2f32..0.35)
            }
        })
        .collect();
    DepthPrior::new(Grid::from_data(alpha.width, alpha.height, data).unwrap())
}

fn gradient_scene(seed: u64) -> GradReport {
    let n = 4 + (seed % 7) as usize;
    let size = [32u32, 28, 24][(seed % 3) as usize];
    let degree = (seed % 4) as usize;
    let normalize = seed % 2 == 1;
    let (set, cam) = random_scene(1000 + seed, n, size, degree);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let base = render64(&set, &cam, degree);
    let target = offset_target(&mut rng, &base.color);
    let prior = random_prior(&mut rng, &base.alpha);
    let weights = objective_weights(normalize);

    let g64 = evaluate_view(&set, &cam, &RenderOptions::new(degree), Some(&target), Some(&prior), &weights, true)
        .unwrap()
        .grads
        .unwrap();
    let set32 = set.cast::<f32>();
    let target32 = target.cast::<f32>();
    let g32 = evaluate_view(
        &set32,
        &cam.cast::<f32>(),
        &RenderOptions::new(degree),
        Some(&target32),
        Some(&prior),
        &weights,
        true,
    )
    .unwrap()
    .grads
    .unwrap();

    let loss = |s: &GaussianSet<f64>| oracle_objective(s, &cam, degree, &target, &prior, normalize);
    let params = all_params(&set);
    let fds: Vec<Option<f64>> = params.iter().map(|&p| finite_difference(&set, p, step_for(p), &loss)).collect();
    let scale = fds.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut rep = GradReport::default();
    for (p, fd) in params.iter().zip(&fds) {
        let Some(fd) = *fd else {
            rep.skipped += 1;
            continue;
        };
        rep.checked += 1;
        rep.worst_rel64 = rep.worst_rel64.max(rel_err(grad_of(&g64, *p), fd, GRAD_REL_F64 * scale));
        rep.worst_rel32 = rep.worst_rel32.max(rel_err(grad_of(&g32, *p), fd, GRAD_REL_F32 * scale));
    }
    rep
}

fn gradient_oracle() -> Outcome {
    let start = Instant::now();
    let (mut checked, mut skipped) = (0, 0);
    let (mut worst64, mut worst32) = (0.0f64, 0.0f64);
    let mut bad_scenes = Vec::new();
    for seed in 0..GRAD_SCENES {
        let rep = gradient_scene(seed);
        checked += rep.checked;
        skipped += rep.skipped;
        worst64 = worst64.max(rep.worst_rel64);
        worst32 = worst32.max(rep.worst_rel32);
        // a scene is only evidence if nearly all stencils were smooth
        if rep.checked == 0 || rep.skipped * 10 > rep.checked {
            bad_scenes.push(seed);
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = worst64 <= GRAD_REL_F64 && worst32 <= GRAD_REL_F32 && bad_scenes.is_empty() && secs < GRAD_BUDGET_S;
    Outcome::new(
        pass,
        format!(
            "{GRAD_SCENES} scenes, {checked} gradients checked ({skipped} stencils crossed a discontinuity), \
             worst relative error 64-bit {worst64:.2e} (<= {GRAD_REL_F64:e}), 32-bit {worst32:.2e} \
             (<= {GRAD_REL_F32:e}), {secs:.1}s (< {GRAD_BUDGET_S}s){}",
            if bad_scenes.is_empty() {
                String::new()
            } else {
                format!(", under-sampled scenes {bad_scenes:?}")
            }
        ),
    )
}

// ---------------------------------------------------------------------------
// 2. Blending invariants.

/// Front-to-back blend of one pixel over every visible Gaussian whose tile
/// rectangle covers it, in (depth, index) order.
fn oracle_blend(out: &RenderOutput<f64>, x: usize, y: usize) -> ([f64; 3], f64, f64) {
    let (tx, ty) = ((x / 16) as u32, (y / 16) as u32);
    let mut list: Vec<(f64, usize)> = out
        .projected
        .iter()
        .enumerate()
        .filter_map(|(i, p)| p.as_ref().map(|p| (p, i)))
        .filter(|(p, _)| {
            let [x0, y0, x1, y1] = p.tile_rect;
            tx >= x0 && tx < x1 && ty >= y0 && ty < y1
        })
        .map(|(p, i)| (p.z, i))
        .collect();
    list.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
    let mut trans = 1.0;
    let mut color = [0.0; 3];
    let mut weight = 0.0;
    for (_, i) in list {
        let g = out.projected[i].as_ref().unwrap();
        let (dx, dy) = (g.mean2d[0] - px, g.mean2d[1] - py);
        let [a, b, c] = g.conic;
        let power = -0.5 * (a * dx * dx + c * dy * dy) - b * dx * dy;
        if power > 0.0 {
            continue;
        }
        let alpha = (g.opacity * power.exp()).min(0.99);
        if alpha < 1.0 / 255.0 {
            continue;
        }
        let next = trans * (1.0 - alpha);
        if next < 1e-4 {
            break;
        }
        for ch in 0..3 {
            color[ch] += g.color[ch] * alpha * trans;
        }
        weight += alpha * trans;
        trans = next;
    }
    (color, weight, trans)
}

fn on_axis_camera(size: u32) -> Camera<f64> {
    // principal point on the center of the middle pixel
    let c = (size / 2) as f64 + 0.5;
    Camera::look_at(0, [0.0; 3], [0.0, 0.0, 1.0], [0.0, -1.0, 0.0], [50.0, 50.0], [c, c], size, size).unwrap()
}

fn flat_gaussian(z: f64, opacity_logit: f64, gray: f64) -> Gaussian<f64> {
    Gaussian {
        mu: [0.0, 0.0, z],
        log_scale: [0.05f64.ln(); 3],
        rotation: [1.0, 0.0, 0.0, 0.0],
        opacity_logit,
        sh: vec![[(gray - 0.5) / SH_C0; 3]],
    }
}

fn blending_invariants() -> Outcome {
    let mut failures = Vec::new();

    // accumulated weight, checked against a re-blend
    let mut worst_weight = 0.0f64;
    let mut out_of_range = 0;
    for seed in 0..20 {
        let (set, cam) = random_scene(2000 + seed, 6 + 2 * seed as usize, 32, 1);
        let out = render64(&set, &cam, 1);
        for y in 0..32 {
            for x in 0..32 {
                let p = y * 32 + x;
                let (color, weight, trans) = oracle_blend(&out, x, y);
                let a = out.alpha.data[p];
                if !(0.0..=1.0).contains(&a) {
                    out_of_range += 1;
                }
                worst_weight = worst_weight
                    .max((a - weight).abs())
                    .max((out.final_transmittance.data[p] - trans).abs());
                for ch in 0..3 {
                    worst_weight = worst_weight.max((out.color.data[3 * p + ch] - color[ch]).abs());
                }
            }
        }
    }
    if out_of_range > 0 || worst_weight > 1e-12 {
        failures.push(format!("weights: {out_of_range} out of [0,1], worst re-blend gap {worst_weight:e}"));
    }

    // permutation invariance, both precisions
    let mut permuted_differs = 0;
    for seed in 0..10 {
        let (set, cam) = random_scene(3000 + seed, 12, 32, 2);
        let mut order: Vec<usize> = (0..set.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let shuffled = set.select(&order);
        let same64 = {
            let (a, b) = (render64(&set, &cam, 2), render64(&shuffled, &cam, 2));
            a.color == b.color && a.depth == b.depth && a.alpha == b.alpha
        };
        let same32 = {
            let opts = RenderOptions::new(2);
            let cam32 = cam.cast::<f32>();
            let a = render_forward(&set.cast::<f32>(), &cam32, &opts);
            let b = render_forward(&shuffled.cast::<f32>(), &cam32, &opts);
            a.color == b.color && a.depth == b.depth && a.alpha == b.alpha
        };
        permuted_differs += usize::from(!(same64 && same32));
    }
    if permuted_differs > 0 {
        failures.push(format!("{permuted_differs} permuted scenes rendered differently"));
    }

    // two coincident Gaussians, alpha 0.5 each, white in front of black
    let cam = on_axis_camera(17);
    let mut two = GaussianSet::new(0);
    two.push(flat_gaussian(2.0, 0.0, 1.0)).unwrap();
    two.push(flat_gaussian(4.0, 0.0, 0.0)).unwrap();
    let out = render64(&two, &cam, 0);
    let center = 8 * 17 + 8;
    let color = &out.color.data[3 * center..3 * center + 3];
    let depth = out.depth.data[center];
    if color.iter().any(|&c| (c - 0.5).abs() > 1e-12) || (depth - 2.0).abs() > 1e-12 {
        failures.push(format!("two-Gaussian blend gave color {color:?}, depth {depth}"));
    }

    // one nearly opaque white Gaussian
    let mut one = GaussianSet::new(0);
    one.push(flat_gaussian(3.0, 20.0, 1.0)).unwrap();
    let out = render64(&one, &cam, 0);
    let color = &out.color.data[3 * center..3 * center + 3];
    let (d, a) = (out.depth.data[center], out.alpha.data[center]);
    if color.iter().any(|&c| (c - 0.99).abs() > 1e-9) || (d - 0.99 * 3.0).abs() > 1e-9 || (d / a - 3.0).abs() > 1e-4 {
        failures.push(format!("single Gaussian gave color {color:?}, depth {d}, alpha {a}"));
    }

    // empty set
    let out = render64(&GaussianSet::new(0), &cam, 0);
    if out.color.data.iter().chain(&out.depth.data).chain(&out.alpha.data).any(|&v| v != 0.0) {
        failures.push("empty set is not black".into());
    }

    let pass = failures.is_empty();
    Outcome::new(
        pass,
        if pass {
            format!(
                "weights match a re-blend within {worst_weight:.1e} and lie in [0,1] on 20 scenes; \
                 10 permuted scenes bit-identical in f32 and f64; two-Gaussian color 0.5 / depth 2.0; \
                 single and empty renders as expected"
            )
        } else {
            failures.join("; ")
        },
    )
}

// ---------------------------------------------------------------------------
// 3. Proximity graph against brute force.

/// For every point, its `k` nearest others by (squared distance, index).
fn brute_force_knn(points: &[[f32; 3]], k: usize) -> Vec<Vec<(usize, f32)>> {
    points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let mut best: Vec<(f32, usize)> = Vec::with_capacity(k + 1);
            for (j, q) in points.iter().enumerate() {
                if i == j {
                    continue;
                }
                let (dx, dy, dz) = (p[0] - q[0], p[1] - q[1], p[2] - q[2]);
                let d2 = dx * dx + dy * dy + dz * dz;
                let cand = (d2, j);
                if best.len() == k && cand >= best[k - 1] {
                    continue;
                }
                let at = best.partition_point(|b| *b < cand);
                best.insert(at, cand);
                best.truncate(k);
            }
            best.into_iter().map(|(d2, j)| (j, d2.sqrt())).collect()
        })
        .collect()
}

fn point_set(points: &[[f32; 3]]) -> GaussianSet<f32> {
    let mut set = GaussianSet::new(0);
    for &mu in points {
        set.push(Gaussian {
            mu,
            log_scale: [0.0; 3],
            rotation: [1.0, 0.0, 0.0, 0.0],
            opacity_logit: 0.0,
            sh: vec![[0.0; 3]],
        })
        .unwrap();
    }
    set
}

fn proximity_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut mismatches = Vec::new();
    let mut total_points = 0;
    let mut tie_sets = 0;
    for s in 0..KNN_SETS {
        // sizes spread geometrically from 6 to the maximum
        let n = (6.0 * (KNN_MAX_N as f64 / 6.0).powf(s as f64 / (KNN_SETS - 1) as f64)).round() as usize;
        let k = 1 + s % 5;
        let gridded = s % 4 == 0;
        tie_sets += usize::from(gridded);
        let points: Vec<[f32; 3]> = (0..n)
            .map(|_| {
                if gridded {
                    // small integer lattice: many exact distance ties and duplicates
                    [0; 3].map(|_| rng.random_range(0..6) as f32)
                } else {
                    [0; 3].map(|_| rng.random_range(-10.0f32..10.0))
                }
            })
            .collect();
        total_points += n;
        let graph = build_proximity_graph(&point_set(&points), k).unwrap();
        let oracle = brute_force_knn(&points, k);
        for (i, want) in oracle.iter().enumerate() {
            let idx: Vec<usize> = want.iter().map(|w| w.0).collect();
            let dist: Vec<f32> = want.iter().map(|w| w.1).collect();
            let score = dist.iter().sum::<f32>() / k as f32;
            if graph.neighbors(i) != idx.as_slice() || graph.distances(i) != dist.as_slice() || graph.scores()[i] != score {
                mismatches.push(format!("set {s} (n {n}, k {k}) point {i}"));
                break;
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = mismatches.is_empty() && secs < KNN_BUDGET_S;
    Outcome::new(
        pass,
        format!(
            "{KNN_SETS} sets ({tie_sets} on a tie-heavy lattice), sizes 6..={KNN_MAX_N}, {total_points} points, \
             {} mismatched sets, {secs:.1}s (< {KNN_BUDGET_S}s){}",
            mismatches.len(),
            mismatches.first().map(|m| format!(", first: {m}")).unwrap_or_default()
        ),
    )
}

// ---------------------------------------------------------------------------
// 4. Unpooling on hand-enumerated fixtures.

/// Gaussian `i` of a fixture: every attribute distinct per index.
fn tagged_gaussian(i: usize, mu: [f64; 3]) -> Gaussian<f64> {
    let t = i as f64;
    Gaussian {
        mu,
        log_scale: [-1.0 - 0.1 * t, -1.5 - 0.1 * t, -2.0 - 0.1 * t],
        rotation: [0.9, 0.1 * t, -0.2, 0.3],
        opacity_logit: -0.5 + 0.25 * t,
        sh: (0..4).map(|c| [t + 1.0, c as f64, -t]).collect(),
    }
}

fn tagged_set(points: &[[f64; 3]]) -> GaussianSet<f64> {
    let mut set = GaussianSet::new(1);
    for (i, &p) in points.iter().enumerate() {
        set.push(tagged_gaussian(i, p)).unwrap();
    }
    set
}

/// Unpool and compare with expected `(midpoint, destination)` pairs, in order.
fn check_unpool(name: &str, points: &[[f64; 3]], k: usize, t_prox: f64, expect: &[([f64; 3], usize)]) -> Option<String> {
    let before = tagged_set(points);
    let mut set = before.clone();
    let graph = build_proximity_graph(&set, k).unwrap();
    gaussian_unpool(&mut set, &graph, t_prox).unwrap();
    let n = before.len();
    if set.len() != n + expect.len() {
        return Some(format!("{name}: {} new Gaussians, expected {}", set.len() - n, expect.len()));
    }
    for i in 0..n {
        if set.get(i) != before.get(i) {
            return Some(format!("{name}: original {i} changed"));
        }
    }
    for (m, &(mid, dst)) in expect.iter().enumerate() {
        let g = set.get(n + m);
        let d = before.get(dst);
        let ok = g.mu == mid
            && g.log_scale.map(f64::to_bits) == d.log_scale.map(f64::to_bits)
            && g.opacity_logit.to_bits() == d.opacity_logit.to_bits()
            && g.rotation == [1.0, 0.0, 0.0, 0.0]
            && g.sh.iter().flatten().all(|&v| v == 0.0);
        if !ok {
            return Some(format!("{name}: new Gaussian {m} is {g:?}, expected midpoint {mid:?} from {dst}"));
        }
    }
    None
}

/// Deduplicated eligible edges by exhaustive enumeration.
fn brute_force_unpool_count(points: &[[f32; 3]], k: usize, t_prox: f32) -> usize {
    let knn = brute_force_knn(points, k);
    let score: Vec<f32> = knn.iter().map(|l| l.iter().map(|e| e.1).sum::<f32>() / k as f32).collect();
    let mut edges = std::collections::BTreeSet::new();
    for (i, list) in knn.iter().enumerate() {
        if score[i] > t_prox {
            for &(j, _) in list {
                edges.insert((i.min(j), i.max(j)));
            }
        }
    }
    edges.len()
}

fn unpooling_correctness() -> Outcome {
    let mut failures = Vec::new();
    let pair = [[0.0, 0.0, 0.0], [4.0, 0.0, 0.0]];
    failures.extend(check_unpool("pair", &pair, 1, 3.0, &[([2.0, 0.0, 0.0], 1)]));
    let triple = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0]];
    // scores 1.5, 1, 1.5: ends are eligible, 0 -> 2 and 2 -> 0 merge
    failures.extend(check_unpool(
        "collinear triple",
        &triple,
        2,
        1.2,
        &[([0.5, 0.0, 0.0], 1), ([1.0, 0.0, 0.0], 2), ([1.5, 0.0, 0.0], 1)],
    ));
    let square = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 1.0, 0.0]];
    // complete digraph; each undirected edge kept from its lower end, the
    // two diagonals meet at the center
    failures.extend(check_unpool(
        "unit square",
        &square,
        3,
        1.0,
        &[
            ([0.5, 0.0, 0.0], 1),
            ([0.0, 0.5, 0.0], 2),
            ([0.5, 0.5, 0.0], 3),
            ([1.0, 0.5, 0.0], 3),
            ([0.5, 0.5, 0.0], 2),
            ([0.5, 1.0, 0.0], 3),
        ],
    ));
    failures.extend(check_unpool("unit square, infinite threshold", &square, 3, f64::INFINITY, &[]));

    // counts on random small sets
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut count_mismatch = 0;
    for s in 0..100 {
        let n = rng.random_range(3..40);
        let k = rng.random_range(1..n.min(6));
        let points: Vec<[f32; 3]> = (0..n).map(|_| [0; 3].map(|_| rng.random_range(0.0f32..4.0))).collect();
        let mut set = point_set(&points);
        let graph = build_proximity_graph(&set, k).unwrap();
        let mut sorted = graph.scores().to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let t = sorted[s % n];
        gaussian_unpool(&mut set, &graph, t).unwrap();
        if set.len() - n != brute_force_unpool_count(&points, k, t) {
            count_mismatch += 1;
        }
    }
    if count_mismatch > 0 {
        failures.push(format!("{count_mismatch} random sets with the wrong unpool count"));
    }
    let pass = failures.is_empty();
    Outcome::new(
        pass,
        if pass {
            "pair 1, collinear triple 3, unit square 6 new Gaussians with exact midpoints and inherited \
             attributes, originals untouched, infinite threshold a no-op; counts match enumeration on 100 random sets"
                .to_string()
        } else {
            failures.join("; ")
        },
    )
}

// ---------------------------------------------------------------------------
// 5. Pearson correlation and the depth loss.

fn pearson_properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst_corr = 0.0f64;
    let mut worst_loss = 0.0f64;
    let mut skipped = 0;
    for _ in 0..PEARSON_GRIDS {
        let (w, h) = (rng.random_range(2..24), rng.random_range(2..24));
        let n = w * h;
        let a = Grid::from_data(w, h, (0..n).map(|_| rng.random_range(-5.0f64..5.0)).collect()).unwrap();
        let keep = rng.random_range(0.3..1.0);
        let mut mask: Vec<bool> = (0..n).map(|_| rng.random_bool(keep)).collect();
        mask[0] = true;
        mask[n - 1] = true;
        let alpha: f64 = rng.random_range(0.01..100.0) * if rng.random_bool(0.5) { -1.0 } else { 1.0 };
        let beta: f64 = rng.random_range(-100.0..100.0);
        let b = Grid::from_data(w, h, a.data.iter().map(|v| alpha * v + beta).collect()).unwrap();
        match pearson_correlation(&a, &b, &mask).unwrap() {
            Some(r) => worst_corr = worst_corr.max((r - alpha.signum()).abs()),
            None => skipped += 1,
        }

        // depth loss with the prior rescaled by a positive affine map
        let depth = Grid::from_data(w, h, (0..n).map(|_| rng.random_range(1.0f64..6.0)).collect()).unwrap();
        let cover = Grid::from_data(w, h, (0..n).map(|_| rng.random_range(0.3f64..1.0)).collect()).unwrap();
        let base: Vec<f32> = (0..n)
            .map(|i| if mask[i] { rng.random_range(0.5f32..2.0) } else { f32::NAN })
            .collect();
        let scale = rng.random_range(0.25f32..4.0);
        let shift = rng.random_range(-0.2f32..1.0) * scale;
        let moved: Vec<f32> = base.iter().map(|&v| scale * v + shift).collect();
        let p0 = DepthPrior::new(Grid::from_data(w, h, base).unwrap());
        let p1 = DepthPrior::new(Grid::from_data(w, h, moved).unwrap());
        let opts = DepthLossOptions::default();
        let l0 = depth_regularization_loss(&depth, &cover, &p0, &opts).unwrap();
        let l1 = depth_regularization_loss(&depth, &cover, &p1, &opts).unwrap();
        if l0.degenerate != l1.degenerate {
            worst_loss = f64::INFINITY;
        }
        worst_loss = worst_loss.max((l0.loss - l1.loss).abs());
    }
    let pass = worst_corr <= PEARSON_TOL && worst_loss <= PEARSON_TOL && skipped == 0;
    Outcome::new(
        pass,
        format!(
            "{PEARSON_GRIDS} masked grids: max |corr(a, αa+β) - sign(α)| {worst_corr:.1e}, max depth-loss change \
             under positive affine prior rescaling {worst_loss:.1e} (both <= {PEARSON_TOL:e}), {skipped} degenerate"
        ),
    )
}

// ---------------------------------------------------------------------------
// 6. End-to-end reconstruction of the toy scene from three views.

fn heldout_psnr(set: &GaussianSet<f32>, scene: &SyntheticScene, degree: usize) -> f64 {
    let held: Vec<usize> = (0..scene.cameras.len()).filter(|i| !TOY_TRAIN_VIEWS.contains(i)).collect();
    let total: f64 = held
        .iter()
        .map(|&i| {
            let out = render_forward(set, &scene.cameras[i], &RenderOptions::new(degree));
            psnr(&out.color, &scene.images[i]).unwrap()
        })
        .sum();
    total / held.len() as f64
}

struct ToyRun {
    initial: f64,
    trained: f64,
    gaussians: usize,
    secs: f64,
}

fn toy_run(scene: &SyntheticScene, seed: u64, full: bool) -> ToyRun {
    let mut cfg = toy_config();
    cfg.seed = seed;
    if !full {
        cfg.enable_unpool = false;
        cfg.lambda_depth = 0.0;
        cfg.enable_pseudo = false;
    }
    let oracle = SyntheticOracle::new(scene.gaussians.clone(), 2.0, 0.3, 0.0, seed);
    let views = scene.views(&TOY_TRAIN_VIEWS, &oracle).unwrap();
    let initial_set = scene.initial_set(cfg.sh_degree_max, seed).unwrap();
    let initial = heldout_psnr(&initial_set, scene, cfg.sh_degree_max);
    let start = Instant::now();
    let degree = cfg.sh_degree_max;
    let mut trainer = Trainer::new(cfg, views, initial_set, Some(&oracle)).unwrap();
    trainer.run().unwrap();
    let secs = start.elapsed().as_secs_f64();
    ToyRun {
        initial,
        trained: heldout_psnr(trainer.set(), scene, degree),
        gaussians: trainer.set().len(),
        secs,
    }
}

fn toy_reconstruction() -> Outcome {
    let scene = toy_scene(0);
    let mut lines = Vec::new();
    let (mut wins, mut gains_ok, mut budget_ok) = (0, true, true);
    for seed in 0..TOY_SEEDS {
        let full = toy_run(&scene, seed, true);
        let base = toy_run(&scene, seed, false);
        wins += usize::from(full.trained > base.trained);
        gains_ok &= full.trained - full.initial >= TOY_MIN_GAIN_DB;
        budget_ok &= full.secs <= TOY_BUDGET_S && base.secs <= TOY_BUDGET_S;
        let line = format!(
            "seed {seed}: {:.2} -> full {:.2} dB ({} Gaussians, {:.0}s) vs ablated {:.2} dB ({} Gaussians, {:.0}s)",
            full.initial, full.trained, full.gaussians, full.secs, base.trained, base.gaussians, base.secs
        );
        eprintln!("  {line}");
        lines.push(line);
    }
    let pass = gains_ok && wins >= TOY_MIN_WINS && budget_ok;
    Outcome::new(
        pass,
        format!(
            "held-out gain >= {TOY_MIN_GAIN_DB} dB on every seed: {gains_ok}; full beats ablated on {wins}/{TOY_SEEDS} \
             seeds (need {TOY_MIN_WINS}); every run <= {TOY_BUDGET_S}s: {budget_ok}; {}",
            lines.join("; ")
        ),
    )
}

// ---------------------------------------------------------------------------
// 7. Determinism of a full training run.

fn short_toy_ply(scene: &SyntheticScene) -> Vec<u8> {
    let cfg = TrainingConfig {
        total_iters: 600,
        densify_from: 100,
        densify_interval: 50,
        densify_until: 500,
        pseudo_from: 200,
        opacity_reset_iters: vec![300],
        seed: 21,
        ..toy_config()
    };
    let oracle = SyntheticOracle::new(scene.gaussians.clone(), 2.0, 0.3, 0.01, 21);
    let views = scene.views(&TOY_TRAIN_VIEWS, &oracle).unwrap();
    let initial = scene.initial_set(cfg.sh_degree_max, 21).unwrap();
    let mut trainer = Trainer::new(cfg, views, initial, Some(&oracle)).unwrap();
    trainer.run().unwrap();
    let mut bytes = Vec::new();
    write_ply(trainer.set(), &mut bytes).unwrap();
    bytes
}

fn determinism() -> Outcome {
    let scene = toy_scene(0);
    // more workers than cores, so scheduling order actually varies
    let threads = 4;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    let a = pool.install(|| short_toy_ply(&scene));
    let b = pool.install(|| short_toy_ply(&scene));
    Outcome::new(
        a == b,
        format!(
            "two 600-iteration runs with densify, unpool, pseudo views and a reset on {threads} threads: \
             PLYs of {} and {} bytes, identical: {}",
            a.len(),
            b.len(),
            a == b
        ),
    )
}

// ---------------------------------------------------------------------------
// 8. File formats.

fn dual_fixture_model() -> SfmModel {
    let mut model = SfmModel::default();
    model.cameras.insert(
        1,
        Intrinsics {
            model: CameraModel::Pinhole,
            width: 640,
            height: 480,
            params: vec![525.5, 524.25, 319.75, 239.125],
        },
    );
    model.cameras.insert(
        7,
        Intrinsics {
            model: CameraModel::SimplePinhole,
            width: 1008,
            height: 756,
            params: vec![815.123456789, 504.0, 378.0],
        },
    );
    let q = |v: [f64; 4]| {
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.map(|x| x / n)
    };
    for (id, cam, qv, t, name) in [
        (3u32, 1u32, [0.9, 0.1, -0.3, 0.2], [0.5, -1.25, 3.0], "frame_000.png"),
        (1, 7, [1.0, 0.0, 0.0, 0.0], [0.0, 0.0, 0.0], "frame_001.png"),
        (12, 1, [0.2, 0.7, 0.1, -0.6], [-2.5, 0.125, 1e-3], "sub dir/frame_002.png"),
    ] {
        model.images.insert(
            id,
            SfmImage {
                camera_id: cam,
                qvec: q(qv),
                tvec: t,
                name: name.into(),
            },
        );
    }
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for id in [1u64, 2, 5, 40, 41] {
        model.points.push(SfmPoint {
            id,
            xyz: [0; 3].map(|_| rng.sample::<f64, _>(StandardNormal) * 3.0),
            rgb: [0; 3].map(|_| rng.random::<u8>()),
            error: rng.random_range(0.0..2.0),
        });
    }
    model
}

/// Observations written with each image and point; not part of the parsed
/// model but must be skipped correctly.
const OBSERVATIONS: [(f64, f64, i64); 3] = [(10.5, 20.25, 1), (100.0, 7.0, -1), (3.75, 400.5, 40)];

fn write_colmap_text(model: &SfmModel, dir: &Path) {
    let mut cams = String::from("# Camera list with one line of data per camera:\n");
    for (id, c) in &model.cameras {
        let name = match c.model {
            CameraModel::Pinhole => "PINHOLE",
            CameraModel::SimplePinhole => "SIMPLE_PINHOLE",
        };
        let params: Vec<String> = c.params.iter().map(|p| format!("{p:?}")).collect();
        writeln!(cams, "{id} {name} {} {} {}", c.width, c.height, params.join(" ")).unwrap();
    }
    fs::write(dir.join("cameras.txt"), cams).unwrap();
    let mut imgs = String::from("# Image list with two lines of data per image:\n");
    for (id, im) in &model.images {
        let [qw, qx, qy, qz] = im.qvec;
        let [tx, ty, tz] = im.tvec;
        writeln!(imgs, "{id} {qw:?} {qx:?} {qy:?} {qz:?} {tx:?} {ty:?} {tz:?} {} {}", im.camera_id, im.name).unwrap();
        let obs: Vec<String> = OBSERVATIONS.iter().map(|(x, y, p)| format!("{x:?} {y:?} {p}")).collect();
        writeln!(imgs, "{}", obs.join(" ")).unwrap();
    }
    fs::write(dir.join("images.txt"), imgs).unwrap();
    let mut pts = String::from("# 3D point list with one line of data per point:\n");
    for p in &model.points {
        let [x, y, z] = p.xyz;
        let [r, g, b] = p.rgb;
        writeln!(pts, "{} {x:?} {y:?} {z:?} {r} {g} {b} {:?} 3 0 12 1", p.id, p.error).unwrap();
    }
    fs::write(dir.join("points3D.txt"), pts).unwrap();
}

fn write_colmap_binary(model: &SfmModel, dir: &Path) {
    let mut cams = Vec::new();
    cams.extend((model.cameras.len() as u64).to_le_bytes());
    for (id, c) in &model.cameras {
        cams.extend((*id as i32).to_le_bytes());
        let model_id: i32 = match c.model {
            CameraModel::SimplePinhole => 0,
            CameraModel::Pinhole => 1,
        };
        cams.extend(model_id.to_le_bytes());
        cams.extend(c.width.to_le_bytes());
        cams.extend(c.height.to_le_bytes());
        for p in &c.params {
            cams.extend(p.to_le_bytes());
        }
    }
    fs::write(dir.join("cameras.bin"), cams).unwrap();
    let mut imgs = Vec::new();
    imgs.extend((model.images.len() as u64).to_le_bytes());
    for (id, im) in &model.images {
        imgs.extend(id.to_le_bytes());
        for v in im.qvec.iter().chain(&im.tvec) {
            imgs.extend(v.to_le_bytes());
        }
        imgs.extend(im.camera_id.to_le_bytes());
        imgs.extend(im.name.as_bytes());
        imgs.push(0);
        imgs.extend((OBSERVATIONS.len() as u64).to_le_bytes());
        for (x, y, p) in OBSERVATIONS {
            imgs.extend(x.to_le_bytes());
            imgs.extend(y.to_le_bytes());
            imgs.extend(p.to_le_bytes());
        }
    }
    fs::write(dir.join("images.bin"), imgs).unwrap();
    let mut pts = Vec::new();
    pts.extend((model.points.len() as u64).to_le_bytes());
    for p in &model.points {
        pts.extend(p.id.to_le_bytes());
        for v in p.xyz {
            pts.extend(v.to_le_bytes());
        }
        pts.extend(p.rgb);
        pts.extend(p.error.to_le_bytes());
        pts.extend(2u64.to_le_bytes());
        for (img, idx) in [(3i32, 0i32), (12, 2)] {
            pts.extend(img.to_le_bytes());
            pts.extend(idx.to_le_bytes());
        }
    }
    fs::write(dir.join("points3D.bin"), pts).unwrap();
}

/// Grayscale PFM, rows bottom to top, written independently of the crate.
fn write_pfm(grid: &Grid<f32>, little_endian: bool) -> Vec<u8> {
    let scale = if little_endian { "-1.0" } else { "1.0" };
    let mut out = format!("Pf\n{} {}\n{scale}\n", grid.width, grid.height).into_bytes();
    for row in (0..grid.height).rev() {
        for &v in &grid.data[row * grid.width..(row + 1) * grid.width] {
            out.extend(if little_endian { v.to_le_bytes() } else { v.to_be_bytes() });
        }
    }
    out
}

fn random_set_f32(rng: &mut impl Rng, n: usize, degree: usize) -> GaussianSet<f32> {
    let k = (degree + 1) * (degree + 1);
    let mut set = GaussianSet::new(degree);
    for _ in 0..n {
        set.push(Gaussian {
            mu: [0; 3].map(|_| rng.sample::<f32, _>(StandardNormal) * 10.0),
            log_scale: [0; 3].map(|_| rng.random_range(-8.0f32..2.0)),
            rotation: [0; 4].map(|_| rng.sample::<f32, _>(StandardNormal)),
            opacity_logit: rng.random_range(-10.0f32..10.0),
            sh: (0..k).map(|_| [0; 3].map(|_| rng.sample::<f32, _>(StandardNormal))).collect(),
        })
        .unwrap();
    }
    set
}

fn bits(set: &GaussianSet<f32>) -> Vec<u32> {
    set.means
        .iter()
        .flatten()
        .chain(set.log_scales.iter().flatten())
        .chain(set.rotations.iter().flatten())
        .chain(&set.opacity_logits)
        .chain(set.sh.iter().flatten())
        .map(|v| v.to_bits())
        .collect()
}

fn format_round_trips() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut failures = Vec::new();

    let model = dual_fixture_model();
    let (text_dir, bin_dir) = (dir.path().join("text"), dir.path().join("bin"));
    fs::create_dir_all(&text_dir).unwrap();
    fs::create_dir_all(&bin_dir).unwrap();
    write_colmap_text(&model, &text_dir);
    write_colmap_binary(&model, &bin_dir);
    let from_text = parse_colmap_model(&text_dir, ModelFormat::Text).unwrap();
    let from_bin = parse_colmap_model(&bin_dir, ModelFormat::Binary).unwrap();
    if from_text != from_bin || from_text != model {
        failures.push("COLMAP text and binary models disagree".to_string());
    }

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut ply_cases = 0;
    for case in 0..20 {
        let set = random_set_f32(&mut rng, case * 7, case % 4);
        let path = dir.path().join(format!("set{case}.ply"));
        let mut bytes = Vec::new();
        write_ply(&set, &mut bytes).unwrap();
        fs::write(&path, &bytes).unwrap();
        let back = import_ply(&path).unwrap();
        let mut again = Vec::new();
        write_ply(&back, &mut again).unwrap();
        if back.sh_degree() != set.sh_degree() || bits(&back) != bits(&set) || again != bytes {
            failures.push(format!("PLY case {case} did not round-trip"));
        }
        ply_cases += 1;
    }

    let mut pfm_cases = 0;
    for case in 0..10 {
        let (w, h) = (rng.random_range(1..40), rng.random_range(1..30));
        let grid = Grid::from_data(w, h, (0..w * h).map(|_| rng.random_range(-3.0f32..3.0)).collect()).unwrap();
        let mut loaded = Vec::new();
        for (tag, bytes) in [
            ("le", write_pfm(&grid, true)),
            ("be", write_pfm(&grid, false)),
            ("le-crate", encode_pfm(&grid, true)),
            ("be-crate", encode_pfm(&grid, false)),
        ] {
            let path = dir.path().join(format!("g{case}-{tag}.pfm"));
            fs::write(&path, bytes).unwrap();
            loaded.push(load_depth_prior(&path).unwrap().values);
        }
        let same = loaded
            .iter()
            .all(|g| g.width == w && g.height == h && g.data.iter().map(|v| v.to_bits()).eq(grid.data.iter().map(|v| v.to_bits())));
        if !same {
            failures.push(format!("PFM case {case} differs between byte orders"));
        }
        pfm_cases += 1;
    }

    let pass = failures.is_empty();
    Outcome::new(
        pass,
        if pass {
            format!(
                "COLMAP text and binary fixtures parse to the same model ({} cameras, {} images, {} points); \
                 {ply_cases} PLY sets bit-identical after a round trip; {pfm_cases} PFM grids identical \
                 in both byte orders",
                model.cameras.len(),
                model.images.len(),
                model.points.len()
            )
        } else {
            failures.join("; ")
        },
    )
}

// ---------------------------------------------------------------------------
// 9. Schedule of a 3000-iteration run under the default configuration.

fn schedule_conformance() -> Outcome {
    let scene = toy_scene(0);
    // default schedule; only the toy-scale thresholds are changed
    let toy = toy_config();
    let cfg = TrainingConfig {
        total_iters: 3000,
        sh_degree_max: 1,
        t_pos: toy.t_pos,
        t_prox: toy.t_prox,
        max_world_scale: toy.max_world_scale,
        seed: 9,
        ..TrainingConfig::default()
    };
    let defaults = TrainingConfig::default();
    let reset_at = defaults.opacity_reset_iters[0];
    let reset_value = defaults.opacity_reset_value;
    let oracle = SyntheticOracle::new(scene.gaussians.clone(), 2.0, 0.3, 0.0, 9);
    let views: Vec<_> = scene
        .views(&TOY_TRAIN_VIEWS, &oracle)
        .unwrap()
        .into_iter()
        .map(|mut v| {
            // quarter resolution keeps 3000 iterations cheap
            v.camera = v.camera.downsampled(4);
            v.image = sparse_splat::ingest::downsample(&v.image, 4).unwrap();
            v.prior = Some(
                oracle
                    .estimate(&EstimateRequest {
                        image: &v.image,
                        camera: &v.camera,
                        name: None,
                    })
                    .unwrap(),
            );
            v
        })
        .collect();
    let initial = scene.initial_set(1, 9).unwrap();
    let mut trainer = Trainer::new(cfg, views, initial, Some(&oracle)).unwrap();
    let mut reset_error: Option<f64> = None;
    trainer
        .run_with(|t| {
            if t.iteration() == reset_at {
                let s = t.set();
                let worst = (0..s.len()).map(|i| (f64::from(s.opacity(i)) - reset_value).abs()).fold(0.0, f64::max);
                reset_error = Some(worst);
            }
        })
        .unwrap();
    let log = trainer.log();
    let densify = log.densify_iterations();
    let expected: Vec<usize> = (600..=3000).step_by(100).collect();
    let first_pseudo = log.records.iter().find(|r| r.pseudo_view).map(|r| r.iteration);
    let skipped = log.events.iter().filter(|e| matches!(e, TrainEvent::PseudoSkipped { .. })).count();
    let resets: Vec<usize> = log
        .events
        .iter()
        .filter(|e| matches!(e, TrainEvent::OpacityReset { .. }))
        .map(TrainEvent::iteration)
        .collect();
    let reset_ok = reset_error.is_some_and(|e| e <= RESET_OPACITY_TOL) && resets == [reset_at];
    let pass = densify == expected && first_pseudo == Some(reset_at + 1) && skipped == 0 && reset_ok;
    Outcome::new(
        pass,
        format!(
            "densify at {}..={} ({} events, expected 600, 700, ..., 3000: {}); first pseudo view at {:?} \
             (expected 2001, {skipped} skipped); opacity reset at {resets:?}, max |opacity - {reset_value}| \
             afterwards {}",
            densify.first().copied().unwrap_or(0),
            densify.last().copied().unwrap_or(0),
            densify.len(),
            densify == expected,
            first_pseudo,
            reset_error.map_or("n/a".into(), |e| format!("{e:.1e}"))
        ),
    )
}
