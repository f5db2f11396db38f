//! The optimisation loop: per-view losses, Adam, densification schedule and
//! checkpoints.

mod adam;
mod log;
mod objective;

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use adam::{adam_update, GroupRates, Moments, OptimizerState, BETA1, BETA2, EPSILON};
pub use log::{IterationRecord, LossBreakdown, TrainEvent, TrainLog};
pub use objective::{evaluate_render, evaluate_view, ObjectiveWeights, ViewObjective};

use crate::buffer::Image;
use crate::densify::{
    build_proximity_graph, gaussian_unpool, gradient_densify_clone_split, prune, reset_opacity, scene_extent,
    CloneSplitParams, DensifyStats, ProximityGraph,
};
use crate::ingest::export_ply;
use crate::raster::{GradientBuffer, RenderOptions};
use crate::regularize::{
    default_pseudo_noise, estimate_checked, sample_pseudo_camera, DepthEstimator, DepthPrior, EstimateRequest,
};
use crate::scene::{Camera, GaussianSet, Lineage, TrainingConfig};
use crate::{Error, Result};

/// A posed training image with its depth prior.
#[derive(Clone, Debug)]
pub struct TrainingView {
    pub name: String,
    pub camera: Camera<f32>,
    pub image: Image<f32>,
    pub prior: Option<DepthPrior>,
}

/// Position learning rate at `iteration`: log-linear from `lr_position`
/// to `lr_position_final` over the run, times `scale`.
pub fn position_lr(cfg: &TrainingConfig, iteration: usize, scale: f64) -> f64 {
    let t = if cfg.total_iters == 0 {
        1.0
    } else {
        (iteration as f64 / cfg.total_iters as f64).clamp(0.0, 1.0)
    };
    let (a, b) = (cfg.lr_position.ln(), cfg.lr_position_final.ln());
    (a * (1.0 - t) + b * t).exp() * scale
}

/// SH degree used for rendering at `iteration`.
pub fn active_sh_degree(cfg: &TrainingConfig, iteration: usize, set_degree: usize) -> usize {
    (iteration / cfg.sh_degree_interval).min(cfg.sh_degree_max).min(set_degree)
}

/// Whether a densification event runs at the end of `iteration`.
pub fn is_densify_iteration(cfg: &TrainingConfig, iteration: usize) -> bool {
    iteration > cfg.densify_from && iteration < cfg.densify_until && iteration % cfg.densify_interval == 0
}

/// Stateful training loop over a fixed set of views.
pub struct Trainer<'a> {
    config: TrainingConfig,
    views: Vec<TrainingView>,
    estimator: Option<&'a dyn DepthEstimator>,
    set: GaussianSet<f32>,
    optimizer: OptimizerState,
    stats: DensifyStats<f32>,
    graph: Option<ProximityGraph<f32>>,
    rng: ChaCha8Rng,
    order: Vec<usize>,
    cursor: usize,
    iteration: usize,
    extent: f64,
    position_scale: f64,
    pseudo_noise: f32,
    pseudo_enabled: bool,
    checkpoint_dir: Option<PathBuf>,
    log: TrainLog,
}

impl<'a> Trainer<'a> {
    /// `estimator` serves pseudo views; training-view priors are taken
    /// from `views`.
    pub fn new(
        config: TrainingConfig,
        views: Vec<TrainingView>,
        set: GaussianSet<f32>,
        estimator: Option<&'a dyn DepthEstimator>,
    ) -> Result<Self> {
        config.validate()?;
        set.validate()?;
        if views.is_empty() {
            return Err(Error::InvalidInput("no training views".into()));
        }
        for v in &views {
            v.camera.validate()?;
            let (w, h) = (v.camera.width as usize, v.camera.height as usize);
            if v.image.width != w || v.image.height != h {
                return Err(Error::InvalidInput(format!(
                    "view {}: image is {}x{}, camera is {w}x{h}",
                    v.name, v.image.width, v.image.height
                )));
            }
            match &v.prior {
                Some(p) => p.check_size(w, h).map_err(|e| Error::InvalidInput(format!("view {}: {e}", v.name)))?,
                None if config.lambda_depth > 0.0 => {
                    return Err(Error::InvalidInput(format!("view {} has no depth prior", v.name)))
                }
                None => {}
            }
        }

        let mut log = TrainLog::default();
        let centers: Vec<_> = views.iter().map(|v| v.camera.center().map(f64::from)).collect();
        let derived = scene_extent(&centers);
        let derived = if derived > 0.0 {
            derived
        } else {
            log.notes.push("training cameras share one center; scene extent set to 1".into());
            1.0
        };
        let extent = config.scene_extent.resolve(derived);
        let position_scale = config.position_lr_scale.resolve(extent);
        let cams: Vec<Camera<f32>> = views.iter().map(|v| v.camera.clone()).collect();
        let pseudo_noise = config.pseudo_noise.resolve(f64::from(default_pseudo_noise(&cams))) as f32;

        let mut pseudo_enabled = config.enable_pseudo && config.lambda_pseudo_depth > 0.0;
        if pseudo_enabled {
            let reason = if views.len() < 2 {
                Some("pseudo views need two training views")
            } else {
                match estimator {
                    None => Some("no depth estimator for pseudo views"),
                    Some(e) if !e.supports_unseen_views() => Some("the depth estimator cannot serve pseudo views"),
                    Some(_) => None,
                }
            };
            if let Some(r) = reason {
                log.notes.push(format!("{r}; pseudo-view term disabled"));
                pseudo_enabled = false;
            }
        }

        let n = set.len();
        Ok(Self {
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            optimizer: OptimizerState::new(&set),
            stats: DensifyStats::new(n),
            graph: None,
            order: Vec::new(),
            cursor: 0,
            iteration: 0,
            extent,
            position_scale,
            pseudo_noise,
            pseudo_enabled,
            checkpoint_dir: None,
            log,
            config,
            views,
            estimator,
            set,
        })
    }

    /// Write a checkpoint every `checkpoint_interval` iterations into `dir`.
    pub fn with_checkpoints(mut self, dir: impl Into<PathBuf>) -> Self {
        self.checkpoint_dir = Some(dir.into());
        self
    }

    pub fn config(&self) -> &TrainingConfig {
        &self.config
    }

    pub fn views(&self) -> &[TrainingView] {
        &self.views
    }

    pub fn set(&self) -> &GaussianSet<f32> {
        &self.set
    }

    pub fn optimizer(&self) -> &OptimizerState {
        &self.optimizer
    }

    pub fn stats(&self) -> &DensifyStats<f32> {
        &self.stats
    }

    /// Graph rebuilt at the end of the last densification event.
    pub fn graph(&self) -> Option<&ProximityGraph<f32>> {
        self.graph.as_ref()
    }

    pub fn log(&self) -> &TrainLog {
        &self.log
    }

    /// Iterations completed so far.
    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn scene_extent(&self) -> f64 {
        self.extent
    }

    pub fn pseudo_enabled(&self) -> bool {
        self.pseudo_enabled
    }

    pub fn into_parts(self) -> (GaussianSet<f32>, TrainLog) {
        (self.set, self.log)
    }

    fn next_view(&mut self) -> usize {
        if self.cursor >= self.order.len() {
            self.order = (0..self.views.len()).collect();
            self.order.shuffle(&mut self.rng);
            self.cursor = 0;
        }
        self.cursor += 1;
        self.order[self.cursor - 1]
    }

    fn rates(&self, iteration: usize) -> GroupRates {
        let c = &self.config;
        GroupRates {
            position: position_lr(c, iteration, self.position_scale) as f32,
            sh_dc: c.lr_sh as f32,
            sh_rest: (c.lr_sh * c.sh_rest_lr_factor) as f32,
            opacity: c.lr_opacity as f32,
            scaling: c.lr_scaling as f32,
            rotation: c.lr_rotation as f32,
        }
    }

    fn render_options(&self, degree: usize) -> RenderOptions<f32> {
        let o = RenderOptions::new(degree);
        if self.config.white_background {
            o.white_background()
        } else {
            o
        }
    }

    fn pseudo_term(&mut self, options: &RenderOptions<f32>) -> Result<(f32, bool, GradientBuffer<f32>)> {
        let cams: Vec<Camera<f32>> = self.views.iter().map(|v| v.camera.clone()).collect();
        let pseudo = sample_pseudo_camera(&cams, &mut self.rng, self.pseudo_noise, self.config.pseudo_pairing)?;
        let estimator = self.estimator.expect("pseudo views require an estimator");
        let weights = ObjectiveWeights::pseudo(&self.config);
        let preview = crate::raster::render_forward(&self.set, &pseudo.camera, options);
        let prior = estimate_checked(
            estimator,
            &EstimateRequest {
                image: &preview.color,
                camera: &pseudo.camera,
                name: None,
            },
        )?;
        let obj = evaluate_render(&self.set, &pseudo.camera, preview, None, Some(&prior), &weights, true)?;
        Ok((obj.depth, obj.depth_degenerate, obj.grads.expect("backward requested")))
    }

    /// One iteration: render a training view (and a pseudo view once
    /// enabled), update parameters, then run any scheduled densification,
    /// opacity reset and checkpoint.
    pub fn step(&mut self) -> Result<LossBreakdown> {
        let started = Instant::now();
        self.iteration += 1;
        let it = self.iteration;
        let degree = active_sh_degree(&self.config, it, self.set.sh_degree());
        let options = self.render_options(degree);
        let vi = self.next_view();

        let weights = ObjectiveWeights::training(&self.config);
        let view = &self.views[vi];
        let obj = evaluate_view(
            &self.set,
            &view.camera,
            &options,
            Some(&view.image),
            view.prior.as_ref(),
            &weights,
            true,
        )?;
        let mut grads = obj.grads.expect("backward requested");
        if it < self.config.densify_until {
            self.stats.accumulate(&grads);
        }
        let mut loss = LossBreakdown {
            l1: f64::from(obj.l1),
            dssim: f64::from(obj.dssim),
            depth: f64::from(obj.depth),
            pseudo_depth: 0.0,
            total: 0.0,
        };
        let mut depth_degenerate = obj.depth_degenerate;

        let mut pseudo_used = false;
        if self.pseudo_enabled && it > self.config.pseudo_from {
            match self.pseudo_term(&options) {
                Ok((value, degenerate, g)) => {
                    grads.accumulate(&g);
                    loss.pseudo_depth = f64::from(value);
                    depth_degenerate |= degenerate;
                    pseudo_used = true;
                }
                Err(e) => self.log.events.push(TrainEvent::PseudoSkipped {
                    iteration: it,
                    reason: e.to_string(),
                }),
            }
        }
        let c = &self.config;
        loss.total = loss.combine(c.lambda_l1, c.lambda_dssim, c.lambda_depth, c.lambda_pseudo_depth);

        if !loss.total.is_finite() || !grads.is_finite() {
            return Err(self.non_finite(it, vi, &loss, &grads));
        }
        let rates = self.rates(it);
        self.optimizer.step(&mut self.set, &grads, &rates);

        if is_densify_iteration(&self.config, it) {
            self.densify(it)?;
        }
        if self.config.opacity_reset_iters.contains(&it) {
            reset_opacity(&mut self.set, self.config.opacity_reset_value as f32);
            self.optimizer.reset_opacity_moments();
            self.log.events.push(TrainEvent::OpacityReset { iteration: it });
        }
        if let Some(dir) = self.checkpoint_dir.clone() {
            if it % self.config.checkpoint_interval == 0 {
                let path = self.write_checkpoint(&dir, it)?;
                self.log.events.push(TrainEvent::Checkpoint { iteration: it, path });
            }
        }
        self.log.records.push(IterationRecord {
            iteration: it,
            view: vi,
            loss,
            gaussians: self.set.len(),
            active_sh_degree: degree,
            position_lr: f64::from(rates.position),
            pseudo_view: pseudo_used,
            depth_degenerate,
            wall_ms: started.elapsed().as_secs_f64() * 1e3,
        });
        Ok(loss)
    }

    fn apply_lineage(&mut self, lineage: &Lineage) {
        if !lineage.is_identity() || lineage.len() != self.optimizer.len() {
            self.optimizer.remap(lineage);
            self.stats.remap(lineage);
        }
        assert_eq!(self.optimizer.len(), self.set.len(), "optimizer out of sync after densification");
        assert_eq!(self.stats.len(), self.set.len(), "statistics out of sync after densification");
    }

    /// Clone/split, unpool, prune, then rebuild the proximity graph.
    fn densify(&mut self, it: usize) -> Result<()> {
        let c = self.config.clone();
        let extent = self.extent as f32;
        let (mut cloned, mut split, mut unpooled) = (0, 0, 0);

        if c.enable_gradient_densify {
            let before = self.set.len();
            let params = CloneSplitParams {
                t_pos: c.t_pos as f32,
                scene_extent: extent,
                dense_fraction: c.dense_scale as f32,
                split_factor: c.split_factor as f32,
            };
            let lineage = gradient_densify_clone_split(&mut self.set, &self.stats, &params, &mut self.rng);
            let created = lineage.sources.iter().filter(|s| s.is_none()).count();
            split = created - (self.set.len() - before);
            cloned = created - 2 * split;
            self.apply_lineage(&lineage);
        }
        if c.enable_unpool && self.set.len() > c.knn_k {
            let graph = build_proximity_graph(&self.set, c.knn_k)?;
            let lineage = gaussian_unpool(&mut self.set, &graph, c.t_prox as f32)?;
            unpooled = lineage.sources.iter().filter(|s| s.is_none()).count();
            self.apply_lineage(&lineage);
        }
        let before = self.set.len();
        let lineage = prune(&mut self.set, c.min_opacity as f32, (c.max_world_scale * self.extent) as f32);
        let pruned = before - self.set.len();
        self.apply_lineage(&lineage);

        self.graph = if self.set.len() > c.knn_k {
            Some(build_proximity_graph(&self.set, c.knn_k)?)
        } else {
            None
        };
        self.stats.reset(self.set.len());
        self.log.events.push(TrainEvent::Densify {
            iteration: it,
            cloned,
            split,
            unpooled,
            pruned,
            gaussians: self.set.len(),
        });
        Ok(())
    }

    fn write_checkpoint(&self, dir: &Path, it: usize) -> Result<PathBuf> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let ply = dir.join(format!("checkpoint_{it:06}.ply"));
        export_ply(&self.set, &ply)?;
        let sidecar = ply.with_extension("adam");
        let file = File::create(&sidecar).map_err(|e| Error::io(&sidecar, e))?;
        let mut w = BufWriter::new(file);
        self.optimizer
            .write_to(&mut w)
            .and_then(|_| std::io::Write::flush(&mut w))
            .map_err(|e| Error::io(&sidecar, e))?;
        Ok(ply)
    }

    fn non_finite(&self, it: usize, vi: usize, loss: &LossBreakdown, grads: &GradientBuffer<f32>) -> Error {
        let bad = |v: &mut dyn Iterator<Item = f32>| v.filter(|x| !x.is_finite()).count();
        let mut detail = format!(
            "view {} ({}), {} Gaussians, loss l1={} dssim={} depth={} pseudo_depth={} total={}; \
             non-finite gradients: means {}, scales {}, rotations {}, opacity {}, sh {}",
            vi,
            self.views[vi].name,
            self.set.len(),
            loss.l1,
            loss.dssim,
            loss.depth,
            loss.pseudo_depth,
            loss.total,
            bad(&mut grads.means.iter().flatten().copied()),
            bad(&mut grads.log_scales.iter().flatten().copied()),
            bad(&mut grads.rotations.iter().flatten().copied()),
            bad(&mut grads.opacity_logits.iter().copied()),
            bad(&mut grads.sh.iter().flatten().copied()),
        );
        if let Some(dir) = &self.checkpoint_dir {
            let path = dir.join(format!("nonfinite_{it:06}.ply"));
            let dumped = std::fs::create_dir_all(dir).is_ok() && export_ply(&self.set, &path).is_ok();
            if dumped {
                detail.push_str(&format!("; parameters dumped to {}", path.display()));
            }
        }
        Error::NonFinite { iteration: it, detail }
    }

    /// Run to `total_iters`, calling `observe` after every iteration.
    pub fn run_with(&mut self, mut observe: impl FnMut(&Self)) -> Result<()> {
        while self.iteration < self.config.total_iters {
            self.step()?;
            observe(self);
        }
        Ok(())
    }

    pub fn run(&mut self) -> Result<()> {
        self.run_with(|_| {})
    }
}

/// Train `initial` on `views` for the configured number of iterations.
pub fn run_training(
    views: Vec<TrainingView>,
    initial: GaussianSet<f32>,
    estimator: Option<&dyn DepthEstimator>,
    config: TrainingConfig,
    checkpoint_dir: Option<&Path>,
) -> Result<(GaussianSet<f32>, TrainLog)> {
    let mut trainer = Trainer::new(config, views, initial, estimator)?;
    if let Some(dir) = checkpoint_dir {
        trainer = trainer.with_checkpoints(dir);
    }
    trainer.run()?;
    Ok(trainer.into_parts())
}
