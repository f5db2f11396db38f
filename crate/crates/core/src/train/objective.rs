//! The per-view training objective and its gradient.

use crate::buffer::{Grid, Image};
use crate::raster::{render_backward, render_forward, GradientBuffer, RenderOptions, RenderOutput};
use crate::regularize::{
    depth_regularization_loss, dssim_loss, dssim_loss_grad, l1_loss, l1_loss_grad, DepthLossOptions, DepthPrior,
};
use crate::scene::{Camera, GaussianSet, TrainingConfig};
use crate::{Real, Result};

/// Loss weights and depth handling for one view.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ObjectiveWeights {
    pub l1: f64,
    pub dssim: f64,
    pub depth: f64,
    pub depth_options: DepthLossOptions,
    /// Correlate depth divided by coverage instead of raw blended depth.
    pub normalize_depth: bool,
}

impl ObjectiveWeights {
    /// Weights for a training view.
    pub fn training(cfg: &TrainingConfig) -> Self {
        Self {
            l1: cfg.lambda_l1,
            dssim: cfg.lambda_dssim,
            depth: cfg.lambda_depth,
            depth_options: DepthLossOptions {
                alpha_gate: cfg.alpha_gate,
                mode: cfg.depth_mode,
            },
            normalize_depth: cfg.normalize_depth,
        }
    }

    /// Weights for a pseudo view: depth only.
    pub fn pseudo(cfg: &TrainingConfig) -> Self {
        Self {
            l1: 0.0,
            dssim: 0.0,
            depth: cfg.lambda_pseudo_depth,
            ..Self::training(cfg)
        }
    }
}

/// Unweighted loss terms of one view and their weighted sum.
#[derive(Clone, Debug)]
pub struct ViewObjective<T = f32> {
    pub l1: T,
    pub dssim: T,
    /// `1 − corr`, zero without a prior or when the correlation is undefined.
    pub depth: T,
    pub depth_degenerate: bool,
    pub total: T,
    pub render: RenderOutput<T>,
    pub grads: Option<GradientBuffer<T>>,
}

/// Render `camera`, score it against `target` and `prior`, and optionally
/// back-propagate. Terms with zero weight or a missing input are skipped.
pub fn evaluate_view<T: Real>(
    set: &GaussianSet<T>,
    camera: &Camera<T>,
    options: &RenderOptions<T>,
    target: Option<&Image<T>>,
    prior: Option<&DepthPrior>,
    weights: &ObjectiveWeights,
    backward: bool,
) -> Result<ViewObjective<T>> {
    let render = render_forward(set, camera, options);
    evaluate_render(set, camera, render, target, prior, weights, backward)
}

/// [`evaluate_view`] on an existing render of `set` from `camera`.
pub fn evaluate_render<T: Real>(
    set: &GaussianSet<T>,
    camera: &Camera<T>,
    render: RenderOutput<T>,
    target: Option<&Image<T>>,
    prior: Option<&DepthPrior>,
    weights: &ObjectiveWeights,
    backward: bool,
) -> Result<ViewObjective<T>> {
    let (w, h) = (render.width(), render.height());
    let mut dl_dcolor = Image::zeros(w, h);
    let mut dl_ddepth = Grid::zeros(w, h);
    let mut dl_dalpha: Option<Grid<T>> = None;
    let (mut l1, mut dssim, mut depth) = (T::zero(), T::zero(), T::zero());
    let mut depth_degenerate = false;

    if let Some(gt) = target {
        if weights.l1 > 0.0 {
            if backward {
                let (v, g) = l1_loss_grad(&render.color, gt)?;
                add_scaled(&mut dl_dcolor.data, &g.data, T::lit(weights.l1));
                l1 = v;
            } else {
                l1 = l1_loss(&render.color, gt)?;
            }
        }
        if weights.dssim > 0.0 {
            if backward {
                let (v, g) = dssim_loss_grad(&render.color, gt)?;
                add_scaled(&mut dl_dcolor.data, &g.data, T::lit(weights.dssim));
                dssim = v;
            } else {
                dssim = dssim_loss(&render.color, gt)?;
            }
        }
    }
    if let (Some(prior), true) = (prior, weights.depth > 0.0) {
        let normalized;
        let rendered = if weights.normalize_depth {
            normalized = render.normalized_depth();
            &normalized
        } else {
            &render.depth
        };
        let d = depth_regularization_loss(rendered, &render.alpha, prior, &weights.depth_options)?;
        depth = d.loss;
        depth_degenerate = d.degenerate;
        if backward && !d.degenerate {
            let lam = T::lit(weights.depth);
            if weights.normalize_depth {
                let (gd, ga) = render.normalized_depth_backward(&d.grad);
                add_scaled(&mut dl_ddepth.data, &gd.data, lam);
                let mut a = Grid::zeros(w, h);
                add_scaled(&mut a.data, &ga.data, lam);
                dl_dalpha = Some(a);
            } else {
                add_scaled(&mut dl_ddepth.data, &d.grad.data, lam);
            }
        }
    }

    let total = T::lit(weights.l1) * l1 + T::lit(weights.dssim) * dssim + T::lit(weights.depth) * depth;
    let grads = if backward {
        Some(render_backward(set, camera, &render, &dl_dcolor, &dl_ddepth, dl_dalpha.as_ref())?)
    } else {
        None
    };
    Ok(ViewObjective {
        l1,
        dssim,
        depth,
        depth_degenerate,
        total,
        render,
        grads,
    })
}

fn add_scaled<T: Real>(acc: &mut [T], g: &[T], s: T) {
    for (a, &b) in acc.iter_mut().zip(g) {
        *a += s * b;
    }
}
