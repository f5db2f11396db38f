//! Append-only record of a training run.

use std::path::PathBuf;

/// Unweighted loss terms of one iteration and their weighted total.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossBreakdown {
    pub l1: f64,
    pub dssim: f64,
    /// Depth term of the training view.
    pub depth: f64,
    /// Depth term of the pseudo view, zero when none was used.
    pub pseudo_depth: f64,
    pub total: f64,
}

impl LossBreakdown {
    /// Weighted sum of the terms.
    pub fn combine(&self, l1: f64, dssim: f64, depth: f64, pseudo_depth: f64) -> f64 {
        l1 * self.l1 + dssim * self.dssim + depth * self.depth + pseudo_depth * self.pseudo_depth
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub view: usize,
    pub loss: LossBreakdown,
    pub gaussians: usize,
    pub active_sh_degree: usize,
    pub position_lr: f64,
    pub pseudo_view: bool,
    pub depth_degenerate: bool,
    pub wall_ms: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum TrainEvent {
    Densify {
        iteration: usize,
        cloned: usize,
        split: usize,
        unpooled: usize,
        pruned: usize,
        gaussians: usize,
    },
    OpacityReset {
        iteration: usize,
    },
    PseudoSkipped {
        iteration: usize,
        reason: String,
    },
    Checkpoint {
        iteration: usize,
        path: PathBuf,
    },
}

impl TrainEvent {
    pub fn iteration(&self) -> usize {
        match self {
            TrainEvent::Densify { iteration, .. }
            | TrainEvent::OpacityReset { iteration }
            | TrainEvent::PseudoSkipped { iteration, .. }
            | TrainEvent::Checkpoint { iteration, .. } => *iteration,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            TrainEvent::Densify { .. } => "densify",
            TrainEvent::OpacityReset { .. } => "opacity_reset",
            TrainEvent::PseudoSkipped { .. } => "pseudo_skipped",
            TrainEvent::Checkpoint { .. } => "checkpoint",
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainLog {
    pub records: Vec<IterationRecord>,
    pub events: Vec<TrainEvent>,
    /// Warnings raised while setting up the run.
    pub notes: Vec<String>,
}

impl TrainLog {
    pub fn densify_iterations(&self) -> Vec<usize> {
        self.events
            .iter()
            .filter(|e| matches!(e, TrainEvent::Densify { .. }))
            .map(TrainEvent::iteration)
            .collect()
    }

    pub fn last_loss(&self) -> Option<LossBreakdown> {
        self.records.last().map(|r| r.loss)
    }
}
