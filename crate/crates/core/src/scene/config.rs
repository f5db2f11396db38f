//! Training configuration and its `key = value` text format.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::{Error, Result};

/// How rendered depth is compared with a depth prior.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DepthMode {
    /// Rendered depth is inverted to disparity (priors are inverse depth).
    Disparity,
    /// Rendered depth is used as is (priors are metric depth).
    Metric,
}

/// How the two parent views of a pseudo camera are chosen.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PseudoPairing {
    /// Random training view and its nearest other training view.
    RandomAnchor,
    /// Always the globally closest pair of training views.
    ClosestPair,
}

/// Either derived from the training cameras or fixed by the user.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Auto {
    Auto,
    Value(f64),
}

impl Auto {
    pub fn resolve(self, derived: f64) -> f64 {
        match self {
            Auto::Auto => derived,
            Auto::Value(v) => v,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainingConfig {
    pub lambda_l1: f64,
    pub lambda_dssim: f64,
    /// Depth regularizer weight on training views.
    pub lambda_depth: f64,
    /// Depth regularizer weight on pseudo views.
    pub lambda_pseudo_depth: f64,

    pub knn_k: usize,
    pub t_prox: f64,
    pub t_pos: f64,

    pub total_iters: usize,
    pub densify_from: usize,
    pub densify_interval: usize,
    pub densify_until: usize,
    pub pseudo_from: usize,
    pub opacity_reset_iters: Vec<usize>,
    pub opacity_reset_value: f64,

    pub lr_position: f64,
    pub lr_position_final: f64,
    /// Multiplier on the position learning rate; `Auto` uses the scene extent.
    pub position_lr_scale: Auto,
    pub lr_sh: f64,
    /// Factor applied to `lr_sh` for coefficients above degree 0.
    pub sh_rest_lr_factor: f64,
    pub lr_opacity: f64,
    pub lr_scaling: f64,
    pub lr_rotation: f64,

    pub sh_degree_max: usize,
    pub sh_degree_interval: usize,

    pub min_opacity: f64,
    /// Prune bound on activated scale, as a fraction of the scene extent.
    pub max_world_scale: f64,
    /// Clone/split boundary on activated scale, as a fraction of the scene extent.
    pub dense_scale: f64,
    pub split_factor: f64,
    pub scene_extent: Auto,

    pub enable_unpool: bool,
    pub enable_gradient_densify: bool,
    pub enable_pseudo: bool,

    /// Standard deviation of pseudo-camera position noise.
    pub pseudo_noise: Auto,
    pub pseudo_pairing: PseudoPairing,
    pub alpha_gate: f64,
    pub depth_mode: DepthMode,
    pub normalize_depth: bool,
    pub white_background: bool,

    pub checkpoint_interval: usize,
    pub seed: u64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            lambda_l1: 0.8,
            lambda_dssim: 0.2,
            lambda_depth: 0.05,
            lambda_pseudo_depth: 0.05,
            knn_k: 3,
            t_prox: 10.0,
            t_pos: 0.0002,
            total_iters: 10_000,
            densify_from: 500,
            densify_interval: 100,
            densify_until: 10_000,
            pseudo_from: 2000,
            opacity_reset_iters: vec![2000, 5000, 7000],
            opacity_reset_value: 0.05,
            lr_position: 0.00016,
            lr_position_final: 0.0000016,
            position_lr_scale: Auto::Auto,
            lr_sh: 0.0025,
            sh_rest_lr_factor: 0.05,
            lr_opacity: 0.05,
            lr_scaling: 0.005,
            lr_rotation: 0.001,
            sh_degree_max: 3,
            sh_degree_interval: 500,
            min_opacity: 0.005,
            max_world_scale: 0.1,
            dense_scale: 0.01,
            split_factor: 1.6,
            scene_extent: Auto::Auto,
            enable_unpool: true,
            enable_gradient_densify: true,
            enable_pseudo: true,
            pseudo_noise: Auto::Auto,
            pseudo_pairing: PseudoPairing::RandomAnchor,
            alpha_gate: 0.5,
            depth_mode: DepthMode::Disparity,
            normalize_depth: false,
            white_background: false,
            checkpoint_interval: 1000,
            seed: 0,
        }
    }
}

fn parse_value<V: FromStr>(line: usize, key: &str, raw: &str) -> Result<V> {
    raw.parse().map_err(|_| Error::Config {
        line,
        message: format!("cannot parse {raw:?} for `{key}`"),
    })
}

fn parse_bool(line: usize, key: &str, raw: &str) -> Result<bool> {
    match raw {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(Error::Config {
            line,
            message: format!("`{key}` expects a boolean, got {raw:?}"),
        }),
    }
}

fn parse_auto(line: usize, key: &str, raw: &str) -> Result<Auto> {
    if raw == "auto" {
        Ok(Auto::Auto)
    } else {
        parse_value(line, key, raw).map(Auto::Value)
    }
}

fn fmt_auto(v: Auto) -> String {
    match v {
        Auto::Auto => "auto".into(),
        Auto::Value(x) => x.to_string(),
    }
}

impl TrainingConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Parse `key = value` lines over the defaults. `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (idx, raw_line) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw_line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| Error::Config {
                line,
                message: format!("expected `key = value`, got {content:?}"),
            })?;
            cfg.set(line, key.trim(), value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn set(&mut self, line: usize, key: &str, v: &str) -> Result<()> {
        match key {
            "lambda_l1" => self.lambda_l1 = parse_value(line, key, v)?,
            "lambda_dssim" => self.lambda_dssim = parse_value(line, key, v)?,
            "lambda_depth" => self.lambda_depth = parse_value(line, key, v)?,
            "lambda_pseudo_depth" => self.lambda_pseudo_depth = parse_value(line, key, v)?,
            "knn_k" => self.knn_k = parse_value(line, key, v)?,
            "t_prox" => self.t_prox = parse_value(line, key, v)?,
            "t_pos" => self.t_pos = parse_value(line, key, v)?,
            "total_iters" => self.total_iters = parse_value(line, key, v)?,
            "densify_from" => self.densify_from = parse_value(line, key, v)?,
            "densify_interval" => self.densify_interval = parse_value(line, key, v)?,
            "densify_until" => self.densify_until = parse_value(line, key, v)?,
            "pseudo_from" => self.pseudo_from = parse_value(line, key, v)?,
            "opacity_reset_iters" => {
                self.opacity_reset_iters = v
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| parse_value(line, key, s))
                    .collect::<Result<_>>()?
            }
            "opacity_reset_value" => self.opacity_reset_value = parse_value(line, key, v)?,
            "lr_position" => self.lr_position = parse_value(line, key, v)?,
            "lr_position_final" => self.lr_position_final = parse_value(line, key, v)?,
            "position_lr_scale" => self.position_lr_scale = parse_auto(line, key, v)?,
            "lr_sh" => self.lr_sh = parse_value(line, key, v)?,
            "sh_rest_lr_factor" => self.sh_rest_lr_factor = parse_value(line, key, v)?,
            "lr_opacity" => self.lr_opacity = parse_value(line, key, v)?,
            "lr_scaling" => self.lr_scaling = parse_value(line, key, v)?,
            "lr_rotation" => self.lr_rotation = parse_value(line, key, v)?,
            "sh_degree_max" => self.sh_degree_max = parse_value(line, key, v)?,
            "sh_degree_interval" => self.sh_degree_interval = parse_value(line, key, v)?,
            "min_opacity" => self.min_opacity = parse_value(line, key, v)?,
            "max_world_scale" => self.max_world_scale = parse_value(line, key, v)?,
            "dense_scale" => self.dense_scale = parse_value(line, key, v)?,
            "split_factor" => self.split_factor = parse_value(line, key, v)?,
            "scene_extent" => self.scene_extent = parse_auto(line, key, v)?,
            "enable_unpool" => self.enable_unpool = parse_bool(line, key, v)?,
            "enable_gradient_densify" => self.enable_gradient_densify = parse_bool(line, key, v)?,
            "enable_pseudo" => self.enable_pseudo = parse_bool(line, key, v)?,
            "pseudo_noise" => self.pseudo_noise = parse_auto(line, key, v)?,
            "pseudo_pairing" => {
                self.pseudo_pairing = match v {
                    "random_anchor" => PseudoPairing::RandomAnchor,
                    "closest_pair" => PseudoPairing::ClosestPair,
                    _ => {
                        return Err(Error::Config {
                            line,
                            message: format!("unknown pseudo_pairing {v:?}"),
                        })
                    }
                }
            }
            "alpha_gate" => self.alpha_gate = parse_value(line, key, v)?,
            "depth_mode" => {
                self.depth_mode = match v {
                    "disparity" => DepthMode::Disparity,
                    "metric" => DepthMode::Metric,
                    _ => {
                        return Err(Error::Config {
                            line,
                            message: format!("unknown depth_mode {v:?}"),
                        })
                    }
                }
            }
            "normalize_depth" => self.normalize_depth = parse_bool(line, key, v)?,
            "white_background" => self.white_background = parse_bool(line, key, v)?,
            "checkpoint_interval" => self.checkpoint_interval = parse_value(line, key, v)?,
            "seed" => self.seed = parse_value(line, key, v)?,
            _ => {
                return Err(Error::Config {
                    line,
                    message: format!("unknown key `{key}`"),
                })
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |message: String| Err(Error::Config { line: 0, message });
        for (name, w) in [
            ("lambda_l1", self.lambda_l1),
            ("lambda_dssim", self.lambda_dssim),
            ("lambda_depth", self.lambda_depth),
            ("lambda_pseudo_depth", self.lambda_pseudo_depth),
        ] {
            if !(w >= 0.0) {
                return bad(format!("`{name}` must be non-negative"));
            }
        }
        if self.densify_interval == 0 || self.sh_degree_interval == 0 || self.checkpoint_interval == 0
        {
            return bad("intervals must be positive".into());
        }
        if self.knn_k == 0 {
            return bad("`knn_k` must be positive".into());
        }
        if self.sh_degree_max > crate::scene::sh::MAX_SH_DEGREE {
            return bad(format!(
                "`sh_degree_max` above {} is unsupported",
                crate::scene::sh::MAX_SH_DEGREE
            ));
        }
        if !(self.opacity_reset_value > 0.0 && self.opacity_reset_value < 1.0) {
            return bad("`opacity_reset_value` must lie in (0, 1)".into());
        }
        if !(self.split_factor > 0.0) {
            return bad("`split_factor` must be positive".into());
        }
        Ok(())
    }

    /// Every field in the text format accepted by [`TrainingConfig::parse`].
    pub fn to_config_string(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("lambda_l1", self.lambda_l1.to_string());
        kv("lambda_dssim", self.lambda_dssim.to_string());
        kv("lambda_depth", self.lambda_depth.to_string());
        kv("lambda_pseudo_depth", self.lambda_pseudo_depth.to_string());
        kv("knn_k", self.knn_k.to_string());
        kv("t_prox", self.t_prox.to_string());
        kv("t_pos", self.t_pos.to_string());
        kv("total_iters", self.total_iters.to_string());
        kv("densify_from", self.densify_from.to_string());
        kv("densify_interval", self.densify_interval.to_string());
        kv("densify_until", self.densify_until.to_string());
        kv("pseudo_from", self.pseudo_from.to_string());
        kv(
            "opacity_reset_iters",
            self.opacity_reset_iters
                .iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join(", "),
        );
        kv("opacity_reset_value", self.opacity_reset_value.to_string());
        kv("lr_position", self.lr_position.to_string());
        kv("lr_position_final", self.lr_position_final.to_string());
        kv("position_lr_scale", fmt_auto(self.position_lr_scale));
        kv("lr_sh", self.lr_sh.to_string());
        kv("sh_rest_lr_factor", self.sh_rest_lr_factor.to_string());
        kv("lr_opacity", self.lr_opacity.to_string());
        kv("lr_scaling", self.lr_scaling.to_string());
        kv("lr_rotation", self.lr_rotation.to_string());
        kv("sh_degree_max", self.sh_degree_max.to_string());
        kv("sh_degree_interval", self.sh_degree_interval.to_string());
        kv("min_opacity", self.min_opacity.to_string());
        kv("max_world_scale", self.max_world_scale.to_string());
        kv("dense_scale", self.dense_scale.to_string());
        kv("split_factor", self.split_factor.to_string());
        kv("scene_extent", fmt_auto(self.scene_extent));
        kv("enable_unpool", self.enable_unpool.to_string());
        kv("enable_gradient_densify", self.enable_gradient_densify.to_string());
        kv("enable_pseudo", self.enable_pseudo.to_string());
        kv("pseudo_noise", fmt_auto(self.pseudo_noise));
        kv(
            "pseudo_pairing",
            match self.pseudo_pairing {
                PseudoPairing::RandomAnchor => "random_anchor",
                PseudoPairing::ClosestPair => "closest_pair",
            }
            .into(),
        );
        kv("alpha_gate", self.alpha_gate.to_string());
        kv(
            "depth_mode",
            match self.depth_mode {
                DepthMode::Disparity => "disparity",
                DepthMode::Metric => "metric",
            }
            .into(),
        );
        kv("normalize_depth", self.normalize_depth.to_string());
        kv("white_background", self.white_background.to_string());
        kv("checkpoint_interval", self.checkpoint_interval.to_string());
        kv("seed", self.seed.to_string());
        s
    }
}
