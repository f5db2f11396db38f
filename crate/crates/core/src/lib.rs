//! Differentiable CPU Gaussian splatting for novel-view synthesis from a
//! handful of input images.
//!
//! The crate is organised around the training pipeline:
//!
//! * [`scene`] holds the Gaussian representation, cameras and configuration.
//! * [`ingest`] reads COLMAP models, images, PFM depth priors and PLY splats.
//! * [`raster`] renders color and depth and back-propagates through both.
//! * [`densify`] grows and prunes the Gaussian population, including
//!   proximity-guided unpooling along a k-nearest-neighbour graph.
//! * [`regularize`] provides the photometric and Pearson depth losses and
//!   pseudo-view sampling.
//! * [`train`] runs the optimisation loop.
//! * [`metrics`] evaluates PSNR and SSIM.

pub mod buffer;
pub mod densify;
pub mod error;
pub mod ingest;
pub mod metrics;
pub mod raster;
pub mod real;
pub mod regularize;
pub mod scene;
pub mod synthetic;
pub mod train;

pub use error::{Error, Result};
pub use real::Real;
