//! Loss terms, pseudo-view sampling and depth-prior sources.

mod depth;
mod estimator;
mod photometric;
mod pseudo;

pub use crate::ingest::DepthPrior;
pub use depth::{
    depth_regularization_loss, pearson_correlation, DepthLoss, DepthLossOptions, DISPARITY_EPS,
};
pub use estimator::{estimate_checked, DepthEstimator, EstimateRequest, ExternalCommand, FilePrior};
pub use photometric::{dssim_loss, dssim_loss_grad, l1_loss, l1_loss_grad, ssim};
pub use pseudo::{average_quaternion, default_pseudo_noise, sample_pseudo_camera, PseudoCamera};
