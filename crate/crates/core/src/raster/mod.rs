//! Tile-based Gaussian rasterization of color, depth and coverage, with an
//! analytic backward pass.

mod backward;
mod forward;
mod project;

pub use backward::{render_backward, GradientBuffer};
pub use forward::{render_forward, RenderOptions, RenderOutput};
pub use project::{project_gaussian, screen_covariance, ProjectedGaussian};

pub const TILE_SIZE: u32 = 16;
/// Upper bound on a single Gaussian's alpha.
pub const ALPHA_CAP: f64 = 0.99;
/// Contributions below this alpha are skipped.
pub const MIN_ALPHA: f64 = 1.0 / 255.0;
/// Blending stops before transmittance would fall below this.
pub const MIN_TRANSMITTANCE: f64 = 1e-4;
/// Added to both diagonal entries of the screen covariance.
pub const DILATION: f64 = 0.3;
/// Camera-space depth at or below which Gaussians are culled.
pub const NEAR_PLANE: f64 = 0.2;
/// Projected centers further out than this multiple of the image extent are
/// culled.
pub const FRUSTUM_GUARD: f64 = 1.3;
