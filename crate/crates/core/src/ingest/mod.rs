//! Reading COLMAP models, images, depth priors and point clouds, Gaussian
//! initialization from points, and PLY checkpoints.

mod colmap;
mod images;
mod init;
mod pfm;
mod ply;

pub use colmap::{
    detect_format, parse_colmap_model, CameraModel, Intrinsics, ModelFormat, SfmImage, SfmModel, SfmPoint,
};
pub use images::{downsample, load_image, save_png};
pub use init::{init_gaussians_from_points, INITIAL_OPACITY};
pub use pfm::{encode_pfm, load_depth_prior, load_depth_prior_for, save_pfm, DepthPrior};
pub use ply::{export_ply, import_ply, read_point_cloud, read_vertices, write_ply, VertexTable};
