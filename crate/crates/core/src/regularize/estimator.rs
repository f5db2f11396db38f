//! Sources of monocular depth priors.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Mutex;

use crate::buffer::Image;
use crate::ingest::{load_depth_prior, save_png, DepthPrior};
use crate::scene::Camera;
use crate::{Error, Result};

/// What an estimator is asked to produce a prior for.
#[derive(Clone, Copy, Debug)]
pub struct EstimateRequest<'a> {
    pub image: &'a Image<f32>,
    pub camera: &'a Camera<f32>,
    /// File name of a training view; `None` for synthesized views.
    pub name: Option<&'a str>,
}

/// Produces a disparity prior the size of the requested image.
pub trait DepthEstimator: Send + Sync {
    fn estimate(&self, request: &EstimateRequest<'_>) -> Result<DepthPrior>;

    /// Whether views with no file behind them (pseudo views) can be served.
    fn supports_unseen_views(&self) -> bool {
        true
    }
}

/// Run an estimator and check that the prior matches the image size.
pub fn estimate_checked(estimator: &dyn DepthEstimator, request: &EstimateRequest<'_>) -> Result<DepthPrior> {
    let prior = estimator.estimate(request)?;
    let (w, h) = (request.image.width, request.image.height);
    if prior.width() != w || prior.height() != h {
        return Err(Error::Estimator(format!(
            "prior is {}x{}, image is {w}x{h}",
            prior.width(),
            prior.height()
        )));
    }
    Ok(prior)
}

/// Pre-computed priors: `<dir>/<image stem>.pfm` for each training view.
#[derive(Clone, Debug)]
pub struct FilePrior {
    pub dir: PathBuf,
}

impl FilePrior {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn path_for(&self, image_name: &str) -> PathBuf {
        let stem = Path::new(image_name)
            .file_stem()
            .map_or_else(|| image_name.into(), |s| s.to_os_string());
        let mut file = stem;
        file.push(".pfm");
        self.dir.join(file)
    }
}

impl DepthEstimator for FilePrior {
    fn estimate(&self, request: &EstimateRequest<'_>) -> Result<DepthPrior> {
        let name = request
            .name
            .ok_or_else(|| Error::Estimator("file priors exist only for training views".into()))?;
        load_depth_prior(&self.path_for(name))
    }

    fn supports_unseen_views(&self) -> bool {
        false
    }
}

/// Runs a shell command per request. `{input}` in the template is replaced
/// by a PNG of the view, `{output}` by the PFM path the command must write.
/// Invocations are serialized.
#[derive(Debug)]
pub struct ExternalCommand {
    template: String,
    lock: Mutex<()>,
}

impl ExternalCommand {
    pub fn new(template: impl Into<String>) -> Result<Self> {
        let template = template.into();
        if !template.contains("{output}") {
            return Err(Error::InvalidParameter(
                "depth command template must contain {output}".into(),
            ));
        }
        Ok(Self {
            template,
            lock: Mutex::new(()),
        })
    }
}

fn shell_quote(path: &Path) -> String {
    format!("'{}'", path.to_string_lossy().replace('\'', r"'\''"))
}

impl DepthEstimator for ExternalCommand {
    fn estimate(&self, request: &EstimateRequest<'_>) -> Result<DepthPrior> {
        let _guard = self.lock.lock().unwrap_or_else(|e| e.into_inner());
        let dir = tempfile::tempdir().map_err(|e| Error::io(std::env::temp_dir(), e))?;
        let input = dir.path().join("view.png");
        let output = dir.path().join("depth.pfm");
        save_png(request.image, &input)?;
        let cmd = self
            .template
            .replace("{input}", &shell_quote(&input))
            .replace("{output}", &shell_quote(&output));
        let result = Command::new("sh")
            .arg("-c")
            .arg(&cmd)
            .output()
            .map_err(|e| Error::Estimator(format!("cannot run '{cmd}': {e}")))?;
        if !result.status.success() {
            return Err(Error::Estimator(format!(
                "'{cmd}' exited with {}: {}",
                result.status,
                String::from_utf8_lossy(&result.stderr).trim()
            )));
        }
        load_depth_prior(&output)
    }
}
