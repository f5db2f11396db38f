//! Gaussian scene representation, cameras and training configuration.

mod camera;
pub mod config;
mod gaussian;
pub mod linalg;
pub mod sh;

pub use camera::Camera;
pub use config::{Auto, DepthMode, PseudoPairing, TrainingConfig};
pub use gaussian::{covariance_from_params, gaussian_density, normalize_quat, Gaussian};
pub(crate) use gaussian::covariance_from_rotation_scale;
pub use sh::{eval_sh, num_coeffs};

use crate::real::sigmoid;
use crate::{Error, Real, Result};

use linalg::{Quat, Vec3};

/// All Gaussians of a scene, stored as parallel arrays.
///
/// `sh` holds `num_coeffs(sh_degree)` RGB triples per Gaussian, contiguous
/// per Gaussian.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianSet<T = f32> {
    pub means: Vec<Vec3<T>>,
    pub log_scales: Vec<Vec3<T>>,
    pub rotations: Vec<Quat<T>>,
    pub opacity_logits: Vec<T>,
    pub sh: Vec<[T; 3]>,
    sh_degree: usize,
}

impl<T: Real> GaussianSet<T> {
    pub fn new(sh_degree: usize) -> Self {
        assert!(sh_degree <= sh::MAX_SH_DEGREE, "SH degree {sh_degree} unsupported");
        Self {
            means: Vec::new(),
            log_scales: Vec::new(),
            rotations: Vec::new(),
            opacity_logits: Vec::new(),
            sh: Vec::new(),
            sh_degree,
        }
    }

    pub fn with_capacity(sh_degree: usize, capacity: usize) -> Self {
        let mut set = Self::new(sh_degree);
        set.means.reserve(capacity);
        set.log_scales.reserve(capacity);
        set.rotations.reserve(capacity);
        set.opacity_logits.reserve(capacity);
        set.sh.reserve(capacity * num_coeffs(sh_degree));
        set
    }

    pub fn len(&self) -> usize {
        self.means.len()
    }

    pub fn is_empty(&self) -> bool {
        self.means.is_empty()
    }

    pub fn sh_degree(&self) -> usize {
        self.sh_degree
    }

    pub fn sh_coeffs(&self) -> usize {
        num_coeffs(self.sh_degree)
    }

    pub fn sh_of(&self, i: usize) -> &[[T; 3]] {
        let k = self.sh_coeffs();
        &self.sh[i * k..(i + 1) * k]
    }

    pub fn sh_of_mut(&mut self, i: usize) -> &mut [[T; 3]] {
        let k = self.sh_coeffs();
        &mut self.sh[i * k..(i + 1) * k]
    }

    pub fn opacity(&self, i: usize) -> T {
        sigmoid(self.opacity_logits[i])
    }

    pub fn scale(&self, i: usize) -> Vec3<T> {
        self.log_scales[i].map(T::exp)
    }

    pub fn max_scale(&self, i: usize) -> T {
        let s = self.scale(i);
        s[0].max(s[1]).max(s[2])
    }

    /// Append a Gaussian. Missing SH coefficients are zero-filled, extra
    /// ones are an error.
    pub fn push(&mut self, g: Gaussian<T>) -> Result<()> {
        let k = self.sh_coeffs();
        if g.sh.len() > k {
            return Err(Error::InvalidInput(format!(
                "{} SH coefficients exceed degree {}",
                g.sh.len(),
                self.sh_degree
            )));
        }
        self.means.push(g.mu);
        self.log_scales.push(g.log_scale);
        self.rotations.push(g.rotation);
        self.opacity_logits.push(g.opacity_logit);
        self.sh.extend_from_slice(&g.sh);
        self.sh.extend(std::iter::repeat_n([T::zero(); 3], k - g.sh.len()));
        Ok(())
    }

    pub fn get(&self, i: usize) -> Gaussian<T> {
        Gaussian {
            mu: self.means[i],
            log_scale: self.log_scales[i],
            rotation: self.rotations[i],
            opacity_logit: self.opacity_logits[i],
            sh: self.sh_of(i).to_vec(),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = Gaussian<T>> + '_ {
        (0..self.len()).map(|i| self.get(i))
    }

    /// Copy of Gaussian `src` appended at the end.
    pub fn duplicate(&mut self, src: usize) {
        let g = self.get(src);
        self.push(g).expect("same SH layout");
    }

    /// Keep the entries whose indices are listed, in that order.
    pub fn select(&self, indices: &[usize]) -> Self {
        let mut out = Self::with_capacity(self.sh_degree, indices.len());
        for &i in indices {
            out.push(self.get(i)).expect("same SH layout");
        }
        out
    }

    pub fn cast<U: Real>(&self) -> GaussianSet<U> {
        let c = |v: T| U::lit(v.as_f64());
        GaussianSet {
            means: self.means.iter().map(|v| v.map(c)).collect(),
            log_scales: self.log_scales.iter().map(|v| v.map(c)).collect(),
            rotations: self.rotations.iter().map(|v| v.map(c)).collect(),
            opacity_logits: self.opacity_logits.iter().map(|&v| c(v)).collect(),
            sh: self.sh.iter().map(|v| v.map(c)).collect(),
            sh_degree: self.sh_degree,
        }
    }

    /// Check array lengths and finiteness.
    pub fn validate(&self) -> Result<()> {
        let n = self.len();
        if self.log_scales.len() != n
            || self.rotations.len() != n
            || self.opacity_logits.len() != n
            || self.sh.len() != n * self.sh_coeffs()
        {
            return Err(Error::InvalidInput("parameter arrays out of sync".into()));
        }
        let finite = self.means.iter().flatten().all(|v| v.is_finite())
            && self.log_scales.iter().flatten().all(|v| v.is_finite())
            && self.rotations.iter().flatten().all(|v| v.is_finite())
            && self.opacity_logits.iter().all(|v| v.is_finite())
            && self.sh.iter().flatten().all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidInput("non-finite Gaussian parameter".into()));
        }
        Ok(())
    }
}

/// Provenance of every entry after a population change: `Some(old)` for
/// a Gaussian carried over from index `old`, `None` for a newly created
/// one. Used to keep per-Gaussian side arrays (optimizer moments,
/// densification statistics) in lockstep with the set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Lineage {
    pub sources: Vec<Option<usize>>,
}

impl Lineage {
    pub fn identity(n: usize) -> Self {
        Self {
            sources: (0..n).map(Some).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.sources.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sources.is_empty()
    }

    pub fn is_identity(&self) -> bool {
        self.sources.iter().enumerate().all(|(i, s)| *s == Some(i))
    }

    /// Rearrange a side array; new entries get `fill`.
    pub fn gather<V: Clone>(&self, old: &[V], fill: V) -> Vec<V> {
        self.sources
            .iter()
            .map(|s| s.map_or_else(|| fill.clone(), |i| old[i].clone()))
            .collect()
    }

    /// Like [`Lineage::gather`] for arrays with `stride` values per entry.
    pub fn gather_strided<V: Clone>(&self, old: &[V], stride: usize, fill: V) -> Vec<V> {
        let mut out = Vec::with_capacity(self.len() * stride);
        for s in &self.sources {
            match s {
                Some(i) => out.extend_from_slice(&old[i * stride..(i + 1) * stride]),
                None => out.extend(std::iter::repeat_n(fill.clone(), stride)),
            }
        }
        out
    }

    /// `self` applied after `first`: maps final indices to indices before
    /// `first`.
    pub fn compose(&self, first: &Lineage) -> Lineage {
        Lineage {
            sources: self
                .sources
                .iter()
                .map(|s| s.and_then(|i| first.sources[i]))
                .collect(),
        }
    }
}
