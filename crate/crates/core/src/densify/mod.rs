//! Population control: proximity graph and unpooling, gradient-driven
//! clone/split, pruning and opacity reset.
//!
//! Every operation that changes the number or order of Gaussians returns a
//! [`Lineage`] so optimizer moments and statistics can follow along. Any
//! outstanding [`ProximityGraph`] is stale afterwards.

mod knn;

pub use knn::{knn_all, KdTree};

use rand::Rng;
use rand_distr::StandardNormal;

use crate::raster::GradientBuffer;
use crate::real::logit;
use crate::scene::linalg::{add3, dist2, mul3_vec, unit_quat_to_rotation, Vec3};
use crate::scene::{normalize_quat, GaussianSet, Lineage};
use crate::{Error, Real, Result};

/// Directed k-nearest-neighbor graph over Gaussian centers.
#[derive(Clone, Debug, PartialEq)]
pub struct ProximityGraph<T = f32> {
    k: usize,
    neighbors: Vec<usize>,
    distances: Vec<T>,
    scores: Vec<T>,
}

impl<T: Real> ProximityGraph<T> {
    pub fn k(&self) -> usize {
        self.k
    }

    /// Number of Gaussians the graph was built over.
    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// Neighbor indices of `i`, nearest first.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i * self.k..(i + 1) * self.k]
    }

    /// Euclidean distances matching [`ProximityGraph::neighbors`].
    pub fn distances(&self, i: usize) -> &[T] {
        &self.distances[i * self.k..(i + 1) * self.k]
    }

    /// Mean neighbor distance of every Gaussian.
    pub fn scores(&self) -> &[T] {
        &self.scores
    }

    /// Whether the directed edge `i → j` exists.
    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.neighbors(i).contains(&j)
    }
}

/// Connect every Gaussian to its `k` nearest neighbors (exact, ties broken
/// by index) and score it by the mean neighbor distance.
pub fn build_proximity_graph<T: Real>(set: &GaussianSet<T>, k: usize) -> Result<ProximityGraph<T>> {
    if k == 0 || set.len() <= k {
        return Err(Error::InvalidInput(format!(
            "proximity graph needs more than k = {k} Gaussians, got {}",
            set.len()
        )));
    }
    let knn = knn_all(&set.means, k);
    let n = set.len();
    let mut neighbors = Vec::with_capacity(n * k);
    let mut distances = Vec::with_capacity(n * k);
    let mut scores = Vec::with_capacity(n);
    for list in knn {
        let mut sum = T::zero();
        for (j, d2) in list {
            let d = d2.sqrt();
            neighbors.push(j);
            distances.push(d);
            sum += d;
        }
        scores.push(sum / T::from_usize(k));
    }
    Ok(ProximityGraph {
        k,
        neighbors,
        distances,
        scores,
    })
}

/// Mean distance from each Gaussian to its graph neighbors.
pub fn proximity_scores<T: Real>(graph: &ProximityGraph<T>) -> Vec<T> {
    graph.scores.clone()
}

/// The directed edges unpooling turns into new Gaussians, in insertion
/// order: sources in index order, neighbors nearest first. When both
/// `i → j` and `j → i` qualify only the edge from the lower index is kept.
pub fn unpool_edges<T: Real>(graph: &ProximityGraph<T>, t_prox: T) -> Vec<(usize, usize)> {
    let eligible = |i: usize| graph.scores[i] > t_prox;
    let mut edges = Vec::new();
    for i in 0..graph.len() {
        if !eligible(i) {
            continue;
        }
        for &j in graph.neighbors(i) {
            if i > j && eligible(j) && graph.has_edge(j, i) {
                continue;
            }
            edges.push((i, j));
        }
    }
    edges
}

/// Grow a Gaussian at the midpoint of every edge leaving a Gaussian whose
/// proximity score exceeds `t_prox`.
///
/// New Gaussians take scale and opacity from the edge's destination, have
/// all SH coefficients zero and the identity rotation. They are appended
/// after the existing ones, which are left untouched.
pub fn gaussian_unpool<T: Real>(
    set: &mut GaussianSet<T>,
    graph: &ProximityGraph<T>,
    t_prox: T,
) -> Result<Lineage> {
    if graph.len() != set.len() {
        return Err(Error::InvalidInput(format!(
            "proximity graph covers {} Gaussians, set has {}",
            graph.len(),
            set.len()
        )));
    }
    let mut lineage = Lineage::identity(set.len());
    let two = T::lit(2.0);
    let zero = T::zero();
    for (i, j) in unpool_edges(graph, t_prox) {
        let (a, b) = (set.means[i], set.means[j]);
        set.means.push([(a[0] + b[0]) / two, (a[1] + b[1]) / two, (a[2] + b[2]) / two]);
        set.log_scales.push(set.log_scales[j]);
        set.rotations.push([T::one(), zero, zero, zero]);
        set.opacity_logits.push(set.opacity_logits[j]);
        let k = set.sh_coeffs();
        set.sh.extend(std::iter::repeat_n([zero; 3], k));
        lineage.sources.push(None);
    }
    Ok(lineage)
}

/// View-space positional gradient statistics gathered between densify
/// events.
#[derive(Clone, Debug, PartialEq)]
pub struct DensifyStats<T = f32> {
    pub grad_accum: Vec<T>,
    pub hits: Vec<u32>,
}

impl<T: Real> DensifyStats<T> {
    pub fn new(n: usize) -> Self {
        Self {
            grad_accum: vec![T::zero(); n],
            hits: vec![0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.hits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hits.is_empty()
    }

    /// Add one backward pass: Gaussians visible in it count one hit.
    pub fn accumulate(&mut self, grads: &GradientBuffer<T>) {
        assert_eq!(grads.len(), self.len(), "stats and gradients differ in length");
        for i in 0..self.len() {
            if grads.hits[i] > 0 {
                self.grad_accum[i] += grads.mean2d_norm[i];
                self.hits[i] += grads.hits[i];
            }
        }
    }

    /// Average gradient magnitude per hit; zero for never-visible Gaussians.
    pub fn mean_grad(&self, i: usize) -> T {
        if self.hits[i] == 0 {
            T::zero()
        } else {
            self.grad_accum[i] / T::lit(self.hits[i] as f64)
        }
    }

    pub fn reset(&mut self, n: usize) {
        *self = Self::new(n);
    }

    pub fn remap(&mut self, lineage: &Lineage) {
        self.grad_accum = lineage.gather(&self.grad_accum, T::zero());
        self.hits = lineage.gather(&self.hits, 0);
    }
}

/// Thresholds for [`gradient_densify_clone_split`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CloneSplitParams<T = f32> {
    /// Mean view-space gradient magnitude above which a Gaussian densifies.
    pub t_pos: T,
    pub scene_extent: T,
    /// Gaussians whose largest scale is below this fraction of the scene
    /// extent are cloned, larger ones split.
    pub dense_fraction: T,
    /// Children of a split have their scales divided by this.
    pub split_factor: T,
}

impl<T: Real> CloneSplitParams<T> {
    pub fn new(t_pos: T, scene_extent: T) -> Self {
        Self {
            t_pos,
            scene_extent,
            dense_fraction: T::lit(0.01),
            split_factor: T::lit(1.6),
        }
    }
}

/// Clone small and split large Gaussians whose mean view-space gradient
/// exceeds `t_pos`.
///
/// Output order: surviving originals, then clones, then the two children
/// of each split parent. Clones and children are new entries in the
/// returned lineage.
pub fn gradient_densify_clone_split<T: Real, R: Rng + ?Sized>(
    set: &mut GaussianSet<T>,
    stats: &DensifyStats<T>,
    params: &CloneSplitParams<T>,
    rng: &mut R,
) -> Lineage {
    assert_eq!(stats.len(), set.len(), "stats and set differ in length");
    let limit = params.dense_fraction * params.scene_extent;
    let mut keep = Vec::with_capacity(set.len());
    let mut clones = Vec::new();
    let mut splits = Vec::new();
    for i in 0..set.len() {
        if stats.mean_grad(i) > params.t_pos {
            if set.max_scale(i) < limit {
                clones.push(i);
            } else {
                splits.push(i);
                continue;
            }
        }
        keep.push(i);
    }
    if clones.is_empty() && splits.is_empty() {
        return Lineage::identity(set.len());
    }

    let mut out = set.select(&keep);
    let mut lineage = Lineage {
        sources: keep.iter().map(|&i| Some(i)).collect(),
    };
    for &i in &clones {
        out.push(set.get(i)).expect("same SH layout");
        lineage.sources.push(None);
    }
    let shrink = params.split_factor.ln();
    for &i in &splits {
        let g = set.get(i);
        let unit = normalize_quat(g.rotation).unwrap_or([T::one(), T::zero(), T::zero(), T::zero()]);
        let rot = unit_quat_to_rotation(unit);
        let scale = g.scale();
        for _ in 0..2 {
            let z: Vec3<T> = [0; 3].map(|_| T::lit(rng.sample::<f64, _>(StandardNormal)));
            let offset = mul3_vec(&rot, [z[0] * scale[0], z[1] * scale[1], z[2] * scale[2]]);
            let mut child = g.clone();
            child.mu = add3(g.mu, offset);
            child.log_scale = g.log_scale.map(|s| s - shrink);
            out.push(child).expect("same SH layout");
            lineage.sources.push(None);
        }
    }
    *set = out;
    lineage
}

/// Remove Gaussians that are nearly transparent or too large.
pub fn prune<T: Real>(set: &mut GaussianSet<T>, min_opacity: T, max_world_scale: T) -> Lineage {
    let keep: Vec<usize> = (0..set.len())
        .filter(|&i| !(set.opacity(i) < min_opacity || set.max_scale(i) > max_world_scale))
        .collect();
    if keep.len() == set.len() {
        return Lineage::identity(set.len());
    }
    *set = set.select(&keep);
    Lineage {
        sources: keep.into_iter().map(Some).collect(),
    }
}

/// Set every activated opacity to `value`.
pub fn reset_opacity<T: Real>(set: &mut GaussianSet<T>, value: T) {
    let l = logit(value);
    set.opacity_logits.iter_mut().for_each(|o| *o = l);
}

/// Radius of the training cameras' bounding sphere about their mean center,
/// enlarged by 10%.
pub fn scene_extent<T: Real>(centers: &[Vec3<T>]) -> T {
    if centers.is_empty() {
        return T::zero();
    }
    let n = T::from_usize(centers.len());
    let mut mean = [T::zero(); 3];
    for c in centers {
        for a in 0..3 {
            mean[a] += c[a] / n;
        }
    }
    let radius = centers
        .iter()
        .map(|&c| dist2(c, mean).sqrt())
        .fold(T::zero(), T::max);
    radius * T::lit(1.1)
}
