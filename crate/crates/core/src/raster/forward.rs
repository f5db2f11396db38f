use std::ops::Range;

use rayon::prelude::*;

use crate::buffer::{Grid, Image};
use crate::scene::{Camera, GaussianSet};
use crate::Real;

use super::project::{project_index, ProjectedGaussian};
use super::{ALPHA_CAP, MIN_ALPHA, MIN_TRANSMITTANCE, TILE_SIZE};

#[derive(Clone, Debug, PartialEq)]
pub struct RenderOptions<T = f32> {
    pub active_sh_degree: usize,
    pub background: [T; 3],
}

impl<T: Real> RenderOptions<T> {
    pub fn new(active_sh_degree: usize) -> Self {
        Self {
            active_sh_degree,
            background: [T::zero(); 3],
        }
    }

    pub fn white_background(mut self) -> Self {
        self.background = [T::one(); 3];
        self
    }
}

/// Rendered buffers plus what the backward pass needs to replay blending.
#[derive(Clone, Debug)]
pub struct RenderOutput<T = f32> {
    pub color: Image<T>,
    /// Alpha-blended camera-space depth, not normalised by coverage.
    pub depth: Grid<T>,
    /// Accumulated opacity, `1 - final transmittance`.
    pub alpha: Grid<T>,
    pub final_transmittance: Grid<T>,
    /// Per pixel, one past the last position in its tile list that was
    /// blended.
    pub n_contrib: Vec<u32>,
    /// Per Gaussian, its projection or `None` if culled.
    pub projected: Vec<Option<ProjectedGaussian<T>>>,
    /// Gaussian indices sorted by (tile, depth, index).
    pub sorted: Vec<u32>,
    /// Range of `sorted` belonging to each tile.
    pub tile_ranges: Vec<Range<usize>>,
    pub options: RenderOptions<T>,
    pub(crate) tiles_x: u32,
}

impl<T: Real> RenderOutput<T> {
    pub fn width(&self) -> usize {
        self.color.width
    }

    pub fn height(&self) -> usize {
        self.color.height
    }

    /// Depth divided by coverage where coverage is positive.
    pub fn normalized_depth(&self) -> Grid<T> {
        let data = self
            .depth
            .data
            .iter()
            .zip(&self.alpha.data)
            .map(|(&d, &a)| if a > T::zero() { d / a } else { T::zero() })
            .collect();
        Grid {
            width: self.depth.width,
            height: self.depth.height,
            data,
        }
    }

    /// Chain rule through [`RenderOutput::normalized_depth`]: returns the
    /// gradients with respect to raw depth and alpha.
    pub fn normalized_depth_backward(&self, grad: &Grid<T>) -> (Grid<T>, Grid<T>) {
        let mut gd = Grid::zeros(self.depth.width, self.depth.height);
        let mut ga = Grid::zeros(self.depth.width, self.depth.height);
        for i in 0..grad.data.len() {
            let a = self.alpha.data[i];
            if a > T::zero() {
                gd.data[i] = grad.data[i] / a;
                ga.data[i] = -grad.data[i] * self.depth.data[i] / (a * a);
            }
        }
        (gd, ga)
    }

    /// Number of Gaussians that survived culling.
    pub fn visible_count(&self) -> usize {
        self.projected.iter().filter(|p| p.is_some()).count()
    }
}

pub(crate) struct TileGeometry {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

pub(crate) fn tile_geometry(tile: usize, tiles_x: u32, width: usize, height: usize) -> TileGeometry {
    let tx = tile % tiles_x as usize;
    let ty = tile / tiles_x as usize;
    let ts = TILE_SIZE as usize;
    TileGeometry {
        x0: tx * ts,
        y0: ty * ts,
        x1: ((tx + 1) * ts).min(width),
        y1: ((ty + 1) * ts).min(height),
    }
}

/// `ln(1/255)` rounded down with margin.
const NEGLIGIBLE_POWER: f64 = -5.6;

pub(crate) struct PixelAlpha<T> {
    pub alpha: T,
    /// `exp(power)` of the 2D Gaussian.
    pub falloff: T,
    /// Alpha hit [`ALPHA_CAP`].
    pub capped: bool,
    pub dx: T,
    pub dy: T,
}

/// Alpha of a projected Gaussian at a pixel center, before the skip test;
/// `None` if the quadratic form is positive or too negative to matter.
#[inline]
pub(crate) fn pixel_alpha<T: Real>(g: &ProjectedGaussian<T>, px: T, py: T) -> Option<PixelAlpha<T>> {
    let dx = g.mean2d[0] - px;
    let dy = g.mean2d[1] - py;
    let [a, b, c] = g.conic;
    let power = T::lit(-0.5) * (a * dx * dx + c * dy * dy) - b * dx * dy;
    // below NEGLIGIBLE_POWER alpha < 1/255 whatever the opacity, so the
    // pixel would be skipped anyway
    if power > T::zero() || power < T::lit(NEGLIGIBLE_POWER) {
        return None;
    }
    let falloff = power.exp();
    let raw = g.opacity * falloff;
    let cap = T::lit(ALPHA_CAP);
    let capped = raw > cap;
    Some(PixelAlpha {
        alpha: if capped { cap } else { raw },
        falloff,
        capped,
        dx,
        dy,
    })
}

struct TileResult<T> {
    color: Vec<T>,
    depth: Vec<T>,
    transmittance: Vec<T>,
    n_contrib: Vec<u32>,
}

fn blend_tile<T: Real>(
    tile: usize,
    range: &Range<usize>,
    sorted: &[u32],
    projected: &[Option<ProjectedGaussian<T>>],
    tiles_x: u32,
    width: usize,
    height: usize,
    background: [T; 3],
) -> TileResult<T> {
    let geo = tile_geometry(tile, tiles_x, width, height);
    let npix = (geo.x1 - geo.x0) * (geo.y1 - geo.y0);
    let mut out = TileResult {
        color: Vec::with_capacity(npix * 3),
        depth: Vec::with_capacity(npix),
        transmittance: Vec::with_capacity(npix),
        n_contrib: Vec::with_capacity(npix),
    };
    let min_alpha = T::lit(MIN_ALPHA);
    let min_t = T::lit(MIN_TRANSMITTANCE);
    let half = T::lit(0.5);
    for y in geo.y0..geo.y1 {
        let py = T::from_usize(y) + half;
        for x in geo.x0..geo.x1 {
            let px = T::from_usize(x) + half;
            let mut trans = T::one();
            let mut rgb = [T::zero(); 3];
            let mut depth = T::zero();
            let mut last = 0u32;
            for (pos, &gi) in sorted[range.clone()].iter().enumerate() {
                let g = projected[gi as usize].as_ref().expect("sorted Gaussians are visible");
                let Some(PixelAlpha { alpha, .. }) = pixel_alpha(g, px, py) else {
                    continue;
                };
                if alpha < min_alpha {
                    continue;
                }
                let next = trans * (T::one() - alpha);
                if next < min_t {
                    break;
                }
                let w = alpha * trans;
                for ch in 0..3 {
                    rgb[ch] += g.color[ch] * w;
                }
                depth += g.z * w;
                trans = next;
                last = pos as u32 + 1;
            }
            for ch in 0..3 {
                rgb[ch] += trans * background[ch];
            }
            out.color.extend_from_slice(&rgb);
            out.depth.push(depth);
            out.transmittance.push(trans);
            out.n_contrib.push(last);
        }
    }
    out
}

/// Render color, depth and coverage of `set` seen from `cam`.
///
/// Gaussians are binned into 16×16 tiles, sorted front to back per tile
/// and alpha-blended per pixel.
pub fn render_forward<T: Real>(
    set: &GaussianSet<T>,
    cam: &Camera<T>,
    options: &RenderOptions<T>,
) -> RenderOutput<T> {
    let width = cam.width as usize;
    let height = cam.height as usize;
    let tiles_x = cam.width.div_ceil(TILE_SIZE);
    let tiles_y = cam.height.div_ceil(TILE_SIZE);
    let num_tiles = (tiles_x * tiles_y) as usize;
    let center = cam.center();

    let projected: Vec<Option<ProjectedGaussian<T>>> = (0..set.len())
        .into_par_iter()
        .map(|i| project_index(set, i, cam, center, options.active_sh_degree))
        .collect();

    let mut keys: Vec<(u32, T, u32)> = Vec::new();
    for (i, p) in projected.iter().enumerate() {
        if let Some(p) = p {
            let [x0, y0, x1, y1] = p.tile_rect;
            for ty in y0..y1 {
                for tx in x0..x1 {
                    keys.push((ty * tiles_x + tx, p.z, i as u32));
                }
            }
        }
    }
    keys.sort_unstable_by(|a, b| {
        a.0.cmp(&b.0)
            .then_with(|| a.1.partial_cmp(&b.1).expect("finite depth"))
            .then_with(|| a.2.cmp(&b.2))
    });
    let sorted: Vec<u32> = keys.iter().map(|k| k.2).collect();
    let mut tile_ranges = vec![0..0; num_tiles];
    let mut start = 0;
    while start < keys.len() {
        let tile = keys[start].0;
        let mut end = start;
        while end < keys.len() && keys[end].0 == tile {
            end += 1;
        }
        tile_ranges[tile as usize] = start..end;
        start = end;
    }

    let results: Vec<TileResult<T>> = (0..num_tiles)
        .into_par_iter()
        .map(|tile| {
            blend_tile(
                tile,
                &tile_ranges[tile],
                &sorted,
                &projected,
                tiles_x,
                width,
                height,
                options.background,
            )
        })
        .collect();

    let mut color = Image::zeros(width, height);
    let mut depth = Grid::zeros(width, height);
    let mut final_t = Grid::zeros(width, height);
    let mut n_contrib = vec![0u32; width * height];
    for (tile, res) in results.iter().enumerate() {
        let geo = tile_geometry(tile, tiles_x, width, height);
        let mut k = 0;
        for y in geo.y0..geo.y1 {
            for x in geo.x0..geo.x1 {
                let p = y * width + x;
                color.data[3 * p..3 * p + 3].copy_from_slice(&res.color[3 * k..3 * k + 3]);
                depth.data[p] = res.depth[k];
                final_t.data[p] = res.transmittance[k];
                n_contrib[p] = res.n_contrib[k];
                k += 1;
            }
        }
    }
    let alpha = Grid {
        width,
        height,
        data: final_t.data.iter().map(|&t| T::one() - t).collect(),
    };

    RenderOutput {
        color,
        depth,
        alpha,
        final_transmittance: final_t,
        n_contrib,
        projected,
        sorted,
        tile_ranges,
        options: options.clone(),
        tiles_x,
    }
}
