//! Adam with one moment pair per parameter group.

use std::io::{Read, Write};

use crate::raster::GradientBuffer;
use crate::scene::{GaussianSet, Lineage};
use crate::{Error, Result};

pub const BETA1: f32 = 0.9;
pub const BETA2: f32 = 0.999;
pub const EPSILON: f32 = 1e-15;

/// Learning rates for one step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GroupRates {
    pub position: f32,
    pub sh_dc: f32,
    pub sh_rest: f32,
    pub opacity: f32,
    pub scaling: f32,
    pub rotation: f32,
}

/// First and second moments of one parameter group.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Moments {
    pub m: Vec<f32>,
    pub v: Vec<f32>,
}

impl Moments {
    fn zeros(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
        }
    }

    fn remap(&mut self, lineage: &Lineage, stride: usize) {
        self.m = lineage.gather_strided(&self.m, stride, 0.0);
        self.v = lineage.gather_strided(&self.v, stride, 0.0);
    }
}

/// Adam state for a Gaussian set. Moments follow the set through
/// population changes via [`OptimizerState::remap`]; the step counter is
/// shared by all groups.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerState {
    pub step: u64,
    /// SH coefficients per Gaussian, fixing the layout of `sh_dc`/`sh_rest`.
    pub sh_coeffs: usize,
    pub means: Moments,
    pub log_scales: Moments,
    pub rotations: Moments,
    pub opacity: Moments,
    pub sh_dc: Moments,
    pub sh_rest: Moments,
}

/// One Adam update of `params` in place.
pub fn adam_update(params: &mut [f32], grads: &[f32], state: &mut Moments, lr: f32, step: u64) {
    debug_assert_eq!(params.len(), grads.len());
    debug_assert_eq!(params.len(), state.m.len());
    let t = step.min(i32::MAX as u64) as i32;
    let bc1 = 1.0 - BETA1.powi(t);
    let bc2 = 1.0 - BETA2.powi(t);
    let step_size = lr / bc1;
    let bc2_sqrt = bc2.sqrt();
    for i in 0..params.len() {
        let g = grads[i];
        let m = BETA1 * state.m[i] + (1.0 - BETA1) * g;
        let v = BETA2 * state.v[i] + (1.0 - BETA2) * g * g;
        state.m[i] = m;
        state.v[i] = v;
        params[i] -= step_size * m / (v.sqrt() / bc2_sqrt + EPSILON);
    }
}

fn split_sh(sh: &[[f32; 3]], coeffs: usize) -> (Vec<f32>, Vec<f32>) {
    let mut dc = Vec::with_capacity(3 * sh.len() / coeffs.max(1));
    let mut rest = Vec::with_capacity(3 * sh.len());
    for chunk in sh.chunks(coeffs) {
        dc.extend_from_slice(&chunk[0]);
        for c in &chunk[1..] {
            rest.extend_from_slice(c);
        }
    }
    (dc, rest)
}

impl OptimizerState {
    pub fn new(set: &GaussianSet<f32>) -> Self {
        let n = set.len();
        let k = set.sh_coeffs();
        Self {
            step: 0,
            sh_coeffs: k,
            means: Moments::zeros(3 * n),
            log_scales: Moments::zeros(3 * n),
            rotations: Moments::zeros(4 * n),
            opacity: Moments::zeros(n),
            sh_dc: Moments::zeros(3 * n),
            sh_rest: Moments::zeros(3 * n * (k - 1)),
        }
    }

    /// Number of Gaussians the moments describe.
    pub fn len(&self) -> usize {
        self.opacity.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Advance the step counter and update every group.
    pub fn step(&mut self, set: &mut GaussianSet<f32>, grads: &GradientBuffer<f32>, rates: &GroupRates) {
        assert_eq!(set.len(), self.len(), "optimizer out of sync with the set");
        assert_eq!(grads.len(), self.len(), "gradients out of sync with the set");
        self.step += 1;
        let t = self.step;
        adam_update(set.means.as_flattened_mut(), grads.means.as_flattened(), &mut self.means, rates.position, t);
        adam_update(
            set.log_scales.as_flattened_mut(),
            grads.log_scales.as_flattened(),
            &mut self.log_scales,
            rates.scaling,
            t,
        );
        adam_update(
            set.rotations.as_flattened_mut(),
            grads.rotations.as_flattened(),
            &mut self.rotations,
            rates.rotation,
            t,
        );
        adam_update(&mut set.opacity_logits, &grads.opacity_logits, &mut self.opacity, rates.opacity, t);

        let k = self.sh_coeffs;
        let (mut dc, mut rest) = split_sh(&set.sh, k);
        let (g_dc, g_rest) = split_sh(&grads.sh, k);
        adam_update(&mut dc, &g_dc, &mut self.sh_dc, rates.sh_dc, t);
        adam_update(&mut rest, &g_rest, &mut self.sh_rest, rates.sh_rest, t);
        for (i, chunk) in set.sh.chunks_mut(k).enumerate() {
            chunk[0].copy_from_slice(&dc[3 * i..3 * i + 3]);
            for (j, c) in chunk[1..].iter_mut().enumerate() {
                let o = 3 * (i * (k - 1) + j);
                c.copy_from_slice(&rest[o..o + 3]);
            }
        }
    }

    /// Carry moments across a population change; new entries start at zero.
    pub fn remap(&mut self, lineage: &Lineage) {
        self.means.remap(lineage, 3);
        self.log_scales.remap(lineage, 3);
        self.rotations.remap(lineage, 4);
        self.opacity.remap(lineage, 1);
        self.sh_dc.remap(lineage, 3);
        self.sh_rest.remap(lineage, 3 * (self.sh_coeffs - 1));
    }

    /// Forget the opacity moments, as after overwriting all opacities.
    pub fn reset_opacity_moments(&mut self) {
        self.opacity = Moments::zeros(self.len());
    }

    fn groups(&self) -> [&Moments; 6] {
        [&self.means, &self.log_scales, &self.rotations, &self.opacity, &self.sh_dc, &self.sh_rest]
    }

    /// Binary sidecar: magic, version, step, sizes, then every moment array
    /// as little-endian `f32`.
    pub fn write_to(&self, w: &mut impl Write) -> std::io::Result<()> {
        w.write_all(SIDECAR_MAGIC)?;
        w.write_all(&SIDECAR_VERSION.to_le_bytes())?;
        w.write_all(&self.step.to_le_bytes())?;
        w.write_all(&(self.len() as u64).to_le_bytes())?;
        w.write_all(&(self.sh_coeffs as u32).to_le_bytes())?;
        for g in self.groups() {
            for arr in [&g.m, &g.v] {
                for v in arr.iter() {
                    w.write_all(&v.to_le_bytes())?;
                }
            }
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self> {
        let bad = |msg: &str| Error::InvalidInput(format!("optimizer sidecar: {msg}"));
        let io = |e: std::io::Error| Error::InvalidInput(format!("optimizer sidecar: {e}"));
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(io)?;
        if &magic != SIDECAR_MAGIC {
            return Err(bad("bad magic"));
        }
        let mut b4 = [0u8; 4];
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b4).map_err(io)?;
        let version = u32::from_le_bytes(b4);
        if version != SIDECAR_VERSION {
            return Err(bad(&format!("unsupported version {version}")));
        }
        r.read_exact(&mut b8).map_err(io)?;
        let step = u64::from_le_bytes(b8);
        r.read_exact(&mut b8).map_err(io)?;
        let n = usize::try_from(u64::from_le_bytes(b8)).map_err(|_| bad("count too large"))?;
        r.read_exact(&mut b4).map_err(io)?;
        let k = u32::from_le_bytes(b4) as usize;
        if k == 0 {
            return Err(bad("zero SH coefficients"));
        }
        let mut read_group = |len: usize| -> Result<Moments> {
            let mut arr = |len: usize| -> Result<Vec<f32>> {
                let mut bytes = vec![0u8; 4 * len];
                r.read_exact(&mut bytes).map_err(io)?;
                Ok(bytes.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect())
            };
            Ok(Moments { m: arr(len)?, v: arr(len)? })
        };
        Ok(Self {
            step,
            sh_coeffs: k,
            means: read_group(3 * n)?,
            log_scales: read_group(3 * n)?,
            rotations: read_group(4 * n)?,
            opacity: read_group(n)?,
            sh_dc: read_group(3 * n)?,
            sh_rest: read_group(3 * n * (k - 1))?,
        })
    }
}

const SIDECAR_MAGIC: &[u8; 8] = b"SPSADAM\0";
const SIDECAR_VERSION: u32 = 1;
