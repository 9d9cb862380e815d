//! Desk-scale crop descriptor: grid HOG over the spatial crop concatenated
//! with grid MBH over the flow stack, every cell histogram L2-normalized
//! independently (zero cells stay zero).

use crate::error::{Error, Result};
use crate::features::soft_bin;
use crate::frame::Frame;
use crate::plane::Plane;
use crate::proposal::FlowStack;

pub const GRID: usize = 4;
pub const HOG_BINS: usize = 8;
pub const MBH_BINS: usize = 4;

const HOG_LEN: usize = GRID * GRID * HOG_BINS;
const MBH_LEN: usize = GRID * GRID * MBH_BINS * 2;

/// Total descriptor length: 4x4x8 HOG plus 4x4x4x2 MBH.
pub const fn descriptor_len() -> usize {
    HOG_LEN + MBH_LEN
}

/// Fixed-length crop descriptor.
///
/// Layout: HOG cells first (cell-major, 8 bins each), then MBH for the
/// u-derivative field (16 cells x 4 bins), then the v-derivative field.
#[derive(Debug, Clone, PartialEq)]
pub struct CropDescriptor {
    values: Vec<f32>,
}

impl CropDescriptor {
    /// Wraps precomputed values; test-only.
    #[cfg(test)]
    pub(crate) fn from_raw(values: Vec<f32>) -> Self {
        CropDescriptor { values }
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Iterates the normalized blocks (each one cell's histogram).
    pub fn blocks(&self) -> impl Iterator<Item = &[f32]> {
        let hog = self.values[..HOG_LEN].chunks(HOG_BINS);
        let mbh = self.values[HOG_LEN..].chunks(MBH_BINS);
        hog.chain(mbh)
    }
}

/// HOG over the crop luma plus MBH accumulated over every flow in the
/// stack. The crop and stack must come from the same box but may be resized
/// to different sides; votes land in cells by fractional position.
pub fn describe_crop(spatial_crop: &Frame, flow_stack: &FlowStack) -> Result<CropDescriptor> {
    if spatial_crop.width() < 2 || spatial_crop.height() < 2 {
        return Err(Error::TooSmall("crop descriptor needs at least 2x2 pixels".into()));
    }
    if flow_stack.depth() == 0 {
        return Err(Error::DimensionMismatch("flow stack is empty".into()));
    }

    let mut values = vec![0.0f32; descriptor_len()];

    accumulate_oriented(
        &spatial_crop.luma(),
        HOG_BINS,
        &mut values[..HOG_LEN],
    );

    for t in 0..flow_stack.depth() {
        let (u, v) = flow_stack.flow_planes(t);
        accumulate_oriented(u, MBH_BINS, &mut values[HOG_LEN..HOG_LEN + MBH_LEN / 2]);
        accumulate_oriented(v, MBH_BINS, &mut values[HOG_LEN + MBH_LEN / 2..]);
    }

    for block_start in (0..HOG_LEN).step_by(HOG_BINS) {
        normalize_block(&mut values[block_start..block_start + HOG_BINS]);
    }
    for block_start in (HOG_LEN..descriptor_len()).step_by(MBH_BINS) {
        normalize_block(&mut values[block_start..block_start + MBH_BINS]);
    }

    Ok(CropDescriptor { values })
}

/// Magnitude-weighted soft orientation votes into a GRIDxGRID cell layout.
fn accumulate_oriented(plane: &Plane, bins: usize, out: &mut [f32]) {
    let (gx, gy) = plane.gradients();
    let (w, h) = (plane.width(), plane.height());
    for y in 0..h {
        for x in 0..w {
            let dx = gx.get(x, y);
            let dy = gy.get(x, y);
            let mag = (dx * dx + dy * dy).sqrt();
            if mag <= 0.0 {
                continue;
            }
            let cx = (x * GRID / w).min(GRID - 1);
            let cy = (y * GRID / h).min(GRID - 1);
            let cell = (cy * GRID + cx) * bins;
            let ((k0, w0), (k1, w1)) = soft_bin(dy.atan2(dx), bins);
            out[cell + k0] += w0 * mag;
            out[cell + k1] += w1 * mag;
        }
    }
}

fn normalize_block(block: &mut [f32]) {
    let norm = block.iter().map(|v| v * v).sum::<f32>().sqrt();
    if norm > 0.0 {
        for v in block {
            *v /= norm;
        }
    }
}
