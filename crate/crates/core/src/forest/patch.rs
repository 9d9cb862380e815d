//! Patch feature extraction shared by training and prediction.
//!
//! Each combined-stack channel is replicate-padded and summed into an
//! integral image once per stack; every feature is then an O(1) block-mean
//! lookup. Per channel: the 32x32 window downsampled 2x gives 256 direct
//! features, and pairwise differences of the 4x4 grid of 8x8 cell means give
//! another 120.

use super::{patch_grid, ForestParams, PatchSample, MASK_SIZE, PATCH_SIZE};
use crate::error::{Error, Result};
use crate::features::FeatureStack;
use crate::plane::{IntegralPlane, Plane};

pub const DIRECT_PER_CHANNEL: usize = (PATCH_SIZE / 2) * (PATCH_SIZE / 2);
pub const PAIR_GRID: usize = 4;
pub const PAIRS_PER_CHANNEL: usize = PAIR_GRID * PAIR_GRID * (PAIR_GRID * PAIR_GRID - 1) / 2;
pub const FEATURES_PER_CHANNEL: usize = DIRECT_PER_CHANNEL + PAIRS_PER_CHANNEL;

const PAD: usize = PATCH_SIZE;

/// O(1) feature lookups over a padded, integrated stack.
pub struct PatchFeatureExtractor {
    integrals: Vec<IntegralPlane>,
}

impl PatchFeatureExtractor {
    pub fn new(stack: &FeatureStack) -> Self {
        let integrals = stack
            .combined
            .planes()
            .iter()
            .map(|p| replicate_pad(p, PAD).integral())
            .collect();
        PatchFeatureExtractor { integrals }
    }

    pub fn feature_len(&self) -> usize {
        self.integrals.len() * FEATURES_PER_CHANNEL
    }

    pub fn channel_count(&self) -> usize {
        self.integrals.len()
    }

    /// Feature `index` of the patch centred at (cx, cy) in stack coordinates.
    pub fn feature(&self, cx: usize, cy: usize, index: usize) -> f32 {
        let channel = index / FEATURES_PER_CHANNEL;
        let rem = index % FEATURES_PER_CHANNEL;
        let ii = &self.integrals[channel];
        // patch top-left in padded coordinates
        let half = PATCH_SIZE / 2;
        let x0 = cx + PAD - half;
        let y0 = cy + PAD - half;
        if rem < DIRECT_PER_CHANNEL {
            let side = PATCH_SIZE / 2;
            let px = rem % side;
            let py = rem / side;
            let x = x0 + 2 * px;
            let y = y0 + 2 * py;
            (ii.rect_sum(x, y, x + 2, y + 2) / 4.0) as f32
        } else {
            let (a, b) = PAIR_TABLE[rem - DIRECT_PER_CHANNEL];
            (self.cell_mean(ii, x0, y0, a) - self.cell_mean(ii, x0, y0, b)) as f32
        }
    }

    fn cell_mean(&self, ii: &IntegralPlane, x0: usize, y0: usize, cell: usize) -> f64 {
        let cell_side = PATCH_SIZE / PAIR_GRID;
        let cx = cell % PAIR_GRID;
        let cy = cell / PAIR_GRID;
        let x = x0 + cx * cell_side;
        let y = y0 + cy * cell_side;
        ii.rect_sum(x, y, x + cell_side, y + cell_side) / (cell_side * cell_side) as f64
    }
}

/// All (a,b) grid-cell pairs with a < b, in lexicographic order.
static PAIR_TABLE: std::sync::LazyLock<Vec<(usize, usize)>> = std::sync::LazyLock::new(|| {
    let n = PAIR_GRID * PAIR_GRID;
    let mut pairs = Vec::with_capacity(PAIRS_PER_CHANNEL);
    for a in 0..n {
        for b in a + 1..n {
            pairs.push((a, b));
        }
    }
    pairs
});

fn replicate_pad(plane: &Plane, pad: usize) -> Plane {
    let w = plane.width() + 2 * pad;
    let h = plane.height() + 2 * pad;
    let mut out = Plane::zeros(w, h);
    for y in 0..h {
        for x in 0..w {
            out.set(x, y, plane.get_clamped(x as isize - pad as isize, y as isize - pad as isize));
        }
    }
    out
}

/// Samples patches on the stride grid, reading each sample's 16x16 label
/// mask from the truth boundary (clamp-to-edge), then rebalances so that at
/// least a quarter of the retained samples contain a boundary pixel:
/// positives are all kept, negatives are capped at three per positive in
/// grid order. A truth mask with no positives keeps every sample.
pub fn extract_patch_samples(
    stack: &FeatureStack,
    truth_boundary: &Plane,
    params: &ForestParams,
) -> Result<Vec<PatchSample>> {
    params.validate()?;
    let (w, h) = (stack.combined.width(), stack.combined.height());
    if truth_boundary.width() != w || truth_boundary.height() != h {
        return Err(Error::DimensionMismatch(format!(
            "truth mask {}x{} vs stack {}x{}",
            truth_boundary.width(),
            truth_boundary.height(),
            w,
            h
        )));
    }

    let extractor = PatchFeatureExtractor::new(stack);
    let half = MASK_SIZE as isize / 2;
    let mut positives = Vec::new();
    let mut negatives = Vec::new();

    for cy in patch_grid(h, params.stride) {
        for cx in patch_grid(w, params.stride) {
            let mut label_mask = vec![0u8; MASK_SIZE * MASK_SIZE];
            for my in 0..MASK_SIZE {
                for mx in 0..MASK_SIZE {
                    let x = cx as isize - half + mx as isize;
                    let y = cy as isize - half + my as isize;
                    if truth_boundary.get_clamped(x, y) > 0.5 {
                        label_mask[my * MASK_SIZE + mx] = 1;
                    }
                }
            }
            let features =
                (0..extractor.feature_len()).map(|f| extractor.feature(cx, cy, f)).collect();
            let sample = PatchSample { features, label_mask };
            if sample.has_boundary() {
                positives.push(sample);
            } else {
                negatives.push(sample);
            }
        }
    }

    if positives.is_empty() {
        return Ok(negatives);
    }
    negatives.truncate(3 * positives.len());
    positives.append(&mut negatives);
    Ok(positives)
}
