//! Action region proposals: border-contrast box scoring on the soft
//! boundary map, non-maximum suppression, and region selection.
//!
//! Scoring follows the edge-box idea on a saliency mask: boundary mass
//! strictly inside the box is rewarded, mass in the border strip (contours
//! straddling the box) is penalized, and both are normalized by the box
//! perimeter raised to `interior_weight`. An integral image makes every box
//! O(1).

mod crops;

pub use crops::{crop_and_resize, prepare_clip, stack_flow_crops, ClipTensor, FlowStack, CLIP_LEN, CLIP_SIDE, DEFAULT_CROP_SIDE};

use crate::error::{Error, Result};
use crate::forest::BoundaryMap;
use serde::{Deserialize, Serialize};

/// Scored axis-aligned box candidate, top-left origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxProposal {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
    pub score: f64,
}

impl BoxProposal {
    pub fn new(
        x: usize,
        y: usize,
        w: usize,
        h: usize,
        score: f64,
        map_width: usize,
        map_height: usize,
    ) -> Result<Self> {
        if w == 0 || h == 0 || x + w > map_width || y + h > map_height {
            return Err(Error::InvalidValue(format!(
                "box {w}x{h}+{x}+{y} outside {map_width}x{map_height}"
            )));
        }
        if !score.is_finite() {
            return Err(Error::InvalidValue("box score must be finite".into()));
        }
        Ok(BoxProposal { x, y, w, h, score })
    }

    pub fn full_frame(width: usize, height: usize) -> Self {
        BoxProposal { x: 0, y: 0, w: width, h: height, score: 0.0 }
    }

    pub fn iou(&self, other: &BoxProposal) -> f64 {
        let ix0 = self.x.max(other.x);
        let iy0 = self.y.max(other.y);
        let ix1 = (self.x + self.w).min(other.x + other.w);
        let iy1 = (self.y + self.h).min(other.y + other.h);
        let inter = (ix1.saturating_sub(ix0) * iy1.saturating_sub(iy0)) as f64;
        let union = (self.w * self.h + other.w * other.h) as f64 - inter;
        if union <= 0.0 {
            0.0
        } else {
            inter / union
        }
    }
}

/// Sliding-window scoring parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProposalParams {
    /// Box sizes (square-root of area); each is combined with every ratio.
    pub scales: Vec<usize>,
    /// Width:height aspect ratios.
    pub aspect_ratios: Vec<(u32, u32)>,
    /// Sliding step as a fraction of the box side, in (0,1].
    pub step_fraction: f32,
    /// Width of the penalized strip just inside the box border, px.
    pub border_strip: usize,
    /// Perimeter-normalization exponent (kappa).
    pub interior_weight: f64,
    /// Border-mass penalty (lambda), >= 0.
    pub border_penalty: f64,
    pub nms_iou: f64,
    pub top_k: usize,
    pub min_box_size: usize,
    /// Proposals below this score count as "no motion".
    pub min_score: f64,
}

impl Default for ProposalParams {
    fn default() -> Self {
        ProposalParams {
            scales: vec![32, 48, 64, 96, 128],
            aspect_ratios: vec![(1, 2), (2, 3), (1, 1), (3, 2), (2, 1)],
            step_fraction: 0.25,
            border_strip: 2,
            interior_weight: 1.5,
            border_penalty: 1.0,
            nms_iou: 0.5,
            top_k: 1,
            min_box_size: 8,
            min_score: 1e-3,
        }
    }
}

impl ProposalParams {
    pub fn validate(&self) -> Result<()> {
        if self.scales.is_empty() || self.aspect_ratios.is_empty() {
            return Err(Error::InvalidConfig("scales and aspect ratios must be non-empty".into()));
        }
        if !(self.step_fraction > 0.0 && self.step_fraction <= 1.0) {
            return Err(Error::InvalidConfig("step_fraction must be in (0,1]".into()));
        }
        if self.border_penalty < 0.0 {
            return Err(Error::InvalidConfig("border_penalty must be >= 0".into()));
        }
        if !(self.nms_iou > 0.0 && self.nms_iou < 1.0) {
            return Err(Error::InvalidConfig("nms_iou must be in (0,1)".into()));
        }
        if self.aspect_ratios.iter().any(|(a, b)| *a == 0 || *b == 0) {
            return Err(Error::InvalidConfig("aspect ratios must be positive".into()));
        }
        Ok(())
    }

    /// Area-preserving box dimensions for one scale/ratio combination,
    /// floored at `min_box_size`.
    pub fn box_dims(&self, scale: usize, ratio: (u32, u32)) -> (usize, usize) {
        let r = (ratio.0 as f64 / ratio.1 as f64).sqrt();
        let w = ((scale as f64 * r).round() as usize).max(self.min_box_size);
        let h = ((scale as f64 / r).round() as usize).max(self.min_box_size);
        (w, h)
    }
}

/// Scores every sliding-grid box; returns all candidates sorted by
/// descending score (ties by x, y, w, h ascending).
pub fn score_boxes(map: &BoundaryMap, params: &ProposalParams) -> Result<Vec<BoxProposal>> {
    params.validate()?;
    let (w, h) = (map.width(), map.height());
    let ii = map.plane().integral();
    let bs = params.border_strip;
    let mut out = Vec::new();

    for &scale in &params.scales {
        for &ratio in &params.aspect_ratios {
            let (bw, bh) = params.box_dims(scale, ratio);
            if bw > w || bh > h {
                return Err(Error::InvalidValue(format!(
                    "box {bw}x{bh} (scale {scale}, ratio {}:{}) exceeds map {w}x{h}",
                    ratio.0, ratio.1
                )));
            }
            let perim_norm = (2.0 * (bw + bh) as f64).powf(params.interior_weight);
            for y in grid_positions(h, bh, params.step_fraction) {
                for x in grid_positions(w, bw, params.step_fraction) {
                    let total = ii.rect_sum(x, y, x + bw, y + bh);
                    let interior = if bw > 2 * bs && bh > 2 * bs {
                        ii.rect_sum(x + bs, y + bs, x + bw - bs, y + bh - bs)
                    } else {
                        0.0
                    };
                    let border = total - interior;
                    let score = (interior - params.border_penalty * border) / perim_norm;
                    out.push(BoxProposal { x, y, w: bw, h: bh, score });
                }
            }
        }
    }

    sort_boxes(&mut out);
    Ok(out)
}

/// Top-left positions stepping by `step_fraction * side`, always including
/// the last position flush with the far edge.
fn grid_positions(extent: usize, side: usize, step_fraction: f32) -> Vec<usize> {
    let step = ((side as f32 * step_fraction).round() as usize).max(1);
    let last = extent - side;
    let mut xs: Vec<usize> = (0..=last).step_by(step).collect();
    if *xs.last().unwrap() != last {
        xs.push(last);
    }
    xs
}

/// Deterministic ordering: score descending, then x, y, w, h ascending.
pub fn sort_boxes(boxes: &mut [BoxProposal]) {
    boxes.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .unwrap()
            .then(a.x.cmp(&b.x))
            .then(a.y.cmp(&b.y))
            .then(a.w.cmp(&b.w))
            .then(a.h.cmp(&b.h))
    });
}

/// Greedy non-maximum suppression: keep the highest-scored box, drop every
/// box overlapping a kept box with IoU strictly above the threshold. The
/// (x, y, w, h) tie-break makes the result independent of input order.
pub fn nms(boxes: &[BoxProposal], iou_threshold: f64) -> Vec<BoxProposal> {
    let mut sorted = boxes.to_vec();
    sort_boxes(&mut sorted);
    let mut kept: Vec<BoxProposal> = Vec::new();
    for b in sorted {
        if kept.iter().all(|k| k.iou(&b) <= iou_threshold) {
            kept.push(b);
        }
    }
    kept
}

/// Selected action region plus the no-motion signal.
#[derive(Debug, Clone)]
pub struct SelectedRegion {
    pub boxes: Vec<BoxProposal>,
    pub no_motion: bool,
}

/// First `top_k` boxes of a post-NMS list; an empty list raises the
/// no-motion signal.
pub fn select_action_region(boxes: &[BoxProposal], top_k: usize) -> SelectedRegion {
    if boxes.is_empty() {
        return SelectedRegion { boxes: Vec::new(), no_motion: true };
    }
    SelectedRegion { boxes: boxes.iter().take(top_k.max(1)).copied().collect(), no_motion: false }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plane::Plane;

    fn map_from(plane: Plane) -> BoundaryMap {
        BoundaryMap::new(plane).unwrap()
    }

    fn small_params(scales: Vec<usize>) -> ProposalParams {
        ProposalParams {
            scales,
            aspect_ratios: vec![(1, 1)],
            min_box_size: 4,
            ..ProposalParams::default()
        }
    }

    #[test]
    fn zero_map_scores_zero() {
        let map = map_from(Plane::zeros(32, 32));
        let boxes = score_boxes(&map, &small_params(vec![8, 16])).unwrap();
        assert!(!boxes.is_empty());
        assert!(boxes.iter().all(|b| b.score == 0.0));
    }

    #[test]
    fn oversized_scale_is_an_error() {
        let map = map_from(Plane::zeros(16, 16));
        assert!(score_boxes(&map, &small_params(vec![32])).is_err());
    }

    #[test]
    fn enclosing_box_beats_cutting_box() {
        // hollow square perimeter of strength 1: ring at 12..20 in a 32x32 map
        let mut p = Plane::zeros(32, 32);
        for i in 12..=20 {
            p.set(i, 12, 1.0);
            p.set(i, 20, 1.0);
            p.set(12, i, 1.0);
            p.set(20, i, 1.0);
        }
        let map = map_from(p);
        let params = small_params(vec![16]);
        let boxes = score_boxes(&map, &params).unwrap();
        // 16x16 box at (8,8) encloses the ring with margin 4 >= border_strip
        let enclosing = boxes.iter().find(|b| b.x == 8 && b.y == 8).unwrap();
        for b in boxes.iter().filter(|b| {
            // boxes whose border strip cuts through the ring
            !(b.x + 2 <= 12 && b.y + 2 <= 12 && b.x + b.w >= 23 && b.y + b.h >= 23)
                && (b.x, b.y) != (8, 8)
        }) {
            assert!(
                enclosing.score > b.score,
                "enclosing {} vs cutting {:?}",
                enclosing.score,
                b
            );
        }
    }

    #[test]
    fn nms_keeps_single_box() {
        let b = BoxProposal { x: 1, y: 1, w: 4, h: 4, score: 0.5 };
        assert_eq!(nms(&[b], 0.5), vec![b]);
    }

    #[test]
    fn nms_drops_identical_lower_scored_box() {
        let hi = BoxProposal { x: 1, y: 1, w: 4, h: 4, score: 0.9 };
        let lo = BoxProposal { x: 1, y: 1, w: 4, h: 4, score: 0.8 };
        assert_eq!(nms(&[lo, hi], 0.5), vec![hi]);
    }

    #[test]
    fn nms_is_input_order_independent() {
        let boxes = vec![
            BoxProposal { x: 0, y: 0, w: 8, h: 8, score: 0.9 },
            BoxProposal { x: 2, y: 2, w: 8, h: 8, score: 0.7 },
            BoxProposal { x: 10, y: 10, w: 6, h: 6, score: 0.7 },
            BoxProposal { x: 4, y: 0, w: 8, h: 8, score: 0.8 },
        ];
        let mut reversed = boxes.clone();
        reversed.reverse();
        assert_eq!(nms(&boxes, 0.4), nms(&reversed, 0.4));
    }

    #[test]
    fn select_takes_top_k_and_flags_empty() {
        let boxes = vec![
            BoxProposal { x: 0, y: 0, w: 8, h: 8, score: 0.9 },
            BoxProposal { x: 10, y: 10, w: 8, h: 8, score: 0.5 },
        ];
        let sel = select_action_region(&boxes, 1);
        assert!(!sel.no_motion);
        assert_eq!(sel.boxes.len(), 1);
        assert_eq!(sel.boxes[0].score, 0.9);

        let empty = select_action_region(&[], 1);
        assert!(empty.no_motion);
        assert!(empty.boxes.is_empty());
    }

    #[test]
    fn iou_of_identical_boxes_is_one() {
        let b = BoxProposal { x: 3, y: 4, w: 10, h: 12, score: 0.0 };
        assert!((b.iou(&b) - 1.0).abs() < 1e-12);
        let disjoint = BoxProposal { x: 30, y: 40, w: 5, h: 5, score: 0.0 };
        assert_eq!(b.iou(&disjoint), 0.0);
    }
}
