//! Pixel-wise histogram-of-oriented-gradients descriptors and the
//! descriptor warping error used to flag flow-estimation faults.

use super::{box_accumulate, soft_bin, CUE_WINDOW_RADIUS};
use crate::error::{Error, Result};
use crate::flow::FlowField;
use crate::frame::Frame;
use crate::plane::Plane;

pub const HOG_BINS: usize = 8;

/// Dense per-pixel descriptor: 8 unsigned orientation bins, each pixel's
/// 8-vector either L2-normalized to unit length or exactly zero.
#[derive(Debug, Clone)]
pub struct HogDescriptorMap {
    width: usize,
    height: usize,
    bins: Vec<Plane>,
}

impl HogDescriptorMap {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bin(&self, index: usize) -> &Plane {
        &self.bins[index]
    }

    pub fn descriptor(&self, x: usize, y: usize) -> [f32; HOG_BINS] {
        let mut d = [0.0; HOG_BINS];
        for (i, b) in self.bins.iter().enumerate() {
            d[i] = b.get(x, y);
        }
        d
    }
}

/// Magnitude-weighted orientation votes accumulated over a 5x5 window, then
/// per-pixel unit normalization (flat regions stay exactly zero).
pub fn hog_map(frame: &Frame) -> Result<HogDescriptorMap> {
    if frame.width() < 3 || frame.height() < 3 {
        return Err(Error::TooSmall("hog needs at least a 3x3 frame".into()));
    }
    let luma = frame.luma();
    let (w, h) = (luma.width(), luma.height());
    let (gx, gy) = luma.gradients();

    let mut votes = vec![Plane::zeros(w, h); HOG_BINS];
    for y in 0..h {
        for x in 0..w {
            let dx = gx.get(x, y);
            let dy = gy.get(x, y);
            let mag = (dx * dx + dy * dy).sqrt();
            if mag > 0.0 {
                let ((k0, w0), (k1, w1)) = soft_bin(dy.atan2(dx), HOG_BINS);
                votes[k0].add(x, y, w0 * mag);
                votes[k1].add(x, y, w1 * mag);
            }
        }
    }

    let mut bins: Vec<Plane> =
        votes.iter().map(|v| box_accumulate(v, CUE_WINDOW_RADIUS)).collect();

    for y in 0..h {
        for x in 0..w {
            let mut norm2 = 0.0f32;
            for b in &bins {
                let v = b.get(x, y);
                norm2 += v * v;
            }
            if norm2 > 0.0 {
                let norm = norm2.sqrt();
                for b in &mut bins {
                    let v = b.get(x, y);
                    b.set(x, y, v / norm);
                }
            }
        }
    }

    Ok(HogDescriptorMap { width: w, height: h, bins })
}

/// Nonnegative per-pixel descriptor mismatch map.
#[derive(Debug, Clone)]
pub struct WarpErrorMap {
    plane: Plane,
}

impl WarpErrorMap {
    pub fn plane(&self) -> &Plane {
        &self.plane
    }

    pub fn into_plane(self) -> Plane {
        self.plane
    }

    pub fn width(&self) -> usize {
        self.plane.width()
    }

    pub fn height(&self) -> usize {
        self.plane.height()
    }
}

/// L2 distance between the descriptor at p and the descriptor of the next
/// frame sampled at p plus the flow, each bin interpolated bilinearly with
/// border clamping. Values lie in [0,2] since descriptors have norm <= 1.
pub fn warp_error(
    d_t: &HogDescriptorMap,
    d_t1: &HogDescriptorMap,
    flow: &FlowField,
) -> Result<WarpErrorMap> {
    let (w, h) = (d_t.width(), d_t.height());
    if d_t1.width() != w || d_t1.height() != h || flow.width() != w || flow.height() != h {
        return Err(Error::DimensionMismatch("warp error inputs differ in size".into()));
    }
    let mut out = Plane::zeros(w, h);
    for y in 0..h {
        for x in 0..w {
            let (u, v) = flow.at(x, y);
            let sx = x as f32 + u;
            let sy = y as f32 + v;
            let mut dist2 = 0.0f32;
            for bin in 0..HOG_BINS {
                let a = d_t.bin(bin).get(x, y);
                let b = d_t1.bin(bin).sample_bilinear(sx, sy);
                dist2 += (a - b) * (a - b);
            }
            out.set(x, y, dist2.sqrt());
        }
    }
    Ok(WarpErrorMap { plane: out })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::translating_texture_pair;

    #[test]
    fn constant_frame_gives_zero_descriptors() {
        let f = Frame::constant(10, 10, 3, 0.4).unwrap();
        let map = hog_map(&f).unwrap();
        for y in 0..10 {
            for x in 0..10 {
                assert_eq!(map.descriptor(x, y), [0.0; HOG_BINS]);
            }
        }
    }

    #[test]
    fn descriptors_have_unit_or_zero_norm() {
        let (f, _) = translating_texture_pair(24, 24, (0.0, 0.0), 0.8, 11);
        let map = hog_map(&f).unwrap();
        for y in 0..24 {
            for x in 0..24 {
                let n: f32 = map.descriptor(x, y).iter().map(|v| v * v).sum::<f32>().sqrt();
                assert!(n == 0.0 || (n - 1.0).abs() < 1e-5, "norm {n}");
            }
        }
    }

    #[test]
    fn vertical_edge_votes_land_in_bin_zero() {
        let mut data = Vec::new();
        for _y in 0..12 {
            for x in 0..12 {
                let v = if x < 6 { 0.1 } else { 0.9 };
                data.extend_from_slice(&[v, v, v]);
            }
        }
        let f = Frame::new(12, 12, 3, data).unwrap();
        let map = hog_map(&f).unwrap();
        let d = map.descriptor(6, 6);
        let best = d.iter().enumerate().max_by(|a, b| a.1.partial_cmp(b.1).unwrap()).unwrap().0;
        assert_eq!(best, 0);
    }

    #[test]
    fn zero_flow_on_same_frame_gives_exact_zero_error() {
        let (f, _) = translating_texture_pair(20, 20, (0.0, 0.0), 0.7, 3);
        let d = hog_map(&f).unwrap();
        let e = warp_error(&d, &d, &FlowField::zeros(20, 20)).unwrap();
        assert_eq!(e.plane().max_abs(), 0.0);
    }

    #[test]
    fn correct_flow_beats_zero_flow_on_shifted_pair() {
        let (a, b) = translating_texture_pair(40, 40, (2.0, 0.0), 0.8, 5);
        let da = hog_map(&a).unwrap();
        let db = hog_map(&b).unwrap();
        let with_true = warp_error(&da, &db, &FlowField::constant(40, 40, 2.0, 0.0)).unwrap();
        let with_zero = warp_error(&da, &db, &FlowField::zeros(40, 40)).unwrap();
        let mean = |m: &WarpErrorMap| {
            m.plane().data().iter().map(|v| *v as f64).sum::<f64>() / (40.0 * 40.0)
        };
        // interior error near zero under the true flow; keep clear of the
        // 3-px border band where window clamping breaks shift equivariance
        let mut interior_max = 0.0f32;
        for y in 4..36 {
            for x in 4..34 {
                interior_max = interior_max.max(with_true.plane().get(x, y));
            }
        }
        assert!(interior_max < 0.05, "interior warp error {interior_max}");
        assert!(mean(&with_true) < mean(&with_zero));
    }

    #[test]
    fn too_small_frame_is_rejected() {
        let f = Frame::constant(2, 2, 3, 0.5).unwrap();
        assert!(hog_map(&f).is_err());
    }
}
