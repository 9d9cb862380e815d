//! Per-pixel spatial and temporal cues and their assembly into the feature
//! stack consumed by the boundary forest.
//!
//! Channel order and count are frozen; the forest's feature indices depend
//! on them. Spatial: R, G, B, gradient norm at fine and coarse scale, four
//! oriented gradient maps at each scale (13). Temporal: forward and backward
//! flow components, forward/backward flow-gradient magnitude, four oriented
//! flow-gradient maps at the coarse scale (forward), forward/backward
//! descriptor warping error, and eight motion-boundary-histogram channels
//! (20). Combined: 33.

mod hog;
mod motion;
mod spatial;

pub use hog::{hog_map, warp_error, HogDescriptorMap, WarpErrorMap, HOG_BINS};
pub use motion::{flow_gradient_cues, flow_gradient_magnitude, mbh, MBH_BINS};
pub use spatial::spatial_cues;

use crate::error::{Error, Result};
use crate::flow::FlowField;
use crate::frame::Frame;
use crate::plane::Plane;

pub const SPATIAL_CHANNELS: usize = 13;
pub const TEMPORAL_CHANNELS: usize = 20;
pub const COMBINED_CHANNELS: usize = SPATIAL_CHANNELS + TEMPORAL_CHANNELS;

/// The four unsigned cue orientations, degrees.
pub const ORIENTATIONS: [f32; 4] = [0.0, 45.0, 90.0, 135.0];

/// Named multi-channel raster; all values finite.
#[derive(Debug, Clone)]
pub struct ChannelMap {
    width: usize,
    height: usize,
    names: Vec<String>,
    planes: Vec<Plane>,
}

impl ChannelMap {
    pub fn new(names: Vec<String>, planes: Vec<Plane>) -> Result<Self> {
        if names.len() != planes.len() {
            return Err(Error::DimensionMismatch("channel names/planes count differ".into()));
        }
        if planes.is_empty() {
            return Err(Error::InvalidValue("channel map needs at least one channel".into()));
        }
        let (w, h) = (planes[0].width(), planes[0].height());
        for p in &planes {
            if p.width() != w || p.height() != h {
                return Err(Error::DimensionMismatch("channel planes differ in size".into()));
            }
            if !p.is_finite() {
                return Err(Error::InvalidValue("channel contains non-finite values".into()));
            }
        }
        let mut seen = std::collections::HashSet::new();
        for n in &names {
            if !seen.insert(n.clone()) {
                return Err(Error::InvalidValue(format!("duplicate channel name {n}")));
            }
        }
        Ok(ChannelMap { width: w, height: h, names, planes })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channel_count(&self) -> usize {
        self.planes.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn plane(&self, index: usize) -> &Plane {
        &self.planes[index]
    }

    pub fn planes(&self) -> &[Plane] {
        &self.planes
    }

    pub fn by_name(&self, name: &str) -> Option<&Plane> {
        self.names.iter().position(|n| n == name).map(|i| &self.planes[i])
    }

    pub fn concat(&self, other: &ChannelMap) -> Result<ChannelMap> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::DimensionMismatch("channel maps differ in size".into()));
        }
        let names = self.names.iter().chain(other.names.iter()).cloned().collect();
        let planes = self.planes.iter().chain(other.planes.iter()).cloned().collect();
        ChannelMap::new(names, planes)
    }
}

/// Spatial cues, temporal cues, and their concatenation.
#[derive(Debug, Clone)]
pub struct FeatureStack {
    pub spatial: ChannelMap,
    pub temporal: ChannelMap,
    pub combined: ChannelMap,
}

/// Computes all cues for the frame pair (t, t+1) with its forward and
/// backward flow. Oriented flow-gradient maps and MBH are computed on the
/// forward flow; the backward flow contributes its components, gradient
/// magnitude, and warping error.
pub fn assemble_feature_stack(
    frame_t: &Frame,
    frame_t1: &Frame,
    forward: &FlowField,
    backward: &FlowField,
) -> Result<FeatureStack> {
    let (w, h) = (frame_t.width(), frame_t.height());
    if frame_t1.width() != w
        || frame_t1.height() != h
        || forward.width() != w
        || forward.height() != h
        || backward.width() != w
        || backward.height() != h
    {
        return Err(Error::DimensionMismatch("feature stack inputs differ in size".into()));
    }

    let spatial = spatial_cues(frame_t)?;

    let hog_t = hog_map(frame_t)?;
    let hog_t1 = hog_map(frame_t1)?;
    let warp_fwd = warp_error(&hog_t, &hog_t1, forward)?;
    let warp_bwd = warp_error(&hog_t1, &hog_t, backward)?;

    let fwd_cues = flow_gradient_cues(forward)?;
    let mbh_map = mbh(forward)?;

    let mut names: Vec<String> = vec![
        "flow_u_fwd".into(),
        "flow_v_fwd".into(),
        "flow_u_bwd".into(),
        "flow_v_bwd".into(),
        "flow_grad_mag_fwd".into(),
        "flow_grad_mag_bwd".into(),
    ];
    let mut planes: Vec<Plane> = vec![
        forward.u().clone(),
        forward.v().clone(),
        backward.u().clone(),
        backward.v().clone(),
        flow_gradient_magnitude(forward),
        flow_gradient_magnitude(backward),
    ];
    for (i, angle) in ORIENTATIONS.iter().enumerate() {
        names.push(format!("flow_grad_{angle:.0}_coarse"));
        planes.push(fwd_cues.plane(1 + i).clone());
    }
    names.push("warp_error_fwd".into());
    planes.push(warp_fwd.into_plane());
    names.push("warp_error_bwd".into());
    planes.push(warp_bwd.into_plane());
    for i in 0..mbh_map.channel_count() {
        names.push(mbh_map.names()[i].clone());
        planes.push(mbh_map.plane(i).clone());
    }

    let temporal = ChannelMap::new(names, planes)?;
    debug_assert_eq!(spatial.channel_count(), SPATIAL_CHANNELS);
    debug_assert_eq!(temporal.channel_count(), TEMPORAL_CHANNELS);
    let combined = spatial.concat(&temporal)?;
    Ok(FeatureStack { spatial, temporal, combined })
}

/// Soft-assigns an unsigned orientation (radians, mod pi) across `bins`
/// circular bins; returns the two bin indices and their weights.
pub(crate) fn soft_bin(theta: f32, bins: usize) -> ((usize, f32), (usize, f32)) {
    let pi = std::f32::consts::PI;
    let t = theta.rem_euclid(pi) / (pi / bins as f32);
    let k0 = t.floor() as usize % bins;
    let frac = t - t.floor();
    let k1 = (k0 + 1) % bins;
    ((k0, 1.0 - frac), (k1, frac))
}

/// 5x5 box accumulation of per-pixel votes, window clipped at the borders.
pub(crate) fn box_accumulate(votes: &Plane, radius: usize) -> Plane {
    let ii = votes.integral();
    let mut out = Plane::zeros(votes.width(), votes.height());
    let r = radius as isize;
    for y in 0..votes.height() as isize {
        for x in 0..votes.width() as isize {
            let x0 = (x - r).max(0) as usize;
            let y0 = (y - r).max(0) as usize;
            let sum = ii.rect_sum(x0, y0, (x + r + 1) as usize, (y + r + 1) as usize);
            out.set(x as usize, y as usize, sum as f32);
        }
    }
    out
}

pub(crate) const CUE_WINDOW_RADIUS: usize = 2;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::FlowField;

    #[test]
    fn stack_has_frozen_channel_order() {
        let f = Frame::constant(16, 16, 3, 0.5).unwrap();
        let flow = FlowField::zeros(16, 16);
        let stack = assemble_feature_stack(&f, &f, &flow, &flow).unwrap();
        assert_eq!(stack.combined.channel_count(), COMBINED_CHANNELS);
        assert_eq!(stack.spatial.names()[0], "red");
        assert_eq!(stack.spatial.names()[3], "grad_norm_fine");
        assert_eq!(stack.temporal.names()[0], "flow_u_fwd");
        assert_eq!(stack.temporal.names()[10], "warp_error_fwd");
        assert_eq!(stack.temporal.names()[12], "mbh_0_u");
    }

    #[test]
    fn static_scene_temporal_channels_vanish() {
        let f = Frame::constant(16, 16, 3, 0.3).unwrap();
        let flow = FlowField::zeros(16, 16);
        let stack = assemble_feature_stack(&f, &f, &flow, &flow).unwrap();
        for p in stack.temporal.planes() {
            assert_eq!(p.max_abs(), 0.0);
        }
    }

    #[test]
    fn soft_bin_peaks_at_bin_centres() {
        let ((k0, w0), (_, w1)) = soft_bin(0.0, 4);
        assert_eq!(k0, 0);
        assert!((w0 - 1.0).abs() < 1e-6 && w1.abs() < 1e-6);
        let ((k0, w0), (k1, w1)) = soft_bin(std::f32::consts::PI / 2.0, 4);
        assert_eq!((k0, k1), (2, 3));
        assert!((w0 - 1.0).abs() < 1e-6 && w1.abs() < 1e-6);
    }

    #[test]
    fn mismatched_inputs_are_rejected() {
        let a = Frame::constant(16, 16, 3, 0.5).unwrap();
        let b = Frame::constant(8, 8, 3, 0.5).unwrap();
        let flow = FlowField::zeros(16, 16);
        assert!(assemble_feature_stack(&a, &b, &flow, &flow).is_err());
    }
}
