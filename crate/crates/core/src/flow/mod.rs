//! Dense optical flow between consecutive frames.
//!
//! The estimator is a coarse-to-fine variational solver: Charbonnier
//! penalties on both the data and smoothness terms, incremental warping at
//! each pyramid level, and a median filter on the intermediate flow after
//! every warp. The flow convention matches the warping error definition:
//! `W(p)` is the displacement of the content at `p` from frame t to t+1, so
//! sampling frame t+1 at `p + W(p)` recovers frame t.

mod solver;

use crate::error::{Error, Result};
use crate::frame::Frame;
use crate::plane::Plane;
use serde::{Deserialize, Serialize};

/// Dense per-pixel 2-vector motion field.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    width: usize,
    height: usize,
    u: Plane,
    v: Plane,
}

impl FlowField {
    pub fn new(u: Plane, v: Plane) -> Result<Self> {
        if u.width() != v.width() || u.height() != v.height() {
            return Err(Error::DimensionMismatch("flow u/v planes differ in size".into()));
        }
        if !u.is_finite() || !v.is_finite() {
            return Err(Error::InvalidValue("flow contains non-finite values".into()));
        }
        Ok(FlowField { width: u.width(), height: u.height(), u, v })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        FlowField { width, height, u: Plane::zeros(width, height), v: Plane::zeros(width, height) }
    }

    pub fn constant(width: usize, height: usize, u: f32, v: f32) -> Self {
        FlowField {
            width,
            height,
            u: Plane::constant(width, height, u),
            v: Plane::constant(width, height, v),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn u(&self) -> &Plane {
        &self.u
    }

    pub fn v(&self) -> &Plane {
        &self.v
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> (f32, f32) {
        (self.u.get(x, y), self.v.get(x, y))
    }

    pub fn max_magnitude(&self) -> f32 {
        let mut m = 0.0f32;
        for i in 0..self.width * self.height {
            let u = self.u.data()[i];
            let v = self.v.data()[i];
            m = m.max((u * u + v * v).sqrt());
        }
        m
    }

    /// Adds a constant offset to every vector.
    pub fn offset(&self, du: f32, dv: f32) -> FlowField {
        let mut u = self.u.clone();
        let mut v = self.v.clone();
        for val in u.data_mut() {
            *val += du;
        }
        for val in v.data_mut() {
            *val += dv;
        }
        FlowField { width: self.width, height: self.height, u, v }
    }

    /// Mean endpoint error against a known constant ground-truth flow.
    pub fn mean_endpoint_error(&self, true_u: f32, true_v: f32) -> f32 {
        let n = (self.width * self.height) as f32;
        let mut sum = 0.0f32;
        for i in 0..self.width * self.height {
            let du = self.u.data()[i] - true_u;
            let dv = self.v.data()[i] - true_v;
            sum += (du * du + dv * dv).sqrt();
        }
        sum / n
    }
}

/// Parameters of the variational estimator.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlowParams {
    pub pyramid_levels: usize,
    /// Per-level downsample ratio in (0,1).
    pub scale_factor: f32,
    /// Smoothness weight lambda.
    pub regularization_weight: f32,
    pub warp_iterations: usize,
    pub fixed_point_iterations: usize,
    pub median_filter_radius: usize,
}

impl Default for FlowParams {
    fn default() -> Self {
        FlowParams {
            pyramid_levels: 5,
            scale_factor: 0.5,
            regularization_weight: 10.0,
            warp_iterations: 5,
            fixed_point_iterations: 10,
            median_filter_radius: 2,
        }
    }
}

impl FlowParams {
    pub fn validate(&self) -> Result<()> {
        if self.pyramid_levels < 1 {
            return Err(Error::InvalidConfig("pyramid_levels must be >= 1".into()));
        }
        if !(self.scale_factor > 0.0 && self.scale_factor < 1.0) {
            return Err(Error::InvalidConfig("scale_factor must be in (0,1)".into()));
        }
        if self.regularization_weight < 0.0 {
            return Err(Error::InvalidConfig("regularization_weight must be >= 0".into()));
        }
        if self.warp_iterations < 1 || self.fixed_point_iterations < 1 {
            return Err(Error::InvalidConfig("iteration counts must be >= 1".into()));
        }
        Ok(())
    }
}

fn check_pair(frame_t: &Frame, frame_t1: &Frame) -> Result<()> {
    if frame_t.width() != frame_t1.width()
        || frame_t.height() != frame_t1.height()
        || frame_t.channels() != frame_t1.channels()
    {
        return Err(Error::DimensionMismatch(format!(
            "frame pair {}x{} vs {}x{}",
            frame_t.width(),
            frame_t.height(),
            frame_t1.width(),
            frame_t1.height()
        )));
    }
    if frame_t.width() < 8 || frame_t.height() < 8 {
        return Err(Error::TooSmall("flow estimation needs frames of at least 8x8".into()));
    }
    Ok(())
}

/// Estimates dense flow from `frame_t` to `frame_t1` on the luma channel.
pub fn estimate_flow(frame_t: &Frame, frame_t1: &Frame, params: &FlowParams) -> Result<FlowField> {
    params.validate()?;
    check_pair(frame_t, frame_t1)?;
    let coarsest = (frame_t.width().min(frame_t.height()) as f32
        * params.scale_factor.powi(params.pyramid_levels as i32 - 1))
    .floor();
    if coarsest < 8.0 {
        return Err(Error::TooSmall(format!(
            "frame {}x{} too small for {} pyramid levels at scale {}",
            frame_t.width(),
            frame_t.height(),
            params.pyramid_levels,
            params.scale_factor
        )));
    }
    solver::solve(&frame_t.luma(), &frame_t1.luma(), params)
}

/// Forward and backward flow for a frame pair.
pub fn estimate_flow_pair(
    frame_t: &Frame,
    frame_t1: &Frame,
    params: &FlowParams,
) -> Result<(FlowField, FlowField)> {
    let forward = estimate_flow(frame_t, frame_t1, params)?;
    let backward = estimate_flow(frame_t1, frame_t, params)?;
    Ok((forward, backward))
}

/// Samples `frame` at `p + flow(p)` with bilinear interpolation; samples
/// outside the raster clamp to the nearest border pixel.
pub fn warp_image(frame: &Frame, flow: &FlowField) -> Result<Frame> {
    if frame.width() != flow.width() || frame.height() != flow.height() {
        return Err(Error::DimensionMismatch(format!(
            "frame {}x{} vs flow {}x{}",
            frame.width(),
            frame.height(),
            flow.width(),
            flow.height()
        )));
    }
    let planes: Vec<Plane> = (0..frame.channels()).map(|c| frame.channel_plane(c)).collect();
    let warped: Vec<Plane> = planes.iter().map(|p| warp_plane(p, flow)).collect();
    Frame::from_planes(&warped)
}

/// Plane-level warp used by both `warp_image` and the descriptor warping error.
pub fn warp_plane(plane: &Plane, flow: &FlowField) -> Plane {
    let mut out = Plane::zeros(plane.width(), plane.height());
    for y in 0..plane.height() {
        for x in 0..plane.width() {
            let (u, v) = flow.at(x, y);
            out.set(x, y, plane.sample_bilinear(x as f32 + u, y as f32 + v));
        }
    }
    out
}
