//! Classifier input preparation: box crops resized for the spatial stream,
//! stacked flow crops for the temporal stream, and fixed-length clips.

use super::BoxProposal;
use crate::error::{Error, Result};
use crate::flow::FlowField;
use crate::frame::{Frame, FrameSequence};
use crate::plane::Plane;

pub const DEFAULT_CROP_SIDE: usize = 224;
pub const CLIP_LEN: usize = 16;
pub const CLIP_SIDE: usize = 112;

fn check_box(b: &BoxProposal, width: usize, height: usize) -> Result<()> {
    if b.w == 0 || b.h == 0 || b.x + b.w > width || b.y + b.h > height {
        return Err(Error::InvalidValue(format!(
            "box {}x{}+{}+{} outside {width}x{height}",
            b.w, b.h, b.x, b.y
        )));
    }
    Ok(())
}

/// Bilinear resize of the box contents to side x side; the aspect ratio is
/// not preserved.
pub fn crop_and_resize(frame: &Frame, region: &BoxProposal, side: usize) -> Result<Frame> {
    check_box(region, frame.width(), frame.height())?;
    let planes: Vec<Plane> = (0..frame.channels())
        .map(|c| {
            frame
                .channel_plane(c)
                .crop(region.x, region.y, region.w, region.h)
                .map(|p| p.resize_bilinear(side, side))
        })
        .collect::<Result<_>>()?;
    Frame::from_planes(&planes)
}

/// 2L flow channels (u1, v1, ..., uL, vL) cropped at one box and resized.
#[derive(Debug, Clone)]
pub struct FlowStack {
    depth: usize,
    side: usize,
    channels: Vec<Plane>,
}

impl FlowStack {
    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn channel_count(&self) -> usize {
        self.channels.len()
    }

    pub fn channel(&self, index: usize) -> &Plane {
        &self.channels[index]
    }

    pub fn channels(&self) -> &[Plane] {
        &self.channels
    }

    /// The u and v planes of stack entry `t`.
    pub fn flow_planes(&self, t: usize) -> (&Plane, &Plane) {
        (&self.channels[2 * t], &self.channels[2 * t + 1])
    }
}

/// Crops u and v of the first L flows at the same box, resizes each to
/// side x side, and concatenates them in temporal order.
pub fn stack_flow_crops(
    flows: &[FlowField],
    region: &BoxProposal,
    depth: usize,
    side: usize,
) -> Result<FlowStack> {
    if depth == 0 {
        return Err(Error::InvalidConfig("flow stacking depth must be >= 1".into()));
    }
    if flows.len() < depth {
        return Err(Error::TooSmall(format!(
            "need {depth} consecutive flows, got {}",
            flows.len()
        )));
    }
    let mut channels = Vec::with_capacity(2 * depth);
    for flow in &flows[..depth] {
        check_box(region, flow.width(), flow.height())?;
        channels
            .push(flow.u().crop(region.x, region.y, region.w, region.h)?.resize_bilinear(side, side));
        channels
            .push(flow.v().crop(region.x, region.y, region.w, region.h)?.resize_bilinear(side, side));
    }
    Ok(FlowStack { depth, side, channels })
}

/// Sixteen 112x112 RGB crops in temporal order.
#[derive(Debug, Clone)]
pub struct ClipTensor {
    frames: Vec<Frame>,
}

impl ClipTensor {
    pub fn new(frames: Vec<Frame>) -> Result<Self> {
        if frames.len() != CLIP_LEN {
            return Err(Error::DimensionMismatch(format!(
                "clip needs exactly {CLIP_LEN} frames, got {}",
                frames.len()
            )));
        }
        for f in &frames {
            if f.width() != CLIP_SIDE || f.height() != CLIP_SIDE || f.channels() != 3 {
                return Err(Error::DimensionMismatch(format!(
                    "clip slice must be {CLIP_SIDE}x{CLIP_SIDE}x3, got {}x{}x{}",
                    f.width(),
                    f.height(),
                    f.channels()
                )));
            }
        }
        Ok(ClipTensor { frames })
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    /// Channel-major (3 x 16 x 112 x 112) flattening.
    pub fn to_chw(&self) -> Vec<f32> {
        let mut out = Vec::with_capacity(3 * CLIP_LEN * CLIP_SIDE * CLIP_SIDE);
        for c in 0..3 {
            for f in &self.frames {
                for y in 0..CLIP_SIDE {
                    for x in 0..CLIP_SIDE {
                        out.push(f.get(x, y, c));
                    }
                }
            }
        }
        out
    }
}

/// Sixteen consecutive crops starting at `start`, resized for the clip
/// classifier.
pub fn prepare_clip(frames: &FrameSequence, region: &BoxProposal, start: usize) -> Result<ClipTensor> {
    if start + CLIP_LEN > frames.len() {
        return Err(Error::TooSmall(format!(
            "clip needs frames {start}..{}, sequence has {}",
            start + CLIP_LEN,
            frames.len()
        )));
    }
    let crops = frames.frames()[start..start + CLIP_LEN]
        .iter()
        .map(|f| crop_and_resize(&f.to_rgb(), region, CLIP_SIDE))
        .collect::<Result<Vec<_>>>()?;
    ClipTensor::new(crops)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn checker(w: usize, h: usize) -> Frame {
        let mut data = Vec::new();
        for y in 0..h {
            for x in 0..w {
                let v = if (x + y) % 2 == 0 { 0.2 } else { 0.9 };
                data.extend_from_slice(&[v, v, v]);
            }
        }
        Frame::new(w, h, 3, data).unwrap()
    }

    #[test]
    fn full_frame_same_side_is_identity() {
        let f = checker(24, 24);
        let b = BoxProposal::full_frame(24, 24);
        let out = crop_and_resize(&f, &b, 24).unwrap();
        assert_eq!(out, f);
    }

    #[test]
    fn constant_box_resizes_to_constant() {
        let f = Frame::constant(10, 10, 3, 0.4).unwrap();
        let b = BoxProposal { x: 3, y: 3, w: 2, h: 2, score: 0.0 };
        let out = crop_and_resize(&f, &b, 32).unwrap();
        assert!(out.data().iter().all(|v| (*v - 0.4).abs() < 1e-6));
    }

    #[test]
    fn invalid_box_is_rejected() {
        let f = checker(16, 16);
        let b = BoxProposal { x: 10, y: 10, w: 10, h: 4, score: 0.0 };
        assert!(crop_and_resize(&f, &b, 8).is_err());
    }

    #[test]
    fn stack_has_two_channels_per_flow() {
        let flows = vec![FlowField::constant(16, 16, 2.0, 0.0); 3];
        let b = BoxProposal { x: 2, y: 2, w: 8, h: 8, score: 0.0 };
        let stack = stack_flow_crops(&flows, &b, 1, 8).unwrap();
        assert_eq!(stack.channel_count(), 2);
        let stack = stack_flow_crops(&flows, &b, 3, 8).unwrap();
        assert_eq!(stack.channel_count(), 6);
        // constant flow survives crop+resize untouched
        for t in 0..3 {
            let (u, v) = stack.flow_planes(t);
            assert!(u.data().iter().all(|x| (*x - 2.0).abs() < 1e-6));
            assert!(v.data().iter().all(|x| x.abs() < 1e-6));
        }
    }

    #[test]
    fn too_few_flows_is_an_error() {
        let flows = vec![FlowField::zeros(16, 16); 4];
        let b = BoxProposal::full_frame(16, 16);
        assert!(matches!(stack_flow_crops(&flows, &b, 10, 8), Err(Error::TooSmall(_))));
    }

    #[test]
    fn clip_shape_and_short_sequence() {
        let frames: Vec<Frame> = (0..16).map(|_| checker(20, 20)).collect();
        let seq = FrameSequence::new(frames, None).unwrap();
        let b = BoxProposal::full_frame(20, 20);
        let clip = prepare_clip(&seq, &b, 0).unwrap();
        assert_eq!(clip.frames().len(), CLIP_LEN);
        assert_eq!(clip.to_chw().len(), 3 * 16 * 112 * 112);

        let short = FrameSequence::new(vec![checker(20, 20); 15], None).unwrap();
        assert!(matches!(prepare_clip(&short, &b, 0), Err(Error::TooSmall(_))));
    }

    #[test]
    fn constant_video_gives_identical_slices() {
        let frames = vec![Frame::constant(20, 20, 3, 0.6).unwrap(); 16];
        let seq = FrameSequence::new(frames, None).unwrap();
        let clip = prepare_clip(&seq, &BoxProposal::full_frame(20, 20), 0).unwrap();
        let first = clip.frames()[0].clone();
        for f in clip.frames() {
            assert_eq!(*f, first);
        }
    }
}
