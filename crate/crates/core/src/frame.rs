//! Image frames and ordered frame sequences, the pipeline inputs.

use crate::error::{Error, Result};
use crate::plane::Plane;

/// A single image with values normalized to [0,1].
///
/// `data` is row-major, channel-interleaved: pixel (x,y,c) lives at
/// `(y * width + x) * channels + c`.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f32>,
}

impl Frame {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidValue("frame dimensions must be positive".into()));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidValue(format!(
                "frame must have 1 or 3 channels, got {channels}"
            )));
        }
        if data.len() != width * height * channels {
            return Err(Error::DimensionMismatch(format!(
                "frame data length {} != {}x{}x{}",
                data.len(),
                width,
                height,
                channels
            )));
        }
        if let Some(v) = data.iter().find(|v| !v.is_finite() || **v < 0.0 || **v > 1.0) {
            return Err(Error::InvalidValue(format!("frame value {v} outside [0,1]")));
        }
        Ok(Frame { width, height, channels, data })
    }

    pub fn constant(width: usize, height: usize, channels: usize, value: f32) -> Result<Self> {
        Frame::new(width, height, channels, vec![value; width * height * channels])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f32 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    /// Replicates a grayscale frame to 3 channels; 3-channel frames pass through.
    pub fn to_rgb(&self) -> Frame {
        if self.channels == 3 {
            return self.clone();
        }
        let mut data = Vec::with_capacity(self.width * self.height * 3);
        for v in &self.data {
            data.extend_from_slice(&[*v, *v, *v]);
        }
        Frame { width: self.width, height: self.height, channels: 3, data }
    }

    /// Extracts one channel as a plane.
    pub fn channel_plane(&self, c: usize) -> Plane {
        let mut data = Vec::with_capacity(self.width * self.height);
        for y in 0..self.height {
            for x in 0..self.width {
                data.push(self.get(x, y, c));
            }
        }
        Plane::new(self.width, self.height, data).unwrap()
    }

    /// Rec.601 luma; grayscale frames return their single channel.
    pub fn luma(&self) -> Plane {
        if self.channels == 1 {
            return self.channel_plane(0);
        }
        let mut data = Vec::with_capacity(self.width * self.height);
        for y in 0..self.height {
            for x in 0..self.width {
                let r = self.get(x, y, 0);
                let g = self.get(x, y, 1);
                let b = self.get(x, y, 2);
                data.push(0.299 * r + 0.587 * g + 0.114 * b);
            }
        }
        Plane::new(self.width, self.height, data).unwrap()
    }

    /// Builds a frame from per-channel planes, clamping values into [0,1].
    pub fn from_planes(planes: &[Plane]) -> Result<Frame> {
        let channels = planes.len();
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidValue("expected 1 or 3 planes".into()));
        }
        let (w, h) = (planes[0].width(), planes[0].height());
        if planes.iter().any(|p| p.width() != w || p.height() != h) {
            return Err(Error::DimensionMismatch("plane sizes differ".into()));
        }
        let mut data = Vec::with_capacity(w * h * channels);
        for y in 0..h {
            for x in 0..w {
                for p in planes {
                    data.push(p.get(x, y).clamp(0.0, 1.0));
                }
            }
        }
        Frame::new(w, h, channels, data)
    }
}

/// An ordered run of same-shaped frames.
#[derive(Debug, Clone)]
pub struct FrameSequence {
    frames: Vec<Frame>,
    frame_rate_hint: Option<f64>,
}

impl FrameSequence {
    pub fn new(frames: Vec<Frame>, frame_rate_hint: Option<f64>) -> Result<Self> {
        if frames.is_empty() {
            return Err(Error::InvalidValue("frame sequence is empty".into()));
        }
        let (w, h, c) = (frames[0].width(), frames[0].height(), frames[0].channels());
        for (i, f) in frames.iter().enumerate() {
            if f.width() != w || f.height() != h || f.channels() != c {
                return Err(Error::DimensionMismatch(format!(
                    "frame {i} is {}x{}x{}, expected {w}x{h}x{c}",
                    f.width(),
                    f.height(),
                    f.channels()
                )));
            }
        }
        Ok(FrameSequence { frames, frame_rate_hint })
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn frame_rate_hint(&self) -> Option<f64> {
        self.frame_rate_hint
    }

    pub fn width(&self) -> usize {
        self.frames[0].width()
    }

    pub fn height(&self) -> usize {
        self.frames[0].height()
    }

    /// Temporal operations need at least two frames.
    pub fn require_pairs(&self) -> Result<()> {
        if self.frames.len() < 2 {
            return Err(Error::TooSmall("sequence has fewer than 2 frames".into()));
        }
        Ok(())
    }
}
