//! Spatial cues: color, gradient norm, and oriented gradient maps at a fine
//! and a coarse (2x downsampled, upsampled back) scale.

use super::{soft_bin, ChannelMap, ORIENTATIONS};
use crate::error::{Error, Result};
use crate::frame::Frame;
use crate::plane::Plane;

/// The 13 spatial channels in frozen order: R, G, B, gradient norm (fine,
/// coarse), oriented gradients at {0,45,90,135} degrees (fine then coarse).
pub fn spatial_cues(frame: &Frame) -> Result<ChannelMap> {
    if frame.channels() != 3 {
        return Err(Error::InvalidValue(format!(
            "spatial cues need a 3-channel frame, got {} channels",
            frame.channels()
        )));
    }
    let (w, h) = (frame.width(), frame.height());
    let luma = frame.luma();

    let (norm_fine, oriented_fine) = gradient_channels(&luma);
    let coarse_luma = luma.downsample2();
    let (norm_coarse, oriented_coarse) = gradient_channels(&coarse_luma);

    let mut names: Vec<String> = vec!["red".into(), "green".into(), "blue".into()];
    let mut planes = vec![frame.channel_plane(0), frame.channel_plane(1), frame.channel_plane(2)];

    names.push("grad_norm_fine".into());
    planes.push(norm_fine);
    names.push("grad_norm_coarse".into());
    planes.push(norm_coarse.resize_bilinear(w, h));

    for (angle, p) in ORIENTATIONS.iter().zip(oriented_fine) {
        names.push(format!("grad_{angle:.0}_fine"));
        planes.push(p);
    }
    for (angle, p) in ORIENTATIONS.iter().zip(oriented_coarse) {
        names.push(format!("grad_{angle:.0}_coarse"));
        planes.push(p.resize_bilinear(w, h));
    }

    ChannelMap::new(names, planes)
}

/// Gradient norm plus magnitude-weighted soft-binned orientation maps.
fn gradient_channels(plane: &Plane) -> (Plane, Vec<Plane>) {
    let (gx, gy) = plane.gradients();
    let (w, h) = (plane.width(), plane.height());
    let mut norm = Plane::zeros(w, h);
    let mut oriented = vec![Plane::zeros(w, h); ORIENTATIONS.len()];
    for y in 0..h {
        for x in 0..w {
            let dx = gx.get(x, y);
            let dy = gy.get(x, y);
            let mag = (dx * dx + dy * dy).sqrt();
            norm.set(x, y, mag);
            if mag > 0.0 {
                let theta = dy.atan2(dx);
                let ((k0, w0), (k1, w1)) = soft_bin(theta, ORIENTATIONS.len());
                oriented[k0].add(x, y, w0 * mag);
                oriented[k1].add(x, y, w1 * mag);
            }
        }
    }
    (norm, oriented)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn step_frame(w: usize, h: usize, edge_col: usize) -> Frame {
        let mut data = Vec::with_capacity(w * h * 3);
        for _y in 0..h {
            for x in 0..w {
                let v = if x < edge_col { 0.0 } else { 1.0 };
                data.extend_from_slice(&[v, v, v]);
            }
        }
        Frame::new(w, h, 3, data).unwrap()
    }

    #[test]
    fn constant_frame_has_zero_gradient_channels() {
        let f = Frame::constant(12, 12, 3, 0.5).unwrap();
        let cues = spatial_cues(&f).unwrap();
        assert_eq!(cues.channel_count(), 13);
        for name in ["grad_norm_fine", "grad_norm_coarse", "grad_0_fine", "grad_135_coarse"] {
            assert_eq!(cues.by_name(name).unwrap().max_abs(), 0.0, "{name}");
        }
        assert_eq!(cues.by_name("red").unwrap().get(3, 3), 0.5);
    }

    #[test]
    fn vertical_step_peaks_in_zero_degree_channel() {
        let f = step_frame(16, 16, 8);
        let cues = spatial_cues(&f).unwrap();
        let c0 = cues.by_name("grad_0_fine").unwrap();
        let c90 = cues.by_name("grad_90_fine").unwrap();
        // gradient is horizontal at the edge columns
        assert!(c0.get(8, 8) > 0.4);
        assert!(c90.get(8, 8).abs() < 1e-6);
        let (best_x, _) = (0..16).map(|x| (x, c0.get(x, 8))).fold((0, 0.0f32), |acc, it| {
            if it.1 > acc.1 {
                it
            } else {
                acc
            }
        });
        assert!(best_x == 7 || best_x == 8);
    }

    #[test]
    fn gradient_norm_matches_central_differences() {
        // independent finite-difference oracle on a smooth ramp
        let w = 16;
        let h = 16;
        let mut data = Vec::new();
        for y in 0..h {
            for x in 0..w {
                let v = 0.5 + 0.3 * ((x as f32) * 0.3).sin() * ((y as f32) * 0.2).cos();
                data.extend_from_slice(&[v, v, v]);
            }
        }
        let f = Frame::new(w, h, 3, data).unwrap();
        let cues = spatial_cues(&f).unwrap();
        let norm = cues.by_name("grad_norm_fine").unwrap();
        let luma = f.luma();
        for y in 1..h - 1 {
            for x in 1..w - 1 {
                let gx = 0.5 * (luma.get(x + 1, y) - luma.get(x - 1, y));
                let gy = 0.5 * (luma.get(x, y + 1) - luma.get(x, y - 1));
                let expect = (gx * gx + gy * gy).sqrt();
                assert!((norm.get(x, y) - expect).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn rejects_single_channel_frame() {
        let f = Frame::constant(8, 8, 1, 0.2).unwrap();
        assert!(spatial_cues(&f).is_err());
    }
}
