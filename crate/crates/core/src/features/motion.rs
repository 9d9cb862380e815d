//! Temporal cues derived from the flow field: gradient magnitude, oriented
//! flow-gradient maps, and motion boundary histograms. Everything here is a
//! function of flow derivatives, so constant (camera-induced) motion drops
//! out exactly.

use super::{box_accumulate, soft_bin, ChannelMap, CUE_WINDOW_RADIUS, ORIENTATIONS};
use crate::error::Result;
use crate::flow::FlowField;
use crate::plane::Plane;

pub const MBH_BINS: usize = 4;

/// Magnitude of the combined horizontal and vertical flow gradients.
pub fn flow_gradient_magnitude(flow: &FlowField) -> Plane {
    let (ux, uy) = flow.u().gradients();
    let (vx, vy) = flow.v().gradients();
    let (w, h) = (flow.width(), flow.height());
    let mut out = Plane::zeros(w, h);
    for y in 0..h {
        for x in 0..w {
            let a = ux.get(x, y);
            let b = uy.get(x, y);
            let c = vx.get(x, y);
            let d = vy.get(x, y);
            out.set(x, y, (a * a + b * b + c * c + d * d).sqrt());
        }
    }
    out
}

/// Five channels: the unoriented gradient magnitude, then four oriented maps
/// at {0,45,90,135} degrees computed on the 2x coarse scale. Each oriented
/// value is the average of the u- and v-gradient projections onto the
/// orientation, weighted by the gradient magnitudes.
pub fn flow_gradient_cues(flow: &FlowField) -> Result<ChannelMap> {
    let (w, h) = (flow.width(), flow.height());
    let mut names: Vec<String> = vec!["flow_grad_mag".into()];
    let mut planes = vec![flow_gradient_magnitude(flow)];

    let cu = flow.u().downsample2();
    let cv = flow.v().downsample2();
    let (cux, cuy) = cu.gradients();
    let (cvx, cvy) = cv.gradients();
    let (cw, ch) = (cu.width(), cu.height());

    for angle in ORIENTATIONS {
        let rad = angle.to_radians();
        let (ex, ey) = (rad.cos(), rad.sin());
        let mut p = Plane::zeros(cw, ch);
        for y in 0..ch {
            for x in 0..cw {
                let gu = (cux.get(x, y), cuy.get(x, y));
                let gv = (cvx.get(x, y), cvy.get(x, y));
                let mu = (gu.0 * gu.0 + gu.1 * gu.1).sqrt();
                let mv = (gv.0 * gv.0 + gv.1 * gv.1).sqrt();
                let total = mu + mv;
                if total > 0.0 {
                    let pu = (gu.0 * ex + gu.1 * ey).abs();
                    let pv = (gv.0 * ex + gv.1 * ey).abs();
                    p.set(x, y, (mu * pu + mv * pv) / total);
                }
            }
        }
        names.push(format!("flow_grad_{angle:.0}"));
        planes.push(p.resize_bilinear(w, h));
    }

    ChannelMap::new(names, planes)
}

/// Motion boundary histograms: for the u and v fields independently,
/// orientation of the spatial derivative is soft-quantized into 4 unsigned
/// bins with magnitude weighting, then accumulated over a 5x5 window.
/// Channel order is bin-major: mbh_0_u, mbh_0_v, mbh_45_u, ...
pub fn mbh(flow: &FlowField) -> Result<ChannelMap> {
    let (w, h) = (flow.width(), flow.height());
    let mut names = Vec::with_capacity(2 * MBH_BINS);
    let mut planes = Vec::with_capacity(2 * MBH_BINS);

    let field_votes = |field: &Plane| -> Vec<Plane> {
        let (gx, gy) = field.gradients();
        let mut votes = vec![Plane::zeros(w, h); MBH_BINS];
        for y in 0..h {
            for x in 0..w {
                let dx = gx.get(x, y);
                let dy = gy.get(x, y);
                let mag = (dx * dx + dy * dy).sqrt();
                if mag > 0.0 {
                    let ((k0, w0), (k1, w1)) = soft_bin(dy.atan2(dx), MBH_BINS);
                    votes[k0].add(x, y, w0 * mag);
                    votes[k1].add(x, y, w1 * mag);
                }
            }
        }
        votes.iter().map(|v| box_accumulate(v, CUE_WINDOW_RADIUS)).collect()
    };

    let u_bins = field_votes(flow.u());
    let v_bins = field_votes(flow.v());
    for (k, angle) in ORIENTATIONS.iter().enumerate() {
        names.push(format!("mbh_{angle:.0}_u"));
        planes.push(u_bins[k].clone());
        names.push(format!("mbh_{angle:.0}_v"));
        planes.push(v_bins[k].clone());
    }

    ChannelMap::new(names, planes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear_ramp_flow(w: usize, h: usize) -> FlowField {
        // u = x, v = 0
        let mut u = Plane::zeros(w, h);
        for y in 0..h {
            for x in 0..w {
                u.set(x, y, x as f32);
            }
        }
        FlowField::new(u, Plane::zeros(w, h)).unwrap()
    }

    fn seam_flow(w: usize, h: usize, seam_x: usize) -> FlowField {
        let mut u = Plane::zeros(w, h);
        for y in 0..h {
            for x in seam_x..w {
                u.set(x, y, 3.0);
            }
        }
        FlowField::new(u, Plane::zeros(w, h)).unwrap()
    }

    #[test]
    fn constant_flow_has_zero_cues() {
        let flow = FlowField::constant(12, 12, 3.0, -1.0);
        let cues = flow_gradient_cues(&flow).unwrap();
        assert_eq!(cues.channel_count(), 5);
        for p in cues.planes() {
            assert_eq!(p.max_abs(), 0.0);
        }
        let m = mbh(&flow).unwrap();
        assert_eq!(m.channel_count(), 8);
        for p in m.planes() {
            assert_eq!(p.max_abs(), 0.0);
        }
    }

    #[test]
    fn ramp_flow_has_unit_gradient_magnitude() {
        let flow = linear_ramp_flow(16, 16);
        let mag = flow_gradient_magnitude(&flow);
        for y in 1..15 {
            for x in 1..15 {
                assert!((mag.get(x, y) - 1.0).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn vertical_seam_peaks_in_zero_degree_channel() {
        let flow = seam_flow(24, 24, 12);
        let cues = flow_gradient_cues(&flow).unwrap();
        let c0 = cues.by_name("flow_grad_0").unwrap();
        let c90 = cues.by_name("flow_grad_90").unwrap();
        let peak_x = (0..24)
            .max_by(|a, b| c0.get(*a, 12).partial_cmp(&c0.get(*b, 12)).unwrap())
            .unwrap();
        assert!((11..=13).contains(&peak_x), "peak at {peak_x}");
        assert!(c0.get(peak_x, 12) > 0.0);
        assert!(c90.get(peak_x, 12) < 1e-6);
    }

    #[test]
    fn mbh_ignores_constant_offsets() {
        let flow = seam_flow(20, 20, 10);
        let shifted = flow.offset(5.0, -2.5);
        let a = mbh(&flow).unwrap();
        let b = mbh(&shifted).unwrap();
        for (pa, pb) in a.planes().iter().zip(b.planes()) {
            for (x, y) in pa.data().iter().zip(pb.data()) {
                assert!((x - y).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn mbh_energy_concentrates_on_square_perimeter() {
        // square region of distinct flow; gradient energy only at its border
        let w = 32;
        let h = 32;
        let mut u = Plane::zeros(w, h);
        for y in 10..22 {
            for x in 10..22 {
                u.set(x, y, 2.0);
            }
        }
        let flow = FlowField::new(u, Plane::zeros(w, h)).unwrap();
        let m = mbh(&flow).unwrap();
        let total = |x: usize, y: usize| -> f32 { m.planes().iter().map(|p| p.get(x, y)).sum() };
        assert!(total(10, 16) > 0.0);
        assert!(total(16, 10) > 0.0);
        assert_eq!(total(16, 16), 0.0); // interior, window clear of the border
        assert_eq!(total(2, 2), 0.0); // far background
    }
}
