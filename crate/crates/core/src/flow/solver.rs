//! Coarse-to-fine variational solver with Charbonnier penalties.

use super::{FlowField, FlowParams};
use crate::error::Result;
use crate::plane::Plane;

const EPS_DATA: f32 = 1e-3;
const EPS_SMOOTH: f32 = 1e-3;
const SOR_SWEEPS: usize = 3;
const SOR_OMEGA: f32 = 1.9;

pub(super) fn solve(i1: &Plane, i2: &Plane, params: &FlowParams) -> Result<FlowField> {
    // the regularization weight is calibrated for the 0..255 intensity
    // scale; [0,1] luma would let the smoothness term crush the data term
    let rescale = |p: &Plane| {
        let mut out = p.clone();
        for v in out.data_mut() {
            *v *= 255.0;
        }
        out
    };
    // light presmoothing stabilizes the data term on noisy textures
    let base1 = rescale(i1).gaussian_blur(0.8);
    let base2 = rescale(i2).gaussian_blur(0.8);

    let levels = pyramid_sizes(i1.width(), i1.height(), params);
    let pyr1 = build_pyramid(&base1, &levels, params.scale_factor);
    let pyr2 = build_pyramid(&base2, &levels, params.scale_factor);

    let coarsest = levels.len() - 1;
    let mut u = Plane::zeros(levels[coarsest].0, levels[coarsest].1);
    let mut v = Plane::zeros(levels[coarsest].0, levels[coarsest].1);

    for level in (0..levels.len()).rev() {
        let (w, h) = levels[level];
        if level != coarsest {
            let ratio_x = w as f32 / u.width() as f32;
            let ratio_y = h as f32 / u.height() as f32;
            u = u.resize_bilinear(w, h);
            v = v.resize_bilinear(w, h);
            for val in u.data_mut() {
                *val *= ratio_x;
            }
            for val in v.data_mut() {
                *val *= ratio_y;
            }
        }
        solve_level(&pyr1[level], &pyr2[level], &mut u, &mut v, params);
    }

    FlowField::new(u, v)
}

/// Level sizes from finest (index 0) to coarsest; dimensions floor at 8.
fn pyramid_sizes(width: usize, height: usize, params: &FlowParams) -> Vec<(usize, usize)> {
    let mut sizes = Vec::with_capacity(params.pyramid_levels);
    for level in 0..params.pyramid_levels {
        let s = params.scale_factor.powi(level as i32);
        let w = ((width as f32 * s).round() as usize).max(8);
        let h = ((height as f32 * s).round() as usize).max(8);
        sizes.push((w, h));
    }
    sizes
}

fn build_pyramid(base: &Plane, sizes: &[(usize, usize)], scale: f32) -> Vec<Plane> {
    // antialias blur before each downsample
    let sigma = 0.6 * (1.0 / (scale * scale) - 1.0).sqrt();
    let mut pyramid = vec![base.clone()];
    for (w, h) in sizes.iter().skip(1) {
        let prev = pyramid.last().unwrap();
        pyramid.push(prev.gaussian_blur(sigma).resize_bilinear(*w, *h));
    }
    pyramid
}

fn warp_by(plane: &Plane, u: &Plane, v: &Plane) -> Plane {
    let mut out = Plane::zeros(plane.width(), plane.height());
    for y in 0..plane.height() {
        for x in 0..plane.width() {
            out.set(x, y, plane.sample_bilinear(x as f32 + u.get(x, y), y as f32 + v.get(x, y)));
        }
    }
    out
}

fn solve_level(i1: &Plane, i2: &Plane, u: &mut Plane, v: &mut Plane, params: &FlowParams) {
    let w = i1.width();
    let h = i1.height();
    let n = w * h;
    let lambda = params.regularization_weight;

    for _ in 0..params.warp_iterations {
        let i2w = warp_by(i2, u, v);
        let (g1x, g1y) = i1.gradients();
        let (g2x, g2y) = i2w.gradients();
        let mut ix = vec![0.0f32; n];
        let mut iy = vec![0.0f32; n];
        let mut it = vec![0.0f32; n];
        for i in 0..n {
            ix[i] = 0.5 * (g1x.data()[i] + g2x.data()[i]);
            iy[i] = 0.5 * (g1y.data()[i] + g2y.data()[i]);
            it[i] = i2w.data()[i] - i1.data()[i];
        }

        let mut du = vec![0.0f32; n];
        let mut dv = vec![0.0f32; n];
        let mut wd = vec![0.0f32; n];
        let mut ws = vec![0.0f32; n];

        for _ in 0..params.fixed_point_iterations {
            for i in 0..n {
                let r = it[i] + ix[i] * du[i] + iy[i] * dv[i];
                wd[i] = 1.0 / (r * r + EPS_DATA * EPS_DATA).sqrt();
            }
            smoothness_weights(u, v, &du, &dv, &mut ws);

            for _ in 0..SOR_SWEEPS {
                for y in 0..h {
                    for x in 0..w {
                        let i = y * w + x;
                        let mut sum_w = 0.0f32;
                        let mut nb_u = 0.0f32;
                        let mut nb_v = 0.0f32;
                        let mut add = |j: usize| {
                            let wpq = 0.5 * (ws[i] + ws[j]);
                            sum_w += wpq;
                            nb_u += wpq * (u.data()[j] + du[j] - u.data()[i]);
                            nb_v += wpq * (v.data()[j] + dv[j] - v.data()[i]);
                        };
                        if x > 0 {
                            add(i - 1);
                        }
                        if x + 1 < w {
                            add(i + 1);
                        }
                        if y > 0 {
                            add(i - w);
                        }
                        if y + 1 < h {
                            add(i + w);
                        }

                        let denom_u = wd[i] * ix[i] * ix[i] + lambda * sum_w + 1e-9;
                        let rhs_u = -wd[i] * ix[i] * (it[i] + iy[i] * dv[i]) + lambda * nb_u;
                        let new_du = rhs_u / denom_u;
                        du[i] += SOR_OMEGA * (new_du - du[i]);

                        let denom_v = wd[i] * iy[i] * iy[i] + lambda * sum_w + 1e-9;
                        let rhs_v = -wd[i] * iy[i] * (it[i] + ix[i] * du[i]) + lambda * nb_v;
                        let new_dv = rhs_v / denom_v;
                        dv[i] += SOR_OMEGA * (new_dv - dv[i]);
                    }
                }
            }
        }

        for i in 0..n {
            u.data_mut()[i] += du[i];
            v.data_mut()[i] += dv[i];
        }
        if params.median_filter_radius > 0 {
            *u = u.median_filter(params.median_filter_radius);
            *v = v.median_filter(params.median_filter_radius);
        }
    }
}

/// Per-pixel Charbonnier weight on the total-flow gradient magnitude.
fn smoothness_weights(u: &Plane, v: &Plane, du: &[f32], dv: &[f32], out: &mut [f32]) {
    let w = u.width();
    let h = u.height();
    let total = |i: usize, base: &Plane, inc: &[f32]| base.data()[i] + inc[i];
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let xl = if x > 0 { i - 1 } else { i };
            let xr = if x + 1 < w { i + 1 } else { i };
            let yu = if y > 0 { i - w } else { i };
            let yd = if y + 1 < h { i + w } else { i };
            let ux = 0.5 * (total(xr, u, du) - total(xl, u, du));
            let uy = 0.5 * (total(yd, u, du) - total(yu, u, du));
            let vx = 0.5 * (total(xr, v, dv) - total(xl, v, dv));
            let vy = 0.5 * (total(yd, v, dv) - total(yu, v, dv));
            let mag2 = ux * ux + uy * uy + vx * vx + vy * vy;
            out[i] = 1.0 / (mag2 + EPS_SMOOTH * EPS_SMOOTH).sqrt();
        }
    }
}
