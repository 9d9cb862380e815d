//! Single-channel f32 raster with the sampling and filtering primitives the
//! rest of the crate is built from. All border handling is clamp-to-edge.

use crate::error::{Error, Result};

/// Row-major single-channel raster.
#[derive(Debug, Clone, PartialEq)]
pub struct Plane {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl Plane {
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "plane data length {} != {}x{}",
                data.len(),
                width,
                height
            )));
        }
        Ok(Plane { width, height, data })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Plane { width, height, data: vec![0.0; width * height] }
    }

    pub fn constant(width: usize, height: usize, value: f32) -> Self {
        Plane { width, height, data: vec![value; width * height] }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f32) {
        self.data[y * self.width + x] = v;
    }

    #[inline]
    pub fn add(&mut self, x: usize, y: usize, v: f32) {
        self.data[y * self.width + x] += v;
    }

    /// Clamp-to-edge lookup for possibly out-of-range signed coordinates.
    #[inline]
    pub fn get_clamped(&self, x: isize, y: isize) -> f32 {
        let xc = x.clamp(0, self.width as isize - 1) as usize;
        let yc = y.clamp(0, self.height as isize - 1) as usize;
        self.data[yc * self.width + xc]
    }

    /// Bilinear sample at a continuous position; coordinates outside the
    /// raster clamp to the nearest border pixel.
    pub fn sample_bilinear(&self, x: f32, y: f32) -> f32 {
        let x = x.clamp(0.0, (self.width - 1) as f32);
        let y = y.clamp(0.0, (self.height - 1) as f32);
        let x0 = x.floor() as usize;
        let y0 = y.floor() as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let fx = x - x0 as f32;
        let fy = y - y0 as f32;
        let top = self.get(x0, y0) * (1.0 - fx) + self.get(x1, y0) * fx;
        let bot = self.get(x0, y1) * (1.0 - fx) + self.get(x1, y1) * fx;
        top * (1.0 - fy) + bot * fy
    }

    /// Central-difference gradients with clamp-to-edge borders.
    pub fn gradients(&self) -> (Plane, Plane) {
        let mut gx = Plane::zeros(self.width, self.height);
        let mut gy = Plane::zeros(self.width, self.height);
        for y in 0..self.height {
            for x in 0..self.width {
                let xi = x as isize;
                let yi = y as isize;
                gx.set(x, y, 0.5 * (self.get_clamped(xi + 1, yi) - self.get_clamped(xi - 1, yi)));
                gy.set(x, y, 0.5 * (self.get_clamped(xi, yi + 1) - self.get_clamped(xi, yi - 1)));
            }
        }
        (gx, gy)
    }

    /// 2x downsample by averaging 2x2 blocks (odd trailing row/column folds
    /// into the last block via clamping).
    pub fn downsample2(&self) -> Plane {
        let w = self.width.div_ceil(2).max(1);
        let h = self.height.div_ceil(2).max(1);
        let mut out = Plane::zeros(w, h);
        for y in 0..h {
            for x in 0..w {
                let x0 = (2 * x).min(self.width - 1);
                let x1 = (2 * x + 1).min(self.width - 1);
                let y0 = (2 * y).min(self.height - 1);
                let y1 = (2 * y + 1).min(self.height - 1);
                let s = self.get(x0, y0) + self.get(x1, y0) + self.get(x0, y1) + self.get(x1, y1);
                out.set(x, y, 0.25 * s);
            }
        }
        out
    }

    /// Bilinear resize to the given dimensions (half-pixel-centre convention;
    /// same-size resize is the identity).
    pub fn resize_bilinear(&self, width: usize, height: usize) -> Plane {
        if width == self.width && height == self.height {
            return self.clone();
        }
        let mut out = Plane::zeros(width, height);
        let sx = self.width as f32 / width as f32;
        let sy = self.height as f32 / height as f32;
        for y in 0..height {
            for x in 0..width {
                let src_x = (x as f32 + 0.5) * sx - 0.5;
                let src_y = (y as f32 + 0.5) * sy - 0.5;
                out.set(x, y, self.sample_bilinear(src_x, src_y));
            }
        }
        out
    }

    /// Separable Gaussian blur; sigma <= 0 is the identity.
    pub fn gaussian_blur(&self, sigma: f32) -> Plane {
        if sigma <= 0.0 {
            return self.clone();
        }
        let radius = (3.0 * sigma).ceil() as isize;
        let mut kernel = Vec::with_capacity((2 * radius + 1) as usize);
        let mut sum = 0.0f32;
        for i in -radius..=radius {
            let v = (-(i as f32).powi(2) / (2.0 * sigma * sigma)).exp();
            kernel.push(v);
            sum += v;
        }
        for k in &mut kernel {
            *k /= sum;
        }
        let mut tmp = Plane::zeros(self.width, self.height);
        for y in 0..self.height {
            for x in 0..self.width {
                let mut acc = 0.0;
                for (ki, k) in kernel.iter().enumerate() {
                    let xi = x as isize + ki as isize - radius;
                    acc += k * self.get_clamped(xi, y as isize);
                }
                tmp.set(x, y, acc);
            }
        }
        let mut out = Plane::zeros(self.width, self.height);
        for y in 0..self.height {
            for x in 0..self.width {
                let mut acc = 0.0;
                for (ki, k) in kernel.iter().enumerate() {
                    let yi = y as isize + ki as isize - radius;
                    acc += k * tmp.get_clamped(x as isize, yi);
                }
                out.set(x, y, acc);
            }
        }
        out
    }

    /// Median filter over a (2r+1)^2 window clipped to the raster bounds.
    pub fn median_filter(&self, radius: usize) -> Plane {
        if radius == 0 {
            return self.clone();
        }
        let r = radius as isize;
        let mut out = Plane::zeros(self.width, self.height);
        let mut window = Vec::with_capacity((2 * radius + 1).pow(2));
        for y in 0..self.height as isize {
            for x in 0..self.width as isize {
                window.clear();
                for dy in -r..=r {
                    for dx in -r..=r {
                        let xi = x + dx;
                        let yi = y + dy;
                        if xi >= 0 && xi < self.width as isize && yi >= 0 && yi < self.height as isize {
                            window.push(self.get(xi as usize, yi as usize));
                        }
                    }
                }
                window.sort_by(|a, b| a.partial_cmp(b).unwrap());
                let n = window.len();
                let med = if n % 2 == 1 {
                    window[n / 2]
                } else {
                    0.5 * (window[n / 2 - 1] + window[n / 2])
                };
                out.set(x as usize, y as usize, med);
            }
        }
        out
    }

    /// Copies the rect [x, x+w) x [y, y+h); must lie inside the raster.
    pub fn crop(&self, x: usize, y: usize, w: usize, h: usize) -> Result<Plane> {
        if x + w > self.width || y + h > self.height || w == 0 || h == 0 {
            return Err(Error::DimensionMismatch(format!(
                "crop {w}x{h}+{x}+{y} outside {}x{}",
                self.width, self.height
            )));
        }
        let mut data = Vec::with_capacity(w * h);
        for yy in y..y + h {
            data.extend_from_slice(&self.data[yy * self.width + x..yy * self.width + x + w]);
        }
        Plane::new(w, h, data)
    }

    /// Summed-area table with one extra row/column of zeros; block sums in O(1).
    pub fn integral(&self) -> IntegralPlane {
        let w = self.width + 1;
        let h = self.height + 1;
        let mut table = vec![0.0f64; w * h];
        for y in 0..self.height {
            let mut row = 0.0f64;
            for x in 0..self.width {
                row += self.get(x, y) as f64;
                table[(y + 1) * w + (x + 1)] = table[y * w + (x + 1)] + row;
            }
        }
        IntegralPlane { width: self.width, height: self.height, table }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f32 {
        self.data.iter().fold(0.0f32, |m, v| m.max(v.abs()))
    }
}

/// Summed-area table over a `Plane`.
#[derive(Debug, Clone)]
pub struct IntegralPlane {
    width: usize,
    height: usize,
    table: Vec<f64>,
}

impl IntegralPlane {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Sum over the half-open rect [x0,x1) x [y0,y1); coordinates are clipped
    /// to the raster, so callers may pass rects touching the border.
    pub fn rect_sum(&self, x0: usize, y0: usize, x1: usize, y1: usize) -> f64 {
        let x0 = x0.min(self.width);
        let x1 = x1.min(self.width);
        let y0 = y0.min(self.height);
        let y1 = y1.min(self.height);
        if x0 >= x1 || y0 >= y1 {
            return 0.0;
        }
        let w = self.width + 1;
        self.table[y1 * w + x1] - self.table[y0 * w + x1] - self.table[y1 * w + x0]
            + self.table[y0 * w + x0]
    }
}
