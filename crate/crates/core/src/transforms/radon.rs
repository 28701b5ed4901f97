//! Discrete Radon transform and filtered back-projection.
//!
//! The image is the bilinear interpolant of its pixels. Each projection bin
//! receives the exact share of every pixel's projected basis function, so
//! the projected mass is the same at every angle. The inverse applies a
//! ramp filter along `t` in the frequency domain and back-projects.

use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::types::{trapezoid, Density2D, ProjectionGrid, RawImage, DEFAULT_EPSILON};

/// Angle count below which filtered back-projection is visibly streaky.
pub const MIN_RECOMMENDED_ANGLES: usize = 16;

/// Radon transform samples `s̃(t_k, θ_j)`, stored column-major: column `j`
/// holds the projection at angle `θ_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sinogram {
    proj: ProjectionGrid,
    values: Vec<f64>,
}

impl Sinogram {
    pub fn new(proj: ProjectionGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != proj.field_len() {
            return Err(Error::DimensionMismatch { expected: proj.field_len(), actual: values.len() });
        }
        Ok(Self { proj, values })
    }

    pub fn proj(&self) -> &ProjectionGrid {
        &self.proj
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn column(&self, j: usize) -> &[f64] {
        let m = self.proj.n_t();
        &self.values[j * m..(j + 1) * m]
    }

    /// Trapezoid mass `∫ s̃(t, θ_j) dt` of every column.
    pub fn column_masses(&self) -> Vec<f64> {
        let h = self.proj.t_grid().spacing();
        (0..self.proj.n_angles()).map(|j| trapezoid(self.column(j), h)).collect()
    }

    /// Scales every column to unit mass.
    pub fn renormalized(mut self) -> Result<Self> {
        let m = self.proj.n_t();
        for (j, mass) in self.column_masses().into_iter().enumerate() {
            if !(mass > 0.0) {
                return Err(Error::AllZeroImage);
            }
            for v in &mut self.values[j * m..(j + 1) * m] {
                *v /= mass;
            }
        }
        Ok(self)
    }
}

/// Line integrals of `s` on the projection grid, without renormalization.
pub fn radon_project(s: &Density2D, proj: &ProjectionGrid) -> Result<Sinogram> {
    check_image(s, proj)?;
    let m = proj.n_t();
    let mut values = vec![0.0; proj.field_len()];
    for (j, &theta) in proj.thetas().iter().enumerate() {
        let footprint = Footprint::for_angle(theta, proj.pixel_spacing());
        let col = &mut values[j * m..(j + 1) * m];
        accumulate_angle(s.values(), 0.0, proj, theta, &footprint, col);
        finish_column(col, proj);
    }
    Ok(Sinogram { proj: proj.clone(), values })
}

/// Radon transform with every projection scaled to unit mass, so that all
/// angles carry identical intensity.
pub fn radon_forward(s: &Density2D, proj: &ProjectionGrid) -> Result<Sinogram> {
    radon_project(s, proj)?.renormalized()
}

fn check_image(s: &Density2D, proj: &ProjectionGrid) -> Result<()> {
    if s.height() != proj.image_height() || s.width() != proj.image_width() {
        return Err(Error::DimensionMismatch {
            expected: proj.image_height() * proj.image_width(),
            actual: s.height() * s.width(),
        });
    }
    if (s.pixel_spacing() - proj.pixel_spacing()).abs() > 1e-12 * proj.pixel_spacing() {
        return Err(Error::InvalidConfig("pixel spacing differs from projection grid".into()));
    }
    Ok(())
}

/// Projector with per-angle footprint tables and the projection of a
/// constant image cached. Projection is linear, so an image is split into its
/// minimum (the positivity floor) times a constant image plus a remainder
/// that is zero on the background and cheap to project.
#[derive(Debug, Clone)]
pub(crate) struct Projector {
    proj: ProjectionGrid,
    footprints: Vec<Footprint>,
    ones: Vec<f64>,
}

impl Projector {
    pub fn new(proj: ProjectionGrid) -> Self {
        let footprints: Vec<Footprint> =
            proj.thetas().iter().map(|&t| Footprint::for_angle(t, proj.pixel_spacing())).collect();
        let m = proj.n_t();
        let unit = vec![1.0; proj.image_height() * proj.image_width()];
        let mut ones = vec![0.0; proj.field_len()];
        for (j, &theta) in proj.thetas().iter().enumerate() {
            accumulate_angle(&unit, 0.0, &proj, theta, &footprints[j], &mut ones[j * m..(j + 1) * m]);
        }
        Self { proj, footprints, ones }
    }

    pub fn project(&self, s: &Density2D) -> Result<Sinogram> {
        check_image(s, &self.proj)?;
        let base = s.min_value();
        let m = self.proj.n_t();
        let mut values: Vec<f64> = self.ones.iter().map(|v| v * base).collect();
        for (j, &theta) in self.proj.thetas().iter().enumerate() {
            let col = &mut values[j * m..(j + 1) * m];
            accumulate_angle(s.values(), base, &self.proj, theta, &self.footprints[j], col);
            finish_column(col, &self.proj);
        }
        Ok(Sinogram { proj: self.proj.clone(), values })
    }
}

/// Adds the bin masses of `values - base` (pixels equal to `base` skipped) at
/// angle `theta` into `out`.
fn accumulate_angle(values: &[f64], base: f64, proj: &ProjectionGrid, theta: f64, footprint: &Footprint, out: &mut [f64]) {
    let h = proj.pixel_spacing();
    let (height, width) = (proj.image_height(), proj.image_width());
    let (sin, cos) = theta.sin_cos();
    let t_grid = proj.t_grid();
    let tau = t_grid.spacing();
    let x_min = t_grid.x_min();
    let last = out.len() - 1;
    let cx = (width as f64 - 1.0) / 2.0;
    let cy = (height as f64 - 1.0) / 2.0;
    let area = h * h;

    for i in 0..height {
        let y = (i as f64 - cy) * h;
        let row = &values[i * width..(i + 1) * width];
        for (j, &v) in row.iter().enumerate() {
            let v = v - base;
            if v == 0.0 {
                continue;
            }
            let tc = (j as f64 - cx) * h * cos + y * sin;
            let lo = ((tc - footprint.half - x_min) / tau).round().max(0.0) as usize;
            let hi = (((tc + footprint.half - x_min) / tau).round().max(0.0) as usize).min(last);
            let lo = lo.min(hi);
            // Mass beyond the outermost bin edges is kept in the edge bins.
            let mut below = if lo == 0 { 0.0 } else { footprint.cdf(x_min + (lo as f64 - 0.5) * tau - tc) };
            for (k, o) in out.iter_mut().enumerate().take(hi + 1).skip(lo) {
                let upper = if k == last { 1.0 } else { footprint.cdf(x_min + (k as f64 + 0.5) * tau - tc) };
                *o += v * area * (upper - below);
                below = upper;
            }
        }
    }
}

/// Converts accumulated bin masses to densities in `t`.
fn finish_column(col: &mut [f64], proj: &ProjectionGrid) {
    let tau = proj.t_grid().spacing();
    for o in col.iter_mut() {
        *o /= tau;
    }
}

/// Projection at one angle of the bilinear basis function of a pixel: the law
/// of `a(U₁+U₂) + b(U₃+U₄)` for independent centred unit uniforms, with
/// `a = h|cos θ|` and `b = h|sin θ|`. Its CDF is tabulated once per angle.
#[derive(Debug, Clone)]
struct Footprint {
    half: f64,
    table: Vec<f64>,
}

const FOOTPRINT_TABLE: usize = 512;

impl Footprint {
    fn for_angle(theta: f64, h: f64) -> Self {
        let (sin, cos) = theta.sin_cos();
        Self::new(h * cos.abs(), h * sin.abs())
    }

    fn new(w1: f64, w2: f64) -> Self {
        let (a, b) = if w1 >= w2 { (w1, w2) } else { (w2, w1) };
        let half = a + b;
        let table = (0..=FOOTPRINT_TABLE)
            .map(|i| {
                if i == 0 {
                    0.0
                } else if i == FOOTPRINT_TABLE {
                    1.0
                } else {
                    uniform_sum_cdf(-half + 2.0 * half * i as f64 / FOOTPRINT_TABLE as f64, a, b)
                }
            })
            .collect();
        Self { half, table }
    }

    fn cdf(&self, x: f64) -> f64 {
        let f = (x + self.half) / (2.0 * self.half) * FOOTPRINT_TABLE as f64;
        if f <= 0.0 {
            return 0.0;
        }
        if f >= FOOTPRINT_TABLE as f64 {
            return 1.0;
        }
        let i = f.floor() as usize;
        let w = f - i as f64;
        self.table[i] * (1.0 - w) + self.table[i + 1] * w
    }
}

/// CDF at `x` of `a(U₁+U₂) + b(U₃+U₄)`, `U` uniform on `[-½, ½]`, `a ≥ b`.
fn uniform_sum_cdf(x: f64, a: f64, b: f64) -> f64 {
    let pos = |v: f64| v.max(0.0);
    if b <= 1e-4 * a {
        // Triangle of half-width a.
        let y = x + a;
        let c = (pos(y).powi(2) - 2.0 * pos(y - a).powi(2) + pos(y - 2.0 * a).powi(2)) / (2.0 * a * a);
        return c.clamp(0.0, 1.0);
    }
    // Inclusion-exclusion over subsets of the four widths {a, a, b, b}.
    let y = x + a + b;
    let mut acc = 0.0;
    for (na, ca) in [(0.0, 1.0), (1.0, -2.0), (2.0, 1.0)] {
        for (nb, cb) in [(0.0, 1.0), (1.0, -2.0), (2.0, 1.0)] {
            acc += ca * cb * pos(y - na * a - nb * b).powi(4);
        }
    }
    (acc / (24.0 * a * a * b * b)).clamp(0.0, 1.0)
}

/// Ramp (|ω|) filter along `t` for every column, via the FFT of the
/// band-limited spatial ramp kernel with zero padding to a power of two.
pub(crate) fn ramp_filter(sg: &Sinogram) -> Vec<f64> {
    let m = sg.proj.n_t();
    let tau = sg.proj.t_grid().spacing();
    let p = (2 * m).next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(p);
    let inv = planner.plan_fft_inverse(p);

    let mut kernel: Vec<Complex<f64>> = (0..p)
        .map(|i| {
            let n = if i <= p / 2 { i as i64 } else { i as i64 - p as i64 };
            let v = if n == 0 {
                1.0 / (4.0 * tau * tau)
            } else if n % 2 == 0 {
                0.0
            } else {
                -1.0 / ((n * n) as f64 * PI * PI * tau * tau)
            };
            Complex::new(v, 0.0)
        })
        .collect();
    fwd.process(&mut kernel);

    let mut out = vec![0.0; sg.values.len()];
    let mut buf = vec![Complex::new(0.0, 0.0); p];
    let scale = tau / p as f64;
    for j in 0..sg.proj.n_angles() {
        for (b, &v) in buf.iter_mut().zip(sg.column(j)) {
            *b = Complex::new(v, 0.0);
        }
        for b in &mut buf[m..] {
            *b = Complex::new(0.0, 0.0);
        }
        fwd.process(&mut buf);
        for (b, k) in buf.iter_mut().zip(&kernel) {
            *b *= k;
        }
        inv.process(&mut buf);
        for (o, b) in out[j * m..(j + 1) * m].iter_mut().zip(&buf) {
            *o = b.re * scale;
        }
    }
    out
}

/// Filtered back-projection. The result is clipped at zero and renormalized to
/// a unit-mass density on the image grid recorded in the projection grid.
pub fn radon_inverse(sg: &Sinogram) -> Result<Density2D> {
    let proj = &sg.proj;
    if proj.n_angles() < MIN_RECOMMENDED_ANGLES {
        log::warn!(
            "filtered back-projection with {} angles (fewer than {MIN_RECOMMENDED_ANGLES})",
            proj.n_angles()
        );
    }
    let filtered = ramp_filter(sg);
    let (height, width) = (proj.image_height(), proj.image_width());
    let h = proj.pixel_spacing();
    let m = proj.n_t();
    let t_grid = proj.t_grid();
    let cx = (width as f64 - 1.0) / 2.0;
    let cy = (height as f64 - 1.0) / 2.0;
    let mut image = vec![0.0; height * width];

    for (j, &theta) in proj.thetas().iter().enumerate() {
        let (sin, cos) = theta.sin_cos();
        let col = &filtered[j * m..(j + 1) * m];
        for i in 0..height {
            let y = (i as f64 - cy) * h;
            for jj in 0..width {
                let x = (jj as f64 - cx) * h;
                let f = t_grid.fractional_index(x * cos + y * sin);
                if f < 0.0 || f > (m - 1) as f64 {
                    continue;
                }
                let k = (f.floor() as usize).min(m - 2);
                let w = f - k as f64;
                image[i * width + jj] += col[k] * (1.0 - w) + col[k + 1] * w;
            }
        }
    }
    let scale = PI / proj.n_angles() as f64;
    for v in &mut image {
        *v = (*v * scale).max(0.0);
    }
    let raw = RawImage::new(height, width, image)?;
    Density2D::from_raw_with_spacing(&raw, DEFAULT_EPSILON, h)
}
