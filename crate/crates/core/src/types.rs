//! Sampling grids, densities and labelled image collections.
//!
//! Images use a centred coordinate frame: pixel `(row i, col j)` sits at
//! `x = (j - (W-1)/2)·h`, `y = (i - (H-1)/2)·h` where `h` is the pixel
//! spacing. The projection direction for angle `θ` is `ξ = (cos θ, sin θ)`.

use crate::error::{Error, Result};

/// Floor added to every pixel, relative to the image maximum, before
/// normalizing to a density.
pub const DEFAULT_EPSILON: f64 = 1e-8;

/// Default number of projection angles.
pub const DEFAULT_ANGLES: usize = 180;

/// Regularly spaced points on `[x_min, x_max]`, endpoints included.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D {
    n_points: usize,
    x_min: f64,
    x_max: f64,
}

impl Grid1D {
    pub fn new(n_points: usize, x_min: f64, x_max: f64) -> Result<Self> {
        if n_points < 2 {
            return Err(Error::InvalidGrid(format!("{n_points} points, need at least 2")));
        }
        if !(x_min.is_finite() && x_max.is_finite() && x_max > x_min) {
            return Err(Error::InvalidGrid(format!("bad interval [{x_min}, {x_max}]")));
        }
        Ok(Self { n_points, x_min, x_max })
    }

    pub fn len(&self) -> usize {
        self.n_points
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn length(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn spacing(&self) -> f64 {
        self.length() / (self.n_points - 1) as f64
    }

    pub fn point(&self, i: usize) -> f64 {
        if i + 1 == self.n_points {
            self.x_max
        } else {
            self.x_min + i as f64 * self.spacing()
        }
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n_points).map(|i| self.point(i)).collect()
    }

    /// Centres of the `len()` equal cells that partition `[x_min, x_max]`.
    ///
    /// Transport maps are sampled here: the reference quantile of centre `k`
    /// is `(k + 1/2) / len()` for a uniform reference, which keeps every
    /// sample strictly inside the support.
    pub fn cell_centers(&self) -> Grid1D {
        let half = 0.5 * self.length() / self.n_points as f64;
        Grid1D { n_points: self.n_points, x_min: self.x_min + half, x_max: self.x_max - half }
    }

    /// Fractional index of `x` (may lie outside `[0, len-1]`).
    pub(crate) fn fractional_index(&self, x: f64) -> f64 {
        (x - self.x_min) / self.spacing()
    }
}

/// Trapezoid rule on a regular grid.
pub fn trapezoid(values: &[f64], spacing: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => {
            let inner: f64 = values[1..n - 1].iter().sum();
            spacing * (inner + 0.5 * (values[0] + values[n - 1]))
        }
    }
}

/// Running trapezoid integral, starting at zero.
pub fn cumulative_trapezoid(values: &[f64], spacing: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut acc = 0.0;
    out.push(0.0);
    for w in values.windows(2) {
        acc += 0.5 * spacing * (w[0] + w[1]);
        out.push(acc);
    }
    out.truncate(values.len());
    out
}

/// Linear interpolation of samples on `grid`, zero outside.
pub(crate) fn interp_on_grid(grid: &Grid1D, values: &[f64], x: f64) -> f64 {
    let f = grid.fractional_index(x);
    let last = (grid.len() - 1) as f64;
    if !(0.0..=last).contains(&f) {
        return 0.0;
    }
    let i = (f.floor() as usize).min(grid.len() - 2);
    let w = f - i as f64;
    values[i] * (1.0 - w) + values[i + 1] * w
}

/// Strictly positive 1D density on a regular grid with unit trapezoid mass.
#[derive(Debug, Clone, PartialEq)]
pub struct Density1D {
    grid: Grid1D,
    values: Vec<f64>,
}

impl Density1D {
    /// Clips negatives, adds `epsilon · max` everywhere and rescales to unit
    /// mass.
    pub fn from_samples(grid: Grid1D, mut values: Vec<f64>, epsilon: f64) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch { expected: grid.len(), actual: values.len() });
        }
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidConfig(format!("epsilon must be positive, got {epsilon}")));
        }
        if values.iter().any(|v| v.is_nan()) {
            return Err(Error::InvalidDensity("NaN sample".into()));
        }
        let max = values.iter().fold(0.0f64, |m, &v| m.max(v));
        if !(max > 0.0) || !max.is_finite() {
            return Err(Error::AllZeroImage);
        }
        let floor = epsilon * max;
        for v in &mut values {
            *v = v.max(0.0) + floor;
        }
        let mass = trapezoid(&values, grid.spacing());
        for v in &mut values {
            *v /= mass;
        }
        Ok(Self { grid, values })
    }

    /// Constant density `1 / (x_max - x_min)`.
    pub fn uniform(grid: Grid1D) -> Self {
        let v = 1.0 / grid.length();
        Self { grid, values: vec![v; grid.len()] }
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mass(&self) -> f64 {
        trapezoid(&self.values, self.grid.spacing())
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Cumulative distribution at the grid points, scaled so the last entry
    /// is exactly one.
    pub fn cdf(&self) -> Vec<f64> {
        let mut c = cumulative_trapezoid(&self.values, self.grid.spacing());
        let total = *c.last().unwrap();
        for v in &mut c {
            *v /= total;
        }
        *c.last_mut().unwrap() = 1.0;
        c
    }

    /// Linearly interpolated density value, zero outside the grid.
    pub fn value_at(&self, x: f64) -> f64 {
        interp_on_grid(&self.grid, &self.values, x)
    }
}

/// Uniform reference density on `grid`.
pub fn make_uniform_reference1d(grid: Grid1D) -> Density1D {
    Density1D::uniform(grid)
}

/// Row-major matrix of raw (unnormalized) pixel intensities.
#[derive(Debug, Clone, PartialEq)]
pub struct RawImage {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl RawImage {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::InvalidConfig(format!("empty image {height}x{width}")));
        }
        if data.len() != height * width {
            return Err(Error::DimensionMismatch { expected: height * width, actual: data.len() });
        }
        Ok(Self { height, width, data })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self { height, width, data: vec![0.0; height * width] }
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(height * width);
        for i in 0..height {
            for j in 0..width {
                data.push(f(i, j));
            }
        }
        Self { height, width, data }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    /// Intensity-weighted mean position `(x, y)` in the centred frame (unit
    /// pixel spacing).
    pub fn centroid(&self) -> (f64, f64) {
        let cx = (self.width as f64 - 1.0) / 2.0;
        let cy = (self.height as f64 - 1.0) / 2.0;
        let (mut sx, mut sy, mut s) = (0.0, 0.0, 0.0);
        for i in 0..self.height {
            for j in 0..self.width {
                let v = self.get(i, j);
                sx += v * (j as f64 - cx);
                sy += v * (i as f64 - cy);
                s += v;
            }
        }
        (sx / s, sy / s)
    }
}

/// Strictly positive image density: `sum(values) · spacing² = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Density2D {
    height: usize,
    width: usize,
    values: Vec<f64>,
    pixel_spacing: f64,
}

impl Density2D {
    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn pixel_spacing(&self) -> f64 {
        self.pixel_spacing
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }

    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.pixel_spacing * self.pixel_spacing
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Density values as a raw image (drops the spacing).
    pub fn to_raw(&self) -> RawImage {
        RawImage { height: self.height, width: self.width, data: self.values.clone() }
    }

    /// Same as [`normalize_to_density2d`] with an explicit pixel spacing.
    pub fn from_raw_with_spacing(raw: &RawImage, epsilon: f64, pixel_spacing: f64) -> Result<Self> {
        if !(pixel_spacing > 0.0 && pixel_spacing.is_finite()) {
            return Err(Error::InvalidConfig(format!("pixel spacing {pixel_spacing}")));
        }
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidConfig(format!("epsilon must be positive, got {epsilon}")));
        }
        if raw.data.iter().any(|v| v.is_nan()) {
            return Err(Error::InvalidDensity("NaN pixel".into()));
        }
        let max = raw.data.iter().fold(0.0f64, |m, &v| m.max(v));
        if !(max > 0.0) || !max.is_finite() {
            return Err(Error::AllZeroImage);
        }
        let floor = epsilon * max;
        let mut values: Vec<f64> = raw.data.iter().map(|&v| v.max(0.0) + floor).collect();
        let mass = values.iter().sum::<f64>() * pixel_spacing * pixel_spacing;
        for v in &mut values {
            *v /= mass;
        }
        Ok(Self { height: raw.height, width: raw.width, values, pixel_spacing })
    }
}

/// Clips `raw` at zero, adds `epsilon · max(raw)` to every pixel and rescales
/// to unit mass (pixel spacing 1).
pub fn normalize_to_density2d(raw: &RawImage, epsilon: f64) -> Result<Density2D> {
    Density2D::from_raw_with_spacing(raw, epsilon, 1.0)
}

/// The `(t, θ)` sampling grid for the Radon transform of an
/// `image_height × image_width` image.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionGrid {
    t_grid: Grid1D,
    thetas: Vec<f64>,
    image_height: usize,
    image_width: usize,
    pixel_spacing: f64,
}

impl ProjectionGrid {
    /// `n_angles` equally spaced angles on `[0, π)` and a symmetric offset
    /// axis with `t_points` samples covering `±t_half_width`.
    pub fn new(
        t_points: usize,
        t_half_width: f64,
        n_angles: usize,
        image_height: usize,
        image_width: usize,
        pixel_spacing: f64,
    ) -> Result<Self> {
        if n_angles == 0 {
            return Err(Error::InvalidConfig("need at least one angle".into()));
        }
        if image_height == 0 || image_width == 0 {
            return Err(Error::InvalidConfig("empty image".into()));
        }
        let t_grid = Grid1D::new(t_points, -t_half_width, t_half_width)?;
        let required = half_diagonal(image_height, image_width, pixel_spacing);
        if t_half_width < required * (1.0 - 1e-12) {
            return Err(Error::GridTooSmall { half_width: t_half_width, required });
        }
        let thetas = (0..n_angles)
            .map(|j| j as f64 * std::f64::consts::PI / n_angles as f64)
            .collect();
        Ok(Self { t_grid, thetas, image_height, image_width, pixel_spacing })
    }

    /// Rebuilds a grid from an explicit angle list (used when reading files).
    pub fn with_angles(
        t_grid: Grid1D,
        thetas: Vec<f64>,
        image_height: usize,
        image_width: usize,
        pixel_spacing: f64,
    ) -> Result<Self> {
        if thetas.is_empty() {
            return Err(Error::InvalidConfig("need at least one angle".into()));
        }
        if thetas.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidConfig("angles must be strictly increasing".into()));
        }
        let required = half_diagonal(image_height, image_width, pixel_spacing);
        let half = t_grid.x_max().min(-t_grid.x_min());
        if half < required * (1.0 - 1e-12) {
            return Err(Error::GridTooSmall { half_width: half, required });
        }
        Ok(Self { t_grid, thetas, image_height, image_width, pixel_spacing })
    }

    pub fn t_grid(&self) -> &Grid1D {
        &self.t_grid
    }

    /// Offsets at which transport maps are sampled.
    pub fn field_t_grid(&self) -> Grid1D {
        self.t_grid.cell_centers()
    }

    pub fn thetas(&self) -> &[f64] {
        &self.thetas
    }

    pub fn n_t(&self) -> usize {
        self.t_grid.len()
    }

    pub fn n_angles(&self) -> usize {
        self.thetas.len()
    }

    /// Length of a flattened `(t, θ)` field.
    pub fn field_len(&self) -> usize {
        self.n_t() * self.n_angles()
    }

    pub fn image_height(&self) -> usize {
        self.image_height
    }

    pub fn image_width(&self) -> usize {
        self.image_width
    }

    pub fn pixel_spacing(&self) -> f64 {
        self.pixel_spacing
    }
}

fn half_diagonal(h: usize, w: usize, spacing: f64) -> f64 {
    0.5 * ((h * h + w * w) as f64).sqrt() * spacing
}

/// Symmetric offset axis with unit-or-finer spacing and `n_angles` angles on
/// `[0, π)`. The axis covers the support of the bilinear interpolant, which
/// reaches half a pixel past the image edge, plus half a bin, so the outermost
/// bins of every projection are empty.
pub fn default_projection_grid(height: usize, width: usize, n_angles: usize) -> Result<ProjectionGrid> {
    let (h, w) = ((height + 1) as f64, (width + 1) as f64);
    let half = 0.5 * (h * h + w * w).sqrt() + 0.5;
    let t_points = (2.0 * half).ceil() as usize + 1;
    ProjectionGrid::new(t_points, half, n_angles, height, width, 1.0)
}

/// Images with class labels in `0..num_classes`; all images share one shape.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledImageSet {
    images: Vec<RawImage>,
    labels: Vec<usize>,
    num_classes: usize,
}

impl LabeledImageSet {
    pub fn new(images: Vec<RawImage>, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        if images.len() != labels.len() {
            return Err(Error::CountMismatch { images: images.len(), labels: labels.len() });
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= num_classes) {
            return Err(Error::InvalidConfig(format!("label {bad} outside 0..{num_classes}")));
        }
        if let Some(first) = images.first() {
            if let Some(odd) = images.iter().find(|im| im.height != first.height || im.width != first.width) {
                return Err(Error::DimensionMismatch {
                    expected: first.height * first.width,
                    actual: odd.height * odd.width,
                });
            }
        }
        Ok(Self { images, labels, num_classes })
    }

    /// Infers the class count as `max(label) + 1`.
    pub fn from_labels(images: Vec<RawImage>, labels: Vec<usize>) -> Result<Self> {
        let k = labels.iter().max().map_or(0, |m| m + 1);
        Self::new(images, labels, k)
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn images(&self) -> &[RawImage] {
        &self.images
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    /// `(height, width)` of the images, `None` when empty.
    pub fn image_shape(&self) -> Option<(usize, usize)> {
        self.images.first().map(|im| (im.height, im.width))
    }

    /// Sample indices grouped by class, in ascending order.
    pub fn class_indices(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.num_classes];
        for (i, &l) in self.labels.iter().enumerate() {
            out[l].push(i);
        }
        out
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            images: indices.iter().map(|&i| self.images[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            num_classes: self.num_classes,
        }
    }

    pub fn into_parts(self) -> (Vec<RawImage>, Vec<usize>, usize) {
        (self.images, self.labels, self.num_classes)
    }
}
