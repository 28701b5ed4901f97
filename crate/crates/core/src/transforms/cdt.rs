//! Cumulative distribution transform of 1D densities.
//!
//! The transform of `s` with respect to a reference `r` is the increasing map
//! `ŝ` with `F_s(ŝ(x)) = F_r(x)`. It is sampled at the cell centres of the
//! reference grid (see [`Grid1D::cell_centers`]); cumulative distributions use
//! the trapezoid rule and are inverted by monotone linear interpolation.

use crate::error::{Error, Result};
use crate::types::{interp_on_grid, Density1D, Grid1D, DEFAULT_EPSILON};

/// Sampled transport map `ŝ` on the reference cell centres.
#[derive(Debug, Clone, PartialEq)]
pub struct CdtFunction {
    grid: Grid1D,
    values: Vec<f64>,
}

impl CdtFunction {
    /// Wraps a sampled map, rejecting anything that is not strictly increasing.
    pub fn new(grid: Grid1D, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch { expected: grid.len(), actual: values.len() });
        }
        check_strictly_increasing(&values)?;
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

pub(crate) fn check_strictly_increasing(values: &[f64]) -> Result<()> {
    for (i, w) in values.windows(2).enumerate() {
        if !(w[1] > w[0]) {
            return Err(Error::NonMonotoneInput { index: i + 1 });
        }
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonMonotoneInput { index: 0 });
    }
    Ok(())
}

/// Reference quantile levels `F_r(y_k)` at the cell centres `y_k`, together
/// with the quadrature weights `r(y_k) · |cell|` of the embedding norm.
#[derive(Debug, Clone)]
pub(crate) struct ReferenceLevels {
    pub grid: Grid1D,
    pub levels: Vec<f64>,
    pub weights: Vec<f64>,
}

impl ReferenceLevels {
    pub fn new(r: &Density1D) -> Self {
        Self::subdivided(r, 1)
    }

    /// Levels at the centres of `len() · k` equal cells, for a finer
    /// quadrature of the embedding norm.
    pub fn subdivided(r: &Density1D, k: usize) -> Self {
        let g = r.grid();
        let n = g.len() * k.max(1);
        let grid = Grid1D::new(n, g.x_min(), g.x_max()).expect("refined grid").cell_centers();
        let cdf = r.cdf();
        let cell = g.length() / n as f64;
        let mut levels = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        for y in grid.points() {
            levels.push(interp_on_grid(g, &cdf, y));
            weights.push(r.value_at(y) * cell);
        }
        Self { grid, levels, weights }
    }
}

/// Writes `F⁻¹(level)` for each (ascending) level into `out`.
///
/// `cdf` must be strictly increasing on `grid`, starting at 0 and ending at 1.
pub(crate) fn invert_cdf(cdf: &[f64], grid: &Grid1D, levels: &[f64], out: &mut [f64]) -> Result<()> {
    for (i, w) in cdf.windows(2).enumerate() {
        if !(w[1] > w[0]) {
            return Err(Error::NonMonotoneCdf { index: i + 1 });
        }
    }
    let h = grid.spacing();
    let last = cdf.len() - 1;
    let mut i = 0;
    for (q, o) in levels.iter().zip(out.iter_mut()) {
        while i < last - 1 && cdf[i + 1] <= *q {
            i += 1;
        }
        let w = ((q - cdf[i]) / (cdf[i + 1] - cdf[i])).clamp(0.0, 1.0);
        *o = grid.point(i) + w * h;
    }
    enforce_strictly_increasing(out, h);
    Ok(())
}

/// Repairs floating point ties: any non-increasing neighbour is pushed up by
/// `1e-12 · spacing`.
pub(crate) fn enforce_strictly_increasing(values: &mut [f64], spacing: f64) {
    let jitter = 1e-12 * spacing;
    for k in 1..values.len() {
        if values[k] <= values[k - 1] {
            values[k] = values[k - 1] + jitter;
        }
    }
}

/// Forward CDT of `s` with respect to `r`.
pub fn cdt_forward(s: &Density1D, r: &Density1D) -> Result<CdtFunction> {
    let reference = ReferenceLevels::new(r);
    cdt_forward_with(s, &reference)
}

pub(crate) fn cdt_forward_with(s: &Density1D, reference: &ReferenceLevels) -> Result<CdtFunction> {
    let mut values = vec![0.0; reference.levels.len()];
    invert_cdf(&s.cdf(), s.grid(), &reference.levels, &mut values)?;
    Ok(CdtFunction { grid: reference.grid, values })
}

/// Inverse CDT: rebuilds the density on `r`'s grid from
/// `s(x) = d/dx F_r(ŝ⁻¹(x))`, then renormalizes to unit mass.
pub fn cdt_inverse(shat: &CdtFunction, r: &Density1D) -> Result<Density1D> {
    check_strictly_increasing(&shat.values)?;
    let grid = *r.grid();
    let values = inverse_density_samples(shat.values(), shat.grid(), r)?;
    Density1D::from_samples(grid, values, DEFAULT_EPSILON)
}

/// Unnormalized density samples on `r.grid()` for the map `shat` sampled at
/// `at`.
pub(crate) fn inverse_density_samples(shat: &[f64], at: &Grid1D, r: &Density1D) -> Result<Vec<f64>> {
    if shat.len() != at.len() {
        return Err(Error::DimensionMismatch { expected: at.len(), actual: shat.len() });
    }
    let grid = r.grid();
    // ŝ⁻¹ as a piecewise linear table (x → y), anchored so that the domain
    // endpoints map to each other.
    let mut xs = Vec::with_capacity(shat.len() + 2);
    let mut ys = Vec::with_capacity(shat.len() + 2);
    if shat[0] > grid.x_min() {
        xs.push(grid.x_min());
        ys.push(grid.x_min());
    }
    for (k, &v) in shat.iter().enumerate() {
        xs.push(v);
        ys.push(at.point(k));
    }
    if shat[shat.len() - 1] < grid.x_max() {
        xs.push(grid.x_max());
        ys.push(grid.x_max());
    }

    let cdf_r = r.cdf();
    let points = grid.points();
    let mut g = Vec::with_capacity(points.len());
    let mut i = 0;
    for &x in &points {
        let y = if x <= xs[0] {
            ys[0]
        } else if x >= xs[xs.len() - 1] {
            ys[ys.len() - 1]
        } else {
            while xs[i + 1] < x {
                i += 1;
            }
            let w = (x - xs[i]) / (xs[i + 1] - xs[i]);
            ys[i] + w * (ys[i + 1] - ys[i])
        };
        g.push(cdf_at(grid, &cdf_r, y));
    }

    let h = grid.spacing();
    let n = g.len();
    let mut out = Vec::with_capacity(n);
    for j in 0..n {
        let d = if j == 0 {
            (g[1] - g[0]) / h
        } else if j == n - 1 {
            (g[n - 1] - g[n - 2]) / h
        } else {
            (g[j + 1] - g[j - 1]) / (2.0 * h)
        };
        out.push(d.max(0.0));
    }
    Ok(out)
}

fn cdf_at(grid: &Grid1D, cdf: &[f64], y: f64) -> f64 {
    if y <= grid.x_min() {
        0.0
    } else if y >= grid.x_max() {
        1.0
    } else {
        interp_on_grid(grid, cdf, y)
    }
}

/// `‖(ŝ₁ - ŝ₂)·√r‖²` over the reference cells.
pub(crate) fn weighted_squared_distance(a: &[f64], b: &[f64], weights: &[f64]) -> f64 {
    a.iter().zip(b).zip(weights).map(|((x, y), w)| (x - y) * (x - y) * w).sum()
}

/// Sub-cells per reference cell used by [`w2_distance`]. Quantile maps are
/// steep near the ends of the support, where the midpoint rule on the
/// reference cells alone underestimates the norm by up to ~1e-3.
const W2_SUBDIVISION: usize = 8;

/// Wasserstein-2 distance between `s1` and `s2`, evaluated in CDT space as
/// `‖(ŝ₁ - ŝ₂)·√r‖_{L²}`.
pub fn w2_distance(s1: &Density1D, s2: &Density1D, r: &Density1D) -> Result<f64> {
    let reference = ReferenceLevels::subdivided(r, W2_SUBDIVISION);
    let a = cdt_forward_with(s1, &reference)?;
    let b = cdt_forward_with(s2, &reference)?;
    Ok(weighted_squared_distance(&a.values, &b.values, &reference.weights).sqrt())
}
