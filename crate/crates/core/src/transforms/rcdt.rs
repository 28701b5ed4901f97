//! Radon cumulative distribution transform: the CDT of every Radon projection
//! along the offset axis.

use crate::error::{Error, Result};
use crate::transforms::cdt::{
    check_strictly_increasing, inverse_density_samples, invert_cdf, weighted_squared_distance, ReferenceLevels,
};
use crate::transforms::radon::{radon_inverse, Projector, Sinogram};
use crate::types::{Density1D, Density2D, Grid1D, ProjectionGrid, DEFAULT_EPSILON};

/// R-CDT samples `ŝ(t_k, θ_j)`, column-major (angle-major) like [`Sinogram`].
/// The offsets `t_k` are the cell centres of the projection grid's `t` axis.
#[derive(Debug, Clone, PartialEq)]
pub struct RcdtField {
    proj: ProjectionGrid,
    values: Vec<f64>,
}

impl RcdtField {
    /// Wraps field values, checking length and per-angle monotonicity.
    pub fn new(proj: ProjectionGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != proj.field_len() {
            return Err(Error::DimensionMismatch { expected: proj.field_len(), actual: values.len() });
        }
        for col in values.chunks(proj.n_t()) {
            check_strictly_increasing(col)?;
        }
        Ok(Self { proj, values })
    }

    pub fn proj(&self) -> &ProjectionGrid {
        &self.proj
    }

    /// Flattened values, angle-major.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn column(&self, j: usize) -> &[f64] {
        let m = self.proj.n_t();
        &self.values[j * m..(j + 1) * m]
    }
}

fn check_reference(ref1d: &Density1D, proj: &ProjectionGrid) -> Result<()> {
    let (a, b) = (ref1d.grid(), proj.t_grid());
    let tol = 1e-9 * b.length();
    if a.len() != b.len() || (a.x_min() - b.x_min()).abs() > tol || (a.x_max() - b.x_max()).abs() > tol {
        return Err(Error::InvalidGrid("reference density is not on the projection offset grid".into()));
    }
    Ok(())
}

/// Reusable forward transform for one projection grid and reference.
#[derive(Debug, Clone)]
pub struct Transformer {
    proj: ProjectionGrid,
    projector: Projector,
    reference: ReferenceLevels,
    epsilon: f64,
}

impl Transformer {
    pub fn new(proj: ProjectionGrid, ref1d: &Density1D, epsilon: f64) -> Result<Self> {
        check_reference(ref1d, &proj)?;
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidConfig(format!("epsilon must be positive, got {epsilon}")));
        }
        Ok(Self { projector: Projector::new(proj.clone()), proj, reference: ReferenceLevels::new(ref1d), epsilon })
    }

    pub fn proj(&self) -> &ProjectionGrid {
        &self.proj
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Quadrature weights `r(t_k)·Δt` of the embedding norm, per offset.
    pub fn weights(&self) -> &[f64] {
        &self.reference.weights
    }

    pub fn forward(&self, s: &Density2D) -> Result<RcdtField> {
        let sg = self.projector.project(s)?.renormalized()?;
        self.forward_sinogram(&sg)
    }

    /// Normalizes a raw image with this transformer's epsilon, then transforms.
    pub fn forward_raw(&self, raw: &crate::types::RawImage) -> Result<RcdtField> {
        let s = Density2D::from_raw_with_spacing(raw, self.epsilon, self.proj.pixel_spacing())?;
        self.forward(&s)
    }

    /// Per-angle CDT of a sinogram. Sinogram entries are bin averages, so the
    /// cumulative distribution is exact at the bin edges and is inverted
    /// there.
    pub fn forward_sinogram(&self, sg: &Sinogram) -> Result<RcdtField> {
        let t = self.proj.t_grid();
        let m = t.len();
        let half = 0.5 * t.spacing();
        let edges = Grid1D::new(m + 1, t.x_min() - half, t.x_max() + half)?;
        let mut values = vec![0.0; self.proj.field_len()];
        let mut cdf = vec![0.0; m + 1];
        for j in 0..self.proj.n_angles() {
            bin_edge_cdf(sg.column(j), &mut cdf)?;
            invert_cdf(&cdf, &edges, &self.reference.levels, &mut values[j * m..(j + 1) * m])?;
        }
        Ok(RcdtField { proj: self.proj.clone(), values })
    }
}

/// Normalized cumulative sums of the bins, floored like
/// [`Density1D::from_samples`] so every bin carries mass.
fn bin_edge_cdf(bins: &[f64], cdf: &mut [f64]) -> Result<()> {
    if bins.iter().any(|v| v.is_nan()) {
        return Err(Error::InvalidDensity("NaN in sinogram".into()));
    }
    let max = bins.iter().fold(0.0f64, |a, &v| a.max(v));
    if !(max > 0.0 && max.is_finite()) {
        return Err(Error::AllZeroImage);
    }
    let floor = DEFAULT_EPSILON * max;
    cdf[0] = 0.0;
    for (k, &v) in bins.iter().enumerate() {
        cdf[k + 1] = cdf[k] + v.max(0.0) + floor;
    }
    let total = cdf[bins.len()];
    for c in cdf.iter_mut() {
        *c /= total;
    }
    cdf[bins.len()] = 1.0;
    Ok(())
}

/// R-CDT of `s`. `ref1d` must live on `proj.t_grid()`.
pub fn rcdt_forward(s: &Density2D, ref1d: &Density1D, proj: &ProjectionGrid) -> Result<RcdtField> {
    Transformer::new(proj.clone(), ref1d, DEFAULT_EPSILON)?.forward(s)
}

/// Sinogram rebuilt from a field by per-angle inverse CDT.
pub fn rcdt_inverse_sinogram(field: &RcdtField, ref1d: &Density1D) -> Result<Sinogram> {
    let proj = field.proj();
    check_reference(ref1d, proj)?;
    let at = proj.field_t_grid();
    let t_grid = *proj.t_grid();
    let mut values = Vec::with_capacity(proj.field_len());
    for j in 0..proj.n_angles() {
        let col = field.column(j);
        check_strictly_increasing(col)?;
        let samples = inverse_density_samples(col, &at, ref1d)?;
        values.extend_from_slice(Density1D::from_samples(t_grid, samples, DEFAULT_EPSILON)?.values());
    }
    Sinogram::new(proj.clone(), values)
}

/// Inverse R-CDT: per-angle inverse CDT followed by filtered back-projection.
pub fn rcdt_inverse(field: &RcdtField, ref1d: &Density1D) -> Result<Density2D> {
    radon_inverse(&rcdt_inverse_sinogram(field, ref1d)?)
}

/// Squared sliced-Wasserstein distance between two fields on the same grid,
/// with angles averaged uniformly.
pub fn sw2_squared_from_fields(a: &RcdtField, b: &RcdtField, weights: &[f64]) -> Result<f64> {
    if a.proj != b.proj {
        return Err(Error::DimensionMismatch { expected: a.values.len(), actual: b.values.len() });
    }
    let n = a.proj.n_angles();
    let total: f64 = (0..n).map(|j| weighted_squared_distance(a.column(j), b.column(j), weights)).sum();
    Ok(total / n as f64)
}

/// Sliced-Wasserstein-2 distance `‖(ŝ₁ - ŝ₂)·√r̃‖` over the `(t, θ)` grid.
pub fn sw2_distance(s1: &Density2D, s2: &Density2D, ref1d: &Density1D, proj: &ProjectionGrid) -> Result<f64> {
    let tf = Transformer::new(proj.clone(), ref1d, DEFAULT_EPSILON)?;
    let a = tf.forward(s1)?;
    let b = tf.forward(s2)?;
    Ok(sw2_squared_from_fields(&a, &b, tf.weights())?.sqrt())
}

/// `u₁(t, θ) = cos θ` and `u₂(t, θ) = sin θ`, flattened like [`RcdtField`].
pub fn translation_spanning_vectors(proj: &ProjectionGrid) -> (Vec<f64>, Vec<f64>) {
    let m = proj.n_t();
    let mut u1 = Vec::with_capacity(proj.field_len());
    let mut u2 = Vec::with_capacity(proj.field_len());
    for &theta in proj.thetas() {
        let (s, c) = theta.sin_cos();
        u1.extend(std::iter::repeat(c).take(m));
        u2.extend(std::iter::repeat(s).take(m));
    }
    (u1, u2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{default_projection_grid, make_uniform_reference1d, normalize_to_density2d, RawImage};
    use std::f64::consts::PI;

    fn blob(n: usize, x0: f64, y0: f64, sigma: f64) -> RawImage {
        let c = (n as f64 - 1.0) / 2.0;
        RawImage::from_fn(n, n, |i, j| {
            let x = j as f64 - c - x0;
            let y = i as f64 - c - y0;
            (-(x * x + y * y) / (2.0 * sigma * sigma)).exp()
        })
    }

    fn setup(n: usize, angles: usize) -> (ProjectionGrid, Density1D) {
        let proj = default_projection_grid(n, n, angles).unwrap();
        let r = make_uniform_reference1d(*proj.t_grid());
        (proj, r)
    }

    #[test]
    fn spanning_vectors_at_axis_angles() {
        let (proj, _) = setup(16, 4);
        let (u1, u2) = translation_spanning_vectors(&proj);
        let m = proj.n_t();
        assert!(u1[..m].iter().all(|&v| v == 1.0));
        assert!(u2[..m].iter().all(|&v| v == 0.0));
        assert!(u1[2 * m..3 * m].iter().all(|&v| v.abs() < 1e-15));
        assert!(u2[2 * m..3 * m].iter().all(|&v| (v - 1.0).abs() < 1e-15));
        let dot: f64 = u1.iter().zip(&u2).map(|(a, b)| a * b).sum();
        assert!(dot.abs() < 1e-9);
    }

    #[test]
    fn translation_shifts_columns_by_projection() {
        let (proj, r) = setup(40, 24);
        let (dx, dy) = (3.0, -2.0);
        let a = rcdt_forward(&normalize_to_density2d(&blob(40, 0.0, 0.0, 3.0), 1e-8).unwrap(), &r, &proj).unwrap();
        let b = rcdt_forward(&normalize_to_density2d(&blob(40, dx, dy, 3.0), 1e-8).unwrap(), &r, &proj).unwrap();
        let m = proj.n_t();
        let h = proj.t_grid().spacing();
        for (j, &theta) in proj.thetas().iter().enumerate() {
            let shift = dx * theta.cos() + dy * theta.sin();
            // Interior quantiles only: the tails live in the epsilon floor.
            for k in m / 4..3 * m / 4 {
                let d = b.column(j)[k] - a.column(j)[k] - shift;
                assert!(d.abs() < h, "angle {j} k {k}: {d}");
            }
        }
    }

    #[test]
    fn round_trip_blob() {
        let (proj, r) = setup(64, 180);
        let s = normalize_to_density2d(&blob(64, 4.0, -3.0, 6.0), 1e-8).unwrap();
        let back = rcdt_inverse(&rcdt_forward(&s, &r, &proj).unwrap(), &r).unwrap();
        let num: f64 = back.values().iter().zip(s.values()).map(|(a, b)| (a - b).powi(2)).sum();
        let den: f64 = s.values().iter().map(|b| b * b).sum();
        let e = (num / den).sqrt();
        assert!(e < 0.08, "relative error {e}");
    }

    #[test]
    fn sw2_of_horizontal_translation() {
        let (proj, r) = setup(48, 90);
        let delta = 4.0;
        let a = normalize_to_density2d(&blob(48, -delta / 2.0, 0.0, 3.0), 1e-8).unwrap();
        let b = normalize_to_density2d(&blob(48, delta / 2.0, 0.0, 3.0), 1e-8).unwrap();
        assert!(sw2_distance(&a, &a, &r, &proj).unwrap() < 1e-9);
        let d = sw2_distance(&a, &b, &r, &proj).unwrap();
        let expected = delta / 2f64.sqrt();
        assert!((d - expected).abs() < 0.02 * expected, "{d} vs {expected}");
    }

    #[test]
    fn field_rejects_non_monotone_column() {
        let (proj, _) = setup(4, 2);
        let mut v: Vec<f64> = (0..proj.field_len()).map(|i| i as f64).collect();
        v[1] = -1.0;
        assert!(matches!(RcdtField::new(proj, v), Err(Error::NonMonotoneInput { .. })));
    }

    #[test]
    fn reference_must_match_offset_grid() {
        let (proj, _) = setup(10, 4);
        let wrong = make_uniform_reference1d(crate::types::Grid1D::new(11, -1.0, 1.0).unwrap());
        let s = normalize_to_density2d(&blob(10, 0.0, 0.0, 2.0), 1e-8).unwrap();
        assert!(matches!(rcdt_forward(&s, &wrong, &proj), Err(Error::InvalidGrid(_))));
    }

    #[test]
    fn angle_average_of_cos_squared_is_half() {
        let (proj, _) = setup(8, 180);
        let mean: f64 = proj.thetas().iter().map(|t| t.cos().powi(2)).sum::<f64>() / 180.0;
        assert!((mean - 0.5).abs() < 1e-12);
        assert!((proj.thetas()[90] - PI / 2.0).abs() < 1e-12);
    }
}
