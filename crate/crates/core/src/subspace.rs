//! Nearest-subspace classifier in R-CDT space.
//!
//! Each class is modelled by the span of its transformed training samples,
//! optionally enriched with the translation directions `{cos θ, sin θ}`. The
//! spanning directions are orthonormalized first and always kept; the sample
//! residuals are truncated by an SVD variance cutoff.

use faer::{Mat, MatRef, Side};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::transforms::{translation_spanning_vectors, RcdtField, Transformer};
use crate::types::{
    default_projection_grid, make_uniform_reference1d, LabeledImageSet, ProjectionGrid, RawImage,
    DEFAULT_ANGLES, DEFAULT_EPSILON,
};

/// Default fraction of residual energy retained per class.
pub const DEFAULT_VARIANCE_FRACTION: f64 = 0.99;

/// Singular values below this fraction of the largest are treated as zero.
const SVD_RANK_TOL: f64 = 1e-10;
/// Looser tolerance when singular values come from a Gram eigendecomposition.
const GRAM_RANK_TOL: f64 = 1e-6;
/// Columns with norm below this are numerically zero.
const ZERO_TOL: f64 = 1e-12;

/// Orthonormal basis of one class subspace, stored column-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassBasis {
    class_id: usize,
    dim: usize,
    basis: Vec<f64>,
    singular_values: Vec<f64>,
}

impl ClassBasis {
    /// Validates shapes; orthonormality is the caller's responsibility.
    pub fn from_parts(class_id: usize, dim: usize, basis: Vec<f64>, singular_values: Vec<f64>) -> Result<Self> {
        if dim == 0 || basis.is_empty() || basis.len() % dim != 0 {
            return Err(Error::DimensionMismatch { expected: dim, actual: basis.len() });
        }
        Ok(Self { class_id, dim, basis, singular_values })
    }

    pub fn class_id(&self) -> usize {
        self.class_id
    }

    pub fn with_class_id(mut self, class_id: usize) -> Self {
        self.class_id = class_id;
        self
    }

    /// Ambient dimension `m·n`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Retained rank.
    pub fn rank(&self) -> usize {
        self.basis.len() / self.dim
    }

    /// Basis entries, column-major (`dim × rank`).
    pub fn basis(&self) -> &[f64] {
        &self.basis
    }

    pub fn column(&self, k: usize) -> &[f64] {
        &self.basis[k * self.dim..(k + 1) * self.dim]
    }

    /// Singular values of the sample residuals before truncation.
    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    fn as_mat(&self) -> MatRef<'_, f64> {
        faer::mat::from_column_major_slice(&self.basis, self.dim, self.rank())
    }
}

/// Fits a class subspace to transformed samples. The returned basis has
/// class id 0; see [`ClassBasis::with_class_id`].
pub fn fit_class_subspace(
    samples: &[RcdtField],
    enrich_translation: bool,
    variance_fraction: f64,
) -> Result<ClassBasis> {
    let first = samples.first().ok_or(Error::MissingClass { class_id: 0 })?;
    let proj = first.proj();
    if let Some(other) = samples.iter().find(|f| f.proj() != proj) {
        return Err(Error::DimensionMismatch { expected: proj.field_len(), actual: other.values().len() });
    }
    let cols: Vec<&[f64]> = samples.iter().map(|f| f.values()).collect();
    let spanning = enrich_translation.then(|| translation_spanning_vectors(proj));
    fit_columns(0, &cols, spanning.as_ref().map(|(a, b)| [a.as_slice(), b.as_slice()]), variance_fraction)
}

/// Core fit on flattened columns of equal length.
pub fn fit_columns(
    class_id: usize,
    samples: &[&[f64]],
    spanning: Option<[&[f64]; 2]>,
    variance_fraction: f64,
) -> Result<ClassBasis> {
    if !(variance_fraction > 0.0 && variance_fraction <= 1.0) {
        return Err(Error::InvalidConfig(format!("variance fraction {variance_fraction} not in (0, 1]")));
    }
    let dim = samples.first().ok_or(Error::MissingClass { class_id })?.len();
    for s in samples {
        if s.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, actual: s.len() });
        }
    }

    // Orthonormal spanning directions by Gram-Schmidt (applied twice).
    let mut q: Vec<Vec<f64>> = Vec::new();
    for u in spanning.into_iter().flatten() {
        if u.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, actual: u.len() });
        }
        let mut v = u.to_vec();
        for _ in 0..2 {
            for b in &q {
                let c = dot(b, &v);
                axpy(-c, b, &mut v);
            }
        }
        let norm = dot(&v, &v).sqrt();
        if norm > ZERO_TOL * dot(u, u).sqrt().max(1.0) {
            v.iter_mut().for_each(|x| *x /= norm);
            q.push(v);
        }
    }

    // Sample residuals orthogonal to the spanning directions.
    let n = samples.len();
    let mut x = Mat::<f64>::from_fn(dim, n, |i, j| samples[j][i]);
    if !q.is_empty() {
        let qm = Mat::<f64>::from_fn(dim, q.len(), |i, j| q[j][i]);
        let coeff = qm.transpose() * &x;
        x -= &qm * &coeff;
    }

    let scale = samples.iter().map(|s| dot(s, s)).fold(0.0f64, f64::max).sqrt();
    let residual_max = (0..n).map(|j| x.col(j).norm_l2()).fold(0.0f64, f64::max);
    let has_residual = residual_max > ZERO_TOL * scale.max(f64::MIN_POSITIVE) && residual_max > 0.0;
    if q.is_empty() && !has_residual {
        return Err(Error::DegenerateClass { class_id });
    }

    let (vectors, singular_values) = if has_residual { principal_directions(&x) } else { (Mat::zeros(dim, 0), Vec::new()) };
    let total: f64 = singular_values.iter().map(|s| s * s).sum();
    let rank = vectors.ncols();
    let mut keep = 0;
    let mut acc = 0.0;
    while keep < rank && acc < variance_fraction * total * (1.0 - 1e-12) {
        acc += singular_values[keep] * singular_values[keep];
        keep += 1;
    }

    let mut basis = Vec::with_capacity(dim * (q.len() + keep));
    for v in &q {
        basis.extend_from_slice(v);
    }
    for k in 0..keep {
        basis.extend((0..dim).map(|i| vectors.read(i, k)));
    }
    Ok(ClassBasis { class_id, dim, basis, singular_values })
}

/// Left singular vectors with nonzero singular value (descending) and all
/// singular values of `x`.
fn principal_directions(x: &Mat<f64>) -> (Mat<f64>, Vec<f64>) {
    let (dim, n) = (x.nrows(), x.ncols());
    let (u, sigma, tol) = if n <= dim {
        let svd = x.thin_svd();
        let s: Vec<f64> = (0..n).map(|k| svd.s_diagonal().read(k)).collect();
        (svd.u().to_owned(), s, SVD_RANK_TOL)
    } else {
        // Many more samples than dimensions: eigendecomposition of X Xᵀ.
        let gram = x * x.transpose();
        let eig = gram.selfadjoint_eigendecomposition(Side::Lower);
        let s: Vec<f64> = (0..dim).map(|k| eig.s().column_vector().read(k).max(0.0).sqrt()).collect();
        (eig.u().to_owned(), s, GRAM_RANK_TOL)
    };
    let mut order: Vec<usize> = (0..sigma.len()).collect();
    order.sort_by(|&a, &b| sigma[b].total_cmp(&sigma[a]).then(a.cmp(&b)));
    let sorted: Vec<f64> = order.iter().map(|&k| sigma[k]).collect();
    let top = sorted.first().copied().unwrap_or(0.0);
    let rank = sorted.iter().take_while(|&&s| s > tol * top).count();
    let vectors = Mat::<f64>::from_fn(dim, rank, |i, j| u.read(i, order[j]));
    (vectors, sorted)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Squared distance `‖ŝ - BBᵀŝ‖²` from a flattened field to a class subspace.
pub fn subspace_distance(shat: &[f64], basis: &ClassBasis) -> Result<f64> {
    if shat.len() != basis.dim {
        return Err(Error::DimensionMismatch { expected: basis.dim, actual: shat.len() });
    }
    let norm2 = dot(shat, shat);
    let proj2: f64 = (0..basis.rank()).map(|k| dot(basis.column(k), shat).powi(2)).sum();
    Ok((norm2 - proj2).max(0.0))
}

/// Classification result.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub label: usize,
    pub distances: Vec<f64>,
}

impl Prediction {
    /// Argmin with ties resolved towards the lowest class index.
    pub fn from_distances(distances: Vec<f64>) -> Self {
        let mut label = 0;
        for (k, &d) in distances.iter().enumerate() {
            if d < distances[label] {
                label = k;
            }
        }
        Self { label, distances }
    }
}

/// Training parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitConfig {
    pub n_angles: usize,
    pub epsilon: f64,
    pub variance_fraction: f64,
    pub enrich_translation: bool,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            n_angles: DEFAULT_ANGLES,
            epsilon: DEFAULT_EPSILON,
            variance_fraction: DEFAULT_VARIANCE_FRACTION,
            enrich_translation: true,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_angles == 0 {
            return Err(Error::InvalidConfig("need at least one angle".into()));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidConfig(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if !(self.variance_fraction > 0.0 && self.variance_fraction <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "variance fraction {} not in (0, 1]",
                self.variance_fraction
            )));
        }
        Ok(())
    }

    /// Transformer for images of the given shape under this configuration.
    pub fn transformer(&self, height: usize, width: usize) -> Result<Transformer> {
        self.validate()?;
        let proj = default_projection_grid(height, width, self.n_angles)?;
        let reference = make_uniform_reference1d(*proj.t_grid());
        Transformer::new(proj, &reference, self.epsilon)
    }
}

/// Trained classifier: one subspace per class plus the transform settings.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    classes: Vec<ClassBasis>,
    proj: ProjectionGrid,
    epsilon: f64,
    variance_fraction: f64,
    enrich_translation: bool,
}

impl Model {
    /// Assembles a model, checking that class ids are `0..K` in order and all
    /// bases live in the field space of `proj`.
    pub fn new(
        classes: Vec<ClassBasis>,
        proj: ProjectionGrid,
        epsilon: f64,
        variance_fraction: f64,
        enrich_translation: bool,
    ) -> Result<Self> {
        if classes.is_empty() {
            return Err(Error::MissingClass { class_id: 0 });
        }
        for (k, c) in classes.iter().enumerate() {
            if c.class_id != k {
                return Err(Error::MissingClass { class_id: k });
            }
            if c.dim != proj.field_len() {
                return Err(Error::DimensionMismatch { expected: proj.field_len(), actual: c.dim });
            }
        }
        Ok(Self { classes, proj, epsilon, variance_fraction, enrich_translation })
    }

    pub fn classes(&self) -> &[ClassBasis] {
        &self.classes
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn proj(&self) -> &ProjectionGrid {
        &self.proj
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn variance_fraction(&self) -> f64 {
        self.variance_fraction
    }

    pub fn enrich_translation(&self) -> bool {
        self.enrich_translation
    }

    pub fn image_shape(&self) -> (usize, usize) {
        (self.proj.image_height(), self.proj.image_width())
    }

    pub fn transformer(&self) -> Result<Transformer> {
        let reference = make_uniform_reference1d(*self.proj.t_grid());
        Transformer::new(self.proj.clone(), &reference, self.epsilon)
    }

    /// Squared distances of one flattened field to every class.
    pub fn distances(&self, shat: &[f64]) -> Result<Vec<f64>> {
        self.classes.iter().map(|c| subspace_distance(shat, c)).collect()
    }

    pub fn classify_field(&self, shat: &[f64]) -> Result<Prediction> {
        Ok(Prediction::from_distances(self.distances(shat)?))
    }

    /// Labels for a batch of flattened fields, using blocked matrix products.
    pub fn classify_fields(&self, fields: &[&[f64]]) -> Result<Vec<usize>> {
        let dim = self.proj.field_len();
        if let Some(f) = fields.iter().find(|f| f.len() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, actual: f.len() });
        }
        const BLOCK: usize = 512;
        let mut labels = Vec::with_capacity(fields.len());
        for chunk in fields.chunks(BLOCK) {
            let s = Mat::<f64>::from_fn(dim, chunk.len(), |i, j| chunk[j][i]);
            let norms: Vec<f64> = chunk.iter().map(|f| dot(f, f)).collect();
            let mut best = vec![(f64::INFINITY, 0usize); chunk.len()];
            for (k, c) in self.classes.iter().enumerate() {
                let coeff = c.as_mat().transpose() * &s;
                for (j, b) in best.iter_mut().enumerate() {
                    let p2 = coeff.col(j).squared_norm_l2();
                    let d = (norms[j] - p2).max(0.0);
                    if d < b.0 {
                        *b = (d, k);
                    }
                }
            }
            labels.extend(best.into_iter().map(|(_, k)| k));
        }
        Ok(labels)
    }
}

/// Transforms every image (in parallel, order preserved).
pub fn transform_images(tf: &Transformer, images: &[RawImage]) -> Result<Vec<RcdtField>> {
    images.par_iter().map(|img| tf.forward_raw(img)).collect()
}

/// Fits one subspace per class from pre-computed fields grouped by class.
pub fn fit_from_fields(
    proj: &ProjectionGrid,
    by_class: &[Vec<&[f64]>],
    config: &FitConfig,
) -> Result<Vec<ClassBasis>> {
    for (k, cols) in by_class.iter().enumerate() {
        if cols.is_empty() {
            return Err(Error::MissingClass { class_id: k });
        }
    }
    let spanning = config.enrich_translation.then(|| translation_spanning_vectors(proj));
    let spanning = spanning.as_ref().map(|(a, b)| [a.as_slice(), b.as_slice()]);
    by_class
        .par_iter()
        .enumerate()
        .map(|(k, cols)| fit_columns(k, cols, spanning, config.variance_fraction))
        .collect()
}

/// Normalizes and transforms the training images, then fits every class.
pub fn fit(train: &LabeledImageSet, config: &FitConfig) -> Result<Model> {
    config.validate()?;
    let (h, w) = train.image_shape().ok_or(Error::MissingClass { class_id: 0 })?;
    let groups = train.class_indices();
    if let Some(k) = groups.iter().position(|g| g.is_empty()) {
        return Err(Error::MissingClass { class_id: k });
    }
    let tf = config.transformer(h, w)?;
    let fields = transform_images(&tf, train.images())?;
    let by_class: Vec<Vec<&[f64]>> =
        groups.iter().map(|g| g.iter().map(|&i| fields[i].values()).collect()).collect();
    let classes = fit_from_fields(tf.proj(), &by_class, config)?;
    for c in &classes {
        log::info!("class {}: retained rank {}", c.class_id(), c.rank());
    }
    Model::new(classes, tf.proj().clone(), config.epsilon, config.variance_fraction, config.enrich_translation)
}

/// Classifies one raw image.
pub fn predict(image: &RawImage, model: &Model) -> Result<Prediction> {
    let (h, w) = model.image_shape();
    if image.height() != h || image.width() != w {
        return Err(Error::DimensionMismatch { expected: h * w, actual: image.height() * image.width() });
    }
    let field = model.transformer()?.forward_raw(image)?;
    model.classify_field(field.values())
}

/// Classifies many raw images (transforms in parallel).
pub fn predict_batch(images: &[RawImage], model: &Model) -> Result<Vec<usize>> {
    let (h, w) = model.image_shape();
    if let Some(img) = images.iter().find(|i| i.height() != h || i.width() != w) {
        return Err(Error::DimensionMismatch { expected: h * w, actual: img.height() * img.width() });
    }
    let fields = transform_images(&model.transformer()?, images)?;
    let refs: Vec<&[f64]> = fields.iter().map(|f| f.values()).collect();
    model.classify_fields(&refs)
}
