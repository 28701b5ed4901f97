//! Accuracy-versus-training-size sweeps, the out-of-distribution experiment
//! and analytic operation counts.

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::data::{check_disjoint, confound_image, sample_splits, ConfoundSpec, Split, SplitPlan};
use crate::error::{Error, Result};
use crate::subspace::{fit_from_fields, transform_images, ClassBasis, FitConfig};
use crate::transforms::Transformer;
use crate::types::{LabeledImageSet, RawImage};

/// Operations charged per pixel and angle by the projector: the offset of the
/// pixel centre, its bin range and about four table look-ups and updates.
pub const RADON_FLOPS_PER_PIXEL_ANGLE: u64 = 50;
/// Operations per offset sample of one CDT column: positivity floor and
/// normalization, cumulative trapezoid sums and monotone inversion.
pub const CDT_FLOPS_PER_SAMPLE: u64 = 12;

/// Settings shared by the sweep and OOD drivers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunConfig {
    pub fit: FitConfig,
    /// Record wall-clock times. Off by default so outputs are reproducible
    /// byte for byte.
    pub timing: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self { fit: FitConfig::default(), timing: false }
    }
}

/// Problem sizes entering the operation count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlopDims {
    pub height: usize,
    pub width: usize,
    pub n_t: usize,
    pub n_angles: usize,
    pub num_classes: usize,
    pub enrich: bool,
}

impl FlopDims {
    pub fn from_transformer(tf: &Transformer, num_classes: usize, enrich: bool) -> Self {
        let p = tf.proj();
        Self {
            height: p.image_height(),
            width: p.image_width(),
            n_t: p.n_t(),
            n_angles: p.n_angles(),
            num_classes,
            enrich,
        }
    }

    /// Field dimension `m·n`.
    pub fn dim(&self) -> u64 {
        (self.n_t * self.n_angles) as u64
    }
}

/// Breakdown of the analytic operation count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct FlopCount {
    /// Radon projection plus per-angle CDT of one image.
    pub transform_per_image: u64,
    /// All class decompositions (spanning projection and SVD).
    pub decomposition: u64,
    /// Subspace projections for one test image, all classes.
    pub projection_per_image: u64,
    pub train_flops: u64,
    pub test_flops_per_image: u64,
}

/// Dense SVD cost model for a `d × n` matrix: Golub-Kahan on the thin side
/// (`4dn² + 8n³`) when `n ≤ d`, otherwise a Gram product and symmetric
/// eigendecomposition (`2d²n + 9d³`).
pub fn svd_flops(d: u64, n: u64) -> u64 {
    if n <= d {
        4 * d * n * n + 8 * n * n * n
    } else {
        2 * d * d * n + 9 * d * d * d
    }
}

/// Closed-form operation counts for training with `n_train_per_class`
/// samples per class and testing one image against subspaces of the given
/// ranks:
///
/// * transform: `n·(H·W·c_R + m·c_C)`
/// * training: `K·N·transform + Σ_k [svd(D, N) + 4·D·N (if enriched)]`
/// * testing: `transform + Σ_k (2·D·d_k + 2·D)`
pub fn count_flops(dims: &FlopDims, n_train_per_class: usize, ranks: &[usize]) -> FlopCount {
    let pixels = (dims.height * dims.width) as u64;
    let n = dims.n_angles as u64;
    let d = dims.dim();
    let k = dims.num_classes as u64;
    let samples = n_train_per_class as u64;
    let transform = n * (pixels * RADON_FLOPS_PER_PIXEL_ANGLE + dims.n_t as u64 * CDT_FLOPS_PER_SAMPLE);
    let per_class = svd_flops(d, samples) + if dims.enrich { 4 * d * samples + 6 * d } else { 0 };
    let decomposition = k * per_class;
    let projection: u64 = ranks.iter().map(|&r| 2 * d * r as u64 + 2 * d).sum();
    FlopCount {
        transform_per_image: transform,
        decomposition,
        projection_per_image: projection,
        train_flops: k * samples * transform + decomposition,
        test_flops_per_image: transform + projection,
    }
}

/// One `(size, repeat)` result of an accuracy sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub train_size: usize,
    pub repeat: usize,
    pub accuracy: f64,
    pub train_flops: u64,
    pub test_flops_per_image: u64,
    pub wall_time_s: f64,
}

/// One `(size, repeat)` result of the out-of-distribution experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OodRow {
    pub train_size: usize,
    pub repeat: usize,
    pub in_accuracy: f64,
    pub out_accuracy: f64,
    pub train_flops: u64,
    pub test_flops_per_image: u64,
    pub wall_time_s: f64,
}

/// Mean and sample standard deviation of one accuracy column per size.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub train_size: usize,
    pub repeats: usize,
    pub column: &'static str,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct OodResult {
    pub rows: Vec<OodRow>,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

fn summarize<'a, R: 'a>(
    rows: &'a [R],
    size: impl Fn(&R) -> usize,
    columns: &[(&'static str, &dyn Fn(&R) -> f64)],
) -> Vec<SummaryRow> {
    let mut sizes: Vec<usize> = rows.iter().map(&size).collect();
    sizes.dedup();
    let mut out = Vec::new();
    for s in sizes {
        let group: Vec<&R> = rows.iter().filter(|r| size(r) == s).collect();
        for (name, get) in columns {
            let values: Vec<f64> = group.iter().map(|r| get(r)).collect();
            let (mean, std) = mean_std(&values);
            out.push(SummaryRow { train_size: s, repeats: values.len(), column: name, mean, std });
        }
    }
    out
}

fn write_rows<T: Serialize>(rows: &[T], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    }
    w.flush()?;
    Ok(())
}

impl SweepResult {
    pub fn summary(&self) -> Vec<SummaryRow> {
        summarize(&self.rows, |r| r.train_size, &[("accuracy", &|r: &SweepRow| r.accuracy)])
    }

    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        write_rows(&self.rows, out)
    }
}

impl OodResult {
    pub fn summary(&self) -> Vec<SummaryRow> {
        summarize(
            &self.rows,
            |r| r.train_size,
            &[("in_accuracy", &|r: &OodRow| r.in_accuracy), ("out_accuracy", &|r: &OodRow| r.out_accuracy)],
        )
    }

    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        write_rows(&self.rows, out)
    }
}

pub fn write_summary_csv(rows: &[SummaryRow], out: impl Write) -> Result<()> {
    write_rows(rows, out)
}

/// Transforms the images at `indices` (sorted, distinct) of `images`,
/// optionally mapping each raw image first. Returns a slot per image.
fn transform_subset(
    tf: &Transformer,
    images: &[RawImage],
    indices: &[usize],
    prepare: &(dyn Fn(usize, &RawImage) -> Result<RawImage> + Sync),
) -> Result<Vec<Option<Vec<f64>>>> {
    let fields: Vec<(usize, Vec<f64>)> = indices
        .par_iter()
        .map(|&i| {
            let img = prepare(i, &images[i])?;
            Ok((i, tf.forward_raw(&img)?.into_values()))
        })
        .collect::<Result<_>>()?;
    let mut slots = vec![None; images.len()];
    for (i, f) in fields {
        slots[i] = Some(f);
    }
    Ok(slots)
}

fn union_indices(splits: &[Split]) -> Vec<usize> {
    let mut all: Vec<usize> = splits.iter().flat_map(|s| s.indices()).collect();
    all.sort_unstable();
    all.dedup();
    all
}

struct Trained {
    classes: Vec<ClassBasis>,
    flops: FlopCount,
    seconds: f64,
}

fn train_split(
    split: &Split,
    slots: &[Option<Vec<f64>>],
    tf: &Transformer,
    config: &RunConfig,
) -> Result<Trained> {
    let start = Instant::now();
    let by_class: Vec<Vec<&[f64]>> = split
        .by_class
        .iter()
        .map(|idx| idx.iter().map(|&i| slots[i].as_deref().expect("field computed")).collect())
        .collect();
    let classes = fit_from_fields(tf.proj(), &by_class, &config.fit)?;
    let ranks: Vec<usize> = classes.iter().map(|c| c.rank()).collect();
    let dims = FlopDims::from_transformer(tf, classes.len(), config.fit.enrich_translation);
    let flops = count_flops(&dims, split.size, &ranks);
    Ok(Trained { classes, flops, seconds: start.elapsed().as_secs_f64() })
}

fn accuracy(classes: &[ClassBasis], tf: &Transformer, fields: &[Vec<f64>], labels: &[usize]) -> Result<f64> {
    let model = crate::subspace::Model::new(classes.to_vec(), tf.proj().clone(), tf.epsilon(), 1.0, false)?;
    let refs: Vec<&[f64]> = fields.iter().map(|f| f.as_slice()).collect();
    let predicted = model.classify_fields(&refs)?;
    let correct = predicted.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(correct as f64 / labels.len() as f64)
}

fn check_sets(train: &LabeledImageSet, test: &LabeledImageSet) -> Result<(usize, usize)> {
    if test.is_empty() {
        return Err(Error::EmptyTestSet);
    }
    let shape = train.image_shape().ok_or(Error::MissingClass { class_id: 0 })?;
    let test_shape = test.image_shape().unwrap();
    if shape != test_shape {
        return Err(Error::DimensionMismatch { expected: shape.0 * shape.1, actual: test_shape.0 * test_shape.1 });
    }
    if let Some(&l) = test.labels().iter().find(|&&l| l >= train.num_classes()) {
        return Err(Error::MissingClass { class_id: l });
    }
    Ok(shape)
}

/// Trains on every split of `plan` drawn from `train` and scores on `test`.
pub fn run_sweep(
    train: &LabeledImageSet,
    test: &LabeledImageSet,
    plan: &SplitPlan,
    config: &RunConfig,
) -> Result<SweepResult> {
    let (h, w) = check_sets(train, test)?;
    let splits = sample_splits(train, plan)?;
    let tf = config.fit.transformer(h, w)?;
    let needed = union_indices(&splits);
    log::info!("transforming {} training and {} test images", needed.len(), test.len());
    let slots = transform_subset(&tf, train.images(), &needed, &|_, img| Ok(img.clone()))?;
    let test_fields: Vec<Vec<f64>> =
        transform_images(&tf, test.images())?.into_iter().map(|f| f.into_values()).collect();

    let rows = splits
        .par_iter()
        .map(|split| {
            let start = Instant::now();
            let trained = train_split(split, &slots, &tf, config)?;
            let acc = accuracy(&trained.classes, &tf, &test_fields, test.labels())?;
            log::info!("size {} repeat {}: accuracy {:.4}", split.size, split.repeat, acc);
            Ok(SweepRow {
                train_size: split.size,
                repeat: split.repeat,
                accuracy: acc,
                train_flops: trained.flops.train_flops,
                test_flops_per_image: trained.flops.test_flops_per_image,
                wall_time_s: if config.timing { start.elapsed().as_secs_f64().max(trained.seconds) } else { 0.0 },
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult { rows })
}

/// In- and out-of-distribution confound ranges and the output canvas.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OodConfig {
    pub in_spec: ConfoundSpec,
    pub out_spec: ConfoundSpec,
    pub canvas: (usize, usize),
    /// Score only the first `max_test` test images.
    pub max_test: Option<usize>,
}

impl OodConfig {
    /// Affine-MNIST ranges: in-distribution translations up to 7 px with
    /// scales in [0.9, 1.2); out-of-distribution translations in [7, 12) px
    /// with scales in [1.5, 2.0); 84×84 canvas.
    pub fn affine_mnist(seed: u64) -> Self {
        Self {
            in_spec: ConfoundSpec { translation_range: (0.0, 7.0), scale_range: (0.9, 1.2), rng_seed: seed },
            out_spec: ConfoundSpec {
                translation_range: (7.0, 12.0),
                scale_range: (1.5, 2.0),
                rng_seed: seed.wrapping_add(2),
            },
            canvas: (84, 84),
            max_test: None,
        }
    }
}

/// Trains on in-distribution confounded copies of `train` and scores on
/// in- and out-of-distribution confounded copies of `test`.
pub fn run_ood(
    train: &LabeledImageSet,
    test: &LabeledImageSet,
    ood: &OodConfig,
    plan: &SplitPlan,
    config: &RunConfig,
) -> Result<OodResult> {
    check_disjoint(&ood.in_spec, &ood.out_spec)?;
    check_sets(train, test)?;
    let n_test = ood.max_test.map_or(test.len(), |m| m.min(test.len()));
    if n_test == 0 {
        return Err(Error::EmptyTestSet);
    }
    let splits = sample_splits(train, plan)?;
    let tf = config.fit.transformer(ood.canvas.0, ood.canvas.1)?;
    let needed = union_indices(&splits);
    log::info!("confounding and transforming {} training and 2x{} test images", needed.len(), n_test);
    let in_spec = ood.in_spec;
    let slots = transform_subset(&tf, train.images(), &needed, &|i, img| confound_image(img, i, &in_spec, ood.canvas))?;

    let test_idx: Vec<usize> = (0..n_test).collect();
    // The in-distribution test draws use a stream family distinct from training.
    let in_test_spec = in_spec.with_seed(in_spec.rng_seed.wrapping_add(1));
    let out_spec = ood.out_spec;
    let collect = |slots: Vec<Option<Vec<f64>>>| -> Vec<Vec<f64>> { slots.into_iter().take(n_test).map(Option::unwrap).collect() };
    let in_fields = collect(transform_subset(&tf, test.images(), &test_idx, &|i, img| {
        confound_image(img, i, &in_test_spec, ood.canvas)
    })?);
    let out_fields = collect(transform_subset(&tf, test.images(), &test_idx, &|i, img| {
        confound_image(img, i, &out_spec, ood.canvas)
    })?);
    let labels = &test.labels()[..n_test];

    let rows = splits
        .par_iter()
        .map(|split| {
            let start = Instant::now();
            let trained = train_split(split, &slots, &tf, config)?;
            let in_acc = accuracy(&trained.classes, &tf, &in_fields, labels)?;
            let out_acc = accuracy(&trained.classes, &tf, &out_fields, labels)?;
            log::info!("size {} repeat {}: in {:.4} out {:.4}", split.size, split.repeat, in_acc, out_acc);
            Ok(OodRow {
                train_size: split.size,
                repeat: split.repeat,
                in_accuracy: in_acc,
                out_accuracy: out_acc,
                train_flops: trained.flops.train_flops,
                test_flops_per_image: trained.flops.test_flops_per_image,
                wall_time_s: if config.timing { start.elapsed().as_secs_f64() } else { 0.0 },
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(OodResult { rows })
}
