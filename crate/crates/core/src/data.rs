//! Affine confounds, synthetic generative-model datasets and train splits.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::types::{LabeledImageSet, RawImage};

/// Largest fraction of image mass allowed to leave the canvas.
pub const MAX_CLIPPED_FRACTION: f64 = 1e-3;

/// Places `image` scaled by `scale` about its centre and shifted by
/// `translation = (dx, dy)` pixels on an `canvas = (height, width)` canvas.
///
/// The output is `out(x) = in((x - d) / α) / α²` in centred coordinates, with
/// bilinear interpolation, rescaled to the input's total intensity.
pub fn apply_confound(
    image: &RawImage,
    translation: (f64, f64),
    scale: f64,
    canvas: (usize, usize),
) -> Result<RawImage> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::InvalidConfig(format!("scale must be positive, got {scale}")));
    }
    let (ch, cw) = canvas;
    if ch == 0 || cw == 0 {
        return Err(Error::InvalidConfig("empty canvas".into()));
    }
    let (h, w) = (image.height(), image.width());
    let (dx, dy) = translation;
    let icx = (w as f64 - 1.0) / 2.0;
    let icy = (h as f64 - 1.0) / 2.0;
    let ocx = (cw as f64 - 1.0) / 2.0;
    let ocy = (ch as f64 - 1.0) / 2.0;

    let total: f64 = image.data().iter().map(|v| v.max(0.0)).sum();
    let mut lost = 0.0;
    for i in 0..h {
        for j in 0..w {
            let v = image.get(i, j).max(0.0);
            if v == 0.0 {
                continue;
            }
            let x = (j as f64 - icx) * scale + dx + ocx;
            let y = (i as f64 - icy) * scale + dy + ocy;
            if x < -0.5 || y < -0.5 || x > cw as f64 - 0.5 || y > ch as f64 - 0.5 {
                lost += v;
            }
        }
    }
    if total > 0.0 && lost / total > MAX_CLIPPED_FRACTION {
        return Err(Error::SupportClipped { lost_fraction: lost / total });
    }

    let sample = |x: f64, y: f64| -> f64 {
        let (fx, fy) = (x.floor(), y.floor());
        let (wx, wy) = (x - fx, y - fy);
        let (j0, i0) = (fx as isize, fy as isize);
        let px = |i: isize, j: isize| {
            if i < 0 || j < 0 || i >= h as isize || j >= w as isize {
                0.0
            } else {
                image.get(i as usize, j as usize).max(0.0)
            }
        };
        (px(i0, j0) * (1.0 - wx) + px(i0, j0 + 1) * wx) * (1.0 - wy)
            + (px(i0 + 1, j0) * (1.0 - wx) + px(i0 + 1, j0 + 1) * wx) * wy
    };
    let inv = 1.0 / scale;
    let mut out = RawImage::from_fn(ch, cw, |i, j| {
        let x = (j as f64 - ocx - dx) * inv + icx;
        let y = (i as f64 - ocy - dy) * inv + icy;
        sample(x, y) * inv * inv
    });
    let mass = out.sum();
    if mass > 0.0 {
        let k = total / mass;
        out.data_mut().iter_mut().for_each(|v| *v *= k);
    }
    Ok(out)
}

/// Ranges of the translation magnitude (pixels) and isotropic scale drawn by
/// the generators. Draws are uniform on `[min, max)`; a zero-width range
/// always yields its endpoint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfoundSpec {
    pub translation_range: (f64, f64),
    pub scale_range: (f64, f64),
    pub rng_seed: u64,
}

impl ConfoundSpec {
    pub fn new(translation_range: (f64, f64), scale_range: (f64, f64), rng_seed: u64) -> Result<Self> {
        let spec = Self { translation_range, scale_range, rng_seed };
        spec.validate()?;
        Ok(spec)
    }

    /// No deformation at all.
    pub fn identity(rng_seed: u64) -> Self {
        Self { translation_range: (0.0, 0.0), scale_range: (1.0, 1.0), rng_seed }
    }

    pub fn validate(&self) -> Result<()> {
        let (t0, t1) = self.translation_range;
        let (a0, a1) = self.scale_range;
        if !(t0 >= 0.0 && t1 >= t0 && t1.is_finite()) {
            return Err(Error::InvalidConfig(format!("bad translation range [{t0}, {t1}]")));
        }
        if !(a0 > 0.0 && a1 >= a0 && a1.is_finite()) {
            return Err(Error::InvalidConfig(format!("bad scale range [{a0}, {a1}]")));
        }
        Ok(())
    }

    pub fn with_seed(self, rng_seed: u64) -> Self {
        Self { rng_seed, ..self }
    }

    /// True when some (translation, scale) pair is admissible under both
    /// specs.
    pub fn overlaps(&self, other: &ConfoundSpec) -> bool {
        intervals_overlap(self.translation_range, other.translation_range)
            && intervals_overlap(self.scale_range, other.scale_range)
    }

    /// Draws `((dx, dy), scale)`: direction uniform on the circle, magnitude
    /// and scale uniform in their ranges.
    pub fn draw(&self, rng: &mut impl Rng) -> ((f64, f64), f64) {
        let phi = rng.gen_range(0.0..std::f64::consts::TAU);
        let r = draw_range(rng, self.translation_range);
        let alpha = draw_range(rng, self.scale_range);
        ((r * phi.cos(), r * phi.sin()), alpha)
    }
}

fn draw_range(rng: &mut impl Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.gen_range(lo..hi)
    } else {
        lo
    }
}

/// Overlap of half-open ranges `[a0, a1)` and `[b0, b1)`, where a zero-width
/// range stands for its single point.
fn intervals_overlap((a0, a1): (f64, f64), (b0, b1): (f64, f64)) -> bool {
    let contains = |lo: f64, hi: f64, x: f64| if hi > lo { lo <= x && x < hi } else { x == lo };
    match (a1 > a0, b1 > b0) {
        (true, true) => a0 < b1 && b0 < a1,
        (false, _) => contains(b0, b1, a0),
        (true, false) => contains(a0, a1, b0),
    }
}

/// Errors with `OverlappingSpecs` unless the two parameter sets are disjoint.
pub fn check_disjoint(a: &ConfoundSpec, b: &ConfoundSpec) -> Result<()> {
    a.validate()?;
    b.validate()?;
    if a.overlaps(b) {
        return Err(Error::OverlappingSpecs);
    }
    Ok(())
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// `n_per_class` confounded copies of each template; template `k` is class
/// `k` and draws from its own random stream.
pub fn generate_synthetic_dataset(
    templates: &[RawImage],
    spec: &ConfoundSpec,
    n_per_class: usize,
    canvas: (usize, usize),
) -> Result<LabeledImageSet> {
    spec.validate()?;
    let mut images = Vec::with_capacity(templates.len() * n_per_class);
    let mut labels = Vec::with_capacity(templates.len() * n_per_class);
    for (k, t) in templates.iter().enumerate() {
        let mut rng = stream_rng(spec.rng_seed, k as u64);
        for _ in 0..n_per_class {
            let (d, alpha) = spec.draw(&mut rng);
            images.push(apply_confound(t, d, alpha, canvas)?);
            labels.push(k);
        }
    }
    LabeledImageSet::new(images, labels, templates.len())
}

/// Confounds image `i` of `set` with a draw from stream `i` of the spec's
/// seed, so each image's deformation does not depend on which others are
/// processed.
pub fn confound_image(image: &RawImage, index: usize, spec: &ConfoundSpec, canvas: (usize, usize)) -> Result<RawImage> {
    let mut rng = stream_rng(spec.rng_seed, index as u64);
    let (d, alpha) = spec.draw(&mut rng);
    apply_confound(image, d, alpha, canvas)
}

/// Applies [`confound_image`] to every image of `set` (Affine-MNIST style).
pub fn confound_dataset(set: &LabeledImageSet, spec: &ConfoundSpec, canvas: (usize, usize)) -> Result<LabeledImageSet> {
    spec.validate()?;
    let images = set
        .images()
        .iter()
        .enumerate()
        .map(|(i, img)| confound_image(img, i, spec, canvas))
        .collect::<Result<Vec<_>>>()?;
    LabeledImageSet::new(images, set.labels().to_vec(), set.num_classes())
}

/// Training-set sizes per class and repetitions of the random draw.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitPlan {
    pub sizes_per_class: Vec<usize>,
    pub repeats: usize,
    pub rng_seed: u64,
}

impl SplitPlan {
    pub fn new(sizes_per_class: Vec<usize>, repeats: usize, rng_seed: u64) -> Result<Self> {
        let plan = Self { sizes_per_class, repeats, rng_seed };
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sizes_per_class.is_empty() || self.sizes_per_class[0] == 0 {
            return Err(Error::InvalidConfig("sizes must be positive".into()));
        }
        if self.sizes_per_class.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidConfig("sizes must be strictly increasing".into()));
        }
        if self.repeats == 0 {
            return Err(Error::InvalidConfig("need at least one repeat".into()));
        }
        Ok(())
    }
}

/// One training subset: `size` indices per class, grouped by class.
#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub size: usize,
    pub repeat: usize,
    pub by_class: Vec<Vec<usize>>,
}

impl Split {
    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.by_class.iter().flatten().copied()
    }
}

/// Draws every `(size, repeat)` split without replacement. Each split has its
/// own random stream derived from `(rng_seed, size, repeat)`.
pub fn sample_splits(data: &LabeledImageSet, plan: &SplitPlan) -> Result<Vec<Split>> {
    plan.validate()?;
    let groups = data.class_indices();
    let largest = *plan.sizes_per_class.last().unwrap();
    for (k, g) in groups.iter().enumerate() {
        if g.len() < largest {
            return Err(Error::InsufficientSamples { class_id: k, available: g.len(), requested: largest });
        }
    }
    let mut splits = Vec::with_capacity(plan.sizes_per_class.len() * plan.repeats);
    for &size in &plan.sizes_per_class {
        for repeat in 0..plan.repeats {
            let mut rng = stream_rng(plan.rng_seed, ((size as u64) << 32) | repeat as u64);
            let by_class = groups
                .iter()
                .map(|g| {
                    let mut picked: Vec<usize> = index::sample(&mut rng, g.len(), size).into_iter().map(|i| g[i]).collect();
                    picked.sort_unstable();
                    picked
                })
                .collect();
            splits.push(Split { size, repeat, by_class });
        }
    }
    Ok(splits)
}
