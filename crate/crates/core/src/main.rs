use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use rcdt::bench::{run_ood, run_sweep, write_summary_csv, OodConfig, RunConfig};
use rcdt::data::{confound_dataset, generate_synthetic_dataset, ConfoundSpec, SplitPlan};
use rcdt::io::idx::mnist_paths;
use rcdt::io::{load_model, read_idx, read_idx_images, read_pgm, save_model, write_field, write_idx, write_pgm, IdxValueType};
use rcdt::subspace::{fit, predict, predict_batch, FitConfig, DEFAULT_VARIANCE_FRACTION};
use rcdt::transforms::rcdt_inverse;
use rcdt::types::{make_uniform_reference1d, Density2D, LabeledImageSet, RawImage, DEFAULT_ANGLES, DEFAULT_EPSILON};
use rcdt::{Error, Result};

/// Radon-CDT transforms and nearest-subspace classification.
#[derive(Parser)]
#[command(name = "rcdt", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Number of projection angles on [0, π).
    #[arg(long, global = true, default_value_t = DEFAULT_ANGLES)]
    angles: usize,
    /// Positivity floor, relative to the image maximum.
    #[arg(long, global = true, default_value_t = DEFAULT_EPSILON)]
    epsilon: f64,
    /// Fraction of residual energy kept per class subspace.
    #[arg(long, global = true, default_value_t = DEFAULT_VARIANCE_FRACTION)]
    variance: f64,
    /// Do not add the translation directions to the class subspaces.
    #[arg(long, global = true)]
    no_enrich: bool,
    /// Seed for every random draw.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, env = "RCDT_JOBS")]
    jobs: Option<usize>,
    /// Output file (standard output when omitted, where applicable).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

impl Common {
    fn fit_config(&self) -> FitConfig {
        FitConfig {
            n_angles: self.angles,
            epsilon: self.epsilon,
            variance_fraction: self.variance,
            enrich_translation: !self.no_enrich,
        }
    }
}

#[derive(Args)]
struct Dataset {
    /// IDX images file.
    #[arg(long)]
    images: Option<PathBuf>,
    /// IDX labels file.
    #[arg(long)]
    labels: Option<PathBuf>,
}

#[derive(Args)]
struct TrainTest {
    /// Directory holding the four standard MNIST files.
    #[arg(long)]
    mnist: Option<PathBuf>,
    /// Training images (IDX), overrides --mnist.
    #[arg(long)]
    train_images: Option<PathBuf>,
    /// Training labels (IDX).
    #[arg(long)]
    train_labels: Option<PathBuf>,
    /// Test images (IDX).
    #[arg(long)]
    test_images: Option<PathBuf>,
    /// Test labels (IDX).
    #[arg(long)]
    test_labels: Option<PathBuf>,
    /// Training samples per class, comma separated and increasing.
    #[arg(long, value_delimiter = ',', default_value = "1,2,4,8,16,32,64,128,256")]
    sizes: Vec<usize>,
    /// Random training draws per size.
    #[arg(long, default_value_t = 10)]
    repeats: usize,
    /// Score only the first N test images.
    #[arg(long)]
    max_test: Option<usize>,
    /// Also write per-size mean and standard deviation here.
    #[arg(long)]
    summary: Option<PathBuf>,
    /// Record wall-clock times (makes the output run dependent).
    #[arg(long)]
    timing: bool,
}

#[derive(Subcommand)]
enum Command {
    /// R-CDT of one image, written as a field file.
    Transform {
        /// PGM image or IDX images file.
        input: PathBuf,
        /// Image index inside an IDX file.
        #[arg(long, default_value_t = 0)]
        index: usize,
        /// Reconstruct the image from the field and report the error.
        #[arg(long)]
        roundtrip: bool,
        /// Where to write the reconstruction (PGM).
        #[arg(long)]
        recon: Option<PathBuf>,
    },
    /// Fit class subspaces and save the model.
    Train {
        #[command(flatten)]
        data: Dataset,
    },
    /// Classify one image.
    Predict {
        /// Model file written by `train`.
        #[arg(long)]
        model: PathBuf,
        /// PGM image or IDX images file.
        input: PathBuf,
        /// Image index inside an IDX file.
        #[arg(long, default_value_t = 0)]
        index: usize,
    },
    /// Accuracy and confusion matrix on a labelled set (JSON).
    Eval {
        /// Model file written by `train`.
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        data: Dataset,
    },
    /// Accuracy versus training-set size (CSV).
    Sweep {
        #[command(flatten)]
        sets: TrainTest,
    },
    /// Train in distribution, test in and out of distribution (CSV).
    Ood {
        #[command(flatten)]
        sets: TrainTest,
        /// Training and in-distribution translation range in pixels (min,max).
        #[arg(long, value_delimiter = ',', default_value = "0,7")]
        in_translation: Vec<f64>,
        /// In-distribution scale range (min,max).
        #[arg(long, value_delimiter = ',', default_value = "0.9,1.2")]
        in_scale: Vec<f64>,
        /// Out-of-distribution translation range in pixels.
        #[arg(long, value_delimiter = ',', default_value = "7,12")]
        out_translation: Vec<f64>,
        /// Out-of-distribution scale range.
        #[arg(long, value_delimiter = ',', default_value = "1.5,2.0")]
        out_scale: Vec<f64>,
        /// Square canvas side in pixels.
        #[arg(long, default_value_t = 84)]
        canvas: usize,
    },
    /// Write a confounded copy of a dataset as an IDX pair.
    Generate {
        #[command(flatten)]
        data: Dataset,
        /// Translation range in pixels (min,max).
        #[arg(long, value_delimiter = ',', default_value = "0,7")]
        translation: Vec<f64>,
        /// Scale range (min,max).
        #[arg(long, value_delimiter = ',', default_value = "0.9,1.2")]
        scale: Vec<f64>,
        /// Square canvas side in pixels.
        #[arg(long, default_value_t = 84)]
        canvas: usize,
        /// Use the first image of each class as a template and draw this
        /// many samples per class instead of confounding every image.
        #[arg(long)]
        per_class: Option<usize>,
        /// Output labels file (images go to --out).
        #[arg(long)]
        out_labels: PathBuf,
        /// Quantize to bytes instead of writing f64 values.
        #[arg(long)]
        u8: bool,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).target(env_logger::Target::Stderr).init();
    let cli = Cli::parse();
    if let Some(jobs) = cli.common.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build_global() {
            log::warn!("could not size the worker pool: {e}");
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let c = &cli.common;
    c.fit_config().validate()?;
    match &cli.command {
        Command::Transform { input, index, roundtrip, recon } => cmd_transform(c, input, *index, *roundtrip, recon.as_deref()),
        Command::Train { data } => cmd_train(c, data),
        Command::Predict { model, input, index } => {
            let model = load_model(model)?;
            let p = predict(&read_image(input, *index)?, &model)?;
            emit_json(c, &serde_json::json!({ "label": p.label, "distances": p.distances }))
        }
        Command::Eval { model, data } => cmd_eval(c, model, data),
        Command::Sweep { sets } => cmd_sweep(c, sets),
        Command::Ood { sets, in_translation, in_scale, out_translation, out_scale, canvas } => {
            let in_spec = ConfoundSpec::new(pair(in_translation)?, pair(in_scale)?, c.seed)?;
            let out_spec = ConfoundSpec::new(pair(out_translation)?, pair(out_scale)?, c.seed.wrapping_add(2))?;
            cmd_ood(c, sets, OodConfig { in_spec, out_spec, canvas: (*canvas, *canvas), max_test: sets.max_test })
        }
        Command::Generate { data, translation, scale, canvas, per_class, out_labels, u8 } => {
            let set = read_dataset(data)?;
            let spec = ConfoundSpec::new(pair(translation)?, pair(scale)?, c.seed)?;
            let generated = match per_class {
                Some(n) => {
                    let templates: Vec<RawImage> = set
                        .class_indices()
                        .iter()
                        .enumerate()
                        .map(|(k, idx)| idx.first().map(|&i| set.images()[i].clone()).ok_or(Error::MissingClass { class_id: k }))
                        .collect::<Result<_>>()?;
                    generate_synthetic_dataset(&templates, &spec, *n, (*canvas, *canvas))?
                }
                None => confound_dataset(&set, &spec, (*canvas, *canvas))?,
            };
            let out = c.out.as_ref().ok_or_else(|| Error::InvalidConfig("--out is required".into()))?;
            let ty = if *u8 { IdxValueType::U8 } else { IdxValueType::F64 };
            write_idx(out, out_labels, &generated, ty)?;
            log::info!("wrote {} images", generated.len());
            Ok(())
        }
    }
}

fn pair(v: &[f64]) -> Result<(f64, f64)> {
    match v {
        [a, b] => Ok((*a, *b)),
        [a] => Ok((*a, *a)),
        _ => Err(Error::InvalidConfig(format!("expected MIN,MAX, got {v:?}"))),
    }
}

fn output(c: &Common) -> Result<Box<dyn Write>> {
    Ok(match &c.out {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn emit_json(c: &Common, value: &impl Serialize) -> Result<()> {
    let mut w = output(c)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Error::Io(io::Error::other(e)))?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn read_image(path: &Path, index: usize) -> Result<RawImage> {
    let is_pgm = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("pgm"));
    if is_pgm {
        return read_pgm(path);
    }
    let mut images = read_idx_images(path)?;
    if index >= images.len() {
        return Err(Error::InvalidConfig(format!("index {index} out of range ({} images)", images.len())));
    }
    Ok(images.swap_remove(index))
}

fn read_dataset(d: &Dataset) -> Result<LabeledImageSet> {
    let missing = |what: &str| Error::InvalidConfig(format!("--{what} is required"));
    let images = d.images.as_ref().ok_or_else(|| missing("images"))?;
    let labels = d.labels.as_ref().ok_or_else(|| missing("labels"))?;
    read_idx(images, labels)
}

fn cmd_transform(c: &Common, input: &Path, index: usize, roundtrip: bool, recon: Option<&Path>) -> Result<()> {
    let raw = read_image(input, index)?;
    let tf = c.fit_config().transformer(raw.height(), raw.width())?;
    let density = Density2D::from_raw_with_spacing(&raw, c.epsilon, 1.0)?;
    let field = tf.forward(&density)?;
    let out = c.out.as_ref().ok_or_else(|| Error::InvalidConfig("--out is required".into()))?;
    write_field(&field, out)?;
    let mut report = serde_json::json!({
        "field": out,
        "m": field.proj().n_t(),
        "n": field.proj().n_angles(),
        "height": raw.height(),
        "width": raw.width(),
    });
    if roundtrip {
        let reference = make_uniform_reference1d(*field.proj().t_grid());
        let back = rcdt_inverse(&field, &reference)?;
        let num: f64 = back.values().iter().zip(density.values()).map(|(a, b)| (a - b).powi(2)).sum();
        let den: f64 = density.values().iter().map(|b| b * b).sum();
        report["roundtrip_rel_l2"] = serde_json::json!((num / den).sqrt());
        let recon_path = recon.map(Path::to_path_buf).unwrap_or_else(|| out.with_extension("recon.pgm"));
        write_pgm(&back.to_raw(), &recon_path)?;
        report["reconstruction"] = serde_json::json!(recon_path);
    }
    let mut stdout = io::stdout().lock();
    serde_json::to_writer_pretty(&mut stdout, &report).map_err(|e| Error::Io(io::Error::other(e)))?;
    writeln!(stdout)?;
    Ok(())
}

fn cmd_train(c: &Common, data: &Dataset) -> Result<()> {
    let set = read_dataset(data)?;
    let model = fit(&set, &c.fit_config())?;
    let out = c.out.as_ref().ok_or_else(|| Error::InvalidConfig("--out is required".into()))?;
    save_model(&model, out)?;
    let ranks: Vec<usize> = model.classes().iter().map(|b| b.rank()).collect();
    let mut stdout = io::stdout().lock();
    for (k, r) in ranks.iter().enumerate() {
        writeln!(stdout, "class {k}: rank {r}")?;
    }
    Ok(())
}

#[derive(Serialize)]
struct EvalReport {
    accuracy: f64,
    correct: usize,
    total: usize,
    /// `confusion[true][predicted]`.
    confusion: Vec<Vec<usize>>,
}

fn cmd_eval(c: &Common, model: &Path, data: &Dataset) -> Result<()> {
    let model = load_model(model)?;
    let set = read_dataset(data)?;
    if set.is_empty() {
        return Err(Error::EmptyTestSet);
    }
    let k = model.num_classes();
    if let Some(&l) = set.labels().iter().find(|&&l| l >= k) {
        return Err(Error::MissingClass { class_id: l });
    }
    let predicted = predict_batch(set.images(), &model)?;
    let mut confusion = vec![vec![0usize; k]; k];
    for (&t, &p) in set.labels().iter().zip(&predicted) {
        confusion[t][p] += 1;
    }
    let correct = (0..k).map(|i| confusion[i][i]).sum();
    emit_json(c, &EvalReport { accuracy: correct as f64 / set.len() as f64, correct, total: set.len(), confusion })
}

fn load_train_test(s: &TrainTest) -> Result<(LabeledImageSet, LabeledImageSet)> {
    let pick = |explicit: &Option<PathBuf>, from_dir: Option<PathBuf>, what: &str| {
        explicit
            .clone()
            .or(from_dir)
            .ok_or_else(|| Error::InvalidConfig(format!("--{what} or --mnist is required")))
    };
    let (dtr, dte) = match &s.mnist {
        Some(d) => (Some(mnist_paths(d, true)), Some(mnist_paths(d, false))),
        None => (None, None),
    };
    let train = read_idx(
        pick(&s.train_images, dtr.as_ref().map(|p| p.0.clone()), "train-images")?,
        pick(&s.train_labels, dtr.as_ref().map(|p| p.1.clone()), "train-labels")?,
    )?;
    let test = read_idx(
        pick(&s.test_images, dte.as_ref().map(|p| p.0.clone()), "test-images")?,
        pick(&s.test_labels, dte.as_ref().map(|p| p.1.clone()), "test-labels")?,
    )?;
    Ok((train, test))
}

fn truncate(set: LabeledImageSet, max: Option<usize>) -> Result<LabeledImageSet> {
    match max {
        Some(n) if n < set.len() => {
            let idx: Vec<usize> = (0..n).collect();
            Ok(set.subset(&idx))
        }
        _ => Ok(set),
    }
}

fn cmd_sweep(c: &Common, s: &TrainTest) -> Result<()> {
    let (train, test) = load_train_test(s)?;
    let test = truncate(test, s.max_test)?;
    let plan = SplitPlan::new(s.sizes.clone(), s.repeats, c.seed)?;
    let config = RunConfig { fit: c.fit_config(), timing: s.timing };
    let result = run_sweep(&train, &test, &plan, &config)?;
    result.write_csv(output(c)?)?;
    if let Some(p) = &s.summary {
        write_summary_csv(&result.summary(), File::create(p)?)?;
    }
    Ok(())
}

fn cmd_ood(c: &Common, s: &TrainTest, ood: OodConfig) -> Result<()> {
    let (train, test) = load_train_test(s)?;
    let plan = SplitPlan::new(s.sizes.clone(), s.repeats, c.seed)?;
    let config = RunConfig { fit: c.fit_config(), timing: s.timing };
    let result = run_ood(&train, &test, &ood, &plan, &config)?;
    result.write_csv(output(c)?)?;
    if let Some(p) = &s.summary {
        write_summary_csv(&result.summary(), File::create(p)?)?;
    }
    Ok(())
}
