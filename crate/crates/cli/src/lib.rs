//! The `fdsl` command: dataset generation, training, gradient checks and
//! model analysis.

use std::ffi::OsString;
use std::fmt::Display;
use std::path::{Path, PathBuf};

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use fdsl_core::analysis::{self, FilterMode};
use fdsl_core::dataset::{
    generate_dataset, parse_key_values, ColorMode, GenerationConfig, RenderConfig, RenderMode, DEFAULT_WEIGHTS,
};
use fdsl_core::ifs;
use fdsl_core::train::{self, FdslTask, LabeledSet, TrainConfig};
use fdsl_core::vit::{grad_check_with, load_checkpoint, Checkpoint, GradCheckOptions, ModelConfig, Stencil};
use fdsl_core::{Error, Image};

pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "fdsl", version, about = "Fractal pre-training toolkit for small vision transformers")]
struct Cli {
    /// Worker threads (falls back to FDSL_THREADS, then all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Reduce gradients in a fixed order so runs repeat bit for bit.
    #[arg(long, global = true)]
    deterministic: bool,
    /// Validate everything and exit without writing.
    #[arg(long, global = true)]
    dry_run: bool,
    /// File of key=value lines used as defaults for this subcommand's flags.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Generate a fractal category dataset.
    #[command(args_override_self = true)]
    Gen(GenArgs),
    /// Pre-train a model to classify fractal categories.
    #[command(args_override_self = true)]
    Pretrain(PretrainArgs),
    /// Fine-tune a checkpoint (or a fresh model) on a labeled dataset.
    #[command(args_override_self = true)]
    Finetune(FinetuneArgs),
    /// Top-1 accuracy of a checkpoint.
    #[command(args_override_self = true)]
    Evaluate(EvaluateArgs),
    /// Compare analytic gradients against finite differences.
    #[command(args_override_self = true)]
    Gradcheck(GradcheckArgs),
    /// Write filter, similarity, attention-distance or attention-map artifacts.
    #[command(args_override_self = true)]
    Analyze(AnalyzeArgs),
}

#[derive(Args, Debug)]
struct GenArgs {
    #[arg(long, default_value_t = 1000)]
    categories: usize,
    #[arg(long, default_value_t = 1000)]
    instances: usize,
    #[arg(long, default_value_t = fdsl_core::dataset::DEFAULT_IMAGE_SIZE)]
    size: usize,
    #[arg(long, default_value_t = ifs::DEFAULT_THRESHOLD)]
    threshold: f64,
    #[arg(long, default_value_t = RenderMode::Patch)]
    render: RenderMode,
    #[arg(long, default_value_t = ColorMode::Grayscale)]
    colormode: ColorMode,
    #[arg(long, default_value_t = ifs::DEFAULT_POINTS)]
    points: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ModelArgs {
    /// nano, nano2, micro or deit-tiny.
    #[arg(long, default_value = "nano")]
    preset: String,
    /// Square input resolution (overrides the preset).
    #[arg(long)]
    image_size: Option<usize>,
    #[arg(long)]
    patch: Option<usize>,
    #[arg(long)]
    channels: Option<usize>,
}

impl ModelArgs {
    fn build(&self, classes: usize) -> Result<ModelConfig, Failure> {
        let mut cfg = ModelConfig::preset(&self.preset, classes).map_err(Failure::usage)?;
        if let Some(s) = self.image_size {
            cfg.image_height = s;
            cfg.image_width = s;
        }
        if let Some(p) = self.patch {
            cfg.patch = p;
        }
        if let Some(c) = self.channels {
            cfg.channels = c;
        }
        cfg.validate().map_err(Failure::usage)?;
        Ok(cfg)
    }
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long, default_value_t = 300)]
    epochs: usize,
    #[arg(long, default_value_t = 64)]
    batch: usize,
    #[arg(long, default_value_t = 5e-4)]
    lr: f64,
    #[arg(long, default_value_t = 0.05)]
    weight_decay: f64,
    #[arg(long, default_value_t = 5)]
    warmup: usize,
    #[arg(long, default_value_t = 0.01)]
    min_lr_ratio: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Checkpoint every N epochs (0 = final only).
    #[arg(long, default_value_t = 0)]
    save_every: usize,
    /// Disable random horizontal flips.
    #[arg(long)]
    no_flip: bool,
}

impl TrainArgs {
    fn build(&self, deterministic: bool, out: &Path) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch,
            lr: self.lr,
            weight_decay: self.weight_decay,
            warmup_epochs: self.warmup,
            min_lr_ratio: self.min_lr_ratio,
            seed: self.seed,
            deterministic,
            hflip: !self.no_flip,
            save_every: self.save_every,
            out_dir: Some(out.to_path_buf()),
            verbose: true,
            ..TrainConfig::default()
        }
    }
}

#[derive(Args, Debug)]
struct PretrainArgs {
    /// Directory written by `gen`.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Hold out this fraction of each category for evaluation.
    #[arg(long, default_value_t = 0.0)]
    holdout: f64,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    train: TrainArgs,
}

#[derive(Args, Debug)]
struct FinetuneArgs {
    /// Pre-trained checkpoint; without it a fresh model is trained.
    #[arg(long)]
    ckpt: Option<PathBuf>,
    /// Generated dataset or directory of CIFAR-10 binary batches.
    #[arg(long)]
    data: PathBuf,
    /// Evaluation data; a CIFAR-10 directory contributes its test batch.
    #[arg(long)]
    eval: Option<PathBuf>,
    /// Keep only the first N training samples of each class.
    #[arg(long)]
    per_class: Option<usize>,
    #[arg(long)]
    out: PathBuf,
    /// Model for runs without --ckpt; --image-size also resizes a checkpoint's input.
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    train: TrainArgs,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Split {
    Train,
    Test,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[arg(long)]
    ckpt: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// CIFAR-10 split to read.
    #[arg(long, value_enum, default_value_t = Split::Test)]
    split: Split,
}

#[derive(Args, Debug)]
struct GradcheckArgs {
    #[arg(long, default_value = "nano")]
    preset: String,
    #[arg(long, default_value_t = 10)]
    classes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Entries checked per tensor (default: all).
    #[arg(long)]
    entries: Option<usize>,
    #[arg(long, default_value_t = 1e-3)]
    epsilon: f64,
    /// Use the two-point central difference.
    #[arg(long)]
    two_point: bool,
    #[arg(long, default_value_t = 1e-3)]
    tolerance: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum What {
    Filters,
    Possim,
    Attdist,
    Attmap,
}

#[derive(Args, Debug)]
struct AnalyzeArgs {
    #[arg(long)]
    ckpt: PathBuf,
    #[arg(long, value_enum)]
    what: What,
    /// Input image for attmap, or a single probe for attdist.
    #[arg(long)]
    image: Option<PathBuf>,
    /// Dataset directory to draw attdist probe images from.
    #[arg(long)]
    probes: Option<PathBuf>,
    #[arg(long, default_value_t = analysis::DEFAULT_PROBES)]
    probe_count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 16)]
    top_k: usize,
    /// Raw projection columns instead of principal components.
    #[arg(long)]
    raw: bool,
    /// Blend the attention map over the input image.
    #[arg(long)]
    overlay: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Runtime(Error),
}

impl Failure {
    fn usage(e: impl Display) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Runtime(e)
    }
}

type Outcome = Result<Vec<(&'static str, String)>, Failure>;

/// Expands `--config FILE` into flags placed right after the subcommand, so
/// flags given on the command line take precedence.
fn expand_config(argv: Vec<OsString>) -> Result<Vec<OsString>, Failure> {
    let strs: Vec<Option<&str>> = argv.iter().map(|a| a.to_str()).collect();
    let mut path = None;
    for (i, a) in strs.iter().enumerate() {
        match a {
            Some("--config") => path = strs.get(i + 1).copied().flatten().map(PathBuf::from),
            Some(s) if s.starts_with("--config=") => path = Some(PathBuf::from(&s["--config=".len()..])),
            _ => {}
        }
    }
    let Some(path) = path else { return Ok(argv) };
    let cmd = Cli::command();
    let Some((pos, sub)) = strs
        .iter()
        .enumerate()
        .skip(1)
        .find_map(|(i, a)| a.and_then(|a| cmd.find_subcommand(a)).map(|s| (i, s)))
    else {
        return Ok(argv);
    };
    let text = std::fs::read_to_string(&path)
        .map_err(|e| Failure::Usage(format!("cannot read config {}: {e}", path.display())))?;
    let mut extra = Vec::new();
    for (key, value) in parse_key_values(&text) {
        let long = key.replace('_', "-");
        let arg = sub
            .get_arguments()
            .chain(cmd.get_arguments())
            .find(|a| a.get_long() == Some(long.as_str()))
            .ok_or_else(|| Failure::Usage(format!("unknown key {key:?} in {}", path.display())))?;
        if arg.get_action().takes_values() {
            extra.push(OsString::from(format!("--{long}")));
            extra.push(OsString::from(value));
        } else {
            match value.as_str() {
                "true" | "1" | "yes" => extra.push(OsString::from(format!("--{long}"))),
                "false" | "0" | "no" => {}
                _ => return Err(Failure::Usage(format!("{key} expects true or false, got {value:?}"))),
            }
        }
    }
    let mut out = argv;
    out.splice(pos + 1..pos + 1, extra);
    Ok(out)
}

fn configure_threads(threads: Option<usize>) -> Result<(), Failure> {
    let threads = match threads {
        Some(n) => Some(n),
        None => match std::env::var("FDSL_THREADS") {
            Ok(v) => Some(v.parse().map_err(|_| Failure::Usage(format!("FDSL_THREADS={v:?} is not a count")))?),
            Err(_) => None,
        },
    };
    if let Some(n) = threads {
        if n == 0 {
            return Err(Failure::Usage("thread count must be at least 1".into()));
        }
        // Only the first pool configuration in a process takes effect.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

/// Parses `argv` (program name first), runs the subcommand and returns the
/// process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let result = expand_config(argv).and_then(|argv| {
        Cli::try_parse_from(argv).map_err(|e| {
            if matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            ) {
                let _ = e.print();
                Failure::Usage(String::new())
            } else {
                Failure::Usage(e.render().to_string().trim_end().to_string())
            }
        })
    });
    let cli = match result {
        Ok(cli) => cli,
        Err(Failure::Usage(msg)) if msg.is_empty() => return 0,
        Err(f) => return report(f),
    };
    match configure_threads(cli.threads).and_then(|_| dispatch(&cli)) {
        Ok(fields) => {
            let line: Vec<String> = fields.iter().map(|(k, v)| format!("{k}={v}")).collect();
            println!("RESULT {}", line.join(" "));
            0
        }
        Err(f) => report(f),
    }
}

fn report(f: Failure) -> i32 {
    match f {
        Failure::Usage(msg) => {
            eprintln!("{msg}");
            if !msg.contains("Usage:") {
                eprintln!("Usage: fdsl <gen|pretrain|finetune|evaluate|gradcheck|analyze> [OPTIONS]; see --help");
            }
            EXIT_USAGE
        }
        Failure::Runtime(e) => {
            eprintln!("error: {e}");
            EXIT_RUNTIME
        }
    }
}

fn dispatch(cli: &Cli) -> Outcome {
    match &cli.cmd {
        Cmd::Gen(a) => gen(cli, a),
        Cmd::Pretrain(a) => pretrain(cli, a),
        Cmd::Finetune(a) => finetune(cli, a),
        Cmd::Evaluate(a) => evaluate(a),
        Cmd::Gradcheck(a) => gradcheck(cli, a),
        Cmd::Analyze(a) => analyze(cli, a),
    }
}

fn dry_run(fields: &mut Vec<(&'static str, String)>) -> Outcome {
    fields.push(("dry_run", "true".into()));
    Ok(std::mem::take(fields))
}

fn check_out_dir(out: &Path) -> Result<(), Failure> {
    if out.exists() && !out.is_dir() {
        return Err(Failure::Usage(format!("{} exists and is not a directory", out.display())));
    }
    Ok(())
}

fn create_out_dir(out: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(out).map_err(|e| Failure::Runtime(Error::Io {
        path: out.to_path_buf(),
        source: e,
    }))
}

fn gen(cli: &Cli, a: &GenArgs) -> Outcome {
    let cfg = GenerationConfig {
        n_categories: a.categories,
        n_instances: a.instances,
        render: RenderConfig {
            image_size: a.size,
            mode: a.render,
            color: a.colormode,
            n_points: a.points,
            ..RenderConfig::default()
        },
        threshold: a.threshold,
        global_seed: a.seed,
        weights: DEFAULT_WEIGHTS,
    };
    cfg.validate().map_err(Failure::usage)?;
    check_out_dir(&a.out)?;
    let mut fields = vec![
        ("categories", a.categories.to_string()),
        ("images", (a.categories * a.instances).to_string()),
    ];
    if cli.dry_run {
        return dry_run(&mut fields);
    }
    let manifest = generate_dataset(&cfg, &a.out)?;
    fields[1].1 = manifest.instances.len().to_string();
    fields.push(("out", a.out.display().to_string()));
    Ok(fields)
}

fn validate_train(tc: &TrainConfig) -> Result<(), Failure> {
    tc.validate().map_err(Failure::usage)
}

fn metrics_fields(log: &train::MetricsLog, fields: &mut Vec<(&'static str, String)>) {
    if let Some(last) = log.last() {
        fields.push(("epochs", last.epoch.to_string()));
        fields.push(("train_loss", format!("{:.6}", last.train_loss)));
        fields.push(("train_acc", format!("{:.6}", last.train_acc)));
        if let Some(e) = last.eval_acc {
            fields.push(("eval_acc", format!("{e:.6}")));
        }
    }
}

fn pretrain(cli: &Cli, a: &PretrainArgs) -> Outcome {
    let tc = a.train.build(cli.deterministic, &a.out);
    validate_train(&tc)?;
    if !(0.0..1.0).contains(&a.holdout) {
        return Err(Failure::Usage(format!("holdout {} outside [0, 1)", a.holdout)));
    }
    check_out_dir(&a.out)?;
    let task = FdslTask::load(&a.data)?;
    let model = a.model.build(task.classes())?;
    let mut fields = vec![("classes", task.classes().to_string()), ("images", task.data.len().to_string())];
    if cli.dry_run {
        return dry_run(&mut fields);
    }
    create_out_dir(&a.out)?;
    let log = if a.holdout > 0.0 {
        let (train_set, hold) = task.data.split_holdout(a.holdout);
        let mut params = fdsl_core::vit::ViTParams::init(&model, tc.seed);
        train::fit(&mut params, &model, &train_set, Some(&hold), &tc)?
    } else {
        train::pretrain(&task, &tc, &model)?.1
    };
    metrics_fields(&log, &mut fields);
    fields.push(("ckpt", a.out.join("final.fdsl").display().to_string()));
    Ok(fields)
}

fn load_labeled(dir: &Path, cifar_test: bool) -> Result<LabeledSet, Failure> {
    Ok(LabeledSet::load_dir(dir, cifar_test)?)
}

fn finetune(cli: &Cli, a: &FinetuneArgs) -> Outcome {
    let tc = a.train.build(cli.deterministic, &a.out);
    validate_train(&tc)?;
    check_out_dir(&a.out)?;
    let mut data = load_labeled(&a.data, false)?;
    if let Some(n) = a.per_class {
        data = data.take_per_class(n);
    }
    let eval = a.eval.as_deref().map(|d| load_labeled(d, true)).transpose()?;
    let ckpt = a.ckpt.as_deref().map(load_checkpoint).transpose()?;
    let model = match &ckpt {
        Some(c) => {
            let mut m = c.config;
            m.classes = data.classes;
            if let Some(s) = a.model.image_size {
                m.image_height = s;
                m.image_width = s;
            }
            m
        }
        None => a.model.build(data.classes)?,
    };
    if let Some(c) = &ckpt {
        train::adapt_for_finetune(c, &model, tc.seed).map_err(Failure::usage)?;
    }
    let mut fields = vec![("classes", data.classes.to_string()), ("images", data.len().to_string())];
    if cli.dry_run {
        return dry_run(&mut fields);
    }
    create_out_dir(&a.out)?;
    let (_, log) = match &ckpt {
        Some(c) => train::finetune(c, &data, eval.as_ref(), &tc, &model)?,
        None => train::train_from_scratch(&data, eval.as_ref(), &tc, &model)?,
    };
    metrics_fields(&log, &mut fields);
    fields.push(("ckpt", a.out.join("final.fdsl").display().to_string()));
    Ok(fields)
}

fn evaluate(a: &EvaluateArgs) -> Outcome {
    let ckpt = load_checkpoint(&a.ckpt)?;
    let data = load_labeled(&a.data, matches!(a.split, Split::Test))?;
    let acc = train::evaluate(&ckpt, &data)?;
    Ok(vec![("accuracy", format!("{acc:.6}")), ("samples", data.len().to_string())])
}

fn gradcheck(cli: &Cli, a: &GradcheckArgs) -> Outcome {
    let cfg = ModelConfig::preset(&a.preset, a.classes).map_err(Failure::usage)?;
    if !(a.epsilon > 0.0) {
        return Err(Failure::Usage("epsilon must be positive".into()));
    }
    let opts = GradCheckOptions {
        epsilon: a.epsilon,
        stencil: if a.two_point { Stencil::TwoPoint } else { Stencil::FourPoint },
        max_entries_per_tensor: a.entries,
        ..GradCheckOptions::default()
    };
    let mut fields = vec![("preset", a.preset.clone())];
    if cli.dry_run {
        return dry_run(&mut fields);
    }
    let report = grad_check_with(&cfg, a.seed, &opts, |_| {})?;
    for t in &report.tensors {
        eprintln!("{:<28} entries={:<6} max_rel_err={:.3e}", t.name, t.checked, t.max_rel_err);
    }
    let max = report.max_rel_err();
    if !report.passes(a.tolerance) {
        return Err(Failure::Runtime(Error::InvalidArgument(format!(
            "gradient check failed: max_rel_err={max:.3e} exceeds {:.1e}",
            a.tolerance
        ))));
    }
    fields.push(("entries", report.entries_checked().to_string()));
    fields.push(("max_rel_err", format!("{max:.3e}")));
    Ok(fields)
}

fn probe_images(a: &AnalyzeArgs, ckpt: &Checkpoint) -> Result<Vec<Image>, Failure> {
    let cfg = &ckpt.config;
    let images = if let Some(dir) = &a.probes {
        let data = load_labeled(dir, true)?;
        analysis::select_probes(data.len(), a.probe_count, a.seed)
            .into_iter()
            .map(|i| data.images[i].clone())
            .collect()
    } else if let Some(p) = &a.image {
        vec![Image::read(p)?]
    } else {
        return Err(Failure::Usage("attdist needs --probes DIR or --image FILE".into()));
    };
    Ok(images.iter().map(|im| train::prepare_image(im, cfg)).collect())
}

fn analyze(cli: &Cli, a: &AnalyzeArgs) -> Outcome {
    check_out_dir(&a.out)?;
    if a.what == What::Attmap && a.image.is_none() {
        return Err(Failure::Usage("attmap needs --image FILE".into()));
    }
    if a.what == What::Filters && a.top_k == 0 {
        return Err(Failure::Usage("--top-k must be at least 1".into()));
    }
    let ckpt = load_checkpoint(&a.ckpt)?;
    let mut fields = vec![("what", format!("{:?}", a.what).to_lowercase())];
    let probes = match a.what {
        What::Attdist => probe_images(a, &ckpt)?,
        What::Attmap => {
            let img = Image::read(a.image.as_deref().expect("checked above"))?;
            vec![train::prepare_image(&img, &ckpt.config)]
        }
        _ => Vec::new(),
    };
    if cli.dry_run {
        return dry_run(&mut fields);
    }
    create_out_dir(&a.out)?;
    match a.what {
        What::Filters => {
            let mode = if a.raw { FilterMode::Raw } else { FilterMode::Pca };
            let r = analysis::embedding_filters(&ckpt, a.top_k, mode)?;
            r.write(&a.out)?;
            fields.push(("filters", r.filters.len().to_string()));
            if let Some(v) = r.variance_ratio.first() {
                fields.push(("top_variance_ratio", format!("{v:.6}")));
            }
        }
        What::Possim => {
            let s = analysis::pos_embed_similarity(&ckpt)?;
            s.write(&a.out)?;
            fields.push(("positions", s.len().to_string()));
        }
        What::Attdist => {
            let r = analysis::mean_attention_distance(&ckpt, &probes)?;
            r.write(&a.out)?;
            let mean = r.distances.iter().sum::<f64>() / r.distances.len() as f64;
            fields.push(("probes", probes.len().to_string()));
            fields.push(("mean_distance_px", format!("{mean:.4}")));
        }
        What::Attmap => {
            let m = analysis::attention_map(&ckpt, &probes[0], a.overlay)?;
            m.write(&a.out)?;
            fields.push(("width", m.image.width.to_string()));
            fields.push(("height", m.image.height.to_string()));
        }
    }
    fields.push(("out", a.out.display().to_string()));
    Ok(fields)
}
