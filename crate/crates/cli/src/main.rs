use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use lobcod::apps::{self, BaseRule, FusionConfig, InpaintConfig};
use lobcod::io;
use lobcod::learn::{self, LrDecay, OptimizerKind, OptimizerPhase, TrainConfig};
use lobcod::{
    build_layers, init_needles, pursue_layered, pursue_sequential, LocalDictionary, Plane,
    PursuitConfig, WorkImage,
};

/// Convolutional sparse coding: dictionary training, pursuit, inpainting
/// and multi-focus fusion on grayscale PGM images.
#[derive(Parser)]
#[command(name = "lobcod", version)]
struct Cli {
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, env = "LOBCOD_THREADS", default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a dictionary on a directory of PGM images.
    Train(TrainArgs),
    /// Code one image against a dictionary.
    Pursue(PursueArgs),
    /// Fill in the missing pixels of an image.
    Inpaint(InpaintArgs),
    /// Fuse registered multi-focus images.
    Fuse(FuseArgs),
    /// Print the PSNR between two images.
    Psnr(PsnrArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Batch,
    Stochastic,
}

#[derive(Clone, Copy, ValueEnum)]
enum Optimizer {
    Sgd,
    Momentum,
    Adam,
}

impl Optimizer {
    fn kind(self) -> OptimizerKind {
        match self {
            Optimizer::Sgd => OptimizerKind::Sgd,
            Optimizer::Momentum => OptimizerKind::momentum(),
            Optimizer::Adam => OptimizerKind::adam(),
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    /// Directory of training images (*.pgm).
    images: PathBuf,
    /// Initial dictionary; random image patches when omitted.
    #[arg(long)]
    dict: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long, default_value_t = 0.02)]
    eta: f64,
    #[arg(long, default_value_t = 20)]
    epochs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Mode::Stochastic)]
    mode: Mode,
    /// Optimizer for stochastic training.
    #[arg(long, value_enum, default_value_t = Optimizer::Adam)]
    optimizer: Optimizer,
    /// Multiply the step size by this factor every `--decay-every` epochs.
    #[arg(long, requires = "decay_every")]
    decay: Option<f64>,
    #[arg(long)]
    decay_every: Option<usize>,
    /// Filter side for a fresh dictionary.
    #[arg(long, default_value_t = 8)]
    side: usize,
    /// Number of filters for a fresh dictionary.
    #[arg(long, default_value_t = 81)]
    filters: usize,
    /// Output dictionary; a JSON sidecar is written next to it.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct PursueArgs {
    image: PathBuf,
    #[arg(long)]
    dict: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long, default_value_t = 100)]
    epochs: usize,
    /// Stop once an epoch lowers the objective by less than this fraction.
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    /// Visit needles one at a time in row-major order.
    #[arg(long, conflicts_with = "layered")]
    sequential: bool,
    /// Update one layer of non-overlapping needles at a time (default).
    #[arg(long)]
    layered: bool,
    /// Reconstruction (PGM).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Needle dump.
    #[arg(long)]
    needles: Option<PathBuf>,
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct InpaintArgs {
    image: PathBuf,
    /// Mask PGM: 0 marks a missing pixel, anything else an observed one.
    #[arg(long)]
    mask: PathBuf,
    #[arg(long)]
    dict: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long, default_value_t = 100)]
    epochs: usize,
    /// Adapt the dictionary to the observed pixels first.
    #[arg(long)]
    train_on_image: bool,
    /// Step size for `--train-on-image`.
    #[arg(long, default_value_t = 0.02)]
    eta: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Ground truth; the PSNR of the result is printed.
    #[arg(long)]
    reference: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct FuseArgs {
    /// Two or more registered source images.
    #[arg(required = true)]
    images: Vec<PathBuf>,
    #[arg(long)]
    dict: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long, default_value_t = 5.0)]
    mu: f64,
    /// Side of the uniform kernel smoothing the activity maps.
    #[arg(long, default_value_t = 9)]
    smooth: usize,
    /// Alternations between edge pursuit and base update.
    #[arg(long, default_value_t = 3)]
    iters: usize,
    /// Average the bases instead of taking the most active one.
    #[arg(long)]
    average_base: bool,
    #[arg(long)]
    out: PathBuf,
    /// Write the activity map of source k to `<PREFIX><k>.pgm`.
    #[arg(long, value_name = "PREFIX")]
    activity: Option<String>,
    #[arg(long)]
    reference: Option<PathBuf>,
}

#[derive(Args)]
struct PsnrArgs {
    reference: PathBuf,
    estimate: PathBuf,
}

/// Bad input (exit code 2) as opposed to a failure during computation.
#[derive(Debug)]
struct InputError(String);

impl std::fmt::Display for InputError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InputError {}

fn input_err(msg: impl Into<String>) -> anyhow::Error {
    InputError(msg.into()).into()
}

fn load_pgm(path: &Path) -> anyhow::Result<Plane> {
    io::read_pgm(path).map_err(|e| input_err(format!("cannot read image {}: {e}", path.display())))
}

fn load_dict(path: &Path) -> anyhow::Result<LocalDictionary> {
    io::read_dict_file(path)
        .map_err(|e| input_err(format!("cannot read dictionary {}: {e}", path.display())))
}

fn check_output(path: &Path) -> anyhow::Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() && !dir.is_dir() => Err(input_err(format!(
            "output directory {} does not exist",
            dir.display()
        ))),
        _ => Ok(()),
    }
}

fn check_outputs<'a>(paths: impl IntoIterator<Item = Option<&'a PathBuf>>) -> anyhow::Result<()> {
    paths
        .into_iter()
        .flatten()
        .try_for_each(|p| check_output(p))
}

fn check_lambda(lambda: f64) -> anyhow::Result<()> {
    if lambda > 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(input_err(format!(
            "--lambda must be positive, got {lambda}"
        )))
    }
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| {
        format!("cannot create {}", path.display())
    })?))
}

/// Mean-subtraction window used for every pipeline.
const MEAN_KERNEL: usize = 8;

fn train(args: &TrainArgs) -> anyhow::Result<()> {
    check_lambda(args.lambda)?;
    check_outputs([Some(&args.out), args.trace.as_ref()])?;
    if args.eta.is_nan() || args.eta < 0.0 {
        return Err(input_err("--eta must be >= 0"));
    }
    let entries = std::fs::read_dir(&args.images)
        .map_err(|e| input_err(format!("cannot list {}: {e}", args.images.display())))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("pgm")))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(input_err(format!(
            "no training images in {}",
            args.images.display()
        )));
    }
    let raw = paths
        .iter()
        .map(|p| load_pgm(p))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let images = raw
        .iter()
        .map(|x| apps::mean_subtract(x.view(), MEAN_KERNEL, None).map(|(d, _)| d))
        .collect::<lobcod::Result<Vec<_>>>()?;

    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let dict = match &args.dict {
        Some(p) => load_dict(p)?,
        None => LocalDictionary::from_random_patches(&images, args.side, args.filters, &mut rng)
            .map_err(|e| input_err(e.to_string()))?,
    };
    let kind = match args.mode {
        Mode::Stochastic => args.optimizer.kind(),
        Mode::Batch => OptimizerKind::Sgd,
    };
    let mut cfg = TrainConfig::new(
        args.lambda,
        args.epochs,
        OptimizerPhase::always(kind, args.eta),
    );
    cfg.seed = args.seed;
    cfg.pursuit.log_every = 1;
    if let (Some(factor), Some(period)) = (args.decay, args.decay_every) {
        cfg.lr_decay = Some(LrDecay { factor, period });
    }
    cfg.validate().map_err(|e| input_err(e.to_string()))?;

    let start = Instant::now();
    let out = match args.mode {
        Mode::Stochastic => learn::train_stochastic(&images, dict, &cfg)?,
        Mode::Batch => learn::train_batch(&images, dict, &cfg)?,
    };
    log::info!("trained in {:.2} s", start.elapsed().as_secs_f64());

    let meta = io::CheckpointMeta {
        epoch: args.epochs,
        optimizer: kind.name().to_string(),
        eta: args.eta,
        lambda: args.lambda,
        seed: args.seed,
    };
    io::write_checkpoint(&args.out, &out.dict, &meta)?;
    if let Some(t) = &args.trace {
        let mode = match args.mode {
            Mode::Batch => "batch",
            Mode::Stochastic => "stochastic",
        };
        let comments = vec![
            "lobcod train".to_string(),
            format!(
                "mode={mode} optimizer={} eta={} lambda={}",
                kind.name(),
                args.eta,
                args.lambda
            ),
            format!(
                "epochs={} seed={} side={} filters={}",
                args.epochs,
                args.seed,
                out.dict.side(),
                out.dict.num_filters()
            ),
            format!("images={}", paths.len()),
        ];
        let mut w = create(t)?;
        io::write_train_trace(&mut w, &comments, &out.trace)?;
        w.flush()?;
    }
    let last = out.trace.last().expect("trace is never empty");
    println!(
        "final objective {:.6e} (nnz {})",
        last.objective.total, last.objective.nnz
    );
    Ok(())
}

fn pursue(args: &PursueArgs) -> anyhow::Result<()> {
    check_lambda(args.lambda)?;
    check_outputs([
        args.out.as_ref(),
        args.needles.as_ref(),
        args.trace.as_ref(),
    ])?;
    if args.epochs == 0 {
        return Err(input_err("--epochs must be at least 1"));
    }
    let dict = load_dict(&args.dict)?;
    let img = load_pgm(&args.image)?;
    let (detail, mean) = apps::mean_subtract(img.view(), MEAN_KERNEL, None)?;
    let mut work =
        WorkImage::pad(detail.view(), dict.side()).map_err(|e| input_err(e.to_string()))?;
    let mut cfg = PursuitConfig::new(args.lambda);
    cfg.max_epochs = args.epochs;
    cfg.rel_obj_tol = args.tol;
    cfg.validate().map_err(|e| input_err(e.to_string()))?;
    let needles = init_needles(&work, &dict, &cfg.lasso())?;
    let out = if args.sequential {
        pursue_sequential(&mut work, &dict, needles, &cfg)?
    } else {
        let (h, w) = work.shape();
        pursue_layered(
            &mut work,
            &dict,
            needles,
            &build_layers(h, w, dict.side())?,
            &cfg,
        )?
    };
    if let Some(p) = &args.out {
        let recon = work.cropped_reconstruction()? + &mean;
        io::write_pgm(p, &recon)?;
    }
    if let Some(p) = &args.needles {
        io::write_needles_file(p, &out.needles)?;
    }
    if let Some(t) = &args.trace {
        let comments = vec![
            "lobcod pursue".to_string(),
            format!(
                "order={} lambda={} max_epochs={} tol={}",
                if args.sequential {
                    "sequential"
                } else {
                    "layered"
                },
                args.lambda,
                args.epochs,
                args.tol
            ),
        ];
        let mut w = create(t)?;
        io::write_objective_trace(&mut w, &comments, &out.trace)?;
        w.flush()?;
    }
    let r = out.final_report();
    println!("objective {:.6e} (nnz {})", r.total, r.nnz);
    Ok(())
}

fn inpaint(args: &InpaintArgs) -> anyhow::Result<()> {
    check_lambda(args.lambda)?;
    check_outputs([Some(&args.out), args.trace.as_ref()])?;
    let dict = load_dict(&args.dict)?;
    let img = load_pgm(&args.image)?;
    let mask = load_pgm(&args.mask)?.mapv(|v| if v > 0.0 { 1.0 } else { 0.0 });
    if mask.dim() != img.dim() {
        return Err(input_err(format!(
            "mask is {:?} but image is {:?}",
            mask.dim(),
            img.dim()
        )));
    }
    let reference = args.reference.as_deref().map(load_pgm).transpose()?;
    if reference.as_ref().is_some_and(|r| r.dim() != img.dim()) {
        return Err(input_err("reference and image differ in size"));
    }
    let corrupted = &img * &mask;
    let mut cfg = InpaintConfig::new(args.lambda);
    cfg.pursuit.max_epochs = args.epochs;
    if args.train_on_image {
        let mut tc = TrainConfig::new(
            args.lambda,
            args.epochs,
            OptimizerPhase::always(OptimizerKind::adam(), args.eta),
        );
        tc.seed = args.seed;
        cfg.train = Some(tc);
    }
    let out = apps::inpaint(corrupted.view(), mask.view(), &dict, &cfg)?;
    io::write_pgm(&args.out, &out.restored)?;
    if let Some(t) = &args.trace {
        let comments = vec![
            "lobcod inpaint".to_string(),
            format!(
                "lambda={} max_epochs={} train_on_image={} eta={} seed={}",
                args.lambda, args.epochs, args.train_on_image, args.eta, args.seed
            ),
        ];
        let mut w = create(t)?;
        io::write_objective_trace(&mut w, &comments, &out.trace)?;
        w.flush()?;
    }
    if let Some(r) = &reference {
        println!("psnr {:.4} dB", apps::psnr(r.view(), out.restored.view())?);
    }
    Ok(())
}

fn fuse(args: &FuseArgs) -> anyhow::Result<()> {
    check_lambda(args.lambda)?;
    check_output(&args.out)?;
    if args.images.len() < 2 {
        return Err(input_err("fusion needs at least two input images"));
    }
    if args.mu.is_nan() || args.mu < 0.0 || args.smooth == 0 || args.iters == 0 {
        return Err(input_err(
            "--mu must be >= 0; --smooth and --iters must be >= 1",
        ));
    }
    let dict = load_dict(&args.dict)?;
    let sources = args
        .images
        .iter()
        .map(|p| load_pgm(p))
        .collect::<anyhow::Result<Vec<_>>>()?;
    if sources.iter().any(|s| s.dim() != sources[0].dim()) {
        return Err(input_err("input images differ in size"));
    }
    let reference = args.reference.as_deref().map(load_pgm).transpose()?;
    if reference
        .as_ref()
        .is_some_and(|r| r.dim() != sources[0].dim())
    {
        return Err(input_err("reference and inputs differ in size"));
    }
    let mut cfg = FusionConfig::new(args.lambda, args.mu);
    cfg.smooth = args.smooth;
    cfg.iters = args.iters;
    if args.average_base {
        cfg.base_rule = BaseRule::Average;
    }
    let out = apps::fuse(&sources, &dict, &cfg)?;
    io::write_pgm(&args.out, &out.fused)?;
    if let (Some(prefix), Some(state)) = (&args.activity, &out.state) {
        let peak = state
            .sources
            .iter()
            .flat_map(|s| s.activity.iter().copied())
            .fold(0.0, f64::max);
        let scale = if peak > 0.0 { 255.0 / peak } else { 0.0 };
        for (k, s) in state.sources.iter().enumerate() {
            io::write_pgm(
                Path::new(&format!("{prefix}{k}.pgm")),
                &(&s.activity * scale),
            )?;
        }
    }
    if let Some(r) = &reference {
        println!("psnr {:.4} dB", apps::psnr(r.view(), out.fused.view())?);
    }
    Ok(())
}

fn psnr(args: &PsnrArgs) -> anyhow::Result<()> {
    let a = load_pgm(&args.reference)?;
    let b = load_pgm(&args.estimate)?;
    if a.dim() != b.dim() {
        bail!(InputError(format!(
            "images differ in size: {:?} vs {:?}",
            a.dim(),
            b.dim()
        )));
    }
    println!("{:.4}", apps::psnr(a.view(), b.view())?);
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Err(e) = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build_global()
    {
        eprintln!("error: cannot start worker threads: {e}");
        return ExitCode::FAILURE;
    }
    let result = match &cli.command {
        Command::Train(a) => train(a),
        Command::Pursue(a) => pursue(a),
        Command::Inpaint(a) => inpaint(a),
        Command::Fuse(a) => fuse(a),
        Command::Psnr(a) => psnr(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<InputError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
