use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{ArgMatches, CommandFactory, FromArgMatches, Parser, Subcommand};
use log::warn;

use matteval::constants::{self, pyramid_weight};
use matteval::io::{load_manifest, GridSpec};
use matteval::pipeline::{self, EvaluatorKind, Run};

mod config;

const EXIT_OK: u8 = 0;
const EXIT_FATAL: u8 = 1;
const EXIT_PARTIAL: u8 = 2;
const EXIT_USAGE: u8 = 64;

fn after_help() -> String {
    let weights: Vec<String> = (1..=constants::PYRAMID_LEVELS)
        .map(|s| pyramid_weight(s).to_string())
        .collect();
    format!(
        "Fixed constants:\n  Laplacian loss level weights 2^(s-1)/5, s = 1..{}: {}\n  \
         Grad metric sigma {}, Conn threshold step {} and tolerance {}\n\n\
         Parameter precedence: command-line flag, then --config file, then the manifest \
         `defaults` block, then the built-in default.\n\
         Exit status: 0 success, 1 fatal error, 2 some frames skipped, 64 usage error.",
        constants::PYRAMID_LEVELS,
        weights.join(", "),
        constants::GRAD_SIGMA,
        constants::CONN_STEP,
        constants::CONN_TOLERANCE,
    )
}

/// Matte quality evaluation, dual-branch fusion and training-data tools.
#[derive(Parser, Debug)]
#[command(name = "matteval", version, after_help = after_help())]
struct Cli {
    #[command(subcommand)]
    command: Command,

    #[command(flatten)]
    params: Params,
}

#[derive(clap::Args, Debug, Clone)]
pub struct Params {
    /// Seed for every random draw.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; 0 uses one per core.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    /// JSON file of parameter overrides, keyed by flag name with `_`.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Leave the timestamp out of the report.
    #[arg(long, global = true)]
    pub no_timestamps: bool,
    /// Output directory; the report is written to `<out>/report.json`.
    #[arg(long, global = true, default_value = "matteval-out")]
    pub out: PathBuf,

    /// Patch discrepancy threshold for pseudo ground truth.
    #[arg(long, global = true, default_value_t = constants::DELTA, help_heading = "Evaluation")]
    pub delta: f64,
    /// Patch grid as ROWSxCOLS.
    #[arg(long, global = true, default_value_t = GridSpec { rows: constants::GRID_ROWS, cols: constants::GRID_COLS }, help_heading = "Evaluation")]
    pub grid: GridSpec,
    /// Weight of MAD in the patch discrepancy.
    #[arg(long, global = true, default_value_t = constants::WEIGHT_MAD, help_heading = "Evaluation")]
    pub w_mad: f64,
    /// Weight of Grad in the patch discrepancy.
    #[arg(long, global = true, default_value_t = constants::WEIGHT_GRAD, help_heading = "Evaluation")]
    pub w_grad: f64,
    /// Error probabilities below this are reliable.
    #[arg(long, global = true, default_value_t = constants::PROB_THRESHOLD, help_heading = "Evaluation")]
    pub threshold: f64,
    /// Boundary band width in pixels for BER.
    #[arg(long, global = true, default_value_t = constants::BAND_WIDTH, help_heading = "Evaluation")]
    pub band_width: usize,
    /// Probability map source: auto, oracle or precomputed.
    #[arg(long, global = true, default_value = "auto", help_heading = "Evaluation")]
    pub evaluator: EvaluatorKind,
    /// Directory of precomputed probability maps (`<id>.pfm`, `v/<id>.pfm`, `i/<id>.pfm`).
    #[arg(long, global = true, help_heading = "Evaluation")]
    pub prob_dir: Option<PathBuf>,

    /// Fusion mask blur kernel size (odd).
    #[arg(long, global = true, default_value_t = constants::BLUR_KERNEL, help_heading = "Fusion")]
    pub blur_kernel: usize,
    /// Fusion mask blur sigma.
    #[arg(long, global = true, default_value = "5.0", help_heading = "Fusion")]
    pub blur_sigma: f64,

    /// Weight of the evaluation guidance term.
    #[arg(long, global = true, default_value_t = constants::LAMBDA_EVAL, help_heading = "Losses")]
    pub lambda_eval: f64,
    /// Focal loss focusing exponent.
    #[arg(long, global = true, default_value_t = constants::FOCAL_GAMMA, help_heading = "Losses")]
    pub focal_gamma: f64,
    /// Focal loss weight of the reliable class.
    #[arg(long, global = true, default_value_t = constants::FOCAL_ALPHA, help_heading = "Losses")]
    pub focal_alpha: f64,
    /// Dice loss smoothing constant.
    #[arg(long, global = true, default_value_t = constants::DICE_SMOOTH, help_heading = "Losses")]
    pub dice_smooth: f64,
    /// Laplacian pyramid levels.
    #[arg(long, global = true, default_value_t = constants::PYRAMID_LEVELS, help_heading = "Losses")]
    pub pyramid_levels: usize,

    /// Training window length in frames.
    #[arg(long, global = true, default_value_t = constants::WINDOW, help_heading = "Sampling")]
    pub window: usize,
    /// Reference frames drawn outside the window.
    #[arg(long, global = true, default_value_t = pipeline::DEFAULT_N_REFS, help_heading = "Sampling")]
    pub n_refs: usize,
    /// Boundary dropout patches are drawn from 0..=N.
    #[arg(long, global = true, default_value_t = constants::DROPOUT_BOUNDARY_MAX, help_heading = "Sampling")]
    pub dropout_boundary_max: usize,
    /// Non-boundary dropout patches are drawn from 0..=N.
    #[arg(long, global = true, default_value_t = constants::DROPOUT_NONBOUNDARY_MAX, help_heading = "Sampling")]
    pub dropout_nonboundary_max: usize,
    /// Smallest dropout patch side in pixels.
    #[arg(long, global = true, default_value_t = constants::DROPOUT_SIDE_MIN, help_heading = "Sampling")]
    pub dropout_side_min: usize,
    /// Largest dropout patch side in pixels.
    #[arg(long, global = true, default_value_t = constants::DROPOUT_SIDE_MAX, help_heading = "Sampling")]
    pub dropout_side_max: usize,

    /// A mask is redundant when another covers more than this share of it.
    #[arg(long, global = true, default_value_t = constants::COVERAGE_THRESHOLD, help_heading = "Curation")]
    pub coverage: f64,
    /// Smallest share of a mask inside a box for it to join that instance.
    #[arg(long, global = true, default_value_t = constants::ASSIGN_THRESHOLD, help_heading = "Curation")]
    pub assign_threshold: f64,
    /// Instances filling less than this share of their box are fragments.
    #[arg(long, global = true, default_value_t = constants::FRAGMENT_MIN_FILL, help_heading = "Curation")]
    pub fragment_min_fill: f64,
    /// JSON-lines detector boxes.
    #[arg(long, global = true, help_heading = "Curation")]
    pub boxes: Option<PathBuf>,

    /// Bins along the ground-truth axis.
    #[arg(long, global = true, default_value_t = constants::CORRELATION_BINS, help_heading = "Analysis")]
    pub bins: usize,
}

#[derive(Subcommand, Debug, Clone)]
enum Command {
    /// MAD, MSE, Grad and Conn per frame, dtSSD over the sequence.
    Evaluate { manifest: PathBuf },
    /// Evaluation maps and oracle probability maps from ground truth.
    PseudoGt { manifest: PathBuf },
    /// Fuse the video and image branch mattes under their evaluation maps.
    Fuse { manifest: PathBuf },
    /// Unreliable-pixel rates overall, in the foreground and at the boundary.
    Nonref { manifest: PathBuf },
    /// Masked matting objective and evaluator objective.
    Loss { manifest: PathBuf },
    /// Reference-frame sampling with patch dropout.
    Augment { manifest: PathBuf },
    /// Redundant mask removal and grouping into person instances.
    CurateMasks { manifest: PathBuf },
    /// Correlation between evaluator output and ground-truth discrepancy.
    Analyze { manifest: PathBuf },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Evaluate { .. } => "evaluate",
            Command::PseudoGt { .. } => "pseudo-gt",
            Command::Fuse { .. } => "fuse",
            Command::Nonref { .. } => "nonref",
            Command::Loss { .. } => "loss",
            Command::Augment { .. } => "augment",
            Command::CurateMasks { .. } => "curate-masks",
            Command::Analyze { .. } => "analyze",
        }
    }

    fn manifest(&self) -> &PathBuf {
        match self {
            Command::Evaluate { manifest }
            | Command::PseudoGt { manifest }
            | Command::Fuse { manifest }
            | Command::Nonref { manifest }
            | Command::Loss { manifest }
            | Command::Augment { manifest }
            | Command::CurateMasks { manifest }
            | Command::Analyze { manifest } => manifest,
        }
    }
}

fn execute(cli: &Cli, matches: &ArgMatches) -> Result<u8> {
    let p = &cli.params;
    let (_, sub) = matches.subcommand().expect("subcommand is required");
    let (file, mut extra_warnings) = match &p.config {
        Some(path) => config::load_file_config(path)?,
        None => Default::default(),
    };
    let manifest_path = cli.command.manifest();
    let loaded = load_manifest(manifest_path).with_context(|| format!("loading {}", manifest_path.display()))?;
    let cfg = config::resolve(p, matches, sub, &file, &loaded.manifest.defaults)?;
    let threads = if p.threads == 0 { file.threads.unwrap_or(0) } else { p.threads };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .context("building the worker pool")?;
    let run = Run {
        manifest: &loaded,
        config: &cfg,
        out_dir: &p.out,
    };
    let op = match cli.command {
        Command::Evaluate { .. } => pipeline::evaluate,
        Command::PseudoGt { .. } => pipeline::pseudo_gt,
        Command::Fuse { .. } => pipeline::fuse,
        Command::Nonref { .. } => pipeline::nonref,
        Command::Loss { .. } => pipeline::loss,
        Command::Augment { .. } => pipeline::augment,
        Command::CurateMasks { .. } => pipeline::curate_masks,
        Command::Analyze { .. } => pipeline::analyze,
    };
    let mut report = pool.install(|| op(&run))?;
    for w in &extra_warnings {
        warn!("{w}");
    }
    report.warnings.append(&mut extra_warnings);
    if !p.no_timestamps {
        report.stamp_now();
    }
    std::fs::create_dir_all(&p.out).with_context(|| format!("creating {}", p.out.display()))?;
    let report_path = p.out.join("report.json");
    report.write(&report_path)?;
    println!(
        "{}: {} frame(s) processed, {} skipped; report at {}",
        cli.command.name(),
        report.frames.len(),
        report.skipped.len(),
        report_path.display()
    );
    Ok(if report.is_partial() { EXIT_PARTIAL } else { EXIT_OK })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let mut command = Cli::command();
    let matches = match command.try_get_matches_from_mut(std::env::args_os()) {
        Ok(m) => m,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            if code == EXIT_USAGE && e.kind() != ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand {
                eprintln!("\n{}", command.render_help());
            }
            return ExitCode::from(code);
        }
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(EXIT_USAGE);
        }
    };
    match execute(&cli, &matches) {
        Ok(code) => ExitCode::from(code),
        Err(e) if e.downcast_ref::<config::UsageError>().is_some() => {
            eprintln!("error: {e:#}\n\n{}", Cli::command().render_help());
            ExitCode::from(EXIT_USAGE)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_FATAL)
        }
    }
}
