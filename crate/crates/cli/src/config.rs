//! Parameter resolution. Each value comes from the first of: an explicit
//! command-line flag, the `--config` file, the manifest `defaults` block,
//! the built-in default.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::parser::ValueSource;
use clap::ArgMatches;
use serde::Deserialize;
use serde_json::Value;

use matteval::evalmap::DiscrepancyConfig;
use matteval::fusion::BlurConfig;
use matteval::io::manifest::ManifestDefaults;
use matteval::io::GridSpec;
use matteval::losses::{FocalConfig, MattingLossConfig};
use matteval::pipeline::{EvaluatorKind, PipelineConfig};
use matteval::sampler::DropoutSpec;

use crate::Params;

/// `--config` file: JSON object keyed by long flag names with `_` for `-`.
#[derive(Debug, Default, Deserialize)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub delta: Option<f64>,
    pub grid: Option<GridSpec>,
    pub w_mad: Option<f64>,
    pub w_grad: Option<f64>,
    pub threshold: Option<f64>,
    pub blur_kernel: Option<usize>,
    pub blur_sigma: Option<f64>,
    pub band_width: Option<usize>,
    pub lambda_eval: Option<f64>,
    pub focal_gamma: Option<f64>,
    pub focal_alpha: Option<f64>,
    pub dice_smooth: Option<f64>,
    pub pyramid_levels: Option<usize>,
    pub window: Option<usize>,
    pub n_refs: Option<usize>,
    pub dropout_boundary_max: Option<usize>,
    pub dropout_nonboundary_max: Option<usize>,
    pub dropout_side_min: Option<usize>,
    pub dropout_side_max: Option<usize>,
    pub coverage: Option<f64>,
    pub assign_threshold: Option<f64>,
    pub fragment_min_fill: Option<f64>,
    pub bins: Option<usize>,
    pub evaluator: Option<EvaluatorKind>,
    pub prob_dir: Option<PathBuf>,
    pub boxes: Option<PathBuf>,
    #[serde(flatten)]
    pub extra: BTreeMap<String, Value>,
}

pub fn load_file_config(path: &Path) -> Result<(FileConfig, Vec<String>)> {
    let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let mut de = serde_json::Deserializer::from_str(&text);
    let mut cfg: FileConfig = parse_config(&mut de)
        .with_context(|| format!("parsing config {}", path.display()))?;
    let warnings = cfg
        .extra
        .keys()
        .map(|k| format!("config {}: unknown key `{k}` ignored", path.display()))
        .collect();
    let base = path.parent().unwrap_or(Path::new(""));
    for p in [&mut cfg.prob_dir, &mut cfg.boxes].into_iter().flatten() {
        if p.is_relative() {
            *p = base.join(&*p);
        }
    }
    Ok((cfg, warnings))
}

fn parse_config(de: &mut serde_json::Deserializer<serde_json::de::StrRead<'_>>) -> Result<FileConfig> {
    let cfg = FileConfig::deserialize(&mut *de)?;
    de.end()?;
    Ok(cfg)
}

/// True when `id` was given on the command line, before or after the
/// subcommand.
fn explicit(top: &ArgMatches, sub: &ArgMatches, id: &str) -> bool {
    [top, sub]
        .iter()
        .any(|m| matches!(m.try_get_raw(id), Ok(Some(_))) && m.value_source(id) == Some(ValueSource::CommandLine))
}

struct Resolver<'a> {
    top: &'a ArgMatches,
    sub: &'a ArgMatches,
}

impl Resolver<'_> {
    fn pick<T>(&self, id: &str, cli: T, file: Option<T>, manifest: Option<T>) -> T {
        if explicit(self.top, self.sub, id) {
            cli
        } else {
            file.or(manifest).unwrap_or(cli)
        }
    }
}

pub fn resolve(
    p: &Params,
    top: &ArgMatches,
    sub: &ArgMatches,
    file: &FileConfig,
    defaults: &ManifestDefaults,
) -> Result<PipelineConfig> {
    let r = Resolver { top, sub };
    let grid = r.pick("grid", p.grid, file.grid, defaults.grid);
    let cfg = PipelineConfig {
        discrepancy: DiscrepancyConfig {
            rows: grid.rows,
            cols: grid.cols,
            w_mad: r.pick("w_mad", p.w_mad, file.w_mad, None),
            w_grad: r.pick("w_grad", p.w_grad, file.w_grad, None),
            grad_sigma: matteval::constants::GRAD_SIGMA,
            delta: r.pick("delta", p.delta, file.delta, defaults.delta),
        },
        threshold: r.pick("threshold", p.threshold, file.threshold, defaults.threshold),
        blur: BlurConfig {
            kernel: r.pick("blur_kernel", p.blur_kernel, file.blur_kernel, defaults.blur_kernel),
            sigma: r.pick("blur_sigma", p.blur_sigma, file.blur_sigma, defaults.blur_sigma),
        },
        band_width: r.pick("band_width", p.band_width, file.band_width, defaults.band_width),
        focal: FocalConfig {
            gamma: r.pick("focal_gamma", p.focal_gamma, file.focal_gamma, None),
            alpha: r.pick("focal_alpha", p.focal_alpha, file.focal_alpha, None),
        },
        dice_smooth: r.pick("dice_smooth", p.dice_smooth, file.dice_smooth, None),
        loss: MattingLossConfig {
            lambda_eval: r.pick("lambda_eval", p.lambda_eval, file.lambda_eval, defaults.lambda_eval),
            levels: r.pick("pyramid_levels", p.pyramid_levels, file.pyramid_levels, None),
            epsilon: matteval::constants::LOSS_EPSILON,
        },
        window: r.pick("window", p.window, file.window, None),
        n_refs: r.pick("n_refs", p.n_refs, file.n_refs, None),
        dropout: DropoutSpec {
            boundary_max: r.pick("dropout_boundary_max", p.dropout_boundary_max, file.dropout_boundary_max, None),
            nonboundary_max: r.pick(
                "dropout_nonboundary_max",
                p.dropout_nonboundary_max,
                file.dropout_nonboundary_max,
                None,
            ),
            side_min: r.pick("dropout_side_min", p.dropout_side_min, file.dropout_side_min, None),
            side_max: r.pick("dropout_side_max", p.dropout_side_max, file.dropout_side_max, None),
            seed: 0,
        },
        seed: r.pick("seed", p.seed, file.seed, defaults.seed),
        coverage: r.pick("coverage", p.coverage, file.coverage, None),
        assign_threshold: r.pick("assign_threshold", p.assign_threshold, file.assign_threshold, None),
        fragment_min_fill: r.pick("fragment_min_fill", p.fragment_min_fill, file.fragment_min_fill, None),
        bins: r.pick("bins", p.bins, file.bins, None),
        evaluator: r.pick("evaluator", p.evaluator, file.evaluator, None),
        prob_dir: p.prob_dir.clone().or_else(|| file.prob_dir.clone()),
        boxes: p.boxes.clone().or_else(|| file.boxes.clone()),
    };
    let cfg = PipelineConfig {
        dropout: DropoutSpec {
            seed: cfg.seed,
            ..cfg.dropout
        },
        ..cfg
    };
    validate(&cfg)?;
    Ok(cfg)
}

/// A parameter value outside its domain; reported like a flag parse error.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

macro_rules! usage {
    ($($t:tt)*) => {
        return Err(UsageError(format!($($t)*)).into())
    };
}

fn validate(c: &PipelineConfig) -> Result<()> {
    let unit_open = |name: &str, v: f64| -> Result<()> {
        if !(v > 0.0 && v < 1.0) {
            usage!("--{name} must lie in (0, 1), got {v}");
        }
        Ok(())
    };
    unit_open("delta", c.discrepancy.delta)?;
    unit_open("threshold", c.threshold)?;
    unit_open("focal-alpha", c.focal.alpha)?;
    if c.blur.kernel.is_multiple_of(2) {
        usage!("--blur-kernel must be odd, got {}", c.blur.kernel);
    }
    if !(c.blur.sigma > 0.0) {
        usage!("--blur-sigma must be positive, got {}", c.blur.sigma);
    }
    if c.band_width == 0 {
        usage!("--band-width must be at least 1");
    }
    if c.bins == 0 {
        usage!("--bins must be at least 1");
    }
    if c.loss.levels == 0 {
        usage!("--pyramid-levels must be at least 1");
    }
    if c.dropout.side_min == 0 || c.dropout.side_min > c.dropout.side_max {
        usage!(
            "dropout side range [{}, {}] is empty",
            c.dropout.side_min,
            c.dropout.side_max
        );
    }
    for (name, v) in [
        ("coverage", c.coverage),
        ("assign-threshold", c.assign_threshold),
        ("fragment-min-fill", c.fragment_min_fill),
    ] {
        if !(0.0..=1.0).contains(&v) {
            usage!("--{name} must lie in [0, 1], got {v}");
        }
    }
    Ok(())
}
