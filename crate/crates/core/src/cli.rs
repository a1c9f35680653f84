//! The `msled` command-line tool.
//!
//! Configuration precedence is built-in defaults, then a `key=value` file
//! given with `--config`, then individual flags.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or format error,
//! 3 numerical failure.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::descriptor::{compute_descriptor, PipelineConfig};
use crate::imaging::load_image;
use crate::metric::per_scale_distances;
use crate::retrieval::{
    build_index, evaluate_with_distances, load_index, query, save_index, scan_dataset, DistanceMatrix, Labeling,
};
use crate::Error;

pub const EXIT_USAGE: u8 = 1;
pub const EXIT_DATA: u8 = 2;
pub const EXIT_NUMERICAL: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "msled", version, about = "Texture retrieval with multiscale local extrema descriptors")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute descriptors for every image of a dataset and write an index file
    Index(IndexArgs),
    /// Retrieve the K closest index entries to an image
    Query(QueryArgs),
    /// Compute the average retrieval rate of an index
    Evaluate(EvaluateArgs),
    /// Print the distance between two index entries
    Distance(DistanceArgs),
}

#[derive(Debug, Args)]
pub struct IndexArgs {
    /// Dataset root directory
    #[arg(long)]
    pub dataset: PathBuf,
    /// Output index file
    #[arg(long)]
    pub out: PathBuf,
    /// Class labeling rule: "subdir" (parent directory name) or "stem" (file
    /// name without its trailing .NNNN index)
    #[arg(long, default_value = "subdir")]
    pub labeling: String,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
    /// Worker threads (default: all cores)
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Args, Default)]
pub struct PipelineArgs {
    /// Plain-text key=value configuration file (keys: window, block_size,
    /// overlap, scales, epsilon_scale, strict_extrema)
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Extrema detection window, odd and >= 3 [default: 3]
    #[arg(long)]
    pub window: Option<usize>,
    /// Block size in pixels [default: 32]
    #[arg(long)]
    pub block_size: Option<usize>,
    /// Block overlap fraction in [0, 1) [default: 0.5]
    #[arg(long)]
    pub overlap: Option<f64>,
    /// Comma-separated scale factors, fractions allowed [default: 2/3,1,3/2]
    #[arg(long)]
    pub scales: Option<String>,
    /// Covariance regularization multiplier [default: 1e-6]
    #[arg(long)]
    pub epsilon_scale: Option<f64>,
    /// Require extrema to strictly dominate their window [default: true]
    #[arg(long)]
    pub strict_extrema: Option<bool>,
}

#[derive(Debug, Args)]
pub struct QueryArgs {
    /// Index file
    #[arg(long)]
    pub index: PathBuf,
    /// Probe image (PPM or PNG)
    #[arg(long)]
    pub image: PathBuf,
    /// Number of results
    #[arg(long)]
    pub k: usize,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Index file
    #[arg(long)]
    pub index: PathBuf,
    /// Number of retrieved images per query [default: images per class]
    #[arg(long)]
    pub k: Option<usize>,
    /// Write the per-class CSV here instead of standard output
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Worker threads (default: all cores)
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct DistanceArgs {
    /// Index file
    #[arg(long)]
    pub index: PathBuf,
    /// First image id
    pub id_a: u64,
    /// Second image id
    pub id_b: u64,
}

/// Failure carrying the process exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        Self {
            code: exit_code(&e),
            message: e.to_string(),
        }
    }
}

/// Exit code for a library error.
pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidParameter(_) | Error::InvalidScale { .. } | Error::KOutOfRange { .. } => EXIT_USAGE,
        Error::NotPositiveDefinite | Error::DimensionMismatch { .. } => EXIT_NUMERICAL,
        Error::ImageFailed { source, .. } => exit_code(source),
        _ => EXIT_DATA,
    }
}

type CliResult<T = ()> = Result<T, CliError>;

/// Parses a scale list such as `2/3,1,3/2`.
pub fn parse_scales(s: &str) -> Result<Vec<f64>, Error> {
    s.split(',')
        .map(str::trim)
        .map(|tok| {
            let bad = || Error::InvalidParameter(format!("invalid scale {tok:?}"));
            match tok.split_once('/') {
                Some((n, d)) => {
                    let n: f64 = n.trim().parse().map_err(|_| bad())?;
                    let d: f64 = d.trim().parse().map_err(|_| bad())?;
                    Ok(n / d)
                }
                None => tok.parse().map_err(|_| bad()),
            }
        })
        .collect()
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, Error> {
    value
        .parse()
        .map_err(|_| Error::InvalidParameter(format!("invalid value {value:?} for {key}")))
}

/// Applies `key=value` lines to `cfg`. Blank lines and `#` comments are ignored.
pub fn apply_config_text(cfg: &mut PipelineConfig, text: &str) -> Result<(), Error> {
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::InvalidParameter(format!("config line {}: expected key=value", lineno + 1)))?;
        let (key, value) = (key.trim(), value.trim());
        match key {
            "window" | "w" => cfg.window = parse_value(key, value)?,
            "block_size" | "W" => cfg.block_size = parse_value(key, value)?,
            "overlap" => cfg.overlap = parse_value(key, value)?,
            "scales" => cfg.scales = parse_scales(value)?,
            "epsilon_scale" => cfg.epsilon_scale = parse_value(key, value)?,
            "strict_extrema" => cfg.strict_extrema = parse_value(key, value)?,
            other => {
                return Err(Error::InvalidParameter(format!(
                    "config line {}: unknown key {other:?}",
                    lineno + 1
                )))
            }
        }
    }
    Ok(())
}

impl PipelineArgs {
    /// Resolves defaults, the config file and flags into one configuration.
    pub fn resolve(&self) -> Result<PipelineConfig, Error> {
        let mut cfg = PipelineConfig::default();
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::InvalidParameter(format!("cannot read config {}: {e}", path.display())))?;
            apply_config_text(&mut cfg, &text)?;
        }
        if let Some(w) = self.window {
            cfg.window = w;
        }
        if let Some(b) = self.block_size {
            cfg.block_size = b;
        }
        if let Some(o) = self.overlap {
            cfg.overlap = o;
        }
        if let Some(s) = &self.scales {
            cfg.scales = parse_scales(s)?;
        }
        if let Some(e) = self.epsilon_scale {
            cfg.epsilon_scale = e;
        }
        if let Some(s) = self.strict_extrema {
            cfg.strict_extrema = s;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn with_jobs<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> CliResult<T> {
    match jobs {
        None => Ok(f()),
        Some(0) => Err(CliError::usage("--jobs must be at least 1")),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::usage(format!("cannot start {n} workers: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

fn require_file(path: &Path, what: &str) -> CliResult {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError {
            code: EXIT_DATA,
            message: format!("{what} {} does not exist", path.display()),
        })
    }
}

fn cmd_index(args: &IndexArgs, out: &mut dyn Write) -> CliResult {
    let labeling: Labeling = args.labeling.parse()?;
    let cfg = args.pipeline.resolve()?;
    if !args.dataset.is_dir() {
        return Err(CliError {
            code: EXIT_DATA,
            message: format!("dataset directory {} does not exist", args.dataset.display()),
        });
    }
    let manifest = scan_dataset(&args.dataset, labeling)?;
    for w in &manifest.warnings {
        eprintln!("warning: {w}");
    }
    let start = Instant::now();
    let index = with_jobs(args.jobs, || build_index(&manifest, &cfg))??;
    let fe = start.elapsed().as_secs_f64();
    save_index(&index, &args.out)?;

    let _ = writeln!(out, "images (N_t): {}", manifest.total());
    let _ = writeln!(out, "classes (N_c): {}", manifest.class_count());
    match manifest.relevant_count() {
        Some(n) => {
            let _ = writeln!(out, "images per class (N_R): {n}");
        }
        None => {
            let _ = writeln!(out, "images per class (N_R): not uniform");
        }
    }
    let _ = writeln!(
        out,
        "feature extraction: {fe:.3} s total, {:.4} s/image",
        fe / manifest.total() as f64
    );
    let _ = writeln!(out, "wrote {}", args.out.display());
    Ok(())
}

fn cmd_evaluate(args: &EvaluateArgs, out: &mut dyn Write) -> CliResult {
    require_file(&args.index, "index")?;
    let index = load_index(&args.index)?;
    let mut sizes = std::collections::BTreeMap::new();
    for e in index.entries() {
        *sizes.entry(e.label.as_str()).or_insert(0usize) += 1;
    }
    let k = match args.k {
        Some(k) => k,
        None => {
            let mut it = sizes.values();
            let first = *it.next().expect("index is non-empty");
            if !it.all(|&n| n == first) {
                return Err(CliError::usage("class sizes differ; pass --k explicitly"));
            }
            first
        }
    };
    if k == 0 || k > index.len() {
        return Err(Error::KOutOfRange { k, len: index.len() }.into());
    }
    let start = Instant::now();
    let report = with_jobs(args.jobs, || {
        DistanceMatrix::compute(&index).and_then(|d| evaluate_with_distances(&index, &d, k))
    })??;
    let dm = start.elapsed().as_secs_f64();
    let csv = report.to_csv();

    let _ = writeln!(out, "K: {k}");
    if !report.uniform_relevant {
        let _ = writeln!(out, "note: class sizes differ, each query normalized by its own class size");
    }
    let _ = writeln!(
        out,
        "dissimilarity measurement: {dm:.3} s total, {:.4} s/image",
        dm / index.len() as f64
    );
    let _ = writeln!(out, "ARR: {:.6}", report.arr);
    match &args.csv {
        Some(path) => {
            std::fs::write(path, csv).map_err(Error::from)?;
            let _ = writeln!(out, "wrote {}", path.display());
        }
        None => {
            let _ = write!(out, "{csv}");
        }
    }
    Ok(())
}

fn cmd_query(args: &QueryArgs, out: &mut dyn Write) -> CliResult {
    require_file(&args.index, "index")?;
    require_file(&args.image, "image")?;
    let index = load_index(&args.index)?;
    if args.k == 0 || args.k > index.len() {
        return Err(Error::KOutOfRange {
            k: args.k,
            len: index.len(),
        }
        .into());
    }
    let img = load_image(&args.image)?;
    let probe = compute_descriptor(&img, index.config())?;
    let result = query(&index, &probe, args.k)?;
    for (rank, hit) in result.hits.iter().enumerate() {
        let label = &index.get(hit.id).expect("hit from index").label;
        let _ = writeln!(out, "{},{},{},{:.6}", rank + 1, hit.id, label, hit.distance);
    }
    Ok(())
}

fn cmd_distance(args: &DistanceArgs, out: &mut dyn Write) -> CliResult {
    require_file(&args.index, "index")?;
    let index = load_index(&args.index)?;
    let a = index.get(args.id_a).ok_or(Error::UnknownId(args.id_a))?;
    let b = index.get(args.id_b).ok_or(Error::UnknownId(args.id_b))?;
    let parts = per_scale_distances(&a.descriptor, &b.descriptor)?;
    let total: f64 = parts.iter().sum();
    let _ = writeln!(out, "total,{total:.12}");
    for (scale, d) in index.config().scales.iter().zip(&parts) {
        let _ = writeln!(out, "scale,{scale},{d:.12}");
    }
    Ok(())
}

/// Runs a parsed invocation, writing human-readable output to `out`.
pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<(), CliError> {
    match &cli.command {
        Command::Index(a) => cmd_index(a, out),
        Command::Query(a) => cmd_query(a, out),
        Command::Evaluate(a) => cmd_evaluate(a, out),
        Command::Distance(a) => cmd_distance(a, out),
    }
}

/// Entry point for the binary.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match run(&cli, &mut out) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let _ = out.flush();
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
