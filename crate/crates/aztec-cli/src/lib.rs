//! Command-line front end: argument parsing, run manifests and replay.
//!
//! Every run writes a [`RunManifest`] recording its arguments, inputs and output hashes;
//! `verify --manifest FILE` re-executes it and compares bytes.

pub mod commands;
pub mod config;
pub mod verify;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use aztec_dimers::io::{sha256_hex, to_json, OutputRecord, RunManifest};
use clap::{Args, Parser, Subcommand, ValueEnum};

pub const STDOUT_LABEL: &str = "<stdout>";

#[derive(Debug, Parser)]
#[command(name = "aztec", version, about = "Two-periodic Aztec diamond: sampling, forests, kernels and statistics")]
pub struct Cli {
    /// TOML file with quadrature and Airy numerics settings.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads; defaults to AZTEC_THREADS, then the number of cores.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Manifest path; defaults to `<out>.manifest.json` or `.aztec/<command>-<time>.manifest.json`.
    #[arg(long, global = true)]
    pub manifest_out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw an exact sample by domino shuffling.
    Sample(SampleArgs),
    /// Render a tiling file as SVG.
    Render(RenderArgs),
    /// Temperley forest of a tiling, optionally resampled off the backbone.
    Forest(ForestArgs),
    /// Inverse Kasteleyn entries by dense solve and by the explicit formula.
    Kernel(KernelArgs),
    /// Monte Carlo statistics over independent samples.
    Stats(StatsArgs),
    /// Tracy–Widom GUE distribution and Airy kernel values.
    Airy(AiryArgs),
    /// Run the acceptance suite, or replay a manifest.
    Verify(VerifyArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Sample(_) => "sample",
            Command::Render(_) => "render",
            Command::Forest(_) => "forest",
            Command::Kernel(_) => "kernel",
            Command::Stats(_) => "stats",
            Command::Airy(_) => "airy",
            Command::Verify(_) => "verify",
        }
    }
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long)]
    pub n: i32,
    #[arg(long, default_value_t = 0.5)]
    pub a: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Tiling JSON; printed to stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ForestChoice {
    South,
    North,
    Both,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum RegionArg {
    Rs,
    RsStar,
    PrsStar,
    Meso,
    Cap,
    Cross,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    /// Tiling JSON written by `sample`.
    pub input: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Draw the full Temperley forest(s).
    #[arg(long, value_enum)]
    pub forest: Option<ForestChoice>,
    /// Draw the backbone paths.
    #[arg(long, value_enum)]
    pub backbone: Option<ForestChoice>,
    #[arg(long, value_enum)]
    pub region: Vec<RegionArg>,
    /// Pixels per lattice unit.
    #[arg(long, default_value_t = 4.0)]
    pub scale: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum DirectionArg {
    South,
    North,
}

#[derive(Debug, Args)]
pub struct ForestArgs {
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = DirectionArg::South)]
    pub direction: DirectionArg,
    /// Resample everything off the backbone with Wilson's algorithm using this seed.
    #[arg(long)]
    pub resample: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum KernelMethod {
    Direct,
    Formula,
    Both,
}

#[derive(Debug, Args)]
pub struct KernelArgs {
    #[arg(long, default_value_t = 8)]
    pub n: i32,
    #[arg(long, default_value_t = 0.5)]
    pub a: f64,
    #[arg(long, value_enum, default_value_t = KernelMethod::Both)]
    pub method: KernelMethod,
    /// `x1,x2,y1,y2` for white `(x1,x2)` and black `(y1,y2)`; repeatable.
    #[arg(long, allow_hyphen_values = true)]
    pub entry: Vec<String>,
    /// Print the expected-height profile along this row instead of kernel entries.
    #[arg(long, allow_hyphen_values = true)]
    pub profile_row: Option<i32>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum StatsCheck {
    Heightmatch,
    Backtrack,
    Airy,
    Onion,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long, value_enum)]
    pub check: StatsCheck,
    #[arg(long)]
    pub n: i32,
    #[arg(long, default_value_t = 0.5)]
    pub a: f64,
    #[arg(long, default_value_t = 100)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Rescaled times for `airy`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "0")]
    pub times: Vec<f64>,
    /// Number of top paths for `airy`.
    #[arg(long, default_value_t = 2)]
    pub paths: usize,
    /// Onion box half-width; defaults to the threshold for one layer.
    #[arg(long)]
    pub r1: Option<f64>,
    /// Onion box half-height; defaults to `n^{1/3}`.
    #[arg(long)]
    pub r2: Option<f64>,
    /// Per-sample CSV; the summary goes to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AiryArgs {
    #[arg(long, default_value_t = -4.0, allow_hyphen_values = true)]
    pub from: f64,
    #[arg(long, default_value_t = 2.0, allow_hyphen_values = true)]
    pub to: f64,
    #[arg(long, default_value_t = 0.5)]
    pub step: f64,
    /// Add the stationary kernel diagonal `K_Ai(s, s)`.
    #[arg(long)]
    pub kernel: bool,
    /// Print mean and variance of the distribution.
    #[arg(long)]
    pub moments: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Exhaustive and exact checks only.
    #[arg(long)]
    pub quick: bool,
    /// Replay this manifest and compare output hashes instead of running the suite.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

/// What a command produced.
#[derive(Debug, Default)]
pub struct Report {
    pub stdout: String,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub n: Option<i32>,
    pub a: Option<f64>,
    pub seed: Option<u64>,
    /// Whether stdout is a deterministic function of the arguments.
    pub stdout_stable: bool,
    pub exit: i32,
}

/// Paths on the command line are relative to `base`.
pub struct RunContext {
    pub base: PathBuf,
    pub config: config::Config,
}

impl RunContext {
    pub fn path(&self, p: &Path) -> PathBuf {
        self.base.join(p)
    }
}

fn thread_count(cli: &Cli) -> Option<usize> {
    cli.threads.or_else(|| std::env::var("AZTEC_THREADS").ok().and_then(|s| s.parse().ok())).filter(|&t| t > 0)
}

/// Runs a parsed command without writing a manifest.
pub fn execute(cli: &Cli, base: &Path) -> Result<Report> {
    let mut config_inputs = Vec::new();
    let config = match &cli.config {
        Some(p) => {
            let p = base.join(p);
            config_inputs.push(p.clone());
            config::Config::load(&p)?
        }
        None => config::Config::default(),
    };
    let ctx = RunContext { base: base.to_path_buf(), config };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = thread_count(cli) {
        builder = builder.num_threads(t);
    }
    let pool = builder.build().context("building the worker pool")?;
    let mut report = pool.install(|| commands::dispatch(&cli.command, &ctx))?;
    report.inputs.extend(config_inputs);
    Ok(report)
}

fn default_manifest_path(cli: &Cli, base: &Path, started: u128) -> PathBuf {
    if let Some(p) = &cli.manifest_out {
        return base.join(p);
    }
    let out = match &cli.command {
        Command::Sample(a) => a.out.as_ref(),
        Command::Render(a) => a.out.as_ref(),
        Command::Forest(a) => a.out.as_ref(),
        Command::Kernel(a) => a.out.as_ref(),
        Command::Stats(a) => a.out.as_ref(),
        Command::Airy(a) => a.out.as_ref(),
        Command::Verify(_) => None,
    };
    match out {
        Some(o) => {
            let mut s = base.join(o).into_os_string();
            s.push(".manifest.json");
            PathBuf::from(s)
        }
        None => base.join(".aztec").join(format!("{}-{started}.manifest.json", cli.command.name())),
    }
}

fn write_manifest(cli: &Cli, args: Vec<String>, base: &Path, report: &Report, mut m: RunManifest) -> Result<PathBuf> {
    m.n = report.n;
    m.a = report.a;
    m.seed = report.seed;
    for p in &report.inputs {
        m.record_input(p)?;
    }
    for p in &report.outputs {
        m.record(p)?;
    }
    if report.stdout_stable {
        m.outputs.push(OutputRecord { path: STDOUT_LABEL.into(), sha256: sha256_hex(report.stdout.as_bytes()) });
    }
    m.finish();
    m.args = args;
    let path = default_manifest_path(cli, base, m.started_unix_ms);
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(&path, to_json(&m)?)?;
    Ok(path)
}

/// Parses `argv` (program name first), runs it with paths relative to `base`, writes the
/// manifest and returns the exit code. Usage errors return 2.
pub fn run_in<I, T>(argv: I, base: &Path, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            let _ = if e.use_stderr() { stderr.write_all(text.as_bytes()) } else { stdout.write_all(text.as_bytes()) };
            return e.exit_code();
        }
    };
    let args: Vec<String> = argv.iter().skip(1).map(|s| s.to_string_lossy().into_owned()).collect();
    let mut manifest = RunManifest::new(cli.command.name(), Vec::new(), base);
    manifest.versions.push(("aztec-cli".into(), env!("CARGO_PKG_VERSION").into()));
    let report = match execute(&cli, base) {
        Ok(r) => r,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e:#}");
            return 1;
        }
    };
    let _ = stdout.write_all(report.stdout.as_bytes());
    if let Err(e) = write_manifest(&cli, args, base, &report, manifest) {
        let _ = writeln!(stderr, "error: writing manifest: {e:#}");
        return 1;
    }
    report.exit
}

/// Entry point for the binary.
pub fn run_main() -> i32 {
    let base = std::env::current_dir().unwrap_or_else(|_| PathBuf::from("."));
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_in(std::env::args_os(), &base, &mut stdout.lock(), &mut stderr.lock())
}
