//! Command-line driver: loads an experiment configuration, runs it and writes
//! a run directory with `config.json`, `summary.json` and data files.

pub mod config;
pub mod run;

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

pub use config::ExperimentConfig;
pub use run::{execute, RunOutput};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad arguments or configuration; exit code 2.
    #[error("{0}")]
    Usage(String),
    /// The computation itself failed; exit code 1.
    #[error(transparent)]
    Core(#[from] isonbhd::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(_) => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "isonbhd", version, about = "Isolating-neighborhood experiments in the restricted three-body problem")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub opts: Opts,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Sweep the boundary of the neighborhood with tangent trajectories.
    Verify,
    /// Bisect a velocity circle for the boundary between left and right exits.
    Bisect,
    /// Track an orbit through section crossings with velocity corrections.
    Track,
    /// Classify a velocity sphere forward and backward and intersect the boundaries.
    Sphere,
    /// The planar saddle example in the unit square.
    Toy,
    /// Convert a trajectory table between frames.
    Convert,
    /// Zero-velocity curves near L2.
    Hill,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Verify => "verify",
            Command::Bisect => "bisect",
            Command::Track => "track",
            Command::Sphere => "sphere",
            Command::Toy => "toy",
            Command::Convert => "convert",
            Command::Hill => "hill",
        }
    }
}

#[derive(Debug, Clone, clap::Args)]
pub struct Opts {
    /// Experiment configuration (JSON).
    #[arg(long, global = true, env = "ISONBHD_CONFIG")]
    pub config: Option<PathBuf>,
    /// Run directory; defaults to the config's `output_dir`, then `runs/<kind>-<hash>`.
    #[arg(long, global = true, env = "ISONBHD_OUT")]
    pub out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true, env = "ISONBHD_JOBS")]
    pub jobs: Option<usize>,
    /// Relative and absolute integrator tolerance.
    #[arg(long, global = true, env = "ISONBHD_TOL")]
    pub tol: Option<f64>,
}

/// Loads the config named by the options and applies the overrides.
pub fn load_config(command: Command, opts: &Opts) -> Result<(ExperimentConfig, PathBuf), CliError> {
    let path = opts.config.as_ref().ok_or_else(|| CliError::Usage("--config is required".into()))?;
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let mut cfg = ExperimentConfig::from_json(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    if cfg.experiment.name() != command.name() {
        return Err(CliError::Usage(format!(
            "{} holds a `{}` experiment, not `{}`",
            path.display(),
            cfg.experiment.name(),
            command.name()
        )));
    }
    if let Some(tol) = opts.tol {
        cfg.integrator.rtol = tol;
        cfg.integrator.atol = tol;
    }
    if opts.jobs.is_some() {
        cfg.jobs = opts.jobs;
    }
    if opts.out.is_some() {
        cfg.output_dir = opts.out.clone();
    }
    cfg.validate()?;
    let base = path.parent().map_or_else(|| PathBuf::from("."), Path::to_path_buf);
    Ok((cfg, base))
}

/// Writes `config.json`, `summary.json` and the data files into `dir`.
pub fn write_run(dir: &Path, cfg: &ExperimentConfig, out: &RunOutput) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut canon = cfg.clone();
    canon.output_dir = None;
    canon.jobs = None;
    let mut text = serde_json::to_string_pretty(&canon)?;
    text.push('\n');
    std::fs::write(dir.join("config.json"), text)?;
    let mut summary = out.summary.clone();
    summary["line"] = out.line.clone().into();
    let mut text = serde_json::to_string_pretty(&summary)?;
    text.push('\n');
    std::fs::write(dir.join("summary.json"), text)?;
    for (name, body) in &out.files {
        std::fs::write(dir.join(name), body)?;
    }
    Ok(())
}

/// Runs the command line and returns the process exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run_command(cli.command, &cli.opts) {
        Ok(pass) => i32::from(!pass),
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn run_command(command: Command, opts: &Opts) -> Result<bool, CliError> {
    let (cfg, base) = load_config(command, opts)?;
    let dir = cfg.output_dir.clone().unwrap_or_else(|| PathBuf::from(format!("runs/{}-{}", command.name(), &cfg.sha256()[..12])));
    let jobs = cfg.jobs.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build().map_err(|e| CliError::Usage(e.to_string()))?;
    let out = pool.install(|| execute(&cfg, &base))?;
    write_run(&dir, &cfg, &out).map_err(|e| CliError::Usage(format!("{}: {e}", dir.display())))?;
    // results are already on disk; a closed stdout is not an error
    let mut stdout = std::io::stdout().lock();
    let _ = writeln!(stdout, "{}", out.line);
    let _ = writeln!(stdout, "{} ({})", if out.pass { "PASS" } else { "FAIL" }, dir.display());
    Ok(out.pass)
}
