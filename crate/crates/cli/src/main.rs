//! `kellerpath` command-line front end.

mod commands;
mod config;
mod manifest;
mod svg;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "kellerpath", version, about = "Radial Neumann solutions of -Δu + u = e^(mu (u - 1))")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Radial Neumann eigenvalues: CSV `i,lambda,cubic_integral`.
    Eigs,
    /// Increasing or decreasing monotone solution.
    Monotone,
    /// Glued k-layer solution.
    Glue,
    /// Bifurcation branch out of (lambda_i, 1).
    Branch,
    /// Asymptotic checks; exits 1 if any check fails.
    Verify,
    /// Summary of an existing output directory.
    Report,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Eigs => "eigs",
            Command::Monotone => "monotone",
            Command::Glue => "glue",
            Command::Branch => "branch",
            Command::Verify => "verify",
            Command::Report => "report",
        }
    }
}

#[derive(Args, Debug, Default)]
struct Flags {
    #[arg(long, global = true)]
    dim: Option<usize>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    mu: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    a: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    b: Option<f64>,
    /// Number of layers.
    #[arg(long, global = true)]
    k: Option<usize>,
    /// Number of eigenpairs.
    #[arg(long, global = true)]
    count: Option<usize>,
    /// `increasing` or `decreasing`.
    #[arg(long, global = true)]
    direction: Option<String>,
    #[arg(long, global = true)]
    boundary_layer: bool,
    #[arg(long, global = true)]
    annulus_left: bool,
    /// Branch index (>= 2).
    #[arg(long, global = true)]
    i: Option<usize>,
    /// `minus` or `plus`.
    #[arg(long, global = true)]
    sign: Option<String>,
    #[arg(long, global = true)]
    mu_max: Option<f64>,
    #[arg(long, global = true)]
    max_steps: Option<usize>,
    /// Also write one profile CSV per branch record.
    #[arg(long, global = true)]
    profiles: bool,
    /// pohozaev, blowup, limit, sensitivity, nondeg, green or all.
    #[arg(long, global = true)]
    suite: Option<String>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// key=value file; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Also emit SVG plots.
    #[arg(long, global = true)]
    plot: bool,
}

impl Flags {
    fn overrides(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                m.insert(k.to_string(), v);
            }
        };
        put("dim", self.dim.map(|v| v.to_string()));
        put("mu", self.mu.map(|v| v.to_string()));
        put("a", self.a.map(|v| v.to_string()));
        put("b", self.b.map(|v| v.to_string()));
        put("k", self.k.map(|v| v.to_string()));
        put("count", self.count.map(|v| v.to_string()));
        put("direction", self.direction.clone());
        put("boundary_layer", self.boundary_layer.then(|| "true".into()));
        put("annulus_left", self.annulus_left.then(|| "true".into()));
        put("i", self.i.map(|v| v.to_string()));
        put("sign", self.sign.clone());
        put("mu_max", self.mu_max.map(|v| v.to_string()));
        put("max_steps", self.max_steps.map(|v| v.to_string()));
        put("profiles", self.profiles.then(|| "true".into()));
        put("suite", self.suite.clone());
        put("out", self.out.as_ref().map(|p| p.display().to_string()));
        put("plot", self.plot.then(|| "true".into()));
        m
    }
}

/// Why a run ended early.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Solver { command: String, error: kellerpath::Error },
    Io { command: String, message: String },
    ChecksFailed(usize),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            _ => 1,
        }
    }

    fn report(&self) {
        match self {
            Failure::Usage(msg) => eprintln!("error: {msg}"),
            Failure::Solver { command, error } => {
                let j = serde_json::json!({ "command": command, "error": error.kind(), "message": error.to_string() });
                println!("{j}");
            }
            Failure::Io { command, message } => {
                let j = serde_json::json!({ "command": command, "error": "Io", "message": message });
                println!("{j}");
            }
            Failure::ChecksFailed(n) => eprintln!("{n} check(s) failed"),
        }
    }
}

fn init_threads() -> Result<(), Failure> {
    let Ok(v) = std::env::var("KELLERPATH_THREADS") else {
        return Ok(());
    };
    let n: usize = v.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| Failure::Usage(format!("KELLERPATH_THREADS must be a positive integer, got {v:?}")))?;
    // a second initialization in the same process keeps the first pool
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

pub fn run<I, T>(argv: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = init_threads().and_then(|_| {
        let mut settings = config::Settings::default();
        if let Some(path) = &cli.flags.config {
            let file = config::config_load(path).map_err(|e| Failure::Usage(e.to_string()))?;
            settings.apply(&file).map_err(|e| Failure::Usage(e.to_string()))?;
        }
        settings.apply(&cli.flags.overrides()).map_err(|e| Failure::Usage(e.to_string()))?;
        commands::dispatch(cli.command.name(), &settings)
    });
    match result {
        Ok(()) => 0,
        Err(f) => {
            f.report();
            f.code()
        }
    }
}

fn main() -> ExitCode {
    ExitCode::from(run(std::env::args_os()))
}
