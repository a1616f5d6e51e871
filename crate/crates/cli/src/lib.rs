//! The `vorton-lab` command-line front end: scenario files in, CSV/JSON
//! artifacts and a manifest out.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, ValueEnum};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;
use vortonlab::Error;

pub mod artifacts;
pub mod check;
pub mod commands;
pub mod config;

use artifacts::{Artifacts, Manifest};
use commands::Run;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Clone, PartialEq)]
pub enum Failure {
    /// Bad arguments, schema violations, unsupported parameter choices.
    Config(String),
    /// The computation aborted; artifacts may be partial.
    Numerical(String),
    /// Some invariant checks failed.
    Check(String),
    Io(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Config(_) => EXIT_CONFIG,
            Failure::Numerical(_) => EXIT_NUMERICAL,
            Failure::Check(_) | Failure::Io(_) => EXIT_FAILED,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Numerical(m) | Failure::Check(m) | Failure::Io(m) => m,
        }
    }
}

/// Sorts library errors into configuration problems and numerical aborts.
pub fn core_failure(e: Error) -> Failure {
    match e {
        Error::NearCollision { .. } | Error::Divergence(_) | Error::Cfl { .. } | Error::Pole(_) => {
            Failure::Numerical(e.to_string())
        }
        _ => Failure::Config(e.to_string()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Simulate,
    Reduce2,
    Contours,
    Field,
    Flowmap,
    Converge,
    Cloudcompare,
    Check,
}

#[derive(Debug, Parser)]
#[command(name = "vorton-lab", version, about = "Vorton dynamics and kernel numerics from scenario files")]
pub struct Cli {
    #[arg(value_enum)]
    pub command: Command,
    /// Scenario file (JSON). Optional for `check`.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override a config value by dotted path, e.g. `kernel.eta=0.5`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

/// Parses arguments, runs the command and returns the exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("vorton-lab {}: {}", name(cli.command), f.message());
            f.exit_code()
        }
    }
}

fn name(command: Command) -> String {
    command.to_possible_value().map(|v| v.get_name().to_string()).unwrap_or_default()
}

/// Raw scenario: file text (when unmodified) and the merged JSON value.
struct Scenario {
    text: Option<String>,
    value: Value,
}

fn scenario(cli: &Cli) -> Result<Scenario, Failure> {
    match &cli.config {
        Some(path) => {
            let value = config::load(path, &cli.set)?;
            let text = if cli.set.is_empty() { std::fs::read_to_string(path).ok() } else { None };
            Ok(Scenario { text, value })
        }
        None if cli.command == Command::Check => {
            let mut value = Value::Object(Default::default());
            for item in &cli.set {
                config::apply_override(&mut value, item)?;
            }
            Ok(Scenario { text: None, value })
        }
        None => Err(Failure::Config("--config is required".into())),
    }
}

/// Parses with a line/column diagnostic when the file is used as is, and
/// a field-path diagnostic otherwise.
fn typed<T: DeserializeOwned>(s: &Scenario) -> Result<T, Failure> {
    match &s.text {
        Some(text) => config::parse_text(text),
        None => config::parse(&s.value),
    }
}

type Body<T> = fn(T, &mut Artifacts, &mut Run) -> Result<(), Failure>;

fn dispatch<T: DeserializeOwned + Serialize>(
    s: &Scenario,
    out: &Path,
    run: &mut Run,
    body: Body<T>,
) -> Result<Artifacts, (Option<Artifacts>, Failure)> {
    let cfg: T = typed(s).map_err(|f| (None, f))?;
    run.config = commands::resolved(&cfg);
    let mut artifacts = Artifacts::new(out).map_err(|f| (None, f))?;
    match body(cfg, &mut artifacts, run) {
        Ok(()) => Ok(artifacts),
        Err(f) => Err((Some(artifacts), f)),
    }
}

pub fn execute(cli: &Cli) -> Result<(), Failure> {
    let start = Instant::now();
    let s = scenario(cli)?;
    let mut run = Run::default();
    let out = cli.out.as_path();
    let result = match cli.command {
        Command::Simulate => dispatch(&s, out, &mut run, commands::simulate),
        Command::Reduce2 => dispatch(&s, out, &mut run, commands::reduce2),
        Command::Contours => dispatch(&s, out, &mut run, commands::contours),
        Command::Field => dispatch(&s, out, &mut run, commands::field),
        Command::Flowmap => dispatch(&s, out, &mut run, commands::flowmap),
        Command::Converge => dispatch(&s, out, &mut run, commands::converge),
        Command::Cloudcompare => dispatch(&s, out, &mut run, commands::cloudcompare),
        Command::Check => dispatch(&s, out, &mut run, commands::check),
    };
    let (artifacts, failure) = match result {
        Ok(a) => (a, None),
        // nothing ran, so there is nothing to record
        Err((None, f)) => return Err(f),
        Err((Some(a), f)) => (a, Some(f)),
    };
    let status = match &failure {
        None => "ok",
        Some(Failure::Numerical(_)) => "aborted",
        Some(_) => "failed",
    };
    let manifest = Manifest {
        tool: "vorton-lab",
        version: env!("CARGO_PKG_VERSION"),
        command: name(cli.command),
        config: run.config,
        seed: run.seed,
        threads: rayon::current_num_threads(),
        status,
        reason: failure.as_ref().map(|f| f.message().to_string()),
        drift: run.drift,
        summary: run.summary,
        wall_time_s: start.elapsed().as_secs_f64(),
        artifacts: artifacts.written.clone(),
    };
    let text = serde_json::to_vec_pretty(&manifest).map_err(|e| Failure::Io(e.to_string()))?;
    artifacts::write_atomic(&artifacts.dir().join("manifest.json"), &text)?;
    failure.map_or(Ok(()), Err)
}

/// Sets the global worker count from `VORTONLAB_THREADS`, if present.
pub fn init_threads() -> Result<(), Failure> {
    let Ok(raw) = std::env::var("VORTONLAB_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| Failure::Config(format!("VORTONLAB_THREADS must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Config(format!("thread pool: {e}")))
}
