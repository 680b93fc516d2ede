//! `spinsim` command-line front-end.
//!
//! Each subcommand reads a JSON config (defaults, then `--config` file,
//! then `--key=value` overrides), writes its outputs to `--output-dir`, and
//! returns an exit code: 0 ok, 2 usage or config error, 3 verification
//! failure.

pub mod commands;
pub mod config;
pub mod output;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use config::CliError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_VERIFY: i32 = 3;

/// Environment variable capping the worker thread count.
pub const THREADS_ENV: &str = "SPINSIM_THREADS";

#[derive(Debug, Parser)]
#[command(name = "spinsim", version, about = "Spin-1/2 dynamics and gradient-echo imaging simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Single-spin trajectory: RK4 oracle against the closed form
    Spin(CommonArgs),
    /// Spin-noise emission probability and amplitude ratio
    Noise(CommonArgs),
    /// Gradient-echo sequence generation and validation
    Sequence(CommonArgs),
    /// Phantom imaging with and without RF excitation
    Image(CommonArgs),
    /// Randomized invariant suite
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// JSON config file; missing keys take their defaults
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Directory for output files
    #[arg(long, default_value = ".")]
    pub output_dir: PathBuf,
    /// Config overrides as --key=value (value parsed as JSON when possible)
    #[arg(last = true, value_name = "--KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Force the named property to fail (harness testing)
    #[arg(long, hide = true)]
    pub inject_fault: Option<String>,
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::Config(format!("{THREADS_ENV} must be a positive integer, got {v:?}")))?;
    // a second call in the same process keeps the first pool
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn known_flags(subcommand: &str) -> &'static [&'static str] {
    if subcommand == "verify" {
        &["seed", "inject-fault", "help"]
    } else {
        &["config", "output-dir", "help"]
    }
}

/// Moves `--key=value` tokens that are not known flags behind a `--`
/// separator so they reach the override list wherever they appear.
fn split_overrides(args: Vec<OsString>) -> Vec<OsString> {
    let subcommand = args.get(1).and_then(|a| a.to_str()).unwrap_or("").to_string();
    let known = known_flags(&subcommand);
    let (mut rest, mut overrides) = (Vec::new(), Vec::new());
    let mut after_separator = false;
    for (i, a) in args.into_iter().enumerate() {
        let text = a.to_str().unwrap_or("");
        if text == "--" && i > 0 {
            after_separator = true;
            continue;
        }
        let is_override = text
            .strip_prefix("--")
            .and_then(|b| b.split_once('='))
            .is_some_and(|(k, _)| !known.contains(&k));
        if i > 1 && (after_separator || is_override) {
            overrides.push(a);
        } else {
            rest.push(a);
        }
    }
    if !overrides.is_empty() {
        rest.push("--".into());
        rest.extend(overrides);
    }
    rest
}

/// Parses `args` (including the program name), runs the command, and
/// returns the process exit code. Reports go to `out`, errors to `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = split_overrides(args.into_iter().map(Into::into).collect());
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = if e.use_stderr() { write!(err, "{e}") } else { write!(out, "{e}") };
            return code;
        }
    };
    let result = configure_threads().and_then(|()| match &cli.command {
        Command::Spin(a) => commands::spin::execute(a, out),
        Command::Noise(a) => commands::noise::execute(a, out),
        Command::Sequence(a) => commands::sequence::execute(a, out),
        Command::Image(a) => commands::image::execute(a, out),
        Command::Verify(a) => commands::verify::execute(a, out),
    });
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}
