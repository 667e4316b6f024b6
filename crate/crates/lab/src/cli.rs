//! Command-line front end: `run`, `check` and `list`.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use crate::{catalog_text, config, run_scenario, RunRequest};

#[derive(Parser)]
#[command(name = "saddle-scope", version, about = "Run the SAM saddle-point experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its artifacts.
    Run(RunArgs),
    /// Run a scenario; exit status is 0 only if every check passes.
    Check(RunArgs),
    /// List the available scenarios.
    List,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    scenario: String,
    /// Output directory (default: runs/<scenario>).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Config file of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Override one parameter; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", value_parser = config::parse_assignment)]
    set: Vec<(String, String)>,
}

fn run(args: RunArgs, out: &mut dyn Write) -> anyhow::Result<bool> {
    let mut request = RunRequest::new(&args.scenario);
    if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        request.file = config::parse_config(&text).with_context(|| format!("parsing {}", path.display()))?;
    }
    request.overrides.extend(args.set);
    if let Some(seed) = args.seed {
        request.overrides.insert("seed".to_owned(), seed.to_string());
    }
    let dir = args.out.unwrap_or_else(|| PathBuf::from("runs").join(&args.scenario));
    let report = run_scenario(&request, &dir)?;
    write!(out, "{}", report.summary())?;
    writeln!(out, "artifacts in {}", dir.display())?;
    Ok(report.passed)
}

/// Parses `args` (program name first) and runs the command. Returns the exit
/// status: 0 on success, 1 when `check` finds a failing check, 2 on errors.
pub fn run_cli<I, S>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code() as u8;
            let _ = if code == 0 { write!(out, "{e}") } else { write!(err, "{e}") };
            return code;
        }
    };
    let result = match cli.command {
        Command::List => write!(out, "{}", catalog_text()).map(|_| true).map_err(Into::into),
        Command::Run(args) => run(args, out).map(|_| true),
        Command::Check(args) => run(args, out),
    };
    match result {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            let _ = writeln!(err, "error: {e:#}");
            2
        }
    }
}
