use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use superloc::harness::{run, Command, HarnessError, Scenario, EXIT_SCHEMA};

/// Run a localization scenario and report every check.
///
/// Exit status: 0 all checks passed, 1 a check failed, 2 schema error,
/// 3 computation error. SUPERLOC_THREADS caps the worker threads.
#[derive(Parser)]
#[command(name = "superloc", version)]
struct Cli {
    #[arg(value_enum)]
    command: Cmd,
    /// Scenario JSON file.
    #[arg(long)]
    scenario: PathBuf,
    /// Overrides the localized-vs-oracle (and expected value) tolerance.
    #[arg(long)]
    tol: Option<f64>,
    /// Write the JSON report here.
    #[arg(long)]
    json: Option<PathBuf>,
    /// Print nothing on success.
    #[arg(long)]
    quiet: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Cmd {
    Localize,
    Oracle,
    Compare,
    BrstCheck,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Localize => Command::Localize,
            Cmd::Oracle => Command::Oracle,
            Cmd::Compare => Command::Compare,
            Cmd::BrstCheck => Command::BrstCheck,
        }
    }
}

fn configure_threads() -> Result<(), HarnessError> {
    let Ok(text) = std::env::var("SUPERLOC_THREADS") else { return Ok(()) };
    let n: usize = text
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| HarnessError::Schema(format!("SUPERLOC_THREADS must be a positive integer, got `{text}`")))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| HarnessError::Schema(e.to_string()))
}

fn execute(cli: &Cli) -> Result<i32, HarnessError> {
    configure_threads()?;
    let mut sc = Scenario::load(&cli.scenario)?;
    if let Some(tol) = cli.tol {
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(HarnessError::Schema(format!("--tol must be positive, got {tol}")));
        }
        sc.tolerances.compare = tol;
    }
    let report = run(&sc, cli.command.into())?;
    if let Some(path) = &cli.json {
        std::fs::write(path, report.to_json() + "\n").map_err(|e| HarnessError::Schema(format!("{}: {e}", path.display())))?;
    }
    let code = report.exit_code();
    if !cli.quiet || code != 0 {
        print!("{}", report.summary());
    }
    Ok(code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_SCHEMA } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match execute(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("superloc: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
