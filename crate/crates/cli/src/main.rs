use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use chemolab_cli::{
    cmd_analyze_weight, cmd_convergence, cmd_run, cmd_threshold, parse_config, resolve_out_dir,
    CliError, EXIT_ERROR, OUT_ENV,
};

#[derive(Debug, Parser)]
#[command(
    name = "chemolab",
    version,
    about = "Two-species chemotaxis simulator with signal absorption"
)]
struct Cli {
    /// Scenario file (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory. CHEMOLAB_OUT, when set, takes precedence.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Reserved; runs are deterministic and ignore it.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Suppress everything on stdout except tables.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate a scenario and verify the run.
    Run,
    /// Compare chi_i * max w0 with the global-existence bound.
    Threshold {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        chi1: f64,
        #[arg(long)]
        chi2: f64,
        #[arg(long)]
        w0max: f64,
    },
    /// Tabulate the weight function and its ODE residual.
    AnalyzeWeight {
        #[arg(long)]
        p: f64,
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        m: f64,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
    },
    /// Grid-refinement and time-step study.
    Convergence {
        #[arg(long, default_value_t = 3)]
        levels: usize,
    },
}

const DEFAULT_OUT: &str = "chemolab-out";

fn require_config(cli: &Cli) -> Result<&Path, CliError> {
    cli.config
        .as_deref()
        .ok_or_else(|| CliError::Usage("--config is required".into()))
}

fn execute(cli: &Cli) -> Result<i32, CliError> {
    let out = resolve_out_dir(cli.out.as_deref(), std::env::var_os(OUT_ENV));
    match &cli.command {
        Command::Run => {
            let config = parse_config(require_config(cli)?)?;
            let out = out.unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
            let summary = cmd_run(&config, &out)?;
            if !cli.quiet {
                println!("outcome: {:?}", summary.manifest.outcome);
                println!("steps: {}", summary.report.steps);
                if let Some(t) = &summary.report.theorems {
                    for c in &t.checks {
                        let mark = if c.passed { "pass" } else { "FAIL" };
                        println!("{mark} {}: {} (limit {})", c.name, c.value, c.limit);
                    }
                }
                println!("output: {}", out.display());
            }
            Ok(summary.exit_code)
        }
        Command::Threshold {
            n,
            chi1,
            chi2,
            w0max,
        } => {
            print!("{}", cmd_threshold(*n, *chi1, *chi2, *w0max)?);
            Ok(0)
        }
        Command::AnalyzeWeight { p, eps, m, samples } => {
            print!("{}", cmd_analyze_weight(*p, *eps, *m, *samples)?);
            Ok(0)
        }
        Command::Convergence { levels } => {
            let config = parse_config(require_config(cli)?)?;
            let summary = cmd_convergence(&config, *levels, out.as_deref())?;
            print!("{summary}");
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_ERROR as u8)
        }
    }
}
