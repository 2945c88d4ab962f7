use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use dampwave::cli::{self, ExperimentConfig, ExperimentKind};

#[derive(Parser)]
#[command(name = "dampwave", version, about = "Numerical lab for degenerately damped waves")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment config and write its CSVs and summary.
    Run {
        config: PathBuf,
        /// Write artifacts here instead of the config's `output`.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Tabulate every summary found under a directory.
    Report { dir: PathBuf },
    /// List the experiment kinds.
    ListExperiments,
}

fn main() -> ExitCode {
    let args = Args::parse();
    match dispatch(args.command) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(cli::exit_code(&e) as u8)
        }
    }
}

fn dispatch(command: Command) -> dampwave::Result<i32> {
    if let Some(n) = cli::workers_from_env()? {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| dampwave::Error::Config(format!("cannot size worker pool: {e}")))?;
    }
    match command {
        Command::Run { config, output } => {
            let (_, mut plan) = ExperimentConfig::load(&config)?;
            if let Some(dir) = output {
                plan.output = dir;
            }
            let summary = cli::run(&plan)?;
            for c in &summary.checks {
                let tag = match (c.gating, c.passed) {
                    (_, true) => "pass",
                    (true, false) => "FAIL",
                    (false, false) => "off",
                };
                println!("{tag:>4}  {:<22} measured {:.6e}  target {:.6e}  tol {:.1e}", c.name, c.measured, c.target, c.tolerance);
            }
            println!("wrote {}", plan.output.display());
            Ok(if summary.passed { 0 } else { cli::EXIT_FAILED })
        }
        Command::Report { dir } => {
            let rows = cli::collect(&dir)?;
            print!("{}", cli::render(&rows));
            Ok(if rows.iter().all(|r| r.summary.passed) { 0 } else { cli::EXIT_FAILED })
        }
        Command::ListExperiments => {
            for kind in ExperimentKind::ALL {
                println!("{:<14} {}", kind.name(), kind.description());
            }
            Ok(0)
        }
    }
}
