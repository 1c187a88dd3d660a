use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use jmlab_cli::config::Overrides;
use jmlab_cli::{execute, list_text, load, output_dir, Failure, EXIT_OK};

#[derive(Debug, Parser)]
#[command(name = "jmlab", version, about = "Jacobi-Maupertuis geometry scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Override the scenario seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Write artifacts here instead of the configured directory.
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,

    /// Worker threads for independent sweep points and minimizer starts.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,

    /// Override the scenario's numerical tolerance (solver target or check threshold).
    #[arg(long, global = true)]
    tolerance: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate and run a scenario file.
    Run { config: PathBuf },
    /// Report every problem in a scenario file without running it.
    Validate { config: PathBuf },
    /// Print the scenario kinds and their keys.
    List,
}

fn report(f: &Failure) -> ExitCode {
    for m in f.messages() {
        eprintln!("error: {m}");
    }
    ExitCode::from(f.exit_code())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.tolerance {
        if !(t > 0.0 && t.is_finite()) {
            eprintln!("error: --tolerance {t} must be positive");
            return ExitCode::from(jmlab_cli::EXIT_INVALID);
        }
    }
    let ov = Overrides { seed: cli.seed, tolerance: cli.tolerance };
    match cli.command {
        Command::List => {
            print!("{}", list_text());
            ExitCode::from(EXIT_OK)
        }
        Command::Validate { config } => match load(&config, &ov) {
            Ok(s) => {
                println!("ok: {} ({})", s.name, s.kind.as_str());
                ExitCode::from(EXIT_OK)
            }
            Err(f) => report(&f),
        },
        Command::Run { config } => {
            let s = match load(&config, &ov) {
                Ok(s) => s,
                Err(f) => return report(&f),
            };
            let env = std::env::var("OUTPUT_DIR").ok();
            let dir = output_dir(&s, cli.output_dir.as_deref(), env.as_deref());
            match execute(&s, &dir, cli.jobs) {
                Ok(out) => {
                    for line in &out.report {
                        println!("{line}");
                    }
                    println!("wrote {}", dir.display());
                    ExitCode::from(EXIT_OK)
                }
                Err(f) => report(&f),
            }
        }
    }
}
