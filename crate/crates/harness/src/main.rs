use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use multiclock_harness::plot::emit_plot_data;
use multiclock_harness::{execute, selftest, HarnessError, Overrides, ResultTable};

/// Seeded experiment runner for multi-ensemble clock simulations.
#[derive(Parser)]
#[command(name = "multiclock", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML configuration.
    Run {
        config: PathBuf,
        /// Override the configured root seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the shots per sweep point.
        #[arg(long)]
        shots: Option<u64>,
        /// Output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Treat report warnings as failures (exit code 2).
        #[arg(long)]
        strict: bool,
    },
    /// Run the invariant suite at reduced sample sizes.
    Selftest,
    /// Write plot-ready panel files for one figure from a result table.
    Emit {
        table: PathBuf,
        figure_id: String,
        /// Output directory; defaults to the table's directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn fail(e: HarnessError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(e.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, seed, shots, out, strict } => {
            let done = match execute(&config, &Overrides { seed, shots, output_dir: out }) {
                Ok(d) => d,
                Err(e) => return fail(e),
            };
            print!("{}", done.output.report.to_text());
            println!("\noutputs written to {}", done.out_dir.display());
            if strict && !done.output.report.warnings.is_empty() {
                eprintln!("error: {} warning(s) with --strict", done.output.report.warnings.len());
                return ExitCode::from(2);
            }
            ExitCode::SUCCESS
        }
        Command::Selftest => {
            let summary = selftest::selftest();
            print!("{}", summary.to_text());
            if summary.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            }
        }
        Command::Emit { table, figure_id, out } => {
            let result = ResultTable::load(&table).and_then(|t| {
                let dir = out.unwrap_or_else(|| table.parent().map(PathBuf::from).unwrap_or_default());
                emit_plot_data(&t, &figure_id, &dir)
            });
            match result {
                Ok(files) => {
                    for f in files {
                        println!("{}", f.display());
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => fail(e),
            }
        }
    }
}
