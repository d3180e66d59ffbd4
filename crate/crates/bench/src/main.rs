use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use simba_bench::plot::plot_dir;
use simba_bench::runner::run_experiment;
use simba_bench::verify::run_verify;
use simba_bench::{BenchError, ExperimentConfig, Overrides};

#[derive(Parser)]
#[command(
    name = "simba-bench",
    version,
    about = "Run, verify and plot Simba optimizer experiments",
    after_help = "Relative output directories are placed under $SIMBA_OUT_ROOT when it is set."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train every configured optimizer for every seed and write traces.
    Run(RunArgs),
    /// Certify the linear-rate bounds on a problem with known constants.
    Verify(RunArgs),
    /// Render loss curves for a directory of traces.
    Plot { dir: PathBuf },
}

#[derive(Args)]
struct RunArgs {
    config: PathBuf,
    /// Run this single seed instead of the configured ones.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (relative paths go under the output root).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    iters: Option<usize>,
}

impl RunArgs {
    fn load(&self) -> Result<ExperimentConfig, BenchError> {
        let mut cfg = ExperimentConfig::load(&self.config)?;
        cfg.apply(&Overrides { seed: self.seed, out: self.out.clone(), iters: self.iters });
        cfg.validate()?;
        Ok(cfg)
    }
}

fn execute(cli: Cli) -> Result<(), BenchError> {
    match cli.command {
        Command::Run(args) => {
            let cfg = args.load()?;
            let outcome = run_experiment(&cfg, &cfg.output_dir())?;
            println!("{} traces in {}", outcome.trace_files.len(), outcome.out_dir.display());
            for row in &outcome.summary {
                println!(
                    "{:<16} runs={} final loss {:.6e} ± {:.3e}",
                    row.optimizer, row.runs, row.final_loss_mean, row.final_loss_std
                );
            }
        }
        Command::Verify(args) => {
            let cfg = args.load()?;
            let outcome = run_verify(&cfg, &cfg.output_dir())?;
            for s in &outcome.seeds {
                let c = &s.certificate;
                println!(
                    "seed {:>3}: c_hat={:.9} c={:.9} K_hat={:.1} coarse={} fine={} reached={:?} violations={}",
                    s.seed,
                    c.rate.c_hat,
                    c.rate.c,
                    c.rate.k_hat,
                    c.coarse_steps,
                    c.fine_steps,
                    c.reached_at,
                    s.violations()
                );
            }
            println!("certificate written to {}", outcome.out_file.display());
            let total = outcome.total_violations();
            if total > 0 {
                return Err(BenchError::Violation(format!("{total} violations across {} seeds", outcome.seeds.len())));
            }
        }
        Command::Plot { dir } => {
            for path in plot_dir(&dir)? {
                println!("{}", path.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
