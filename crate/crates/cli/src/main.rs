use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dfnvem::adapt::{RefinementConfig, Strategy};
use dfnvem::driver::{fit_rate, run_adaptive, ProblemSource, RateQuantity, RunConfig, RunOutcome};

#[derive(Parser)]
#[command(name = "dfnvem", version, about = "Adaptive virtual element flow on discrete fracture networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the adaptive SOLVE, ESTIMATE, MARK, REFINE loop.
    Run(RunArgs),
}

#[derive(clap::Args)]
struct RunArgs {
    /// problem1, problem2, file:<path> or synthetic:<seed>
    #[arg(long)]
    problem: ProblemSource,
    #[arg(long, default_value_t = 1)]
    order: usize,
    #[arg(long, default_value = "maxmom")]
    strategy: Strategy,
    /// Dörfler marking fraction.
    #[arg(long, default_value_t = 0.5)]
    c: f64,
    #[arg(long, default_value_t = 0.2)]
    collapse_toll: f64,
    #[arg(long, default_value_t = 10.0)]
    max_ar: f64,
    #[arg(long, default_value_t = 12)]
    max_np: usize,
    /// Threshold on the estimated relative error.
    #[arg(long, default_value_t = 0.05)]
    tol: f64,
    #[arg(long, default_value_t = 60)]
    max_iter: usize,
    /// Output directory for log.csv and VTK files.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write one VTK file per iteration.
    #[arg(long)]
    vtk: bool,
}

fn run(args: RunArgs) -> anyhow::Result<RunOutcome> {
    let cfg = RunConfig {
        problem: args.problem,
        order: args.order,
        refinement: RefinementConfig {
            strategy: args.strategy,
            c: args.c,
            collapse_toll: args.collapse_toll,
            max_ar: args.max_ar,
            max_np: args.max_np,
            ..Default::default()
        },
        tol: args.tol,
        max_iter: args.max_iter,
        out_dir: args.out,
        vtk: args.vtk,
        audit: false,
    };
    if cfg.vtk && cfg.out_dir.is_none() {
        anyhow::bail!("--vtk requires --out");
    }
    let log = run_adaptive(&cfg)?;
    if cfg.out_dir.is_none() {
        print!("{}", log.to_csv());
    }
    let last = log.records.last().expect("at least one step");
    eprintln!(
        "{:?} after {} refinements: ncell {} ndof {} est {:.3e} (relative {:.3e})",
        log.outcome,
        log.refinements.len(),
        last.ncell,
        last.ndof,
        last.est,
        last.relative_est
    );
    if let Ok(a) = fit_rate(&log, 5, RateQuantity::Est) {
        eprint!("rate(est) {a:.3}");
        if let Ok(b) = fit_rate(&log, 5, RateQuantity::Err) {
            eprint!(" rate(err) {b:.3}");
        }
        eprintln!();
    }
    Ok(log.outcome)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run(args) => match run(args) {
            Ok(RunOutcome::Converged) => ExitCode::SUCCESS,
            Ok(RunOutcome::MaxIterations) => ExitCode::from(2),
            Err(e) => {
                eprintln!("error: {e:#}");
                ExitCode::from(1)
            }
        },
    }
}
