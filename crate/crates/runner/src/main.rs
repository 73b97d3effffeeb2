use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hvq_runner::{parse_config, run, run_directory, RunOptions};

#[derive(Parser)]
#[command(name = "hvquant", version, about = "Quantization, hidden-variable and measurement simulations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Quantum, classical or Madelung time evolution.
    Evolve(RunArgs),
    /// Hidden-variable branch and fast-flip dynamics.
    Hv(RunArgs),
    /// Guided trajectory ensembles.
    Pilot(RunArgs),
    /// Pointer measurement experiments.
    Measure(RunArgs),
    /// Ordering-gap report.
    Ordering(RunArgs),
    /// Runs every scenario in a directory and prints one line per scenario.
    Check(CheckArgs),
}

#[derive(Args)]
struct Common {
    /// Output root; defaults to $HVQUANT_OUT, then ./out.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct CheckArgs {
    #[arg(long, default_value = "scenarios")]
    dir: PathBuf,
    #[command(flatten)]
    common: Common,
}

fn options(c: &Common) -> Result<RunOptions, String> {
    if let Some(jobs) = c.jobs {
        rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global().map_err(|e| e.to_string())?;
    }
    Ok(RunOptions { out_root: RunOptions::resolve_root(c.out.clone()), seed: c.seed })
}

fn single(command: &str, args: &RunArgs) -> Result<bool, String> {
    let opts = options(&args.common)?;
    let text = fs::read_to_string(&args.config).map_err(|e| format!("{}: {e}", args.config.display()))?;
    let cfg = parse_config(&text).map_err(|e| format!("{}: {e}", args.config.display()))?;
    if cfg.scenario.command() != command {
        return Err(format!(
            "scenario `{}` is run with `hvquant {}`, not `{command}`",
            cfg.scenario.as_str(),
            cfg.scenario.command()
        ));
    }
    let m = run(&cfg, &opts).map_err(|e| e.to_string())?;
    println!("{} {} -> {}", m.status.as_str(), cfg.name, m.out_dir.display());
    for c in &m.checks {
        println!("  {} {:.6e} (tol {:.1e}) {}", c.name, c.value, c.tolerance, if c.passed { "ok" } else { "FAILED" });
    }
    for w in &m.warnings {
        eprintln!("warning: {w}");
    }
    if let Some(e) = &m.error {
        eprintln!("error: {e}");
    }
    Ok(m.passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Evolve(a) => single("evolve", a),
        Command::Hv(a) => single("hv", a),
        Command::Pilot(a) => single("pilot", a),
        Command::Measure(a) => single("measure", a),
        Command::Ordering(a) => single("ordering", a),
        Command::Check(a) => options(&a.common).and_then(|opts| {
            let results = run_directory(&a.dir, &opts, std::io::stdout()).map_err(|e| e.to_string())?;
            Ok(results.iter().all(|(_, m)| m.as_ref().is_some_and(|m| m.passed())))
        }),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("hvquant: {e}");
            ExitCode::from(2)
        }
    }
}
