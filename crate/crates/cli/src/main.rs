//! `noisefree-bo`: runs the benchmark, fill-distance and inference studies
//! and writes plot-ready CSV/JSON files.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use noisefree_bo::bo_loops::Algorithm;
use noisefree_bo::experiments::{run_experiment, version, ExperimentConfig, ExperimentKind, Overrides, RawConfig};
use noisefree_bo::Error;

#[derive(Parser)]
#[command(name = "noisefree-bo", version = version_string(), about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simple-regret curves on the benchmark objectives.
    Bench(Common),
    /// Fill distance of each strategy's query set on 10-d Rastrigin.
    Filldist(Common),
    /// Surrogate posteriors for the Rossler or Lorenz-63 inference problem.
    Infer(Common),
}

#[derive(Args)]
struct Common {
    /// JSON config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// bench, filldist, infer-rossler or infer-lorenz.
    #[arg(long)]
    experiment: Option<ExperimentKind>,
    /// Evaluation budget per run.
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated algorithm names, e.g. gp-ucb,exploit+.
    #[arg(long, value_delimiter = ',')]
    algorithms: Option<Vec<Algorithm>>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Use the full-size defaults instead of the desk-scale ones.
    #[arg(long)]
    paper_scale: bool,
    /// Print the resolved config as JSON and exit.
    #[arg(long)]
    print_config: bool,
}

fn version_string() -> &'static str {
    Box::leak(version().into_boxed_str())
}

fn resolve(command: &Command) -> Result<(ExperimentConfig, bool), Error> {
    let (args, family) = match command {
        Command::Bench(a) => (a, "bench"),
        Command::Filldist(a) => (a, "filldist"),
        Command::Infer(a) => (a, "infer"),
    };
    let raw = match &args.config {
        Some(p) => RawConfig::from_file(p)?,
        None => RawConfig::default(),
    };
    let requested = args.experiment.or(raw.experiment);
    let experiment = match (family, requested) {
        ("bench", None | Some(ExperimentKind::Bench)) => ExperimentKind::Bench,
        ("filldist", None | Some(ExperimentKind::Filldist)) => ExperimentKind::Filldist,
        ("infer", None) => ExperimentKind::InferRossler,
        ("infer", Some(k)) if k.is_inference() => k,
        (_, Some(k)) => {
            return Err(Error::Config(format!(
                "experiment {k} does not belong to the `{family}` subcommand"
            )))
        }
        _ => unreachable!(),
    };
    let overrides = Overrides {
        experiment: Some(experiment),
        eval_budget: args.budget,
        replications: args.reps,
        seed: args.seed,
        algorithms: args.algorithms.clone(),
        output_dir: args.out.clone(),
        paper_scale: args.paper_scale,
    };
    Ok((ExperimentConfig::resolve(raw, &overrides)?, args.print_config))
}

fn init_pool() -> Result<(), Error> {
    let Ok(v) = std::env::var("NOISEFREE_BO_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Config(format!("NOISEFREE_BO_THREADS must be a positive integer, got `{v}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 2,
        _ => 3,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = init_pool().and_then(|_| resolve(&cli.command)).and_then(|(cfg, print)| {
        if print {
            println!("{}", cfg.to_json_pretty());
            return Ok(());
        }
        log::info!("running {} with seed {}", cfg.experiment, cfg.seed);
        for p in run_experiment(&cfg)? {
            println!("{}", p.display());
        }
        Ok(())
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("noisefree-bo: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
