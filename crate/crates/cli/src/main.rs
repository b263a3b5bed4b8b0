use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use log::{error, info, warn};
use sgs_core::experiment::{self, ExperimentConfig, Family, Job, RunContext, RunOutput, TableFilter, TableOptions};
use sgs_core::lattice::Model;
use sgs_core::optimizer::OptimizerOptions;
use sgs_core::Error;

const EXIT_VALIDATION: u8 = 2;
const EXIT_RESOURCE: u8 = 3;
const EXIT_NOT_CONVERGED: u8 = 4;

#[derive(Parser)]
#[command(name = "sgs", version, about = "Sequentially generated 2D states: optimize, check and analyze")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Worker threads; 1 gives bit-exact reruns.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Args)]
struct JobArgs {
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides the config's `output`.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Allow runs beyond the large-lattice cap.
    #[arg(long)]
    ack_large: bool,
}

#[derive(Args)]
struct TableArgs {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 3)]
    restarts: usize,
    /// Optimizer options as JSON.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    #[arg(long)]
    ack_large: bool,
    /// heisenberg, frustrated_xx or random2body.
    #[arg(long)]
    model: Option<Model>,
    /// For example `8x8`.
    #[arg(long, value_parser = parse_lattice)]
    lattice: Option<(usize, usize)>,
    #[arg(long, value_parser = parse_family)]
    family: Option<Family>,
    #[arg(long)]
    bond: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Variational ground-state search with seeded restarts.
    Optimize(JobArgs),
    /// Exact ground energy by diagonalization.
    Exact(JobArgs),
    /// Horizontal and vertical correlators of a translationally invariant SGS.
    Correlations(JobArgs),
    /// Cross-checks contraction against the statevector.
    Validate(JobArgs),
    /// Writes the PEPS form of a seeded SGS.
    ExportPeps(JobArgs),
    /// Reruns the published energy tables.
    ReproduceTables(TableArgs),
}

fn parse_lattice(s: &str) -> Result<(usize, usize), String> {
    let (h, w) = s.split_once('x').ok_or_else(|| format!("expected HxW, got '{s}'"))?;
    Ok((h.parse().map_err(|e| format!("{e}"))?, w.parse().map_err(|e| format!("{e}"))?))
}

fn parse_family(s: &str) -> Result<Family, String> {
    match s {
        "sgs" => Ok(Family::Sgs),
        "bsgs" => Ok(Family::Bsgs),
        other => Err(format!("unknown family '{other}'")),
    }
}

fn exit_code(e: &anyhow::Error) -> ExitCode {
    match e.downcast_ref::<Error>() {
        Some(Error::Validation(_) | Error::Json(_)) => ExitCode::from(EXIT_VALIDATION),
        Some(Error::Resource(_)) => ExitCode::from(EXIT_RESOURCE),
        _ => ExitCode::FAILURE,
    }
}

fn print_json<T: serde::Serialize>(v: &T) -> anyhow::Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn run_job(job: Job, args: &JobArgs) -> anyhow::Result<ExitCode> {
    let mut cfg = ExperimentConfig::load(&args.config).with_context(|| format!("loading {}", args.config.display()))?;
    if cfg.job != job {
        return Err(Error::Validation(format!("config job {:?} does not match the command", cfg.job)).into());
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let ctx = RunContext { out_dir: args.out.clone(), ack_large: args.ack_large };
    let out = experiment::run(&cfg, &ctx)?;
    Ok(match out {
        RunOutput::Energy(rec) => {
            print_json(&rec)?;
            if job == Job::Optimize && !rec.converged {
                warn!("no convergence within {} outer iterations; best effort written", cfg.optimizer.max_outer_iterations);
                ExitCode::from(EXIT_NOT_CONVERGED)
            } else {
                ExitCode::SUCCESS
            }
        }
        RunOutput::Validation(rep) => {
            for c in &rep.checks {
                info!("{:<24} {:>10.3e} {}", c.name, c.error, if c.pass { "pass" } else { "FAIL" });
            }
            print_json(&rep)?;
            if rep.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_VALIDATION)
            }
        }
        RunOutput::Correlations(rec) => {
            print_json(&rec)?;
            ExitCode::SUCCESS
        }
        RunOutput::Export(rec) => {
            print_json(&rec)?;
            ExitCode::SUCCESS
        }
    })
}

fn load_optimizer(path: &Path) -> anyhow::Result<OptimizerOptions> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let opts: OptimizerOptions = serde_json::from_str(&text).map_err(|e| Error::Validation(format!("optimizer options: {e}")))?;
    opts.validate()?;
    Ok(opts)
}

fn run_tables(args: &TableArgs) -> anyhow::Result<ExitCode> {
    let optimizer = match &args.config {
        Some(p) => load_optimizer(p)?,
        None => OptimizerOptions::default(),
    };
    let opts = TableOptions {
        seed: args.seed.unwrap_or(0),
        restarts: args.restarts,
        optimizer,
        ack_large: args.ack_large,
        filter: TableFilter { model: args.model, lattice: args.lattice, family: args.family, bond: args.bond },
    };
    let report = experiment::reproduce_tables(&opts)?;
    print!("{}", report.render());
    if let Some(dir) = &args.out {
        experiment::write_atomic(&dir.join("tables.csv"), report.to_csv().as_bytes())?;
        experiment::write_atomic(&dir.join("tables.json"), serde_json::to_string_pretty(&report)?.as_bytes())?;
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            error!("{e}");
            return ExitCode::FAILURE;
        }
    }
    let result = match &cli.command {
        Command::Optimize(a) => run_job(Job::Optimize, a),
        Command::Exact(a) => run_job(Job::Exact, a),
        Command::Correlations(a) => run_job(Job::Correlations, a),
        Command::Validate(a) => run_job(Job::Validate, a),
        Command::ExportPeps(a) => run_job(Job::ExportPeps, a),
        Command::ReproduceTables(a) => run_tables(a),
    };
    result.unwrap_or_else(|e| {
        error!("{e:#}");
        exit_code(&e)
    })
}
