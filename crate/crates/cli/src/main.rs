//! `martlab`: runs one named experiment and writes its result table.
//!
//! Exit codes: 0 when every pass flag holds, 1 on a statistical failure or a
//! missing negative control, 2 on configuration or runtime errors.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use martlab::harness::{self, ExperimentConfig, ExperimentKind};
use martlab::Verdict;

#[derive(Parser)]
#[command(name = "martlab", version, about = "Seeded experiments on time-changed martingale constructions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Law invariance under independent noise, with the eps-regularization ladder.
    Thm1Invariance(RunArgs),
    /// Recovery of the driving Wiener process through the inverse clock.
    LevyCheck(RunArgs),
    /// Realized QV minus predictable characteristic for refining random walks.
    Lemma4Convergence(RunArgs),
    /// Functional limit of transformed random walks against the constructed limit.
    Fclt(RunArgs),
    /// Dyadic density recovery and reconstruction of K.
    RnRoundtrip(RunArgs),
    /// Sup-bound, modulus and uniform-integrability diagnostics.
    Tightness(RunArgs),
    /// Left-point sums and kernel mollification error rates.
    Approximation(RunArgs),
    /// Prints the default config of an experiment as TOML.
    PrintConfig {
        /// Experiment name, e.g. `fclt`.
        experiment: String,
    },
}

#[derive(Args)]
struct RunArgs {
    /// TOML config; defaults to the built-in config of the experiment.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for `<experiment>.csv` and `<experiment>.jsonl`.
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// Overrides the ensemble size.
    #[arg(long)]
    ensemble_size: Option<usize>,
    /// Worker threads; affects wall time only.
    #[arg(long)]
    threads: Option<usize>,
}

fn load(kind: ExperimentKind, args: &RunArgs) -> Result<ExperimentConfig> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::from_path(path).with_context(|| format!("loading {}", path.display()))?,
        None => ExperimentConfig::default_for(kind),
    };
    if cfg.experiment != kind {
        bail!("config names experiment `{}` but `{kind}` was requested", cfg.experiment);
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(size) = args.ensemble_size {
        cfg.ensemble_size = size;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(kind: ExperimentKind, args: &RunArgs) -> Result<Verdict> {
    let cfg = load(kind, args)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = args.threads {
        if n == 0 {
            bail!("--threads must be positive");
        }
        pool = pool.num_threads(n);
    }
    let table = pool.build()?.install(|| harness::run(&cfg))?;
    let (csv, jsonl) = table.write_to_dir(&args.out)?;
    for row in table.rows().iter().filter(|r| r.pass.is_some()) {
        let flag = if row.pass == Some(true) { "PASS" } else { "FAIL" };
        println!("{flag}  {} {} = {}", row.statistic, row.param_json, row.value);
    }
    let verdict = table.verdict();
    println!("{kind}: {verdict} (config {})", &cfg.hash()[..12]);
    println!("wrote {} and {}", csv.display(), jsonl.display());
    Ok(verdict)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = match cli.command {
        Command::PrintConfig { experiment } => {
            return match experiment
                .parse::<ExperimentKind>()
                .map_err(anyhow::Error::from)
                .and_then(|k| Ok(ExperimentConfig::default_for(k).to_toml_string()?))
            {
                Ok(text) => {
                    print!("{text}");
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e:#}");
                    ExitCode::from(2)
                }
            };
        }
        Command::Thm1Invariance(a) => (ExperimentKind::Thm1Invariance, a),
        Command::LevyCheck(a) => (ExperimentKind::LevyCheck, a),
        Command::Lemma4Convergence(a) => (ExperimentKind::Lemma4Convergence, a),
        Command::Fclt(a) => (ExperimentKind::Fclt, a),
        Command::RnRoundtrip(a) => (ExperimentKind::RnRoundtrip, a),
        Command::Tightness(a) => (ExperimentKind::Tightness, a),
        Command::Approximation(a) => (ExperimentKind::Approximation, a),
    };
    match run(kind, &args) {
        Ok(Verdict::Pass) => ExitCode::SUCCESS,
        Ok(_) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
