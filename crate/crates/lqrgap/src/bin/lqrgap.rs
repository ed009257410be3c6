use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use lqrgap::harness::{
    predict, render_report, run_policy_eval_experiment, run_policy_opt_experiment, sweep,
    ExperimentConfig, OutputFormat, Task,
};

#[derive(Parser)]
#[command(
    name = "lqrgap",
    about = "Seeded Monte Carlo risk experiments for LQR policy evaluation and optimization, \
             with closed-form asymptotic predictions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Experiment config (JSON or TOML).
    #[arg(long)]
    config: PathBuf,
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the trial count.
    #[arg(long)]
    trials: Option<usize>,
    /// Write output here instead of the config's `out` (or stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format: csv or json.
    #[arg(long)]
    format: Option<String>,
    /// Worker thread count.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Print every closed-form prediction for the configured instance.
    Predict(CommonArgs),
    /// Monte Carlo scaled risk for policy evaluation (plugin / LSTD).
    EvalRisk(CommonArgs),
    /// Monte Carlo scaled risk for policy optimization (nominal / REINFORCE).
    OptRisk(CommonArgs),
    /// Repeat the configured experiment over the config's n_grid.
    Sweep(CommonArgs),
}

fn load_config(args: &CommonArgs) -> lqrgap::Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::from_path(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(trials) = args.trials {
        cfg.trials = trials;
    }
    if let Some(out) = &args.out {
        cfg.out = Some(out.clone());
    }
    if let Some(fmt) = &args.format {
        cfg.format = match fmt.as_str() {
            "csv" => OutputFormat::Csv,
            "json" => OutputFormat::Json,
            other => {
                return Err(lqrgap::Error::InvalidConfig(format!(
                    "unknown format {other:?} (expected csv or json)"
                )))
            }
        };
    }
    if let Some(threads) = args.threads {
        cfg.threads = Some(threads);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn emit(cfg: &ExperimentConfig, payload: String) -> lqrgap::Result<()> {
    match &cfg.out {
        Some(path) => {
            if let Some(parent) = path.parent() {
                if !parent.as_os_str().is_empty() {
                    std::fs::create_dir_all(parent)?;
                }
            }
            std::fs::write(path, payload)?;
            eprintln!("wrote {}", path.display());
        }
        None => print!("{payload}"),
    }
    Ok(())
}

fn run() -> lqrgap::Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Predict(args) => {
            let cfg = load_config(&args)?;
            let doc = predict(&cfg)?;
            let payload = serde_json::to_string_pretty(&doc)
                .map_err(|e| lqrgap::Error::ConfigParse(e.to_string()))?;
            emit(&cfg, payload + "\n")
        }
        Command::EvalRisk(args) => {
            let cfg = load_config(&args)?;
            if cfg.task != Task::Eval {
                return Err(lqrgap::Error::InvalidConfig(
                    "eval-risk needs a config with task = \"eval\"".into(),
                ));
            }
            let report = run_policy_eval_experiment(&cfg)?;
            emit(&cfg, render_report(&report, cfg.format)?)
        }
        Command::OptRisk(args) => {
            let cfg = load_config(&args)?;
            if cfg.task != Task::Opt {
                return Err(lqrgap::Error::InvalidConfig(
                    "opt-risk needs a config with task = \"opt\"".into(),
                ));
            }
            let report = run_policy_opt_experiment(&cfg)?;
            emit(&cfg, render_report(&report, cfg.format)?)
        }
        Command::Sweep(args) => {
            let cfg = load_config(&args)?;
            let report = sweep(&cfg)?;
            emit(&cfg, render_report(&report, cfg.format)?)
        }
    }
}

fn main() {
    if let Err(err) = run() {
        eprintln!("error: {err}");
        std::process::exit(1);
    }
}
