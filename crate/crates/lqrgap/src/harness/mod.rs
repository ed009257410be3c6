//! Experiment orchestration: seeded Monte Carlo estimation of scaled risks,
//! comparison against the closed-form predictors, and CSV/JSON reporting.

pub mod config;
pub mod methods;
pub mod report;

use std::time::Instant;

use nalgebra::DMatrix;
use rayon::prelude::*;

pub use config::{ExperimentConfig, OutputFormat, Task};
pub use methods::{
    eval_method, opt_method, EvalMethod, MethodOptions, OptMethod, EVAL_METHOD_NAMES,
    OPT_METHOD_NAMES,
};
pub use report::{mean_and_stderr, pairwise_sum, ExperimentReport, ReportRow, CSV_HEADER};

use crate::asymptotics::{
    eval_plugin_limit, lstd_limit_exact, lstd_limit_lower, opt_plugin_limit, pg_risk_lower,
};
use crate::error::{Error, Result};
use crate::instances::{make_eval_instance, make_opt_instance, EvalInstance, OptInstance};
use crate::lqr::{cost_true_noise, rollout_closed_loop, LinearSystem};
use crate::policy_opt::BaselineKind;
use crate::rng::{stream_rng, StreamTag};
use crate::solvers::dlyap;

/// Runs `f` inside a dedicated rayon pool when a thread count is requested.
/// Results are identical either way; this only controls parallelism.
pub fn with_thread_pool<R: Send>(threads: Option<usize>, f: impl FnOnce() -> R + Send) -> R {
    match threads {
        None => f(),
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k.max(1))
            .build()
            .expect("thread pool")
            .install(f),
    }
}

pub fn build_eval_instance(cfg: &ExperimentConfig) -> Result<EvalInstance> {
    let (tau, gamma) = cfg.tau_gamma()?;
    make_eval_instance(cfg.n, cfg.d, tau, gamma, cfg.instance_seed_value())?
        .with_sigma_w(cfg.sigma_w)
}

pub fn build_opt_instance(cfg: &ExperimentConfig) -> Result<OptInstance> {
    make_opt_instance(cfg.n, cfg.d, cfg.rho_value()?, cfg.instance_seed_value())?
        .with_noise(cfg.sigma_w, cfg.sigma_u)
}

fn method_options(cfg: &ExperimentConfig) -> MethodOptions {
    MethodOptions {
        ridge: cfg.ridge_value(),
        reinforce_zeta: cfg.reinforce_zeta,
    }
}

fn eval_method_names(cfg: &ExperimentConfig) -> Vec<String> {
    if cfg.methods.is_empty() {
        vec!["plugin".into(), "lstd".into()]
    } else {
        cfg.methods.clone()
    }
}

fn opt_method_names(cfg: &ExperimentConfig) -> Vec<String> {
    if cfg.methods.is_empty() {
        OPT_METHOD_NAMES.iter().map(|s| s.to_string()).collect()
    } else {
        cfg.methods.clone()
    }
}

/// Scaled-risk Monte Carlo for policy evaluation: for every trajectory
/// length in the grid and every method, `T * mean ||Phat - P*||_F^2` over
/// seeded independent trajectories (shared across methods within a trial).
pub fn run_policy_eval_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    if cfg.task != Task::Eval {
        return Err(Error::InvalidConfig("config task is not eval".into()));
    }
    let inst = build_eval_instance(cfg)?;
    let p_star = dlyap(inst.l_star(), inst.cost_weight())?.p;
    let opts = method_options(cfg);
    let methods = eval_method_names(cfg)
        .iter()
        .map(|name| eval_method(name, &opts))
        .collect::<Result<Vec<_>>>()?;

    let n = inst.state_dim();
    let sim_sys = LinearSystem::new(
        inst.l_star().clone(),
        DMatrix::zeros(n, 1),
        inst.sigma_w(),
        0.0,
    )?;
    let zero_feedback = DMatrix::zeros(1, n);

    let mut report = ExperimentReport::default();
    with_thread_pool(cfg.threads, || -> Result<()> {
        for (gi, &t_len) in cfg.grid.iter().enumerate() {
            let started = Instant::now();
            let per_trial: Vec<Vec<Option<f64>>> = (0..cfg.trials)
                .into_par_iter()
                .map(|trial| {
                    let trial_id = (gi * cfg.trials + trial) as u64;
                    let mut rng = stream_rng(cfg.seed, trial_id, StreamTag::EvalTrajectory);
                    let traj =
                        match rollout_closed_loop(&sim_sys, &zero_feedback, t_len, &mut rng) {
                            Ok(t) => t,
                            Err(_) => return vec![None; methods.len()],
                        };
                    methods
                        .iter()
                        .map(|m| {
                            m.estimate(&inst, &traj)
                                .ok()
                                .map(|est| t_len as f64 * (&est.p_hat - &p_star).norm_squared())
                        })
                        .collect()
                })
                .collect();
            let elapsed = started.elapsed().as_secs_f64();

            for (mi, method) in methods.iter().enumerate() {
                let values: Vec<f64> =
                    per_trial.iter().filter_map(|trial| trial[mi]).collect();
                let failures = cfg.trials - values.len();
                let (mean, stderr) = mean_and_stderr(&values);
                let prediction = method.prediction(&inst)?;
                report.rows.push(ReportRow {
                    task: "eval".into(),
                    method: method.name().into(),
                    baseline: None,
                    n: inst.state_dim(),
                    d: inst.subspace_dim(),
                    rho: inst.rho(),
                    sigma_w: inst.sigma_w(),
                    sigma_u: 0.0,
                    horizon_t: Some(t_len),
                    rollouts_n: None,
                    trials: cfg.trials,
                    failures,
                    scaled_risk_mean: mean,
                    scaled_risk_stderr: stderr,
                    prediction: Some(prediction.value),
                    prediction_kind: Some(prediction.kind.as_str().into()),
                    seed: cfg.seed,
                    wall_time: elapsed,
                });
            }
        }
        Ok(())
    })?;
    Ok(report)
}

/// Scaled-risk Monte Carlo for policy optimization: for every rollout budget
/// in the grid and every method, `N * mean(J(Khat) - J*)` with the cost
/// evaluated exactly in closed form.
pub fn run_policy_opt_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    if cfg.task != Task::Opt {
        return Err(Error::InvalidConfig("config task is not opt".into()));
    }
    let inst = build_opt_instance(cfg)?;
    let horizon = cfg.horizon.expect("validated");
    let j_star = horizon as f64 * cfg.sigma_w.powi(2) * cfg.n as f64;
    let opts = method_options(cfg);
    let methods = opt_method_names(cfg)
        .iter()
        .map(|name| opt_method(name, &opts))
        .collect::<Result<Vec<_>>>()?;

    let mut report = ExperimentReport::default();
    with_thread_pool(cfg.threads, || -> Result<()> {
        for (gi, &budget) in cfg.grid.iter().enumerate() {
            for method in &methods {
                let started = Instant::now();
                let tag = match method.baseline() {
                    None => StreamTag::OptFit,
                    Some(_) => StreamTag::Reinforce,
                };
                let values_raw: Vec<Option<f64>> = (0..cfg.trials)
                    .into_par_iter()
                    .map(|trial| {
                        let trial_id = (gi * cfg.trials + trial) as u64;
                        let mut rng = stream_rng(cfg.seed, trial_id, tag);
                        let ctrl = method.learn(&inst, horizon, budget, &mut rng).ok()?;
                        let cost = cost_true_noise(inst.system(), &ctrl.k, horizon).ok()?;
                        Some(budget as f64 * (cost - j_star))
                    })
                    .collect();
                let elapsed = started.elapsed().as_secs_f64();

                let values: Vec<f64> = values_raw.iter().copied().flatten().collect();
                let failures = cfg.trials - values.len();
                let (mean, stderr) = mean_and_stderr(&values);
                let prediction = method.prediction(&inst, horizon)?;
                report.rows.push(ReportRow {
                    task: "opt".into(),
                    method: if method.baseline().is_some() {
                        "reinforce".into()
                    } else {
                        method.name().into()
                    },
                    baseline: method.baseline().map(|b| b.name().into()),
                    n: inst.state_dim(),
                    d: inst.input_dim(),
                    rho: inst.rho(),
                    sigma_w: cfg.sigma_w,
                    sigma_u: cfg.sigma_u,
                    horizon_t: Some(horizon),
                    rollouts_n: Some(budget),
                    trials: cfg.trials,
                    failures,
                    scaled_risk_mean: mean,
                    scaled_risk_stderr: stderr,
                    prediction: Some(prediction.value),
                    prediction_kind: Some(prediction.kind.as_str().into()),
                    seed: cfg.seed,
                    wall_time: elapsed,
                });
            }
        }
        Ok(())
    })?;
    Ok(report)
}

/// Every applicable closed-form prediction for the configured instance, as a
/// JSON document. No simulation happens here.
pub fn predict(cfg: &ExperimentConfig) -> Result<serde_json::Value> {
    cfg.validate()?;
    match cfg.task {
        Task::Eval => {
            let inst = build_eval_instance(cfg)?;
            Ok(serde_json::json!({
                "task": "eval",
                "instance": inst.to_json(),
                "predictions": {
                    "plugin": eval_plugin_limit(&inst)?,
                    "lstd_lower": lstd_limit_lower(&inst)?,
                    "lstd_exact_trace": lstd_limit_exact(&inst)?,
                }
            }))
        }
        Task::Opt => {
            let inst = build_opt_instance(cfg)?;
            let horizon = cfg.horizon.expect("validated");
            Ok(serde_json::json!({
                "task": "opt",
                "horizon": horizon,
                "instance": inst.to_json(),
                "predictions": {
                    "nominal": opt_plugin_limit(&inst, horizon)?,
                    "reinforce_simple": pg_risk_lower(&inst, horizon, BaselineKind::Simple)?,
                    "reinforce_value": pg_risk_lower(&inst, horizon, BaselineKind::Value)?,
                    "reinforce_advantage": pg_risk_lower(&inst, horizon, BaselineKind::Advantage)?,
                }
            }))
        }
    }
}

/// Runs the configured task once per state dimension in `n_grid` and
/// concatenates the rows. When the base config has `d == n`, the input (or
/// subspace) dimension tracks `n`; otherwise it is clamped to `n`.
pub fn sweep(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    if cfg.n_grid.is_empty() {
        return Err(Error::InvalidConfig("sweep needs a nonempty n_grid".into()));
    }
    let mut combined = ExperimentReport::default();
    for &n in &cfg.n_grid {
        let mut sub = cfg.clone();
        sub.n = n;
        sub.d = if cfg.d == cfg.n { n } else { cfg.d.min(n) };
        sub.n_grid = Vec::new();
        let report = match cfg.task {
            Task::Eval => run_policy_eval_experiment(&sub)?,
            Task::Opt => run_policy_opt_experiment(&sub)?,
        };
        combined.rows.extend(report.rows);
    }
    Ok(combined)
}

/// Renders a report in the configured format.
pub fn render_report(report: &ExperimentReport, format: OutputFormat) -> Result<String> {
    match format {
        OutputFormat::Csv => Ok(report.to_csv()),
        OutputFormat::Json => report.to_json(),
    }
}
