//! Method registry: every estimator/learner variant lives behind a common
//! trait, is registered by name, and is selected at runtime from the config
//! or CLI method list.

use nalgebra::DMatrix;
use rand_chacha::ChaCha8Rng;

use crate::asymptotics::{
    eval_plugin_limit, lstd_limit_exact, opt_plugin_limit, pg_risk_lower, RiskPrediction,
};
use crate::error::{Error, Result};
use crate::instances::{EvalInstance, OptInstance};
use crate::lqr::{rollout_exploring, Trajectory};
use crate::policy_eval::{
    lstd_policy_eval, lstd_policy_eval_empirical, plugin_policy_eval, true_average_cost,
    EvalEstimate,
};
use crate::policy_opt::{
    fit_dynamics, nominal_controller, reinforce, BaselineKind, Controller,
};
use crate::solvers::{min_singular_value, operator_norm, spectral_radius};

/// A policy-evaluation strategy: one trajectory in, one estimate out.
pub trait EvalMethod: Send + Sync {
    fn name(&self) -> &'static str;

    fn estimate(&self, inst: &EvalInstance, traj: &Trajectory) -> Result<EvalEstimate>;

    /// The closed-form scaled-risk prediction attached to report rows.
    fn prediction(&self, inst: &EvalInstance) -> Result<RiskPrediction>;
}

/// A policy-optimization strategy: a rollout budget in, a controller out.
pub trait OptMethod: Send + Sync {
    fn name(&self) -> &'static str;

    fn baseline(&self) -> Option<BaselineKind> {
        None
    }

    fn learn(
        &self,
        inst: &OptInstance,
        horizon: usize,
        rollouts: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Controller>;

    fn prediction(&self, inst: &OptInstance, horizon: usize) -> Result<RiskPrediction>;
}

/// Model-based plugin evaluator. Thresholds follow the experiment convention
/// of being set from the known instance: `zeta = (rho(L)+1)/2`, `psi = 2||L||`.
pub struct PluginEval {
    pub ridge: f64,
}

impl EvalMethod for PluginEval {
    fn name(&self) -> &'static str {
        "plugin"
    }

    fn estimate(&self, inst: &EvalInstance, traj: &Trajectory) -> Result<EvalEstimate> {
        let zeta = (spectral_radius(inst.l_star())? + 1.0) / 2.0;
        let psi = 2.0 * operator_norm(inst.l_star());
        plugin_policy_eval(traj, inst.cost_weight(), self.ridge, zeta, psi)
    }

    fn prediction(&self, inst: &EvalInstance) -> Result<RiskPrediction> {
        eval_plugin_limit(inst)
    }
}

/// LSTD evaluator; `empirical` switches the average-cost offset from the true
/// value to the per-trajectory empirical mean.
pub struct LstdEval {
    pub empirical: bool,
}

impl EvalMethod for LstdEval {
    fn name(&self) -> &'static str {
        if self.empirical {
            "lstd-empirical"
        } else {
            "lstd"
        }
    }

    fn estimate(&self, inst: &EvalInstance, traj: &Trajectory) -> Result<EvalEstimate> {
        if self.empirical {
            lstd_policy_eval_empirical(traj, inst.cost_weight())
        } else {
            lstd_policy_eval(traj, inst.cost_weight(), true_average_cost(inst)?)
        }
    }

    fn prediction(&self, inst: &EvalInstance) -> Result<RiskPrediction> {
        lstd_limit_exact(inst)
    }
}

/// Certainty-equivalent control from open-loop identification. Thresholds
/// set from the instance: `varrho = (rho(A)+1)/2`, `zeta = 2||A||`,
/// `psi = 2||B||`, `gamma = sigma_d(B)/2`.
pub struct NominalControl {
    pub ridge: f64,
}

impl OptMethod for NominalControl {
    fn name(&self) -> &'static str {
        "nominal"
    }

    fn learn(
        &self,
        inst: &OptInstance,
        horizon: usize,
        rollouts: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Controller> {
        let sys = inst.system();
        let open_loop = DMatrix::zeros(sys.input_dim(), sys.state_dim());
        let mut trajs = Vec::with_capacity(rollouts);
        for _ in 0..rollouts {
            trajs.push(rollout_exploring(sys, &open_loop, horizon, rng)?);
        }
        let fit = fit_dynamics(&trajs, self.ridge)?;
        let varrho = (spectral_radius(sys.a())? + 1.0) / 2.0;
        let zeta = 2.0 * operator_norm(sys.a());
        let psi = 2.0 * operator_norm(sys.b());
        let gamma = min_singular_value(sys.b()) / 2.0;
        nominal_controller(&fit, varrho, zeta, psi, gamma)
    }

    fn prediction(&self, inst: &OptInstance, horizon: usize) -> Result<RiskPrediction> {
        opt_plugin_limit(inst, horizon)
    }
}

/// Projected REINFORCE with a chosen baseline. `zeta` defaults to twice the
/// optimal gain's operator norm.
pub struct ReinforceMethod {
    pub baseline: BaselineKind,
    pub zeta: Option<f64>,
}

impl OptMethod for ReinforceMethod {
    fn name(&self) -> &'static str {
        match self.baseline {
            BaselineKind::Simple => "reinforce-simple",
            BaselineKind::Value => "reinforce-value",
            BaselineKind::Advantage => "reinforce-advantage",
        }
    }

    fn baseline(&self) -> Option<BaselineKind> {
        Some(self.baseline)
    }

    fn learn(
        &self,
        inst: &OptInstance,
        horizon: usize,
        rollouts: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Controller> {
        let zeta = self
            .zeta
            .unwrap_or_else(|| 2.0 * operator_norm(inst.k_star()));
        reinforce(inst.system(), rollouts, horizon, self.baseline, zeta, rng)
    }

    fn prediction(&self, inst: &OptInstance, horizon: usize) -> Result<RiskPrediction> {
        pg_risk_lower(inst, horizon, self.baseline)
    }
}

pub const EVAL_METHOD_NAMES: &[&str] = &["plugin", "lstd", "lstd-empirical"];
pub const OPT_METHOD_NAMES: &[&str] = &[
    "nominal",
    "reinforce-simple",
    "reinforce-value",
    "reinforce-advantage",
];

#[derive(Debug, Clone, Copy)]
pub struct MethodOptions {
    pub ridge: f64,
    pub reinforce_zeta: Option<f64>,
}

impl Default for MethodOptions {
    fn default() -> Self {
        Self {
            ridge: 1e-3,
            reinforce_zeta: None,
        }
    }
}

pub fn eval_method(name: &str, opts: &MethodOptions) -> Result<Box<dyn EvalMethod>> {
    match name {
        "plugin" => Ok(Box::new(PluginEval { ridge: opts.ridge })),
        "lstd" => Ok(Box::new(LstdEval { empirical: false })),
        "lstd-empirical" => Ok(Box::new(LstdEval { empirical: true })),
        other => Err(Error::InvalidConfig(format!(
            "unknown eval method {other:?}; registered: {EVAL_METHOD_NAMES:?}"
        ))),
    }
}

pub fn opt_method(name: &str, opts: &MethodOptions) -> Result<Box<dyn OptMethod>> {
    match name {
        "nominal" => Ok(Box::new(NominalControl { ridge: opts.ridge })),
        "reinforce-simple" => Ok(Box::new(ReinforceMethod {
            baseline: BaselineKind::Simple,
            zeta: opts.reinforce_zeta,
        })),
        "reinforce-value" => Ok(Box::new(ReinforceMethod {
            baseline: BaselineKind::Value,
            zeta: opts.reinforce_zeta,
        })),
        "reinforce-advantage" => Ok(Box::new(ReinforceMethod {
            baseline: BaselineKind::Advantage,
            zeta: opts.reinforce_zeta,
        })),
        other => Err(Error::InvalidConfig(format!(
            "unknown opt method {other:?}; registered: {OPT_METHOD_NAMES:?}"
        ))),
    }
}
