//! Policy optimization: certainty-equivalent (nominal) control from
//! open-loop system identification, and REINFORCE with pluggable baselines.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lqr::{
    advantage, rollout_exploring, value_params, LinearSystem, Trajectory, ValueParams,
};
use crate::solvers::{
    dare_zero_r, min_singular_value, operator_norm, spectral_radius,
};

/// Least-squares dynamics fit from exploring rollouts.
#[derive(Debug, Clone)]
pub struct DynamicsFit {
    pub a_hat: DMatrix<f64>,
    pub b_hat: DMatrix<f64>,
    /// Condition number of the regularized regressor Gram matrix.
    pub gram_condition: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControllerSource {
    Nominal,
    Reinforce,
}

/// A learned static feedback.
#[derive(Debug, Clone)]
pub struct Controller {
    pub k: DMatrix<f64>,
    pub source: ControllerSource,
    /// Set when the nominal method's rejection branch fired.
    pub thresholded: bool,
}

/// Score-function baseline variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaselineKind {
    Simple,
    Value,
    Advantage,
}

impl BaselineKind {
    pub fn name(self) -> &'static str {
        match self {
            BaselineKind::Simple => "simple",
            BaselineKind::Value => "value",
            BaselineKind::Advantage => "advantage",
        }
    }
}

impl std::str::FromStr for BaselineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "simple" => Ok(BaselineKind::Simple),
            "value" => Ok(BaselineKind::Value),
            "advantage" => Ok(BaselineKind::Advantage),
            other => Err(Error::InvalidConfig(format!("unknown baseline {other:?}"))),
        }
    }
}

/// Regularized least squares for `Theta = (A, B)` from rollouts, regressors
/// `z_t = (x_t, u_t)`.
pub fn fit_dynamics(trajs: &[Trajectory], lambda: f64) -> Result<DynamicsFit> {
    if trajs.is_empty() {
        return Err(Error::InvalidConfig("no trajectories to fit".into()));
    }
    if !(lambda > 0.0) {
        return Err(Error::InvalidConfig("ridge must be positive".into()));
    }
    let n = trajs[0].states[0].len();
    let d = trajs[0]
        .inputs
        .first()
        .map(|u| u.len())
        .ok_or_else(|| Error::InvalidConfig("trajectories carry no inputs".into()))?;
    let p = n + d;
    let mut gram = DMatrix::<f64>::zeros(p, p);
    let mut cross = DMatrix::<f64>::zeros(n, p);
    let mut z = nalgebra::DVector::<f64>::zeros(p);
    for traj in trajs {
        for t in 0..traj.horizon {
            z.rows_mut(0, n).copy_from(&traj.states[t]);
            z.rows_mut(n, d).copy_from(&traj.inputs[t]);
            gram.ger(1.0, &z, &z, 1.0);
            cross.ger(1.0, &traj.states[t + 1], &z, 1.0);
        }
    }
    gram += DMatrix::identity(p, p) * lambda;

    let eig = gram.clone().symmetric_eigen();
    let gram_condition = eig.eigenvalues.max() / eig.eigenvalues.min().max(f64::MIN_POSITIVE);
    let chol = gram
        .cholesky()
        .ok_or_else(|| Error::Numerical("regularized Gram not positive definite".into()))?;
    let theta = chol.solve(&cross.transpose()).transpose();
    Ok(DynamicsFit {
        a_hat: theta.columns(0, n).into_owned(),
        b_hat: theta.columns(n, d).into_owned(),
        gram_condition,
    })
}

/// Certainty-equivalent controller: reject implausible fits, otherwise solve
/// the zero-input-penalty Riccati equation at the fit.
pub fn nominal_controller(
    fit: &DynamicsFit,
    varrho: f64,
    zeta: f64,
    psi: f64,
    gamma: f64,
) -> Result<Controller> {
    if !(0.0 < varrho && varrho < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "varrho must lie in (0,1), got {varrho}"
        )));
    }
    if !(zeta > 0.0 && psi > 0.0 && gamma > 0.0) {
        return Err(Error::InvalidConfig(
            "thresholds zeta, psi, gamma must be positive".into(),
        ));
    }
    let d = fit.b_hat.ncols();
    let n = fit.a_hat.nrows();
    let rejected = spectral_radius(&fit.a_hat)? > varrho
        || operator_norm(&fit.a_hat) > zeta
        || operator_norm(&fit.b_hat) > psi
        || min_singular_value(&fit.b_hat) < gamma;
    if rejected {
        return Ok(Controller {
            k: DMatrix::zeros(d, n),
            source: ControllerSource::Nominal,
            thresholded: true,
        });
    }
    let dare = dare_zero_r(&fit.a_hat, &fit.b_hat, &DMatrix::identity(n, n))?;
    Ok(Controller {
        k: dare.k,
        source: ControllerSource::Nominal,
        thresholded: false,
    })
}

/// One-trajectory score-function gradient
/// `g = (1/sigma_u^2) sum_{t=0}^{T-1} eta_t x_t^T Psi_t`.
pub fn pg_gradient(
    sys: &LinearSystem,
    k: &DMatrix<f64>,
    traj: &Trajectory,
    baseline: BaselineKind,
    vp: &ValueParams,
) -> Result<DMatrix<f64>> {
    if !traj.is_exploring() {
        return Err(Error::InvalidConfig(
            "policy gradient needs an exploring trajectory".into(),
        ));
    }
    if vp.horizon() != traj.horizon {
        return Err(Error::InvalidConfig(format!(
            "value parameters built for horizon {}, trajectory has {}",
            vp.horizon(),
            traj.horizon
        )));
    }
    if !vp.matches_feedback(k) {
        return Err(Error::InvalidConfig(
            "stale value parameters: not computed for this feedback".into(),
        ));
    }
    let horizon = traj.horizon;
    let d = sys.input_dim();
    let n = sys.state_dim();

    // Suffix sums tail[t] = sum_{l=t}^{T} ||x_l||^2.
    let mut tail = vec![0.0; horizon + 2];
    for t in (0..=horizon).rev() {
        tail[t] = tail[t + 1] + traj.states[t].norm_squared();
    }

    let mut g = DMatrix::<f64>::zeros(d, n);
    for t in 0..horizon {
        let psi = match baseline {
            BaselineKind::Simple => tail[t + 1],
            BaselineKind::Value => tail[t] - vp.value(t, &traj.states[t]),
            BaselineKind::Advantage => {
                advantage(sys, vp, t, &traj.states[t], &traj.inputs[t])?
            }
        };
        g.ger(psi, &traj.noises[t], &traj.states[t], 1.0);
    }
    g /= sys.sigma_u().powi(2);
    Ok(g)
}

/// Frobenius-nearest matrix with operator norm at most `zeta`: singular
/// values clipped at `zeta`.
pub fn project_spectral_ball(k: &DMatrix<f64>, zeta: f64) -> Result<DMatrix<f64>> {
    if !(zeta > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "projection radius must be positive, got {zeta}"
        )));
    }
    let svd = k.clone().svd(true, true);
    if svd.singular_values.max() <= zeta {
        return Ok(k.clone());
    }
    let mut svd = svd;
    for s in svd.singular_values.iter_mut() {
        *s = s.min(zeta);
    }
    svd.recompose()
        .map_err(|e| Error::Numerical(format!("SVD recompose failed: {e}")))
}

/// Projected REINFORCE with step sizes
/// `alpha_i = [2 (T-1) sigma_w^2 sigma_d(B)^2 i]^{-1}`, starting from `K_1 = 0`
/// and returning `K_N`.
pub fn reinforce<R: Rng + ?Sized>(
    sys: &LinearSystem,
    rollouts: usize,
    horizon: usize,
    baseline: BaselineKind,
    zeta: f64,
    rng: &mut R,
) -> Result<Controller> {
    if rollouts < 1 {
        return Err(Error::InvalidConfig("need at least one round".into()));
    }
    if horizon < 2 {
        return Err(Error::InvalidConfig("reinforce needs horizon >= 2".into()));
    }
    if !(zeta > 0.0) {
        return Err(Error::InvalidConfig("threshold zeta must be positive".into()));
    }
    let d = sys.input_dim();
    let n = sys.state_dim();
    let sigma_min_b = min_singular_value(sys.b());
    let rsc = 2.0 * (horizon as f64 - 1.0) * sys.sigma_w().powi(2) * sigma_min_b.powi(2);
    if !(rsc > 0.0) {
        return Err(Error::Rank(
            "step-size constant degenerate: B rank deficient".into(),
        ));
    }

    let mut k = DMatrix::<f64>::zeros(d, n);
    // Rounds i = 1..N-1 update K_{i+1}; K_N is returned.
    for i in 1..rollouts {
        let vp = value_params(sys, &k, horizon)?;
        let traj = rollout_exploring(sys, &k, horizon, rng)?;
        let g = pg_gradient(sys, &k, &traj, baseline, &vp)?;
        let alpha = 1.0 / (rsc * i as f64);
        k = project_spectral_ball(&(&k - alpha * g), zeta)?;
    }
    Ok(Controller {
        k,
        source: ControllerSource::Reinforce,
        thresholded: false,
    })
}
