//! Single-trajectory policy evaluation: the model-based plugin estimator
//! (least-squares closed-loop fit, then a Lyapunov solve) and least-squares
//! temporal difference learning over the feature map `phi(x) = svec(x x^T)`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::instances::EvalInstance;
use crate::kron::{smat, svec_of_outer, SymVec};
use crate::lqr::Trajectory;
use crate::solvers::{dlyap, operator_norm, spectral_radius};

/// Condition-number guard for the LSTD design matrix.
pub const LSTD_MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalMethodKind {
    Plugin,
    Lstd,
}

/// Output of a policy-evaluation estimator.
#[derive(Debug, Clone)]
pub struct EvalEstimate {
    pub p_hat: DMatrix<f64>,
    /// Fitted closed-loop matrix (plugin only).
    pub l_hat: Option<DMatrix<f64>>,
    /// Whether the rejection branch fired (estimate forced to zero).
    pub thresholded: bool,
    pub method: EvalMethodKind,
}

/// Least-squares closed-loop fit
/// `L = (sum x_{t+1} x_t^T)(sum x_t x_t^T + lambda I)^{-1}`.
pub fn fit_closed_loop(traj: &Trajectory, lambda: f64) -> Result<DMatrix<f64>> {
    if traj.horizon < 1 {
        return Err(Error::InvalidConfig(
            "need at least one transition to fit".into(),
        ));
    }
    if lambda < 0.0 {
        return Err(Error::InvalidConfig("ridge must be nonnegative".into()));
    }
    let n = traj.states[0].len();
    let mut gram = DMatrix::<f64>::zeros(n, n);
    let mut cross = DMatrix::<f64>::zeros(n, n);
    for t in 0..traj.horizon {
        let x = &traj.states[t];
        let xn = &traj.states[t + 1];
        gram.ger(1.0, x, x, 1.0);
        cross.ger(1.0, xn, x, 1.0);
    }
    gram += DMatrix::identity(n, n) * lambda;
    // L^T solves gram * L^T = cross^T (gram is symmetric).
    let chol = gram.cholesky().ok_or_else(|| {
        Error::Rank("singular Gram matrix in closed-loop fit (lambda = 0)".into())
    })?;
    Ok(chol.solve(&cross.transpose()).transpose())
}

/// Plugin estimator: fit the closed loop, reject if it looks unstable or too
/// large, otherwise solve the Lyapunov equation at the fitted matrix.
pub fn plugin_policy_eval(
    traj: &Trajectory,
    m_weight: &DMatrix<f64>,
    lambda: f64,
    zeta: f64,
    psi: f64,
) -> Result<EvalEstimate> {
    if !(0.0 < zeta && zeta < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "zeta must lie in (0,1), got {zeta}"
        )));
    }
    if !(psi > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "psi must be positive, got {psi}"
        )));
    }
    let l_hat = fit_closed_loop(traj, lambda)?;
    let n = l_hat.nrows();
    let rejected = spectral_radius(&l_hat)? > zeta || operator_norm(&l_hat) > psi;
    if rejected {
        return Ok(EvalEstimate {
            p_hat: DMatrix::zeros(n, n),
            l_hat: Some(l_hat),
            thresholded: true,
            method: EvalMethodKind::Plugin,
        });
    }
    let p_hat = dlyap(&l_hat, m_weight)?.p;
    Ok(EvalEstimate {
        p_hat,
        l_hat: Some(l_hat),
        thresholded: false,
        method: EvalMethodKind::Plugin,
    })
}

/// Infinite-horizon average cost `lambda* = sigma_w^2 Tr(dlyap(L, M))`.
pub fn true_average_cost(inst: &EvalInstance) -> Result<f64> {
    let p_star = dlyap(inst.l_star(), inst.cost_weight())?.p;
    Ok(inst.sigma_w().powi(2) * p_star.trace())
}

fn lstd_solve(
    traj: &Trajectory,
    m_weight: &DMatrix<f64>,
    lambda_t: impl Fn(usize) -> f64,
) -> Result<EvalEstimate> {
    let n = traj.states[0].len();
    let dim = n * (n + 1) / 2;
    if traj.horizon < 1 {
        return Err(Error::InvalidConfig("empty trajectory".into()));
    }
    let mut design = DMatrix::<f64>::zeros(dim, dim);
    let mut rhs = DVector::<f64>::zeros(dim);
    let mut phi_t = svec_of_outer(&traj.states[0]);
    for t in 0..traj.horizon {
        let phi_next = svec_of_outer(&traj.states[t + 1]);
        let diff = &phi_t - &phi_next;
        design.ger(1.0, &phi_t, &diff, 1.0);
        let cost = traj.states[t].dot(&(m_weight * &traj.states[t]));
        rhs.axpy(cost - lambda_t(t), &phi_t, 1.0);
        phi_t = phi_next;
    }

    let svd = design.svd(true, true);
    let smax = svd.singular_values[0];
    let smin = svd.singular_values[svd.singular_values.len() - 1];
    if !(smin > 0.0) || smax / smin > LSTD_MAX_CONDITION {
        return Err(Error::Rank(format!(
            "LSTD design matrix ill-conditioned: condition {:e}",
            if smin > 0.0 { smax / smin } else { f64::INFINITY }
        )));
    }
    let w = svd
        .solve(&rhs, 0.0)
        .map_err(|e| Error::Numerical(format!("LSTD solve failed: {e}")))?;
    let p_hat = smat(&SymVec::from_vector(w)?);
    Ok(EvalEstimate {
        p_hat,
        l_hat: None,
        thresholded: false,
        method: EvalMethodKind::Lstd,
    })
}

/// LSTD with the average cost fixed at the known `lambda_star`.
pub fn lstd_policy_eval(
    traj: &Trajectory,
    m_weight: &DMatrix<f64>,
    lambda_star: f64,
) -> Result<EvalEstimate> {
    lstd_solve(traj, m_weight, |_| lambda_star)
}

/// LSTD with the empirical average cost `(1/T) sum_t c_t` applied as a
/// constant offset.
pub fn lstd_policy_eval_empirical(
    traj: &Trajectory,
    m_weight: &DMatrix<f64>,
) -> Result<EvalEstimate> {
    let mut total = 0.0;
    for t in 0..traj.horizon {
        total += traj.states[t].dot(&(m_weight * &traj.states[t]));
    }
    let lambda_hat = total / traj.horizon as f64;
    lstd_solve(traj, m_weight, |_| lambda_hat)
}
