//! Linear-system simulation, the finite-horizon quadratic cost and its
//! calculus, and analytic value/advantage functions for static feedback.
//!
//! Cost convention: `J_Sigma(K) = E[sum_{t=1}^{T} ||x_t||^2]` with `x_0 = 0`,
//! which coincides with the terminal-cost formulation when `Q = I`, `R = 0`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Entries beyond this magnitude turn a rollout into a typed divergence error.
pub const DIVERGENCE_LIMIT: f64 = 1e100;

/// The hidden environment `x_{t+1} = A x_t + B u_t + w_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSystem {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    sigma_w: f64,
    sigma_u: f64,
}

impl LinearSystem {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, sigma_w: f64, sigma_u: f64) -> Result<Self> {
        let n = a.nrows();
        let d = b.ncols();
        if a.ncols() != n || b.nrows() != n {
            return Err(Error::Dimension(format!(
                "system dims: A {}x{}, B {}x{}",
                a.nrows(),
                a.ncols(),
                b.nrows(),
                b.ncols()
            )));
        }
        if d > n {
            return Err(Error::Dimension(format!(
                "underactuated systems only: d = {d} exceeds n = {n}"
            )));
        }
        if !(sigma_w > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "sigma_w must be positive, got {sigma_w}"
            )));
        }
        if sigma_u < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "sigma_u must be nonnegative, got {sigma_u}"
            )));
        }
        Ok(Self {
            a,
            b,
            sigma_w,
            sigma_u,
        })
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn sigma_w(&self) -> f64 {
        self.sigma_w
    }

    pub fn sigma_u(&self) -> f64 {
        self.sigma_u
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.b.ncols()
    }

    /// Closed-loop matrix `A + B K`.
    pub fn closed_loop(&self, k: &DMatrix<f64>) -> DMatrix<f64> {
        &self.a + &self.b * k
    }
}

/// One rollout: states `x_0..x_T` (with `x_0 = 0`), inputs `u_0..u_{T-1}`,
/// and the exploration noises `eta_0..eta_{T-1}` when generated exploring.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub states: Vec<DVector<f64>>,
    pub inputs: Vec<DVector<f64>>,
    pub noises: Vec<DVector<f64>>,
    pub horizon: usize,
}

impl Trajectory {
    pub fn is_exploring(&self) -> bool {
        !self.noises.is_empty()
    }
}

fn gaussian_vector<R: Rng + ?Sized>(dim: usize, scale: f64, rng: &mut R) -> DVector<f64> {
    DVector::from_fn(dim, |_, _| scale * rng.sample::<f64, _>(StandardNormal))
}

fn check_finite(x: &DVector<f64>, step: usize) -> Result<()> {
    if x.iter().any(|v| !v.is_finite() || v.abs() > DIVERGENCE_LIMIT) {
        return Err(Error::Divergence {
            step,
            limit: DIVERGENCE_LIMIT,
        });
    }
    Ok(())
}

/// Closed-loop rollout `x_{t+1} = (A + B K) x_t + w_t` from `x_0 = 0`.
pub fn rollout_closed_loop<R: Rng + ?Sized>(
    sys: &LinearSystem,
    k: &DMatrix<f64>,
    horizon: usize,
    rng: &mut R,
) -> Result<Trajectory> {
    if horizon < 1 {
        return Err(Error::InvalidConfig("horizon must be at least 1".into()));
    }
    let n = sys.state_dim();
    let l = sys.closed_loop(k);
    let mut states = Vec::with_capacity(horizon + 1);
    let mut inputs = Vec::with_capacity(horizon);
    let mut x = DVector::zeros(n);
    states.push(x.clone());
    for t in 0..horizon {
        inputs.push(k * &x);
        let w = gaussian_vector(n, sys.sigma_w, rng);
        x = &l * &x + w;
        check_finite(&x, t + 1)?;
        states.push(x.clone());
    }
    Ok(Trajectory {
        states,
        inputs,
        noises: Vec::new(),
        horizon,
    })
}

/// Exploring rollout `u_t = K x_t + eta_t`, `eta_t ~ N(0, sigma_u^2 I_d)`.
///
/// Per step the exploration noise is drawn before the process noise, which
/// pins the sample stream for reproducibility.
pub fn rollout_exploring<R: Rng + ?Sized>(
    sys: &LinearSystem,
    k: &DMatrix<f64>,
    horizon: usize,
    rng: &mut R,
) -> Result<Trajectory> {
    if horizon < 1 {
        return Err(Error::InvalidConfig("horizon must be at least 1".into()));
    }
    if !(sys.sigma_u > 0.0) && sys.sigma_u != 0.0 {
        return Err(Error::InvalidConfig("sigma_u must be set".into()));
    }
    let n = sys.state_dim();
    let d = sys.input_dim();
    let mut states = Vec::with_capacity(horizon + 1);
    let mut inputs = Vec::with_capacity(horizon);
    let mut noises = Vec::with_capacity(horizon);
    let mut x = DVector::zeros(n);
    states.push(x.clone());
    for t in 0..horizon {
        let eta = gaussian_vector(d, sys.sigma_u, rng);
        let u = k * &x + &eta;
        let w = gaussian_vector(n, sys.sigma_w, rng);
        x = &sys.a * &x + &sys.b * &u + w;
        check_finite(&x, t + 1)?;
        inputs.push(u);
        noises.push(eta);
        states.push(x.clone());
    }
    Ok(Trajectory {
        states,
        inputs,
        noises,
        horizon,
    })
}

/// Exact finite-horizon cost
/// `J_Sigma(K) = T Tr(Sigma) + sum_{t=1}^{T} sum_{l=1}^{t-1} Tr(L^l Sigma (L^l)^T)`
/// with `L = A + B K`. No stability required; the sum is finite.
pub fn cost_closed_form(
    sys: &LinearSystem,
    k: &DMatrix<f64>,
    horizon: usize,
    sigma: &DMatrix<f64>,
) -> Result<f64> {
    if horizon < 2 {
        return Err(Error::InvalidConfig(
            "cost_closed_form needs horizon >= 2".into(),
        ));
    }
    let n = sys.state_dim();
    if sigma.nrows() != n || sigma.ncols() != n {
        return Err(Error::Dimension(format!(
            "Sigma must be {n}x{n}, got {}x{}",
            sigma.nrows(),
            sigma.ncols()
        )));
    }
    let l = sys.closed_loop(k);
    let mut total = horizon as f64 * sigma.trace();
    // sum over powers: the l-th power appears (T - l) times.
    let mut lp = l.clone();
    for pow in 1..horizon {
        let weight = (horizon - pow) as f64;
        total += weight * (&lp * sigma * lp.transpose()).trace();
        lp = &lp * &l;
    }
    Ok(total)
}

/// Shorthand for `J(K) = J_{sigma_w^2 I}(K)`.
pub fn cost_true_noise(sys: &LinearSystem, k: &DMatrix<f64>, horizon: usize) -> Result<f64> {
    let n = sys.state_dim();
    let sigma = DMatrix::identity(n, n) * sys.sigma_w.powi(2);
    cost_closed_form(sys, k, horizon, &sigma)
}

/// Exact gradient of `J_Sigma`:
/// `2 (T-1) B^T L Sigma
///  + 2 sum_{l=2}^{T-1} sum_{k=0}^{l-1} (T-l) B^T (L^k)^T L^l Sigma (L^{l-k-1})^T`.
pub fn grad_cost(
    sys: &LinearSystem,
    k: &DMatrix<f64>,
    horizon: usize,
    sigma: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    if horizon < 2 {
        return Err(Error::InvalidConfig("grad_cost needs horizon >= 2".into()));
    }
    let l = sys.closed_loop(k);
    let bt = sys.b.transpose();

    // Powers L^0 .. L^{T-2}.
    let mut powers = Vec::with_capacity(horizon.max(2) - 1);
    let n = sys.state_dim();
    powers.push(DMatrix::identity(n, n));
    for _ in 1..(horizon - 1).max(1) {
        let next = powers.last().unwrap() * &l;
        powers.push(next);
    }

    let mut grad = 2.0 * (horizon as f64 - 1.0) * &bt * &l * sigma;
    for el in 2..horizon {
        let weight = 2.0 * (horizon - el) as f64;
        let l_el = &powers[el - 1] * &l; // L^el
        for kk in 0..el {
            grad += weight * &bt * powers[kk].transpose() * &l_el * sigma
                * powers[el - kk - 1].transpose();
        }
    }
    Ok(grad)
}

/// The Hessian quadratic form of `J_Sigma` at the optimum,
/// `H -> 2 (T-1) Tr(Sigma H^T B^T B H)`.
///
/// Only valid when `range(A) <= range(B)` so that the closed loop cancels at
/// the optimum.
#[derive(Debug, Clone)]
pub struct HessianAtOpt {
    factor: f64,
    btb: DMatrix<f64>,
    sigma: DMatrix<f64>,
}

impl HessianAtOpt {
    pub fn quad_form(&self, h: &DMatrix<f64>) -> f64 {
        self.factor * (&self.sigma * h.transpose() * &self.btb * h).trace()
    }

    /// Dense matrix `2 (T-1) (Sigma (x) B^T B)` acting on column-stacked
    /// `vec(H)` for a `d x n` direction `H`.
    pub fn matrix(&self) -> DMatrix<f64> {
        self.factor * crate::kron::kron(&self.sigma, &self.btb)
    }
}

pub fn hessian_at_opt(
    sys: &LinearSystem,
    horizon: usize,
    sigma: &DMatrix<f64>,
) -> Result<HessianAtOpt> {
    if horizon < 2 {
        return Err(Error::InvalidConfig(
            "hessian_at_opt needs horizon >= 2".into(),
        ));
    }
    // range(A) <= range(B) check via the projector onto range(B).
    let svd = sys.b.clone().svd(true, false);
    let u = svd.u.as_ref().expect("svd requested u");
    let rank = svd
        .singular_values
        .iter()
        .filter(|s| **s > 1e-12 * svd.singular_values[0].max(1.0))
        .count();
    let ur = u.columns(0, rank);
    let residual = (&sys.a - &ur * ur.transpose() * &sys.a).norm();
    if residual > 1e-8 * sys.a.norm().max(1.0) {
        return Err(Error::ModelAssumption(format!(
            "range(A) not contained in range(B): residual {residual:e}"
        )));
    }
    Ok(HessianAtOpt {
        factor: 2.0 * (horizon as f64 - 1.0),
        btb: sys.b.transpose() * &sys.b,
        sigma: sigma.clone(),
    })
}

/// Quadratic value-function parameters under the exploring policy
/// `u = K x + eta`: `V_t(x) = x^T Q_t x + c_t` with
/// `Q_T = I`, `c_T = 0`,
/// `Q_t = I + L^T Q_{t+1} L`,
/// `c_t = c_{t+1} + sigma_u^2 Tr(B^T Q_{t+1} B) + sigma_w^2 Tr(Q_{t+1})`.
#[derive(Debug, Clone)]
pub struct ValueParams {
    qs: Vec<DMatrix<f64>>,
    cs: Vec<f64>,
    k: DMatrix<f64>,
    l: DMatrix<f64>,
    horizon: usize,
}

impl ValueParams {
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn q(&self, t: usize) -> &DMatrix<f64> {
        &self.qs[t]
    }

    pub fn c(&self, t: usize) -> f64 {
        self.cs[t]
    }

    /// `V_t(x)` under the exploring policy.
    pub fn value(&self, t: usize, x: &DVector<f64>) -> f64 {
        x.dot(&(&self.qs[t] * x)) + self.cs[t]
    }

    /// True when these parameters were computed for exactly this feedback.
    pub fn matches_feedback(&self, k: &DMatrix<f64>) -> bool {
        self.k == *k
    }
}

pub fn value_params(sys: &LinearSystem, k: &DMatrix<f64>, horizon: usize) -> Result<ValueParams> {
    if horizon < 1 {
        return Err(Error::InvalidConfig("value_params needs horizon >= 1".into()));
    }
    let n = sys.state_dim();
    let l = sys.closed_loop(k);
    let mut qs = vec![DMatrix::zeros(0, 0); horizon + 1];
    let mut cs = vec![0.0; horizon + 1];
    qs[horizon] = DMatrix::identity(n, n);
    for t in (0..horizon).rev() {
        let q_next = qs[t + 1].clone();
        qs[t] = DMatrix::identity(n, n) + l.transpose() * &q_next * &l;
        cs[t] = cs[t + 1]
            + sys.sigma_u.powi(2) * (sys.b.transpose() * &q_next * &sys.b).trace()
            + sys.sigma_w.powi(2) * q_next.trace();
    }
    Ok(ValueParams {
        qs,
        cs,
        k: k.clone(),
        l,
        horizon,
    })
}

/// Advantage of playing `u` at `(t, x)` against the policy baseline:
/// `(A x + B u)^T Q_{t+1} (A x + B u) - (L x)^T Q_{t+1} (L x)
///  - sigma_u^2 Tr(B^T Q_{t+1} B)`.
pub fn advantage(
    sys: &LinearSystem,
    vp: &ValueParams,
    t: usize,
    x: &DVector<f64>,
    u: &DVector<f64>,
) -> Result<f64> {
    if t >= vp.horizon {
        return Err(Error::Dimension(format!(
            "advantage index {t} out of range for horizon {}",
            vp.horizon
        )));
    }
    let q_next = &vp.qs[t + 1];
    let next_mean = &sys.a * x + &sys.b * u;
    let on_policy = &vp.l * x;
    Ok(next_mean.dot(&(q_next * &next_mean)) - on_policy.dot(&(q_next * &on_policy))
        - sys.sigma_u.powi(2) * (sys.b.transpose() * q_next * &sys.b).trace())
}
