//! Generators for the two benchmark families.
//!
//! Policy evaluation uses closed loops `L = tau P_E + gamma I` with `P_E` an
//! orthogonal projector onto a random subspace; both evaluation algorithms
//! depend on the system only through `L` and the cost weight, so the
//! `(A, B, K)` split is never materialized. Policy optimization uses
//! `(A, B) = (rho U U^T, rho U)` with orthonormal `U`, whose optimal feedback
//! `-U^T` cancels the state in one step.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lqr::LinearSystem;
use crate::rng::{stream_rng, StreamTag};
use crate::solvers::min_singular_value;

/// Policy-evaluation instance: closed loop plus cost weight.
#[derive(Debug, Clone)]
pub struct EvalInstance {
    l_star: DMatrix<f64>,
    m: DMatrix<f64>,
    sigma_w: f64,
    tau: f64,
    gamma: f64,
    subspace_dim: usize,
    seed: u64,
}

impl EvalInstance {
    pub fn l_star(&self) -> &DMatrix<f64> {
        &self.l_star
    }

    pub fn cost_weight(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn sigma_w(&self) -> f64 {
        self.sigma_w
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn subspace_dim(&self) -> usize {
        self.subspace_dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn state_dim(&self) -> usize {
        self.l_star.nrows()
    }

    /// Contraction factor `tau + gamma` (equals the spectral norm of `L`).
    pub fn rho(&self) -> f64 {
        self.tau + self.gamma
    }

    pub fn with_sigma_w(mut self, sigma_w: f64) -> Result<Self> {
        if !(sigma_w > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "sigma_w must be positive, got {sigma_w}"
            )));
        }
        self.sigma_w = sigma_w;
        Ok(self)
    }
}

/// Policy-optimization instance from the orthonormal-range family.
#[derive(Debug, Clone)]
pub struct OptInstance {
    system: LinearSystem,
    u_star: DMatrix<f64>,
    k_star: DMatrix<f64>,
    rho: f64,
    seed: u64,
}

impl OptInstance {
    pub fn system(&self) -> &LinearSystem {
        &self.system
    }

    pub fn u_star(&self) -> &DMatrix<f64> {
        &self.u_star
    }

    pub fn k_star(&self) -> &DMatrix<f64> {
        &self.k_star
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn state_dim(&self) -> usize {
        self.system.state_dim()
    }

    pub fn input_dim(&self) -> usize {
        self.system.input_dim()
    }

    pub fn with_noise(self, sigma_w: f64, sigma_u: f64) -> Result<Self> {
        let system = LinearSystem::new(
            self.system.a().clone(),
            self.system.b().clone(),
            sigma_w,
            sigma_u,
        )?;
        Ok(Self { system, ..self })
    }
}

/// Orthonormal basis of a seeded Gaussian `n x d` draw via QR.
fn random_orthonormal(n: usize, d: usize, rng: &mut impl Rng) -> Result<DMatrix<f64>> {
    let raw = DMatrix::from_fn(n, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    if min_singular_value(&raw) < 1e-10 {
        return Err(Error::Rank("degenerate Gaussian draw".into()));
    }
    let qr = raw.qr();
    let mut q = qr.q().columns(0, d).into_owned();
    // Fix signs so the basis is a deterministic function of the draw.
    let r = qr.r();
    for j in 0..d {
        if r[(j, j)] < 0.0 {
            for i in 0..n {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    Ok(q)
}

/// Builds `L = tau P_E + gamma I` from a seeded random `d_e`-dimensional
/// subspace, with cost weight `M = I`.
pub fn make_eval_instance(
    n: usize,
    d_e: usize,
    tau: f64,
    gamma: f64,
    seed: u64,
) -> Result<EvalInstance> {
    if n == 0 || d_e == 0 || d_e > n {
        return Err(Error::InvalidConfig(format!(
            "need 1 <= d_e <= n, got d_e = {d_e}, n = {n}"
        )));
    }
    if !(tau > 0.0 && tau < 1.0) || !(gamma > 0.0 && gamma < 1.0) || tau + gamma >= 1.0 {
        return Err(Error::InvalidConfig(format!(
            "need tau, gamma in (0,1) with tau + gamma < 1, got tau = {tau}, gamma = {gamma}"
        )));
    }
    let mut rng = stream_rng(seed, 0, StreamTag::Instance);
    let basis = random_orthonormal(n, d_e, &mut rng)?;
    let projector = &basis * basis.transpose();
    let l_star = tau * projector + gamma * DMatrix::identity(n, n);
    Ok(EvalInstance {
        l_star,
        m: DMatrix::identity(n, n),
        sigma_w: 1.0,
        tau,
        gamma,
        subspace_dim: d_e,
        seed,
    })
}

/// Draws `(rho U U^T, rho U)` with `U` Haar-ish orthonormal; retries on a
/// degenerate Gaussian draw, failing after eight attempts.
pub fn make_opt_instance(n: usize, d: usize, rho: f64, seed: u64) -> Result<OptInstance> {
    if d == 0 || d > n {
        return Err(Error::InvalidConfig(format!(
            "need 1 <= d <= n, got d = {d}, n = {n}"
        )));
    }
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "need rho in (0,1), got {rho}"
        )));
    }
    let mut u_star = None;
    for attempt in 0..8u64 {
        let mut rng = stream_rng(seed, attempt, StreamTag::Instance);
        if let Ok(q) = random_orthonormal(n, d, &mut rng) {
            u_star = Some(q);
            break;
        }
    }
    let u_star = u_star.ok_or_else(|| {
        Error::Rank("failed to draw a full-rank Gaussian matrix in 8 attempts".into())
    })?;

    let a = rho * &u_star * u_star.transpose();
    let b = rho * &u_star;
    let k_star = -u_star.transpose();
    let system = LinearSystem::new(a, b, 1.0, 1.0)?;

    let orth = (u_star.transpose() * &u_star - DMatrix::identity(d, d)).norm();
    if orth > 1e-12 {
        return Err(Error::Numerical(format!(
            "orthonormality defect {orth:e} in instance basis"
        )));
    }
    let cancel = system.closed_loop(&k_star).norm();
    if cancel > 1e-12 {
        return Err(Error::Numerical(format!(
            "closed loop at the optimum not zero: {cancel:e}"
        )));
    }
    Ok(OptInstance {
        system,
        u_star,
        k_star,
        rho,
        seed,
    })
}

// --- JSON document forms -------------------------------------------------

fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let nrows = rows.len();
    if nrows == 0 {
        return Err(Error::Dimension("empty matrix".into()));
    }
    let ncols = rows[0].len();
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Dimension("ragged matrix rows".into()));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

#[derive(Serialize, Deserialize)]
struct EvalInstanceDoc {
    family: String,
    n: usize,
    subspace_dim: usize,
    tau: f64,
    gamma: f64,
    sigma_w: f64,
    seed: u64,
    l_star: Vec<Vec<f64>>,
    cost_weight: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct OptInstanceDoc {
    family: String,
    n: usize,
    d: usize,
    rho: f64,
    sigma_w: f64,
    sigma_u: f64,
    seed: u64,
    a_star: Vec<Vec<f64>>,
    b_star: Vec<Vec<f64>>,
    u_star: Vec<Vec<f64>>,
    k_star: Vec<Vec<f64>>,
}

impl EvalInstance {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(EvalInstanceDoc {
            family: "eval-projector".into(),
            n: self.state_dim(),
            subspace_dim: self.subspace_dim,
            tau: self.tau,
            gamma: self.gamma,
            sigma_w: self.sigma_w,
            seed: self.seed,
            l_star: matrix_rows(&self.l_star),
            cost_weight: matrix_rows(&self.m),
        })
        .expect("eval instance serializes")
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self> {
        let doc: EvalInstanceDoc = serde_json::from_value(value.clone())
            .map_err(|e| Error::ConfigParse(e.to_string()))?;
        Ok(Self {
            l_star: matrix_from_rows(&doc.l_star)?,
            m: matrix_from_rows(&doc.cost_weight)?,
            sigma_w: doc.sigma_w,
            tau: doc.tau,
            gamma: doc.gamma,
            subspace_dim: doc.subspace_dim,
            seed: doc.seed,
        })
    }
}

impl OptInstance {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(OptInstanceDoc {
            family: "opt-orthonormal-range".into(),
            n: self.state_dim(),
            d: self.input_dim(),
            rho: self.rho,
            sigma_w: self.system.sigma_w(),
            sigma_u: self.system.sigma_u(),
            seed: self.seed,
            a_star: matrix_rows(self.system.a()),
            b_star: matrix_rows(self.system.b()),
            u_star: matrix_rows(&self.u_star),
            k_star: matrix_rows(&self.k_star),
        })
        .expect("opt instance serializes")
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self> {
        let doc: OptInstanceDoc = serde_json::from_value(value.clone())
            .map_err(|e| Error::ConfigParse(e.to_string()))?;
        let system = LinearSystem::new(
            matrix_from_rows(&doc.a_star)?,
            matrix_from_rows(&doc.b_star)?,
            doc.sigma_w,
            doc.sigma_u,
        )?;
        Ok(Self {
            system,
            u_star: matrix_from_rows(&doc.u_star)?,
            k_star: matrix_from_rows(&doc.k_star)?,
            rho: doc.rho,
            seed: doc.seed,
        })
    }
}

/// Scalar evaluation instance with `L = l`, `M = 1`; used widely in tests and
/// the scalar reproduction experiments.
pub fn scalar_eval_instance(l: f64, sigma_w: f64, seed: u64) -> Result<EvalInstance> {
    if !(l > 0.0 && l < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "scalar closed loop must lie in (0,1), got {l}"
        )));
    }
    make_eval_instance(1, 1, l / 2.0, l / 2.0, seed)?.with_sigma_w(sigma_w)
}
