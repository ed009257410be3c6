//! Model-based versus model-free methods on the linear quadratic regulator,
//! at desk scale.
//!
//! The crate provides, for a fixed unknown linear system:
//!
//! - policy evaluation from a single on-policy trajectory — a model-based
//!   plugin estimator (least-squares closed-loop fit + Lyapunov solve) and
//!   model-free least-squares temporal difference learning ([`policy_eval`]);
//! - policy optimization over static feedback — certainty-equivalent control
//!   from open-loop identification and projected REINFORCE with simple,
//!   value-function, and advantage baselines ([`policy_opt`]);
//! - closed-form asymptotic scaled-risk predictions for all of the above
//!   ([`asymptotics`]);
//! - a seeded, thread-count-independent Monte Carlo harness that estimates
//!   empirical scaled risks and attaches the predictions ([`harness`]).
//!
//! Supporting layers: symmetric-vectorization and Kronecker algebra
//! ([`kron`]), Lyapunov/Riccati solvers ([`solvers`]), simulation and cost
//! calculus ([`lqr`]), and the two benchmark instance families
//! ([`instances`]).

pub mod asymptotics;
pub mod error;
pub mod harness;
pub mod instances;
pub mod kron;
pub mod lqr;
pub mod policy_eval;
pub mod policy_opt;
pub mod rng;
pub mod solvers;

pub use error::{Error, Result};
