//! Online inverse optimization for parameterized convex quadratic programs.
//!
//! A decision maker solves a convex QP whose cost vector and/or constraint right-hand side
//! depend affinely on an unknown parameter `theta` and an observed signal `u`. Given a
//! stream of `(u, y)` pairs, where `y` is a noisy copy of the decision, the learner keeps a
//! hypothesis `theta_t` and updates it with the implicit (proximal) rule
//!
//! ```text
//!     theta_{t+1} = argmin_{theta in box}  1/2 ||theta - theta_t||^2 + eta_t * l(y_t, u_t, theta)
//! ```
//!
//! where `l` is the squared distance from `y_t` to the forward problem's optimal solution set.
//! The update is solved exactly by branch-and-bound over KKT complementarity patterns.
//!
//! Modules:
//! - [`model`]: parameterized forward problem, parameter box, observations, regularity checks.
//! - [`qp`]: dense active-set QP solver and a brute-force KKT enumeration oracle.
//! - [`loss`]: the squared-distance loss, exact on multivalued solution sets.
//! - [`update`]: the implicit update by complementarity branch-and-bound.
//! - [`learner`]: the online loop, learning-rate schedule and KKT-residual warm start.
//! - [`experiments`]: consumer-behavior and transshipment generators, baselines and metrics.

pub mod config;
pub mod error;
pub mod experiments;
pub mod instances;
pub mod learner;
mod linalg;
pub mod loss;
pub mod model;
pub mod qp;
pub mod update;

pub use error::{Error, Result};
pub use learner::{LearnerConfig, RunTrace, StartMode};
pub use loss::{eval_loss, LossValue, SolvedVia};
pub use model::{Observation, ParamQp, ParameterBox, TheoryConstants};
pub use qp::{ConcreteQp, QpError, QpSolution};
pub use update::{implicit_update, UpdateResult, UpdateStatus};

pub use linalg::{min_eigenvalue, spectral_norm};
