//! Dense convex quadratic programming.
//!
//! Problems have the form
//!
//! ```text
//!     minimize     1/2 x' Q x + c' x
//!     subject to   A_ineq x >= b_ineq
//!                  A_eq   x  = b_eq
//! ```
//!
//! with `Q` symmetric positive semidefinite. [`solve`] runs a primal active-set method
//! (phase one on an elastic feasibility program, then a null-space phase two that steps
//! along zero-curvature directions when `Q` is singular). [`enumerate_kkt`] is a brute-force
//! oracle over every inequality active pattern, meant for cross-checking small instances.

mod active_set;
mod enumerate;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::linalg::{is_finite_mat, is_finite_vec};

pub use enumerate::{enumerate_kkt, ENUMERATION_LIMIT};

/// Primal/dual feasibility tolerance.
pub const FEAS_TOL: f64 = 1e-8;
/// Stationarity tolerance.
pub const STAT_TOL: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QpError {
    #[error("quadratic program is infeasible")]
    Infeasible,
    #[error("quadratic program is unbounded below")]
    Unbounded,
    #[error("active-set iteration limit reached after {iterations} iterations")]
    IterationLimit { iterations: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("non-finite problem data")]
    NonFinite,
    #[error("{count} inequality constraints exceed the enumeration limit of {limit}")]
    TooManyConstraints { count: usize, limit: usize },
}

/// A fully instantiated quadratic program.
#[derive(Debug, Clone, PartialEq)]
pub struct ConcreteQp {
    pub q: DMatrix<f64>,
    pub c: DVector<f64>,
    pub a_ineq: DMatrix<f64>,
    pub b_ineq: DVector<f64>,
    pub a_eq: DMatrix<f64>,
    pub b_eq: DVector<f64>,
}

impl ConcreteQp {
    /// Problem without equality constraints.
    pub fn with_inequalities(
        q: DMatrix<f64>,
        c: DVector<f64>,
        a_ineq: DMatrix<f64>,
        b_ineq: DVector<f64>,
    ) -> Self {
        let n = c.len();
        Self {
            q,
            c,
            a_ineq,
            b_ineq,
            a_eq: DMatrix::zeros(0, n),
            b_eq: DVector::zeros(0),
        }
    }

    pub fn n(&self) -> usize {
        self.c.len()
    }

    pub fn n_ineq(&self) -> usize {
        self.b_ineq.len()
    }

    pub fn n_eq(&self) -> usize {
        self.b_eq.len()
    }

    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.q * x)) + self.c.dot(x)
    }

    /// Largest violation of the primal constraints at `x`.
    pub fn primal_violation(&self, x: &DVector<f64>) -> f64 {
        let ineq = (&self.a_ineq * x - &self.b_ineq)
            .iter()
            .fold(0.0_f64, |acc, s| acc.max(-s));
        let eq = if self.n_eq() > 0 {
            (&self.a_eq * x - &self.b_eq).amax()
        } else {
            0.0
        };
        ineq.max(eq)
    }

    pub fn check(&self) -> Result<(), QpError> {
        let n = self.n();
        if self.q.nrows() != n || self.q.ncols() != n {
            return Err(QpError::Dimension(format!(
                "Q is {}x{}, expected {n}x{n}",
                self.q.nrows(),
                self.q.ncols()
            )));
        }
        if self.a_ineq.ncols() != n || self.a_ineq.nrows() != self.b_ineq.len() {
            return Err(QpError::Dimension(format!(
                "A_ineq is {}x{} with {} right-hand sides",
                self.a_ineq.nrows(),
                self.a_ineq.ncols(),
                self.b_ineq.len()
            )));
        }
        if self.a_eq.ncols() != n || self.a_eq.nrows() != self.b_eq.len() {
            return Err(QpError::Dimension(format!(
                "A_eq is {}x{} with {} right-hand sides",
                self.a_eq.nrows(),
                self.a_eq.ncols(),
                self.b_eq.len()
            )));
        }
        let finite = is_finite_mat(&self.q)
            && is_finite_vec(&self.c)
            && is_finite_mat(&self.a_ineq)
            && is_finite_vec(&self.b_ineq)
            && is_finite_mat(&self.a_eq)
            && is_finite_vec(&self.b_eq);
        if !finite {
            return Err(QpError::NonFinite);
        }
        Ok(())
    }

    /// KKT residual of a primal-dual pair: the max norm over stationarity, primal
    /// feasibility, dual feasibility and complementarity.
    pub fn kkt_residual(
        &self,
        x: &DVector<f64>,
        u_ineq: &DVector<f64>,
        u_eq: &DVector<f64>,
    ) -> f64 {
        let mut stationarity = &self.q * x + &self.c;
        if self.n_ineq() > 0 {
            stationarity -= self.a_ineq.transpose() * u_ineq;
        }
        if self.n_eq() > 0 {
            stationarity -= self.a_eq.transpose() * u_eq;
        }
        let slack = &self.a_ineq * x - &self.b_ineq;
        let mut res = stationarity.amax().max(self.primal_violation(x));
        for i in 0..self.n_ineq() {
            res = res.max(-u_ineq[i]).max((u_ineq[i] * slack[i]).abs());
        }
        res
    }

    /// Dual objective `b'u - 1/2 x'Qx` for a KKT point.
    pub fn dual_objective(
        &self,
        x: &DVector<f64>,
        u_ineq: &DVector<f64>,
        u_eq: &DVector<f64>,
    ) -> f64 {
        self.b_ineq.dot(u_ineq) + self.b_eq.dot(u_eq) - 0.5 * x.dot(&(&self.q * x))
    }
}

/// Solution of a [`ConcreteQp`].
#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub x: DVector<f64>,
    /// Inequality multipliers, nonnegative.
    pub u_ineq: DVector<f64>,
    /// Equality multipliers, free sign.
    pub u_eq: DVector<f64>,
    /// Inequality working set at termination.
    pub active: Vec<bool>,
    pub objective: f64,
    pub kkt_residual: f64,
    pub iterations: usize,
}

/// Solve with the active-set method starting from the origin.
pub fn solve(qp: &ConcreteQp) -> Result<QpSolution, QpError> {
    active_set::solve(qp, None)
}

/// Solve with the active-set method, using `start` as the phase-one initial point.
pub fn solve_from(qp: &ConcreteQp, start: &DVector<f64>) -> Result<QpSolution, QpError> {
    active_set::solve(qp, Some(start))
}
