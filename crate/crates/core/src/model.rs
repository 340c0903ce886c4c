//! Parameterized forward problems, parameter boxes and observations.
//!
//! The forward problem is the convex QP
//!
//! ```text
//!     minimize     1/2 x'Qx + c(theta, u)'x
//!     subject to   A_ineq(u) x >= b_ineq(theta, u)
//!                  A_eq x       = b_eq(theta, u)
//! ```
//!
//! where every `theta`/`u` dependence is affine:
//! `c = c0 + C_theta theta + C_u u`, `b_ineq = b0 + B_theta theta + B_u u`,
//! `b_eq = b0_eq + E_theta theta + E_u u`, and `A_ineq(u) = A_ineq + sum_k u_k A_ineq_u[k]`.
//! The signal may enter the inequality matrix (prices in a budget row); the parameter
//! never does, so fixing an active pattern always leaves a convex problem in `(theta, x)`.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{is_finite_mat, is_finite_vec, min_eigenvalue, spectral_norm};
use crate::qp::{self, ConcreteQp, QpError};

/// Tolerance for the symmetry and semidefiniteness checks on `Q`.
pub const PSD_TOL: f64 = 1e-9;

/// Parameterized convex QP forward problem.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamQp {
    n: usize,
    p: usize,
    m: usize,
    q: DMatrix<f64>,
    c0: DVector<f64>,
    c_theta: DMatrix<f64>,
    c_u: DMatrix<f64>,
    a_ineq: DMatrix<f64>,
    a_ineq_u: Vec<DMatrix<f64>>,
    b0_ineq: DVector<f64>,
    b_theta: DMatrix<f64>,
    b_u: DMatrix<f64>,
    a_eq: DMatrix<f64>,
    b0_eq: DVector<f64>,
    e_theta: DMatrix<f64>,
    e_u: DMatrix<f64>,
}

/// Builder for [`ParamQp`]; unset blocks default to zero.
#[derive(Debug, Clone)]
pub struct ParamQpBuilder {
    n: usize,
    p: usize,
    m: usize,
    q: Option<DMatrix<f64>>,
    c0: Option<DVector<f64>>,
    c_theta: Option<DMatrix<f64>>,
    c_u: Option<DMatrix<f64>>,
    a_ineq: Option<DMatrix<f64>>,
    a_ineq_u: Vec<DMatrix<f64>>,
    b0_ineq: Option<DVector<f64>>,
    b_theta: Option<DMatrix<f64>>,
    b_u: Option<DMatrix<f64>>,
    a_eq: Option<DMatrix<f64>>,
    b0_eq: Option<DVector<f64>>,
    e_theta: Option<DMatrix<f64>>,
    e_u: Option<DMatrix<f64>>,
}

impl ParamQpBuilder {
    pub fn quadratic(mut self, q: DMatrix<f64>) -> Self {
        self.q = Some(q);
        self
    }

    pub fn cost_offset(mut self, c0: DVector<f64>) -> Self {
        self.c0 = Some(c0);
        self
    }

    pub fn cost_theta(mut self, c_theta: DMatrix<f64>) -> Self {
        self.c_theta = Some(c_theta);
        self
    }

    pub fn cost_signal(mut self, c_u: DMatrix<f64>) -> Self {
        self.c_u = Some(c_u);
        self
    }

    /// Inequality block `A x >= b0` (extended by the theta/signal maps below).
    pub fn inequalities(mut self, a: DMatrix<f64>, b0: DVector<f64>) -> Self {
        self.a_ineq = Some(a);
        self.b0_ineq = Some(b0);
        self
    }

    pub fn ineq_theta(mut self, b_theta: DMatrix<f64>) -> Self {
        self.b_theta = Some(b_theta);
        self
    }

    pub fn ineq_signal(mut self, b_u: DMatrix<f64>) -> Self {
        self.b_u = Some(b_u);
        self
    }

    /// Signal-dependent inequality matrix terms, one `q x n` block per signal component.
    pub fn ineq_matrix_signal(mut self, a_u: Vec<DMatrix<f64>>) -> Self {
        self.a_ineq_u = a_u;
        self
    }

    pub fn equalities(mut self, a: DMatrix<f64>, b0: DVector<f64>) -> Self {
        self.a_eq = Some(a);
        self.b0_eq = Some(b0);
        self
    }

    pub fn eq_theta(mut self, e_theta: DMatrix<f64>) -> Self {
        self.e_theta = Some(e_theta);
        self
    }

    pub fn eq_signal(mut self, e_u: DMatrix<f64>) -> Self {
        self.e_u = Some(e_u);
        self
    }

    pub fn build(self) -> Result<ParamQp> {
        let (n, p, m) = (self.n, self.p, self.m);
        let qi = self.a_ineq.as_ref().map_or(0, |a| a.nrows());
        let re = self.a_eq.as_ref().map_or(0, |a| a.nrows());
        let problem = ParamQp {
            n,
            p,
            m,
            q: self.q.unwrap_or_else(|| DMatrix::zeros(n, n)),
            c0: self.c0.unwrap_or_else(|| DVector::zeros(n)),
            c_theta: self.c_theta.unwrap_or_else(|| DMatrix::zeros(n, p)),
            c_u: self.c_u.unwrap_or_else(|| DMatrix::zeros(n, m)),
            a_ineq: self.a_ineq.unwrap_or_else(|| DMatrix::zeros(0, n)),
            a_ineq_u: self.a_ineq_u,
            b0_ineq: self.b0_ineq.unwrap_or_else(|| DVector::zeros(0)),
            b_theta: self.b_theta.unwrap_or_else(|| DMatrix::zeros(qi, p)),
            b_u: self.b_u.unwrap_or_else(|| DMatrix::zeros(qi, m)),
            a_eq: self.a_eq.unwrap_or_else(|| DMatrix::zeros(0, n)),
            b0_eq: self.b0_eq.unwrap_or_else(|| DVector::zeros(0)),
            e_theta: self.e_theta.unwrap_or_else(|| DMatrix::zeros(re, p)),
            e_u: self.e_u.unwrap_or_else(|| DMatrix::zeros(re, m)),
        };
        problem.check()?;
        Ok(problem)
    }
}

fn expect_shape(name: &str, mat: &DMatrix<f64>, rows: usize, cols: usize) -> Result<()> {
    if mat.nrows() != rows || mat.ncols() != cols {
        return Err(Error::Dimension(format!(
            "{name} is {}x{}, expected {rows}x{cols}",
            mat.nrows(),
            mat.ncols()
        )));
    }
    Ok(())
}

fn expect_len(name: &str, v: &DVector<f64>, len: usize) -> Result<()> {
    if v.len() != len {
        return Err(Error::Dimension(format!(
            "{name} has length {}, expected {len}",
            v.len()
        )));
    }
    Ok(())
}

impl ParamQp {
    pub fn builder(n: usize, p: usize, m: usize) -> ParamQpBuilder {
        ParamQpBuilder {
            n,
            p,
            m,
            q: None,
            c0: None,
            c_theta: None,
            c_u: None,
            a_ineq: None,
            a_ineq_u: Vec::new(),
            b0_ineq: None,
            b_theta: None,
            b_u: None,
            a_eq: None,
            b0_eq: None,
            e_theta: None,
            e_u: None,
        }
    }

    fn check(&self) -> Result<()> {
        let (n, p, m) = (self.n, self.p, self.m);
        let qi = self.a_ineq.nrows();
        let re = self.a_eq.nrows();
        if n == 0 {
            return Err(Error::Dimension(
                "decision dimension n must be positive".into(),
            ));
        }
        expect_shape("Q", &self.q, n, n)?;
        expect_len("c0", &self.c0, n)?;
        expect_shape("C_theta", &self.c_theta, n, p)?;
        expect_shape("C_u", &self.c_u, n, m)?;
        expect_shape("A_ineq", &self.a_ineq, qi, n)?;
        expect_len("b0_ineq", &self.b0_ineq, qi)?;
        expect_shape("B_theta", &self.b_theta, qi, p)?;
        expect_shape("B_u", &self.b_u, qi, m)?;
        if !self.a_ineq_u.is_empty() {
            if self.a_ineq_u.len() != m {
                return Err(Error::Dimension(format!(
                    "A_ineq_u has {} blocks, expected one per signal component ({m})",
                    self.a_ineq_u.len()
                )));
            }
            for (k, blk) in self.a_ineq_u.iter().enumerate() {
                expect_shape(&format!("A_ineq_u[{k}]"), blk, qi, n)?;
            }
        }
        expect_shape("A_eq", &self.a_eq, re, n)?;
        expect_len("b0_eq", &self.b0_eq, re)?;
        expect_shape("E_theta", &self.e_theta, re, p)?;
        expect_shape("E_u", &self.e_u, re, m)?;

        let finite = [
            &self.q,
            &self.c_theta,
            &self.c_u,
            &self.a_ineq,
            &self.b_theta,
            &self.b_u,
            &self.a_eq,
            &self.e_theta,
            &self.e_u,
        ]
        .iter()
        .all(|mat| is_finite_mat(mat))
            && self.a_ineq_u.iter().all(is_finite_mat)
            && is_finite_vec(&self.c0)
            && is_finite_vec(&self.b0_ineq)
            && is_finite_vec(&self.b0_eq);
        if !finite {
            return Err(Error::NonFinite("problem data".into()));
        }
        if (&self.q - self.q.transpose()).amax() > PSD_TOL * (1.0 + self.q.amax()) {
            return Err(Error::InvalidModel("Q is not symmetric".into()));
        }
        let lambda = min_eigenvalue(&self.q);
        if lambda < -PSD_TOL {
            return Err(Error::InvalidModel(format!(
                "Q is not positive semidefinite (smallest eigenvalue {lambda:e})"
            )));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Parameter dimension.
    pub fn p(&self) -> usize {
        self.p
    }

    /// Signal dimension.
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n_ineq(&self) -> usize {
        self.a_ineq.nrows()
    }

    pub fn n_eq(&self) -> usize {
        self.a_eq.nrows()
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn c0(&self) -> &DVector<f64> {
        &self.c0
    }

    pub fn c_theta(&self) -> &DMatrix<f64> {
        &self.c_theta
    }

    pub fn c_u(&self) -> &DMatrix<f64> {
        &self.c_u
    }

    pub fn a_ineq_base(&self) -> &DMatrix<f64> {
        &self.a_ineq
    }

    pub fn a_ineq_signal(&self) -> &[DMatrix<f64>] {
        &self.a_ineq_u
    }

    pub fn b0_ineq(&self) -> &DVector<f64> {
        &self.b0_ineq
    }

    pub fn b_theta(&self) -> &DMatrix<f64> {
        &self.b_theta
    }

    pub fn b_u(&self) -> &DMatrix<f64> {
        &self.b_u
    }

    pub fn a_eq(&self) -> &DMatrix<f64> {
        &self.a_eq
    }

    pub fn b0_eq(&self) -> &DVector<f64> {
        &self.b0_eq
    }

    pub fn e_theta(&self) -> &DMatrix<f64> {
        &self.e_theta
    }

    pub fn e_u(&self) -> &DMatrix<f64> {
        &self.e_u
    }

    /// True when the parameter enters only the cost vector.
    pub fn theta_in_cost_only(&self) -> bool {
        self.b_theta.amax_or_zero() == 0.0 && self.e_theta.amax_or_zero() == 0.0
    }

    /// True when the parameter enters only the constraint right-hand sides.
    pub fn theta_in_rhs_only(&self) -> bool {
        self.c_theta.amax_or_zero() == 0.0
    }

    fn check_point(&self, theta: &DVector<f64>, u: &DVector<f64>) -> Result<()> {
        expect_len("theta", theta, self.p)?;
        expect_len("u", u, self.m)?;
        if !is_finite_vec(theta) || !is_finite_vec(u) {
            return Err(Error::NonFinite("theta or signal".into()));
        }
        Ok(())
    }

    /// Inequality matrix at signal `u`.
    pub fn ineq_matrix(&self, u: &DVector<f64>) -> DMatrix<f64> {
        let mut a = self.a_ineq.clone();
        for (k, blk) in self.a_ineq_u.iter().enumerate() {
            if u[k] != 0.0 {
                a += blk * u[k];
            }
        }
        a
    }

    pub fn cost(&self, theta: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        &self.c0 + &self.c_theta * theta + &self.c_u * u
    }

    pub fn ineq_rhs(&self, theta: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        &self.b0_ineq + &self.b_theta * theta + &self.b_u * u
    }

    pub fn eq_rhs(&self, theta: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        &self.b0_eq + &self.e_theta * theta + &self.e_u * u
    }

    /// Evaluate the affine maps at `(theta, u)`.
    pub fn instantiate(&self, theta: &DVector<f64>, u: &DVector<f64>) -> Result<ConcreteQp> {
        self.check_point(theta, u)?;
        Ok(ConcreteQp {
            q: self.q.clone(),
            c: self.cost(theta, u),
            a_ineq: self.ineq_matrix(u),
            b_ineq: self.ineq_rhs(theta, u),
            a_eq: self.a_eq.clone(),
            b_eq: self.eq_rhs(theta, u),
        })
    }

    /// Strong-convexity modulus of the objective (smallest eigenvalue of `Q`).
    pub fn strong_convexity(&self) -> f64 {
        min_eigenvalue(&self.q)
    }

    pub fn is_strongly_convex(&self) -> bool {
        self.strong_convexity() > PSD_TOL
    }
}

trait AmaxOrZero {
    fn amax_or_zero(&self) -> f64;
}

impl AmaxOrZero for DMatrix<f64> {
    fn amax_or_zero(&self) -> f64 {
        if self.is_empty() {
            0.0
        } else {
            self.amax()
        }
    }
}

/// Axis-aligned parameter box `lo <= theta <= hi`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterBox {
    lo: DVector<f64>,
    hi: DVector<f64>,
}

impl ParameterBox {
    pub fn new(lo: DVector<f64>, hi: DVector<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::Dimension(format!(
                "box bounds have lengths {} and {}",
                lo.len(),
                hi.len()
            )));
        }
        if !is_finite_vec(&lo) || !is_finite_vec(&hi) {
            return Err(Error::NonFinite("box bounds must be finite".into()));
        }
        if lo.iter().zip(hi.iter()).any(|(l, h)| l > h) {
            return Err(Error::InvalidModel("box has lo > hi".into()));
        }
        Ok(Self { lo, hi })
    }

    /// The box `[lo, hi]^p`.
    pub fn uniform(p: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(DVector::from_element(p, lo), DVector::from_element(p, hi))
    }

    /// The degenerate box `{theta}`.
    pub fn point(theta: &DVector<f64>) -> Result<Self> {
        Self::new(theta.clone(), theta.clone())
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &DVector<f64> {
        &self.lo
    }

    pub fn hi(&self) -> &DVector<f64> {
        &self.hi
    }

    pub fn contains(&self, theta: &DVector<f64>, tol: f64) -> bool {
        theta.len() == self.dim()
            && (0..self.dim()).all(|j| theta[j] >= self.lo[j] - tol && theta[j] <= self.hi[j] + tol)
    }

    pub fn project(&self, theta: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(self.dim(), |j, _| theta[j].clamp(self.lo[j], self.hi[j]))
    }

    pub fn center(&self) -> DVector<f64> {
        (&self.lo + &self.hi) * 0.5
    }

    /// `D = max ||theta||` over the box, attained at a corner.
    pub fn norm_bound(&self) -> f64 {
        self.lo
            .iter()
            .zip(self.hi.iter())
            .map(|(l, h)| l.abs().max(h.abs()).powi(2))
            .fold(0.0, |acc, v| acc + v)
            .sqrt()
    }

    /// Corner selected by the bits of `mask` (bit j set means `hi[j]`).
    pub fn corner(&self, mask: u64) -> DVector<f64> {
        DVector::from_fn(self.dim(), |j, _| {
            if j < 64 && mask & (1 << j) != 0 {
                self.hi[j]
            } else {
                self.lo[j]
            }
        })
    }
}

/// One `(signal, noisy decision)` pair.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub u: DVector<f64>,
    pub y: DVector<f64>,
}

impl Observation {
    pub fn new(u: DVector<f64>, y: DVector<f64>) -> Result<Self> {
        if !is_finite_vec(&u) || !is_finite_vec(&y) {
            return Err(Error::NonFinite("observation".into()));
        }
        Ok(Self { u, y })
    }

    pub fn check_dims(&self, problem: &ParamQp) -> Result<()> {
        expect_len("observation signal", &self.u, problem.m())?;
        expect_len("observation decision", &self.y, problem.n())
    }
}

/// Regularity constants used by the learning-rate schedule and the regret bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoryConstants {
    /// Strong-convexity modulus.
    pub lambda: f64,
    /// Bound on `||x||` over the feasible sets.
    pub b_bound: f64,
    /// Bound on `||y||` over the observations.
    pub r_bound: f64,
    /// Lipschitz constant of the objective difference function.
    pub kappa: f64,
    /// Bound on `||theta||` over the box.
    pub d_bound: f64,
}

impl TheoryConstants {
    pub fn all_positive(&self) -> bool {
        [
            self.lambda,
            self.b_bound,
            self.r_bound,
            self.kappa,
            self.d_bound,
        ]
        .iter()
        .all(|v| v.is_finite() && *v > 0.0)
    }

    /// Lipschitz constant `4 (B + R) kappa / lambda` of the loss in theta.
    pub fn loss_lipschitz(&self) -> f64 {
        4.0 * (self.b_bound + self.r_bound) * self.kappa / self.lambda
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Diagnostic {
    /// Smallest eigenvalue of `Q` is at most [`PSD_TOL`]; solution sets may be multivalued.
    NotStronglyConvex { lambda: f64 },
    /// A sampled `(u, theta)` pair has an empty feasible set; the sample was skipped.
    EmptyFeasibleSet { signal: usize, theta: DVector<f64> },
    /// A sampled feasible set is unbounded, so no finite `B` exists.
    UnboundedFeasibleSet { signal: usize },
    /// Theta does not enter the objective, so `kappa = 0`.
    ThetaNotInObjective,
    /// No observations were supplied, so `R` is unknown.
    NoObservations,
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Diagnostic::NotStronglyConvex { lambda } => write!(
                f,
                "not strongly convex (smallest eigenvalue of Q = {lambda:e}); solution set may be multivalued"
            ),
            Diagnostic::EmptyFeasibleSet { signal, theta } => write!(
                f,
                "empty feasible set for signal #{signal} at theta = {:?}; sample skipped",
                theta.as_slice()
            ),
            Diagnostic::UnboundedFeasibleSet { signal } => {
                write!(f, "feasible set for signal #{signal} is unbounded; B is infinite")
            }
            Diagnostic::ThetaNotInObjective => {
                write!(f, "theta does not enter the objective; kappa = 0")
            }
            Diagnostic::NoObservations => write!(f, "no observations supplied; R unknown"),
        }
    }
}

/// Result of [`validate`].
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub constants: TheoryConstants,
    pub diagnostics: Vec<Diagnostic>,
    pub samples_used: usize,
    pub samples_skipped: usize,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.constants.all_positive()
    }
}

/// Parameter samples used by [`validate`]: every corner when `p <= 4`, otherwise the
/// center plus eight seeded random corners.
fn theta_samples(bx: &ParameterBox, seed: u64) -> Vec<DVector<f64>> {
    let p = bx.dim();
    if p <= 4 {
        return (0..(1u64 << p)).map(|mask| bx.corner(mask)).collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![bx.center()];
    for _ in 0..8 {
        let mut bits: Vec<bool> = (0..p).map(|j| j % 2 == 0).collect();
        bits.shuffle(&mut rng);
        out.push(DVector::from_fn(p, |j, _| {
            if bits[j] {
                bx.hi()[j]
            } else {
                bx.lo()[j]
            }
        }));
    }
    out
}

/// Estimate the regularity constants of `problem` over `bx`.
///
/// `lambda` is the smallest eigenvalue of `Q`, `kappa` the spectral norm of `C_theta`,
/// `D` the largest corner norm of the box and `R` the largest `||y||` among `observations`.
/// `B` is an empirical lower estimate: for every sampled `(u, theta)` it takes the largest
/// norm among the forward solution and the LP vertices maximizing `+-x_j` over the feasible set.
pub fn validate(
    problem: &ParamQp,
    bx: &ParameterBox,
    signals: &[DVector<f64>],
    observations: &[Observation],
    seed: u64,
) -> Result<ValidationReport> {
    if bx.dim() != problem.p() {
        return Err(Error::Dimension(format!(
            "box has dimension {}, problem has p = {}",
            bx.dim(),
            problem.p()
        )));
    }
    for (k, u) in signals.iter().enumerate() {
        expect_len(&format!("signal #{k}"), u, problem.m())?;
    }
    for obs in observations {
        obs.check_dims(problem)?;
    }

    let mut diagnostics = Vec::new();
    let lambda = problem.strong_convexity();
    if lambda <= PSD_TOL {
        diagnostics.push(Diagnostic::NotStronglyConvex { lambda });
    }
    let kappa = spectral_norm(problem.c_theta());
    if kappa == 0.0 {
        diagnostics.push(Diagnostic::ThetaNotInObjective);
    }
    let d_bound = bx.norm_bound();
    let r_bound = observations.iter().map(|o| o.y.norm()).fold(0.0, f64::max);
    if observations.is_empty() {
        diagnostics.push(Diagnostic::NoObservations);
    }

    let n = problem.n();
    let thetas = theta_samples(bx, seed);
    let mut b_bound = 0.0_f64;
    let mut used = 0;
    let mut skipped = 0;
    'signals: for (k, u) in signals.iter().enumerate() {
        for theta in &thetas {
            let qp = problem.instantiate(theta, u)?;
            match qp::solve(&qp) {
                Ok(sol) => b_bound = b_bound.max(sol.x.norm()),
                Err(QpError::Infeasible) => {
                    diagnostics.push(Diagnostic::EmptyFeasibleSet {
                        signal: k,
                        theta: theta.clone(),
                    });
                    skipped += 1;
                    continue;
                }
                Err(QpError::Unbounded) => {}
                Err(e) => return Err(e.into()),
            }
            used += 1;
            for j in 0..n {
                for sign in [1.0, -1.0] {
                    let mut lp = qp.clone();
                    lp.q = DMatrix::zeros(n, n);
                    lp.c = DVector::zeros(n);
                    lp.c[j] = -sign;
                    match qp::solve(&lp) {
                        Ok(sol) => b_bound = b_bound.max(sol.x.norm()),
                        Err(QpError::Unbounded) => {
                            diagnostics.push(Diagnostic::UnboundedFeasibleSet { signal: k });
                            b_bound = f64::INFINITY;
                            continue 'signals;
                        }
                        Err(e) => return Err(e.into()),
                    }
                }
            }
        }
    }

    Ok(ValidationReport {
        constants: TheoryConstants {
            lambda,
            b_bound,
            r_bound,
            kappa,
            d_bound,
        },
        diagnostics,
        samples_used: used,
        samples_skipped: skipped,
    })
}
