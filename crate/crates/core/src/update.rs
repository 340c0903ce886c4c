//! Implicit update by branch-and-bound over KKT complementarity patterns.
//!
//! The update
//!
//! ```text
//!     theta_{t+1} = argmin_{theta in box}  1/2 ||theta - theta_t||^2 + eta * l(y, u, theta)
//! ```
//!
//! is solved in its single-level form: minimize `1/2 ||theta - theta_t||^2 + eta ||y - x||^2`
//! over `(theta, x, mu, nu)` subject to the forward problem's KKT conditions
//!
//! ```text
//!     Q x + c(theta, u) - A(u)' mu - A_eq' nu = 0
//!     A(u) x >= b(theta, u),   A_eq x = b_eq(theta, u),   mu >= 0
//!     mu_i * (A_i(u) x - b_i(theta, u)) = 0
//! ```
//!
//! A node fixes some complementarities (row `i` active: `A_i x = b_i`; row `i` inactive:
//! `mu_i = 0`) and drops the rest, which leaves a convex QP whose value bounds the node from
//! below. Branching picks the unfixed row with the largest `mu_i * slack_i` (lowest index on
//! ties). The search dives depth-first until the first complementary relaxation is found and
//! then continues best-first. The current hypothesis seeds the incumbent, so the result never
//! does worse than staying put.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::io::Write;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::loss::{self, LossValue};
use crate::model::{Observation, ParamQp, ParameterBox};
use crate::qp::{self, ConcreteQp, QpError};

/// Largest number of inequality rows the bitmask node representation supports.
pub const MAX_BRANCH_ROWS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateOptions {
    pub node_limit: usize,
    /// Nodes whose bound is at least `incumbent - prune_tol` are discarded.
    pub prune_tol: f64,
    /// A row counts as complementary when `min(mu_i, slack_i) <= comp_tol`.
    pub comp_tol: f64,
    /// Evaluate the true objective at each relaxation's theta to improve the incumbent.
    pub heuristic: bool,
}

impl Default for UpdateOptions {
    fn default() -> Self {
        Self {
            node_limit: 100_000,
            prune_tol: 1e-9,
            comp_tol: 1e-9,
            heuristic: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateStatus {
    Optimal,
    /// Node limit hit; the incumbent is returned.
    NodeLimit,
}

impl std::fmt::Display for UpdateStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            UpdateStatus::Optimal => write!(f, "optimal"),
            UpdateStatus::NodeLimit => write!(f, "node_limit"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UpdateResult {
    pub theta_next: DVector<f64>,
    pub x_at_opt: DVector<f64>,
    /// Optimal value of the update problem.
    pub objective: f64,
    pub nodes_explored: usize,
    pub status: UpdateStatus,
}

/// Complementarity fixings of a search node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BnbNode {
    pub fixed_active: u64,
    pub fixed_inactive: u64,
    pub lower_bound: f64,
}

impl BnbNode {
    pub fn root() -> Self {
        Self {
            fixed_active: 0,
            fixed_inactive: 0,
            lower_bound: f64::NEG_INFINITY,
        }
    }

    pub fn is_consistent(&self) -> bool {
        self.fixed_active & self.fixed_inactive == 0
    }

    pub fn is_fixed(&self, i: usize) -> bool {
        (self.fixed_active | self.fixed_inactive) & (1 << i) != 0
    }

    pub fn with_active(&self, i: usize) -> Self {
        Self {
            fixed_active: self.fixed_active | (1 << i),
            ..*self
        }
    }

    pub fn with_inactive(&self, i: usize) -> Self {
        Self {
            fixed_inactive: self.fixed_inactive | (1 << i),
            ..*self
        }
    }
}

/// Signal-instantiated data of the single-level reformulation.
struct Reformulation<'a> {
    problem: &'a ParamQp,
    bx: &'a ParameterBox,
    theta_t: &'a DVector<f64>,
    eta: f64,
    y: &'a DVector<f64>,
    a_ineq: DMatrix<f64>,
    /// `b0 + B_u u`
    b_ineq_fixed: DVector<f64>,
    /// `c0 + C_u u`
    c_fixed: DVector<f64>,
    /// `b0_eq + E_u u`
    b_eq_fixed: DVector<f64>,
    constant: f64,
}

/// Relaxation optimum at a node.
struct Relaxation {
    bound: f64,
    z: DVector<f64>,
    theta: DVector<f64>,
    x: DVector<f64>,
    /// Full-length inequality multipliers (zeros where fixed inactive).
    mu: DVector<f64>,
    slack: DVector<f64>,
}

impl<'a> Reformulation<'a> {
    fn new(
        problem: &'a ParamQp,
        bx: &'a ParameterBox,
        theta_t: &'a DVector<f64>,
        eta: f64,
        obs: &'a Observation,
    ) -> Result<Self> {
        obs.check_dims(problem)?;
        if bx.dim() != problem.p() || theta_t.len() != problem.p() {
            return Err(Error::Dimension(format!(
                "parameter dimension {} does not match box {} / hypothesis {}",
                problem.p(),
                bx.dim(),
                theta_t.len()
            )));
        }
        if problem.n_ineq() > MAX_BRANCH_ROWS {
            return Err(Error::InvalidModel(format!(
                "{} inequality rows exceed the branch-and-bound limit of {MAX_BRANCH_ROWS}",
                problem.n_ineq()
            )));
        }
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {eta}"
            )));
        }
        let u = &obs.u;
        Ok(Self {
            problem,
            bx,
            theta_t,
            eta,
            y: &obs.y,
            a_ineq: problem.ineq_matrix(u),
            b_ineq_fixed: problem.b0_ineq() + problem.b_u() * u,
            c_fixed: problem.c0() + problem.c_u() * u,
            b_eq_fixed: problem.b0_eq() + problem.e_u() * u,
            constant: 0.5 * theta_t.norm_squared() + eta * obs.y.norm_squared(),
        })
    }

    fn p(&self) -> usize {
        self.problem.p()
    }

    fn n(&self) -> usize {
        self.problem.n()
    }

    fn q(&self) -> usize {
        self.problem.n_ineq()
    }

    fn r(&self) -> usize {
        self.problem.n_eq()
    }

    fn objective(&self, theta: &DVector<f64>, x: &DVector<f64>) -> f64 {
        0.5 * (theta - self.theta_t).norm_squared() + self.eta * (self.y - x).norm_squared()
    }

    /// Multiplier columns kept at `node` (rows not fixed inactive).
    fn kept_rows(&self, node: &BnbNode) -> Vec<usize> {
        (0..self.q())
            .filter(|&i| node.fixed_inactive & (1 << i) == 0)
            .collect()
    }

    /// Node QP in `z = (theta, x, mu_kept, nu)`.
    fn node_qp(&self, node: &BnbNode) -> (ConcreteQp, Vec<usize>) {
        let (p, n, q, r) = (self.p(), self.n(), self.q(), self.r());
        let kept = self.kept_rows(node);
        let k = kept.len();
        let dim = p + n + k + r;
        let (ox, omu, onu) = (p, p + n, p + n + k);

        let mut h = DMatrix::zeros(dim, dim);
        let mut c = DVector::zeros(dim);
        for j in 0..p {
            h[(j, j)] = 1.0;
            c[j] = -self.theta_t[j];
        }
        for j in 0..n {
            h[(ox + j, ox + j)] = 2.0 * self.eta;
            c[ox + j] = -2.0 * self.eta * self.y[j];
        }

        let fixed_theta: Vec<usize> = (0..p)
            .filter(|&j| self.bx.lo()[j] == self.bx.hi()[j])
            .collect();
        let n_active = (node.fixed_active.count_ones()) as usize;
        let n_eq_rows = n + r + n_active + fixed_theta.len();
        let mut a_eq = DMatrix::zeros(n_eq_rows, dim);
        let mut b_eq = DVector::zeros(n_eq_rows);
        let mut row = 0;
        // Stationarity: Q x + C_theta theta - A' mu - A_eq' nu = -(c0 + C_u u)
        for i in 0..n {
            for j in 0..p {
                a_eq[(row, j)] = self.problem.c_theta()[(i, j)];
            }
            for j in 0..n {
                a_eq[(row, ox + j)] = self.problem.q()[(i, j)];
            }
            for (col, &ri) in kept.iter().enumerate() {
                a_eq[(row, omu + col)] = -self.a_ineq[(ri, i)];
            }
            for e in 0..r {
                a_eq[(row, onu + e)] = -self.problem.a_eq()[(e, i)];
            }
            b_eq[row] = -self.c_fixed[i];
            row += 1;
        }
        // Primal equalities: A_eq x - E_theta theta = b0_eq + E_u u
        for e in 0..r {
            for j in 0..p {
                a_eq[(row, j)] = -self.problem.e_theta()[(e, j)];
            }
            for j in 0..n {
                a_eq[(row, ox + j)] = self.problem.a_eq()[(e, j)];
            }
            b_eq[row] = self.b_eq_fixed[e];
            row += 1;
        }
        // Rows fixed active.
        for i in (0..q).filter(|&i| node.fixed_active & (1 << i) != 0) {
            self.fill_primal_row(&mut a_eq, row, i);
            b_eq[row] = self.b_ineq_fixed[i];
            row += 1;
        }
        for &j in &fixed_theta {
            a_eq[(row, j)] = 1.0;
            b_eq[row] = self.bx.lo()[j];
            row += 1;
        }

        let free_theta: Vec<usize> = (0..p).filter(|j| !fixed_theta.contains(j)).collect();
        let open_rows: Vec<usize> = (0..q)
            .filter(|&i| node.fixed_active & (1 << i) == 0)
            .collect();
        let n_in_rows = open_rows.len() + k + 2 * free_theta.len();
        let mut a_in = DMatrix::zeros(n_in_rows, dim);
        let mut b_in = DVector::zeros(n_in_rows);
        let mut row = 0;
        for &i in &open_rows {
            self.fill_primal_row(&mut a_in, row, i);
            b_in[row] = self.b_ineq_fixed[i];
            row += 1;
        }
        for col in 0..k {
            a_in[(row, omu + col)] = 1.0;
            row += 1;
        }
        for &j in &free_theta {
            a_in[(row, j)] = 1.0;
            b_in[row] = self.bx.lo()[j];
            a_in[(row + 1, j)] = -1.0;
            b_in[row + 1] = -self.bx.hi()[j];
            row += 2;
        }

        (
            ConcreteQp {
                q: h,
                c,
                a_ineq: a_in,
                b_ineq: b_in,
                a_eq,
                b_eq,
            },
            kept,
        )
    }

    /// `A_i(u) x - B_theta_i theta` in row `row` of `dst`.
    fn fill_primal_row(&self, dst: &mut DMatrix<f64>, row: usize, i: usize) {
        let (p, n) = (self.p(), self.n());
        for j in 0..p {
            dst[(row, j)] = -self.problem.b_theta()[(i, j)];
        }
        for j in 0..n {
            dst[(row, p + j)] = self.a_ineq[(i, j)];
        }
    }

    fn slack(&self, theta: &DVector<f64>, x: &DVector<f64>) -> DVector<f64> {
        &self.a_ineq * x - (&self.b_ineq_fixed + self.problem.b_theta() * theta)
    }

    /// Solve the node relaxation; `None` when it is infeasible.
    fn relax(&self, node: &BnbNode, warm: Option<&DVector<f64>>) -> Result<Option<Relaxation>> {
        let (nqp, kept) = self.node_qp(node);
        let start = warm.map(|z| self.map_start(z, &kept));
        let sol = match start {
            Some(s) => qp::solve_from(&nqp, &s),
            None => qp::solve(&nqp),
        };
        let sol = match sol {
            Ok(s) => s,
            Err(QpError::Infeasible) => return Ok(None),
            Err(e) => return Err(e.into()),
        };
        let (p, n, q) = (self.p(), self.n(), self.q());
        let theta = sol.x.rows(0, p).into_owned();
        let x = sol.x.rows(p, n).into_owned();
        let mut mu = DVector::zeros(q);
        for (col, &i) in kept.iter().enumerate() {
            mu[i] = sol.x[p + n + col].max(0.0);
        }
        let slack = self.slack(&theta, &x);
        let mut z = DVector::zeros(p + n + q + self.r());
        z.rows_mut(0, p + n).copy_from(&sol.x.rows(0, p + n));
        z.rows_mut(p + n, q).copy_from(&mu);
        z.rows_mut(p + n + q, self.r())
            .copy_from(&sol.x.rows(p + n + kept.len(), self.r()));
        Ok(Some(Relaxation {
            bound: sol.objective + self.constant,
            z,
            theta,
            x,
            mu,
            slack,
        }))
    }

    /// Map a full-layout point `(theta, x, mu[q], nu)` to the node's variable layout.
    fn map_start(&self, z: &DVector<f64>, kept: &[usize]) -> DVector<f64> {
        let (p, n, q, r) = (self.p(), self.n(), self.q(), self.r());
        let mut s = DVector::zeros(p + n + kept.len() + r);
        s.rows_mut(0, p + n).copy_from(&z.rows(0, p + n));
        for (col, &i) in kept.iter().enumerate() {
            s[p + n + col] = z[p + n + i];
        }
        s.rows_mut(p + n + kept.len(), r)
            .copy_from(&z.rows(p + n + q, r));
        s
    }

    /// Unfixed row with the largest complementarity violation, lowest index on ties.
    fn branching_row(&self, node: &BnbNode, relax: &Relaxation, comp_tol: f64) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for i in 0..self.q() {
            if node.is_fixed(i) {
                continue;
            }
            let mu = relax.mu[i];
            let slack = relax.slack[i];
            if mu.min(slack) <= comp_tol {
                continue;
            }
            let violation = mu * slack;
            if best.is_none_or(|(_, v)| violation > v) {
                best = Some((i, violation));
            }
        }
        best.map(|(i, _)| i)
    }
}

/// Heap entry for best-first search: smallest bound first, then insertion order.
struct Queued {
    bound: f64,
    seq: u64,
    node: BnbNode,
    warm: DVector<f64>,
}

impl PartialEq for Queued {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Queued {}

impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Queued {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

struct Incumbent {
    theta: DVector<f64>,
    x: DVector<f64>,
    value: f64,
}

/// Solve the implicit update with default options.
pub fn implicit_update(
    problem: &ParamQp,
    bx: &ParameterBox,
    theta_t: &DVector<f64>,
    eta: f64,
    obs: &Observation,
) -> Result<UpdateResult> {
    implicit_update_with(
        problem,
        bx,
        theta_t,
        eta,
        obs,
        None,
        &UpdateOptions::default(),
    )
}

/// Solve the implicit update. `current` is the loss at `theta_t` when the caller already has it.
pub fn implicit_update_with(
    problem: &ParamQp,
    bx: &ParameterBox,
    theta_t: &DVector<f64>,
    eta: f64,
    obs: &Observation,
    current: Option<&LossValue>,
    opts: &UpdateOptions,
) -> Result<UpdateResult> {
    if !bx.contains(theta_t, 1e-9) {
        return Err(Error::Config(
            "current hypothesis lies outside the parameter box".into(),
        ));
    }
    let reform = Reformulation::new(problem, bx, theta_t, eta, obs)?;
    let owned;
    let current = match current {
        Some(c) => c,
        None => {
            owned = loss::eval_loss(problem, theta_t, obs)?;
            &owned
        }
    };
    let incumbent = Incumbent {
        theta: theta_t.clone(),
        x: current.x_star.clone(),
        value: eta * current.value,
    };
    search(&reform, incumbent, opts, true)
}

/// Closest point to `obs.y` on the forward KKT set at a fixed theta (`bx` is the point box).
pub(crate) fn kkt_projection(
    problem: &ParamQp,
    point: &ParameterBox,
    theta: &DVector<f64>,
    obs: &Observation,
    forward_x: &DVector<f64>,
    opts: &UpdateOptions,
) -> Result<UpdateResult> {
    let reform = Reformulation::new(problem, point, theta, 1.0, obs)?;
    let incumbent = Incumbent {
        theta: theta.clone(),
        x: forward_x.clone(),
        value: (&obs.y - forward_x).norm_squared(),
    };
    search(&reform, incumbent, opts, false)
}

fn search(
    reform: &Reformulation<'_>,
    mut incumbent: Incumbent,
    opts: &UpdateOptions,
    heuristic: bool,
) -> Result<UpdateResult> {
    let heuristic = heuristic && opts.heuristic;
    let mut stack: Vec<(BnbNode, Option<DVector<f64>>)> = vec![(BnbNode::root(), None)];
    let mut heap: BinaryHeap<Queued> = BinaryHeap::new();
    let mut seq = 0u64;
    let mut diving = true;
    let mut nodes = 0usize;
    let mut status = UpdateStatus::Optimal;

    loop {
        let (node, warm) = if diving {
            match stack.pop() {
                Some(item) => item,
                None => break,
            }
        } else {
            match heap.pop() {
                Some(item) => (item.node, Some(item.warm)),
                None => break,
            }
        };
        if node.lower_bound >= incumbent.value - opts.prune_tol {
            continue;
        }
        if nodes >= opts.node_limit {
            status = UpdateStatus::NodeLimit;
            log::warn!(
                "implicit update stopped at the node limit ({}); returning incumbent",
                opts.node_limit
            );
            break;
        }
        nodes += 1;

        let Some(relax) = reform.relax(&node, warm.as_ref())? else {
            continue;
        };
        let bound = relax.bound.max(node.lower_bound);
        if bound >= incumbent.value - opts.prune_tol {
            continue;
        }

        if heuristic {
            let theta_hat = reform.bx.project(&relax.theta);
            if let Ok(l) = heuristic_loss(reform, &theta_hat) {
                let value =
                    0.5 * (&theta_hat - reform.theta_t).norm_squared() + reform.eta * l.value;
                if value < incumbent.value {
                    incumbent = Incumbent {
                        theta: theta_hat,
                        x: l.x_star,
                        value,
                    };
                    if bound >= incumbent.value - opts.prune_tol {
                        continue;
                    }
                }
            }
        }

        match reform.branching_row(&node, &relax, opts.comp_tol) {
            None => {
                let value = reform.objective(&relax.theta, &relax.x);
                if value < incumbent.value {
                    incumbent = Incumbent {
                        theta: reform.bx.project(&relax.theta),
                        x: relax.x.clone(),
                        value,
                    };
                }
                if diving {
                    diving = false;
                    for (node, warm) in stack.drain(..) {
                        seq += 1;
                        heap.push(Queued {
                            bound: node.lower_bound,
                            seq,
                            node,
                            warm: warm.unwrap_or_else(|| relax.z.clone()),
                        });
                    }
                }
            }
            Some(i) => {
                let mut active = node.with_active(i);
                let mut inactive = node.with_inactive(i);
                active.lower_bound = bound;
                inactive.lower_bound = bound;
                if diving {
                    // Explore the child the relaxation leans towards first.
                    if relax.mu[i] >= relax.slack[i] {
                        stack.push((inactive, Some(relax.z.clone())));
                        stack.push((active, Some(relax.z.clone())));
                    } else {
                        stack.push((active, Some(relax.z.clone())));
                        stack.push((inactive, Some(relax.z.clone())));
                    }
                } else {
                    for child in [active, inactive] {
                        seq += 1;
                        heap.push(Queued {
                            bound,
                            seq,
                            node: child,
                            warm: relax.z.clone(),
                        });
                    }
                }
            }
        }
    }

    Ok(UpdateResult {
        theta_next: incumbent.theta,
        x_at_opt: incumbent.x,
        objective: incumbent.value,
        nodes_explored: nodes,
        status,
    })
}

fn heuristic_loss(reform: &Reformulation<'_>, theta: &DVector<f64>) -> Result<LossValue> {
    let forward = ConcreteQp {
        q: reform.problem.q().clone(),
        c: &reform.c_fixed + reform.problem.c_theta() * theta,
        a_ineq: reform.a_ineq.clone(),
        b_ineq: &reform.b_ineq_fixed + reform.problem.b_theta() * theta,
        a_eq: reform.problem.a_eq().clone(),
        b_eq: &reform.b_eq_fixed + reform.problem.e_theta() * theta,
    };
    loss::loss_on_forward(reform.problem, &forward, reform.y)
}

/// Lower bound of the update problem restricted to `node`; `+inf` when the node is infeasible.
pub fn relax_bound(
    problem: &ParamQp,
    bx: &ParameterBox,
    theta_t: &DVector<f64>,
    eta: f64,
    obs: &Observation,
    node: &BnbNode,
) -> Result<f64> {
    if !node.is_consistent() {
        return Err(Error::Config(
            "node fixes a row both active and inactive".into(),
        ));
    }
    let reform = Reformulation::new(problem, bx, theta_t, eta, obs)?;
    Ok(reform
        .relax(node, None)?
        .map_or(f64::INFINITY, |r| r.bound.max(node.lower_bound)))
}

/// Write the big-M mixed-integer form of the update in CPLEX LP format.
///
/// Variables: `t<j>` (theta), `x<j>`, `mu<i>`, `nu<e>`, `z<i>` (binary, 1 = row active).
/// Complementarity is linearized as `mu_i <= M z_i` and `slack_i <= M (1 - z_i)`.
pub fn write_bigm_lp<W: Write>(
    out: &mut W,
    problem: &ParamQp,
    bx: &ParameterBox,
    theta_t: &DVector<f64>,
    eta: f64,
    obs: &Observation,
    big_m: f64,
) -> Result<()> {
    if !(big_m > 0.0 && big_m.is_finite()) {
        return Err(Error::Config(format!(
            "big-M must be positive and finite, got {big_m}"
        )));
    }
    let reform = Reformulation::new(problem, bx, theta_t, eta, obs)?;
    let (p, n, q, r) = (reform.p(), reform.n(), reform.q(), reform.r());
    let fmt_term = |coef: f64, name: &str| -> String {
        if coef < 0.0 {
            format!(" - {} {name}", -coef)
        } else {
            format!(" + {coef} {name}")
        }
    };

    writeln!(out, "\\ implicit update, big-M = {big_m}")?;
    writeln!(out, "\\ objective constant = {}", reform.constant)?;
    writeln!(out, "Minimize")?;
    let mut obj = String::from(" obj:");
    for j in 0..p {
        obj += &fmt_term(-theta_t[j], &format!("t{j}"));
    }
    for j in 0..n {
        obj += &fmt_term(-2.0 * eta * reform.y[j], &format!("x{j}"));
    }
    obj += " + [";
    let mut quad = Vec::new();
    for j in 0..p {
        quad.push(format!("{} t{j} ^ 2", 1.0));
    }
    for j in 0..n {
        quad.push(format!("{} x{j} ^ 2", 2.0 * eta));
    }
    obj += &quad.join(" + ");
    obj += " ] / 2";
    writeln!(out, "{obj}")?;

    writeln!(out, "Subject To")?;
    for i in 0..n {
        let mut line = format!(" stat{i}:");
        for j in 0..n {
            let v = problem.q()[(i, j)];
            if v != 0.0 {
                line += &fmt_term(v, &format!("x{j}"));
            }
        }
        for j in 0..p {
            let v = problem.c_theta()[(i, j)];
            if v != 0.0 {
                line += &fmt_term(v, &format!("t{j}"));
            }
        }
        for k in 0..q {
            let v = reform.a_ineq[(k, i)];
            if v != 0.0 {
                line += &fmt_term(-v, &format!("mu{k}"));
            }
        }
        for e in 0..r {
            let v = problem.a_eq()[(e, i)];
            if v != 0.0 {
                line += &fmt_term(-v, &format!("nu{e}"));
            }
        }
        writeln!(out, "{line} = {}", -reform.c_fixed[i])?;
    }
    let primal_line = |i: usize| -> String {
        let mut line = String::new();
        for j in 0..n {
            let v = reform.a_ineq[(i, j)];
            if v != 0.0 {
                line += &fmt_term(v, &format!("x{j}"));
            }
        }
        for j in 0..p {
            let v = problem.b_theta()[(i, j)];
            if v != 0.0 {
                line += &fmt_term(-v, &format!("t{j}"));
            }
        }
        line
    };
    for i in 0..q {
        let body = primal_line(i);
        writeln!(out, " prim{i}:{body} >= {}", reform.b_ineq_fixed[i])?;
        writeln!(out, " dual{i}: mu{i} - {big_m} z{i} <= 0")?;
        writeln!(
            out,
            " slack{i}:{body} + {big_m} z{i} <= {}",
            reform.b_ineq_fixed[i] + big_m
        )?;
    }
    for e in 0..r {
        let mut line = format!(" eq{e}:");
        for j in 0..n {
            let v = problem.a_eq()[(e, j)];
            if v != 0.0 {
                line += &fmt_term(v, &format!("x{j}"));
            }
        }
        for j in 0..p {
            let v = problem.e_theta()[(e, j)];
            if v != 0.0 {
                line += &fmt_term(-v, &format!("t{j}"));
            }
        }
        writeln!(out, "{line} = {}", reform.b_eq_fixed[e])?;
    }

    writeln!(out, "Bounds")?;
    for j in 0..p {
        writeln!(out, " {} <= t{j} <= {}", bx.lo()[j], bx.hi()[j])?;
    }
    for j in 0..n {
        writeln!(out, " x{j} free")?;
    }
    for i in 0..q {
        writeln!(out, " 0 <= mu{i} <= {big_m}")?;
    }
    for e in 0..r {
        writeln!(out, " nu{e} free")?;
    }
    if q > 0 {
        writeln!(out, "Binaries")?;
        let names: Vec<String> = (0..q).map(|i| format!("z{i}")).collect();
        writeln!(out, " {}", names.join(" "))?;
    }
    writeln!(out, "End")?;
    Ok(())
}
