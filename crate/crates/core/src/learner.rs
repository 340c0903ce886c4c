//! The online loop: predict, suffer loss, take an implicit step.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;
use crate::loss;
use crate::model::{Observation, ParamQp, ParameterBox, TheoryConstants};
use crate::qp::{self, ConcreteQp, QpError};
use crate::update::{self, UpdateOptions, UpdateStatus};

/// Where the first hypothesis comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum StartMode {
    Cold(DVector<f64>),
    /// Fit the KKT-residual program on a history and start from its solution.
    Warm(Vec<Observation>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnerConfig {
    /// Learning rate is `eta0 / sqrt(t)`.
    pub eta0: f64,
    /// Rounds with loss below this keep the hypothesis unchanged.
    pub loss_threshold: f64,
    /// Rescale each new hypothesis to this 2-norm, then project onto the box.
    pub normalize: Option<f64>,
    pub start: StartMode,
    pub update: UpdateOptions,
}

impl LearnerConfig {
    pub fn cold(eta0: f64, theta1: DVector<f64>) -> Self {
        Self {
            eta0,
            loss_threshold: 1e-8,
            normalize: None,
            start: StartMode::Cold(theta1),
            update: UpdateOptions::default(),
        }
    }

    pub fn check(&self) -> Result<()> {
        if !(self.eta0 > 0.0 && self.eta0.is_finite()) {
            return Err(Error::Config(format!(
                "eta0 must be positive, got {}",
                self.eta0
            )));
        }
        if !(self.loss_threshold >= 0.0) {
            return Err(Error::Config(format!(
                "loss threshold must be nonnegative, got {}",
                self.loss_threshold
            )));
        }
        if let Some(target) = self.normalize {
            if !(target > 0.0 && target.is_finite()) {
                return Err(Error::Config(format!(
                    "normalization target must be positive, got {target}"
                )));
            }
        }
        Ok(())
    }

    pub fn eta(&self, t: usize) -> f64 {
        self.eta0 / (t as f64).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RoundStatus {
    /// Loss under the threshold; no update was solved.
    Skipped,
    Updated(UpdateStatus),
}

impl std::fmt::Display for RoundStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RoundStatus::Skipped => write!(f, "skipped"),
            RoundStatus::Updated(s) => write!(f, "{s}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub t: usize,
    /// Hypothesis used to predict this round.
    pub theta: DVector<f64>,
    pub loss: f64,
    pub cum_loss_avg: f64,
    pub est_error: Option<f64>,
    pub wall_time_ms: f64,
    pub nodes_explored: usize,
    pub eta: f64,
    /// Loss of this round's observation under the next hypothesis.
    pub post_loss: f64,
    pub status: RoundStatus,
}

impl RoundRecord {
    /// Slack of `1/2 ||theta_{t+1} - theta_t||^2 + eta l(theta_{t+1}) <= eta l(theta_t)`.
    pub fn progress_gap(&self, next: &DVector<f64>) -> f64 {
        0.5 * (next - &self.theta).norm_squared() + self.eta * self.post_loss - self.eta * self.loss
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub rounds: Vec<RoundRecord>,
    /// `theta_1 .. theta_{T+1}`.
    pub hypotheses: Vec<DVector<f64>>,
}

impl RunTrace {
    pub fn len(&self) -> usize {
        self.rounds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rounds.is_empty()
    }

    pub fn final_theta(&self) -> &DVector<f64> {
        self.hypotheses
            .last()
            .expect("trace holds at least the initial hypothesis")
    }

    pub fn losses(&self) -> Vec<f64> {
        self.rounds.iter().map(|r| r.loss).collect()
    }

    pub fn est_errors(&self) -> Option<Vec<f64>> {
        self.rounds.iter().map(|r| r.est_error).collect()
    }

    /// Largest progress-inequality violation over all rounds (negative when all hold strictly).
    pub fn max_progress_gap(&self) -> f64 {
        self.rounds
            .iter()
            .zip(self.hypotheses.iter().skip(1))
            .map(|(r, next)| r.progress_gap(next))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let p = self.hypotheses.first().map_or(0, |h| h.len());
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string()];
        header.extend((0..p).map(|j| format!("theta_{j}")));
        header.extend(
            [
                "loss",
                "cum_loss_avg",
                "est_error",
                "wall_time_ms",
                "nodes_explored",
                "eta",
                "post_loss",
                "status",
            ]
            .map(String::from),
        );
        w.write_record(&header)?;
        for r in &self.rounds {
            let mut rec = vec![r.t.to_string()];
            rec.extend(r.theta.iter().map(|v| v.to_string()));
            rec.push(r.loss.to_string());
            rec.push(r.cum_loss_avg.to_string());
            rec.push(r.est_error.map_or(String::new(), |e| e.to_string()));
            rec.push(r.wall_time_ms.to_string());
            rec.push(r.nodes_explored.to_string());
            rec.push(r.eta.to_string());
            rec.push(r.post_loss.to_string());
            rec.push(r.status.to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_csv_file(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

/// Relative estimation error `||theta - truth|| / ||truth||`.
pub fn relative_error(theta: &DVector<f64>, truth: &DVector<f64>) -> f64 {
    (theta - truth).norm() / truth.norm()
}

/// Run the online learner over `stream`.
pub fn run(
    problem: &ParamQp,
    bx: &ParameterBox,
    stream: &[Observation],
    config: &LearnerConfig,
) -> Result<RunTrace> {
    run_with_truth(problem, bx, stream, config, None)
}

/// Run the learner and record the estimation error against `truth`.
pub fn run_with_truth(
    problem: &ParamQp,
    bx: &ParameterBox,
    stream: &[Observation],
    config: &LearnerConfig,
    truth: Option<&DVector<f64>>,
) -> Result<RunTrace> {
    config.check()?;
    if stream.is_empty() {
        return Err(Error::Config("observation stream is empty".into()));
    }
    if let Some(truth) = truth {
        if truth.len() != problem.p() {
            return Err(Error::Dimension(format!(
                "true parameter has length {}, expected {}",
                truth.len(),
                problem.p()
            )));
        }
    }
    let mut theta = match &config.start {
        StartMode::Cold(theta1) => {
            if theta1.len() != problem.p() {
                return Err(Error::Dimension(format!(
                    "initial hypothesis has length {}, expected {}",
                    theta1.len(),
                    problem.p()
                )));
            }
            if !bx.contains(theta1, 1e-9) {
                return Err(Error::Config(
                    "initial hypothesis lies outside the parameter box".into(),
                ));
            }
            bx.project(theta1)
        }
        StartMode::Warm(history) => warm_start(problem, bx, history)?,
    };

    let mut rounds = Vec::with_capacity(stream.len());
    let mut hypotheses = Vec::with_capacity(stream.len() + 1);
    hypotheses.push(theta.clone());
    let mut cum_loss = 0.0;
    for (i, obs) in stream.iter().enumerate() {
        let t = i + 1;
        let started = Instant::now();
        let current = loss::eval_loss(problem, &theta, obs).map_err(|e| e.at_round(t))?;
        let eta = config.eta(t);
        let (next, nodes, status, post_loss) = if current.value < config.loss_threshold {
            (theta.clone(), 0, RoundStatus::Skipped, current.value)
        } else {
            let res = update::implicit_update_with(
                problem,
                bx,
                &theta,
                eta,
                obs,
                Some(&current),
                &config.update,
            )
            .map_err(|e| e.at_round(t))?;
            let mut next = res.theta_next;
            if let Some(target) = config.normalize {
                let norm = next.norm();
                if norm > 0.0 {
                    next *= target / norm;
                }
                next = bx.project(&next);
            }
            let post = loss::eval_loss(problem, &next, obs)
                .map_err(|e| e.at_round(t))?
                .value;
            (
                next,
                res.nodes_explored,
                RoundStatus::Updated(res.status),
                post,
            )
        };
        let wall_time_ms = started.elapsed().as_secs_f64() * 1e3;
        cum_loss += current.value;
        rounds.push(RoundRecord {
            t,
            theta: theta.clone(),
            loss: current.value,
            cum_loss_avg: cum_loss / t as f64,
            est_error: truth.map(|tr| relative_error(&theta, tr)),
            wall_time_ms,
            nodes_explored: nodes,
            eta,
            post_loss,
            status,
        });
        theta = next;
        hypotheses.push(theta.clone());
    }
    Ok(RunTrace { rounds, hypotheses })
}

/// Initial hypothesis from the squared KKT-residual program over `history`:
///
/// ```text
///     min_{theta in box, mu_t >= 0, nu_t}  1/N sum_t (mu_t' g_t(theta))^2 + ||Q y_t + c(theta, u_t) - A_t' mu_t - A_eq' nu_t||^2
/// ```
///
/// where `g_t(theta) = A_t y_t - b(theta, u_t)`.
///
/// When theta enters only the cost the program is jointly convex. The multipliers are then
/// minimized out per observation and the resulting convex function of theta is descended with
/// steps that solve the quadratic model obtained by freezing each multiplier support, followed
/// by a backtracking line search. Otherwise the bilinear complementarity term is handled by 10
/// alternating passes (multipliers, then theta) from the box center.
pub fn warm_start(
    problem: &ParamQp,
    bx: &ParameterBox,
    history: &[Observation],
) -> Result<DVector<f64>> {
    if history.is_empty() {
        return Err(Error::Config("warm-start history is empty".into()));
    }
    for obs in history {
        obs.check_dims(problem)?;
    }
    let data: Vec<ResidualData> = history
        .iter()
        .map(|obs| ResidualData::new(problem, obs))
        .collect();
    let theta = if problem.b_theta().iter().all(|&v| v == 0.0) {
        fit_cost_only(problem, bx, &data)?
    } else {
        fit_alternating(problem, bx, &data)?
    };
    Ok(bx.project(&theta))
}

fn fit_alternating(
    problem: &ParamQp,
    bx: &ParameterBox,
    data: &[ResidualData],
) -> Result<DVector<f64>> {
    let k = problem.n_ineq() + problem.n_eq();
    let mut theta = bx.center();
    let mut duals: Vec<DVector<f64>> = vec![DVector::zeros(k); data.len()];
    for pass in 0..10 {
        for (d, z) in data.iter().zip(duals.iter_mut()) {
            *z = d.dual_step(problem, &theta, z)?;
        }
        theta = theta_step(problem, bx, data, &duals, &theta)?;
        log::debug!(
            "warm start pass {pass}: residual {}",
            mean_residual(problem, data, &theta, &duals)
        );
    }
    Ok(theta)
}

fn mean_residual(
    problem: &ParamQp,
    data: &[ResidualData],
    theta: &DVector<f64>,
    duals: &[DVector<f64>],
) -> f64 {
    data.iter()
        .zip(duals)
        .map(|(d, z)| d.residual(problem, theta, z))
        .sum::<f64>()
        / data.len() as f64
}

fn fit_cost_only(
    problem: &ParamQp,
    bx: &ParameterBox,
    data: &[ResidualData],
) -> Result<DVector<f64>> {
    let k = problem.n_ineq() + problem.n_eq();
    let evaluate =
        |theta: &DVector<f64>, start: &[DVector<f64>]| -> Result<(f64, Vec<DVector<f64>>)> {
            let duals = data
                .iter()
                .zip(start)
                .map(|(d, z)| d.dual_step(problem, theta, z))
                .collect::<Result<Vec<_>>>()?;
            Ok((mean_residual(problem, data, theta, &duals), duals))
        };
    let mut theta = bx.center();
    let (mut value, mut duals) = evaluate(&theta, &vec![DVector::zeros(k); data.len()])?;
    for iter in 0..100 {
        let target = model_step(problem, bx, data, &duals, &theta)?;
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..30 {
            let trial = &theta + (&target - &theta) * step;
            let (v, z) = evaluate(&trial, &duals)?;
            if v < value {
                accepted = Some((trial, v, z));
                break;
            }
            step *= 0.5;
        }
        let Some((trial, v, z)) = accepted else { break };
        let gain = value - v;
        theta = trial;
        value = v;
        duals = z;
        log::debug!("warm start iteration {iter}: residual {value}");
        if gain <= 1e-12 * value + 1e-15 {
            break;
        }
    }
    Ok(theta)
}

/// Minimizer over the box of the residual with every multiplier support frozen.
fn model_step(
    problem: &ParamQp,
    bx: &ParameterBox,
    data: &[ResidualData],
    duals: &[DVector<f64>],
    theta: &DVector<f64>,
) -> Result<DVector<f64>> {
    let (n, p) = (problem.n(), problem.p());
    let mut c_hat = DMatrix::zeros(n + 1, p);
    c_hat.rows_mut(1, n).copy_from(problem.c_theta());
    let mut h = DMatrix::zeros(p, p);
    let mut lin = DVector::zeros(p);
    for (d, z) in data.iter().zip(duals) {
        let (cols, target) = d.stacked(z);
        let (basis, _) = linalg::orthonormalize(&cols, 1e-10);
        let project_out = |v: &DVector<f64>| -> DVector<f64> {
            let mut r = v.clone();
            for b in &basis {
                r -= b * b.dot(v);
            }
            r
        };
        let mut pc = DMatrix::zeros(n + 1, p);
        for j in 0..p {
            pc.set_column(j, &project_out(&c_hat.column(j).into_owned()));
        }
        h += c_hat.transpose() * &pc;
        lin += pc.transpose() * target;
    }
    let scale = 2.0 / data.len() as f64;
    box_qp(bx, h * scale, lin * scale, theta)
}

fn box_qp(
    bx: &ParameterBox,
    h: DMatrix<f64>,
    c: DVector<f64>,
    start: &DVector<f64>,
) -> Result<DVector<f64>> {
    let p = bx.dim();
    let mut a_in = DMatrix::zeros(2 * p, p);
    let mut b_in = DVector::zeros(2 * p);
    for j in 0..p {
        a_in[(2 * j, j)] = 1.0;
        b_in[2 * j] = bx.lo()[j];
        a_in[(2 * j + 1, j)] = -1.0;
        b_in[2 * j + 1] = -bx.hi()[j];
    }
    let h = (&h + h.transpose()) * 0.5;
    solve_residual_qp(&ConcreteQp::with_inequalities(h, c, a_in, b_in), start)
}

/// Per-observation pieces of the residual program.
struct ResidualData {
    /// `[A_t', A_eq']`, `n x (q + r)`.
    m: DMatrix<f64>,
    /// `Q y + c0 + C_u u`
    w: DVector<f64>,
    /// `A_t y - b0 - B_u u`
    g0: DVector<f64>,
    q: usize,
}

impl ResidualData {
    fn new(problem: &ParamQp, obs: &Observation) -> Self {
        let a = problem.ineq_matrix(&obs.u);
        let (n, q, r) = (problem.n(), problem.n_ineq(), problem.n_eq());
        let mut m = DMatrix::zeros(n, q + r);
        m.columns_mut(0, q).copy_from(&a.transpose());
        m.columns_mut(q, r).copy_from(&problem.a_eq().transpose());
        Self {
            m,
            w: problem.q() * &obs.y + problem.c0() + problem.c_u() * &obs.u,
            g0: &a * &obs.y - problem.b0_ineq() - problem.b_u() * &obs.u,
            q,
        }
    }

    /// Columns of `[g'; M]` on the support of `z` (with `g` at theta-free slack) and the
    /// target `[0; w]`, both as `n + 1` vectors. Only valid when theta is cost-only.
    fn stacked(&self, z: &DVector<f64>) -> (Vec<DVector<f64>>, DVector<f64>) {
        let n = self.m.nrows();
        let mut cols = Vec::new();
        for j in 0..self.m.ncols() {
            if j < self.q && z[j] <= 0.0 {
                continue;
            }
            let mut col = DVector::zeros(n + 1);
            if j < self.q {
                col[0] = self.g0[j];
            }
            col.rows_mut(1, n).copy_from(&self.m.column(j));
            cols.push(col);
        }
        let mut target = DVector::zeros(n + 1);
        target.rows_mut(1, n).copy_from(&self.w);
        (cols, target)
    }

    fn slack(&self, problem: &ParamQp, theta: &DVector<f64>) -> DVector<f64> {
        &self.g0 - problem.b_theta() * theta
    }

    fn residual(&self, problem: &ParamQp, theta: &DVector<f64>, z: &DVector<f64>) -> f64 {
        let comp = z.rows(0, self.q).dot(&self.slack(problem, theta));
        let stat = &self.w + problem.c_theta() * theta - &self.m * z;
        comp * comp + stat.norm_squared()
    }

    fn dual_step(
        &self,
        problem: &ParamQp,
        theta: &DVector<f64>,
        start: &DVector<f64>,
    ) -> Result<DVector<f64>> {
        let k = self.m.ncols();
        let mut g = DVector::zeros(k);
        g.rows_mut(0, self.q).copy_from(&self.slack(problem, theta));
        let v = &self.w + problem.c_theta() * theta;
        let h = (&g * g.transpose() + self.m.transpose() * &self.m) * 2.0;
        let mut a_in = DMatrix::zeros(self.q, k);
        for i in 0..self.q {
            a_in[(i, i)] = 1.0;
        }
        let sub = ConcreteQp::with_inequalities(
            h,
            -(self.m.transpose() * v) * 2.0,
            a_in,
            DVector::zeros(self.q),
        );
        solve_residual_qp(&sub, start)
    }
}

fn theta_step(
    problem: &ParamQp,
    bx: &ParameterBox,
    data: &[ResidualData],
    duals: &[DVector<f64>],
    theta: &DVector<f64>,
) -> Result<DVector<f64>> {
    let p = problem.p();
    let ct = problem.c_theta();
    let mut h = DMatrix::zeros(p, p);
    let mut c = DVector::zeros(p);
    for (d, z) in data.iter().zip(duals) {
        let mu = z.rows(0, d.q);
        let a = problem.b_theta().transpose() * mu;
        let v = &d.w - &d.m * z;
        h += &a * a.transpose() + ct.transpose() * ct;
        c += -&a * mu.dot(&d.g0) + ct.transpose() * v;
    }
    let scale = 2.0 / data.len() as f64;
    box_qp(bx, h * scale, c * scale, theta)
}

fn solve_residual_qp(sub: &ConcreteQp, start: &DVector<f64>) -> Result<DVector<f64>> {
    match qp::solve_from(sub, start) {
        Ok(sol) => Ok(sol.x),
        // Objective is a sum of squares; a ray can only be flat, so keep the start.
        Err(QpError::Unbounded) => Ok(start.clone()),
        Err(e) => Err(e.into()),
    }
}

/// Learning rate `D lambda / (2 sqrt 2 (B + R) kappa) / sqrt(t)` with guaranteed regret.
pub fn schedule_eta(constants: &TheoryConstants, t: usize) -> Result<f64> {
    check_constants(constants)?;
    let c = constants;
    Ok(c.d_bound * c.lambda
        / (2.0 * 2f64.sqrt() * (c.b_bound + c.r_bound) * c.kappa)
        / (t.max(1) as f64).sqrt())
}

/// Regret bound `4 sqrt 2 (B + R) D kappa sqrt(T) / lambda` of the theoretical schedule.
pub fn regret_bound(constants: &TheoryConstants, rounds: usize) -> Result<f64> {
    check_constants(constants)?;
    let c = constants;
    Ok(
        4.0 * 2f64.sqrt() * (c.b_bound + c.r_bound) * c.d_bound * c.kappa * (rounds as f64).sqrt()
            / c.lambda,
    )
}

fn check_constants(c: &TheoryConstants) -> Result<()> {
    if !(c.lambda > 1e-9) {
        return Err(Error::NotStronglyConvex { lambda: c.lambda });
    }
    if !c.all_positive() {
        return Err(Error::Config(
            "theory constants must all be positive".into(),
        ));
    }
    Ok(())
}
