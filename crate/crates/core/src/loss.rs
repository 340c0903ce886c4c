//! Squared-distance loss `l(y, u, theta) = min_{x in S(u, theta)} ||y - x||^2`.
//!
//! With a strongly convex objective `S(u, theta)` is a single point and one forward solve
//! suffices. Otherwise the solution set is a polyhedron and the loss is a projection onto it.
//! Two exact routes are provided for that case:
//!
//! - [`LossMethod::OptimalFace`] (default): for a convex QP every minimizer shares `Qx` and
//!   `c'x` with any one minimizer `x*`, so `S = {x in X : Qx = Qx*, c'x = c'x*}` and the loss
//!   is a strictly convex projection QP.
//! - [`LossMethod::KktBranchAndBound`]: minimize `||y - x||^2` over the full KKT system of the
//!   forward problem with the complementarity branch-and-bound of [`crate::update`].

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{Observation, ParamQp, ParameterBox};
use crate::qp::{self, ConcreteQp, QpError};
use crate::update::{self, UpdateOptions};

/// How the attaining point was computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolvedVia {
    /// Unique optimum from one forward solve.
    SingleForward,
    /// Projection onto the optimal face of a multivalued solution set.
    FaceProjection,
    /// Complementarity branch-and-bound over the forward KKT system.
    KktProjection,
}

/// Route used when the solution set may be multivalued.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LossMethod {
    #[default]
    OptimalFace,
    KktBranchAndBound,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossValue {
    pub value: f64,
    /// Closest point of `S(u, theta)` to `y`.
    pub x_star: DVector<f64>,
    pub solved_via: SolvedVia,
}

/// Evaluate the loss with the default method.
pub fn eval_loss(problem: &ParamQp, theta: &DVector<f64>, obs: &Observation) -> Result<LossValue> {
    eval_loss_with(problem, theta, obs, LossMethod::default())
}

pub fn eval_loss_with(
    problem: &ParamQp,
    theta: &DVector<f64>,
    obs: &Observation,
    method: LossMethod,
) -> Result<LossValue> {
    obs.check_dims(problem)?;
    let forward = problem.instantiate(theta, &obs.u)?;
    match method {
        LossMethod::OptimalFace => loss_on_forward(problem, &forward, &obs.y),
        LossMethod::KktBranchAndBound => {
            let sol = forward_solve(&forward)?;
            if problem.is_strongly_convex() {
                return Ok(single(sol.x, &obs.y));
            }
            let point = ParameterBox::point(theta)?;
            let res = update::kkt_projection(
                problem,
                &point,
                theta,
                obs,
                &sol.x,
                &UpdateOptions::default(),
            )?;
            Ok(LossValue {
                value: (&obs.y - &res.x_at_opt).norm_squared(),
                x_star: res.x_at_opt,
                solved_via: SolvedVia::KktProjection,
            })
        }
    }
}

/// Loss against an already instantiated forward problem, using the optimal-face route.
pub(crate) fn loss_on_forward(
    problem: &ParamQp,
    forward: &ConcreteQp,
    y: &DVector<f64>,
) -> Result<LossValue> {
    let sol = forward_solve(forward)?;
    if problem.is_strongly_convex() {
        Ok(single(sol.x, y))
    } else {
        project_onto_face(forward, &sol.x, y)
    }
}

fn single(x: DVector<f64>, y: &DVector<f64>) -> LossValue {
    LossValue {
        value: (y - &x).norm_squared(),
        x_star: x,
        solved_via: SolvedVia::SingleForward,
    }
}

pub(crate) fn forward_solve(forward: &ConcreteQp) -> Result<qp::QpSolution> {
    qp::solve(forward).map_err(|e| match e {
        QpError::Infeasible => Error::InfeasibleForward,
        other => other.into(),
    })
}

/// Project `y` onto `{x in X : Qx = Qx*, c'x = c'x*}`.
fn project_onto_face(
    forward: &ConcreteQp,
    x_star: &DVector<f64>,
    y: &DVector<f64>,
) -> Result<LossValue> {
    let n = forward.n();
    let r = forward.n_eq();
    let qx = &forward.q * x_star;
    let mut a_eq = DMatrix::zeros(r + n + 1, n);
    let mut b_eq = DVector::zeros(r + n + 1);
    a_eq.rows_mut(0, r).copy_from(&forward.a_eq);
    b_eq.rows_mut(0, r).copy_from(&forward.b_eq);
    a_eq.rows_mut(r, n).copy_from(&forward.q);
    b_eq.rows_mut(r, n).copy_from(&qx);
    a_eq.row_mut(r + n).copy_from(&forward.c.transpose());
    b_eq[r + n] = forward.c.dot(x_star);
    let projection = ConcreteQp {
        q: DMatrix::identity(n, n),
        c: -y,
        a_ineq: forward.a_ineq.clone(),
        b_ineq: forward.b_ineq.clone(),
        a_eq,
        b_eq,
    };
    let sol = qp::solve_from(&projection, x_star)?;
    Ok(LossValue {
        value: (y - &sol.x).norm_squared(),
        x_star: sol.x,
        solved_via: SolvedVia::FaceProjection,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn dv(v: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(v)
    }

    /// min 1/2 x^2 - theta x  s.t. x >= 0
    fn one_dim() -> ParamQp {
        ParamQp::builder(1, 1, 0)
            .quadratic(DMatrix::identity(1, 1))
            .cost_theta(-DMatrix::identity(1, 1))
            .inequalities(DMatrix::identity(1, 1), dv(&[0.0]))
            .build()
            .unwrap()
    }

    /// min theta'x  s.t. x1 + x2 >= 1, x >= 0
    fn segment() -> ParamQp {
        ParamQp::builder(2, 2, 0)
            .cost_theta(DMatrix::identity(2, 2))
            .inequalities(
                DMatrix::from_row_slice(3, 2, &[1.0, 1.0, 1.0, 0.0, 0.0, 1.0]),
                dv(&[1.0, 0.0, 0.0]),
            )
            .build()
            .unwrap()
    }

    #[test]
    fn zero_when_observation_is_optimal() {
        let obs = Observation::new(dv(&[]), dv(&[2.0])).unwrap();
        let l = eval_loss(&one_dim(), &dv(&[2.0]), &obs).unwrap();
        assert_eq!(l.value, 0.0);
        assert_eq!(l.solved_via, SolvedVia::SingleForward);
    }

    #[test]
    fn one_dim_closed_form() {
        for (theta, y) in [(2.0, 3.0), (-1.0, 0.5), (0.7, -0.2)] {
            let obs = Observation::new(dv(&[]), dv(&[y])).unwrap();
            let l = eval_loss(&one_dim(), &dv(&[theta]), &obs).unwrap();
            let x_star = f64::max(theta, 0.0);
            assert_relative_eq!(l.value, (y - x_star).powi(2), epsilon = 1e-12);
        }
    }

    #[test]
    fn segment_projection_both_routes() {
        let obs = Observation::new(dv(&[]), dv(&[0.6, 0.6])).unwrap();
        let theta = dv(&[1.0, 1.0]);
        for method in [LossMethod::OptimalFace, LossMethod::KktBranchAndBound] {
            let l = eval_loss_with(&segment(), &theta, &obs, method).unwrap();
            assert_relative_eq!(l.value, 0.02, epsilon = 1e-9);
            assert!((&l.x_star - dv(&[0.5, 0.5])).amax() < 1e-8);
        }
    }

    #[test]
    fn segment_endpoint_projection() {
        // y far to one side projects onto the endpoint (1, 0).
        let obs = Observation::new(dv(&[]), dv(&[3.0, -1.0])).unwrap();
        let l = eval_loss(&segment(), &dv(&[1.0, 1.0]), &obs).unwrap();
        assert_relative_eq!(l.value, 5.0, epsilon = 1e-9);
    }

    #[test]
    fn infeasible_forward_is_an_error() {
        let problem = ParamQp::builder(1, 1, 0)
            .quadratic(DMatrix::identity(1, 1))
            .inequalities(DMatrix::from_row_slice(2, 1, &[1.0, -1.0]), dv(&[0.0, 0.0]))
            .ineq_theta(DMatrix::from_row_slice(2, 1, &[1.0, 0.0]))
            .build()
            .unwrap();
        let obs = Observation::new(dv(&[]), dv(&[0.0])).unwrap();
        let err = eval_loss(&problem, &dv(&[1.0]), &obs).unwrap_err();
        assert!(matches!(err, Error::InfeasibleForward));
    }

    #[test]
    fn strictly_convex_routes_agree() {
        // Run the face and branch-and-bound routes on strongly convex data by temporarily
        // treating it as general: both must land on the unique optimum.
        for seed in 0..20u64 {
            let (problem, bx) = crate::instances::random_cost_model(seed, 3, 4);
            let theta = bx.corner(seed % 8);
            let obs = Observation::new(dv(&[]), dv(&[0.3, -0.4, 1.1])).unwrap();
            let single = eval_loss(&problem, &theta, &obs).unwrap();
            let forward = problem.instantiate(&theta, &obs.u).unwrap();
            let face = project_onto_face(&forward, &single.x_star, &obs.y).unwrap();
            let point = ParameterBox::point(&theta).unwrap();
            let bnb = update::kkt_projection(
                &problem,
                &point,
                &theta,
                &obs,
                &single.x_star,
                &UpdateOptions::default(),
            )
            .unwrap();
            let bnb_value = (&obs.y - &bnb.x_at_opt).norm_squared();
            assert!((single.value - face.value).abs() < 1e-6, "seed {seed}");
            assert!((single.value - bnb_value).abs() < 1e-6, "seed {seed}");
        }
    }
}
