use nalgebra::{DMatrix, DVector};

use super::{ConcreteQp, QpError, QpSolution, FEAS_TOL};
use crate::linalg::lstsq;

/// Largest inequality count accepted by [`enumerate_kkt`].
pub const ENUMERATION_LIMIT: usize = 20;

/// Brute-force KKT oracle.
///
/// Tries all `2^q` inequality active patterns. For each pattern the linear KKT system
/// (stationarity plus the pattern's constraints held with equality) is solved in the
/// least-norm sense; patterns whose solution satisfies the system, primal feasibility and
/// dual sign conditions are kept, and the lowest objective wins (first pattern on ties).
pub fn enumerate_kkt(qp: &ConcreteQp) -> Result<QpSolution, QpError> {
    qp.check()?;
    let n = qp.n();
    let q = qp.n_ineq();
    let r = qp.n_eq();
    if q > ENUMERATION_LIMIT {
        return Err(QpError::TooManyConstraints {
            count: q,
            limit: ENUMERATION_LIMIT,
        });
    }

    let mut best: Option<QpSolution> = None;
    for mask in 0u32..(1u32 << q) {
        let pattern: Vec<usize> = (0..q).filter(|i| mask & (1 << i) != 0).collect();
        let k = pattern.len();
        let dim = n + k + r;
        let mut kkt = DMatrix::zeros(dim, dim);
        let mut rhs = DVector::zeros(dim);
        kkt.view_mut((0, 0), (n, n)).copy_from(&qp.q);
        rhs.rows_mut(0, n).copy_from(&(-&qp.c));
        for (j, &i) in pattern.iter().enumerate() {
            for col in 0..n {
                let a = qp.a_ineq[(i, col)];
                kkt[(col, n + j)] = -a;
                kkt[(n + j, col)] = a;
            }
            rhs[n + j] = qp.b_ineq[i];
        }
        for e in 0..r {
            for col in 0..n {
                let a = qp.a_eq[(e, col)];
                kkt[(col, n + k + e)] = -a;
                kkt[(n + k + e, col)] = a;
            }
            rhs[n + k + e] = qp.b_eq[e];
        }

        let z = lstsq(&kkt, &rhs, 1e-12);
        let scale = 1.0 + rhs.amax();
        if (&kkt * &z - &rhs).amax() > FEAS_TOL * scale {
            continue;
        }
        let x = z.rows(0, n).into_owned();
        let mu = z.rows(n, k);
        if mu.iter().any(|&v| v < -FEAS_TOL) {
            continue;
        }
        if qp.primal_violation(&x) > FEAS_TOL * scale {
            continue;
        }

        let objective = qp.objective(&x);
        if best
            .as_ref()
            .is_some_and(|b| objective >= b.objective - 1e-12)
        {
            continue;
        }
        let mut u_ineq = DVector::zeros(q);
        let mut active = vec![false; q];
        for (j, &i) in pattern.iter().enumerate() {
            u_ineq[i] = mu[j].max(0.0);
            active[i] = true;
        }
        let u_eq = z.rows(n + k, r).into_owned();
        let kkt_residual = qp.kkt_residual(&x, &u_ineq, &u_eq);
        best = Some(QpSolution {
            x,
            u_ineq,
            u_eq,
            active,
            objective,
            kkt_residual,
            iterations: mask as usize + 1,
        });
    }
    best.ok_or(QpError::Infeasible)
}
