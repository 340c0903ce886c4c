use nalgebra::{DMatrix, DVector};

use super::{ConcreteQp, QpError, QpSolution};
use crate::linalg::{lstsq, orthonormalize, row, stack_rows, Face};

/// Data seen by the active-set iteration. Equality rows must be linearly independent.
struct Problem<'a> {
    h: &'a DMatrix<f64>,
    g0: &'a DVector<f64>,
    ineq_rows: Vec<DVector<f64>>,
    ineq_rhs: &'a DVector<f64>,
    eq_rows: Vec<DVector<f64>>,
}

struct Outcome {
    x: DVector<f64>,
    working: Vec<usize>,
    iterations: usize,
}

/// Primal active-set iteration from a feasible `x`.
///
/// Each step minimizes the objective on the face defined by the working set using a
/// null-space basis. When the reduced Hessian is singular and the reduced gradient has a
/// component in its kernel, the step follows that zero-curvature direction until a
/// constraint blocks it (or reports unboundedness).
fn iterate(
    p: &Problem<'_>,
    mut x: DVector<f64>,
    mut working: Vec<usize>,
    max_iter: usize,
) -> Result<Outcome, QpError> {
    let n = x.len();
    let m = p.ineq_rows.len();
    let hscale = 1.0_f64.max(p.h.amax());
    let row_norms: Vec<f64> = p.ineq_rows.iter().map(|r| r.norm()).collect();
    let mut in_working = vec![false; m];
    for &i in &working {
        in_working[i] = true;
    }
    // Bland-style lowest-index selection kicks in after a long run of zero-length steps.
    let bland_after = 2 * (n + m) + 10;
    let mut degenerate_streak = 0usize;
    let mut iterations = 0usize;

    loop {
        if iterations >= max_iter {
            return Err(QpError::IterationLimit { iterations });
        }
        iterations += 1;

        let g = p.h * &x + p.g0;
        let mut rows: Vec<DVector<f64>> = p.eq_rows.clone();
        rows.extend(working.iter().map(|&i| p.ineq_rows[i].clone()));
        let face = Face::new(n, &rows);
        let z = &face.z;
        let gtol = 1e-11 * (1.0 + g.amax());

        let mut step: Option<(DVector<f64>, bool)> = None;
        if z.ncols() > 0 {
            let gz = z.tr_mul(&g);
            if gz.amax() > gtol {
                let hz = z.tr_mul(&(p.h * z));
                let hz = (&hz + hz.transpose()) * 0.5;
                let eig = hz.symmetric_eigen();
                let w = eig.eigenvectors.tr_mul(&gz);
                let ctol = 1e-10 * hscale;
                let k = z.ncols();
                let mut ray = DVector::zeros(k);
                let mut newton = DVector::zeros(k);
                let mut has_ray = false;
                for j in 0..k {
                    let lam = eig.eigenvalues[j];
                    let v = eig.eigenvectors.column(j);
                    if lam <= ctol {
                        if w[j].abs() > gtol {
                            has_ray = true;
                        }
                        ray.axpy(-w[j], &v, 1.0);
                    } else {
                        newton.axpy(-w[j] / lam, &v, 1.0);
                    }
                }
                let d = if has_ray { z * ray } else { z * newton };
                if d.amax() > 1e-14 * (1.0 + x.amax()) {
                    step = Some((d, has_ray));
                }
            }
        }

        let Some((d, is_ray)) = step else {
            // Stationary on the current face: inspect working-set multipliers.
            if working.is_empty() {
                return Ok(Outcome {
                    x,
                    working,
                    iterations,
                });
            }
            let lambda = face.multipliers(&rows, &g);
            let ne = p.eq_rows.len();
            let dual_tol = 1e-10 * (1.0 + g.amax());
            let bland = degenerate_streak > bland_after;
            let mut drop: Option<(usize, f64)> = None;
            for (k, &i) in working.iter().enumerate() {
                let l = lambda[ne + k];
                if l >= -dual_tol {
                    continue;
                }
                let better = match drop {
                    None => true,
                    Some((kb, lb)) => {
                        if bland {
                            i < working[kb]
                        } else {
                            l < lb || (l == lb && i < working[kb])
                        }
                    }
                };
                if better {
                    drop = Some((k, l));
                }
            }
            match drop {
                None => {
                    return Ok(Outcome {
                        x,
                        working,
                        iterations,
                    })
                }
                Some((k, _)) => {
                    let i = working.remove(k);
                    in_working[i] = false;
                }
            }
            continue;
        };

        let dnorm = d.norm();
        let mut best: Option<(usize, f64)> = None;
        for i in 0..m {
            if in_working[i] {
                continue;
            }
            let ad = p.ineq_rows[i].dot(&d);
            if ad >= -1e-12 * row_norms[i] * dnorm {
                continue;
            }
            let slack = (p.ineq_rows[i].dot(&x) - p.ineq_rhs[i]).max(0.0);
            let alpha = slack / -ad;
            if best.is_none_or(|(_, b)| alpha < b) {
                best = Some((i, alpha));
            }
        }

        let (alpha, blocking) = match (best, is_ray) {
            (None, true) => return Err(QpError::Unbounded),
            (None, false) => (1.0, None),
            (Some((i, a)), true) => (a, Some(i)),
            (Some((i, a)), false) => {
                if a < 1.0 {
                    (a, Some(i))
                } else {
                    (1.0, None)
                }
            }
        };
        if alpha > 0.0 {
            x.axpy(alpha, &d, 1.0);
            degenerate_streak = 0;
        } else {
            degenerate_streak += 1;
        }
        if let Some(i) = blocking {
            working.push(i);
            in_working[i] = true;
        }
    }
}

/// Minimize the total violation of the rows that `x0` violates.
///
/// Rows `x0` satisfies stay hard; each violated inequality and each equality with a nonzero
/// residual gets one nonnegative elastic variable, started at the violation.
fn phase_one(
    qp: &ConcreteQp,
    eq_idx: &[usize],
    x0: &DVector<f64>,
) -> Result<(DVector<f64>, usize), QpError> {
    let n = qp.n();
    let qi = qp.n_ineq();
    let ax = &qp.a_ineq * x0;
    let violated: Vec<usize> = (0..qi).filter(|&i| ax[i] < qp.b_ineq[i]).collect();
    let residual: Vec<(usize, f64)> = eq_idx
        .iter()
        .map(|&e| (e, qp.b_eq[e] - qp.a_eq.row(e).dot(&x0.transpose())))
        .collect();
    let elastic_eq: Vec<(usize, f64)> = residual
        .iter()
        .copied()
        .filter(|&(_, r)| r != 0.0)
        .collect();
    let ne = violated.len() + elastic_eq.len();
    let nn = n + ne;

    let h = DMatrix::zeros(nn, nn);
    let mut g0 = DVector::zeros(nn);
    g0.rows_mut(n, ne).fill(1.0);

    let mut ineq_rows = Vec::with_capacity(qi + ne);
    let mut rhs = Vec::with_capacity(qi + ne);
    let mut z = DVector::zeros(nn);
    z.rows_mut(0, n).copy_from(x0);
    for i in 0..qi {
        let mut r = DVector::zeros(nn);
        r.rows_mut(0, n).copy_from(&row(&qp.a_ineq, i));
        if let Some(k) = violated.iter().position(|&v| v == i) {
            r[n + k] = 1.0;
            z[n + k] = qp.b_ineq[i] - ax[i];
        }
        ineq_rows.push(r);
        rhs.push(qp.b_ineq[i]);
    }
    for k in 0..ne {
        let mut r = DVector::zeros(nn);
        r[n + k] = 1.0;
        ineq_rows.push(r);
        rhs.push(0.0);
    }
    let mut eq_rows = Vec::with_capacity(eq_idx.len());
    for &(e, res) in &residual {
        let mut r = DVector::zeros(nn);
        r.rows_mut(0, n).copy_from(&row(&qp.a_eq, e));
        if let Some(k) = elastic_eq.iter().position(|&(f, _)| f == e) {
            let col = n + violated.len() + k;
            r[col] = res.signum();
            z[col] = res.abs();
        }
        eq_rows.push(r);
    }

    let rhs = DVector::from_vec(rhs);
    let problem = Problem {
        h: &h,
        g0: &g0,
        ineq_rows,
        ineq_rhs: &rhs,
        eq_rows,
    };
    let scale = 1.0
        + qp.b_ineq
            .amax()
            .max(if qp.n_eq() > 0 { qp.b_eq.amax() } else { 0.0 });
    let working = tight_rows(&problem, &z, scale);
    let out = iterate(&problem, z, working, 200 * (nn + qi + ne).max(1))?;
    let violation: f64 = out.x.rows(n, ne).iter().sum();
    if violation > 1e-9 * scale {
        return Err(QpError::Infeasible);
    }
    Ok((out.x.rows(0, n).into_owned(), out.iterations))
}

pub(super) fn solve(qp: &ConcreteQp, start: Option<&DVector<f64>>) -> Result<QpSolution, QpError> {
    qp.check()?;
    let n = qp.n();
    let qi = qp.n_ineq();
    let max_iter = 200 * (n + qi).max(1);

    let eq_all: Vec<DVector<f64>> = (0..qp.n_eq()).map(|i| row(&qp.a_eq, i)).collect();
    let (_, kept) = orthonormalize(&eq_all, 1e-10);
    let eq_idx: Vec<usize> = kept
        .iter()
        .enumerate()
        .filter_map(|(i, &k)| k.then_some(i))
        .collect();

    let bscale = 1.0
        + qp.b_ineq
            .amax()
            .max(if qp.n_eq() > 0 { qp.b_eq.amax() } else { 0.0 });
    let x0 = start.cloned().unwrap_or_else(|| DVector::zeros(n));
    if x0.len() != n {
        return Err(QpError::Dimension(format!(
            "start has length {}, expected {n}",
            x0.len()
        )));
    }
    let (x_feasible, phase_one_iterations) = if qp.primal_violation(&x0) <= 1e-12 * bscale {
        (x0, 0)
    } else {
        phase_one(qp, &eq_idx, &x0)?
    };
    // Dependent equality rows must also hold.
    if qp.primal_violation(&x_feasible) > 1e-8 * bscale {
        return Err(QpError::Infeasible);
    }

    let ineq_rows: Vec<DVector<f64>> = (0..qi).map(|i| row(&qp.a_ineq, i)).collect();
    let eq_rows: Vec<DVector<f64>> = eq_idx.iter().map(|&i| eq_all[i].clone()).collect();
    let problem = Problem {
        h: &qp.q,
        g0: &qp.c,
        ineq_rows,
        ineq_rhs: &qp.b_ineq,
        eq_rows,
    };
    let working = tight_rows(&problem, &x_feasible, bscale);
    let mut out = iterate(&problem, x_feasible, working, max_iter)?;
    out.iterations += phase_one_iterations;
    Ok(finish(qp, &problem, &eq_idx, out))
}

/// Inequality rows tight at `x` that are independent of the equality rows and of each other.
fn tight_rows(p: &Problem<'_>, x: &DVector<f64>, bscale: f64) -> Vec<usize> {
    let tight: Vec<usize> = (0..p.ineq_rows.len())
        .filter(|&i| (p.ineq_rows[i].dot(x) - p.ineq_rhs[i]).abs() <= 1e-12 * bscale)
        .collect();
    if tight.is_empty() {
        return tight;
    }
    let mut rows = p.eq_rows.clone();
    rows.extend(tight.iter().map(|&i| p.ineq_rows[i].clone()));
    let (_, kept) = orthonormalize(&rows, 1e-8);
    let ne = p.eq_rows.len();
    tight
        .into_iter()
        .enumerate()
        .filter_map(|(k, i)| kept[ne + k].then_some(i))
        .collect()
}

fn finish(qp: &ConcreteQp, p: &Problem<'_>, eq_idx: &[usize], out: Outcome) -> QpSolution {
    let n = qp.n();
    let mut rows: Vec<DVector<f64>> = p.eq_rows.clone();
    let mut rhs: Vec<f64> = eq_idx.iter().map(|&i| qp.b_eq[i]).collect();
    for &i in &out.working {
        rows.push(p.ineq_rows[i].clone());
        rhs.push(qp.b_ineq[i]);
    }
    let mut x = out.x;
    if !rows.is_empty() {
        // Land exactly on the working-set face.
        let aw = stack_rows(n, &rows);
        let resid = DVector::from_vec(rhs) - &aw * &x;
        x += lstsq(&aw, &resid, 1e-13);
    }

    let g = &qp.q * &x + &qp.c;
    let mut u_ineq = DVector::zeros(qp.n_ineq());
    let mut u_eq = DVector::zeros(qp.n_eq());
    let mut active = vec![false; qp.n_ineq()];
    if !rows.is_empty() {
        let awt = stack_rows(n, &rows).transpose();
        let lambda = lstsq(&awt, &g, 1e-13);
        for (k, &e) in eq_idx.iter().enumerate() {
            u_eq[e] = lambda[k];
        }
        for (k, &i) in out.working.iter().enumerate() {
            u_ineq[i] = lambda[eq_idx.len() + k].max(0.0);
            active[i] = true;
        }
    }
    let objective = qp.objective(&x);
    let kkt_residual = qp.kkt_residual(&x, &u_ineq, &u_eq);
    QpSolution {
        x,
        u_ineq,
        u_eq,
        active,
        objective,
        kkt_residual,
        iterations: out.iterations,
    }
}
