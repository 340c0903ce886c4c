//! Seeded random problem instances for tests and benchmarks.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{ParamQp, ParameterBox};
use crate::qp::ConcreteQp;

/// Random feasible QP with `n` variables and `q` inequalities.
///
/// `Q = M'M + 0.1 I` when `strictly_convex`, otherwise `Q = M'M` with `M` having fewer
/// rows than columns (singular). Constraints are built around a random interior-ish point so
/// the problem is always feasible, and box rows `-3 <= x <= 3` are appended in the singular case
/// to keep it bounded. Also returns the point the constraints were built around.
pub fn random_qp(
    seed: u64,
    n: usize,
    q: usize,
    strictly_convex: bool,
) -> (ConcreteQp, DVector<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows_m = if strictly_convex {
        n
    } else {
        n.saturating_sub(1).max(1)
    };
    let m = DMatrix::from_fn(rows_m, n, |_, _| rng.gen_range(-1.0..1.0));
    let mut qmat = m.transpose() * &m;
    if strictly_convex {
        qmat += DMatrix::identity(n, n) * 0.1;
    }
    let c = DVector::from_fn(n, |_, _| rng.gen_range(-3.0..3.0));
    let x_feas = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
    let extra = if strictly_convex { 0 } else { 2 * n };
    let mut a = DMatrix::zeros(q + extra, n);
    let mut b = DVector::zeros(q + extra);
    for i in 0..q {
        for j in 0..n {
            a[(i, j)] = rng.gen_range(-1.0..1.0);
        }
        let slack = if rng.gen_bool(0.3) {
            0.0
        } else {
            rng.gen_range(0.0..1.0)
        };
        b[i] = a.row(i).dot(&x_feas.transpose()) - slack;
    }
    for j in 0..extra / 2 {
        a[(q + 2 * j, j)] = 1.0;
        b[q + 2 * j] = -3.0;
        a[(q + 2 * j + 1, j)] = -1.0;
        b[q + 2 * j + 1] = -3.0;
    }
    (ConcreteQp::with_inequalities(qmat, c, a, b), x_feas)
}

/// Random cost-learning model: `min 1/2 x'Qx - theta'x` over a random polytope containing the
/// origin, with `theta` in `[0, 5]^p` (`p = n`).
pub fn random_cost_model(seed: u64, n: usize, q: usize) -> (ParamQp, ParameterBox) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    let qmat = m.transpose() * &m + DMatrix::identity(n, n) * 0.5;
    let a = DMatrix::from_fn(q, n, |_, _| rng.gen_range(-1.0..1.0));
    let b0 = DVector::from_fn(q, |_, _| -rng.gen_range(0.5..2.0));
    let problem = ParamQp::builder(n, n, 0)
        .quadratic(qmat)
        .cost_theta(-DMatrix::identity(n, n))
        .inequalities(a, b0)
        .build()
        .expect("random cost model is consistent");
    let bx =
        ParameterBox::new(DVector::zeros(n), DVector::from_element(n, 5.0)).expect("valid box");
    (problem, bx)
}
