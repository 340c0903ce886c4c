//! Consumer choosing a bundle under a budget:
//!
//! ```text
//!     max_x  1/2 x' Q_u x + r' x   s.t.  p_t' x <= b,  x >= 0
//! ```
//!
//! with `Q_u` negative definite and prices `p_t` drawn each round. Converted to the minimization
//! `1/2 x' (-Q_u) x - r' x`. Either the utility vector `r` or the budget `b` is learned.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::{streams, NoiseModel};
use crate::error::Result;
use crate::model::{Observation, ParamQp, ParameterBox};
use crate::qp;

#[derive(Debug, Clone, PartialEq)]
pub struct ConsumerScenario {
    pub n: usize,
    pub budget: f64,
    /// Utility curvature `Q_u` (negative definite).
    pub q_utility: DMatrix<f64>,
    pub r_true: DVector<f64>,
    pub price_lo: f64,
    pub price_hi: f64,
    pub noise: NoiseModel,
    /// Hypothesis box for `r`.
    pub r_box: ParameterBox,
    /// Hypothesis box for `b`.
    pub budget_box: ParameterBox,
}

impl ConsumerScenario {
    /// `Q_u = -M'M - 0.1 I` with `M_ij ~ U(0, 1)` and `r_i ~ U(0, 5)`.
    pub fn generate(seed: u64) -> Self {
        let n = 10;
        let mut rng = streams::rng(seed, streams::SCENARIO);
        let m = DMatrix::from_fn(n, n, |_, _| rng.gen_range(0.0..1.0));
        let q_utility = -(m.transpose() * &m) - DMatrix::identity(n, n) * 0.1;
        let r_true = DVector::from_fn(n, |_, _| rng.gen_range(0.0..5.0));
        Self {
            n,
            budget: 40.0,
            q_utility,
            r_true,
            price_lo: 5.0,
            price_hi: 25.0,
            noise: NoiseModel::default(),
            r_box: ParameterBox::uniform(n, 0.0, 5.0).expect("valid box"),
            budget_box: ParameterBox::uniform(1, 0.0, 100.0).expect("valid box"),
        }
    }

    /// Rows `x >= 0` followed by the budget row `-p'x >= -b`; the prices are the signal.
    fn constraints(&self) -> (DMatrix<f64>, Vec<DMatrix<f64>>) {
        let n = self.n;
        let mut a0 = DMatrix::zeros(n + 1, n);
        for i in 0..n {
            a0[(i, i)] = 1.0;
        }
        let a_u = (0..n)
            .map(|k| {
                let mut ak = DMatrix::zeros(n + 1, n);
                ak[(n, k)] = -1.0;
                ak
            })
            .collect();
        (a0, a_u)
    }

    /// Forward model with `theta = r` and the budget fixed.
    pub fn utility_problem(&self) -> ParamQp {
        let n = self.n;
        let (a0, a_u) = self.constraints();
        let mut b0 = DVector::zeros(n + 1);
        b0[n] = -self.budget;
        ParamQp::builder(n, n, n)
            .quadratic(-&self.q_utility)
            .cost_theta(-DMatrix::identity(n, n))
            .inequalities(a0, b0)
            .ineq_matrix_signal(a_u)
            .build()
            .expect("consumer model is consistent")
    }

    /// Forward model with `theta = b` and the utility fixed.
    pub fn budget_problem(&self) -> ParamQp {
        let n = self.n;
        let (a0, a_u) = self.constraints();
        let mut b_theta = DMatrix::zeros(n + 1, 1);
        b_theta[(n, 0)] = -1.0;
        ParamQp::builder(n, 1, n)
            .quadratic(-&self.q_utility)
            .cost_offset(-&self.r_true)
            .inequalities(a0, DVector::zeros(n + 1))
            .ineq_theta(b_theta)
            .ineq_matrix_signal(a_u)
            .build()
            .expect("consumer model is consistent")
    }

    pub fn budget_true(&self) -> DVector<f64> {
        DVector::from_element(1, self.budget)
    }

    /// Optimal bundle at prices `prices` under the true utility and budget.
    pub fn forward(&self, prices: &DVector<f64>) -> Result<DVector<f64>> {
        let forward = self.utility_problem().instantiate(&self.r_true, prices)?;
        Ok(qp::solve(&forward)?.x)
    }

    pub fn draw_prices<R: Rng>(&self, rng: &mut R) -> DVector<f64> {
        DVector::from_fn(self.n, |_, _| rng.gen_range(self.price_lo..self.price_hi))
    }

    /// `rounds` observations `(p_t, x_t + eps_t)`, a pure function of `(self, rounds, seed)`.
    pub fn stream(&self, rounds: usize, seed: u64) -> Result<Vec<Observation>> {
        self.stream_on(rounds, seed, streams::OBSERVATIONS)
    }

    /// Independent history for warm starts.
    pub fn history(&self, rounds: usize, seed: u64) -> Result<Vec<Observation>> {
        self.stream_on(rounds, seed, streams::HISTORY)
    }

    fn stream_on(&self, rounds: usize, seed: u64, stream: u64) -> Result<Vec<Observation>> {
        let mut rng = streams::rng(seed, stream);
        (0..rounds)
            .map(|_| {
                let prices = self.draw_prices(&mut rng);
                let x = self.forward(&prices)?;
                let y = x + self.noise.sample(&mut rng, self.n);
                Observation::new(prices, y)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generator_invariants() {
        let s = ConsumerScenario::generate(1);
        assert!(crate::linalg::min_eigenvalue(&-&s.q_utility) >= 0.1 - 1e-9);
        assert!(s.r_box.contains(&s.r_true, 0.0));
        assert!(s.utility_problem().is_strongly_convex());
    }

    #[test]
    fn streams_are_deterministic() {
        let s = ConsumerScenario::generate(3);
        assert_eq!(s.stream(2, 9).unwrap(), s.stream(2, 9).unwrap());
        assert_ne!(s.stream(2, 9).unwrap(), s.history(2, 9).unwrap());
    }

    #[test]
    fn decisions_respect_constraints() {
        let s = ConsumerScenario::generate(4);
        let mut rng = streams::rng(4, streams::OBSERVATIONS);
        for _ in 0..50 {
            let p = s.draw_prices(&mut rng);
            let x = s.forward(&p).unwrap();
            assert!(x.iter().all(|&v| v >= -1e-8));
            assert!(p.dot(&x) <= s.budget + 1e-8);
        }
    }

    #[test]
    fn cheapest_prices_cap_total_quantity() {
        // At p = 5 everywhere the budget row reads 5 * sum(x) <= 40.
        let s = ConsumerScenario::generate(2);
        let forward = s
            .utility_problem()
            .instantiate(&s.r_true, &DVector::from_element(10, 5.0))
            .unwrap();
        assert_eq!(forward.b_ineq[10], -40.0);
        assert!(forward.a_ineq.row(10).iter().all(|&v| v == -5.0));
        let x = s.forward(&DVector::from_element(10, 5.0)).unwrap();
        assert!(x.sum() <= 8.0 + 1e-8);
    }

    #[test]
    fn budget_and_utility_models_agree_at_truth() {
        let s = ConsumerScenario::generate(5);
        let mut rng = streams::rng(5, streams::OBSERVATIONS);
        let p = s.draw_prices(&mut rng);
        let a = qp::solve(&s.utility_problem().instantiate(&s.r_true, &p).unwrap()).unwrap();
        let b = qp::solve(
            &s.budget_problem()
                .instantiate(&s.budget_true(), &p)
                .unwrap(),
        )
        .unwrap();
        assert!((&a.x - &b.x).amax() < 1e-10);
    }
}
