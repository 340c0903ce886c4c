//! Transshipment network with quadratic production costs:
//!
//! ```text
//!     min  sum_v 1/2 lambda_v y_v^2 + sum_e c_e x_e
//!     s.t. out(v) - in(v) = y_v    (producers)
//!          out(v) - in(v) = d_v    (consumers, d_v <= 0)
//!          0 <= x_e <= u_e,  0 <= y_v <= w_v
//! ```
//!
//! Nodes 1 and 2 produce, nodes 3, 4 and 5 consume. The decision is the six edge flows followed
//! by the two production levels, the signal is the consumer demand vector, and the costs of
//! edges (2,3) and (2,5) are learned.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::{streams, NoiseModel};
use crate::error::Result;
use crate::model::{Observation, ParamQp, ParameterBox};
use crate::qp;

/// Directed edges `(from, to)` with 1-based node labels.
pub const EDGES: [(usize, usize); 6] = [(1, 3), (1, 4), (2, 3), (2, 5), (3, 4), (4, 5)];
pub const PRODUCERS: [usize; 2] = [1, 2];
pub const CONSUMERS: [usize; 3] = [3, 4, 5];
/// Indices into [`EDGES`] of the edges whose costs are learned.
pub const LEARNED: [usize; 2] = [2, 3];

#[derive(Debug, Clone, PartialEq)]
pub struct TransshipmentScenario {
    /// Production cost curvature per producer.
    pub lambda: DVector<f64>,
    pub edge_capacity: DVector<f64>,
    pub production_capacity: DVector<f64>,
    /// True cost of every edge.
    pub cost: DVector<f64>,
    pub demand_lo: f64,
    pub demand_hi: f64,
    pub noise: NoiseModel,
    /// Hypothesis box for the learned costs.
    pub cost_box: ParameterBox,
}

impl TransshipmentScenario {
    /// Seeded draw: `lambda_v ~ U(1, 3)`, `u_e ~ U(1, 3)`, `w_v ~ U(2, 4)`, `c_e ~ U(1, 10)`.
    /// Draws that cannot meet every corner of the demand box are rejected and redrawn.
    pub fn generate(seed: u64) -> Self {
        let mut rng = streams::rng(seed, streams::SCENARIO);
        loop {
            let scenario = Self {
                lambda: DVector::from_fn(2, |_, _| rng.gen_range(1.0..3.0)),
                edge_capacity: DVector::from_fn(6, |_, _| rng.gen_range(1.0..3.0)),
                production_capacity: DVector::from_fn(2, |_, _| rng.gen_range(2.0..4.0)),
                cost: DVector::from_fn(6, |_, _| rng.gen_range(1.0..10.0)),
                demand_lo: -1.25,
                demand_hi: 0.0,
                noise: NoiseModel::default(),
                cost_box: ParameterBox::uniform(2, 1.0, 10.0).expect("valid box"),
            };
            if scenario.covers_demand_box() {
                return scenario;
            }
        }
    }

    fn covers_demand_box(&self) -> bool {
        (0..8u32).all(|mask| {
            let d = DVector::from_fn(3, |i, _| {
                if mask & (1 << i) != 0 {
                    self.demand_lo
                } else {
                    self.demand_hi
                }
            });
            self.forward(&d).is_ok()
        })
    }

    pub fn theta_true(&self) -> DVector<f64> {
        DVector::from_iterator(LEARNED.len(), LEARNED.iter().map(|&e| self.cost[e]))
    }

    pub fn problem(&self) -> ParamQp {
        let (ne, np) = (EDGES.len(), PRODUCERS.len());
        let n = ne + np;
        let mut q = DMatrix::zeros(n, n);
        for v in 0..np {
            q[(ne + v, ne + v)] = self.lambda[v];
        }
        let mut c0 = DVector::zeros(n);
        let mut c_theta = DMatrix::zeros(n, LEARNED.len());
        for e in 0..ne {
            match LEARNED.iter().position(|&l| l == e) {
                Some(k) => c_theta[(e, k)] = 1.0,
                None => c0[e] = self.cost[e],
            }
        }

        let mut a = DMatrix::zeros(2 * n, n);
        let mut b0 = DVector::zeros(2 * n);
        let caps = self
            .edge_capacity
            .iter()
            .chain(self.production_capacity.iter());
        for (j, &cap) in caps.enumerate() {
            a[(2 * j, j)] = 1.0;
            a[(2 * j + 1, j)] = -1.0;
            b0[2 * j + 1] = -cap;
        }

        let nodes = np + CONSUMERS.len();
        let mut a_eq = DMatrix::zeros(nodes, n);
        let mut e_u = DMatrix::zeros(nodes, CONSUMERS.len());
        for (e, &(from, to)) in EDGES.iter().enumerate() {
            a_eq[(from - 1, e)] += 1.0;
            a_eq[(to - 1, e)] -= 1.0;
        }
        for (v, &node) in PRODUCERS.iter().enumerate() {
            a_eq[(node - 1, ne + v)] = -1.0;
        }
        for (k, &node) in CONSUMERS.iter().enumerate() {
            e_u[(node - 1, k)] = 1.0;
        }

        ParamQp::builder(n, LEARNED.len(), CONSUMERS.len())
            .quadratic(q)
            .cost_offset(c0)
            .cost_theta(c_theta)
            .inequalities(a, b0)
            .equalities(a_eq, DVector::zeros(nodes))
            .eq_signal(e_u)
            .build()
            .expect("transshipment model is consistent")
    }

    /// Flows and production levels chosen by the active-set solver at the true costs.
    pub fn forward(&self, demand: &DVector<f64>) -> Result<DVector<f64>> {
        let forward = self.problem().instantiate(&self.theta_true(), demand)?;
        Ok(qp::solve(&forward)?.x)
    }

    pub fn draw_demand<R: Rng>(&self, rng: &mut R) -> DVector<f64> {
        DVector::from_fn(CONSUMERS.len(), |_, _| {
            rng.gen_range(self.demand_lo..self.demand_hi)
        })
    }

    pub fn stream(&self, rounds: usize, seed: u64) -> Result<Vec<Observation>> {
        self.stream_on(rounds, seed, streams::OBSERVATIONS)
    }

    pub fn history(&self, rounds: usize, seed: u64) -> Result<Vec<Observation>> {
        self.stream_on(rounds, seed, streams::HISTORY)
    }

    fn stream_on(&self, rounds: usize, seed: u64, stream: u64) -> Result<Vec<Observation>> {
        let mut rng = streams::rng(seed, stream);
        let problem = self.problem();
        let theta = self.theta_true();
        (0..rounds)
            .map(|_| {
                let demand = self.draw_demand(&mut rng);
                let x = qp::solve(&problem.instantiate(&theta, &demand)?)?.x;
                let y = x + self.noise.sample(&mut rng, problem.n());
                Observation::new(demand, y)
            })
            .collect()
    }
}
