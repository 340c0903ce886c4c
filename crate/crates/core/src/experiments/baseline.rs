//! Approximate best fixed hypothesis in hindsight, `min_theta sum_t l(y_t, u_t, theta)`.
//!
//! The search is heuristic: the result is an upper bound on the batch optimum, so regret
//! measured against it can dip below zero by the search's slack.

use nalgebra::DVector;
use rand::Rng;

use super::streams;
use crate::error::{Error, Result};
use crate::loss;
use crate::model::{Observation, ParamQp, ParameterBox};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BaselineSearch {
    /// Grid over the box, then repeated zooms on the best cell until it is below `resolution`.
    Grid { points: usize, resolution: f64 },
    /// Compass search from seeded starts, halving the step down to `min_step`.
    CoordinateDescent {
        starts: usize,
        min_step: f64,
        seed: u64,
    },
}

impl BaselineSearch {
    /// Grid for `p <= 3`, otherwise 20-start coordinate descent.
    pub fn default_for(p: usize) -> Self {
        if p <= 3 {
            BaselineSearch::Grid {
                points: 21,
                resolution: 1e-3,
            }
        } else {
            BaselineSearch::CoordinateDescent {
                starts: 20,
                min_step: 1e-4,
                seed: 0,
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineResult {
    pub theta: DVector<f64>,
    pub total_loss: f64,
    pub evaluations: usize,
}

/// `sum_t l(y_t, u_t, theta)`; infeasible forward problems count as `+inf`.
pub fn total_loss(
    problem: &ParamQp,
    theta: &DVector<f64>,
    observations: &[Observation],
) -> Result<f64> {
    let mut total = 0.0;
    for obs in observations {
        match loss::eval_loss(problem, theta, obs) {
            Ok(l) => total += l.value,
            Err(Error::InfeasibleForward) => return Ok(f64::INFINITY),
            Err(e) => return Err(e),
        }
    }
    Ok(total)
}

pub fn batch_baseline(
    problem: &ParamQp,
    bx: &ParameterBox,
    observations: &[Observation],
    search: BaselineSearch,
) -> Result<BaselineResult> {
    if observations.is_empty() {
        return Err(Error::Config(
            "baseline needs at least one observation".into(),
        ));
    }
    match search {
        BaselineSearch::Grid { points, resolution } => {
            grid(problem, bx, observations, points, resolution)
        }
        BaselineSearch::CoordinateDescent {
            starts,
            min_step,
            seed,
        } => coordinate_descent(problem, bx, observations, starts, min_step, seed),
    }
}

fn grid(
    problem: &ParamQp,
    bx: &ParameterBox,
    observations: &[Observation],
    points: usize,
    resolution: f64,
) -> Result<BaselineResult> {
    let p = bx.dim();
    if p > 3 {
        return Err(Error::Config(format!(
            "grid baseline supports p <= 3, got {p}"
        )));
    }
    if points < 2 || !(resolution > 0.0) {
        return Err(Error::Config(
            "grid needs at least 2 points per axis and a positive resolution".into(),
        ));
    }
    let mut lo = bx.lo().clone();
    let mut hi = bx.hi().clone();
    let mut best: Option<(DVector<f64>, f64)> = None;
    let mut evaluations = 0;
    loop {
        let cell = DVector::from_fn(p, |j, _| (hi[j] - lo[j]) / (points - 1) as f64);
        let total = points.pow(p as u32);
        for idx in 0..total {
            let mut rest = idx;
            let theta = DVector::from_fn(p, |j, _| {
                let k = rest % points;
                rest /= points;
                lo[j] + cell[j] * k as f64
            });
            let value = total_loss(problem, &theta, observations)?;
            evaluations += 1;
            if best.as_ref().is_none_or(|(_, v)| value < *v) {
                best = Some((theta, value));
            }
        }
        if cell.amax() <= resolution {
            break;
        }
        let centre = &best.as_ref().expect("grid is nonempty").0;
        lo = bx.project(&(centre - &cell * 2.0));
        hi = bx.project(&(centre + &cell * 2.0));
    }
    let (theta, total_loss) = best.expect("grid is nonempty");
    Ok(BaselineResult {
        theta,
        total_loss,
        evaluations,
    })
}

fn coordinate_descent(
    problem: &ParamQp,
    bx: &ParameterBox,
    observations: &[Observation],
    starts: usize,
    min_step: f64,
    seed: u64,
) -> Result<BaselineResult> {
    let p = bx.dim();
    let mut rng = streams::rng(seed, streams::SCENARIO);
    let mut best: Option<(DVector<f64>, f64)> = None;
    let mut evaluations = 0;
    for s in 0..starts.max(1) {
        let mut theta = if s == 0 {
            bx.center()
        } else {
            DVector::from_fn(p, |j, _| {
                let (l, h) = (bx.lo()[j], bx.hi()[j]);
                if l < h {
                    rng.gen_range(l..h)
                } else {
                    l
                }
            })
        };
        let mut value = total_loss(problem, &theta, observations)?;
        evaluations += 1;
        let mut step = 0.25 * (bx.hi() - bx.lo()).amax();
        while step >= min_step {
            let mut improved = false;
            for j in 0..p {
                for dir in [1.0, -1.0] {
                    let mut trial = theta.clone();
                    trial[j] += dir * step;
                    let trial = bx.project(&trial);
                    if trial == theta {
                        continue;
                    }
                    let v = total_loss(problem, &trial, observations)?;
                    evaluations += 1;
                    if v < value {
                        theta = trial;
                        value = v;
                        improved = true;
                        break;
                    }
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        if best.as_ref().is_none_or(|(_, v)| value < *v) {
            best = Some((theta, value));
        }
    }
    let (theta, total_loss) = best.expect("at least one start");
    Ok(BaselineResult {
        theta,
        total_loss,
        evaluations,
    })
}
