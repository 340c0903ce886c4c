//! Experiment setups and repetitions.
//!
//! The scenario (utility curvature, true parameters, network data) is drawn once from the base
//! seed; repetition `i` draws its observation stream, and its warm-start history, from seed
//! `seed + i`.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use nalgebra::DVector;

use super::metrics;
use super::{ConsumerScenario, NoiseModel, TransshipmentScenario};
use crate::error::{Error, Result};
use crate::learner::{self, LearnerConfig, RunTrace, StartMode};
use crate::model::{Observation, ParamQp, ParameterBox};
use crate::update::UpdateOptions;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Experiment {
    /// Learn the consumer's utility vector.
    Consumer,
    /// Learn the consumer's budget.
    Budget,
    /// Learn two edge costs of the transshipment network.
    Transshipment,
}

impl Experiment {
    pub const ALL: [Experiment; 3] = [
        Experiment::Consumer,
        Experiment::Budget,
        Experiment::Transshipment,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Consumer => "consumer",
            Experiment::Budget => "budget",
            Experiment::Transshipment => "transshipment",
        }
    }

    pub fn default_eta0(&self) -> f64 {
        match self {
            Experiment::Consumer => 5.0,
            Experiment::Budget => 100.0,
            Experiment::Transshipment => 2.0,
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StartKind {
    /// Start at the lower corner of the box.
    #[default]
    Cold,
    /// Start from the KKT-residual fit on an independent history.
    Warm,
}

impl FromStr for StartKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cold" => Ok(StartKind::Cold),
            "warm" => Ok(StartKind::Warm),
            other => Err(Error::Config(format!("unknown start mode '{other}'"))),
        }
    }
}

impl fmt::Display for StartKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StartKind::Cold => "cold",
            StartKind::Warm => "warm",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub rounds: usize,
    pub reps: usize,
    pub seed: u64,
    pub eta0: f64,
    pub start: StartKind,
    /// Length of the warm-start history.
    pub history_len: usize,
    pub update: UpdateOptions,
}

impl ExperimentConfig {
    pub fn new(experiment: Experiment) -> Self {
        Self {
            experiment,
            rounds: 1000,
            reps: 10,
            seed: 7,
            eta0: experiment.default_eta0(),
            start: StartKind::Cold,
            history_len: 1000,
            update: UpdateOptions::default(),
        }
    }

    pub fn check(&self) -> Result<()> {
        if self.rounds == 0 || self.reps == 0 {
            return Err(Error::Config("rounds and reps must be at least 1".into()));
        }
        if !(self.eta0 > 0.0 && self.eta0.is_finite()) {
            return Err(Error::Config(format!(
                "eta0 must be positive, got {}",
                self.eta0
            )));
        }
        if self.start == StartKind::Warm && self.history_len == 0 {
            return Err(Error::Config("warm start needs a nonempty history".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
enum Source {
    Consumer(ConsumerScenario),
    Transshipment(TransshipmentScenario),
}

/// Everything shared by the repetitions of one experiment.
#[derive(Debug, Clone)]
pub struct Setup {
    pub config: ExperimentConfig,
    pub problem: ParamQp,
    pub bx: ParameterBox,
    pub theta_true: DVector<f64>,
    pub noise: NoiseModel,
    source: Source,
}

impl Setup {
    pub fn new(config: &ExperimentConfig) -> Result<Self> {
        config.check()?;
        let seed = config.seed;
        let (problem, bx, theta_true, noise, source) = match config.experiment {
            Experiment::Consumer => {
                let s = ConsumerScenario::generate(seed);
                (
                    s.utility_problem(),
                    s.r_box.clone(),
                    s.r_true.clone(),
                    s.noise,
                    Source::Consumer(s),
                )
            }
            Experiment::Budget => {
                let s = ConsumerScenario::generate(seed);
                (
                    s.budget_problem(),
                    s.budget_box.clone(),
                    s.budget_true(),
                    s.noise,
                    Source::Consumer(s),
                )
            }
            Experiment::Transshipment => {
                let s = TransshipmentScenario::generate(seed);
                (
                    s.problem(),
                    s.cost_box.clone(),
                    s.theta_true(),
                    s.noise,
                    Source::Transshipment(s),
                )
            }
        };
        Ok(Self {
            config: config.clone(),
            problem,
            bx,
            theta_true,
            noise,
            source,
        })
    }

    /// `E[eps' eps]`, the limit of the average loss.
    pub fn noise_level(&self) -> f64 {
        self.noise.expected_sq_norm(self.problem.n())
    }

    pub fn rep_seed(&self, rep: usize) -> u64 {
        self.config.seed.wrapping_add(rep as u64)
    }

    pub fn observations(&self, rep: usize) -> Result<Vec<Observation>> {
        let (rounds, seed) = (self.config.rounds, self.rep_seed(rep));
        match &self.source {
            Source::Consumer(s) => s.stream(rounds, seed),
            Source::Transshipment(s) => s.stream(rounds, seed),
        }
    }

    pub fn history(&self, rep: usize) -> Result<Vec<Observation>> {
        let (len, seed) = (self.config.history_len, self.rep_seed(rep));
        match &self.source {
            Source::Consumer(s) => s.history(len, seed),
            Source::Transshipment(s) => s.history(len, seed),
        }
    }

    pub fn learner_config(&self, rep: usize) -> Result<LearnerConfig> {
        let mut cfg = LearnerConfig::cold(self.config.eta0, self.bx.lo().clone());
        cfg.update = self.config.update;
        if self.config.start == StartKind::Warm {
            cfg.start = StartMode::Warm(self.history(rep)?);
        }
        Ok(cfg)
    }

    /// Run repetition `rep` on its own stream.
    pub fn run_rep(&self, rep: usize) -> Result<RepResult> {
        let stream = self.observations(rep)?;
        let cfg = self.learner_config(rep)?;
        let trace = learner::run_with_truth(
            &self.problem,
            &self.bx,
            &stream,
            &cfg,
            Some(&self.theta_true),
        )?;
        Ok(RepResult {
            rep,
            seed: self.rep_seed(rep),
            trace,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepResult {
    pub rep: usize,
    pub seed: u64,
    pub trace: RunTrace,
}

/// Across-repetition view of an experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub mean_est_error: Vec<f64>,
    pub max_est_error: Vec<f64>,
    pub mean_loss: Vec<f64>,
    pub mean_cum_loss_avg: Vec<f64>,
    /// Mean over repetitions of the last-200-round average loss.
    pub final_window_loss: f64,
    pub noise_level: f64,
    pub total_wall_ms: f64,
    pub node_limit_rounds: usize,
    pub max_progress_gap: f64,
}

pub fn aggregate(setup: &Setup, results: &[RepResult]) -> Aggregate {
    let reports: Vec<_> = results.iter().map(|r| metrics::report(&r.trace)).collect();
    let est: Vec<Vec<f64>> = reports.iter().filter_map(|r| r.est_error.clone()).collect();
    let losses: Vec<Vec<f64>> = reports.iter().map(|r| r.losses.clone()).collect();
    let cum: Vec<Vec<f64>> = reports.iter().map(|r| r.cum_loss_avg.clone()).collect();
    Aggregate {
        mean_est_error: metrics::mean_curve(&est),
        max_est_error: metrics::max_curve(&est),
        mean_loss: metrics::mean_curve(&losses),
        mean_cum_loss_avg: metrics::mean_curve(&cum),
        final_window_loss: reports.iter().map(|r| r.final_window_loss).sum::<f64>()
            / reports.len() as f64,
        noise_level: setup.noise_level(),
        total_wall_ms: reports.iter().map(|r| r.total_wall_ms).sum(),
        node_limit_rounds: results
            .iter()
            .flat_map(|r| &r.trace.rounds)
            .filter(|r| {
                r.status == learner::RoundStatus::Updated(crate::update::UpdateStatus::NodeLimit)
            })
            .count(),
        max_progress_gap: results
            .iter()
            .map(|r| r.trace.max_progress_gap())
            .fold(f64::NEG_INFINITY, f64::max),
    }
}

impl Aggregate {
    /// One row per round: mean and max estimation error, mean loss and mean average loss.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "t",
            "mean_est_error",
            "max_est_error",
            "mean_loss",
            "mean_cum_loss_avg",
        ])?;
        for i in 0..self.mean_loss.len() {
            let field = |v: &[f64]| v.get(i).map_or(String::new(), |x| x.to_string());
            w.write_record([
                (i + 1).to_string(),
                field(&self.mean_est_error),
                field(&self.max_est_error),
                self.mean_loss[i].to_string(),
                field(&self.mean_cum_loss_avg),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn summary(&self, setup: &Setup) -> String {
        let cfg = &setup.config;
        let rel = (self.final_window_loss - self.noise_level) / self.noise_level;
        let mut s = String::new();
        s += &format!("experiment: {}\n", cfg.experiment);
        s += &format!(
            "rounds: {}\nreps: {}\nseed: {}\neta0: {}\nstart: {}\n",
            cfg.rounds, cfg.reps, cfg.seed, cfg.eta0, cfg.start
        );
        s += &format!("theta_true: {:?}\n", setup.theta_true.as_slice());
        s += &format!("noise E[eps'eps]: {:.4}\n", self.noise_level);
        s += &format!("final-window average loss (last 200 rounds, mean over reps): {:.4} ({:+.1}% vs noise)\n", self.final_window_loss, 100.0 * rel);
        if let (Some(first), Some(last)) = (self.mean_est_error.first(), self.mean_est_error.last())
        {
            s += &format!(
                "mean estimation error: round 1 {first:.4}, round {} {last:.4}\n",
                self.mean_est_error.len()
            );
        }
        s += &format!("rounds stopped at node limit: {}\n", self.node_limit_rounds);
        s += &format!(
            "total update wall time: {:.1} s\n",
            self.total_wall_ms / 1e3
        );
        s
    }
}
