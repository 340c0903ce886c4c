//! TOML files: forward-problem descriptions and experiment overrides.
//!
//! A problem file lists dimensions and matrix blocks as flat row-major arrays; omitted
//! blocks are zero. Row counts of the constraint blocks follow from the array lengths.
//!
//! ```toml
//! n = 2
//! p = 1
//! sense = "minimize"         # or "maximize": the objective is negated on load
//! q = [1.0, 0.0, 0.0, 1.0]
//! c_theta = [-1.0, 0.0]
//! a_ineq = [1.0, 0.0, 0.0, 1.0]
//! b_ineq = [0.0, 0.0]
//! theta = [2.0]              # parameter for solve-qp
//!
//! [box]
//! lo = [0.0]
//! hi = [5.0]
//!
//! [[observations]]
//! u = []
//! y = [1.0, 0.0]
//! ```

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::experiments::runner::{ExperimentConfig, StartKind};
use crate::model::{Observation, ParamQp, ParameterBox};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sense {
    #[default]
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct BoxSpec {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct ObservationSpec {
    #[serde(default)]
    pub u: Vec<f64>,
    pub y: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub n: usize,
    #[serde(default)]
    pub p: usize,
    #[serde(default)]
    pub m: usize,
    #[serde(default)]
    pub sense: Sense,
    pub q: Option<Vec<f64>>,
    pub c0: Option<Vec<f64>>,
    pub c_theta: Option<Vec<f64>>,
    pub c_u: Option<Vec<f64>>,
    pub a_ineq: Option<Vec<f64>>,
    /// One flat `q x n` block per signal coordinate.
    pub a_ineq_u: Option<Vec<Vec<f64>>>,
    pub b_ineq: Option<Vec<f64>>,
    pub b_theta: Option<Vec<f64>>,
    pub b_u: Option<Vec<f64>>,
    pub a_eq: Option<Vec<f64>>,
    pub b_eq: Option<Vec<f64>>,
    pub e_theta: Option<Vec<f64>>,
    pub e_u: Option<Vec<f64>>,
    #[serde(rename = "box")]
    pub bx: Option<BoxSpec>,
    pub theta: Option<Vec<f64>>,
    pub u: Option<Vec<f64>>,
    #[serde(default)]
    pub signals: Vec<Vec<f64>>,
    #[serde(default)]
    pub observations: Vec<ObservationSpec>,
}

/// Row-major `rows x cols` matrix from a flat array.
fn matrix(name: &str, data: &[f64], rows: usize, cols: usize) -> Result<DMatrix<f64>> {
    if data.len() != rows * cols {
        return Err(Error::Dimension(format!(
            "{name} has {} entries, expected {rows} x {cols} = {}",
            data.len(),
            rows * cols
        )));
    }
    Ok(DMatrix::from_row_slice(rows, cols, data))
}

/// Number of rows of a constraint block with `cols` columns.
fn row_count(name: &str, data: &[f64], cols: usize) -> Result<usize> {
    if cols == 0 || !data.len().is_multiple_of(cols) {
        return Err(Error::Dimension(format!(
            "{name} has {} entries, not a multiple of n = {cols}",
            data.len()
        )));
    }
    Ok(data.len() / cols)
}

impl ProblemFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Forward problem in minimization form.
    pub fn problem(&self) -> Result<ParamQp> {
        let (n, p, m) = (self.n, self.p, self.m);
        let flip = if self.sense == Sense::Maximize {
            -1.0
        } else {
            1.0
        };
        let mut b = ParamQp::builder(n, p, m);
        if let Some(q) = &self.q {
            b = b.quadratic(matrix("q", q, n, n)? * flip);
        }
        if let Some(c) = &self.c0 {
            b = b.cost_offset(matrix("c0", c, n, 1)?.column(0) * flip);
        }
        if let Some(c) = &self.c_theta {
            b = b.cost_theta(matrix("c_theta", c, n, p)? * flip);
        }
        if let Some(c) = &self.c_u {
            b = b.cost_signal(matrix("c_u", c, n, m)? * flip);
        }
        if let Some(a) = &self.a_ineq {
            let rows = row_count("a_ineq", a, n)?;
            let rhs = match &self.b_ineq {
                Some(v) => matrix("b_ineq", v, rows, 1)?.column(0).into_owned(),
                None => DVector::zeros(rows),
            };
            b = b.inequalities(matrix("a_ineq", a, rows, n)?, rhs);
            if let Some(bt) = &self.b_theta {
                b = b.ineq_theta(matrix("b_theta", bt, rows, p)?);
            }
            if let Some(bu) = &self.b_u {
                b = b.ineq_signal(matrix("b_u", bu, rows, m)?);
            }
            if let Some(blocks) = &self.a_ineq_u {
                let mats = blocks
                    .iter()
                    .enumerate()
                    .map(|(k, blk)| matrix(&format!("a_ineq_u[{k}]"), blk, rows, n))
                    .collect::<Result<Vec<_>>>()?;
                b = b.ineq_matrix_signal(mats);
            }
        } else if self.b_ineq.is_some()
            || self.b_theta.is_some()
            || self.b_u.is_some()
            || self.a_ineq_u.is_some()
        {
            return Err(Error::Config(
                "inequality blocks given without a_ineq".into(),
            ));
        }
        if let Some(a) = &self.a_eq {
            let rows = row_count("a_eq", a, n)?;
            let rhs = match &self.b_eq {
                Some(v) => matrix("b_eq", v, rows, 1)?.column(0).into_owned(),
                None => DVector::zeros(rows),
            };
            b = b.equalities(matrix("a_eq", a, rows, n)?, rhs);
            if let Some(et) = &self.e_theta {
                b = b.eq_theta(matrix("e_theta", et, rows, p)?);
            }
            if let Some(eu) = &self.e_u {
                b = b.eq_signal(matrix("e_u", eu, rows, m)?);
            }
        } else if self.b_eq.is_some() || self.e_theta.is_some() || self.e_u.is_some() {
            return Err(Error::Config("equality blocks given without a_eq".into()));
        }
        b.build()
    }

    /// The parameter box; defaults to the single point `theta` when only that is given.
    pub fn parameter_box(&self) -> Result<ParameterBox> {
        match (&self.bx, &self.theta) {
            (Some(bx), _) => ParameterBox::new(
                DVector::from_vec(bx.lo.clone()),
                DVector::from_vec(bx.hi.clone()),
            ),
            (None, Some(theta)) => ParameterBox::point(&DVector::from_vec(theta.clone())),
            (None, None) if self.p == 0 => ParameterBox::uniform(0, 0.0, 0.0),
            (None, None) => Err(Error::Config(
                "a [box] or theta is required when p > 0".into(),
            )),
        }
    }

    /// `theta` for instantiation; zero-dimensional problems need none.
    pub fn theta(&self) -> Result<DVector<f64>> {
        match &self.theta {
            Some(t) => Ok(DVector::from_vec(t.clone())),
            None if self.p == 0 => Ok(DVector::zeros(0)),
            None => Err(Error::Config("theta is required when p > 0".into())),
        }
    }

    /// Signal for instantiation; defaults to zero.
    pub fn signal(&self) -> DVector<f64> {
        match &self.u {
            Some(u) => DVector::from_vec(u.clone()),
            None => DVector::zeros(self.m),
        }
    }

    /// Signals for validation: the listed ones, then those of the observations, then `u`.
    pub fn validation_signals(&self) -> Vec<DVector<f64>> {
        let mut out: Vec<DVector<f64>> = self
            .signals
            .iter()
            .map(|s| DVector::from_vec(s.clone()))
            .collect();
        out.extend(
            self.observations
                .iter()
                .map(|o| DVector::from_vec(o.u.clone())),
        );
        if out.is_empty() {
            out.push(self.signal());
        }
        out
    }

    pub fn observations(&self) -> Result<Vec<Observation>> {
        self.observations
            .iter()
            .map(|o| {
                Observation::new(
                    DVector::from_vec(o.u.clone()),
                    DVector::from_vec(o.y.clone()),
                )
            })
            .collect()
    }
}

/// Experiment overrides read by `--config`; command-line flags win over the file.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunFile {
    pub rounds: Option<usize>,
    pub reps: Option<usize>,
    pub seed: Option<u64>,
    pub eta0: Option<f64>,
    pub start: Option<String>,
    pub history_len: Option<usize>,
    pub node_limit: Option<usize>,
}

impl RunFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn apply(&self, cfg: &mut ExperimentConfig) -> Result<()> {
        if let Some(v) = self.rounds {
            cfg.rounds = v;
        }
        if let Some(v) = self.reps {
            cfg.reps = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.eta0 {
            cfg.eta0 = v;
        }
        if let Some(v) = &self.start {
            cfg.start = v.parse::<StartKind>()?;
        }
        if let Some(v) = self.history_len {
            cfg.history_len = v;
        }
        if let Some(v) = self.node_limit {
            cfg.update.node_limit = v;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::runner::Experiment;

    const BUDGET_1D: &str = r#"
        n = 1
        p = 1
        q = [1.0]
        c0 = [-4.0]
        a_ineq = [-1.0]
        b_theta = [-1.0]
        theta = [1.0]
        [box]
        lo = [0.0]
        hi = [100.0]
        [[observations]]
        y = [2.0]
    "#;

    #[test]
    fn budget_file_round_trip() {
        let f = ProblemFile::parse(BUDGET_1D).unwrap();
        let problem = f.problem().unwrap();
        assert_eq!((problem.n(), problem.p(), problem.n_ineq()), (1, 1, 1));
        let qp = problem
            .instantiate(&f.theta().unwrap(), &f.signal())
            .unwrap();
        let x = crate::qp::solve(&qp).unwrap().x;
        assert!((x[0] - 1.0).abs() < 1e-12);
        assert_eq!(f.parameter_box().unwrap().hi()[0], 100.0);
        assert_eq!(f.observations().unwrap().len(), 1);
    }

    #[test]
    fn maximize_negates_objective() {
        let text = "n = 1\nsense = \"maximize\"\nq = [-2.0]\nc0 = [4.0]\n";
        let problem = ProblemFile::parse(text).unwrap().problem().unwrap();
        assert_eq!(problem.q()[(0, 0)], 2.0);
        assert_eq!(problem.c0()[0], -4.0);
    }

    #[test]
    fn bad_shapes_are_reported() {
        assert!(matches!(
            ProblemFile::parse("n = 2\nq = [1.0, 0.0, 1.0]\n")
                .unwrap()
                .problem(),
            Err(Error::Dimension(_))
        ));
        assert!(ProblemFile::parse("n = 2\nbogus = 1\n").is_err());
        assert!(ProblemFile::parse("n = 1\nb_ineq = [1.0]\n")
            .unwrap()
            .problem()
            .is_err());
    }

    #[test]
    fn run_file_overrides() {
        let mut cfg = ExperimentConfig::new(Experiment::Budget);
        RunFile::parse("rounds = 50\nstart = \"warm\"\nnode_limit = 10\n")
            .unwrap()
            .apply(&mut cfg)
            .unwrap();
        assert_eq!(
            (cfg.rounds, cfg.start, cfg.update.node_limit),
            (50, StartKind::Warm, 10)
        );
        assert_eq!(cfg.eta0, 100.0);
        assert!(RunFile::parse("start = \"hot\"")
            .unwrap()
            .apply(&mut cfg)
            .is_err());
    }
}
