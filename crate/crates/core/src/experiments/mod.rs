//! Consumer-behavior and transshipment experiments: generators, batch baseline, metrics and a
//! repetition runner.

pub mod baseline;
pub mod consumer;
pub mod metrics;
pub mod runner;
pub mod transshipment;

use nalgebra::DVector;
use rand::Rng;

pub use consumer::ConsumerScenario;
pub use runner::{Experiment, ExperimentConfig, RepResult, StartKind};
pub use transshipment::TransshipmentScenario;

/// Independent uniform noise on each decision coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    pub half_width: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self { half_width: 0.25 }
    }
}

impl NoiseModel {
    pub fn variance_per_coordinate(&self) -> f64 {
        self.half_width * self.half_width / 3.0
    }

    /// `E[eps' eps]` for a `dim`-dimensional decision.
    pub fn expected_sq_norm(&self, dim: usize) -> f64 {
        dim as f64 * self.variance_per_coordinate()
    }

    pub fn sample<R: Rng>(&self, rng: &mut R, dim: usize) -> DVector<f64> {
        let a = self.half_width;
        if a == 0.0 {
            return DVector::zeros(dim);
        }
        DVector::from_fn(dim, |_, _| rng.gen_range(-a..a))
    }
}

/// Independent random streams derived from one seed.
pub(crate) mod streams {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    pub const SCENARIO: u64 = 0;
    pub const OBSERVATIONS: u64 = 1;
    pub const HISTORY: u64 = 2;

    pub fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        rng
    }
}
