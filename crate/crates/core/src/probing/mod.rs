//! Linear probing classifiers: multinomial logistic regression trained with
//! minibatch Adam, evaluated by argmax accuracy with a normal-approximation
//! confidence interval.

mod adam;
mod eval;
mod probe;
mod sweep;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use adam::Adam;
pub use eval::{ci95_halfwidth, evaluate_probe, EvalReport};
pub use probe::{train_probe, Gradient, LinearProbe, TrainOutcome};
pub use sweep::{layer_seeds, layer_sweep, LayerProbeResult};

#[derive(Debug, Error)]
pub enum ProbeError {
    #[error("empty {0} set")]
    EmptySet(&'static str),
    #[error("dimension mismatch: probe expects {expected}, data has {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("class count mismatch: probe has {expected}, data declares {actual}")]
    ClassMismatch { expected: usize, actual: usize },
    #[error("a probe needs at least two classes, got {0}")]
    TooFewClasses(usize),
    #[error(
        "loss became {loss} at epoch {epoch}, batch {batch} \
         (learning_rate {learning_rate}, batch_size {batch_size}); lower the learning rate"
    )]
    Diverged {
        loss: f64,
        epoch: usize,
        batch: usize,
        learning_rate: f64,
        batch_size: usize,
    },
    #[error("invalid probe config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    pub seed: u64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            epochs: 5,
            batch_size: 256,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            seed: 0,
        }
    }
}

impl ProbeConfig {
    pub fn validate(&self) -> Result<(), ProbeError> {
        let fail = |m: &str| Err(ProbeError::Config(m.to_string()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return fail("learning_rate must be positive");
        }
        if self.epochs == 0 {
            return fail("epochs must be at least 1");
        }
        if self.batch_size == 0 {
            return fail("batch_size must be positive");
        }
        let open_unit = |b: f64| b > 0.0 && b < 1.0;
        if !open_unit(self.adam_beta1) || !open_unit(self.adam_beta2) {
            return fail("Adam betas must lie in (0, 1)");
        }
        if !(self.adam_epsilon > 0.0) {
            return fail("adam_epsilon must be positive");
        }
        Ok(())
    }
}
