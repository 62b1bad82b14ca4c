use serde::{Deserialize, Serialize};

use super::{Adam, ProbeConfig, ProbeError};
use crate::aggregation::SampleSet;
use crate::seed;

/// Multinomial logistic regression: `softmax(W x + b)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearProbe {
    class_count: usize,
    input_dim: usize,
    /// Row-major `class_count × input_dim`.
    weights: Vec<f64>,
    bias: Vec<f64>,
}

/// Gradient of the mean cross-entropy with the same layout as the probe.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub probe: LinearProbe,
    /// Mean training loss before training, then after each epoch.
    pub epoch_losses: Vec<f64>,
    /// Training-set accuracy of the final state.
    pub train_accuracy: f64,
}

impl LinearProbe {
    pub fn zeros(class_count: usize, input_dim: usize) -> Result<Self, ProbeError> {
        if class_count < 2 {
            return Err(ProbeError::TooFewClasses(class_count));
        }
        Ok(Self {
            class_count,
            input_dim,
            weights: vec![0.0; class_count * input_dim],
            bias: vec![0.0; class_count],
        })
    }

    pub fn from_parts(
        class_count: usize,
        input_dim: usize,
        weights: Vec<f64>,
        bias: Vec<f64>,
    ) -> Result<Self, ProbeError> {
        if class_count < 2 {
            return Err(ProbeError::TooFewClasses(class_count));
        }
        if weights.len() != class_count * input_dim || bias.len() != class_count {
            return Err(ProbeError::Config(format!(
                "parameter shapes do not match {class_count} classes x {input_dim} inputs"
            )));
        }
        if weights.iter().chain(&bias).any(|v| !v.is_finite()) {
            return Err(ProbeError::Config("non-finite parameters".into()));
        }
        Ok(Self {
            class_count,
            input_dim,
            weights,
            bias,
        })
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn bias_mut(&mut self) -> &mut [f64] {
        &mut self.bias
    }

    pub fn logits_into(&self, x: &[f64], out: &mut [f64]) {
        for (c, o) in out.iter_mut().enumerate() {
            let w = &self.weights[c * self.input_dim..(c + 1) * self.input_dim];
            *o = self.bias[c] + w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        }
    }

    /// Argmax class; ties go to the lowest class id.
    pub fn predict(&self, x: &[f64]) -> usize {
        let mut logits = vec![0.0; self.class_count];
        self.logits_into(x, &mut logits);
        argmax(&logits)
    }

    fn check_data(&self, data: &SampleSet) -> Result<(), ProbeError> {
        if data.dim() != self.input_dim {
            return Err(ProbeError::DimensionMismatch {
                expected: self.input_dim,
                actual: data.dim(),
            });
        }
        if data.class_count() != self.class_count {
            return Err(ProbeError::ClassMismatch {
                expected: self.class_count,
                actual: data.class_count(),
            });
        }
        Ok(())
    }

    /// Mean cross-entropy over `indices`.
    pub fn loss(&self, data: &SampleSet, indices: &[usize]) -> f64 {
        let mut logits = vec![0.0; self.class_count];
        let total: f64 = indices
            .iter()
            .map(|&i| {
                self.logits_into(data.row(i), &mut logits);
                log_sum_exp(&logits) - logits[data.label(i)]
            })
            .sum();
        total / indices.len() as f64
    }

    /// Mean cross-entropy over `indices` and its gradient.
    pub fn loss_and_gradient(&self, data: &SampleSet, indices: &[usize]) -> (f64, Gradient) {
        let mut grad = Gradient {
            weights: vec![0.0; self.weights.len()],
            bias: vec![0.0; self.class_count],
        };
        let loss = self.accumulate(data, indices, &mut grad);
        (loss, grad)
    }

    fn accumulate(&self, data: &SampleSet, indices: &[usize], grad: &mut Gradient) -> f64 {
        grad.weights.iter_mut().for_each(|g| *g = 0.0);
        grad.bias.iter_mut().for_each(|g| *g = 0.0);
        let d = self.input_dim;
        let mut logits = vec![0.0; self.class_count];
        let mut loss = 0.0;
        for &i in indices {
            let x = data.row(i);
            let y = data.label(i);
            self.logits_into(x, &mut logits);
            let lse = log_sum_exp(&logits);
            loss += lse - logits[y];
            for c in 0..self.class_count {
                let residual = (logits[c] - lse).exp() - if c == y { 1.0 } else { 0.0 };
                grad.bias[c] += residual;
                let row = &mut grad.weights[c * d..(c + 1) * d];
                for (g, &xv) in row.iter_mut().zip(x) {
                    *g += residual * xv;
                }
            }
        }
        let scale = 1.0 / indices.len() as f64;
        grad.weights.iter_mut().for_each(|g| *g *= scale);
        grad.bias.iter_mut().for_each(|g| *g *= scale);
        loss * scale
    }

    pub fn accuracy(&self, data: &SampleSet) -> f64 {
        let correct = (0..data.len())
            .filter(|&i| self.predict(data.row(i)) == data.label(i))
            .count();
        correct as f64 / data.len() as f64
    }
}

pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Trains a zero-initialized probe with minibatch Adam. Samples are
/// reshuffled every epoch from a stream seeded by `config.seed`; the state
/// after the last epoch is returned.
pub fn train_probe(
    train: &SampleSet,
    class_count: usize,
    config: &ProbeConfig,
) -> Result<TrainOutcome, ProbeError> {
    config.validate()?;
    if train.is_empty() {
        return Err(ProbeError::EmptySet("training"));
    }
    let mut probe = LinearProbe::zeros(class_count, train.dim())?;
    probe.check_data(train)?;

    let n_weights = probe.weights.len();
    let mut params: Vec<f64> = probe.weights.iter().chain(&probe.bias).copied().collect();
    let mut adam = Adam::new(
        params.len(),
        config.learning_rate,
        config.adam_beta1,
        config.adam_beta2,
        config.adam_epsilon,
    );
    let mut grad = Gradient {
        weights: vec![0.0; n_weights],
        bias: vec![0.0; class_count],
    };
    let mut flat_grad = vec![0.0; params.len()];

    let all: Vec<usize> = (0..train.len()).collect();
    let mut epoch_losses = vec![probe.loss(train, &all)];
    let mut order = all.clone();
    let mut rng = seed::rng(config.seed);

    for epoch in 0..config.epochs {
        seed::shuffle(&mut rng, &mut order);
        for (batch, chunk) in order.chunks(config.batch_size).enumerate() {
            let loss = probe.accumulate(train, chunk, &mut grad);
            if !loss.is_finite() {
                return Err(ProbeError::Diverged {
                    loss,
                    epoch,
                    batch,
                    learning_rate: config.learning_rate,
                    batch_size: config.batch_size,
                });
            }
            flat_grad[..n_weights].copy_from_slice(&grad.weights);
            flat_grad[n_weights..].copy_from_slice(&grad.bias);
            adam.update(&mut params, &flat_grad);
            probe.weights.copy_from_slice(&params[..n_weights]);
            probe.bias.copy_from_slice(&params[n_weights..]);
        }
        let loss = probe.loss(train, &all);
        if !loss.is_finite() {
            return Err(ProbeError::Diverged {
                loss,
                epoch,
                batch: order.len().div_ceil(config.batch_size),
                learning_rate: config.learning_rate,
                batch_size: config.batch_size,
            });
        }
        epoch_losses.push(loss);
    }
    let train_accuracy = probe.accuracy(train);
    Ok(TrainOutcome {
        probe,
        epoch_losses,
        train_accuracy,
    })
}
