use serde::Serialize;

use super::probe::argmax;
use super::{LinearProbe, ProbeError};
use crate::aggregation::SampleSet;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub ci95_halfwidth: f64,
    pub n_test: usize,
    /// `None` for classes absent from the test set.
    pub per_class_accuracy: Vec<Option<f64>>,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<u64>>,
}

/// Normal-approximation half-width of the 95% interval for a proportion.
pub fn ci95_halfwidth(accuracy: f64, n: usize) -> f64 {
    1.96 * (accuracy * (1.0 - accuracy) / n as f64).sqrt()
}

pub fn evaluate_probe(probe: &LinearProbe, test: &SampleSet) -> Result<EvalReport, ProbeError> {
    if test.is_empty() {
        return Err(ProbeError::EmptySet("test"));
    }
    if test.dim() != probe.input_dim() {
        return Err(ProbeError::DimensionMismatch {
            expected: probe.input_dim(),
            actual: test.dim(),
        });
    }
    if test.class_count() != probe.class_count() {
        return Err(ProbeError::ClassMismatch {
            expected: probe.class_count(),
            actual: test.class_count(),
        });
    }
    let c = probe.class_count();
    let mut confusion = vec![vec![0u64; c]; c];
    let mut logits = vec![0.0; c];
    for i in 0..test.len() {
        probe.logits_into(test.row(i), &mut logits);
        confusion[test.label(i)][argmax(&logits)] += 1;
    }
    let correct: u64 = (0..c).map(|k| confusion[k][k]).sum();
    let n_test = test.len();
    let accuracy = correct as f64 / n_test as f64;
    let per_class_accuracy = confusion
        .iter()
        .enumerate()
        .map(|(k, row)| {
            let total: u64 = row.iter().sum();
            (total > 0).then(|| row[k] as f64 / total as f64)
        })
        .collect();
    Ok(EvalReport {
        accuracy,
        ci95_halfwidth: ci95_halfwidth(accuracy, n_test),
        n_test,
        per_class_accuracy,
        confusion,
    })
}
