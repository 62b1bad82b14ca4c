use rayon::prelude::*;
use serde::Serialize;

use super::{evaluate_probe, train_probe, EvalReport, ProbeConfig};
use crate::aggregation::{
    pooled_for_kind, sample_split, speaker_disjoint_split, SampleSet, SamplingConfig,
};
use crate::dataset::{Dataset, LabelFilter, LabelKind};
use crate::{seed, Error};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LayerProbeResult {
    pub layer: u32,
    pub kind: LabelKind,
    pub n_train: usize,
    pub train_accuracy: f64,
    pub final_train_loss: f64,
    pub report: EvalReport,
}

/// `(sampling seed, probe seed)` for one (dataset, probe kind, layer) unit.
pub fn layer_seeds(base: u64, dataset: &Dataset, kind: LabelKind, layer: u32) -> (u64, u64) {
    let parts = [
        seed::string_key(dataset.model_id()),
        seed::string_key(dataset.dataset_id()),
        kind as u64,
        u64::from(layer),
    ];
    let unit = seed::derive_seed(base, &parts);
    (seed::derive_seed(unit, &[0]), seed::derive_seed(unit, &[1]))
}

/// Pool, (relabel,) split, train and evaluate for each layer. Layers run in
/// parallel; each draws its own seeds, so the table is independent of
/// scheduling and comes back in the order of `layers`.
pub fn layer_sweep(
    dataset: &Dataset,
    filter: &LabelFilter,
    kind: LabelKind,
    layers: &[u32],
    sampling: &SamplingConfig,
    probe: &ProbeConfig,
) -> Result<Vec<LayerProbeResult>, Error> {
    if kind == LabelKind::Tone && !dataset.has_tones() {
        return Err(Error::MissingTones {
            dataset: dataset.dataset_id().to_string(),
            what: "tone probing".into(),
        });
    }
    sampling.validate()?;
    probe.validate()?;
    layers
        .par_iter()
        .map(|&layer| probe_layer(dataset, filter, kind, layer, sampling, probe))
        .collect()
}

fn probe_layer(
    dataset: &Dataset,
    filter: &LabelFilter,
    kind: LabelKind,
    layer: u32,
    sampling: &SamplingConfig,
    probe: &ProbeConfig,
) -> Result<LayerProbeResult, Error> {
    let classes = filter.retained(kind).ok_or_else(|| Error::MissingTones {
        dataset: dataset.dataset_id().to_string(),
        what: "tone probing".into(),
    })?;
    let pooled = pooled_for_kind(dataset, filter, layer, kind)?;
    let samples = SampleSet::from_pooled(&pooled, classes)?;

    let (sampling_seed, probe_seed) = layer_seeds(sampling.seed, dataset, kind, layer);
    let sampling = SamplingConfig {
        seed: sampling_seed,
        ..sampling.clone()
    };
    let split = if sampling.speaker_disjoint {
        let speakers: std::collections::HashMap<_, _> = dataset
            .segments()
            .iter()
            .map(|s| (s.key(), s.speaker))
            .collect();
        let groups: Vec<u32> = pooled.iter().map(|p| speakers[&p.segment]).collect();
        speaker_disjoint_split(&groups, &sampling)?
    } else {
        sample_split(samples.len(), &sampling)?
    };
    let train = samples.subset(&split.train);
    let test = samples.subset(&split.test);

    let config = ProbeConfig {
        seed: probe_seed,
        ..probe.clone()
    };
    let outcome = train_probe(&train, classes.class_count(), &config)?;
    let report = evaluate_probe(&outcome.probe, &test)?;
    Ok(LayerProbeResult {
        layer,
        kind,
        n_train: train.len(),
        train_accuracy: outcome.train_accuracy,
        final_train_loss: *outcome.epoch_losses.last().expect("at least one loss"),
        report,
    })
}
