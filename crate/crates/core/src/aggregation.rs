//! Segment pooling and train/test sampling for probes.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{
    Dataset, DatasetError, LabelFilter, LabelKind, LayerSource, RetainedLabels, SegmentRecord,
    SegmentRef,
};
use crate::seed;

#[derive(Debug, Error)]
pub enum AggregationError {
    #[error("segment {0} has no frames")]
    EmptySegment(SegmentRef),
    #[error("segment {0} does not resolve to a known segment")]
    UnresolvedSegment(SegmentRef),
    #[error("no samples to split")]
    NoSamples,
    #[error(
        "{available} samples cannot fill {train} train + {test} test items without replacement; \
         enable replacement or shrink the split sizes"
    )]
    InsufficientSamples {
        available: usize,
        train: usize,
        test: usize,
    },
    #[error("label {label} of sample {index} is not a retained class")]
    UnknownLabel { index: usize, label: u32 },
    #[error("invalid sampling config: {0}")]
    Config(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

/// Mean embedding of one labeled segment.
#[derive(Debug, Clone, PartialEq)]
pub struct PooledSample {
    pub vector: Vec<f64>,
    pub label: u32,
    pub segment: SegmentRef,
}

/// Averages layer rows `start_frame..end_frame` for every segment that has a
/// label of `kind`. Output order follows `segments`.
pub fn pool_segments<S: LayerSource + Sync>(
    source: &S,
    layer: u32,
    segments: &[SegmentRecord],
    kind: LabelKind,
) -> Result<Vec<PooledSample>, AggregationError> {
    let labeled: Vec<(&SegmentRecord, u32)> = segments
        .iter()
        .filter_map(|s| s.label(kind).map(|l| (s, l)))
        .collect();
    if labeled.is_empty() {
        if !segments.is_empty() {
            log::warn!("no segment carries a {kind} label; nothing pooled");
        }
        return Ok(Vec::new());
    }
    if let Some((s, _)) = labeled.iter().find(|(s, _)| s.is_empty()) {
        return Err(AggregationError::EmptySegment(s.key()));
    }

    let mut by_utterance: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, (s, _)) in labeled.iter().enumerate() {
        by_utterance.entry(&s.utterance_id).or_default().push(i);
    }
    let groups: Vec<(&str, Vec<usize>)> = by_utterance.into_iter().collect();

    let pooled: Vec<Vec<(usize, Vec<f64>)>> = groups
        .par_iter()
        .map(|(utt, idxs)| {
            let m = source.layer_matrix(utt, layer)?;
            Ok(idxs
                .iter()
                .map(|&i| {
                    let s = labeled[i].0;
                    let mut acc = vec![0.0f64; m.cols()];
                    for r in s.start_frame..s.end_frame {
                        for (a, &v) in acc.iter_mut().zip(m.row(r)) {
                            *a += f64::from(v);
                        }
                    }
                    let n = s.len() as f64;
                    acc.iter_mut().for_each(|a| *a /= n);
                    (i, acc)
                })
                .collect())
        })
        .collect::<Result<_, DatasetError>>()?;

    let mut slots: Vec<Option<Vec<f64>>> = vec![None; labeled.len()];
    for (i, v) in pooled.into_iter().flatten() {
        slots[i] = Some(v);
    }
    Ok(labeled
        .into_iter()
        .zip(slots)
        .map(|((s, label), v)| PooledSample {
            vector: v.expect("every labeled segment pooled"),
            label,
            segment: s.key(),
        })
        .collect())
}

/// Replaces each sample's label with the speaker of its segment.
pub fn relabel_speaker(
    samples: &[PooledSample],
    segments: &[SegmentRecord],
) -> Result<Vec<PooledSample>, AggregationError> {
    let speakers: HashMap<SegmentRef, u32> =
        segments.iter().map(|s| (s.key(), s.speaker)).collect();
    samples
        .iter()
        .map(|s| {
            let speaker = speakers
                .get(&s.segment)
                .ok_or_else(|| AggregationError::UnresolvedSegment(s.segment.clone()))?;
            Ok(PooledSample {
                vector: s.vector.clone(),
                label: *speaker,
                segment: s.segment.clone(),
            })
        })
        .collect()
}

/// Pooled samples of one layer for a probe or subspace of `kind`, restricted
/// to segments the filter admits. Speaker samples are the phone samples
/// relabeled with their speaker.
pub fn pooled_for_kind(
    dataset: &Dataset,
    filter: &LabelFilter,
    layer: u32,
    kind: LabelKind,
) -> Result<Vec<PooledSample>, AggregationError> {
    let segments: Vec<SegmentRecord> = dataset
        .segments()
        .iter()
        .filter(|s| filter.admits(s, kind))
        .cloned()
        .collect();
    match kind {
        LabelKind::Speaker => {
            let phones = pool_segments(dataset, layer, &segments, LabelKind::Phone)?;
            relabel_speaker(&phones, &segments)
        }
        k => pool_segments(dataset, layer, &segments, k),
    }
}

/// Dense `n × dim` design matrix with class labels `0..class_count`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    dim: usize,
    class_count: usize,
    features: Vec<f64>,
    labels: Vec<usize>,
}

impl SampleSet {
    pub fn new(
        dim: usize,
        class_count: usize,
        features: Vec<f64>,
        labels: Vec<usize>,
    ) -> Result<Self, AggregationError> {
        if features.len() != dim * labels.len() {
            return Err(AggregationError::Config(format!(
                "{} features for {} samples of dim {dim}",
                features.len(),
                labels.len()
            )));
        }
        if let Some((index, &label)) = labels.iter().enumerate().find(|(_, &l)| l >= class_count) {
            return Err(AggregationError::UnknownLabel {
                index,
                label: label as u32,
            });
        }
        Ok(Self {
            dim,
            class_count,
            features,
            labels,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], labels: &[usize], class_count: usize) -> Result<Self, AggregationError> {
        let dim = rows.first().map_or(0, Vec::len);
        let features = rows.iter().flatten().copied().collect();
        Self::new(dim, class_count, features, labels.to_vec())
    }

    /// Maps vocabulary labels to dense class ids of `classes`.
    pub fn from_pooled(
        samples: &[PooledSample],
        classes: &RetainedLabels,
    ) -> Result<Self, AggregationError> {
        let dim = samples.first().map_or(0, |s| s.vector.len());
        let mut features = Vec::with_capacity(dim * samples.len());
        let mut labels = Vec::with_capacity(samples.len());
        for (index, s) in samples.iter().enumerate() {
            let class = classes
                .dense_index(s.label)
                .ok_or(AggregationError::UnknownLabel {
                    index,
                    label: s.label,
                })?;
            features.extend_from_slice(&s.vector);
            labels.push(class);
        }
        Self::new(dim, classes.class_count(), features, labels)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        let mut features = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            features.extend_from_slice(self.row(i));
        }
        Self {
            dim: self.dim,
            class_count: self.class_count,
            features,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    pub fn with_labels(&self, labels: Vec<usize>) -> Result<Self, AggregationError> {
        Self::new(self.dim, self.class_count, self.features.clone(), labels)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplingConfig {
    pub train_size: usize,
    pub test_size: usize,
    pub seed: u64,
    pub replacement: bool,
    /// Keep every speaker's samples on one side of the split.
    #[serde(default)]
    pub speaker_disjoint: bool,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            train_size: 25_000,
            test_size: 10_000,
            seed: 0,
            replacement: false,
            speaker_disjoint: false,
        }
    }
}

impl SamplingConfig {
    pub fn validate(&self) -> Result<(), AggregationError> {
        if self.train_size == 0 || self.test_size == 0 {
            return Err(AggregationError::Config(
                "train_size and test_size must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Indices into a sample list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    pub fn apply<T: Clone>(&self, samples: &[T]) -> (Vec<T>, Vec<T>) {
        let pick = |idx: &[usize]| idx.iter().map(|&i| samples[i].clone()).collect();
        (pick(&self.train), pick(&self.test))
    }
}

/// Draws train and test indices over `n` samples. Without replacement the two
/// sides are disjoint; with replacement every draw is independent and uniform.
pub fn sample_split(n: usize, config: &SamplingConfig) -> Result<Split, AggregationError> {
    config.validate()?;
    if n == 0 {
        return Err(AggregationError::NoSamples);
    }
    let mut rng = seed::rng(config.seed);
    let (train, test) = (config.train_size, config.test_size);
    if config.replacement {
        let train = (0..train).map(|_| seed::index(&mut rng, n)).collect();
        let test = (0..test).map(|_| seed::index(&mut rng, n)).collect();
        return Ok(Split { train, test });
    }
    if n < train + test {
        return Err(AggregationError::InsufficientSamples {
            available: n,
            train,
            test,
        });
    }
    let mut order: Vec<usize> = (0..n).collect();
    seed::shuffle(&mut rng, &mut order);
    let test_idx = order[train..train + test].to_vec();
    order.truncate(train);
    Ok(Split {
        train: order,
        test: test_idx,
    })
}

/// Split in which each group (speaker) lands entirely in train or in test.
/// Groups are shuffled and assigned to the test side until it holds at least
/// its proportional share of samples.
pub fn speaker_disjoint_split(
    groups: &[u32],
    config: &SamplingConfig,
) -> Result<Split, AggregationError> {
    config.validate()?;
    if groups.is_empty() {
        return Err(AggregationError::NoSamples);
    }
    let mut members: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (i, &g) in groups.iter().enumerate() {
        members.entry(g).or_default().push(i);
    }
    if members.len() < 2 {
        return Err(AggregationError::Config(
            "speaker-disjoint split needs at least two speakers".into(),
        ));
    }
    let mut rng = seed::rng(config.seed);
    let mut keys: Vec<u32> = members.keys().copied().collect();
    seed::shuffle(&mut rng, &mut keys);

    let share = groups.len() * config.test_size / (config.train_size + config.test_size);
    let mut test_pool = Vec::new();
    let mut train_pool = Vec::new();
    for (pos, k) in keys.iter().enumerate() {
        // the last speaker always goes to train so neither side is empty
        if test_pool.len() < share.max(1) && pos + 1 < keys.len() {
            test_pool.extend_from_slice(&members[k]);
        } else {
            train_pool.extend_from_slice(&members[k]);
        }
    }

    let draw = |pool: &[usize], size: usize, rng: &mut seed::StreamRng| -> Result<Vec<usize>, AggregationError> {
        if config.replacement {
            return Ok((0..size).map(|_| pool[seed::index(rng, pool.len())]).collect());
        }
        if pool.len() < size {
            return Err(AggregationError::InsufficientSamples {
                available: groups.len(),
                train: config.train_size,
                test: config.test_size,
            });
        }
        let mut order = pool.to_vec();
        seed::shuffle(rng, &mut order);
        order.truncate(size);
        Ok(order)
    };
    let train = draw(&train_pool, config.train_size, &mut rng)?;
    let test = draw(&test_pool, config.test_size, &mut rng)?;
    Ok(Split { train, test })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::SyllableRole;
    use crate::matrix::FrameMatrix;
    use proptest::prelude::*;

    struct MemSource {
        dim: usize,
        matrices: HashMap<String, FrameMatrix>,
    }

    impl LayerSource for MemSource {
        fn dim(&self) -> usize {
            self.dim
        }

        fn layer_matrix(&self, utt: &str, _layer: u32) -> Result<FrameMatrix, DatasetError> {
            self.matrices
                .get(utt)
                .cloned()
                .ok_or_else(|| DatasetError::UnknownUtterance(utt.into()))
        }
    }

    fn seg(utt: &str, start: usize, end: usize, phone: u32, tone: Option<u32>, speaker: u32) -> SegmentRecord {
        SegmentRecord {
            utterance_id: utt.into(),
            start_frame: start,
            end_frame: end,
            phone,
            tone,
            speaker,
            syllable_role: SyllableRole::None,
        }
    }

    fn source(rows: Vec<Vec<f32>>) -> MemSource {
        let dim = rows[0].len();
        let mut matrices = HashMap::new();
        matrices.insert("u".to_string(), FrameMatrix::from_rows(&rows).unwrap());
        MemSource { dim, matrices }
    }

    #[test]
    fn constant_segment_pools_to_the_constant() {
        let v = vec![0.25f32, -3.0, 7.5];
        let src = source(vec![v.clone(); 5]);
        let out = pool_segments(&src, 0, &[seg("u", 0, 5, 1, None, 0)], LabelKind::Phone).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].vector, v.iter().map(|&x| f64::from(x)).collect::<Vec<_>>());
        assert_eq!(out[0].label, 1);
    }

    #[test]
    fn three_frame_mean_matches_hand_sum() {
        let rows = vec![
            vec![1.0f32, 2.0, -4.0],
            vec![0.5, 0.125, 8.0],
            vec![3.0, -1.0, 1.0],
            vec![100.0, 100.0, 100.0],
        ];
        let src = source(rows);
        let out = pool_segments(&src, 0, &[seg("u", 0, 3, 0, None, 0)], LabelKind::Phone).unwrap();
        // (1+0.5+3)/3, (2+0.125-1)/3, (-4+8+1)/3
        let expected = [4.5 / 3.0, 1.125 / 3.0, 5.0 / 3.0];
        for (a, e) in out[0].vector.iter().zip(expected) {
            assert_eq!(*a, e);
        }
    }

    #[test]
    fn tone_pooling_without_tones_is_empty() {
        let src = source(vec![vec![1.0f32]; 4]);
        let segs = [seg("u", 0, 2, 0, None, 0), seg("u", 2, 4, 1, None, 0)];
        assert!(pool_segments(&src, 0, &segs, LabelKind::Tone).unwrap().is_empty());
    }

    #[test]
    fn empty_segment_is_an_error() {
        let src = source(vec![vec![1.0f32]; 4]);
        let err = pool_segments(&src, 0, &[seg("u", 2, 2, 0, None, 0)], LabelKind::Phone).unwrap_err();
        assert!(matches!(err, AggregationError::EmptySegment(_)));
    }

    #[test]
    fn relabel_keeps_vectors_and_count() {
        let src = source((0..6).map(|i| vec![i as f32, 1.0]).collect());
        let segs = [seg("u", 0, 2, 0, None, 3), seg("u", 2, 6, 1, None, 3)];
        let pooled = pool_segments(&src, 0, &segs, LabelKind::Phone).unwrap();
        let spk = relabel_speaker(&pooled, &segs).unwrap();
        assert_eq!(spk.len(), pooled.len());
        for (a, b) in spk.iter().zip(&pooled) {
            assert_eq!(a.label, 3);
            assert_eq!(
                a.vector.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                b.vector.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
            );
        }
    }

    #[test]
    fn relabel_rejects_unknown_segments() {
        let sample = PooledSample {
            vector: vec![0.0],
            label: 0,
            segment: SegmentRef {
                utterance_id: "nope".into(),
                start_frame: 0,
                end_frame: 1,
            },
        };
        assert!(matches!(
            relabel_speaker(&[sample], &[]),
            Err(AggregationError::UnresolvedSegment(_))
        ));
    }

    #[test]
    fn exact_partition_without_replacement() {
        let cfg = SamplingConfig {
            seed: 11,
            ..SamplingConfig::default()
        };
        let split = sample_split(35_000, &cfg).unwrap();
        assert_eq!(split.train.len(), 25_000);
        assert_eq!(split.test.len(), 10_000);
        let mut all: Vec<usize> = split.train.iter().chain(&split.test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..35_000).collect::<Vec<_>>());
    }

    #[test]
    fn seeds_control_the_split() {
        let cfg = |seed| SamplingConfig {
            train_size: 50,
            test_size: 20,
            seed,
            replacement: false,
            speaker_disjoint: false,
        };
        assert_eq!(sample_split(500, &cfg(1)).unwrap(), sample_split(500, &cfg(1)).unwrap());
        assert_ne!(sample_split(500, &cfg(1)).unwrap(), sample_split(500, &cfg(2)).unwrap());
    }

    #[test]
    fn too_few_samples_without_replacement() {
        let cfg = SamplingConfig::default();
        let err = sample_split(100, &cfg).unwrap_err();
        assert!(err.to_string().contains("enable replacement"));
        let cfg = SamplingConfig {
            replacement: true,
            ..cfg
        };
        let split = sample_split(100, &cfg).unwrap();
        assert_eq!(split.train.len(), 25_000);
        assert!(split.train.iter().chain(&split.test).all(|&i| i < 100));
    }

    #[test]
    fn speaker_disjoint_sides_share_no_speaker() {
        let groups: Vec<u32> = (0..1000).map(|i| (i % 10) as u32).collect();
        let cfg = SamplingConfig {
            train_size: 600,
            test_size: 200,
            seed: 5,
            replacement: false,
            speaker_disjoint: true,
        };
        let split = speaker_disjoint_split(&groups, &cfg).unwrap();
        let train: std::collections::BTreeSet<u32> = split.train.iter().map(|&i| groups[i]).collect();
        let test: std::collections::BTreeSet<u32> = split.test.iter().map(|&i| groups[i]).collect();
        assert!(train.is_disjoint(&test));
        assert_eq!(split.train.len(), 600);
        assert_eq!(split.test.len(), 200);
    }

    proptest! {
        #[test]
        fn pooling_is_linear(a in proptest::collection::vec(-100i32..100, 12), b in proptest::collection::vec(-100i32..100, 12)) {
            // small integers keep f32 storage exact so linearity can be checked bitwise
            let to_rows = |v: &[i32]| v.chunks(3).map(|c| c.iter().map(|&x| x as f32).collect()).collect::<Vec<Vec<f32>>>();
            let sum: Vec<i32> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
            let segs = [seg("u", 0, 3, 0, None, 0), seg("u", 1, 4, 0, None, 0)];
            let pa = pool_segments(&source(to_rows(&a)), 0, &segs, LabelKind::Phone).unwrap();
            let pb = pool_segments(&source(to_rows(&b)), 0, &segs, LabelKind::Phone).unwrap();
            let ps = pool_segments(&source(to_rows(&sum)), 0, &segs, LabelKind::Phone).unwrap();
            for k in 0..segs.len() {
                for j in 0..3 {
                    prop_assert!((ps[k].vector[j] - (pa[k].vector[j] + pb[k].vector[j])).abs() < 1e-12);
                }
            }
        }

        #[test]
        fn pooling_is_permutation_invariant(perm_seed in 0u64..1000) {
            let src = source((0..10).map(|i| vec![i as f32 * 0.5, (i * i) as f32]).collect());
            let segs: Vec<SegmentRecord> = (0..5).map(|i| seg("u", 2 * i, 2 * i + 2, i as u32, None, 0)).collect();
            let mut shuffled = segs.clone();
            seed::shuffle(&mut seed::rng(perm_seed), &mut shuffled);
            let a = pool_segments(&src, 0, &segs, LabelKind::Phone).unwrap();
            let b = pool_segments(&src, 0, &shuffled, LabelKind::Phone).unwrap();
            for s in &b {
                let orig = a.iter().find(|x| x.segment == s.segment).unwrap();
                prop_assert_eq!(&orig.vector, &s.vector);
                prop_assert_eq!(orig.label, s.label);
            }
        }
    }
}
