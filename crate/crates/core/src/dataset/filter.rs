use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::{Dataset, DatasetError, LabelKind, SegmentRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExclusionReason {
    NonSpeech,
    /// Label never occurs with at least one speaker.
    MissingForSpeakers { speakers_without: usize },
}

/// Labels of one kind that survive rare-label filtering, with a dense
/// renumbering `0..class_count()` in ascending vocabulary-id order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RetainedLabels {
    pub kind: LabelKind,
    pub retained: BTreeSet<u32>,
    pub excluded: BTreeMap<u32, ExclusionReason>,
    #[serde(skip)]
    dense: BTreeMap<u32, usize>,
}

impl RetainedLabels {
    pub fn new(kind: LabelKind, retained: BTreeSet<u32>, excluded: BTreeMap<u32, ExclusionReason>) -> Self {
        let dense = retained.iter().enumerate().map(|(i, &id)| (id, i)).collect();
        Self {
            kind,
            retained,
            excluded,
            dense,
        }
    }

    /// Keeps every id in `0..n`.
    pub fn all(kind: LabelKind, n: usize) -> Self {
        Self::new(kind, (0..n as u32).collect(), BTreeMap::new())
    }

    pub fn contains(&self, id: u32) -> bool {
        self.retained.contains(&id)
    }

    pub fn class_count(&self) -> usize {
        self.retained.len()
    }

    pub fn dense_index(&self, id: u32) -> Option<usize> {
        self.dense.get(&id).copied()
    }

    /// Vocabulary ids in dense order.
    pub fn labels(&self) -> Vec<u32> {
        self.retained.iter().copied().collect()
    }
}

/// Keeps labels of `kind` that occur in at least one segment of every
/// speaker present in the segment table. Non-speech labels are always dropped.
pub fn filter_rare_labels(dataset: &Dataset, kind: LabelKind) -> Result<RetainedLabels, DatasetError> {
    let vocab = match kind {
        LabelKind::Speaker => return Err(DatasetError::UnsupportedFilterKind(kind)),
        k => dataset
            .vocabulary(k)
            .ok_or(DatasetError::MissingVocabulary(k))?,
    };
    let mut speakers = BTreeSet::new();
    let mut seen: BTreeMap<u32, BTreeSet<u32>> = BTreeMap::new();
    for seg in dataset.segments() {
        speakers.insert(seg.speaker);
        if let Some(label) = seg.label(kind) {
            seen.entry(label).or_default().insert(seg.speaker);
        }
    }

    let mut retained = BTreeSet::new();
    let mut excluded = BTreeMap::new();
    for entry in &vocab.entries {
        if entry.non_speech {
            excluded.insert(entry.id, ExclusionReason::NonSpeech);
            continue;
        }
        let covered = seen.get(&entry.id).map_or(0, BTreeSet::len);
        if covered == speakers.len() && covered > 0 {
            retained.insert(entry.id);
        } else {
            excluded.insert(
                entry.id,
                ExclusionReason::MissingForSpeakers {
                    speakers_without: speakers.len() - covered,
                },
            );
        }
    }
    for (&id, reason) in &excluded {
        if let ExclusionReason::MissingForSpeakers { speakers_without } = reason {
            if seen.contains_key(&id) {
                log::warn!(
                    "{kind} `{}` absent for {speakers_without} speaker(s); excluded",
                    vocab.name(id).unwrap_or("?")
                );
            }
        }
    }
    if retained.is_empty() {
        return Err(DatasetError::EmptyRetainedSet(kind));
    }
    Ok(RetainedLabels::new(kind, retained, excluded))
}

/// Retained phone and tone sets for a dataset; decides which segments feed
/// each kind of analysis.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelFilter {
    pub phones: RetainedLabels,
    pub tones: Option<RetainedLabels>,
    pub speakers: RetainedLabels,
}

impl LabelFilter {
    pub fn from_dataset(dataset: &Dataset) -> Result<Self, DatasetError> {
        let phones = filter_rare_labels(dataset, LabelKind::Phone)?;
        let tones = if dataset.has_tones() {
            Some(filter_rare_labels(dataset, LabelKind::Tone)?)
        } else {
            None
        };
        let speakers: BTreeSet<u32> = dataset.segments().iter().map(|s| s.speaker).collect();
        let speakers = RetainedLabels::new(LabelKind::Speaker, speakers, BTreeMap::new());
        Ok(Self {
            phones,
            tones,
            speakers,
        })
    }

    /// Filter that keeps everything; useful when the caller has curated labels.
    pub fn permissive(dataset: &Dataset) -> Self {
        let n = |k| dataset.vocabulary(k).map_or(0, |v| v.len());
        Self {
            phones: RetainedLabels::all(LabelKind::Phone, n(LabelKind::Phone)),
            tones: dataset
                .has_tones()
                .then(|| RetainedLabels::all(LabelKind::Tone, n(LabelKind::Tone))),
            speakers: RetainedLabels::all(LabelKind::Speaker, n(LabelKind::Speaker)),
        }
    }

    pub fn retained(&self, kind: LabelKind) -> Option<&RetainedLabels> {
        match kind {
            LabelKind::Phone => Some(&self.phones),
            LabelKind::Tone => self.tones.as_ref(),
            LabelKind::Speaker => Some(&self.speakers),
        }
    }

    /// Phone and speaker analyses use segments with a retained phone; tone
    /// analyses additionally need a retained tone label.
    pub fn admits(&self, seg: &SegmentRecord, kind: LabelKind) -> bool {
        match kind {
            LabelKind::Phone | LabelKind::Speaker => self.phones.contains(seg.phone),
            LabelKind::Tone => match (&self.tones, seg.tone) {
                (Some(t), Some(tone)) => t.contains(tone) && self.phones.contains(seg.phone),
                _ => false,
            },
        }
    }
}
