//! On-disk dataset container: a JSON manifest, per-layer matrix files,
//! a segment table and label vocabularies.

mod filter;
mod io;
mod validate;

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::{self, FrameMatrix, MatrixError};

pub use filter::{filter_rare_labels, ExclusionReason, LabelFilter, RetainedLabels};
pub use io::{
    frames_from_times, parse_segments, read_vocabulary, segments_to_tsv, write_dataset_sidecars,
    write_vocabulary, MANIFEST_FILE, SEGMENT_HEADER,
};
pub use validate::{validate_dataset, Finding, FindingKind};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: invalid JSON: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}: line {line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("dataset failed validation ({} finding(s)); first: {}", .0.len(), .0[0])]
    Invalid(Vec<Finding>),
    #[error("{entity}: {source}")]
    Matrix {
        entity: String,
        #[source]
        source: MatrixError,
    },
    #[error("{entity}: expected {expected_rows}x{expected_cols}, found {rows}x{cols}")]
    Shape {
        entity: String,
        expected_rows: usize,
        expected_cols: usize,
        rows: usize,
        cols: usize,
    },
    #[error("unknown utterance `{0}`")]
    UnknownUtterance(String),
    #[error("layer {0} is not part of this dataset")]
    UnknownLayer(u32),
    #[error("dataset has no {0} vocabulary")]
    MissingVocabulary(LabelKind),
    #[error("rare-label filter on {0} labels retained nothing")]
    EmptyRetainedSet(LabelKind),
    #[error("label filtering is not defined for {0} labels")]
    UnsupportedFilterKind(LabelKind),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelKind {
    Phone,
    Tone,
    Speaker,
}

impl LabelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            LabelKind::Phone => "phone",
            LabelKind::Tone => "tone",
            LabelKind::Speaker => "speaker",
        }
    }
}

impl fmt::Display for LabelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for LabelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "phone" => Ok(LabelKind::Phone),
            "tone" => Ok(LabelKind::Tone),
            "speaker" => Ok(LabelKind::Speaker),
            other => Err(format!("unknown label kind `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SyllableRole {
    Onset,
    Nucleus,
    Coda,
    None,
}

impl SyllableRole {
    pub const POSITIONS: [SyllableRole; 3] =
        [SyllableRole::Onset, SyllableRole::Nucleus, SyllableRole::Coda];

    pub fn as_str(self) -> &'static str {
        match self {
            SyllableRole::Onset => "onset",
            SyllableRole::Nucleus => "nucleus",
            SyllableRole::Coda => "coda",
            SyllableRole::None => "none",
        }
    }
}

impl fmt::Display for SyllableRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for SyllableRole {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "onset" => Ok(SyllableRole::Onset),
            "nucleus" => Ok(SyllableRole::Nucleus),
            "coda" => Ok(SyllableRole::Coda),
            "none" => Ok(SyllableRole::None),
            other => Err(format!("unknown syllable role `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UtteranceEntry {
    pub utterance_id: String,
    pub n_frames: usize,
}

/// Sidecar file names, relative to the manifest's directory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelFiles {
    pub segments: String,
    pub phones: String,
    pub speakers: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tones: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub dataset_id: String,
    pub model_id: String,
    pub dim: usize,
    pub frame_ms: u32,
    pub layers: Vec<u32>,
    pub utterances: Vec<UtteranceEntry>,
    pub label_files: LabelFiles,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VocabEntry {
    pub id: u32,
    pub name: String,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub non_speech: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelVocabulary {
    pub kind: LabelKind,
    pub entries: Vec<VocabEntry>,
}

impl LabelVocabulary {
    pub fn from_names<S: AsRef<str>>(kind: LabelKind, names: &[S]) -> Self {
        let entries = names
            .iter()
            .enumerate()
            .map(|(i, n)| VocabEntry {
                id: i as u32,
                name: n.as_ref().to_string(),
                non_speech: false,
            })
            .collect();
        Self { kind, entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, id: u32) -> bool {
        (id as usize) < self.entries.len()
    }

    pub fn name(&self, id: u32) -> Option<&str> {
        self.entries.get(id as usize).map(|e| e.name.as_str())
    }

    pub fn is_non_speech(&self, id: u32) -> bool {
        self.entries.get(id as usize).is_some_and(|e| e.non_speech)
    }
}

/// Labeled frame span `[start_frame, end_frame)` of one utterance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentRecord {
    pub utterance_id: String,
    pub start_frame: usize,
    pub end_frame: usize,
    pub phone: u32,
    pub tone: Option<u32>,
    pub speaker: u32,
    pub syllable_role: SyllableRole,
}

impl SegmentRecord {
    pub fn len(&self) -> usize {
        self.end_frame.saturating_sub(self.start_frame)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn label(&self, kind: LabelKind) -> Option<u32> {
        match kind {
            LabelKind::Phone => Some(self.phone),
            LabelKind::Tone => self.tone,
            LabelKind::Speaker => Some(self.speaker),
        }
    }

    pub fn key(&self) -> SegmentRef {
        SegmentRef {
            utterance_id: self.utterance_id.clone(),
            start_frame: self.start_frame,
            end_frame: self.end_frame,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SegmentRef {
    pub utterance_id: String,
    pub start_frame: usize,
    pub end_frame: usize,
}

impl fmt::Display for SegmentRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}[{},{})",
            self.utterance_id, self.start_frame, self.end_frame
        )
    }
}

pub fn matrix_file_name(utterance_id: &str, layer: u32) -> String {
    format!("{utterance_id}.layer{layer}.sslm")
}

/// Random access to layer matrices by utterance.
pub trait LayerSource {
    fn dim(&self) -> usize;
    fn layer_matrix(&self, utterance_id: &str, layer: u32) -> Result<FrameMatrix, DatasetError>;
}

/// A loaded, validated dataset. Matrices are read on demand.
#[derive(Debug, Clone)]
pub struct Dataset {
    root: PathBuf,
    manifest: DatasetManifest,
    phones: LabelVocabulary,
    speakers: LabelVocabulary,
    tones: Option<LabelVocabulary>,
    segments: Vec<SegmentRecord>,
    frames_by_utterance: HashMap<String, usize>,
}

impl Dataset {
    /// Loads the manifest and sidecars and checks every structural invariant.
    /// Matrix payloads are not read; only their headers and file sizes.
    pub fn open(manifest_path: &Path) -> Result<Self, DatasetError> {
        let (parts, findings) = validate::check(manifest_path, false);
        if !findings.is_empty() {
            return Err(DatasetError::Invalid(findings));
        }
        // check() only returns no findings when every part parsed
        let parts = parts.expect("validated dataset parts");
        Ok(Self::from_parts(parts))
    }

    fn from_parts(parts: validate::Parts) -> Self {
        let frames_by_utterance = parts
            .manifest
            .utterances
            .iter()
            .map(|u| (u.utterance_id.clone(), u.n_frames))
            .collect();
        Self {
            root: parts.root,
            manifest: parts.manifest,
            phones: parts.phones,
            speakers: parts.speakers,
            tones: parts.tones,
            segments: parts.segments,
            frames_by_utterance,
        }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn manifest(&self) -> &DatasetManifest {
        &self.manifest
    }

    pub fn dataset_id(&self) -> &str {
        &self.manifest.dataset_id
    }

    pub fn model_id(&self) -> &str {
        &self.manifest.model_id
    }

    pub fn layers(&self) -> &[u32] {
        &self.manifest.layers
    }

    pub fn segments(&self) -> &[SegmentRecord] {
        &self.segments
    }

    pub fn has_tones(&self) -> bool {
        self.tones.is_some()
    }

    pub fn vocabulary(&self, kind: LabelKind) -> Option<&LabelVocabulary> {
        match kind {
            LabelKind::Phone => Some(&self.phones),
            LabelKind::Speaker => Some(&self.speakers),
            LabelKind::Tone => self.tones.as_ref(),
        }
    }

    pub fn n_frames(&self, utterance_id: &str) -> Option<usize> {
        self.frames_by_utterance.get(utterance_id).copied()
    }

    pub fn matrix_path(&self, utterance_id: &str, layer: u32) -> PathBuf {
        self.root.join(matrix_file_name(utterance_id, layer))
    }
}

impl LayerSource for Dataset {
    fn dim(&self) -> usize {
        self.manifest.dim
    }

    fn layer_matrix(&self, utterance_id: &str, layer: u32) -> Result<FrameMatrix, DatasetError> {
        let n_frames = self
            .n_frames(utterance_id)
            .ok_or_else(|| DatasetError::UnknownUtterance(utterance_id.to_string()))?;
        if !self.manifest.layers.contains(&layer) {
            return Err(DatasetError::UnknownLayer(layer));
        }
        let entity = format!("utterance `{utterance_id}` layer {layer}");
        let m = matrix::read_matrix_file(&self.matrix_path(utterance_id, layer)).map_err(
            |source| DatasetError::Matrix {
                entity: entity.clone(),
                source,
            },
        )?;
        if m.rows() != n_frames || m.cols() != self.manifest.dim {
            return Err(DatasetError::Shape {
                entity,
                expected_rows: n_frames,
                expected_cols: self.manifest.dim,
                rows: m.rows(),
                cols: m.cols(),
            });
        }
        if let Some((row, col)) = m.find_non_finite() {
            return Err(DatasetError::Matrix {
                entity,
                source: MatrixError::NonFinite { row, col },
            });
        }
        Ok(m)
    }
}
