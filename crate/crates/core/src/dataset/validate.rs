use std::collections::{HashMap, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::io::{parse_manifest, parse_segments_lenient, read_text, read_vocabulary};
use super::{matrix_file_name, DatasetManifest, LabelKind, LabelVocabulary, SegmentRecord};
use crate::matrix::{self, MatrixError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FindingKind {
    Manifest,
    Vocabulary,
    MissingFile,
    Matrix,
    Shape,
    SegmentSyntax,
    FrameRange,
    UnresolvedLabel,
}

/// One validation problem, attributed to the entity it concerns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Finding {
    pub kind: FindingKind,
    pub entity: String,
    pub message: String,
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.entity, self.message)
    }
}

pub(crate) struct Parts {
    pub root: PathBuf,
    pub manifest: DatasetManifest,
    pub phones: LabelVocabulary,
    pub speakers: LabelVocabulary,
    pub tones: Option<LabelVocabulary>,
    pub segments: Vec<SegmentRecord>,
}

#[derive(Default)]
struct Findings(Vec<Finding>);

impl Findings {
    fn push(&mut self, kind: FindingKind, entity: impl Into<String>, message: impl Into<String>) {
        self.0.push(Finding {
            kind,
            entity: entity.into(),
            message: message.into(),
        });
    }
}

/// Full validation of a dataset, including every matrix payload.
/// Findings come out in a fixed order: manifest, vocabularies, matrices
/// (manifest order, then layer order), segments (file order).
pub fn validate_dataset(manifest_path: &Path) -> Vec<Finding> {
    check(manifest_path, true).1
}

pub(crate) fn check(manifest_path: &Path, deep: bool) -> (Option<Parts>, Vec<Finding>) {
    let mut out = Findings::default();
    let root = manifest_path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_default();

    let manifest = match parse_manifest(manifest_path) {
        Ok(m) => m,
        Err(e) => {
            out.push(FindingKind::Manifest, "manifest", e.to_string());
            return (None, out.0);
        }
    };
    check_manifest(&manifest, &mut out);

    let files = &manifest.label_files;
    let phones = load_vocab(&root, &files.phones, LabelKind::Phone, &mut out);
    let speakers = load_vocab(&root, &files.speakers, LabelKind::Speaker, &mut out);
    let tones = files
        .tones
        .as_ref()
        .map(|name| load_vocab(&root, name, LabelKind::Tone, &mut out));

    check_matrices(&root, &manifest, deep, &mut out);

    let segments = check_segments(
        &root,
        &manifest,
        phones.as_ref(),
        speakers.as_ref(),
        tones.as_ref().map(Option::as_ref),
        &mut out,
    );

    let parts = match (phones, speakers, tones, segments) {
        (Some(phones), Some(speakers), tones, Some(segments)) => {
            let tones = match tones {
                Some(Some(t)) => Some(t),
                Some(None) => return (None, out.0),
                None => None,
            };
            Some(Parts {
                root,
                manifest,
                phones,
                speakers,
                tones,
                segments,
            })
        }
        _ => None,
    };
    (parts, out.0)
}

fn check_manifest(m: &DatasetManifest, out: &mut Findings) {
    if m.dim == 0 {
        out.push(FindingKind::Manifest, "manifest.dim", "must be positive");
    }
    if m.frame_ms == 0 {
        out.push(FindingKind::Manifest, "manifest.frame_ms", "must be positive");
    }
    if m.layers.is_empty() {
        out.push(FindingKind::Manifest, "manifest.layers", "no layers listed");
    }
    let mut seen = HashSet::new();
    for layer in &m.layers {
        if !seen.insert(layer) {
            out.push(
                FindingKind::Manifest,
                format!("layer {layer}"),
                "duplicate layer index",
            );
        }
    }
    let mut seen = HashSet::new();
    for u in &m.utterances {
        if !seen.insert(u.utterance_id.as_str()) {
            out.push(
                FindingKind::Manifest,
                format!("utterance `{}`", u.utterance_id),
                "duplicate utterance id",
            );
        }
        if u.n_frames == 0 {
            out.push(
                FindingKind::Manifest,
                format!("utterance `{}`", u.utterance_id),
                "n_frames must be positive",
            );
        }
    }
}

fn load_vocab(
    root: &Path,
    name: &str,
    kind: LabelKind,
    out: &mut Findings,
) -> Option<LabelVocabulary> {
    let entity = format!("{kind} vocabulary");
    let path = root.join(name);
    if !path.exists() {
        out.push(
            FindingKind::MissingFile,
            entity,
            format!("missing file {}", path.display()),
        );
        return None;
    }
    let vocab = match read_vocabulary(&path, kind) {
        Ok(v) => v,
        Err(e) => {
            out.push(FindingKind::Vocabulary, entity, e.to_string());
            return None;
        }
    };
    let mut ok = true;
    for (pos, entry) in vocab.entries.iter().enumerate() {
        if entry.id as usize != pos {
            out.push(
                FindingKind::Vocabulary,
                entity.clone(),
                format!("entry {pos} has id {}; ids must be dense 0..N-1 in order", entry.id),
            );
            ok = false;
        }
    }
    let mut names = HashSet::new();
    for entry in &vocab.entries {
        if !names.insert(entry.name.as_str()) {
            out.push(
                FindingKind::Vocabulary,
                entity.clone(),
                format!("duplicate name `{}`", entry.name),
            );
            ok = false;
        }
    }
    ok.then_some(vocab)
}

fn check_matrices(root: &Path, m: &DatasetManifest, deep: bool, out: &mut Findings) {
    for u in &m.utterances {
        for &layer in &m.layers {
            let entity = format!("utterance `{}` layer {layer}", u.utterance_id);
            let path = root.join(matrix_file_name(&u.utterance_id, layer));
            if !path.exists() {
                out.push(
                    FindingKind::MissingFile,
                    entity,
                    format!("missing matrix file {}", path.display()),
                );
                continue;
            }
            let (header, payload) = match matrix::inspect_matrix_file(&path) {
                Ok(h) => h,
                Err(e) => {
                    out.push(FindingKind::Matrix, entity, e.to_string());
                    continue;
                }
            };
            if header.rows != u.n_frames as u64 || header.cols != m.dim as u64 {
                out.push(
                    FindingKind::Shape,
                    entity,
                    format!(
                        "declared shape {}x{}, expected {}x{}",
                        header.rows, header.cols, u.n_frames, m.dim
                    ),
                );
                continue;
            }
            if payload != header.payload_len() {
                out.push(
                    FindingKind::Matrix,
                    entity,
                    MatrixError::LengthMismatch {
                        expected: header.payload_len(),
                        actual: payload,
                    }
                    .to_string(),
                );
                continue;
            }
            if deep {
                match matrix::read_matrix_file(&path) {
                    Ok(mat) => {
                        if let Some((row, col)) = mat.find_non_finite() {
                            out.push(
                                FindingKind::Matrix,
                                entity,
                                MatrixError::NonFinite { row, col }.to_string(),
                            );
                        }
                    }
                    Err(e) => out.push(FindingKind::Matrix, entity, e.to_string()),
                }
            }
        }
    }
}

fn check_segments(
    root: &Path,
    m: &DatasetManifest,
    phones: Option<&LabelVocabulary>,
    speakers: Option<&LabelVocabulary>,
    tones: Option<Option<&LabelVocabulary>>,
    out: &mut Findings,
) -> Option<Vec<SegmentRecord>> {
    let path = root.join(&m.label_files.segments);
    if !path.exists() {
        out.push(
            FindingKind::MissingFile,
            "segment table",
            format!("missing file {}", path.display()),
        );
        return None;
    }
    let text = match read_text(&path) {
        Ok(t) => t,
        Err(e) => {
            out.push(FindingKind::SegmentSyntax, "segment table", e.to_string());
            return None;
        }
    };
    let (rows, bad) = match parse_segments_lenient(&text) {
        Ok(r) => r,
        Err(msg) => {
            out.push(FindingKind::SegmentSyntax, "segment table", msg);
            return None;
        }
    };

    let frames: HashMap<&str, usize> = m
        .utterances
        .iter()
        .map(|u| (u.utterance_id.as_str(), u.n_frames))
        .collect();

    let mut bad = bad.into_iter().peekable();
    for (line, seg) in &rows {
        while let Some((bad_line, msg)) = bad.next_if(|(l, _)| l < line) {
            out.push(
                FindingKind::SegmentSyntax,
                format!("segment line {bad_line}"),
                msg,
            );
        }
        let entity = format!("segment line {line} ({})", seg.key());
        match frames.get(seg.utterance_id.as_str()) {
            None => out.push(
                FindingKind::UnresolvedLabel,
                entity.clone(),
                format!("unknown utterance `{}`", seg.utterance_id),
            ),
            Some(&n) => {
                if seg.start_frame >= seg.end_frame || seg.end_frame > n {
                    out.push(
                        FindingKind::FrameRange,
                        entity.clone(),
                        format!(
                            "frame range [{}, {}) outside 0..{n} or empty",
                            seg.start_frame, seg.end_frame
                        ),
                    );
                }
            }
        }
        if let Some(v) = phones {
            if !v.contains(seg.phone) {
                out.push(
                    FindingKind::UnresolvedLabel,
                    entity.clone(),
                    format!("phone id {} not in vocabulary of {}", seg.phone, v.len()),
                );
            }
        }
        if let Some(v) = speakers {
            if !v.contains(seg.speaker) {
                out.push(
                    FindingKind::UnresolvedLabel,
                    entity.clone(),
                    format!("speaker id {} not in vocabulary of {}", seg.speaker, v.len()),
                );
            }
        }
        if let Some(tone) = seg.tone {
            match tones {
                None => out.push(
                    FindingKind::UnresolvedLabel,
                    entity.clone(),
                    format!("tone id {tone} given but dataset has no tone vocabulary"),
                ),
                Some(Some(v)) if !v.contains(tone) => out.push(
                    FindingKind::UnresolvedLabel,
                    entity.clone(),
                    format!("tone id {tone} not in vocabulary of {}", v.len()),
                ),
                _ => {}
            }
        }
    }
    for (bad_line, msg) in bad {
        out.push(
            FindingKind::SegmentSyntax,
            format!("segment line {bad_line}"),
            msg,
        );
    }
    Some(rows.into_iter().map(|(_, s)| s).collect())
}
