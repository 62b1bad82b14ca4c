use std::fs;
use std::path::Path;

use super::{
    DatasetError, DatasetManifest, LabelKind, LabelVocabulary, SegmentRecord,
    VocabEntry,
};

pub const SEGMENT_HEADER: &str =
    "utterance_id\tstart_frame\tend_frame\tphone\ttone\tspeaker\tsyllable_role";

pub const MANIFEST_FILE: &str = "manifest.json";

pub(crate) fn read_text(path: &Path) -> Result<String, DatasetError> {
    fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn write_text(path: &Path, text: &str) -> Result<(), DatasetError> {
    fs::write(path, text).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub(crate) fn parse_manifest(path: &Path) -> Result<DatasetManifest, DatasetError> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|source| DatasetError::Json {
        path: path.display().to_string(),
        source,
    })
}

pub fn read_vocabulary(path: &Path, kind: LabelKind) -> Result<LabelVocabulary, DatasetError> {
    let text = read_text(path)?;
    let entries: Vec<VocabEntry> =
        serde_json::from_str(&text).map_err(|source| DatasetError::Json {
            path: path.display().to_string(),
            source,
        })?;
    Ok(LabelVocabulary { kind, entries })
}

pub fn write_vocabulary(path: &Path, vocab: &LabelVocabulary) -> Result<(), DatasetError> {
    let text = serde_json::to_string_pretty(&vocab.entries).expect("vocabulary serializes");
    write_text(path, &(text + "\n"))
}

/// Parses a segment table. Rows that fail to parse are returned separately as
/// `(line number, message)` so validation can report all of them.
pub(crate) fn parse_segments_lenient(
    text: &str,
) -> Result<(Vec<(usize, SegmentRecord)>, Vec<(usize, String)>), String> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim_end_matches('\r') == SEGMENT_HEADER => {}
        Some((_, header)) => return Err(format!("unexpected header `{header}`")),
        None => return Err("empty segment table".into()),
    }
    let mut rows = Vec::new();
    let mut bad = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        match parse_segment_row(line) {
            Ok(seg) => rows.push((line_no, seg)),
            Err(msg) => bad.push((line_no, msg)),
        }
    }
    Ok((rows, bad))
}

fn parse_segment_row(line: &str) -> Result<SegmentRecord, String> {
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() != 7 {
        return Err(format!("expected 7 tab-separated fields, found {}", fields.len()));
    }
    let int = |name: &str, s: &str| -> Result<u64, String> {
        s.parse::<u64>()
            .map_err(|_| format!("field `{name}` is not a non-negative integer: `{s}`"))
    };
    let tone = if fields[4].is_empty() {
        None
    } else {
        Some(int("tone", fields[4])? as u32)
    };
    Ok(SegmentRecord {
        utterance_id: fields[0].to_string(),
        start_frame: int("start_frame", fields[1])? as usize,
        end_frame: int("end_frame", fields[2])? as usize,
        phone: int("phone", fields[3])? as u32,
        tone,
        speaker: int("speaker", fields[5])? as u32,
        syllable_role: fields[6].parse()?,
    })
}

/// Strict segment-table parser: the first malformed row is an error.
pub fn parse_segments(text: &str, path: &Path) -> Result<Vec<SegmentRecord>, DatasetError> {
    let (rows, bad) = parse_segments_lenient(text).map_err(|message| DatasetError::Parse {
        path: path.display().to_string(),
        line: 1,
        message,
    })?;
    if let Some((line, message)) = bad.into_iter().next() {
        return Err(DatasetError::Parse {
            path: path.display().to_string(),
            line,
            message,
        });
    }
    Ok(rows.into_iter().map(|(_, s)| s).collect())
}

pub fn segments_to_tsv(segments: &[SegmentRecord]) -> String {
    let mut out = String::with_capacity(32 * (segments.len() + 1));
    out.push_str(SEGMENT_HEADER);
    out.push('\n');
    for s in segments {
        let tone = s.tone.map(|t| t.to_string()).unwrap_or_default();
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            s.utterance_id, s.start_frame, s.end_frame, s.phone, tone, s.speaker, s.syllable_role
        ));
    }
    out
}

/// Writes `manifest.json`, the segment table and vocabularies into `dir`
/// using the file names recorded in `manifest.label_files`.
pub fn write_dataset_sidecars(
    dir: &Path,
    manifest: &DatasetManifest,
    phones: &LabelVocabulary,
    speakers: &LabelVocabulary,
    tones: Option<&LabelVocabulary>,
    segments: &[SegmentRecord],
) -> Result<(), DatasetError> {
    fs::create_dir_all(dir).map_err(|source| DatasetError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    let files = &manifest.label_files;
    let manifest_json = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    write_text(&dir.join(MANIFEST_FILE), &(manifest_json + "\n"))?;
    write_vocabulary(&dir.join(&files.phones), phones)?;
    write_vocabulary(&dir.join(&files.speakers), speakers)?;
    if let (Some(name), Some(vocab)) = (&files.tones, tones) {
        write_vocabulary(&dir.join(name), vocab)?;
    }
    write_text(&dir.join(&files.segments), &segments_to_tsv(segments))
}

/// Converts aligner timestamps (seconds) to a frame span. Boundaries are
/// rounded to the nearest frame edge with exact ties going to the earlier
/// edge. Spans that collapse to zero frames yield `None`.
pub fn frames_from_times(start_s: f64, end_s: f64, frame_ms: u32) -> Option<(usize, usize)> {
    let frame_us = u64::from(frame_ms) * 1000;
    let to_frame = |t: f64| -> usize {
        let us = (t.max(0.0) * 1e6).round() as u64;
        let (q, r) = (us / frame_us, us % frame_us);
        if 2 * r > frame_us {
            (q + 1) as usize
        } else {
            q as usize
        }
    };
    let (start, end) = (to_frame(start_s), to_frame(end_s));
    if end <= start {
        log::warn!(
            "segment [{start_s:.3}s, {end_s:.3}s) spans zero frames at {frame_ms} ms; dropped"
        );
        return None;
    }
    Some((start, end))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::SyllableRole;

    fn sample() -> Vec<SegmentRecord> {
        vec![
            SegmentRecord {
                utterance_id: "u0".into(),
                start_frame: 0,
                end_frame: 3,
                phone: 1,
                tone: Some(2),
                speaker: 0,
                syllable_role: SyllableRole::Nucleus,
            },
            SegmentRecord {
                utterance_id: "u0".into(),
                start_frame: 3,
                end_frame: 5,
                phone: 0,
                tone: None,
                speaker: 0,
                syllable_role: SyllableRole::None,
            },
        ]
    }

    #[test]
    fn segment_table_roundtrip() {
        let text = segments_to_tsv(&sample());
        assert!(text.starts_with(SEGMENT_HEADER));
        assert!(text.contains("u0\t3\t5\t0\t\t0\tnone\n"));
        let back = parse_segments(&text, Path::new("segments.tsv")).unwrap();
        assert_eq!(back, sample());
    }

    #[test]
    fn bad_rows_report_line_numbers() {
        let mut text = segments_to_tsv(&sample());
        text.push_str("u1\tx\t2\t0\t\t0\tonset\n");
        let err = parse_segments(&text, Path::new("seg.tsv")).unwrap_err();
        assert!(err.to_string().contains("line 4"), "{err}");
        assert!(err.to_string().contains("start_frame"));
    }

    #[test]
    fn wrong_header_is_rejected() {
        let err = parse_segments("a\tb\n", Path::new("s.tsv")).unwrap_err();
        assert!(matches!(err, DatasetError::Parse { line: 1, .. }));
    }

    #[test]
    fn frame_rounding_ties_go_earlier() {
        // 30 ms is exactly halfway between frame edges 1 (20 ms) and 2 (40 ms)
        assert_eq!(frames_from_times(0.030, 0.100, 20), Some((1, 5)));
        assert_eq!(frames_from_times(0.031, 0.089, 20), Some((2, 4)));
        assert_eq!(frames_from_times(0.0, 1.0, 20), Some((0, 50)));
    }

    #[test]
    fn sub_frame_segments_are_dropped() {
        assert_eq!(frames_from_times(0.041, 0.049, 20), None);
        assert_eq!(frames_from_times(0.050, 0.050, 20), None);
    }
}
