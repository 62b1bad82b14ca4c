use serde::Serialize;

use super::InfoError;
use crate::dataset::{LabelFilter, SegmentRecord, SyllableRole};

/// Co-occurrence counts of two labelings; rows are tones, columns phones
/// when built from segments.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ContingencyTable {
    counts: Vec<Vec<u64>>,
    row_margins: Vec<u64>,
    col_margins: Vec<u64>,
    n: u64,
    /// Vocabulary ids of rows and columns.
    pub row_ids: Vec<u32>,
    pub col_ids: Vec<u32>,
    pub role: Option<SyllableRole>,
}

impl ContingencyTable {
    pub fn from_counts(counts: Vec<Vec<u64>>) -> Result<Self, InfoError> {
        let cols = counts.first().map_or(0, Vec::len);
        if counts.is_empty() || cols == 0 || counts.iter().any(|r| r.len() != cols) {
            return Err(InfoError::EmptyTable);
        }
        let row_margins: Vec<u64> = counts.iter().map(|r| r.iter().sum()).collect();
        let col_margins: Vec<u64> = (0..cols).map(|j| counts.iter().map(|r| r[j]).sum()).collect();
        let n = row_margins.iter().sum();
        if n == 0 {
            return Err(InfoError::EmptyTable);
        }
        Ok(Self {
            row_ids: (0..counts.len() as u32).collect(),
            col_ids: (0..cols as u32).collect(),
            counts,
            row_margins,
            col_margins,
            n,
            role: None,
        })
    }

    /// Table of two equally long labelings `u` (rows) and `v` (columns).
    pub fn from_labelings(u: &[usize], v: &[usize]) -> Result<Self, InfoError> {
        if u.len() != v.len() {
            return Err(InfoError::LengthMismatch(u.len(), v.len()));
        }
        let rows = u.iter().max().map_or(0, |m| m + 1);
        let cols = v.iter().max().map_or(0, |m| m + 1);
        let mut counts = vec![vec![0u64; cols]; rows];
        for (&a, &b) in u.iter().zip(v) {
            counts[a][b] += 1;
        }
        Self::from_counts(counts)
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn row_margins(&self) -> &[u64] {
        &self.row_margins
    }

    pub fn col_margins(&self) -> &[u64] {
        &self.col_margins
    }

    pub fn total(&self) -> u64 {
        self.n
    }

    pub fn transpose(&self) -> Self {
        let cols = self.counts.len();
        let counts: Vec<Vec<u64>> = (0..self.col_margins.len())
            .map(|j| (0..cols).map(|i| self.counts[i][j]).collect())
            .collect();
        Self {
            counts,
            row_margins: self.col_margins.clone(),
            col_margins: self.row_margins.clone(),
            n: self.n,
            row_ids: self.col_ids.clone(),
            col_ids: self.row_ids.clone(),
            role: self.role,
        }
    }
}

/// Tone × phone counts over segments with the given syllable role. Only
/// segments whose tone and phone both survive `filter` are counted.
pub fn build_contingency(
    segments: &[SegmentRecord],
    role: SyllableRole,
    filter: &LabelFilter,
) -> Result<ContingencyTable, InfoError> {
    let no_tones = || InfoError::NoQualifyingSegments(role.to_string());
    let tones = filter.tones.as_ref().ok_or_else(no_tones)?;
    let phones = &filter.phones;
    let mut counts = vec![vec![0u64; phones.class_count()]; tones.class_count()];
    let mut total = 0u64;
    for s in segments.iter().filter(|s| s.syllable_role == role) {
        let Some(tone) = s.tone else { continue };
        if let (Some(r), Some(c)) = (tones.dense_index(tone), phones.dense_index(s.phone)) {
            counts[r][c] += 1;
            total += 1;
        }
    }
    if total == 0 {
        return Err(no_tones());
    }
    let mut table = ContingencyTable::from_counts(counts)?;
    table.row_ids = tones.labels();
    table.col_ids = phones.labels();
    table.role = Some(role);
    Ok(table)
}
