//! Tone/phone co-occurrence statistics and representation magnitudes.

mod ami;
mod contingency;
mod magnitude;

use thiserror::Error;

pub use ami::{adjusted_mi, entropy, expected_mi, mutual_information, AmiReport};
pub use contingency::{build_contingency, ContingencyTable};
pub use magnitude::{magnitude_stats, MagnitudeStats};

#[derive(Debug, Error)]
pub enum InfoError {
    #[error("no segments with role `{0}` carry both a retained tone and phone")]
    NoQualifyingSegments(String),
    #[error("contingency table is empty")]
    EmptyTable,
    #[error("margins are inconsistent: rows sum to {rows}, columns to {cols}, n = {n}")]
    InconsistentMargins { rows: u64, cols: u64, n: u64 },
    #[error("labelings differ in length: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("magnitude statistics need at least one row")]
    NoRows,
}
