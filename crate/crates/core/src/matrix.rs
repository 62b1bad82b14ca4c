//! Binary container for per-utterance, per-layer frame embeddings.
//!
//! Layout (little-endian):
//!
//! | offset | size | field                         |
//! |--------|------|-------------------------------|
//! | 0      | 4    | magic `b"SSLM"`               |
//! | 4      | 2    | version (`u16`, currently 1)  |
//! | 6      | 1    | dtype (`u8`, 0 = `f32`)       |
//! | 7      | 1    | flags (`u8`, must be 0)       |
//! | 8      | 8    | rows (`u64`)                  |
//! | 16     | 8    | cols (`u64`)                  |
//! | 24     | 4·rows·cols | values, row-major      |

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

pub const MAGIC: [u8; 4] = *b"SSLM";
pub const VERSION: u16 = 1;
pub const DTYPE_F32: u8 = 0;
pub const HEADER_LEN: usize = 24;

#[derive(Debug, Error)]
pub enum MatrixError {
    #[error("not an embedding matrix (bad magic {found:02x?})")]
    BadMagic { found: [u8; 4] },
    #[error("unsupported container version {0}")]
    UnsupportedVersion(u16),
    #[error("unsupported dtype code {0}")]
    UnsupportedDtype(u8),
    #[error("unsupported flags {0:#04x}")]
    UnsupportedFlags(u8),
    #[error("truncated header: expected {expected} bytes, got {actual}")]
    TruncatedHeader { expected: usize, actual: usize },
    #[error("payload length mismatch: expected {expected} bytes, got {actual}")]
    LengthMismatch { expected: u64, actual: u64 },
    #[error("non-finite value at row {row}, col {col}")]
    NonFinite { row: usize, col: usize },
    #[error("shape {rows}x{cols} does not match {len} values")]
    Shape { rows: usize, cols: usize, len: usize },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error(transparent)]
    Stream(#[from] io::Error),
}

/// A `rows × cols` row-major matrix of frame embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f32>,
}

/// Shape as declared by a container header.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MatrixHeader {
    pub rows: u64,
    pub cols: u64,
}

impl MatrixHeader {
    pub fn payload_len(&self) -> u64 {
        self.rows * self.cols * 4
    }
}

impl FrameMatrix {
    pub fn new(rows: usize, cols: usize, values: Vec<f32>) -> Result<Self, MatrixError> {
        if values.len() != rows * cols {
            return Err(MatrixError::Shape {
                rows,
                cols,
                len: values.len(),
            });
        }
        Ok(Self { rows, cols, values })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            values: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f32>]) -> Result<Self, MatrixError> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut values = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(MatrixError::Shape {
                    rows: rows.len(),
                    cols,
                    len: values.len() + r.len(),
                });
            }
            values.extend_from_slice(r);
        }
        Self::new(rows.len(), cols, values)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f32]> {
        // chunks_exact panics on zero chunk size
        let cols = self.cols.max(1);
        self.values.chunks_exact(cols).take(self.rows)
    }

    /// First non-finite entry, if any.
    pub fn find_non_finite(&self) -> Option<(usize, usize)> {
        self.values
            .iter()
            .position(|v| !v.is_finite())
            .map(|i| (i / self.cols, i % self.cols))
    }
}

/// Serializes `matrix` and returns the number of bytes written.
pub fn write_matrix<W: Write>(matrix: &FrameMatrix, mut sink: W) -> Result<u64, MatrixError> {
    if let Some((row, col)) = matrix.find_non_finite() {
        return Err(MatrixError::NonFinite { row, col });
    }
    let mut header = [0u8; HEADER_LEN];
    header[0..4].copy_from_slice(&MAGIC);
    header[4..6].copy_from_slice(&VERSION.to_le_bytes());
    header[6] = DTYPE_F32;
    header[7] = 0;
    header[8..16].copy_from_slice(&(matrix.rows as u64).to_le_bytes());
    header[16..24].copy_from_slice(&(matrix.cols as u64).to_le_bytes());
    sink.write_all(&header)?;

    let mut payload = Vec::with_capacity(matrix.values.len() * 4);
    for v in &matrix.values {
        payload.extend_from_slice(&v.to_le_bytes());
    }
    sink.write_all(&payload)?;
    sink.flush()?;
    Ok((HEADER_LEN + payload.len()) as u64)
}

/// Reads and checks only the fixed-size header.
pub fn read_header<R: Read>(source: &mut R) -> Result<MatrixHeader, MatrixError> {
    let mut header = [0u8; HEADER_LEN];
    let got = read_up_to(source, &mut header)?;
    if got < 4 || header[0..4] != MAGIC {
        let mut found = [0u8; 4];
        found[..got.min(4)].copy_from_slice(&header[..got.min(4)]);
        return Err(MatrixError::BadMagic { found });
    }
    if got < HEADER_LEN {
        return Err(MatrixError::TruncatedHeader {
            expected: HEADER_LEN,
            actual: got,
        });
    }
    let version = u16::from_le_bytes([header[4], header[5]]);
    if version != VERSION {
        return Err(MatrixError::UnsupportedVersion(version));
    }
    if header[6] != DTYPE_F32 {
        return Err(MatrixError::UnsupportedDtype(header[6]));
    }
    if header[7] != 0 {
        return Err(MatrixError::UnsupportedFlags(header[7]));
    }
    let rows = u64::from_le_bytes(header[8..16].try_into().unwrap());
    let cols = u64::from_le_bytes(header[16..24].try_into().unwrap());
    Ok(MatrixHeader { rows, cols })
}

pub fn read_matrix<R: Read>(mut source: R) -> Result<FrameMatrix, MatrixError> {
    let header = read_header(&mut source)?;
    let expected = header
        .rows
        .checked_mul(header.cols)
        .and_then(|n| n.checked_mul(4))
        .ok_or(MatrixError::LengthMismatch {
            expected: u64::MAX,
            actual: 0,
        })?;

    let mut payload = Vec::new();
    source.read_to_end(&mut payload)?;
    if payload.len() as u64 != expected {
        return Err(MatrixError::LengthMismatch {
            expected,
            actual: payload.len() as u64,
        });
    }
    let values = payload
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect();
    Ok(FrameMatrix {
        rows: header.rows as usize,
        cols: header.cols as usize,
        values,
    })
}

pub fn write_matrix_file(matrix: &FrameMatrix, path: &Path) -> Result<u64, MatrixError> {
    let file = File::create(path).map_err(|source| io_err(path, source))?;
    write_matrix(matrix, BufWriter::new(file)).map_err(|e| match e {
        MatrixError::Stream(source) => io_err(path, source),
        other => other,
    })
}

pub fn read_matrix_file(path: &Path) -> Result<FrameMatrix, MatrixError> {
    let file = File::open(path).map_err(|source| io_err(path, source))?;
    read_matrix(BufReader::new(file))
}

/// Header of a matrix file together with the payload length found on disk.
pub fn inspect_matrix_file(path: &Path) -> Result<(MatrixHeader, u64), MatrixError> {
    let mut file = File::open(path).map_err(|source| io_err(path, source))?;
    let len = file
        .metadata()
        .map_err(|source| io_err(path, source))?
        .len();
    let header = read_header(&mut file)?;
    Ok((header, len.saturating_sub(HEADER_LEN as u64)))
}

fn io_err(path: &Path, source: io::Error) -> MatrixError {
    MatrixError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn read_up_to<R: Read>(source: &mut R, buf: &mut [u8]) -> io::Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match source.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(filled)
}
