use nalgebra::{DMatrix, SymmetricEigen};

use super::{CentroidMatrix, GeometryError};

/// Singular values below this fraction of the largest are treated as zero.
/// Set above single-precision storage noise so that quantization of the
/// input matrices does not surface as spurious directions.
pub const RANK_TOLERANCE: f64 = 1e-6;

/// Principal directions of a centered centroid matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Subspace {
    /// `k × d`, orthonormal rows, ordered by decreasing variance.
    pub basis: DMatrix<f64>,
    /// Variance along each basis row (sample covariance eigenvalues).
    pub variances: Vec<f64>,
    /// Numerical rank of the centered matrix.
    pub source_rank: usize,
}

impl Subspace {
    pub fn k(&self) -> usize {
        self.basis.nrows()
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn total_variance(&self) -> f64 {
        self.variances.iter().sum()
    }
}

pub fn fit_subspace(centroids: &CentroidMatrix, k: usize) -> Result<Subspace, GeometryError> {
    fit_subspace_rows(&centroids.centroids, k)
}

/// PCA of the rows of `rows`: center by the row mean, take the principal
/// directions. Returns `min(k, n−1, d, rank)` directions; each
/// direction's largest-magnitude coordinate is made positive.
pub fn fit_subspace_rows(rows: &DMatrix<f64>, k: usize) -> Result<Subspace, GeometryError> {
    let (n, d) = rows.shape();
    if n < 2 {
        return Err(GeometryError::TooFewClasses(n));
    }
    if k == 0 {
        return Err(GeometryError::ZeroComponents);
    }
    let mean = rows.row_mean();
    let mut centered = rows.clone();
    for mut r in centered.row_iter_mut() {
        r -= &mean;
    }

    // nalgebra's SVD is not reliably accurate here, so eigendecompose the
    // smaller of the two Gram matrices and map back to directions in R^d
    let (singular_values, v_t) = if n > d {
        let eig = SymmetricEigen::new(centered.transpose() * &centered);
        let s: Vec<f64> = eig.eigenvalues.iter().map(|&m| m.max(0.0).sqrt()).collect();
        (s, eig.eigenvectors.transpose())
    } else {
        let eig = SymmetricEigen::new(&centered * centered.transpose());
        let s: Vec<f64> = eig.eigenvalues.iter().map(|&m| m.max(0.0).sqrt()).collect();
        let mut dirs = eig.eigenvectors.transpose() * &centered;
        for mut r in dirs.row_iter_mut() {
            let norm = r.norm();
            if norm > 0.0 {
                r /= norm;
            }
        }
        (s, dirs)
    };
    let mut order: Vec<usize> = (0..singular_values.len()).collect();
    order.sort_by(|&a, &b| singular_values[b].total_cmp(&singular_values[a]));

    let s_max = order.first().map_or(0.0, |&i| singular_values[i]);
    if !(s_max > 0.0) {
        return Err(GeometryError::RankZero);
    }
    let rank = order
        .iter()
        .take_while(|&&i| singular_values[i] > s_max * RANK_TOLERANCE)
        .count();
    let keep = k.min(n - 1).min(d).min(rank);

    let mut basis = DMatrix::<f64>::zeros(keep, d);
    let mut variances = Vec::with_capacity(keep);
    for (row, &i) in order.iter().take(keep).enumerate() {
        let mut dir: Vec<f64> = v_t.row(i).iter().copied().collect();
        let pivot = dir
            .iter()
            .enumerate()
            .fold(0, |best, (j, v)| if v.abs() > dir[best].abs() { j } else { best });
        if dir[pivot] < 0.0 {
            dir.iter_mut().for_each(|v| *v = -*v);
        }
        basis.row_mut(row).copy_from_slice(&dir);
        let s = singular_values[i];
        variances.push(s * s / (n - 1) as f64);
    }
    Ok(Subspace {
        basis,
        variances,
        source_rank: rank,
    })
}
