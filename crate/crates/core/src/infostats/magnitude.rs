use nalgebra::DMatrix;
use serde::Serialize;

use super::InfoError;

/// Norm statistics over the rows `x_i` of an aggregate matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MagnitudeStats {
    pub n_rows: usize,
    /// Mean of `|x_i|`.
    pub mu_mag: f64,
    /// Sample standard deviation of `|x_i|`; absent for a single row.
    pub sigma_mag: Option<f64>,
    /// `|mean(x_i)|`.
    pub mag_mean: f64,
}

impl MagnitudeStats {
    /// `mag_mean / mu_mag`: near 0 for rows spread on a shell around the
    /// origin, near 1 for a tight cloud away from it.
    pub fn concentration(&self) -> f64 {
        if self.mu_mag > 0.0 {
            self.mag_mean / self.mu_mag
        } else {
            0.0
        }
    }
}

pub fn magnitude_stats(rows: &DMatrix<f64>) -> Result<MagnitudeStats, InfoError> {
    let n = rows.nrows();
    if n == 0 {
        return Err(InfoError::NoRows);
    }
    let norms: Vec<f64> = rows.row_iter().map(|r| r.norm()).collect();
    let all_equal = norms.iter().all(|&v| v == norms[0]);
    let mu_mag = if all_equal {
        norms[0]
    } else {
        norms.iter().sum::<f64>() / n as f64
    };
    let sigma_mag = (n >= 2).then(|| {
        if all_equal {
            0.0
        } else {
            let ss: f64 = norms.iter().map(|v| (v - mu_mag).powi(2)).sum();
            (ss / (n - 1) as f64).sqrt()
        }
    });
    let mag_mean = rows.row_mean().norm();
    Ok(MagnitudeStats {
        n_rows: n,
        mu_mag,
        sigma_mag,
        mag_mean,
    })
}
