use super::{GeometryError, Subspace};

/// Cumulative residual variance of `x` after projecting out span(`y`).
pub fn crv(x: &Subspace, y: &Subspace) -> Result<f64, GeometryError> {
    if x.dim() != y.dim() {
        return Err(GeometryError::DimensionMismatch(x.dim(), y.dim()));
    }
    let total = x.total_variance();
    if !(total > 0.0) {
        return Err(GeometryError::ZeroVariance);
    }
    // overlaps[i][j] = u_i · w_j
    let overlaps = &x.basis * y.basis.transpose();
    let kept: f64 = x
        .variances
        .iter()
        .enumerate()
        .map(|(i, &lambda)| {
            let norm = x.basis.row(i).norm_squared();
            let inside = overlaps.row(i).norm_squared();
            lambda * (norm - inside).max(0.0)
        })
        .sum();
    Ok((kept / total).clamp(0.0, 1.0))
}
