//! Class-centroid subspaces and cumulative residual variance (CRV).
//!
//! A factor's subspace is spanned by the principal directions of its
//! centered class-centroid matrix. `CRV(X|Y)` is the fraction of X's
//! variance that survives projecting out span(Y):
//!
//! ```text
//! CRV(X|Y) = Σ_i λ_i ‖(I − Σ_j w_j w_jᵀ) u_i‖² / Σ_i λ_i
//! ```
//!
//! with `u_i`, `λ_i` the directions and variances of X and `w_j` the
//! directions of Y. It is 1 for orthogonal subspaces and approaches 0 when
//! X's dominant directions lie inside span(Y).

mod centroid;
mod crv;
mod subspace;
mod sweep;

use thiserror::Error;

use crate::dataset::LabelKind;

pub use centroid::{class_centroids, class_centroids_present, CentroidMatrix};
pub use crv::crv;
pub use subspace::{fit_subspace, fit_subspace_rows, Subspace, RANK_TOLERANCE};
pub use sweep::{crv_sweep, layer_subspace, CrvPair, CrvReport, SubspaceSizes, ALL_PAIRS};

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("class {0} has no samples")]
    EmptyClass(usize),
    #[error("need at least two classes for a centroid subspace, got {0}")]
    TooFewClasses(usize),
    #[error("requested zero principal components")]
    ZeroComponents,
    #[error("all centroids coincide; the subspace has rank 0")]
    RankZero,
    #[error("ambient dimensions differ: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("subspace X carries no variance")]
    ZeroVariance,
    #[error("pair CRV({x}|{y}) needs tone labels, which dataset `{dataset}` lacks")]
    UnsupportedPair {
        x: LabelKind,
        y: LabelKind,
        dataset: String,
    },
}
