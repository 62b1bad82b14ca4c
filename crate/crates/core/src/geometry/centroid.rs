use nalgebra::DMatrix;

use super::GeometryError;
use crate::aggregation::{PooledSample, SampleSet};
use crate::dataset::RetainedLabels;

/// One row per class: the mean of that class's pooled vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct CentroidMatrix {
    pub centroids: DMatrix<f64>,
    /// Vocabulary id (or dense class id) of each row.
    pub class_ids: Vec<u32>,
    pub counts: Vec<usize>,
}

impl CentroidMatrix {
    pub fn n_classes(&self) -> usize {
        self.centroids.nrows()
    }

    pub fn dim(&self) -> usize {
        self.centroids.ncols()
    }
}

/// Per-class means over dense labels `0..class_count`; every class must occur.
pub fn class_centroids(samples: &SampleSet) -> Result<CentroidMatrix, GeometryError> {
    let (c, d) = (samples.class_count(), samples.dim());
    let mut sums = DMatrix::<f64>::zeros(c, d);
    let mut counts = vec![0usize; c];
    for i in 0..samples.len() {
        let k = samples.label(i);
        counts[k] += 1;
        for (j, &v) in samples.row(i).iter().enumerate() {
            sums[(k, j)] += v;
        }
    }
    if let Some(k) = counts.iter().position(|&n| n == 0) {
        return Err(GeometryError::EmptyClass(k));
    }
    for (k, &n) in counts.iter().enumerate() {
        let inv = n as f64;
        sums.row_mut(k).iter_mut().for_each(|v| *v /= inv);
    }
    Ok(CentroidMatrix {
        centroids: sums,
        class_ids: (0..c as u32).collect(),
        counts,
    })
}

/// Centroids for the retained classes that actually occur in `samples`.
/// Absent classes are skipped with a warning.
pub fn class_centroids_present(
    samples: &[PooledSample],
    classes: &RetainedLabels,
) -> Result<CentroidMatrix, GeometryError> {
    let d = samples.first().map_or(0, |s| s.vector.len());
    let mut sums = vec![vec![0.0f64; d]; classes.class_count()];
    let mut counts = vec![0usize; classes.class_count()];
    for s in samples {
        if let Some(k) = classes.dense_index(s.label) {
            counts[k] += 1;
            for (a, v) in sums[k].iter_mut().zip(&s.vector) {
                *a += v;
            }
        }
    }
    let labels = classes.labels();
    let mut rows = Vec::new();
    let mut class_ids = Vec::new();
    let mut kept = Vec::new();
    for (k, (sum, n)) in sums.into_iter().zip(counts).enumerate() {
        if n == 0 {
            log::warn!("{} class {} has no samples; left out of the centroid matrix", classes.kind, labels[k]);
            continue;
        }
        rows.extend(sum.into_iter().map(|v| v / n as f64));
        class_ids.push(labels[k]);
        kept.push(n);
    }
    if class_ids.len() < 2 {
        return Err(GeometryError::TooFewClasses(class_ids.len()));
    }
    Ok(CentroidMatrix {
        centroids: DMatrix::from_row_slice(class_ids.len(), d, &rows),
        class_ids,
        counts: kept,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn singleton_classes_are_their_own_centroid() {
        let rows = vec![vec![1.0, 2.0], vec![-3.0, 0.5], vec![4.0, 4.0]];
        let set = SampleSet::from_rows(&rows, &[2, 0, 1], 3).unwrap();
        let c = class_centroids(&set).unwrap();
        assert_eq!(c.centroids.row(0).iter().copied().collect::<Vec<_>>(), rows[1]);
        assert_eq!(c.centroids.row(1).iter().copied().collect::<Vec<_>>(), rows[2]);
        assert_eq!(c.centroids.row(2).iter().copied().collect::<Vec<_>>(), rows[0]);
        assert_eq!(c.counts, vec![1, 1, 1]);
    }

    #[test]
    fn opposite_samples_cancel() {
        let rows = vec![vec![1.5, -2.0, 7.0], vec![-1.5, 2.0, -7.0], vec![1.0, 1.0, 1.0]];
        let set = SampleSet::from_rows(&rows, &[0, 0, 1], 2).unwrap();
        let c = class_centroids(&set).unwrap();
        assert!(c.centroids.row(0).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn empty_class_is_named() {
        let set = SampleSet::from_rows(&[vec![1.0]], &[0], 3).unwrap();
        assert!(matches!(class_centroids(&set), Err(GeometryError::EmptyClass(1))));
    }
}
