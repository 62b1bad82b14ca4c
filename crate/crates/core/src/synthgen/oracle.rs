//! Expected metrics of a planted corpus, computed from its truth alone.
//!
//! CRV uses the eigen-decomposition of each factor's class-coordinate
//! covariance mapped through its loading matrix; this matches the measured
//! value exactly for noise-free corpora with a balanced, independent label
//! design. Probe ceilings are Monte Carlo estimates of nearest-centroid
//! accuracy in the factor's own span, which is the Bayes rule when loading
//! spans are mutually orthogonal.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use super::{from_rows, joint_information, PlantedTruth};
use crate::dataset::LabelKind;
use crate::geometry::{CrvPair, SubspaceSizes, ALL_PAIRS};
use crate::seed;

const EIGEN_CUTOFF: f64 = 1e-9;
const CEILING_DRAWS: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleCrv {
    pub pair: CrvPair,
    pub value: f64,
    pub k_x: usize,
    pub k_y: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    pub crv: Vec<OracleCrv>,
    /// Expected probe accuracy per layer.
    pub phone_ceiling: Vec<f64>,
    pub tone_ceiling: Vec<f64>,
    pub speaker_ceiling: Vec<f64>,
    pub expected_mi: Option<f64>,
    /// Large-sample limit of tone/phone AMI.
    pub expected_ami: Option<f64>,
}

struct FactorSpan {
    /// Unit directions in embedding space, one column each, by decreasing variance.
    directions: DMatrix<f64>,
    variances: Vec<f64>,
}

fn factor_span(loadings: &[Vec<f64>], offsets: &[Vec<f64>], k: usize) -> Option<FactorSpan> {
    if loadings.is_empty() || offsets.len() < 2 {
        return None;
    }
    let a = from_rows(loadings);
    let g = from_rows(offsets);
    let n = g.nrows();
    let mean = g.row_mean();
    let mut centered = g.clone();
    for mut row in centered.row_iter_mut() {
        row -= &mean;
    }
    let cov = centered.transpose() * &centered / (n - 1) as f64;
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let top = eig.eigenvalues[order[0]];
    if top <= 0.0 {
        return None;
    }
    let keep: Vec<usize> = order
        .into_iter()
        .filter(|&i| eig.eigenvalues[i] > EIGEN_CUTOFF * top)
        .take(k)
        .collect();
    let v = DMatrix::from_fn(eig.eigenvectors.nrows(), keep.len(), |r, c| eig.eigenvectors[(r, keep[c])]);
    Some(FactorSpan {
        directions: a * v,
        variances: keep.iter().map(|&i| eig.eigenvalues[i]).collect(),
    })
}

fn oracle_crv(x: &FactorSpan, y: &FactorSpan) -> f64 {
    let total: f64 = x.variances.iter().sum();
    let coords = y.directions.transpose() * &x.directions;
    let residual: f64 = x
        .variances
        .iter()
        .enumerate()
        .map(|(i, &lambda)| lambda * (1.0 - coords.column(i).norm_squared()).max(0.0))
        .sum();
    (residual / total).clamp(0.0, 1.0)
}

/// Nearest-centroid accuracy for classes `scale · g_c` under isotropic
/// Gaussian noise with standard deviation `sigma`.
fn nearest_centroid_accuracy(offsets: &[Vec<f64>], scale: f64, sigma: f64, seed_: u64) -> f64 {
    if offsets.is_empty() {
        return 0.0;
    }
    let centers: Vec<DVector<f64>> = offsets
        .iter()
        .map(|g| DVector::from_column_slice(g) * scale)
        .collect();
    let mut rng = seed::rng(seed_);
    let mut correct = 0usize;
    for _ in 0..CEILING_DRAWS {
        let c = seed::index(&mut rng, centers.len());
        let x = &centers[c] + DVector::from_fn(centers[c].len(), |_, _| {
            let z: f64 = StandardNormal.sample(&mut rng);
            sigma * z
        });
        let mut best = (f64::INFINITY, 0);
        for (k, m) in centers.iter().enumerate() {
            let d = (&x - m).norm_squared();
            if d < best.0 {
                best = (d, k);
            }
        }
        correct += usize::from(best.1 == c);
    }
    correct as f64 / CEILING_DRAWS as f64
}

pub fn oracle_report(truth: &PlantedTruth, sizes: SubspaceSizes) -> OracleReport {
    let span = |kind: LabelKind| match kind {
        LabelKind::Phone => factor_span(&truth.phone_loadings, &truth.phone_offsets, sizes.phone),
        LabelKind::Tone => factor_span(&truth.tone_loadings, &truth.tone_offsets, sizes.tone),
        LabelKind::Speaker => factor_span(&truth.speaker_loadings, &truth.speaker_offsets, sizes.speaker),
    };
    let crv = ALL_PAIRS
        .iter()
        .filter_map(|&pair| {
            let (x, y) = (span(pair.x)?, span(pair.y)?);
            Some(OracleCrv {
                pair,
                value: oracle_crv(&x, &y),
                k_x: x.variances.len(),
                k_y: y.variances.len(),
            })
        })
        .collect();

    let c = &truth.config;
    let pooled_sigma = c.noise_sigma / (c.frames_per_segment as f64).sqrt();
    let ceiling = |offsets: &[Vec<f64>], kind: u64, scale: &dyn Fn(f64) -> f64| -> Vec<f64> {
        truth
            .snr_profile
            .iter()
            .enumerate()
            .map(|(l, &snr)| {
                let s = seed::derive_seed(c.seed, &[3, kind, l as u64]);
                nearest_centroid_accuracy(offsets, scale(snr), pooled_sigma, s)
            })
            .collect()
    };
    let info = (!truth.joint_distribution.is_empty()).then(|| joint_information(&truth.joint_distribution));

    OracleReport {
        crv,
        phone_ceiling: ceiling(&truth.phone_offsets, 0, &|snr| snr),
        tone_ceiling: ceiling(&truth.tone_offsets, 1, &|snr| snr),
        speaker_ceiling: ceiling(&truth.speaker_offsets, 2, &|_| c.speaker_scale),
        expected_mi: info.map(|i| i.0),
        expected_ami: info.map(|i| i.1),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthgen::{plan_planted, Alignment, LabelDependence, PlantedConfig};

    fn value(report: &OracleReport, x: LabelKind, y: LabelKind) -> f64 {
        report.crv.iter().find(|c| c.pair == CrvPair::new(x, y)).unwrap().value
    }

    #[test]
    fn orthogonal_factors_have_unit_crv() {
        let truth = plan_planted(&PlantedConfig::default()).unwrap().truth;
        let r = oracle_report(&truth, SubspaceSizes::default());
        assert_eq!(r.crv.len(), 6);
        for c in &r.crv {
            assert!((c.value - 1.0).abs() < 1e-12, "{c:?}");
        }
        assert_eq!(r.expected_ami, Some(0.0));
    }

    #[test]
    fn tone_inside_phone_span_has_zero_crv() {
        let config = PlantedConfig {
            alignment: Alignment {
                phone_tone: 1.0,
                ..Alignment::default()
            },
            ..PlantedConfig::default()
        };
        let r = oracle_report(&plan_planted(&config).unwrap().truth, SubspaceSizes::default());
        assert!(value(&r, LabelKind::Tone, LabelKind::Phone) < 1e-12);
        assert!((value(&r, LabelKind::Tone, LabelKind::Speaker) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn deterministic_labels_have_unit_ami_limit() {
        let config = PlantedConfig {
            phones: 4,
            phone_rank: 3,
            label_dependence: LabelDependence::Deterministic,
            ..PlantedConfig::default()
        };
        let r = oracle_report(&plan_planted(&config).unwrap().truth, SubspaceSizes::default());
        assert!((r.expected_ami.unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn noise_free_ceiling_is_perfect_and_noise_lowers_it() {
        let mut config = PlantedConfig::default();
        let clean = oracle_report(&plan_planted(&config).unwrap().truth, SubspaceSizes::default());
        assert!(clean.phone_ceiling.iter().all(|&a| a == 1.0));
        config.noise_sigma = 3.0;
        let noisy = oracle_report(&plan_planted(&config).unwrap().truth, SubspaceSizes::default());
        assert!(noisy.phone_ceiling[0] < 0.9);
        assert!(noisy.phone_ceiling[0] > 1.0 / 12.0);
    }
}
