use serde::Serialize;
use statrs::function::gamma::ln_gamma;

use super::{ContingencyTable, InfoError};

/// Mutual information, expected mutual information under the fixed-margin
/// permutation model, both marginal entropies, and the adjusted score
/// `(mi − emi) / (mean(h_row, h_col) − emi)`. All in nats.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AmiReport {
    pub mi: f64,
    pub emi: f64,
    pub h_row: f64,
    pub h_col: f64,
    pub ami: f64,
}

/// Shannon entropy (nats) of a count vector; zero counts contribute nothing.
pub fn entropy(counts: &[u64]) -> f64 {
    let n: u64 = counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    -counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            p * p.ln()
        })
        .sum::<f64>()
}

pub fn mutual_information(table: &ContingencyTable) -> f64 {
    let n = u128::from(table.total());
    let (a, b) = (table.row_margins(), table.col_margins());
    let mut mi = 0.0;
    for (i, row) in table.counts().iter().enumerate() {
        for (j, &nij) in row.iter().enumerate() {
            if nij == 0 {
                continue;
            }
            // exact integer products so that independent cells give ln(1) = 0
            let num = n * u128::from(nij);
            let den = u128::from(a[i]) * u128::from(b[j]);
            mi += (nij as f64 / n as f64) * (num as f64 / den as f64).ln();
        }
    }
    mi.max(0.0)
}

/// `ln(k!)` for `k = 0..=n`.
fn ln_factorials(n: u64) -> Vec<f64> {
    (0..=n).map(|k| ln_gamma(k as f64 + 1.0)).collect()
}

/// E[MI] over all tables with the given margins, each weighted by its
/// hypergeometric probability. Evaluated cell by cell over the feasible
/// range of each count, in log-gamma arithmetic.
pub fn expected_mi(row_margins: &[u64], col_margins: &[u64], n: u64) -> Result<f64, InfoError> {
    let rows: u64 = row_margins.iter().sum();
    let cols: u64 = col_margins.iter().sum();
    if rows != n || cols != n {
        return Err(InfoError::InconsistentMargins { rows, cols, n });
    }
    if n == 0 {
        return Err(InfoError::EmptyTable);
    }
    let lf = ln_factorials(n);
    let nf = n as f64;
    let ln_n = nf.ln();
    let mut emi = 0.0;
    for &ai in row_margins.iter().filter(|&&a| a > 0) {
        for &bj in col_margins.iter().filter(|&&b| b > 0) {
            let lo = (ai + bj).saturating_sub(n).max(1);
            let hi = ai.min(bj);
            let fixed = lf[ai as usize] + lf[bj as usize] + lf[(n - ai) as usize]
                + lf[(n - bj) as usize]
                - lf[n as usize];
            let ln_ab = (ai as f64).ln() + (bj as f64).ln();
            for nij in lo..=hi {
                let log_p = fixed
                    - lf[nij as usize]
                    - lf[(ai - nij) as usize]
                    - lf[(bj - nij) as usize]
                    - lf[(n + nij - ai - bj) as usize];
                let x = nij as f64;
                emi += (x / nf) * (ln_n + x.ln() - ln_ab) * log_p.exp();
            }
        }
    }
    Ok(emi)
}

/// Adjusted mutual information with the arithmetic-mean entropy normalizer.
/// If either labeling has a single occupied class the score is 0.
pub fn adjusted_mi(table: &ContingencyTable) -> Result<AmiReport, InfoError> {
    let h_row = entropy(table.row_margins());
    let h_col = entropy(table.col_margins());
    let mi = mutual_information(table);
    let emi = expected_mi(table.row_margins(), table.col_margins(), table.total())?;
    let occupied = |m: &[u64]| m.iter().filter(|&&c| c > 0).count();
    let denominator = 0.5 * (h_row + h_col) - emi;
    let ami = if occupied(table.row_margins()) < 2
        || occupied(table.col_margins()) < 2
        || denominator.abs() < f64::EPSILON
    {
        0.0
    } else {
        (mi - emi) / denominator
    };
    Ok(AmiReport {
        mi,
        emi,
        h_row,
        h_col,
        ami,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn product_table_has_zero_mi() {
        let t = ContingencyTable::from_counts(vec![vec![2, 4, 6], vec![3, 6, 9]]).unwrap();
        assert_eq!(mutual_information(&t), 0.0);
    }

    #[test]
    fn diagonal_table_has_ln2_mi() {
        let t = ContingencyTable::from_counts(vec![vec![3, 0], vec![0, 3]]).unwrap();
        assert!((mutual_information(&t) - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn single_row_has_zero_emi() {
        assert_eq!(expected_mi(&[10], &[3, 3, 4], 10).unwrap(), 0.0);
    }

    #[test]
    fn inconsistent_margins_are_rejected() {
        assert!(matches!(
            expected_mi(&[3, 3], &[3, 2], 6),
            Err(InfoError::InconsistentMargins { .. })
        ));
    }

    #[test]
    fn identical_labelings_score_one() {
        let u: Vec<usize> = (0..50).map(|i| i % 4).collect();
        let t = ContingencyTable::from_labelings(&u, &u).unwrap();
        let r = adjusted_mi(&t).unwrap();
        assert!((r.ami - 1.0).abs() < 1e-9, "{}", r.ami);
    }

    #[test]
    fn single_class_labeling_scores_zero() {
        let u = vec![0usize; 20];
        let v: Vec<usize> = (0..20).map(|i| i % 3).collect();
        assert_eq!(adjusted_mi(&ContingencyTable::from_labelings(&u, &v).unwrap()).unwrap().ami, 0.0);
        assert_eq!(adjusted_mi(&ContingencyTable::from_labelings(&u, &u).unwrap()).unwrap().ami, 0.0);
    }

    #[test]
    fn matches_reference_values() {
        // label vectors from a well-known clustering example; reference MI and
        // AMI (arithmetic normalizer) computed independently with scikit-learn
        let a = [0usize, 0, 0, 1, 1, 1, 2, 2, 2, 2];
        let b = [0usize, 0, 1, 1, 2, 2, 2, 0, 1, 2];
        let t = ContingencyTable::from_labelings(&a, &b).unwrap();
        let r = adjusted_mi(&t).unwrap();
        assert!((r.mi - 0.291_103_166_032_368_85).abs() < 1e-12, "{}", r.mi);
        assert!((r.ami - (-0.002_712_434_598_785_944_6)).abs() < 1e-9, "{}", r.ami);
    }

    fn random_labels(seed_: u64, n: usize, k: usize) -> Vec<usize> {
        let mut rng = seed::rng(seed_);
        (0..n).map(|_| rng.random_range(0..k)).collect()
    }

    proptest! {
        #[test]
        fn mi_bounded_by_entropies(seed_ in 0u64..100_000, n in 2usize..200, k in 1usize..6, l in 1usize..6) {
            let t = ContingencyTable::from_labelings(&random_labels(seed_, n, k), &random_labels(seed_ + 1, n, l)).unwrap();
            let mi = mutual_information(&t);
            let bound = entropy(t.row_margins()).min(entropy(t.col_margins()));
            prop_assert!(mi >= 0.0);
            prop_assert!(mi <= bound + 1e-12);
        }

        #[test]
        fn emi_within_bounds(seed_ in 0u64..100_000, n in 2usize..300, k in 1usize..8, l in 1usize..8) {
            let t = ContingencyTable::from_labelings(&random_labels(seed_, n, k), &random_labels(seed_ + 7, n, l)).unwrap();
            let emi = expected_mi(t.row_margins(), t.col_margins(), t.total()).unwrap();
            let mean_h = 0.5 * (entropy(t.row_margins()) + entropy(t.col_margins()));
            prop_assert!(emi >= -1e-12);
            prop_assert!(emi <= mean_h + 1e-12);
        }

        #[test]
        fn ami_is_symmetric_and_permutation_invariant(seed_ in 0u64..100_000, n in 4usize..150) {
            let u = random_labels(seed_, n, 4);
            let v = random_labels(seed_ + 3, n, 3);
            let a = adjusted_mi(&ContingencyTable::from_labelings(&u, &v).unwrap()).unwrap().ami;
            let b = adjusted_mi(&ContingencyTable::from_labelings(&v, &u).unwrap()).unwrap().ami;
            prop_assert!((a - b).abs() < 1e-12);
            let renamed: Vec<usize> = u.iter().map(|&x| 3 - x).collect();
            let c = adjusted_mi(&ContingencyTable::from_labelings(&renamed, &v).unwrap()).unwrap().ami;
            prop_assert!((a - c).abs() < 1e-12);
        }
    }
}
