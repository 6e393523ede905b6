//! Chi-square and z-score helpers.

use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Smallest expected count a cell may have before it is pooled.
pub const MIN_EXPECTED: f64 = 5.0;

/// Upper `alpha` quantile of the chi-square law with `df` degrees of freedom.
pub fn chi_square_critical(df: usize, alpha: f64) -> f64 {
    if df == 0 {
        return 0.0;
    }
    ChiSquared::new(df as f64)
        .expect("positive df")
        .inverse_cdf(1.0 - alpha)
}

/// Goodness of fit of `observed` counts against cell probabilities `probs`.
/// Cells with small expected counts are pooled. An observation in a cell of
/// probability zero gives an infinite statistic. Returns `(statistic, df)`.
pub fn chi_square_gof(observed: &[u64], probs: &[f64]) -> (f64, usize) {
    let n: u64 = observed.iter().sum();
    if n == 0 {
        return (0.0, 0);
    }
    let n = n as f64;
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let mut pooled = (0.0, 0.0);
    for (&o, &p) in observed.iter().zip(probs) {
        if p <= 0.0 {
            if o > 0 {
                return (f64::INFINITY, 0);
            }
            continue;
        }
        let e = n * p;
        if e < MIN_EXPECTED {
            pooled.0 += o as f64;
            pooled.1 += e;
        } else {
            cells.push((o as f64, e));
        }
    }
    if pooled.1 > 0.0 {
        cells.push(pooled);
    }
    let stat = cells.iter().map(|(o, e)| (o - e) * (o - e) / e).sum();
    (stat, cells.len().saturating_sub(1))
}

/// Homogeneity of the rows of a contingency table (equivalently,
/// independence of row and column classes). Sparse columns are pooled.
/// Returns `(statistic, df)`.
pub fn chi_square_homogeneity(table: &[Vec<u64>]) -> (f64, usize) {
    let rows: Vec<&Vec<u64>> = table.iter().filter(|r| r.iter().sum::<u64>() > 0).collect();
    if rows.len() < 2 {
        return (0.0, 0);
    }
    let width = rows.iter().map(|r| r.len()).max().unwrap_or(0);
    let at = |r: &Vec<u64>, j: usize| r.get(j).copied().unwrap_or(0) as f64;
    let row_tot: Vec<f64> = rows.iter().map(|r| r.iter().sum::<u64>() as f64).collect();
    let total: f64 = row_tot.iter().sum();
    let min_row = row_tot.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut columns: Vec<Vec<f64>> = Vec::new();
    let mut pooled = vec![0.0; rows.len()];
    for j in 0..width {
        let col: Vec<f64> = rows.iter().map(|r| at(r, j)).collect();
        let ct: f64 = col.iter().sum();
        if ct == 0.0 {
            continue;
        }
        if ct * min_row / total < MIN_EXPECTED {
            for (p, c) in pooled.iter_mut().zip(&col) {
                *p += c;
            }
        } else {
            columns.push(col);
        }
    }
    if pooled.iter().sum::<f64>() > 0.0 {
        columns.push(pooled);
    }
    if columns.len() < 2 {
        return (0.0, 0);
    }
    let mut stat = 0.0;
    for col in &columns {
        let ct: f64 = col.iter().sum();
        for (i, &o) in col.iter().enumerate() {
            let e = row_tot[i] * ct / total;
            stat += (o - e) * (o - e) / e;
        }
    }
    (stat, (rows.len() - 1) * (columns.len() - 1))
}

/// z-score of `count` successes out of `n` against probability `p`.
pub fn binomial_z(count: u64, n: u64, p: f64) -> f64 {
    let n = n as f64;
    let diff = count as f64 - n * p;
    let sd = (n * p * (1.0 - p)).sqrt();
    if sd > 0.0 {
        diff / sd
    } else if diff == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Two-sample z-score of the difference of means.
pub fn two_sample_z(mean_a: f64, var_a: f64, n_a: u64, mean_b: f64, var_b: f64, n_b: u64) -> f64 {
    let se = (var_a / n_a as f64 + var_b / n_b as f64).sqrt();
    let diff = mean_a - mean_b;
    if se > 0.0 {
        diff / se
    } else if diff == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn critical_values() {
        assert!((chi_square_critical(1, 0.05) - 3.841).abs() < 1e-3);
        assert!((chi_square_critical(2, 1e-3) - 13.816).abs() < 1e-3);
    }

    #[test]
    fn gof_examples() {
        let (s, df) = chi_square_gof(&[50, 50], &[0.5, 0.5]);
        assert_eq!((s, df), (0.0, 1));
        let (s, _) = chi_square_gof(&[60, 40], &[0.5, 0.5]);
        assert!((s - 4.0).abs() < 1e-12);
        assert_eq!(chi_square_gof(&[1, 9], &[0.0, 1.0]).0, f64::INFINITY);
    }

    #[test]
    fn homogeneity_examples() {
        let (s, df) = chi_square_homogeneity(&[vec![30, 70], vec![30, 70]]);
        assert_eq!((s, df), (0.0, 1));
        let (s, _) = chi_square_homogeneity(&[vec![50, 50], vec![30, 70]]);
        // Expected 40/60 in each row: 2 * (100/40 + 100/60).
        assert!((s - 2.0 * (100.0 / 40.0 + 100.0 / 60.0)).abs() < 1e-12);
    }

    #[test]
    fn z_scores() {
        assert_eq!(binomial_z(50, 100, 0.5), 0.0);
        assert!((binomial_z(60, 100, 0.5) - 2.0).abs() < 1e-12);
        assert_eq!(binomial_z(100, 100, 1.0), 0.0);
        assert!(
            (two_sample_z(1.0, 1.0, 100, 0.8, 1.0, 100) - 0.2 / (0.02f64).sqrt()).abs() < 1e-12
        );
    }
}
