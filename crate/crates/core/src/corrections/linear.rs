//! Ordinary least squares for the four-column correction design.

use crate::error::{Error, Result};

pub const COLUMNS: [&str; 4] = ["intercept", "biased_prediction", "user_mean", "item_mean"];

/// Relative residual norm below which a column counts as linearly dependent
/// on the preceding ones.
const RANK_TOL: f64 = 1e-10;

/// Least-squares coefficients for `y ≈ X β` where each row of `X` is
/// `[1, x0, x1, x2]`. Uses modified Gram–Schmidt with one reorthogonalization
/// pass; a column that vanishes after projection names the failure.
pub fn ols(rows: &[[f64; 3]], y: &[f64]) -> Result<[f64; 4]> {
    assert_eq!(rows.len(), y.len());
    let n = rows.len();
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    let cols: Vec<Vec<f64>> = (0..4)
        .map(|j| {
            rows.iter()
                .map(|r| if j == 0 { 1.0 } else { r[j - 1] })
                .collect()
        })
        .collect();
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();

    let mut q: Vec<Vec<f64>> = Vec::with_capacity(4);
    let mut r = [[0.0f64; 4]; 4];
    for j in 0..4 {
        let mut v = cols[j].clone();
        let original = norm(&v);
        for _pass in 0..2 {
            for (k, qk) in q.iter().enumerate() {
                let c = dot(qk, &v);
                r[k][j] += c;
                v.iter_mut().zip(qk).for_each(|(vi, qi)| *vi -= c * qi);
            }
        }
        let rn = norm(&v);
        if original == 0.0 || rn <= RANK_TOL * original.max(1.0) {
            return Err(Error::RankDeficient { column: COLUMNS[j] });
        }
        r[j][j] = rn;
        v.iter_mut().for_each(|x| *x /= rn);
        q.push(v);
    }
    let qty: Vec<f64> = q.iter().map(|qk| dot(qk, y)).collect();
    let mut beta = [0.0; 4];
    for j in (0..4).rev() {
        let s: f64 = (j + 1..4).map(|k| r[j][k] * beta[k]).sum();
        beta[j] = (qty[j] - s) / r[j][j];
    }
    Ok(beta)
}

pub fn affine(beta: &[f64; 4], x: &[f64; 3]) -> f64 {
    beta[0] + beta[1] * x[0] + beta[2] * x[1] + beta[3] * x[2]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_fit() {
        let rows: Vec<[f64; 3]> = (0..20)
            .map(|k| {
                [
                    k as f64 * 0.3,
                    ((k * 7) % 11) as f64,
                    ((k * k) % 13) as f64 * 0.5,
                ]
            })
            .collect();
        let y: Vec<f64> = rows
            .iter()
            .map(|x| 0.5 - 1.5 * x[0] + 2.0 * x[1] + 0.25 * x[2])
            .collect();
        let b = ols(&rows, &y).unwrap();
        for (got, want) in b.iter().zip([0.5, -1.5, 2.0, 0.25]) {
            assert!((got - want).abs() < 1e-10, "{b:?}");
        }
    }

    #[test]
    fn constant_column_is_named() {
        let rows: Vec<[f64; 3]> = (0..10).map(|k| [k as f64, 3.0, (k % 3) as f64]).collect();
        let y = vec![1.0; 10];
        assert!(matches!(
            ols(&rows, &y),
            Err(Error::RankDeficient {
                column: "user_mean"
            })
        ));
        let rows: Vec<[f64; 3]> = (0..10)
            .map(|k| [k as f64, (k % 4) as f64, 2.0 * k as f64])
            .collect();
        assert!(matches!(
            ols(&rows, &y),
            Err(Error::RankDeficient {
                column: "item_mean"
            })
        ));
    }
}
