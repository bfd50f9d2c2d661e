use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};
use crate::ingestion::WorkType;
use crate::signature::Signature;
use crate::WORK_TYPE_COUNT;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OlsParams {
    /// When every row sums to 1, drop the highest-index active feature so the
    /// design with an intercept is not exactly collinear. On signatures with
    /// any signage permits that column is Signage.
    pub drop_simplex_column: bool,
}

impl Default for OlsParams {
    fn default() -> Self {
        OlsParams {
            drop_simplex_column: true,
        }
    }
}

/// Linear model in seconds; coefficients of unused columns are 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OlsModel {
    pub coefficients: [f64; WORK_TYPE_COUNT],
    pub intercept: f64,
}

impl OlsModel {
    pub fn predict_row(&self, x: &Signature) -> f64 {
        self.intercept
            + self
                .coefficients
                .iter()
                .zip(x)
                .map(|(c, v)| c * v)
                .sum::<f64>()
    }
}

const RANK_TOL: f64 = 1e-10;
const SIMPLEX_TOL: f64 = 1e-9;

/// Least squares with intercept via column-pivoted Householder QR.
///
/// Feature columns that are zero in every row carry no information and get
/// coefficient 0. Any remaining rank deficiency is an error naming the
/// columns the pivoted factorization could not resolve.
pub fn fit_ols(data: &Dataset, params: &OlsParams) -> Result<OlsModel> {
    let n = data.len();
    if n < 2 {
        return Err(Error::InvalidDataset(format!("OLS needs at least 2 rows, got {n}")));
    }
    let mut active: Vec<usize> = (0..WORK_TYPE_COUNT)
        .filter(|&j| data.features.iter().any(|r| r[j] != 0.0))
        .collect();
    let on_simplex = data
        .features
        .iter()
        .all(|r| (r.iter().sum::<f64>() - 1.0).abs() <= SIMPLEX_TOL);
    if params.drop_simplex_column && on_simplex {
        active.pop();
    }

    // Column 0 is the intercept; column c + 1 is feature active[c].
    let mut columns = vec![vec![1.0; n]];
    columns.extend(
        active
            .iter()
            .map(|&j| data.features.iter().map(|r| r[j]).collect::<Vec<f64>>()),
    );
    let name = |c: usize| {
        if c == 0 {
            "intercept".to_string()
        } else {
            WorkType::ALL[active[c - 1]].name().to_string()
        }
    };

    let beta = match solve_least_squares(columns, data.targets.clone()) {
        Ok(b) => b,
        Err(deficient) => {
            return Err(Error::SingularDesign {
                columns: deficient.into_iter().map(name).collect(),
            })
        }
    };
    let mut coefficients = [0.0; WORK_TYPE_COUNT];
    for (c, &j) in active.iter().enumerate() {
        coefficients[j] = beta[c + 1];
    }
    let model = OlsModel {
        coefficients,
        intercept: beta[0],
    };
    if !(model.intercept.is_finite() && model.coefficients.iter().all(|c| c.is_finite())) {
        return Err(Error::SingularDesign {
            columns: (0..=active.len()).map(name).collect(),
        });
    }
    Ok(model)
}

/// Solves `min ||A b - y||` for column-major `A`. On rank deficiency returns
/// the column indices left after the numerically independent pivots.
fn solve_least_squares(
    mut a: Vec<Vec<f64>>,
    mut y: Vec<f64>,
) -> std::result::Result<Vec<f64>, Vec<usize>> {
    let p = a.len();
    let n = y.len();
    let mut perm: Vec<usize> = (0..p).collect();
    let steps = p.min(n);
    let mut diag = Vec::with_capacity(steps);

    for k in 0..steps {
        let norm_below = |col: &[f64]| col[k..].iter().map(|v| v * v).sum::<f64>();
        let mut pivot = k;
        let mut pivot_norm = norm_below(&a[k]);
        for (j, col) in a.iter().enumerate().skip(k + 1) {
            let s = norm_below(col);
            if s > pivot_norm {
                pivot = j;
                pivot_norm = s;
            }
        }
        a.swap(k, pivot);
        perm.swap(k, pivot);

        let norm = pivot_norm.sqrt();
        if norm == 0.0 {
            diag.push(0.0);
            break;
        }
        let alpha = if a[k][k] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = a[k][k..].to_vec();
        v[0] -= alpha;
        let vv: f64 = v.iter().map(|x| x * x).sum();
        if vv > 0.0 {
            let reflect = |col: &mut [f64]| {
                let dot: f64 = v.iter().zip(&col[k..]).map(|(a, b)| a * b).sum();
                let f = 2.0 * dot / vv;
                for (c, vi) in col[k..].iter_mut().zip(&v) {
                    *c -= f * vi;
                }
            };
            for col in a.iter_mut().skip(k) {
                reflect(col);
            }
            reflect(&mut y);
        }
        diag.push(a[k][k]);
    }

    let scale = diag.first().map_or(0.0, |d| d.abs());
    let rank = diag
        .iter()
        .take_while(|d| d.abs() > RANK_TOL * scale && scale > 0.0)
        .count();
    if rank < p {
        let mut deficient = perm[rank..].to_vec();
        deficient.sort_unstable();
        return Err(deficient);
    }

    let mut z = vec![0.0; p];
    for i in (0..p).rev() {
        let mut acc = y[i];
        for j in i + 1..p {
            acc -= a[j][i] * z[j];
        }
        z[i] = acc / a[i][i];
    }
    let mut beta = vec![0.0; p];
    for (i, &col) in perm.iter().enumerate() {
        beta[col] = z[i];
    }
    Ok(beta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regress::r_squared;

    fn one_feature(xs: &[f64]) -> Vec<Signature> {
        xs.iter()
            .map(|x| {
                let mut r = [0.0; 8];
                r[0] = *x;
                r
            })
            .collect()
    }

    #[test]
    fn hand_solved_line() {
        let data = Dataset::from_xy(one_feature(&[0.0, 1.0, 2.0]), vec![0.0, 1.0, 3.0]).unwrap();
        let m = fit_ols(&data, &OlsParams::default()).unwrap();
        assert!((m.coefficients[0] - 1.5).abs() < 1e-12);
        assert!((m.intercept + 1.0 / 6.0).abs() < 1e-12);
        assert!(m.coefficients[1..].iter().all(|c| *c == 0.0));
        let pred: Vec<f64> = data.features.iter().map(|r| m.predict_row(r)).collect();
        let r2 = r_squared(&data.targets, &pred).unwrap();
        assert!((r2 - 27.0 / 28.0).abs() < 1e-12);
    }

    #[test]
    fn exact_interpolation() {
        let xs = [0.1, 0.4, 0.5, 0.9];
        let data = Dataset::from_xy(one_feature(&xs), xs.iter().map(|x| 2.0 * x).collect()).unwrap();
        let m = fit_ols(&data, &OlsParams::default()).unwrap();
        assert!((m.coefficients[0] - 2.0).abs() < 1e-12);
        assert!(m.intercept.abs() < 1e-12);
        for (r, y) in data.features.iter().zip(&data.targets) {
            assert!((m.predict_row(r) - y).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_target_on_simplex() {
        let rows = vec![
            [0.1, 0.2, 0.1, 0.1, 0.1, 0.2, 0.1, 0.1],
            [0.3, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1],
            [0.05, 0.05, 0.2, 0.1, 0.2, 0.2, 0.1, 0.1],
            [0.1, 0.1, 0.1, 0.3, 0.1, 0.1, 0.1, 0.1],
            [0.1, 0.1, 0.1, 0.1, 0.3, 0.1, 0.1, 0.1],
            [0.1, 0.1, 0.1, 0.1, 0.1, 0.3, 0.1, 0.1],
            [0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.3, 0.1],
            [0.2, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.2],
            [0.125; 8],
        ];
        let n = rows.len();
        let data = Dataset::from_xy(rows, vec![300.0; n]).unwrap();
        let m = fit_ols(&data, &OlsParams::default()).unwrap();
        assert!((m.intercept - 300.0).abs() < 1e-8);
        assert!(m.coefficients.iter().all(|c| c.abs() < 1e-8));
        assert_eq!(m.coefficients[7], 0.0);

        let err = fit_ols(
            &data,
            &OlsParams {
                drop_simplex_column: false,
            },
        )
        .unwrap_err();
        assert!(matches!(err, Error::SingularDesign { .. }));
    }

    #[test]
    fn duplicated_column_is_singular() {
        let rows: Vec<Signature> = [0.1, 0.5, 0.2, 0.9]
            .iter()
            .map(|x| {
                let mut r = [0.0; 8];
                r[1] = *x;
                r[4] = 2.0 * x;
                r
            })
            .collect();
        let data = Dataset::from_xy(rows, vec![1.0, 2.0, 3.0, 5.0]).unwrap();
        match fit_ols(&data, &OlsParams::default()) {
            Err(Error::SingularDesign { columns }) => {
                assert_eq!(columns.len(), 1);
                assert!(columns[0] == "foundation" || columns[0] == "alteration");
            }
            other => panic!("expected singular design, got {other:?}"),
        }
    }

    #[test]
    fn too_few_rows() {
        let data = Dataset::from_xy(one_feature(&[1.0]), vec![1.0]).unwrap();
        assert!(fit_ols(&data, &OlsParams::default()).is_err());
    }
}
