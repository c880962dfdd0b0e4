use nalgebra::{DMatrix, DVector};

use super::design::ColumnStats;
use crate::error::{Error, Result};

/// Pivots of the Cholesky factor below this fraction of the largest diagonal
/// entry are treated as rank deficiency.
const RANK_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct RidgeModel {
    pub lambda: f64,
    pub beta: Vec<f64>,
    /// Unpenalized.
    pub intercept: f64,
    /// Applied to new inputs before the linear map.
    pub column_stats: ColumnStats,
}

/// Solves `(XcᵀXc + λI)β = Xcᵀyc` where `Xc`, `yc` are the column-centered
/// inputs, and sets the intercept so predictions pass through the means.
/// `x` is used as given; see [`RidgeModel::fit_standardized`] for the
/// variant that z-scores first.
pub fn fit_ridge(x: &DMatrix<f64>, y: &[f64], lambda: f64) -> Result<RidgeModel> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidInput(format!("lambda must be finite and >= 0, got {lambda}")));
    }
    if x.nrows() != y.len() {
        return Err(Error::Schema(format!("{} rows but {} targets", x.nrows(), y.len())));
    }
    if y.is_empty() {
        return Err(Error::InsufficientData("no rows".into()));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite design matrix or target".into()));
    }
    let n = y.len() as f64;
    let p = x.ncols();
    let y_mean = y.iter().sum::<f64>() / n;
    let x_mean: Vec<f64> = x.column_iter().map(|c| c.sum() / n).collect();
    if p == 0 {
        return Ok(RidgeModel {
            lambda,
            beta: Vec::new(),
            intercept: y_mean,
            column_stats: ColumnStats::identity(0),
        });
    }

    let mut xc = x.clone();
    for (j, mut col) in xc.column_iter_mut().enumerate() {
        col.add_scalar_mut(-x_mean[j]);
    }
    let yc = DVector::from_iterator(y.len(), y.iter().map(|v| v - y_mean));
    let mut gram = xc.tr_mul(&xc);
    for i in 0..p {
        gram[(i, i)] += lambda;
    }
    let rhs = xc.tr_mul(&yc);
    let scale = (0..p).map(|i| gram[(i, i)]).fold(0.0f64, f64::max);
    let singular = || {
        Error::Singular(format!(
            "normal equations are rank deficient at lambda = {lambda} (collinear predictors?); use lambda > 0"
        ))
    };
    let chol = gram.cholesky().ok_or_else(singular)?;
    let l = chol.l_dirty();
    if scale <= 0.0 || (0..p).any(|i| l[(i, i)] * l[(i, i)] <= RANK_TOL * scale) {
        return Err(singular());
    }
    let beta = chol.solve(&rhs);
    let intercept = y_mean - beta.iter().zip(&x_mean).map(|(b, m)| b * m).sum::<f64>();
    Ok(RidgeModel {
        lambda,
        beta: beta.iter().copied().collect(),
        intercept,
        column_stats: ColumnStats::identity(p),
    })
}

impl RidgeModel {
    /// Z-scores the columns of `x` with statistics from `x` itself, then fits.
    pub fn fit_standardized(x: &DMatrix<f64>, y: &[f64], lambda: f64) -> Result<Self> {
        let stats = ColumnStats::fit(x);
        let mut model = fit_ridge(&stats.apply(x), y, lambda)?;
        model.column_stats = stats;
        Ok(model)
    }

    /// Predictions for raw rows; the stored column statistics are applied first.
    pub fn predict(&self, x: &DMatrix<f64>) -> Result<Vec<f64>> {
        if x.ncols() != self.beta.len() {
            return Err(Error::Schema(format!(
                "model has {} predictors, input has {}",
                self.beta.len(),
                x.ncols()
            )));
        }
        let z = self.column_stats.apply(x);
        Ok(z.row_iter()
            .map(|r| self.intercept + r.iter().zip(&self.beta).map(|(a, b)| a * b).sum::<f64>())
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn col(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_column_slice(v.len(), 1, v)
    }

    #[test]
    fn exact_ols() {
        let m = fit_ridge(&col(&[-1.0, 0.0, 1.0]), &[-2.0, 0.0, 2.0], 0.0).unwrap();
        assert!((m.beta[0] - 2.0).abs() < 1e-12);
        assert!(m.intercept.abs() < 1e-12);
    }

    #[test]
    fn penalized_normal_equation() {
        // Xᵀy / (XᵀX + λ) = 4 / (2 + 1).
        let m = fit_ridge(&col(&[-1.0, 0.0, 1.0]), &[-2.0, 0.0, 2.0], 1.0).unwrap();
        assert!((m.beta[0] - 4.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn huge_penalty_predicts_mean() {
        let y = [1.0, 4.0, 7.0];
        let m = fit_ridge(&col(&[-1.0, 0.0, 1.0]), &y, 1e12).unwrap();
        assert!(m.beta[0].abs() < 1e-10);
        for p in m.predict(&col(&[-1.0, 0.0, 1.0])).unwrap() {
            assert!((p - 4.0).abs() < 1e-9);
        }
    }

    #[test]
    fn collinear_columns_singular_at_zero_lambda() {
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 2.0, 2.0, 4.0, 3.0, 6.0, 4.0, 8.0]);
        let y = [1.0, 2.0, 3.0, 5.0];
        assert!(matches!(fit_ridge(&x, &y, 0.0), Err(Error::Singular(_))));
        assert!(fit_ridge(&x, &y, 1.0).is_ok());
    }

    #[test]
    fn predictions() {
        let x = DMatrix::from_row_slice(5, 2, &[1.0, 0.5, 2.0, -1.0, 3.0, 2.0, 4.0, 0.0, 5.0, 1.5]);
        let y: Vec<f64> = x.row_iter().map(|r| 3.0 + 2.0 * r[0] - r[1]).collect();
        let m = RidgeModel::fit_standardized(&x, &y, 0.0).unwrap();
        for (p, t) in m.predict(&x).unwrap().iter().zip(&y) {
            assert!((p - t).abs() < 1e-9);
        }
        let zero = DMatrix::from_row_slice(1, 2, &m.column_stats.mean);
        assert!((m.predict(&zero).unwrap()[0] - m.intercept).abs() < 1e-12);
        assert!(m.predict(&col(&[1.0])).is_err());

        let flat = RidgeModel {
            lambda: 1.0,
            beta: vec![0.0, 0.0],
            intercept: 7.5,
            column_stats: ColumnStats::identity(2),
        };
        assert_eq!(flat.predict(&x).unwrap(), vec![7.5; 5]);
    }
}
