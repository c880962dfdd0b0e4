use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::ridge::RidgeModel;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CvConfig {
    pub lambda: f64,
    pub folds: usize,
    pub seed: u64,
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig {
            lambda: 1.0,
            folds: 10,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvResult {
    pub fold_mses: Vec<f64>,
    pub mean_mse: f64,
    pub seed: u64,
}

/// Serialized form of one cross-validated fit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvReport {
    pub predictors: Vec<String>,
    pub lambda: f64,
    pub seed: u64,
    pub folds: usize,
    pub fold_mses: Vec<f64>,
    pub mean_mse: f64,
    pub rows: usize,
    pub dropped_words: Vec<String>,
    /// Standardization statistics are fitted on each fold's training rows.
    pub standardization: &'static str,
}

/// Held-out row indices per fold: one seeded shuffle, cut into `folds`
/// contiguous, near-equal parts.
pub fn cv_folds(n: usize, folds: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if folds < 2 {
        return Err(Error::Infeasible(format!("need at least 2 folds, got {folds}")));
    }
    if n < folds {
        return Err(Error::Infeasible(format!("{n} rows cannot fill {folds} folds")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Ok((0..folds)
        .map(|f| order[f * n / folds..(f + 1) * n / folds].to_vec())
        .collect())
}

/// Fits on every row outside `test` and returns the model with its held-out MSE.
pub fn fit_fold(x: &DMatrix<f64>, y: &[f64], test: &[usize], lambda: f64) -> Result<(RidgeModel, f64)> {
    let mut held = vec![false; y.len()];
    for &i in test {
        held[i] = true;
    }
    let train: Vec<usize> = (0..y.len()).filter(|&i| !held[i]).collect();
    let x_train = x.select_rows(train.iter());
    let y_train: Vec<f64> = train.iter().map(|&i| y[i]).collect();
    let model = RidgeModel::fit_standardized(&x_train, &y_train, lambda)?;
    let pred = model.predict(&x.select_rows(test.iter()))?;
    let mse = pred
        .iter()
        .zip(test)
        .map(|(p, &i)| (p - y[i]) * (p - y[i]))
        .sum::<f64>()
        / test.len() as f64;
    Ok((model, mse))
}

pub fn cv_mse(x: &DMatrix<f64>, y: &[f64], cfg: &CvConfig) -> Result<CvResult> {
    if x.nrows() != y.len() {
        return Err(Error::Schema(format!("{} rows but {} targets", x.nrows(), y.len())));
    }
    let folds = cv_folds(y.len(), cfg.folds, cfg.seed)?;
    let fold_mses = folds
        .par_iter()
        .map(|test| fit_fold(x, y, test, cfg.lambda).map(|r| r.1))
        .collect::<Result<Vec<f64>>>()?;
    let mean_mse = fold_mses.iter().sum::<f64>() / fold_mses.len() as f64;
    Ok(CvResult {
        fold_mses,
        mean_mse,
        seed: cfg.seed,
    })
}
