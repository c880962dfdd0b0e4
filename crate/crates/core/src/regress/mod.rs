//! Ridge regression with k-fold cross-validation for predicting age of
//! acquisition from word frequency, type-averaged prosody features and
//! language-model word probabilities.

mod cv;
mod design;
mod ridge;
mod sweep;

pub use cv::{cv_folds, cv_mse, fit_fold, CvConfig, CvReport, CvResult};
pub use design::{lm_predictor_matrix, Combo, ColumnStats, DesignMatrix, PredictorColumn};
pub use ridge::{fit_ridge, RidgeModel};
pub use sweep::{
    select_features, single_feature_sweep, write_sweep_csv, SweepMode, SweepRow, FREQUENCY_PREDICTOR,
};
