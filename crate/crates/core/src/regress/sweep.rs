use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::Serialize;

use super::cv::{cv_mse, CvConfig};
use super::design::{DesignMatrix, PredictorColumn};
use crate::corpus::AoaDataset;
use crate::error::{Error, Result};
use crate::features::EGEMAPS_NAMES;

/// Name of the log-frequency predictor.
pub const FREQUENCY_PREDICTOR: &str = "f";

const MIN_SWEEP_WORDS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepMode {
    /// Each feature as the sole predictor.
    Alone,
    /// Log frequency plus one feature.
    WithFrequency,
}

impl SweepMode {
    pub fn name(self) -> &'static str {
        match self {
            SweepMode::Alone => "alone",
            SweepMode::WithFrequency => "with_frequency",
        }
    }
}

impl fmt::Display for SweepMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "alone" => Ok(SweepMode::Alone),
            "with_frequency" => Ok(SweepMode::WithFrequency),
            _ => Err(Error::Config(format!("unknown sweep mode {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub rank: usize,
    pub feature: String,
    pub mode: SweepMode,
    pub mean_mse: f64,
    pub fold_mses: Vec<f64>,
}

fn feature_name(i: usize, dim: usize) -> String {
    if dim == EGEMAPS_NAMES.len() {
        EGEMAPS_NAMES[i].to_string()
    } else {
        format!("feature{i}")
    }
}

/// Design matrix with log frequency followed by every feature dimension, over
/// the AoA words present in both `freq` and `features`.
pub(crate) fn frequency_feature_matrix(
    freq: &BTreeMap<String, u64>,
    features: &BTreeMap<String, Vec<f64>>,
    aoa: &AoaDataset,
) -> Result<DesignMatrix> {
    let dim = features.values().next().map_or(0, Vec::len);
    let freq_f: BTreeMap<String, f64> = freq.iter().map(|(w, &c)| (w.clone(), c as f64)).collect();
    let per_dim: Vec<BTreeMap<String, f64>> = (0..dim)
        .map(|d| features.iter().map(|(w, v)| (w.clone(), v[d])).collect())
        .collect();
    let names: Vec<String> = (0..dim).map(|d| feature_name(d, dim)).collect();
    let mut columns = vec![PredictorColumn {
        name: FREQUENCY_PREDICTOR,
        values: &freq_f,
        log: true,
    }];
    columns.extend(names.iter().zip(&per_dim).map(|(name, values)| PredictorColumn {
        name,
        values,
        log: false,
    }));
    DesignMatrix::build(aoa, &columns)
}

/// Cross-validates one model per feature dimension plus a frequency-only
/// baseline, and ranks them by ascending mean MSE. All models share the same
/// fold partition.
pub fn single_feature_sweep(
    freq: &BTreeMap<String, u64>,
    features: &BTreeMap<String, Vec<f64>>,
    aoa: &AoaDataset,
    mode: SweepMode,
    cfg: &CvConfig,
) -> Result<Vec<SweepRow>> {
    let dm = frequency_feature_matrix(freq, features, aoa)?;
    if dm.nrows() == 0 {
        return Err(Error::Coverage(
            "no word has frequency, prosody features and an AoA target".into(),
        ));
    }
    if dm.nrows() < MIN_SWEEP_WORDS {
        return Err(Error::Coverage(format!(
            "only {} words covered by all inputs, need {MIN_SWEEP_WORDS}",
            dm.nrows()
        )));
    }
    let mut rows = Vec::with_capacity(dm.ncols());
    let baseline = cv_mse(&dm.x.columns(0, 1).into_owned(), &dm.y, cfg)?;
    rows.push((FREQUENCY_PREDICTOR.to_string(), baseline));
    for j in 1..dm.ncols() {
        let x = match mode {
            SweepMode::Alone => dm.x.columns(j, 1).into_owned(),
            SweepMode::WithFrequency => dm.x.select_columns([0, j].iter()),
        };
        rows.push((dm.names[j].clone(), cv_mse(&x, &dm.y, cfg)?));
    }
    rows.sort_by(|a, b| a.1.mean_mse.total_cmp(&b.1.mean_mse));
    Ok(rows
        .into_iter()
        .enumerate()
        .map(|(i, (feature, r))| SweepRow {
            rank: i + 1,
            feature,
            mode,
            mean_mse: r.mean_mse,
            fold_mses: r.fold_mses,
        })
        .collect())
}

/// Union of the `top_n` best features of two sweeps, ignoring the frequency
/// baseline. Order: the first sweep's picks, then new picks from the second.
pub fn select_features(sweep_a: &[SweepRow], sweep_b: &[SweepRow], top_n: usize) -> Vec<String> {
    let top = |rows: &[SweepRow]| -> Vec<String> {
        rows.iter()
            .filter(|r| r.feature != FREQUENCY_PREDICTOR)
            .take(top_n)
            .map(|r| r.feature.clone())
            .collect()
    };
    let mut out = top(sweep_a);
    for f in top(sweep_b) {
        if !out.contains(&f) {
            out.push(f);
        }
    }
    out
}

/// Writes `rank,feature,mode,mean_mse,fold_mses…` rows.
pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let folds = rows.first().map_or(0, |r| r.fold_mses.len());
    let mut w = csv::Writer::from_writer(out);
    let res = (|| -> csv::Result<()> {
        let mut header = vec!["rank".to_string(), "feature".into(), "mode".into(), "mean_mse".into()];
        header.extend((0..folds).map(|i| format!("fold{i}_mse")));
        w.write_record(&header)?;
        for r in rows {
            let mut rec = vec![r.rank.to_string(), r.feature.clone(), r.mode.to_string(), r.mean_mse.to_string()];
            rec.extend(r.fold_mses.iter().map(f64::to_string));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    })();
    res.map_err(|e| Error::io("<sweep csv>", e.into()))
}
