use std::collections::BTreeMap;

use nalgebra::DMatrix;

use crate::corpus::AoaDataset;
use crate::error::{Error, Result};

/// Per-column mean and population standard deviation. Zero-variance columns
/// keep a unit stddev, so they standardize to all zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnStats {
    pub mean: Vec<f64>,
    pub stddev: Vec<f64>,
}

impl ColumnStats {
    pub fn identity(cols: usize) -> Self {
        ColumnStats {
            mean: vec![0.0; cols],
            stddev: vec![1.0; cols],
        }
    }

    pub fn fit(x: &DMatrix<f64>) -> Self {
        let n = x.nrows() as f64;
        let mut mean = Vec::with_capacity(x.ncols());
        let mut stddev = Vec::with_capacity(x.ncols());
        for col in x.column_iter() {
            let m = col.iter().sum::<f64>() / n;
            let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
            let sd = var.sqrt();
            mean.push(m);
            stddev.push(if sd > 0.0 { sd } else { 1.0 });
        }
        ColumnStats { mean, stddev }
    }

    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }

    pub fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut z = x.clone();
        for (j, mut col) in z.column_iter_mut().enumerate() {
            let (m, s) = (self.mean[j], self.stddev[j]);
            col.apply(|v| *v = (*v - m) / s);
        }
        z
    }
}

/// Named predictor columns for a set of target words.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    pub names: Vec<String>,
    /// One row per word in `words`.
    pub x: DMatrix<f64>,
    pub y: Vec<f64>,
    pub words: Vec<String>,
    /// AoA targets without a value for every predictor.
    pub dropped: Vec<String>,
}

/// One predictor: a value per word, optionally log-transformed.
#[derive(Debug, Clone, Copy)]
pub struct PredictorColumn<'a> {
    pub name: &'a str,
    pub values: &'a BTreeMap<String, f64>,
    pub log: bool,
}

impl DesignMatrix {
    /// Rows are the AoA words that have a value in every column, in sorted
    /// word order.
    pub fn build(aoa: &AoaDataset, columns: &[PredictorColumn<'_>]) -> Result<Self> {
        let mut words = Vec::new();
        let mut dropped = Vec::new();
        for w in aoa.words() {
            if columns.iter().all(|c| c.values.contains_key(w)) {
                words.push(w.to_string());
            } else {
                dropped.push(w.to_string());
            }
        }
        if !dropped.is_empty() {
            log::info!("{} AoA targets lack a value for some predictor", dropped.len());
        }
        let mut x = DMatrix::zeros(words.len(), columns.len());
        for (j, col) in columns.iter().enumerate() {
            for (i, w) in words.iter().enumerate() {
                let v = col.values[w];
                x[(i, j)] = if col.log {
                    if !(v > 0.0 && v.is_finite()) {
                        return Err(Error::Transform {
                            predictor: col.name.to_string(),
                            word: w.clone(),
                            value: v,
                        });
                    }
                    v.ln()
                } else {
                    v
                };
                if !x[(i, j)].is_finite() {
                    return Err(Error::InvalidInput(format!(
                        "predictor {} is not finite for word {w:?}",
                        col.name
                    )));
                }
            }
        }
        let y = words.iter().map(|w| aoa.get(w).expect("row word has AoA")).collect();
        Ok(DesignMatrix {
            names: columns.iter().map(|c| c.name.to_string()).collect(),
            x,
            y,
            words,
            dropped,
        })
    }

    pub fn nrows(&self) -> usize {
        self.x.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.x.ncols()
    }

    /// Copy with every column z-scored over all rows.
    pub fn standardized(&self) -> DesignMatrix {
        DesignMatrix {
            x: ColumnStats::fit(&self.x).apply(&self.x),
            ..self.clone()
        }
    }

    pub fn select(&self, names: &[&str]) -> Result<DesignMatrix> {
        let idx = names
            .iter()
            .map(|n| {
                self.names
                    .iter()
                    .position(|m| m == n)
                    .ok_or_else(|| Error::Schema(format!("no predictor named {n:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(DesignMatrix {
            names: names.iter().map(|s| s.to_string()).collect(),
            x: self.x.select_columns(idx.iter()),
            ..self.clone()
        })
    }
}

/// A named subset of predictors: frequency (`f`) plus language-model word
/// probabilities.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Combo {
    pub name: String,
    pub models: Vec<String>,
    pub frequency: bool,
}

impl Combo {
    /// Accepts `f`, `f_<model>`, `all` (frequency plus every model), or an
    /// explicit `+`-joined list such as `f+bi+tri`.
    pub fn parse(spec: &str, available: &[&str]) -> Result<Self> {
        let unknown = |m: &str| Error::Config(format!("unknown predictor {m:?} in {spec:?}"));
        let (frequency, models): (bool, Vec<String>) = if spec == "all" {
            (true, available.iter().map(|s| s.to_string()).collect())
        } else if spec == "f" {
            (true, Vec::new())
        } else if let Some(m) = spec.strip_prefix("f_").filter(|m| available.contains(m)) {
            (true, vec![m.to_string()])
        } else {
            let mut freq = false;
            let mut models = Vec::new();
            for part in spec.split('+') {
                if part == "f" {
                    freq = true;
                } else if available.contains(&part) {
                    models.push(part.to_string());
                } else {
                    return Err(unknown(part));
                }
            }
            (freq, models)
        };
        Ok(Combo {
            name: spec.to_string(),
            models,
            frequency,
        })
    }
}

/// Design matrix of log frequency and log mean word probabilities.
pub fn lm_predictor_matrix(
    prob_maps: &[(String, BTreeMap<String, f64>)],
    freq: &BTreeMap<String, u64>,
    aoa: &AoaDataset,
    combo: &Combo,
) -> Result<DesignMatrix> {
    let freq_f: BTreeMap<String, f64> = freq.iter().map(|(w, &c)| (w.clone(), c as f64)).collect();
    let mut columns = Vec::new();
    if combo.frequency {
        columns.push(PredictorColumn {
            name: "f",
            values: &freq_f,
            log: true,
        });
    }
    for m in &combo.models {
        let (name, values) = prob_maps
            .iter()
            .find(|(n, _)| n == m)
            .ok_or_else(|| Error::Config(format!("no word probabilities for model {m:?}")))?;
        columns.push(PredictorColumn {
            name,
            values,
            log: true,
        });
    }
    DesignMatrix::build(aoa, &columns)
}
