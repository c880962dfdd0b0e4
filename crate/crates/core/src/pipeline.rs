//! End-to-end experiment: split, quantize, train all language models,
//! perplexity tables, word probabilities, regression suite and PCA.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::corpus::{AoaDataset, Corpus, PosLabels, QuantizedCorpus};
use crate::error::{Error, Result};
use crate::flm::{avg_word_probability, perplexity, FactoredLm, ModelConfig, PerplexityReport, Smoothing, TrainOptions};
use crate::pcaviz::{emit_scatter, fit_pca, render_svg, silhouette, ScatterMeta};
use crate::quantizer::{fit_corpus, KMeansOptions, QuantizerModel, Standardizer};
use crate::regress::{
    cv_mse, lm_predictor_matrix, select_features, single_feature_sweep, write_sweep_csv, Combo, CvConfig, CvReport,
    DesignMatrix, PredictorColumn, SweepMode, SweepRow, FREQUENCY_PREDICTOR,
};
use crate::seed::derive;

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOptions {
    pub seed: u64,
    pub ks: Vec<usize>,
    pub test_frac: f64,
    pub smoothing: Smoothing,
    pub unk_threshold: u64,
    pub lambda: f64,
    pub folds: usize,
    /// Features kept from each sweep before taking the union.
    pub top_n: usize,
    /// Codebook size whose prosodic models feed the regression suite.
    pub regression_k: usize,
    /// Fit PCA on z-scored features rather than raw values.
    pub standardize_pca: bool,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            seed: 0,
            ks: vec![50, 100, 500],
            test_frac: 0.1,
            smoothing: Smoothing::WittenBell,
            unk_threshold: 1,
            lambda: 1.0,
            folds: 10,
            top_n: 10,
            regression_k: 50,
            standardize_pca: true,
        }
    }
}

/// Training options shared by every model of one codebook size.
pub fn train_options(opts: &PipelineOptions, k: usize) -> TrainOptions {
    TrainOptions {
        smoothing: opts.smoothing,
        unk_threshold: opts.unk_threshold,
        k: Some(k),
        ..TrainOptions::default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PplEntry {
    pub k: usize,
    pub model: String,
    pub train: PerplexityReport,
    pub test: PerplexityReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuantizerSummary {
    pub k: usize,
    pub distortion: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorpusSummary {
    pub utterances: usize,
    pub tokens: usize,
    pub types: usize,
    pub train_utterances: usize,
    pub test_utterances: usize,
    pub aoa_targets: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trends {
    /// Per k: tri_prosBi < tri_prosUni < tri and bi_prosBi < bi_prosUni < bi on training data.
    pub prosody_training_order: BTreeMap<usize, bool>,
    pub selected_features_beat_frequency: bool,
    pub lm_predictors_beat_frequency: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineSummary {
    pub seed: u64,
    pub corpus: CorpusSummary,
    pub quantizers: Vec<QuantizerSummary>,
    pub perplexity: Vec<PplEntry>,
    pub sweep_groups: Vec<String>,
    pub sweep_top: Vec<Vec<String>>,
    pub selected_features: Vec<String>,
    pub cv: Vec<CvReport>,
    pub pca: ScatterMeta,
    pub trends: Trends,
}

/// Training perplexity ordering for one codebook size.
pub fn prosody_order_holds(train_ppl: &BTreeMap<ModelConfig, f64>) -> bool {
    use ModelConfig::*;
    let p = |c| train_ppl[&c];
    p(TriProsBi) < p(TriProsUni) && p(TriProsUni) < p(Tri) && p(BiProsBi) < p(BiProsUni) && p(BiProsUni) < p(Bi)
}

/// Trains all seven configurations on `train` (in parallel, collected in
/// configuration order).
pub fn train_all(train: &QuantizedCorpus, opts: &TrainOptions) -> Result<Vec<FactoredLm>> {
    ModelConfig::ALL
        .par_iter()
        .map(|&c| FactoredLm::train(train, c, opts))
        .collect()
}

/// `word,<model>…` table of average word probabilities; blank cells where a
/// model has no value.
pub fn write_word_probs_csv<W: Write>(maps: &[(String, BTreeMap<String, f64>)], out: W) -> Result<()> {
    let words: BTreeSet<&String> = maps.iter().flat_map(|(_, m)| m.keys()).collect();
    let mut w = csv::Writer::from_writer(out);
    let res = (|| -> csv::Result<()> {
        let mut header = vec!["word".to_string()];
        header.extend(maps.iter().map(|(n, _)| n.clone()));
        w.write_record(&header)?;
        for word in words {
            let mut rec = vec![word.clone()];
            rec.extend(maps.iter().map(|(_, m)| m.get(word).map_or(String::new(), f64::to_string)));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    })();
    res.map_err(|e| Error::io("<word probability csv>", e.into()))
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    write_file(path, text)
}

pub fn cv_report(dm: &DesignMatrix, cfg: &CvConfig) -> Result<CvReport> {
    let r = cv_mse(&dm.x, &dm.y, cfg)?;
    Ok(CvReport {
        predictors: dm.names.clone(),
        lambda: cfg.lambda,
        seed: cfg.seed,
        folds: cfg.folds,
        fold_mses: r.fold_mses,
        mean_mse: r.mean_mse,
        rows: dm.nrows(),
        dropped_words: dm.dropped.clone(),
        standardization: "per-fold",
    })
}

/// Design matrix of log frequency plus the named type-averaged features.
pub fn feature_design(
    freq: &BTreeMap<String, u64>,
    features: &BTreeMap<String, Vec<f64>>,
    aoa: &AoaDataset,
    names: &[String],
) -> Result<DesignMatrix> {
    let freq_f: BTreeMap<String, f64> = freq.iter().map(|(w, &c)| (w.clone(), c as f64)).collect();
    let cols: Vec<(String, BTreeMap<String, f64>)> = names
        .iter()
        .map(|n| {
            let d = crate::features::feature_index(n).ok_or_else(|| Error::Config(format!("unknown feature {n:?}")))?;
            Ok((n.clone(), features.iter().map(|(w, v)| (w.clone(), v[d])).collect()))
        })
        .collect::<Result<_>>()?;
    let mut columns = vec![PredictorColumn {
        name: FREQUENCY_PREDICTOR,
        values: &freq_f,
        log: true,
    }];
    columns.extend(cols.iter().map(|(n, v)| PredictorColumn {
        name: n,
        values: v,
        log: false,
    }));
    DesignMatrix::build(aoa, &columns)
}

/// Sub-corpora for the two feature sweeps: by child when there are at least
/// two children, otherwise the two halves of the utterance list.
fn sweep_groups(corpus: &Corpus) -> Result<Vec<(String, Corpus)>> {
    let children: BTreeSet<&str> = corpus.utterances.iter().map(|u| u.child.as_str()).collect();
    let groups: Vec<(String, Vec<_>)> = if children.len() >= 2 {
        let mut it = children.iter();
        let a = *it.next().expect("two children");
        vec![
            (a.to_string(), corpus.utterances.iter().filter(|u| u.child == a).cloned().collect()),
            ("rest".to_string(), corpus.utterances.iter().filter(|u| u.child != a).cloned().collect()),
        ]
    } else {
        let half = corpus.len() / 2;
        vec![
            ("first-half".to_string(), corpus.utterances[..half].to_vec()),
            ("second-half".to_string(), corpus.utterances[half..].to_vec()),
        ]
    };
    groups
        .into_iter()
        .map(|(name, utts)| Ok((name.clone(), Corpus::new(name, utts)?)))
        .collect()
}

fn ppl_table(entries: &[PplEntry], ks: &[usize]) -> String {
    let mut s = String::new();
    let _ = write!(s, "{:<12}", "model");
    for k in ks {
        let _ = write!(s, " {:>12} {:>12}", format!("train@{k}"), format!("test@{k}"));
    }
    s.push('\n');
    for c in ModelConfig::ALL {
        let _ = write!(s, "{:<12}", c.name());
        for k in ks {
            let e = entries.iter().find(|e| e.k == *k && e.model == c.name()).expect("complete table");
            let _ = write!(s, " {:>12.3} {:>12.3}", e.train.perplexity, e.test.perplexity);
        }
        s.push('\n');
    }
    s
}

fn render_summary(sum: &PipelineSummary, ks: &[usize]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "seed {}", sum.seed);
    let c = &sum.corpus;
    let _ = writeln!(
        s,
        "corpus: {} utterances, {} tokens, {} types; train {} / test {}; {} AoA targets",
        c.utterances, c.tokens, c.types, c.train_utterances, c.test_utterances, c.aoa_targets
    );
    s.push_str("\nperplexity\n");
    s.push_str(&ppl_table(&sum.perplexity, ks));
    s.push_str("\ncross-validated MSE\n");
    for r in &sum.cv {
        let label = match r.predictors.len() {
            n if n > 20 => format!("{}+{} features", r.predictors[0], n - 1),
            _ => r.predictors.join("+"),
        };
        let _ = writeln!(s, "{:>10.4}  {label}", r.mean_mse);
    }
    let _ = writeln!(s, "\nselected features ({}): {}", sum.selected_features.len(), sum.selected_features.join(", "));
    let _ = writeln!(
        s,
        "pca: explained variance {:.4} {:.4}, silhouette {}",
        sum.pca.explained_variance_ratio[0],
        sum.pca.explained_variance_ratio[1],
        sum.pca.silhouette.map_or("n/a".to_string(), |v| format!("{v:.4}"))
    );
    s.push_str("\ntrends\n");
    for (k, ok) in &sum.trends.prosody_training_order {
        let _ = writeln!(s, "prosody training order k={k}: {ok}");
    }
    let _ = writeln!(s, "f+selected < f: {}", sum.trends.selected_features_beat_frequency);
    let _ = writeln!(s, "f+lm < f: {}", sum.trends.lm_predictors_beat_frequency);
    s
}

/// Runs the full experiment and writes its artifacts into `out`.
pub fn run_pipeline(
    corpus: &Corpus,
    aoa: &AoaDataset,
    pos: &PosLabels,
    opts: &PipelineOptions,
    out: &Path,
) -> Result<PipelineSummary> {
    if opts.ks.is_empty() {
        return Err(Error::Config("no codebook sizes".into()));
    }
    if !opts.ks.contains(&opts.regression_k) {
        return Err(Error::Config(format!("regression k {} is not among {:?}", opts.regression_k, opts.ks)));
    }
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let (train, test) = corpus.split(opts.test_frac, derive(opts.seed, "split"))?;
    log::info!("split: {} train / {} test utterances", train.len(), test.len());

    let mut quantizers = Vec::new();
    let mut ppl = Vec::new();
    let mut trend_order = BTreeMap::new();
    let mut ppl_csv = format!("{}\n", PerplexityReport::CSV_HEADER);
    let mut regression_models: Option<(Vec<FactoredLm>, QuantizedCorpus)> = None;
    for &k in &opts.ks {
        log::info!("k = {k}: fitting quantizer");
        let q: QuantizerModel = fit_corpus(&train, k, derive(opts.seed, &format!("kmeans/{k}")), &KMeansOptions::default())?;
        q.save(out.join(format!("codebook_k{k}.txt")))?;
        quantizers.push(QuantizerSummary {
            k,
            distortion: q.distortion,
            iterations: q.history.len(),
        });
        let qtrain = q.quantize_corpus(&train)?;
        let qtest = q.quantize_corpus(&test)?;
        let models = train_all(&qtrain, &train_options(opts, k))?;
        let mut train_ppl = BTreeMap::new();
        for lm in &models {
            let tr = perplexity(lm, &qtrain)?;
            let te = perplexity(lm, &qtest)?;
            ppl_csv.push_str(&tr.csv_row(lm.config().name(), "train", k));
            ppl_csv.push('\n');
            ppl_csv.push_str(&te.csv_row(lm.config().name(), "test", k));
            ppl_csv.push('\n');
            train_ppl.insert(lm.config(), tr.perplexity);
            ppl.push(PplEntry {
                k,
                model: lm.config().name().to_string(),
                train: tr,
                test: te,
            });
        }
        trend_order.insert(k, prosody_order_holds(&train_ppl));
        if k == opts.regression_k {
            regression_models = Some((models, qtrain));
        }
    }
    write_file(&out.join("ppl.csv"), ppl_csv)?;

    // Word probabilities from the models at the regression codebook size.
    let (models, qtrain) = regression_models.expect("regression k is among ks");
    let targets: BTreeSet<String> = aoa.words().map(str::to_string).collect();
    let prob_maps: Vec<(String, BTreeMap<String, f64>)> = models
        .par_iter()
        .map(|lm| Ok((lm.config().name().to_string(), avg_word_probability(lm, &qtrain, &targets)?)))
        .collect::<Result<_>>()?;
    let wp = fs::File::create(out.join("wordprobs.csv")).map_err(|e| Error::io(out.join("wordprobs.csv"), e))?;
    write_word_probs_csv(&prob_maps, std::io::BufWriter::new(wp))?;

    // Experiment 1: feature sweeps and selection.
    let cfg = CvConfig {
        lambda: opts.lambda,
        folds: opts.folds,
        seed: derive(opts.seed, "cv"),
    };
    let groups = sweep_groups(corpus)?;
    let mut sweeps: Vec<Vec<SweepRow>> = Vec::new();
    for (name, sub) in &groups {
        let rows = single_feature_sweep(
            &sub.word_frequencies(),
            &sub.type_level_average(),
            aoa,
            SweepMode::WithFrequency,
            &cfg,
        )?;
        let path = out.join(format!("sweep_{name}.csv"));
        let f = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        write_sweep_csv(&rows, std::io::BufWriter::new(f))?;
        sweeps.push(rows);
    }
    let selected = select_features(&sweeps[0], &sweeps[1], opts.top_n);
    let freq = corpus.word_frequencies();
    let features = corpus.type_level_average();
    let all_names: Vec<String> = crate::features::EGEMAPS_NAMES.iter().map(|s| s.to_string()).collect();
    let mut cv = vec![
        cv_report(&feature_design(&freq, &features, aoa, &[])?, &cfg)?,
        cv_report(&feature_design(&freq, &features, aoa, &selected)?, &cfg)?,
        cv_report(&feature_design(&freq, &features, aoa, &all_names)?, &cfg)?,
    ];
    let selected_better = cv[1].mean_mse < cv[0].mean_mse;

    // Experiment 3: language-model probabilities as predictors.
    let names: Vec<&str> = ModelConfig::ALL.iter().map(|c| c.name()).collect();
    let mut combos = vec!["f".to_string()];
    combos.extend(names.iter().map(|n| format!("f_{n}")));
    combos.push("all".into());
    let mut lm_reports = Vec::new();
    for spec in &combos {
        let combo = Combo::parse(spec, &names)?;
        lm_reports.push(cv_report(&lm_predictor_matrix(&prob_maps, &freq, aoa, &combo)?, &cfg)?);
    }
    let lm_better = lm_reports.last().expect("all combo").mean_mse < lm_reports[0].mean_mse;
    cv.extend(lm_reports.into_iter().skip(1));
    write_json(&out.join("cv.json"), &cv)?;
    write_json(&out.join("selected_features.json"), &selected)?;

    // PCA of type-level prosody.
    let words: Vec<&String> = features.keys().collect();
    let mut rows: Vec<Vec<f64>> = features.values().cloned().collect();
    if opts.standardize_pca {
        let st = Standardizer::fit(&rows)?;
        rows = rows.iter().map(|r| st.apply(r)).collect();
    }
    let pca = fit_pca(&rows)?;
    let points: BTreeMap<String, [f64; 2]> = words
        .iter()
        .zip(&rows)
        .map(|(w, r)| Ok(((*w).clone(), pca.project(r)?)))
        .collect::<Result<_>>()?;
    emit_scatter(&points, pos, out.join("pca_scatter.csv"), None)?;
    write_file(&out.join("pca_scatter.svg"), render_svg(&points, pos))?;
    let meta = ScatterMeta {
        words: points.len(),
        explained_variance_ratio: pca.explained_variance_ratio,
        silhouette: silhouette(&points, pos),
        standardized: opts.standardize_pca,
    };
    write_json(&out.join("pca_meta.json"), &meta)?;

    let summary = PipelineSummary {
        seed: opts.seed,
        corpus: CorpusSummary {
            utterances: corpus.len(),
            tokens: corpus.token_count(),
            types: freq.len(),
            train_utterances: train.len(),
            test_utterances: test.len(),
            aoa_targets: aoa.len(),
        },
        quantizers,
        perplexity: ppl,
        sweep_groups: groups.iter().map(|(n, _)| n.clone()).collect(),
        sweep_top: sweeps
            .iter()
            .map(|rows| {
                rows.iter()
                    .filter(|r| r.feature != FREQUENCY_PREDICTOR)
                    .take(opts.top_n)
                    .map(|r| r.feature.clone())
                    .collect()
            })
            .collect(),
        selected_features: selected,
        cv,
        pca: meta,
        trends: Trends {
            prosody_training_order: trend_order,
            selected_features_beat_frequency: selected_better,
            lm_predictors_beat_frequency: lm_better,
        },
    };
    write_json(&out.join("summary.json"), &summary)?;
    write_file(&out.join("summary.txt"), render_summary(&summary, &opts.ks))?;
    Ok(summary)
}
