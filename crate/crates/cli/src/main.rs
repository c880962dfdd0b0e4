use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use prosolm::corpus::{self, AoaDataset, PosLabels, QuantizedCorpus};
use prosolm::flm::{avg_word_probability, perplexity, FactoredLm, ModelConfig, PerplexityReport, Smoothing, TrainOptions};
use prosolm::pcaviz::{emit_scatter, fit_pca, silhouette, ScatterMeta};
use prosolm::pipeline::{cv_report, run_pipeline, write_word_probs_csv, PipelineOptions};
use prosolm::quantizer::{fit_corpus, KMeansOptions, QuantizerModel, Standardizer};
use prosolm::regress::{single_feature_sweep, write_sweep_csv, CvConfig, DesignMatrix, PredictorColumn, SweepMode};
use prosolm::synth::{synth, SynthSpec};
use prosolm::{Error, ErrorKind, Result};

const EXIT_USAGE: u8 = 2;

#[derive(Parser)]
#[command(name = "prosolm", version, about = "Prosody-aware language models and age-of-acquisition regression")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic corpus with AoA and POS tables.
    Synth(SynthArgs),
    /// Fit a k-means prosody codebook.
    QuantizeFit(QuantizeFitArgs),
    /// Label every token of a corpus with its prosody class.
    QuantizeApply(QuantizeApplyArgs),
    /// Train one factored language model.
    LmTrain(LmTrainArgs),
    /// Perplexity of a model on a corpus.
    LmPpl(LmPplArgs),
    /// Average per-word probability under a model.
    LmWordprobs(LmWordprobsArgs),
    /// Single-feature cross-validation sweep over the 88 prosodic features.
    AoaSweep(AoaSweepArgs),
    /// Cross-validated ridge regression for one predictor set.
    AoaCv(AoaCvArgs),
    /// Two-dimensional PCA scatter of type-level prosody.
    Pca(PcaArgs),
    /// Run the whole experiment end to end.
    Pipeline(PipelineArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Output directory for corpus.jsonl, aoa.csv and pos.csv.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// JSON generator spec; omitted fields take their defaults.
    #[arg(long)]
    spec: Option<PathBuf>,
}

#[derive(Args)]
struct QuantizeFitArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct QuantizeApplyArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    codebook: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct LmTrainArgs {
    /// Quantized corpus (plain corpora are fine for word-only models).
    #[arg(long)]
    corpus: PathBuf,
    /// Model configuration: uni, bi, tri, bi_prosUni, bi_prosBi, tri_prosUni, tri_prosBi.
    #[arg(long)]
    config: ModelConfig,
    #[arg(long, default_value = "wb")]
    smoothing: Smoothing,
    #[arg(long, default_value_t = 1)]
    unk_threshold: u64,
    /// Prosody alphabet size; defaults to the largest label plus one.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct LmPplArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    /// Codebook used to label an unquantized corpus; must match the model's k.
    #[arg(long)]
    codebook: Option<PathBuf>,
    /// CSV output; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct LmWordprobsArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    codebook: Option<PathBuf>,
    /// Restrict to these AoA targets; every corpus word otherwise.
    #[arg(long)]
    aoa: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CvArgs {
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long, default_value_t = 10)]
    folds: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl CvArgs {
    fn config(&self) -> CvConfig {
        CvConfig {
            lambda: self.lambda,
            folds: self.folds,
            seed: self.seed,
        }
    }
}

#[derive(Args)]
struct AoaSweepArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    aoa: PathBuf,
    /// alone or with_frequency.
    #[arg(long, default_value = "with_frequency")]
    mode: SweepMode,
    #[command(flatten)]
    cv: CvArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AoaCvArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    aoa: PathBuf,
    /// `+`-joined predictors: `f`, eGeMAPS feature names, or model names
    /// from the --wordprobs table.
    #[arg(long, default_value = "f")]
    predictors: String,
    /// Word probability CSV from lm-wordprobs or pipeline.
    #[arg(long)]
    wordprobs: Option<PathBuf>,
    #[command(flatten)]
    cv: CvArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PcaArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    pos: Option<PathBuf>,
    /// Fit on raw feature values instead of z-scores.
    #[arg(long)]
    raw: bool,
    /// Output directory for scatter.csv, scatter.svg and meta.json.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PipelineArgs {
    /// Real corpus; a synthetic one is generated when omitted.
    #[arg(long, requires_all = ["aoa"])]
    corpus: Option<PathBuf>,
    #[arg(long)]
    aoa: Option<PathBuf>,
    #[arg(long)]
    pos: Option<PathBuf>,
    /// JSON generator spec for the synthetic corpus.
    #[arg(long, conflicts_with = "corpus")]
    spec: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Single codebook size instead of 50, 100 and 500.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value = "wb")]
    smoothing: Smoothing,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long, default_value_t = 10)]
    folds: usize,
    #[arg(long, default_value_t = 0.1)]
    test_frac: f64,
    #[arg(long, default_value_t = 1)]
    unk_threshold: u64,
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    fs::File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn load_spec(path: Option<&Path>, seed: u64) -> Result<SynthSpec> {
    let mut spec: SynthSpec = match path {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
        }
        None => SynthSpec::default(),
    };
    spec.seed = seed;
    Ok(spec)
}

/// Loads a corpus, labeling it with `codebook` when given, or using its
/// stored labels otherwise.
fn load_labeled(path: &Path, codebook: Option<&Path>) -> Result<(QuantizedCorpus, Option<QuantizerModel>)> {
    let (c, labels) = corpus::load_maybe_quantized(path)?;
    match codebook {
        Some(cb) => {
            let q = QuantizerModel::load(cb)?;
            Ok((q.quantize_corpus(&c)?, Some(q)))
        }
        None => Ok((
            match labels {
                Some(l) => QuantizedCorpus::new(c, l)?,
                None => QuantizedCorpus::unlabeled(c),
            },
            None,
        )),
    }
}

fn check_codebook(lm: &FactoredLm, q: Option<&QuantizerModel>) -> Result<()> {
    if let Some(q) = q {
        if lm.config().uses_prosody() && q.k != lm.k() {
            return Err(Error::CodebookMismatch(format!(
                "codebook has k = {}, model was trained with k = {}",
                q.k,
                lm.k()
            )));
        }
    }
    Ok(())
}

fn read_word_probs(path: &Path) -> Result<Vec<(String, BTreeMap<String, f64>)>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::io(path, e.into()))?;
    let headers = rdr.headers().map_err(|e| Error::Format(format!("{}: {e}", path.display())))?.clone();
    if headers.get(0) != Some("word") || headers.len() < 2 {
        return Err(Error::Format(format!("{}: expected header word,<model>…", path.display())));
    }
    let mut maps: Vec<(String, BTreeMap<String, f64>)> =
        headers.iter().skip(1).map(|h| (h.to_string(), BTreeMap::new())).collect();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        let word = rec.get(0).unwrap_or_default().to_string();
        for (j, cell) in rec.iter().skip(1).enumerate() {
            if cell.is_empty() {
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                line: i + 2,
                message: format!("bad probability {cell:?}"),
            })?;
            maps[j].1.insert(word.clone(), v);
        }
    }
    Ok(maps)
}

fn cmd_synth(a: &SynthArgs) -> Result<()> {
    let out = synth(&load_spec(a.spec.as_deref(), a.seed)?)?;
    fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
    corpus::save_corpus(&out.corpus, a.out.join("corpus.jsonl"))?;
    out.aoa.write(create(&a.out.join("aoa.csv"))?)?;
    out.pos.write(create(&a.out.join("pos.csv"))?)?;
    Ok(())
}

fn cmd_lm_train(a: &LmTrainArgs) -> Result<()> {
    let (qc, _) = load_labeled(&a.corpus, None)?;
    let opts = TrainOptions {
        smoothing: a.smoothing,
        unk_threshold: a.unk_threshold,
        k: a.k,
        ..TrainOptions::default()
    };
    FactoredLm::train(&qc, a.config, &opts)?.save(&a.out)
}

fn cmd_lm_ppl(a: &LmPplArgs) -> Result<()> {
    let lm = FactoredLm::load(&a.model)?;
    let (qc, q) = load_labeled(&a.corpus, a.codebook.as_deref())?;
    check_codebook(&lm, q.as_ref())?;
    let r = perplexity(&lm, &qc)?;
    let text = format!(
        "{}\n{}\n",
        PerplexityReport::CSV_HEADER,
        r.csv_row(lm.config().name(), &qc.corpus.name, lm.k())
    );
    match &a.out {
        Some(p) => fs::write(p, text).map_err(|e| Error::io(p, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cmd_lm_wordprobs(a: &LmWordprobsArgs) -> Result<()> {
    let lm = FactoredLm::load(&a.model)?;
    let (qc, q) = load_labeled(&a.corpus, a.codebook.as_deref())?;
    check_codebook(&lm, q.as_ref())?;
    let targets: BTreeSet<String> = match &a.aoa {
        Some(p) => AoaDataset::load(p)?.words().map(str::to_string).collect(),
        None => qc.corpus.word_frequencies().into_keys().collect(),
    };
    let probs = avg_word_probability(&lm, &qc, &targets)?;
    write_word_probs_csv(&[(lm.config().name().to_string(), probs)], create(&a.out)?)
}

fn cmd_aoa_sweep(a: &AoaSweepArgs) -> Result<()> {
    let c = corpus::load_corpus(&a.corpus)?;
    let aoa = AoaDataset::load(&a.aoa)?;
    let rows = single_feature_sweep(&c.word_frequencies(), &c.type_level_average(), &aoa, a.mode, &a.cv.config())?;
    write_sweep_csv(&rows, create(&a.out)?)
}

fn cmd_aoa_cv(a: &AoaCvArgs) -> Result<()> {
    let c = corpus::load_corpus(&a.corpus)?;
    let aoa = AoaDataset::load(&a.aoa)?;
    let probs = match &a.wordprobs {
        Some(p) => read_word_probs(p)?,
        None => Vec::new(),
    };
    let freq: BTreeMap<String, f64> = c.word_frequencies().into_iter().map(|(w, n)| (w, n as f64)).collect();
    let features = c.type_level_average();
    let mut owned: Vec<(String, BTreeMap<String, f64>, bool)> = Vec::new();
    for name in a.predictors.split('+') {
        if name == "f" {
            owned.push((name.into(), freq.clone(), true));
        } else if let Some((_, m)) = probs.iter().find(|(n, _)| n == name) {
            owned.push((name.into(), m.clone(), true));
        } else if let Some(d) = prosolm::features::feature_index(name) {
            owned.push((name.into(), features.iter().map(|(w, v)| (w.clone(), v[d])).collect(), false));
        } else {
            return Err(Error::Config(format!("unknown predictor {name:?}")));
        }
    }
    let columns: Vec<PredictorColumn<'_>> = owned
        .iter()
        .map(|(n, v, log)| PredictorColumn {
            name: n,
            values: v,
            log: *log,
        })
        .collect();
    let dm = DesignMatrix::build(&aoa, &columns)?;
    write_json(&a.out, &cv_report(&dm, &a.cv.config())?)
}

fn cmd_pca(a: &PcaArgs) -> Result<()> {
    let c = corpus::load_corpus(&a.corpus)?;
    let pos = match &a.pos {
        Some(p) => PosLabels::load(p)?,
        None => PosLabels::default(),
    };
    let features = c.type_level_average();
    let mut rows: Vec<Vec<f64>> = features.values().cloned().collect();
    if !a.raw {
        let st = Standardizer::fit(&rows)?;
        rows = rows.iter().map(|r| st.apply(r)).collect();
    }
    let model = fit_pca(&rows)?;
    let points: BTreeMap<String, [f64; 2]> = features
        .keys()
        .zip(&rows)
        .map(|(w, r)| Ok((w.clone(), model.project(r)?)))
        .collect::<Result<_>>()?;
    fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
    emit_scatter(&points, &pos, a.out.join("scatter.csv"), Some(&a.out.join("scatter.svg")))?;
    write_json(
        &a.out.join("meta.json"),
        &ScatterMeta {
            words: points.len(),
            explained_variance_ratio: model.explained_variance_ratio,
            silhouette: silhouette(&points, &pos),
            standardized: !a.raw,
        },
    )
}

fn cmd_pipeline(a: &PipelineArgs) -> Result<()> {
    let (c, aoa, pos) = match &a.corpus {
        Some(p) => {
            let c = corpus::load_corpus(p)?;
            let aoa = AoaDataset::load(a.aoa.as_ref().expect("required by clap"))?;
            let pos = match &a.pos {
                Some(p) => PosLabels::load(p)?,
                None => PosLabels::default(),
            };
            (c, aoa, pos)
        }
        None => {
            let spec = load_spec(a.spec.as_deref(), prosolm::seed::derive(a.seed, "synth"))?;
            let out = synth(&spec)?;
            (out.corpus, out.aoa, out.pos)
        }
    };
    let mut opts = PipelineOptions {
        seed: a.seed,
        test_frac: a.test_frac,
        smoothing: a.smoothing,
        unk_threshold: a.unk_threshold,
        lambda: a.lambda,
        folds: a.folds,
        ..PipelineOptions::default()
    };
    if let Some(k) = a.k {
        opts.ks = vec![k];
        opts.regression_k = k;
    }
    let summary = run_pipeline(&c, &aoa, &pos, &opts, &a.out)?;
    log::info!("pipeline finished: {} perplexity rows", summary.perplexity.len());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(a) => cmd_synth(&a),
        Command::QuantizeFit(a) => {
            let c = corpus::load_corpus(&a.corpus)?;
            fit_corpus(&c, a.k, a.seed, &KMeansOptions::default())?.save(&a.out)
        }
        Command::QuantizeApply(a) => {
            let c = corpus::load_corpus(&a.corpus)?;
            let q = QuantizerModel::load(&a.codebook)?;
            corpus::save_quantized(&q.quantize_corpus(&c)?, &a.out)
        }
        Command::LmTrain(a) => cmd_lm_train(&a),
        Command::LmPpl(a) => cmd_lm_ppl(&a),
        Command::LmWordprobs(a) => cmd_lm_wordprobs(&a),
        Command::AoaSweep(a) => cmd_aoa_sweep(&a),
        Command::AoaCv(a) => cmd_aoa_cv(&a),
        Command::Pca(a) => cmd_pca(&a),
        Command::Pipeline(a) => cmd_pipeline(&a),
    }
}

fn init_threads() -> std::result::Result<(), String> {
    let Ok(value) = std::env::var("PROSOLM_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .map_err(|_| format!("PROSOLM_THREADS must be a non-negative integer, got {value:?}"))?;
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| e.to_string())?;
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    if let Err(msg) = init_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(EXIT_USAGE);
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.kind() {
                ErrorKind::Schema => 3,
                ErrorKind::Infeasible => 4,
                ErrorKind::Io => 5,
            })
        }
    }
}
