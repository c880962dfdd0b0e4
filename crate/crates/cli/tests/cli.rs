use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn prosolm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_prosolm")).args(args).output().expect("binary runs")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

/// Small synthetic corpus, codebook with k = 4 and its quantized corpus.
struct Fixture {
    _dir: tempfile::TempDir,
    root: PathBuf,
}

impl Fixture {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        let spec = root.join("spec.json");
        fs::write(&spec, r#"{"vocab_size": 30, "utterance_count": 300}"#).unwrap();
        let data = root.join("data");
        let out = prosolm(&["synth", "--out", p(&data), "--seed", "3", "--spec", p(&spec)]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        let fx = Fixture { _dir: dir, root };
        let out = prosolm(&["quantize-fit", "--corpus", p(&fx.path("data/corpus.jsonl")), "--k", "4", "--out", p(&fx.path("cb4.txt"))]);
        assert_eq!(code(&out), 0);
        let out = prosolm(&[
            "quantize-apply",
            "--corpus",
            p(&fx.path("data/corpus.jsonl")),
            "--codebook",
            p(&fx.path("cb4.txt")),
            "--out",
            p(&fx.path("q.jsonl")),
        ]);
        assert_eq!(code(&out), 0);
        fx
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }
}

#[test]
fn language_model_round() {
    let fx = Fixture::new();
    let model = fx.path("m.flm");
    let out = prosolm(&["lm-train", "--corpus", p(&fx.path("q.jsonl")), "--config", "tri_prosBi", "--k", "4", "--out", p(&model)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let out = prosolm(&["lm-ppl", "--model", p(&model), "--corpus", p(&fx.path("q.jsonl"))]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("model,corpus,k,tokens,oov,logprob,ppl"));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row[0], "tri_prosBi");
    assert_eq!(row[2], "4");
    assert!(row[6].parse::<f64>().unwrap() >= 1.0);

    // Labelling the raw corpus with the same codebook gives the same numbers.
    let out2 = prosolm(&[
        "lm-ppl",
        "--model",
        p(&model),
        "--corpus",
        p(&fx.path("data/corpus.jsonl")),
        "--codebook",
        p(&fx.path("cb4.txt")),
    ]);
    assert_eq!(code(&out2), 0);
    let text2 = String::from_utf8(out2.stdout).unwrap();
    assert_eq!(text.lines().nth(1).unwrap().split(',').skip(2).collect::<Vec<_>>(), text2.lines().nth(1).unwrap().split(',').skip(2).collect::<Vec<_>>());

    let probs = fx.path("wp.csv");
    let out = prosolm(&[
        "lm-wordprobs",
        "--model",
        p(&model),
        "--corpus",
        p(&fx.path("q.jsonl")),
        "--aoa",
        p(&fx.path("data/aoa.csv")),
        "--out",
        p(&probs),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(fs::read_to_string(&probs).unwrap().lines().count() > 1);
}

#[test]
fn codebook_size_mismatch_is_a_format_error() {
    let fx = Fixture::new();
    let model = fx.path("m.flm");
    assert_eq!(code(&prosolm(&["lm-train", "--corpus", p(&fx.path("q.jsonl")), "--config", "bi_prosUni", "--out", p(&model)])), 0);
    let out = prosolm(&["quantize-fit", "--corpus", p(&fx.path("data/corpus.jsonl")), "--k", "3", "--out", p(&fx.path("cb3.txt"))]);
    assert_eq!(code(&out), 0);
    let out = prosolm(&[
        "lm-ppl",
        "--model",
        p(&model),
        "--corpus",
        p(&fx.path("data/corpus.jsonl")),
        "--codebook",
        p(&fx.path("cb3.txt")),
    ]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn regression_and_pca_outputs() {
    let fx = Fixture::new();
    let corpus = fx.path("data/corpus.jsonl");
    let aoa = fx.path("data/aoa.csv");
    let sweep = fx.path("sweep.csv");
    let out = prosolm(&["aoa-sweep", "--corpus", p(&corpus), "--aoa", p(&aoa), "--folds", "5", "--out", p(&sweep)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&sweep).unwrap();
    assert!(text.starts_with("rank,feature,mode,mean_mse,"));
    assert_eq!(text.lines().count(), 1 + 89);

    let cv = fx.path("cv.json");
    let out = prosolm(&[
        "aoa-cv",
        "--corpus",
        p(&corpus),
        "--aoa",
        p(&aoa),
        "--predictors",
        "f+VoicedSegmentsPerSec",
        "--folds",
        "5",
        "--out",
        p(&cv),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&cv).unwrap()).unwrap();
    assert_eq!(v["fold_mses"].as_array().unwrap().len(), 5);
    for key in ["predictors", "lambda", "seed", "mean_mse", "dropped_words"] {
        assert!(v.get(key).is_some(), "{key}");
    }

    let pca = fx.path("pca");
    let out = prosolm(&["pca", "--corpus", p(&corpus), "--pos", p(&fx.path("data/pos.csv")), "--out", p(&pca)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(pca.join("scatter.csv")).unwrap();
    assert!(csv.starts_with("word,pc1,pc2,pos"));
    assert!(fs::read_to_string(pca.join("scatter.svg")).unwrap().contains("<svg"));
    let meta: serde_json::Value = serde_json::from_str(&fs::read_to_string(pca.join("meta.json")).unwrap()).unwrap();
    assert!(meta["silhouette"].is_number());
}

#[test]
fn exit_codes() {
    assert_eq!(code(&prosolm(&["no-such-command"])), 2);
    assert_eq!(code(&prosolm(&["lm-train", "--config", "bi"])), 2);
    assert_eq!(code(&prosolm(&["--help"])), 0);

    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.jsonl");
    assert_eq!(code(&prosolm(&["quantize-fit", "--corpus", p(&missing), "--k", "2", "--out", p(&dir.path().join("c"))])), 5);

    let bad = dir.path().join("bad.jsonl");
    fs::write(&bad, "{\"id\": \"u1\", \"words\": 3}\n").unwrap();
    assert_eq!(code(&prosolm(&["quantize-fit", "--corpus", p(&bad), "--k", "2", "--out", p(&dir.path().join("c"))])), 3);

    let tiny = dir.path().join("tiny.jsonl");
    let vec88 = format!("[{}]", vec!["0.5"; 88].join(","));
    fs::write(&tiny, format!("{{\"id\":\"u1\",\"child\":\"c1\",\"speaker\":\"MOT\",\"words\":[\"a\",\"b\"],\"prosody\":[{vec88},{vec88}]}}\n")).unwrap();
    assert_eq!(code(&prosolm(&["quantize-fit", "--corpus", p(&tiny), "--k", "5", "--out", p(&dir.path().join("c"))])), 4);

    let out = Command::new(env!("CARGO_BIN_EXE_prosolm"))
        .args(["synth", "--out", p(&dir.path().join("s"))])
        .env("PROSOLM_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(code(&out), 2);
}

#[test]
fn synth_is_deterministic_and_thread_independent() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.json");
    fs::write(&spec, r#"{"vocab_size": 25, "utterance_count": 120}"#).unwrap();
    let run = |name: &str, threads: &str| {
        let out_dir = dir.path().join(name);
        let out = Command::new(env!("CARGO_BIN_EXE_prosolm"))
            .args(["synth", "--seed", "5", "--spec", p(&spec), "--out", p(&out_dir)])
            .env("PROSOLM_THREADS", threads)
            .output()
            .unwrap();
        assert_eq!(code(&out), 0);
        let cb = dir.path().join(format!("{name}.cb"));
        let out = Command::new(env!("CARGO_BIN_EXE_prosolm"))
            .args(["quantize-fit", "--corpus", p(&out_dir.join("corpus.jsonl")), "--k", "6", "--seed", "1", "--out", p(&cb)])
            .env("PROSOLM_THREADS", threads)
            .output()
            .unwrap();
        assert_eq!(code(&out), 0);
        (fs::read(out_dir.join("corpus.jsonl")).unwrap(), fs::read(out_dir.join("aoa.csv")).unwrap(), fs::read(cb).unwrap())
    };
    assert_eq!(run("a", "1"), run("b", "0"));
}
