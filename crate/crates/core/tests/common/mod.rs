//! Reference implementations used as test oracles. Deliberately naive: they
//! scan raw data instead of sharing any code path with the library.
#![allow(dead_code)]

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet, HashMap};

use prosolm::corpus::{Corpus, ProsClass, QuantizedCorpus, Token, Utterance};
use prosolm::flm::{FactorValue, FactoredLm, ModelConfig, Smoothing};
use rand::Rng;

// ---------------------------------------------------------------- corpora

/// Random labelled corpus of at most `max_tokens` tokens over `n_words`
/// word types and `k` prosody classes; roughly one token in eight is NOPROS.
pub fn random_quantized(rng: &mut impl Rng, n_words: usize, k: usize, max_tokens: usize) -> QuantizedCorpus {
    let mut utts = Vec::new();
    let mut labels = Vec::new();
    let mut used = 0;
    while used < max_tokens {
        let len = rng.random_range(1..=5).min(max_tokens - used);
        used += len;
        let mut toks = Vec::new();
        let mut labs = Vec::new();
        for _ in 0..len {
            toks.push(Token::new(format!("w{}", rng.random_range(0..n_words)), None));
            labs.push(if rng.random_bool(0.125) {
                ProsClass::NOPROS
            } else {
                ProsClass::new(rng.random_range(0..k as u32))
            });
        }
        utts.push(Utterance {
            id: format!("u{}", utts.len()),
            child: "c1".into(),
            speaker: "MOT".into(),
            tokens: toks,
        });
        labels.push(labs);
    }
    // Every class must occur so prosody configurations can train.
    labels[0][0] = ProsClass::new(0);
    QuantizedCorpus::new(Corpus::new("rand", utts).unwrap(), labels).unwrap()
}

// ---------------------------------------------------------------- language model

const BOS: &str = "<s>";
const EOS: &str = "</s>";
const UNK: &str = "<unk>";

/// Slots: 0 = w-2, 1 = w-1, 2 = p-1, 3 = p0.
fn config_slots(config: ModelConfig) -> Vec<usize> {
    match config.name() {
        "uni" => vec![],
        "bi" => vec![1],
        "tri" => vec![0, 1],
        "bi_prosUni" => vec![1, 3],
        "bi_prosBi" => vec![1, 2, 3],
        "tri_prosUni" => vec![0, 1, 3],
        "tri_prosBi" => vec![0, 1, 2, 3],
        other => panic!("unknown config {other}"),
    }
}

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Ctx {
    pub w2: String,
    pub w1: String,
    pub p1: i32,
    pub p0: i32,
}

impl Ctx {
    fn get(&self, slot: usize) -> (Option<&str>, i32) {
        match slot {
            0 => (Some(&self.w2), 0),
            1 => (Some(&self.w1), 0),
            2 => (None, self.p1),
            _ => (None, self.p0),
        }
    }

    fn matches(&self, other: &Ctx, slots: &[usize]) -> bool {
        slots.iter().all(|&s| self.get(s) == other.get(s))
    }

    fn masked(&self, slots: &[usize]) -> Vec<(Option<String>, i32)> {
        slots.iter().map(|&s| {
            let (w, p) = self.get(s);
            (w.map(str::to_string), p)
        }).collect()
    }
}

/// Brute-force backoff LM: stores every training event and recounts on each
/// query. Witten-Bell and maximum likelihood, backoff dropping w-2, p-1, p0,
/// w-1 in that order, uniform floor over the prediction vocabulary.
pub struct BruteLm {
    levels: Vec<Vec<usize>>,
    events: Vec<(Ctx, String)>,
    pub kept: BTreeSet<String>,
    n_pred: f64,
    smoothing: Smoothing,
    memo: RefCell<HashMap<(usize, Vec<(Option<String>, i32)>, String), f64>>,
}

impl BruteLm {
    pub fn train(qc: &QuantizedCorpus, config: ModelConfig, smoothing: Smoothing, unk_threshold: u64) -> Self {
        let mut freq: BTreeMap<&str, u64> = BTreeMap::new();
        for (u, _) in qc.iter() {
            for t in &u.tokens {
                *freq.entry(t.word.as_str()).or_default() += 1;
            }
        }
        let kept: BTreeSet<String> = freq
            .iter()
            .filter(|(_, &c)| c > unk_threshold)
            .map(|(w, _)| w.to_string())
            .collect();
        let map = |w: &str| if kept.contains(w) { w.to_string() } else { UNK.to_string() };
        let mut events = Vec::new();
        for (u, labs) in qc.iter() {
            let words: Vec<String> = u.tokens.iter().map(|t| map(&t.word)).collect();
            let n = words.len();
            let w_at = |i: isize| if i < 0 { BOS.to_string() } else { words[i as usize].clone() };
            let p_at = |i: isize| if i < 0 || i as usize >= n { -1 } else { labs[i as usize].raw() };
            for i in 0..=n as isize {
                let target = if (i as usize) < n { words[i as usize].clone() } else { EOS.to_string() };
                events.push((Ctx { w2: w_at(i - 2), w1: w_at(i - 1), p1: p_at(i - 1), p0: p_at(i) }, target));
            }
        }
        let mut slots = config_slots(config);
        let mut levels = vec![slots.clone()];
        for drop in [0, 2, 3, 1] {
            if let Some(i) = slots.iter().position(|&s| s == drop) {
                slots.remove(i);
                levels.push(slots.clone());
            }
        }
        let n_pred = (kept.len() + 2) as f64;
        BruteLm { levels, events, kept, n_pred, smoothing, memo: RefCell::new(HashMap::new()) }
    }

    pub fn prediction_vocab(&self) -> Vec<String> {
        let mut v = vec![EOS.to_string(), UNK.to_string()];
        v.extend(self.kept.iter().cloned());
        v
    }

    pub fn prob(&self, ctx: &Ctx, word: &str) -> f64 {
        let norm = |w: &str| if w == BOS || self.kept.contains(w) { w.to_string() } else { UNK.to_string() };
        let ctx = Ctx { w2: norm(&ctx.w2), w1: norm(&ctx.w1), ..ctx.clone() };
        let word = if word == EOS { word.to_string() } else { norm(word) };
        self.p(0, &ctx, &word)
    }

    fn p(&self, level: usize, ctx: &Ctx, w: &str) -> f64 {
        let key = (level, ctx.masked(&self.levels[level]), w.to_string());
        if let Some(&v) = self.memo.borrow().get(&key) {
            return v;
        }
        let v = self.p_uncached(level, ctx, w);
        self.memo.borrow_mut().insert(key, v);
        v
    }

    fn p_uncached(&self, level: usize, ctx: &Ctx, w: &str) -> f64 {
        let last = level + 1 == self.levels.len();
        let mut counts: BTreeMap<&str, f64> = BTreeMap::new();
        for (c, t) in &self.events {
            if c.matches(ctx, &self.levels[level]) {
                *counts.entry(t.as_str()).or_default() += 1.0;
            }
        }
        if counts.is_empty() {
            return if last { 0.0 } else { self.p(level + 1, ctx, w) };
        }
        let c: f64 = counts.values().sum();
        let t = counts.len() as f64;
        let own = counts.get(w).copied();
        if self.smoothing == Smoothing::MaxLikelihood || t == self.n_pred {
            return own.unwrap_or(0.0) / c;
        }
        let lower_mass = if last {
            (self.n_pred - t) / self.n_pred
        } else {
            1.0 - counts.keys().map(|v| self.p(level + 1, ctx, v)).sum::<f64>()
        };
        if lower_mass <= 0.0 {
            return own.unwrap_or(0.0) / c;
        }
        match own {
            Some(n) => n / (c + t),
            None => {
                let lower = if last { 1.0 / self.n_pred } else { self.p(level + 1, ctx, w) };
                t / (c + t) / lower_mass * lower
            }
        }
    }
}

/// Every context a model can be queried with: history words from the
/// vocabulary (plus `<s>` and `<unk>`), prosody classes from NOPROS to k-1.
pub fn all_contexts(lm: &FactoredLm) -> Vec<Ctx> {
    let words: Vec<String> = lm.vocab().iter().filter(|w| *w != EOS).cloned().collect();
    let slots = config_slots(lm.config());
    let ws = |slot: usize| if slots.contains(&slot) { words.clone() } else { vec![BOS.to_string()] };
    let ps = |slot: usize| -> Vec<i32> { if slots.contains(&slot) { (-1..lm.k() as i32).collect() } else { vec![-1] } };
    let mut out = Vec::new();
    for w2 in ws(0) {
        for w1 in ws(1) {
            for &p1 in &ps(2) {
                for &p0 in &ps(3) {
                    out.push(Ctx { w2: w2.clone(), w1: w1.clone(), p1, p0 });
                }
            }
        }
    }
    out
}

/// Library query for an oracle context.
pub fn lib_prob(lm: &FactoredLm, ctx: &Ctx, word: &str) -> f64 {
    let vals: Vec<FactorValue> = config_slots(lm.config())
        .into_iter()
        .map(|s| match s {
            0 => FactorValue::Word(ctx.w2.clone()),
            1 => FactorValue::Word(ctx.w1.clone()),
            2 => FactorValue::Pros(ProsClass::from_raw(ctx.p1).unwrap()),
            _ => FactorValue::Pros(ProsClass::from_raw(ctx.p0).unwrap()),
        })
        .collect();
    lm.prob(&vals, word).unwrap()
}

/// Largest deviation of Σ_w p(w | ctx) from 1 over all contexts.
pub fn max_normalization_error(lm: &FactoredLm) -> f64 {
    let pred: Vec<String> = lm.prediction_vocab().map(str::to_string).collect();
    all_contexts(lm)
        .iter()
        .map(|ctx| (pred.iter().map(|w| lib_prob(lm, ctx, w)).sum::<f64>() - 1.0).abs())
        .fold(0.0, f64::max)
}

/// Largest |library - oracle| over every context and predictable word.
pub fn max_oracle_error(lm: &FactoredLm, qc: &QuantizedCorpus) -> f64 {
    let oracle = BruteLm::train(qc, lm.config(), lm.smoothing(), lm.unk_threshold());
    let pred = oracle.prediction_vocab();
    let lib_pred: BTreeSet<&str> = lm.prediction_vocab().collect();
    assert_eq!(lib_pred, pred.iter().map(String::as_str).collect::<BTreeSet<_>>());
    let mut worst = 0.0f64;
    for ctx in all_contexts(lm) {
        for w in &pred {
            worst = worst.max((lib_prob(lm, &ctx, w) - oracle.prob(&ctx, w)).abs());
        }
    }
    worst
}

// ---------------------------------------------------------------- linear algebra

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

/// Ridge with unpenalized intercept via the centered normal equations.
pub fn ridge_oracle(rows: &[Vec<f64>], y: &[f64], lambda: f64) -> (Vec<f64>, f64) {
    let n = rows.len() as f64;
    let p = rows[0].len();
    let xm: Vec<f64> = (0..p).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n).collect();
    let ym = y.iter().sum::<f64>() / n;
    let mut a = vec![vec![0.0; p]; p];
    let mut b = vec![0.0; p];
    for (r, &yi) in rows.iter().zip(y) {
        for i in 0..p {
            b[i] += (r[i] - xm[i]) * (yi - ym);
            for j in 0..p {
                a[i][j] += (r[i] - xm[i]) * (r[j] - xm[j]);
            }
        }
    }
    for (i, row) in a.iter_mut().enumerate() {
        row[i] += lambda;
    }
    let beta = gauss_solve(a, b);
    let intercept = ym - beta.iter().zip(&xm).map(|(b, m)| b * m).sum::<f64>();
    (beta, intercept)
}

/// Cyclic Jacobi eigen-decomposition of a symmetric matrix. Returns
/// eigenvalues in descending order with unit eigenvectors.
pub fn jacobi_eigen(mut a: Vec<Vec<f64>>) -> Vec<(f64, Vec<f64>)> {
    let n = a.len();
    let mut v: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| f64::from(u8::from(i == j))).collect()).collect();
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i][j] * a[i][j]).sum();
        let scale: f64 = (0..n).map(|i| a[i][i] * a[i][i]).sum::<f64>() + off;
        if off <= 1e-30 * scale.max(1e-300) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let (vkp, vkq) = (row[p], row[q]);
                    row[p] = c * vkp - s * vkq;
                    row[q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut out: Vec<(f64, Vec<f64>)> = (0..n).map(|i| (a[i][i], v.iter().map(|r| r[i]).collect())).collect();
    out.sort_by(|x, y| y.0.total_cmp(&x.0));
    out
}

/// Sample covariance (n - 1 divisor) of row vectors.
pub fn covariance(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = rows.len() as f64;
    let d = rows[0].len();
    let m: Vec<f64> = (0..d).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n).collect();
    let mut c = vec![vec![0.0; d]; d];
    for r in rows {
        for i in 0..d {
            for j in 0..d {
                c[i][j] += (r[i] - m[i]) * (r[j] - m[j]);
            }
        }
    }
    c.iter_mut().flatten().for_each(|x| *x /= n - 1.0);
    c
}

pub fn normal(rng: &mut impl Rng) -> f64 {
    // Box-Muller keeps the oracle side free of library distributions.
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}
