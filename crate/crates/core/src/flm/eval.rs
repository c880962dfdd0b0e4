use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::model::FactoredLm;
use crate::corpus::QuantizedCorpus;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerplexityReport {
    /// Natural-log probability summed over predicted tokens.
    pub log_prob_sum: f64,
    pub predicted_token_count: u64,
    pub perplexity: f64,
    pub oov_count: u64,
}

impl PerplexityReport {
    pub const CSV_HEADER: &'static str = "model,corpus,k,tokens,oov,logprob,ppl";

    /// One `model,corpus,k,tokens,oov,logprob,ppl` row.
    pub fn csv_row(&self, model: &str, corpus: &str, k: usize) -> String {
        format!(
            "{model},{corpus},{k},{},{},{},{}",
            self.predicted_token_count, self.oov_count, self.log_prob_sum, self.perplexity
        )
    }
}

fn check_labels(lm: &FactoredLm, corpus: &QuantizedCorpus) -> Result<()> {
    if let Some(m) = corpus.max_label() {
        if lm.config().uses_prosody() && m as usize >= lm.k() {
            return Err(Error::CodebookMismatch(format!(
                "corpus has prosody class {m}, model alphabet has {} classes",
                lm.k()
            )));
        }
    }
    Ok(())
}

/// Perplexity over every word of `corpus` plus `</s>` per utterance when the
/// model predicts boundaries. Out-of-vocabulary words are scored as `<unk>`
/// and counted.
pub fn perplexity(lm: &FactoredLm, corpus: &QuantizedCorpus) -> Result<PerplexityReport> {
    if corpus.corpus.is_empty() {
        return Err(Error::EmptyInput("evaluation corpus has no utterances".into()));
    }
    check_labels(lm, corpus)?;
    let mut log_prob_sum = 0.0;
    let mut n = 0u64;
    let mut oov = 0u64;
    for (utt, labels) in corpus.iter() {
        for ev in lm.events(utt, labels) {
            log_prob_sum += lm.prob_ids(&ev.key, ev.word).ln();
            n += 1;
            oov += u64::from(ev.oov);
        }
    }
    Ok(PerplexityReport {
        log_prob_sum,
        predicted_token_count: n,
        perplexity: (-log_prob_sum / n as f64).exp(),
        oov_count: oov,
    })
}

/// Mean probability the model assigns to each target word over its token
/// occurrences in `corpus`, each scored in its actual context. Targets that
/// never occur are absent from the result.
pub fn avg_word_probability(
    lm: &FactoredLm,
    corpus: &QuantizedCorpus,
    targets: &BTreeSet<String>,
) -> Result<BTreeMap<String, f64>> {
    if targets.is_empty() {
        return Err(Error::InvalidInput("no target words".into()));
    }
    check_labels(lm, corpus)?;
    let mut acc: BTreeMap<&str, (f64, u64)> = BTreeMap::new();
    for (utt, labels) in corpus.iter() {
        for ev in lm.events(utt, labels) {
            let Some(i) = ev.token else { continue };
            let word = utt.tokens[i].word.as_str();
            if targets.contains(word) {
                let e = acc.entry(word).or_insert((0.0, 0));
                e.0 += lm.prob_ids(&ev.key, ev.word);
                e.1 += 1;
            }
        }
    }
    Ok(acc
        .into_iter()
        .map(|(w, (s, n))| (w.to_string(), s / n as f64))
        .collect())
}
