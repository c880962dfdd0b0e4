use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use super::{BackoffGraph, Factor, ModelConfig};
use crate::corpus::{ProsClass, QuantizedCorpus, Utterance};
use crate::error::{Error, Result};

pub const BOS: &str = "<s>";
pub const EOS: &str = "</s>";
pub const UNK: &str = "<unk>";

pub(crate) const BOS_ID: u32 = 0;
pub(crate) const EOS_ID: u32 = 1;
pub(crate) const UNK_ID: u32 = 2;

/// Marks a slot that a backoff node does not condition on.
pub(crate) const ABSENT: u32 = u32::MAX;

/// Context values in slot order `[w-2, w-1, p-1, p0]`. Prosody classes are
/// stored shifted by one so that NOPROS is 0.
pub(crate) type Key = [u32; 4];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Smoothing {
    /// Relative frequencies; unseen contexts back off, unseen words in a seen
    /// context get zero probability.
    MaxLikelihood,
    /// Witten-Bell discounting with backoff: a context seen `c` times with
    /// `t` distinct successors reserves `t / (c + t)` for unseen words.
    WittenBell,
}

impl Smoothing {
    pub fn name(self) -> &'static str {
        match self {
            Smoothing::MaxLikelihood => "ml",
            Smoothing::WittenBell => "wb",
        }
    }
}

impl fmt::Display for Smoothing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Smoothing {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ml" => Ok(Smoothing::MaxLikelihood),
            "wb" => Ok(Smoothing::WittenBell),
            _ => Err(Error::Config(format!("unknown smoothing {s:?} (expected wb or ml)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainOptions {
    pub smoothing: Smoothing,
    /// Training words seen at most this often become `<unk>`.
    pub unk_threshold: u64,
    /// Predict `</s>` at the end of each utterance.
    pub predict_boundary: bool,
    /// Size of the prosody class alphabet, excluding NOPROS. `None` takes
    /// the largest label in the training corpus plus one.
    pub k: Option<usize>,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            smoothing: Smoothing::WittenBell,
            unk_threshold: 1,
            predict_boundary: true,
            k: None,
        }
    }
}

/// A context value supplied to [`FactoredLm::prob`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FactorValue {
    Word(String),
    Pros(ProsClass),
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct ContextStats {
    pub total: u64,
    /// Successor word ids with counts, sorted by id.
    pub succ: Vec<(u32, u64)>,
    pub probs: Vec<f64>,
    /// Multiplier applied to the next node's probability for unseen words.
    pub bow: f64,
}

impl ContextStats {
    fn lookup(&self, word: u32) -> Option<f64> {
        self.succ
            .binary_search_by_key(&word, |e| e.0)
            .ok()
            .map(|i| self.probs[i])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Node {
    pub factors: Vec<Factor>,
    pub contexts: HashMap<Key, ContextStats>,
}

impl Node {
    pub fn mask(&self, full: &Key) -> Key {
        let mut key = [ABSENT; 4];
        for f in &self.factors {
            key[f.slot()] = full[f.slot()];
        }
        key
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FactoredLm {
    pub(crate) config: ModelConfig,
    pub(crate) smoothing: Smoothing,
    pub(crate) k: usize,
    pub(crate) unk_threshold: u64,
    pub(crate) predict_boundary: bool,
    pub(crate) vocab: Vec<String>,
    pub(crate) index: HashMap<String, u32>,
    pub(crate) nodes: Vec<Node>,
}

pub(crate) fn pros_code(c: ProsClass) -> u32 {
    (c.raw() + 1) as u32
}

/// One predicted position: its full context, the word id, and whether the
/// surface word was out of vocabulary.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Event {
    pub key: Key,
    pub word: u32,
    pub oov: bool,
    /// Index of the token in the utterance; `None` for `</s>`.
    pub token: Option<usize>,
}

impl FactoredLm {
    pub fn train(corpus: &QuantizedCorpus, config: ModelConfig, opts: &TrainOptions) -> Result<Self> {
        if corpus.corpus.is_empty() {
            return Err(Error::EmptyInput("training corpus has no utterances".into()));
        }
        let max_label = corpus.max_label();
        if config.uses_prosody() && max_label.is_none() {
            return Err(Error::Config(format!(
                "{config} conditions on prosody but every token is NOPROS"
            )));
        }
        let k = match (opts.k, max_label) {
            (Some(k), Some(m)) if (m as usize) >= k => {
                return Err(Error::CodebookMismatch(format!(
                    "prosody class {m} outside alphabet of size {k}"
                )))
            }
            (Some(k), _) => k,
            (None, m) => m.map_or(0, |m| m as usize + 1),
        };

        let freq = corpus.corpus.word_frequencies();
        let mut vocab: Vec<String> = vec![BOS.into(), EOS.into(), UNK.into()];
        vocab.extend(
            freq.iter()
                .filter(|(w, &c)| c > opts.unk_threshold && ![BOS, EOS, UNK].contains(&w.as_str()))
                .map(|(w, _)| w.clone()),
        );
        let index = vocab
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i as u32))
            .collect();

        let graph = config.backoff_graph();
        let mut lm = FactoredLm {
            config,
            smoothing: opts.smoothing,
            k,
            unk_threshold: opts.unk_threshold,
            predict_boundary: opts.predict_boundary,
            vocab,
            index,
            nodes: Vec::new(),
        };

        let mut counts: Vec<HashMap<Key, BTreeMap<u32, u64>>> = vec![HashMap::new(); graph.len()];
        let masks: Vec<Node> = graph
            .nodes()
            .iter()
            .map(|f| Node {
                factors: f.clone(),
                contexts: HashMap::new(),
            })
            .collect();
        for (utt, labels) in corpus.iter() {
            for ev in lm.events(utt, labels) {
                for (node, table) in masks.iter().zip(counts.iter_mut()) {
                    *table.entry(node.mask(&ev.key)).or_default().entry(ev.word).or_insert(0) += 1;
                }
            }
        }
        let nodes = masks
            .into_iter()
            .zip(counts)
            .map(|(node, table)| Node {
                factors: node.factors,
                contexts: table
                    .into_iter()
                    .map(|(key, succ)| {
                        let succ: Vec<(u32, u64)> = succ.into_iter().collect();
                        (key, ContextStats::from_counts(succ))
                    })
                    .collect(),
            })
            .collect();
        lm.nodes = nodes;
        lm.finalize();
        Ok(lm)
    }

    /// Rebuilds a model from counts; used by the loader so that a
    /// round-tripped model recomputes bit-identical probabilities.
    pub(crate) fn from_parts(
        config: ModelConfig,
        smoothing: Smoothing,
        k: usize,
        unk_threshold: u64,
        predict_boundary: bool,
        vocab: Vec<String>,
        counts: Vec<HashMap<Key, Vec<(u32, u64)>>>,
    ) -> Self {
        let index = vocab
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i as u32))
            .collect();
        let nodes = config
            .backoff_graph()
            .nodes()
            .iter()
            .zip(counts)
            .map(|(factors, table)| Node {
                factors: factors.clone(),
                contexts: table
                    .into_iter()
                    .map(|(key, succ)| (key, ContextStats::from_counts(succ)))
                    .collect(),
            })
            .collect();
        let mut lm = FactoredLm {
            config,
            smoothing,
            k,
            unk_threshold,
            predict_boundary,
            vocab,
            index,
            nodes,
        };
        lm.finalize();
        lm
    }

    /// Computes probabilities and backoff weights bottom-up.
    fn finalize(&mut self) {
        let n_pred = self.prediction_vocab_size() as f64;
        for depth in (0..self.nodes.len()).rev() {
            let is_last = depth + 1 == self.nodes.len();
            let mut keys: Vec<Key> = self.nodes[depth].contexts.keys().copied().collect();
            keys.sort_unstable();
            for key in keys {
                let stats = &self.nodes[depth].contexts[&key];
                let c = stats.total as f64;
                let t = stats.succ.len() as f64;
                let has_unseen = t < n_pred;
                let (probs, bow) = match self.smoothing {
                    Smoothing::WittenBell if has_unseen => {
                        let probs: Vec<f64> = stats.succ.iter().map(|&(_, n)| n as f64 / (c + t)).collect();
                        let reserved = t / (c + t);
                        let lower_mass = if is_last {
                            (n_pred - t) / n_pred
                        } else {
                            1.0 - stats
                                .succ
                                .iter()
                                .map(|&(w, _)| self.prob_from(depth + 1, &key, w))
                                .sum::<f64>()
                        };
                        if lower_mass > 0.0 {
                            (probs, reserved / lower_mass)
                        } else {
                            (stats.succ.iter().map(|&(_, n)| n as f64 / c).collect(), 0.0)
                        }
                    }
                    _ => (stats.succ.iter().map(|&(_, n)| n as f64 / c).collect(), 0.0),
                };
                let stats = self.nodes[depth].contexts.get_mut(&key).expect("key present");
                stats.probs = probs;
                stats.bow = bow;
            }
        }
    }

    /// Probability at backoff node `depth` for the context `key`, which may
    /// carry more factors than the node uses.
    pub(crate) fn prob_from(&self, depth: usize, key: &Key, word: u32) -> f64 {
        let node = &self.nodes[depth];
        let is_last = depth + 1 == self.nodes.len();
        match node.contexts.get(&node.mask(key)) {
            Some(stats) => match stats.lookup(word) {
                Some(p) => p,
                None if stats.bow == 0.0 => 0.0,
                None if is_last => stats.bow / self.prediction_vocab_size() as f64,
                None => stats.bow * self.prob_from(depth + 1, key, word),
            },
            None if is_last => 0.0,
            None => self.prob_from(depth + 1, key, word),
        }
    }

    pub(crate) fn prob_ids(&self, key: &Key, word: u32) -> f64 {
        self.prob_from(0, key, word)
    }

    pub fn config(&self) -> ModelConfig {
        self.config
    }

    pub fn smoothing(&self) -> Smoothing {
        self.smoothing
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn unk_threshold(&self) -> u64 {
        self.unk_threshold
    }

    pub fn predicts_boundary(&self) -> bool {
        self.predict_boundary
    }

    /// Vocabulary including `<s>`, `</s>` and `<unk>`.
    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    /// Words that can be predicted: the vocabulary without `<s>`.
    pub fn prediction_vocab(&self) -> impl Iterator<Item = &str> {
        self.vocab.iter().skip(1).map(String::as_str)
    }

    pub(crate) fn prediction_vocab_size(&self) -> usize {
        self.vocab.len() - 1
    }

    pub fn backoff_graph(&self) -> BackoffGraph {
        self.config.backoff_graph()
    }

    /// Number of distinct contexts stored at each backoff node.
    pub fn context_counts(&self) -> Vec<usize> {
        self.nodes.iter().map(|n| n.contexts.len()).collect()
    }

    pub(crate) fn word_id(&self, word: &str) -> (u32, bool) {
        match self.index.get(word) {
            Some(&id) => (id, false),
            None => (UNK_ID, true),
        }
    }

    /// Smoothed probability of `word` given context values in the order of
    /// [`ModelConfig::context`]. Unknown words map to `<unk>`; use `<s>` and
    /// NOPROS for history before the utterance start.
    pub fn prob(&self, context: &[FactorValue], word: &str) -> Result<f64> {
        if word.is_empty() {
            return Err(Error::InvalidInput("empty word".into()));
        }
        let factors = self.config.context();
        if context.len() != factors.len() {
            return Err(Error::InvalidInput(format!(
                "{} expects {} context values, got {}",
                self.config,
                factors.len(),
                context.len()
            )));
        }
        let mut key = [ABSENT; 4];
        for (f, v) in factors.iter().zip(context) {
            key[f.slot()] = match (f.is_word(), v) {
                (true, FactorValue::Word(w)) => self.word_id(w).0,
                (false, FactorValue::Pros(p)) => {
                    if p.label().is_some_and(|l| l as usize >= self.k) {
                        return Err(Error::CodebookMismatch(format!(
                            "prosody class {p} outside alphabet of size {}",
                            self.k
                        )));
                    }
                    pros_code(*p)
                }
                _ => {
                    return Err(Error::InvalidInput(format!(
                        "context value {v:?} does not match factor {}",
                        f.name()
                    )))
                }
            };
        }
        Ok(self.prob_ids(&key, self.word_id(word).0))
    }

    /// Predicted positions of one utterance, framed with `<s>` padding and,
    /// when enabled, a final `</s>`.
    pub(crate) fn events(&self, utt: &Utterance, labels: &[ProsClass]) -> Vec<Event> {
        let ids: Vec<(u32, bool)> = utt.tokens.iter().map(|t| self.word_id(&t.word)).collect();
        let n = ids.len();
        let end = if self.predict_boundary { n + 1 } else { n };
        let word_at = |i: isize| -> u32 {
            if i < 0 {
                BOS_ID
            } else {
                ids[i as usize].0
            }
        };
        let pros_at = |i: isize| -> u32 {
            if i < 0 || i as usize >= n {
                pros_code(ProsClass::NOPROS)
            } else {
                pros_code(labels[i as usize])
            }
        };
        (0..end)
            .map(|i| {
                let i = i as isize;
                let (word, oov, token) = if (i as usize) < n {
                    (ids[i as usize].0, ids[i as usize].1, Some(i as usize))
                } else {
                    (EOS_ID, false, None)
                };
                Event {
                    key: [word_at(i - 2), word_at(i - 1), pros_at(i - 1), pros_at(i)],
                    word,
                    oov,
                    token,
                }
            })
            .collect()
    }
}

impl ContextStats {
    fn from_counts(succ: Vec<(u32, u64)>) -> Self {
        ContextStats {
            total: succ.iter().map(|e| e.1).sum(),
            succ,
            probs: Vec::new(),
            bow: 0.0,
        }
    }
}
