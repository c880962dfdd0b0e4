//! Versioned text format for trained models.
//!
//! ```text
//! #prosolm-flm 1
//! config tri_prosUni
//! smoothing wb
//! k 50
//! vocab 412
//! unk_threshold 1
//! boundary 1
//! nodes 4
//! \vocab\
//! <s>
//! ...
//! \node 0 W-2 W-1 P0\ contexts 1234 entries 5678
//! C <tab> W:look W:a P:47 <tab> total <tab> log10 backoff weight
//! E <tab> ball <tab> count <tab> log10 probability
//! ...
//! \end\
//! ```
//!
//! Counts are authoritative: loading recomputes every probability from them
//! and rejects the file if a stored value disagrees.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::model::{pros_code, ContextStats, FactoredLm, Key, ABSENT};
use super::{Factor, ModelConfig, Smoothing};
use crate::corpus::ProsClass;
use crate::error::{Error, Result};

const MAGIC: &str = "#prosolm-flm";
const VERSION: u32 = 1;

fn fmt_context(lm: &FactoredLm, factors: &[Factor], key: &Key) -> String {
    if factors.is_empty() {
        return "_".to_string();
    }
    factors
        .iter()
        .map(|f| {
            let v = key[f.slot()];
            if f.is_word() {
                format!("W:{}", lm.vocab[v as usize])
            } else {
                format!("P:{}", v as i64 - 1)
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}

impl FactoredLm {
    pub fn to_model_string(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{MAGIC} {VERSION}");
        let _ = writeln!(out, "config {}", self.config);
        let _ = writeln!(out, "smoothing {}", self.smoothing);
        let _ = writeln!(out, "k {}", self.k);
        let _ = writeln!(out, "vocab {}", self.vocab.len());
        let _ = writeln!(out, "unk_threshold {}", self.unk_threshold);
        let _ = writeln!(out, "boundary {}", u8::from(self.predict_boundary));
        let _ = writeln!(out, "nodes {}", self.nodes.len());
        out.push_str("\\vocab\\\n");
        for w in &self.vocab {
            out.push_str(w);
            out.push('\n');
        }
        for (depth, node) in self.nodes.iter().enumerate() {
            let mut keys: Vec<&Key> = node.contexts.keys().collect();
            keys.sort_unstable();
            let entries: usize = node.contexts.values().map(|s| s.succ.len()).sum();
            let names: Vec<&str> = node.factors.iter().map(|f| f.name()).collect();
            let _ = writeln!(
                out,
                "\\node {depth} {}\\ contexts {} entries {entries}",
                names.join(" "),
                keys.len()
            );
            for key in keys {
                let stats = &node.contexts[key];
                let _ = writeln!(
                    out,
                    "C\t{}\t{}\t{}",
                    fmt_context(self, &node.factors, key),
                    stats.total,
                    stats.bow.log10()
                );
                for (&(w, n), p) in stats.succ.iter().zip(&stats.probs) {
                    let _ = writeln!(out, "E\t{}\t{n}\t{}", self.vocab[w as usize], p.log10());
                }
            }
        }
        out.push_str("\\end\\\n");
        out
    }

    pub fn from_model_str(text: &str) -> Result<Self> {
        Parser::new(text).parse()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_model_string()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_model_str(&text)
    }
}

struct Parser<'a> {
    lines: std::iter::Enumerate<std::str::Lines<'a>>,
}

fn ferr(line: usize, msg: impl std::fmt::Display) -> Error {
    Error::Format(format!("line {line}: {msg}"))
}

impl<'a> Parser<'a> {
    fn new(text: &'a str) -> Self {
        Parser {
            lines: text.lines().enumerate(),
        }
    }

    fn next(&mut self) -> Result<(usize, &'a str)> {
        self.lines
            .next()
            .map(|(i, l)| (i + 1, l))
            .ok_or_else(|| Error::Format("unexpected end of file (truncated model?)".into()))
    }

    fn field<T: std::str::FromStr>(&mut self, name: &str) -> Result<T> {
        let (n, line) = self.next()?;
        let value = line
            .strip_prefix(name)
            .and_then(|r| r.strip_prefix(' '))
            .ok_or_else(|| ferr(n, format!("expected `{name}` header")))?;
        value
            .trim()
            .parse()
            .map_err(|_| ferr(n, format!("bad value for `{name}`: {value:?}")))
    }

    fn parse(mut self) -> Result<FactoredLm> {
        let (n, magic) = self.next()?;
        match magic.split_once(' ') {
            Some((MAGIC, v)) if v.trim() == VERSION.to_string() => {}
            Some((MAGIC, v)) => return Err(ferr(n, format!("unsupported version {v}"))),
            _ => return Err(ferr(n, "not a prosolm model file")),
        }
        let config: String = self.field("config")?;
        let config: ModelConfig = config.parse().map_err(|e: Error| Error::Format(e.to_string()))?;
        let smoothing: String = self.field("smoothing")?;
        let smoothing: Smoothing = smoothing.parse().map_err(|e: Error| Error::Format(e.to_string()))?;
        let k: usize = self.field("k")?;
        let vocab_size: usize = self.field("vocab")?;
        let unk_threshold: u64 = self.field("unk_threshold")?;
        let boundary: u8 = self.field("boundary")?;
        let node_count: usize = self.field("nodes")?;
        let graph = config.backoff_graph();
        if node_count != graph.len() {
            return Err(Error::Format(format!(
                "{config} has {} backoff nodes, file declares {node_count}",
                graph.len()
            )));
        }

        let (n, line) = self.next()?;
        if line != "\\vocab\\" {
            return Err(ferr(n, "expected \\vocab\\"));
        }
        let mut vocab = Vec::with_capacity(vocab_size);
        for _ in 0..vocab_size {
            vocab.push(self.next()?.1.to_string());
        }
        if vocab.len() < 3 || vocab[0] != super::BOS || vocab[1] != super::EOS || vocab[2] != super::UNK {
            return Err(Error::Format("vocabulary must start with <s> </s> <unk>".into()));
        }
        let index: HashMap<&str, u32> = vocab.iter().enumerate().map(|(i, w)| (w.as_str(), i as u32)).collect();
        if index.len() != vocab.len() {
            return Err(Error::Format("duplicate vocabulary entry".into()));
        }

        let mut counts = Vec::with_capacity(node_count);
        let mut stored: Vec<Vec<(Key, f64, Vec<f64>)>> = Vec::with_capacity(node_count);
        for (depth, factors) in graph.nodes().iter().enumerate() {
            let (n, line) = self.next()?;
            let (contexts, entries) = parse_node_header(line, depth, factors).ok_or_else(|| ferr(n, "bad node header"))?;
            let mut table: HashMap<Key, Vec<(u32, u64)>> = HashMap::with_capacity(contexts);
            let mut node_stored = Vec::with_capacity(contexts);
            let mut seen_entries = 0;
            for _ in 0..contexts {
                let (n, line) = self.next()?;
                let parts: Vec<&str> = line.split('\t').collect();
                if parts.len() != 4 || parts[0] != "C" {
                    return Err(ferr(n, "expected context line"));
                }
                let key = parse_context(parts[1], factors, &index, k).ok_or_else(|| ferr(n, "bad context"))?;
                let total: u64 = parts[2].parse().map_err(|_| ferr(n, "bad total"))?;
                let log_bow: f64 = parts[3].parse().map_err(|_| ferr(n, "bad backoff weight"))?;
                let mut succ = Vec::new();
                let mut log_probs = Vec::new();
                while succ.iter().map(|e: &(u32, u64)| e.1).sum::<u64>() < total {
                    let (n, line) = self.next()?;
                    let parts: Vec<&str> = line.split('\t').collect();
                    if parts.len() != 4 || parts[0] != "E" {
                        return Err(ferr(n, "expected entry line"));
                    }
                    let w = *index.get(parts[1]).ok_or_else(|| ferr(n, "word not in vocabulary"))?;
                    let c: u64 = parts[2].parse().map_err(|_| ferr(n, "bad count"))?;
                    let lp: f64 = parts[3].parse().map_err(|_| ferr(n, "bad probability"))?;
                    if c == 0 || succ.last().is_some_and(|e: &(u32, u64)| e.0 >= w) {
                        return Err(ferr(n, "entries must have positive counts in vocabulary order"));
                    }
                    succ.push((w, c));
                    log_probs.push(lp);
                }
                if succ.iter().map(|e| e.1).sum::<u64>() != total {
                    return Err(ferr(n, "entry counts do not add up to context total"));
                }
                seen_entries += succ.len();
                if table.insert(key, succ).is_some() {
                    return Err(ferr(n, "duplicate context"));
                }
                node_stored.push((key, log_bow, log_probs));
            }
            if seen_entries != entries {
                return Err(Error::Format(format!(
                    "node {depth}: header declares {entries} entries, found {seen_entries}"
                )));
            }
            counts.push(table);
            stored.push(node_stored);
        }
        let (n, line) = self.next()?;
        if line != "\\end\\" {
            return Err(ferr(n, "expected \\end\\"));
        }

        let lm = FactoredLm::from_parts(
            config,
            smoothing,
            k,
            unk_threshold,
            boundary != 0,
            vocab,
            counts,
        );
        for (node, node_stored) in lm.nodes.iter().zip(&stored) {
            for (key, log_bow, log_probs) in node_stored {
                let stats: &ContextStats = &node.contexts[key];
                let ok = stats.bow.log10() == *log_bow
                    && stats.probs.iter().zip(log_probs).all(|(p, lp)| p.log10() == *lp);
                if !ok {
                    return Err(Error::Format(
                        "stored probabilities disagree with counts".into(),
                    ));
                }
            }
        }
        Ok(lm)
    }
}

fn parse_node_header(line: &str, depth: usize, factors: &[Factor]) -> Option<(usize, usize)> {
    let rest = line.strip_prefix("\\node ")?;
    let (head, tail) = rest.split_once('\\')?;
    let mut head = head.split_whitespace();
    if head.next()?.parse::<usize>().ok()? != depth {
        return None;
    }
    let names: Vec<&str> = head.collect();
    if names != factors.iter().map(|f| f.name()).collect::<Vec<_>>() {
        return None;
    }
    let t: Vec<&str> = tail.split_whitespace().collect();
    match t.as_slice() {
        ["contexts", c, "entries", e] => Some((c.parse().ok()?, e.parse().ok()?)),
        _ => None,
    }
}

fn parse_context(text: &str, factors: &[Factor], index: &HashMap<&str, u32>, k: usize) -> Option<Key> {
    let mut key = [ABSENT; 4];
    if factors.is_empty() {
        return (text == "_").then_some(key);
    }
    let fields: Vec<&str> = text.split(' ').collect();
    if fields.len() != factors.len() {
        return None;
    }
    for (f, field) in factors.iter().zip(fields) {
        let (tag, value) = field.split_once(':')?;
        key[f.slot()] = match (tag, f.is_word()) {
            ("W", true) => *index.get(value)?,
            ("P", false) => {
                let c = ProsClass::from_raw(value.parse().ok()?).ok()?;
                if c.label().is_some_and(|l| l as usize >= k) {
                    return None;
                }
                pros_code(c)
            }
            _ => return None,
        };
    }
    Some(key)
}
