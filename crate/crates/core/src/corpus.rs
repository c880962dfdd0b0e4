//! Word-aligned transcript and prosody corpora.
//!
//! A corpus is stored as JSONL, one utterance per line:
//!
//! ```text
//! {"id":"u1","child":"c1","speaker":"MOT","words":["hi","ball"],"prosody":[[...88 floats...],null]}
//! ```
//!
//! `prosody` is parallel to `words`; each entry is either `null` or a vector
//! of exactly [`PROSODY_DIM`] numbers. A quantized corpus carries an extra
//! parallel `pros_class` array of integers, with `-1` marking tokens that had
//! no prosody vector.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::PROSODY_DIM;

/// Lowercases a raw transcript word and strips everything that is not
/// alphanumeric or an apostrophe. Leading and trailing apostrophes are
/// trimmed. Returns `None` when nothing is left.
pub fn normalize_word(raw: &str) -> Option<String> {
    let kept: String = raw
        .chars()
        .flat_map(char::to_lowercase)
        .filter(|c| c.is_alphanumeric() || *c == '\'')
        .collect();
    let trimmed = kept.trim_matches('\'');
    if trimmed.is_empty() {
        None
    } else {
        Some(trimmed.to_string())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub word: String,
    pub prosody: Option<Vec<f64>>,
}

impl Token {
    pub fn new(word: impl Into<String>, prosody: Option<Vec<f64>>) -> Self {
        Token {
            word: word.into(),
            prosody,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Utterance {
    pub id: String,
    pub child: String,
    pub speaker: String,
    pub tokens: Vec<Token>,
}

impl Utterance {
    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(|t| t.word.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Corpus {
    pub name: String,
    pub utterances: Vec<Utterance>,
}

/// Transcript markers for unintelligible or untranscribed speech.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NoiseMarkers(BTreeSet<String>);

impl NoiseMarkers {
    pub fn new<I, S>(markers: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        NoiseMarkers(
            markers
                .into_iter()
                .filter_map(|m| normalize_word(m.as_ref()))
                .collect(),
        )
    }

    pub fn contains(&self, word: &str) -> bool {
        self.0.contains(word)
    }
}

impl Default for NoiseMarkers {
    /// CHILDES conventions: unintelligible (`xxx`), phonological coding
    /// (`yyy`) and untranscribed (`www`) material.
    fn default() -> Self {
        NoiseMarkers::new(["xxx", "yyy", "www"])
    }
}

impl Corpus {
    pub fn new(name: impl Into<String>, utterances: Vec<Utterance>) -> Result<Self> {
        let corpus = Corpus {
            name: name.into(),
            utterances,
        };
        corpus.validate()?;
        Ok(corpus)
    }

    fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for utt in &self.utterances {
            if !seen.insert(utt.id.as_str()) {
                return Err(Error::Duplicate(utt.id.clone()));
            }
            if utt.tokens.is_empty() {
                return Err(Error::Schema(format!("utterance {:?} has no tokens", utt.id)));
            }
            for (i, tok) in utt.tokens.iter().enumerate() {
                if tok.word.trim().is_empty() || tok.word.chars().any(char::is_whitespace) {
                    return Err(Error::Schema(format!(
                        "utterance {:?}, token {i}: invalid word {:?}",
                        utt.id, tok.word
                    )));
                }
                if let Some(v) = &tok.prosody {
                    check_prosody(&utt.id, i, v)?;
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.utterances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.utterances.is_empty()
    }

    pub fn token_count(&self) -> usize {
        self.utterances.iter().map(|u| u.tokens.len()).sum()
    }

    pub fn tokens(&self) -> impl Iterator<Item = &Token> {
        self.utterances.iter().flat_map(|u| u.tokens.iter())
    }

    /// Keeps the utterances spoken by `speaker`, optionally dropping any
    /// utterance that contains a noise marker.
    pub fn filter_utterances(
        &self,
        speaker: &str,
        drop_noise: bool,
        markers: &NoiseMarkers,
    ) -> Result<Corpus> {
        if speaker.is_empty() {
            return Err(Error::InvalidInput("speaker must be non-empty".into()));
        }
        let utterances = self
            .utterances
            .iter()
            .filter(|u| u.speaker == speaker)
            .filter(|u| !drop_noise || !u.words().any(|w| markers.contains(w)))
            .cloned()
            .collect();
        Ok(Corpus {
            name: self.name.clone(),
            utterances,
        })
    }

    pub fn word_frequencies(&self) -> BTreeMap<String, u64> {
        let mut freq = BTreeMap::new();
        for tok in self.tokens() {
            *freq.entry(tok.word.clone()).or_insert(0) += 1;
        }
        freq
    }

    /// Per word type, the element-wise mean of all prosody vectors observed
    /// for that word. Types without any prosody-bearing token are absent.
    pub fn type_level_average(&self) -> BTreeMap<String, Vec<f64>> {
        struct Acc {
            sum: Vec<f64>,
            min: Vec<f64>,
            max: Vec<f64>,
            n: usize,
        }
        let mut acc: BTreeMap<&str, Acc> = BTreeMap::new();
        for tok in self.tokens() {
            let Some(v) = &tok.prosody else { continue };
            let a = acc.entry(tok.word.as_str()).or_insert_with(|| Acc {
                sum: vec![0.0; v.len()],
                min: v.clone(),
                max: v.clone(),
                n: 0,
            });
            for (d, &x) in v.iter().enumerate() {
                a.sum[d] += x;
                a.min[d] = a.min[d].min(x);
                a.max[d] = a.max[d].max(x);
            }
            a.n += 1;
        }
        acc.into_iter()
            .map(|(w, a)| {
                let n = a.n as f64;
                // Rounding in the running sum can push the quotient one ulp
                // outside the observed range.
                let mean = a
                    .sum
                    .iter()
                    .zip(a.min.iter().zip(&a.max))
                    .map(|(s, (lo, hi))| (s / n).clamp(*lo, *hi))
                    .collect();
                (w.to_string(), mean)
            })
            .collect()
    }

    /// Splits the corpus into two parts by a seeded utterance-level shuffle.
    /// The second part receives `round(test_frac * n)` utterances; both parts
    /// keep file order.
    pub fn split(&self, test_frac: f64, seed: u64) -> Result<(Corpus, Corpus)> {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;

        if !(0.0..1.0).contains(&test_frac) {
            return Err(Error::Infeasible(format!(
                "test fraction {test_frac} outside [0, 1)"
            )));
        }
        let n = self.utterances.len();
        let n_test = (test_frac * n as f64).round() as usize;
        let mut order: Vec<usize> = (0..n).collect();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        order.shuffle(&mut rng);
        let mut is_test = vec![false; n];
        for &i in &order[..n_test] {
            is_test[i] = true;
        }
        let (mut train, mut test) = (Vec::new(), Vec::new());
        for (utt, t) in self.utterances.iter().zip(is_test) {
            if t {
                test.push(utt.clone());
            } else {
                train.push(utt.clone());
            }
        }
        Ok((
            Corpus {
                name: format!("{}.train", self.name),
                utterances: train,
            },
            Corpus {
                name: format!("{}.test", self.name),
                utterances: test,
            },
        ))
    }
}

fn check_prosody(utt: &str, token: usize, v: &[f64]) -> Result<()> {
    if v.len() != PROSODY_DIM {
        return Err(Error::Dimension {
            utterance: utt.to_string(),
            token,
            expected: PROSODY_DIM,
            found: v.len(),
        });
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::Schema(format!(
            "utterance {utt:?}, token {token}: non-finite prosody value"
        )));
    }
    Ok(())
}

/// Prosody class label of a token. Labels `0..k` are codebook entries;
/// [`ProsClass::NOPROS`] marks tokens without a prosody vector and the
/// padding positions before an utterance starts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ProsClass(i32);

impl ProsClass {
    pub const NOPROS: ProsClass = ProsClass(-1);

    pub fn new(label: u32) -> Self {
        ProsClass(label as i32)
    }

    pub fn from_raw(raw: i32) -> Result<Self> {
        if raw < -1 {
            return Err(Error::Schema(format!("invalid prosody class {raw}")));
        }
        Ok(ProsClass(raw))
    }

    pub fn raw(self) -> i32 {
        self.0
    }

    pub fn label(self) -> Option<u32> {
        (self.0 >= 0).then_some(self.0 as u32)
    }

    pub fn is_nopros(self) -> bool {
        self.0 < 0
    }
}

impl fmt::Display for ProsClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A corpus whose tokens carry prosody class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedCorpus {
    pub corpus: Corpus,
    labels: Vec<Vec<ProsClass>>,
}

impl QuantizedCorpus {
    pub fn new(corpus: Corpus, labels: Vec<Vec<ProsClass>>) -> Result<Self> {
        if labels.len() != corpus.utterances.len() {
            return Err(Error::Schema(format!(
                "{} label rows for {} utterances",
                labels.len(),
                corpus.utterances.len()
            )));
        }
        for (utt, row) in corpus.utterances.iter().zip(&labels) {
            if row.len() != utt.tokens.len() {
                return Err(Error::Schema(format!(
                    "utterance {:?}: {} prosody classes for {} words",
                    utt.id,
                    row.len(),
                    utt.tokens.len()
                )));
            }
        }
        Ok(QuantizedCorpus { corpus, labels })
    }

    /// Labels every token [`ProsClass::NOPROS`]; for purely lexical models.
    pub fn unlabeled(corpus: Corpus) -> Self {
        let labels = corpus
            .utterances
            .iter()
            .map(|u| vec![ProsClass::NOPROS; u.tokens.len()])
            .collect();
        QuantizedCorpus { corpus, labels }
    }

    pub fn labels(&self) -> &[Vec<ProsClass>] {
        &self.labels
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Utterance, &[ProsClass])> {
        self.corpus
            .utterances
            .iter()
            .zip(self.labels.iter().map(Vec::as_slice))
    }

    pub fn max_label(&self) -> Option<u32> {
        self.labels.iter().flatten().filter_map(|c| c.label()).max()
    }
}

#[derive(Serialize, Deserialize)]
struct Record {
    id: String,
    child: String,
    speaker: String,
    words: Vec<String>,
    #[serde(default)]
    prosody: Option<Vec<Option<Vec<f64>>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pros_class: Option<Vec<i32>>,
}

fn parse_jsonl<R: BufRead>(reader: R) -> Result<(Vec<Utterance>, Vec<Option<Vec<ProsClass>>>)> {
    let mut utterances = Vec::new();
    let mut classes = Vec::new();
    let mut ids = HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::Parse {
            line: lineno,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: Record = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: lineno,
            message: e.to_string(),
        })?;
        if !ids.insert(rec.id.clone()) {
            return Err(Error::Duplicate(rec.id));
        }
        if rec.words.is_empty() {
            return Err(Error::Schema(format!("utterance {:?} has no words", rec.id)));
        }
        let prosody = match rec.prosody {
            Some(p) if p.len() != rec.words.len() => {
                return Err(Error::Schema(format!(
                    "utterance {:?}: {} prosody entries for {} words",
                    rec.id,
                    p.len(),
                    rec.words.len()
                )))
            }
            Some(p) => p,
            None => vec![None; rec.words.len()],
        };
        let pros_class = match rec.pros_class {
            Some(c) if c.len() != rec.words.len() => {
                return Err(Error::Schema(format!(
                    "utterance {:?}: {} prosody classes for {} words",
                    rec.id,
                    c.len(),
                    rec.words.len()
                )))
            }
            Some(c) => Some(c.into_iter().map(ProsClass::from_raw).collect::<Result<Vec<_>>>()?),
            None => None,
        };

        let mut tokens = Vec::with_capacity(rec.words.len());
        let mut kept_classes = Vec::new();
        for (i, (raw, vec)) in rec.words.iter().zip(prosody).enumerate() {
            if raw.trim().chars().any(char::is_whitespace) {
                return Err(Error::Schema(format!(
                    "utterance {:?}, token {i}: word {raw:?} contains whitespace",
                    rec.id
                )));
            }
            if let Some(v) = &vec {
                check_prosody(&rec.id, i, v)?;
            }
            // Punctuation-only tokens are dropped together with their prosody.
            let Some(word) = normalize_word(raw) else { continue };
            tokens.push(Token { word, prosody: vec });
            if let Some(c) = &pros_class {
                kept_classes.push(c[i]);
            }
        }
        if tokens.is_empty() {
            return Err(Error::Schema(format!(
                "utterance {:?} has no words after normalization",
                rec.id
            )));
        }
        utterances.push(Utterance {
            id: rec.id,
            child: rec.child,
            speaker: rec.speaker,
            tokens,
        });
        classes.push(pros_class.map(|_| kept_classes));
    }
    Ok((utterances, classes))
}

fn corpus_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path, e))
}

pub fn read_corpus<R: BufRead>(name: &str, reader: R) -> Result<Corpus> {
    let (utterances, _) = parse_jsonl(reader)?;
    Ok(Corpus {
        name: name.to_string(),
        utterances,
    })
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus> {
    let path = path.as_ref();
    read_corpus(&corpus_name(path), open(path)?)
}

/// Reads a corpus that may or may not carry `pros_class` arrays. Returns
/// `None` for the labels when no record has them; mixing labeled and
/// unlabeled records is a schema error.
pub fn read_maybe_quantized<R: BufRead>(
    name: &str,
    reader: R,
) -> Result<(Corpus, Option<Vec<Vec<ProsClass>>>)> {
    let (utterances, classes) = parse_jsonl(reader)?;
    let corpus = Corpus {
        name: name.to_string(),
        utterances,
    };
    let labeled = classes.iter().filter(|c| c.is_some()).count();
    if labeled == 0 {
        return Ok((corpus, None));
    }
    if labeled != classes.len() {
        return Err(Error::Schema(
            "some records lack a pros_class array".to_string(),
        ));
    }
    Ok((corpus, Some(classes.into_iter().flatten().collect())))
}

pub fn load_maybe_quantized(
    path: impl AsRef<Path>,
) -> Result<(Corpus, Option<Vec<Vec<ProsClass>>>)> {
    let path = path.as_ref();
    read_maybe_quantized(&corpus_name(path), open(path)?)
}

pub fn load_quantized(path: impl AsRef<Path>) -> Result<QuantizedCorpus> {
    let path = path.as_ref();
    match load_maybe_quantized(path)? {
        (corpus, Some(labels)) => QuantizedCorpus::new(corpus, labels),
        (corpus, None) if corpus.is_empty() => Ok(QuantizedCorpus::unlabeled(corpus)),
        _ => Err(Error::Schema(format!(
            "{} is not a quantized corpus (no pros_class arrays)",
            path.display()
        ))),
    }
}

fn write_records<W: Write>(
    corpus: &Corpus,
    labels: Option<&[Vec<ProsClass>]>,
    mut out: W,
) -> std::io::Result<()> {
    for (i, utt) in corpus.utterances.iter().enumerate() {
        let rec = Record {
            id: utt.id.clone(),
            child: utt.child.clone(),
            speaker: utt.speaker.clone(),
            words: utt.tokens.iter().map(|t| t.word.clone()).collect(),
            prosody: Some(utt.tokens.iter().map(|t| t.prosody.clone()).collect()),
            pros_class: labels.map(|l| l[i].iter().map(|c| c.raw()).collect()),
        };
        serde_json::to_writer(&mut out, &rec)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn write_corpus<W: Write>(corpus: &Corpus, out: W) -> std::io::Result<()> {
    write_records(corpus, None, out)
}

pub fn write_quantized<W: Write>(qc: &QuantizedCorpus, out: W) -> std::io::Result<()> {
    write_records(&qc.corpus, Some(&qc.labels), out)
}

pub fn save_corpus(corpus: &Corpus, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    write_corpus(corpus, BufWriter::new(f)).map_err(|e| Error::io(path, e))
}

pub fn save_quantized(qc: &QuantizedCorpus, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    write_quantized(qc, BufWriter::new(f)).map_err(|e| Error::io(path, e))
}

/// Gold age-of-acquisition targets, in months.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AoaDataset {
    entries: BTreeMap<String, f64>,
}

impl AoaDataset {
    pub fn new(entries: BTreeMap<String, f64>) -> Result<Self> {
        for (w, &aoa) in &entries {
            if !(aoa.is_finite() && aoa > 0.0) {
                return Err(Error::Schema(format!("word {w:?}: invalid age {aoa}")));
            }
        }
        Ok(AoaDataset { entries })
    }

    pub fn entries(&self) -> &BTreeMap<String, f64> {
        &self.entries
    }

    pub fn get(&self, word: &str) -> Option<f64> {
        self.entries.get(word).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Splits the targets into those attested in `vocab` and those that are not.
    pub fn match_targets<'a, I>(&self, vocab: I) -> (Vec<String>, Vec<String>)
    where
        I: IntoIterator<Item = &'a str>,
    {
        let vocab: HashSet<&str> = vocab.into_iter().collect();
        self.entries
            .keys()
            .cloned()
            .partition(|w| vocab.contains(w.as_str()))
    }

    pub fn read<R: Read>(reader: R) -> Result<Self> {
        let rows = read_two_column_csv(reader, "word", "aoa_months")?;
        let mut entries = BTreeMap::new();
        for (line, word, value) in rows {
            let aoa: f64 = value.trim().parse().map_err(|_| Error::Parse {
                line,
                message: format!("invalid aoa_months {value:?}"),
            })?;
            if !(aoa.is_finite() && aoa > 0.0) {
                return Err(Error::Parse {
                    line,
                    message: format!("aoa_months must be positive, got {aoa}"),
                });
            }
            if entries.insert(word.clone(), aoa).is_some() {
                return Err(Error::Schema(format!("duplicate AoA word {word:?}")));
            }
        }
        Ok(AoaDataset { entries })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::read(File::open(path).map_err(|e| Error::io(path, e))?)
    }

    pub fn write<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let res = (|| {
            w.write_record(["word", "aoa_months"])?;
            for (word, aoa) in &self.entries {
                w.write_record([word.as_str(), &aoa.to_string()])?;
            }
            w.flush()
        })();
        res.map_err(|e| Error::io("<aoa csv>", e))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PosTag {
    Nn,
    Vrb,
    Fct,
    Adj,
    Oth,
}

impl PosTag {
    pub const ALL: [PosTag; 5] = [PosTag::Nn, PosTag::Vrb, PosTag::Fct, PosTag::Adj, PosTag::Oth];

    pub fn as_str(self) -> &'static str {
        match self {
            PosTag::Nn => "nn",
            PosTag::Vrb => "vrb",
            PosTag::Fct => "fct",
            PosTag::Adj => "adj",
            PosTag::Oth => "oth",
        }
    }
}

impl fmt::Display for PosTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PosTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PosTag::ALL
            .into_iter()
            .find(|t| t.as_str() == s.trim())
            .ok_or_else(|| Error::Schema(format!("unknown POS tag {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PosLabels {
    entries: BTreeMap<String, PosTag>,
}

impl PosLabels {
    pub fn new(entries: BTreeMap<String, PosTag>) -> Self {
        PosLabels { entries }
    }

    pub fn entries(&self) -> &BTreeMap<String, PosTag> {
        &self.entries
    }

    pub fn get(&self, word: &str) -> Option<PosTag> {
        self.entries.get(word).copied()
    }

    pub fn read<R: Read>(reader: R) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (line, word, tag) in read_two_column_csv(reader, "word", "pos")? {
            let tag = tag.parse::<PosTag>().map_err(|e| Error::Parse {
                line,
                message: e.to_string(),
            })?;
            if entries.insert(word.clone(), tag).is_some() {
                return Err(Error::Schema(format!("duplicate POS word {word:?}")));
            }
        }
        Ok(PosLabels { entries })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::read(File::open(path).map_err(|e| Error::io(path, e))?)
    }

    pub fn write<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let res = (|| {
            w.write_record(["word", "pos"])?;
            for (word, tag) in &self.entries {
                w.write_record([word.as_str(), tag.as_str()])?;
            }
            w.flush()
        })();
        res.map_err(|e| Error::io("<pos csv>", e))
    }
}

/// Reads `word,<value>` rows, checking the header and normalizing words.
fn read_two_column_csv<R: Read>(
    reader: R,
    first: &str,
    second: &str,
) -> Result<Vec<(usize, String, String)>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers().map_err(|e| Error::Parse {
        line: 1,
        message: e.to_string(),
    })?;
    if header.len() != 2 || &header[0] != first || &header[1] != second {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header `{first},{second}`"),
        });
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        if rec.len() != 2 {
            return Err(Error::Parse {
                line,
                message: format!("expected 2 fields, got {}", rec.len()),
            });
        }
        let word = normalize_word(&rec[0]).ok_or_else(|| Error::Parse {
            line,
            message: format!("empty word {:?}", &rec[0]),
        })?;
        rows.push((line, word, rec[1].to_string()));
    }
    Ok(rows)
}
