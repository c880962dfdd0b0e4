//! Seeded synthetic corpora: Zipf-distributed words with part-of-speech
//! dependent 88-dimensional prosody and a linear age-of-acquisition model.

use std::collections::BTreeMap;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::corpus::{AoaDataset, Corpus, PosLabels, PosTag, Token, Utterance};
use crate::error::{Error, Result};
use crate::features::feature_index;
use crate::seed::derive;
use crate::PROSODY_DIM;

/// Linear age-of-acquisition model, in months:
/// `intercept + log_freq_weight·ln f + Σ wᵢ·z(featureᵢ) + predictability_weight·chained + noise`,
/// where `z` standardizes the type-averaged feature across words and
/// `chained` is the fraction of a word's tokens produced by its
/// predecessor's fixed successor link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AoaModel {
    pub intercept: f64,
    pub log_freq_weight: f64,
    /// Designated features, by eGeMAPS name, with their weights.
    pub feature_weights: Vec<(String, f64)>,
    pub predictability_weight: f64,
    pub noise_stddev: f64,
    /// Ages below this are clamped.
    pub min_aoa: f64,
}

impl Default for AoaModel {
    fn default() -> Self {
        AoaModel {
            intercept: 30.0,
            log_freq_weight: -1.5,
            feature_weights: vec![
                ("VoicedSegmentsPerSec".into(), -2.0),
                ("MeanVoicedSegmentLengthSec".into(), 2.0),
                ("F0semitoneFrom27.5Hz_sma3nz_pctlrange0-2".into(), -2.0),
            ],
            predictability_weight: -8.0,
            noise_stddev: 1.5,
            min_aoa: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub vocab_size: usize,
    pub utterance_count: usize,
    pub zipf_exponent: f64,
    pub min_utterance_len: usize,
    pub max_utterance_len: usize,
    /// Probability that a word is followed by its fixed successor instead of
    /// a fresh Zipf draw.
    pub chain_prob: f64,
    /// Size of the prosodic shift applied to a word that is followed by its
    /// fixed successor (phrase-internal reduction), along one fixed direction.
    pub link_shift: f64,
    /// Relative class sizes for nn, vrb, fct, adj, oth.
    pub pos_weights: [f64; 5],
    /// Spread of the per-POS mean vectors around zero.
    pub pos_mean_scale: f64,
    /// Typical per-dimension token stddev within a POS Gaussian.
    pub token_stddev: f64,
    /// Spread of the per-word deterministic offsets.
    pub word_offset_scale: f64,
    /// Offset spread used instead of `word_offset_scale` on the dimensions
    /// named in the AoA model.
    pub designated_offset_scale: f64,
    pub prosody_word_coupling: f64,
    pub children: usize,
    pub aoa: AoaModel,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            vocab_size: 150,
            utterance_count: 3000,
            zipf_exponent: 1.0,
            min_utterance_len: 4,
            max_utterance_len: 12,
            chain_prob: 0.3,
            link_shift: 4.0,
            pos_weights: [0.35, 0.2, 0.15, 0.15, 0.15],
            pos_mean_scale: 0.5,
            token_stddev: 1.0,
            word_offset_scale: 0.1,
            designated_offset_scale: 2.0,
            prosody_word_coupling: 0.9,
            children: 2,
            aoa: AoaModel::default(),
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.vocab_size < PosTag::ALL.len() {
            return bad(format!("vocab_size {} cannot populate 5 POS classes", self.vocab_size));
        }
        if self.utterance_count == 0 || self.children == 0 {
            return bad("utterance_count and children must be positive".into());
        }
        if self.min_utterance_len == 0 || self.max_utterance_len < self.min_utterance_len {
            return bad("utterance length bounds must satisfy 1 <= min <= max".into());
        }
        if !(self.zipf_exponent > 0.0 && self.zipf_exponent.is_finite()) {
            return bad(format!("zipf_exponent must be > 0, got {}", self.zipf_exponent));
        }
        if !(0.0..=1.0).contains(&self.prosody_word_coupling) {
            return bad(format!("coupling must be in [0, 1], got {}", self.prosody_word_coupling));
        }
        if !(0.0..=1.0).contains(&self.chain_prob) {
            return bad(format!("chain_prob must be in [0, 1], got {}", self.chain_prob));
        }
        if self.pos_weights.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
            return bad("pos_weights must be positive".into());
        }
        let scales = [self.link_shift, self.pos_mean_scale, self.token_stddev, self.word_offset_scale, self.designated_offset_scale, self.aoa.noise_stddev];
        if scales.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
            return bad("scales and stddevs must be finite and >= 0".into());
        }
        if !(self.aoa.min_aoa > 0.0) {
            return bad("min_aoa must be positive".into());
        }
        for (name, _) in &self.aoa.feature_weights {
            if feature_index(name).is_none() {
                return bad(format!("unknown feature {name:?}"));
            }
        }
        Ok(())
    }
}

/// Generator output plus the latent quantities behind it.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthOutput {
    pub corpus: Corpus,
    pub aoa: AoaDataset,
    pub pos: PosLabels,
    /// Every vocabulary word, in Zipf rank order.
    pub vocab: Vec<String>,
    /// Fixed successor of each vocabulary word.
    pub successor: Vec<usize>,
    /// Per-word fraction of tokens produced by a successor link.
    pub chained_fraction: BTreeMap<String, f64>,
}

const ONSETS: [&str; 20] = [
    "b", "d", "f", "g", "h", "k", "l", "m", "n", "p", "r", "s", "t", "v", "w", "z", "ch", "sh", "th", "j",
];
const VOWELS: [&str; 5] = ["a", "e", "i", "o", "u"];

/// Distinct pronounceable pseudo-word for each index.
pub fn pseudo_word(index: usize) -> String {
    let base = ONSETS.len() * VOWELS.len();
    let mut n = index + base; // at least two syllables
    let mut syllables = Vec::new();
    while n > 0 {
        let s = n % base;
        syllables.push(format!("{}{}", ONSETS[s / VOWELS.len()], VOWELS[s % VOWELS.len()]));
        n /= base;
    }
    syllables.concat()
}

/// Analytic Zipf probability of each rank `1..=n`.
pub fn zipf_mass(n: usize, exponent: f64) -> Vec<f64> {
    let w: Vec<f64> = (1..=n).map(|r| (r as f64).powf(-exponent)).collect();
    let z: f64 = w.iter().sum();
    w.into_iter().map(|x| x / z).collect()
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn assign_pos(spec: &SynthSpec, rng: &mut ChaCha8Rng) -> Vec<PosTag> {
    let n = spec.vocab_size;
    let total: f64 = spec.pos_weights.iter().sum();
    let mut counts: Vec<usize> = spec.pos_weights.iter().map(|w| ((w / total) * n as f64).floor().max(1.0) as usize).collect();
    // Adjust the largest class so the counts sum to n with every class non-empty.
    while counts.iter().sum::<usize>() > n {
        let i = (0..5).max_by_key(|&i| counts[i]).expect("five classes");
        counts[i] -= 1;
    }
    let short = n - counts.iter().sum::<usize>();
    counts[0] += short;
    let mut tags: Vec<PosTag> = PosTag::ALL
        .into_iter()
        .zip(&counts)
        .flat_map(|(t, &c)| std::iter::repeat_n(t, c))
        .collect();
    tags.shuffle(rng);
    tags
}

pub fn synth(spec: &SynthSpec) -> Result<SynthOutput> {
    spec.validate()?;
    let n = spec.vocab_size;
    let dim = PROSODY_DIM;
    let vocab: Vec<String> = (0..n).map(pseudo_word).collect();

    let mut lex_rng = ChaCha8Rng::seed_from_u64(derive(spec.seed, "synth/lexicon"));
    let pos = assign_pos(spec, &mut lex_rng);
    let successor: Vec<usize> = (0..n).map(|_| lex_rng.random_range(0..n)).collect();

    let mut pros_rng = ChaCha8Rng::seed_from_u64(derive(spec.seed, "synth/prosody-model"));
    let pos_mean: Vec<Vec<f64>> = (0..5)
        .map(|_| (0..dim).map(|_| spec.pos_mean_scale * normal(&mut pros_rng)).collect())
        .collect();
    let pos_sd: Vec<Vec<f64>> = (0..5)
        .map(|_| (0..dim).map(|_| spec.token_stddev * pros_rng.random_range(0.5..1.5)).collect())
        .collect();
    let mut offset_scale = vec![spec.word_offset_scale; dim];
    for (name, _) in &spec.aoa.feature_weights {
        offset_scale[feature_index(name).expect("validated")] = spec.designated_offset_scale;
    }
    let offsets: Vec<Vec<f64>> = (0..n)
        .map(|_| offset_scale.iter().map(|s| s * normal(&mut pros_rng)).collect())
        .collect();
    // Affine per-dimension rescaling so raw values have heterogeneous units.
    let loc: Vec<f64> = (0..dim).map(|_| pros_rng.random_range(-5.0..50.0)).collect();
    let scale: Vec<f64> = (0..dim).map(|_| 10f64.powf(pros_rng.random_range(-1.5..1.0))).collect();
    let mut link_dir: Vec<f64> = (0..dim).map(|_| normal(&mut pros_rng)).collect();
    let norm = link_dir.iter().map(|x| x * x).sum::<f64>().sqrt();
    link_dir.iter_mut().for_each(|x| *x /= norm);

    let zipf = WeightedIndex::new(zipf_mass(n, spec.zipf_exponent)).map_err(|e| Error::Config(e.to_string()))?;
    let mut text_rng = ChaCha8Rng::seed_from_u64(derive(spec.seed, "synth/text"));
    let mut token_rng = ChaCha8Rng::seed_from_u64(derive(spec.seed, "synth/tokens"));
    let pos_index = |t: PosTag| PosTag::ALL.iter().position(|&x| x == t).expect("known tag");

    let mut counts = vec![0u64; n];
    let mut chained = vec![0u64; n];
    let mut utterances = Vec::with_capacity(spec.utterance_count);
    for u in 0..spec.utterance_count {
        let len = text_rng.random_range(spec.min_utterance_len..=spec.max_utterance_len);
        // Word sequence first: a token's prosody depends on whether the next
        // token was produced by its successor link.
        let mut words = Vec::with_capacity(len);
        let mut linked = vec![false; len];
        for i in 0..len {
            let w = match words.last() {
                Some(&p) if text_rng.random_bool(spec.chain_prob) => {
                    chained[successor[p]] += 1;
                    linked[i - 1] = true;
                    successor[p]
                }
                _ => zipf.sample(&mut text_rng),
            };
            counts[w] += 1;
            words.push(w);
        }
        let mut tokens = Vec::with_capacity(len);
        for (&w, &link) in words.iter().zip(&linked) {
            let pi = pos_index(pos[w]);
            let shift = if link { spec.link_shift } else { 0.0 };
            let prosody: Vec<f64> = (0..dim)
                .map(|d| {
                    let z = pos_mean[pi][d]
                        + pos_sd[pi][d] * normal(&mut token_rng)
                        + spec.prosody_word_coupling * offsets[w][d]
                        + shift * link_dir[d];
                    loc[d] + scale[d] * z
                })
                .collect();
            tokens.push(Token::new(vocab[w].clone(), Some(prosody)));
        }
        utterances.push(Utterance {
            id: format!("u{u}"),
            child: format!("c{}", u % spec.children + 1),
            speaker: "MOT".into(),
            tokens,
        });
    }
    let corpus = Corpus::new("synth", utterances)?;

    // Age of acquisition over attested words.
    let type_avg = corpus.type_level_average();
    let attested: Vec<usize> = (0..n).filter(|&w| counts[w] > 0).collect();
    let mut feature_terms = vec![0.0; attested.len()];
    for (name, weight) in &spec.aoa.feature_weights {
        let d = feature_index(name).expect("validated");
        let vals: Vec<f64> = attested.iter().map(|&w| type_avg[&vocab[w]][d]).collect();
        let m = vals.iter().sum::<f64>() / vals.len() as f64;
        let sd = (vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / vals.len() as f64).sqrt();
        for (t, v) in feature_terms.iter_mut().zip(&vals) {
            *t += weight * if sd > 0.0 { (v - m) / sd } else { 0.0 };
        }
    }
    let mut aoa_rng = ChaCha8Rng::seed_from_u64(derive(spec.seed, "synth/aoa"));
    let mut aoa = BTreeMap::new();
    let mut chained_fraction = BTreeMap::new();
    for (i, &w) in attested.iter().enumerate() {
        let frac = chained[w] as f64 / counts[w] as f64;
        let noise = if spec.aoa.noise_stddev > 0.0 { spec.aoa.noise_stddev * normal(&mut aoa_rng) } else { 0.0 };
        let age = spec.aoa.intercept
            + spec.aoa.log_freq_weight * (counts[w] as f64).ln()
            + feature_terms[i]
            + spec.aoa.predictability_weight * frac
            + noise;
        aoa.insert(vocab[w].clone(), age.max(spec.aoa.min_aoa));
        chained_fraction.insert(vocab[w].clone(), frac);
    }
    let pos_labels = PosLabels::new(vocab.iter().cloned().zip(pos.iter().copied()).collect());
    Ok(SynthOutput {
        corpus,
        aoa: AoaDataset::new(aoa)?,
        pos: pos_labels,
        vocab,
        successor,
        chained_fraction,
    })
}
