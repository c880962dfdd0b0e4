//! Vector quantization of prosody vectors.
//!
//! Vectors are z-scored per dimension and clustered with Lloyd's algorithm
//! from k-means++ seeding. The resulting codebook maps any vector to the
//! index of its nearest centroid, which becomes the token's prosody class.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::corpus::{Corpus, ProsClass, QuantizedCorpus};
use crate::error::{Error, Result};

/// Per-dimension mean and population standard deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub stddev: Vec<f64>,
    /// Dimensions whose training variance was zero; their stddev is stored as 1.
    pub constant: Vec<bool>,
}

impl Standardizer {
    pub fn fit<V: AsRef<[f64]>>(vectors: &[V]) -> Result<Self> {
        if vectors.len() < 2 {
            return Err(Error::InsufficientData(format!(
                "standardizer needs at least 2 vectors, got {}",
                vectors.len()
            )));
        }
        let dim = vectors[0].as_ref().len();
        if vectors.iter().any(|v| v.as_ref().len() != dim) {
            return Err(Error::InvalidInput("vectors differ in length".into()));
        }
        let n = vectors.len() as f64;
        let mut mean = vec![0.0; dim];
        for v in vectors {
            for (m, x) in mean.iter_mut().zip(v.as_ref()) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; dim];
        for v in vectors {
            for ((s, x), m) in var.iter_mut().zip(v.as_ref()).zip(&mean) {
                let d = x - m;
                *s += d * d;
            }
        }
        let mut constant = vec![false; dim];
        let stddev = var
            .iter()
            .zip(&mut constant)
            .map(|(s, c)| {
                let sd = (s / n).sqrt();
                if sd > 0.0 {
                    sd
                } else {
                    *c = true;
                    1.0
                }
            })
            .collect();
        Ok(Standardizer {
            mean,
            stddev,
            constant,
        })
    }

    pub fn identity(dim: usize) -> Self {
        Standardizer {
            mean: vec![0.0; dim],
            stddev: vec![1.0; dim],
            constant: vec![false; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        v.iter()
            .zip(self.mean.iter().zip(&self.stddev))
            .map(|(x, (m, s))| (x - m) / s)
            .collect()
    }

    pub fn invert(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .zip(self.mean.iter().zip(&self.stddev))
            .map(|(x, (m, s))| x * s + m)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansOptions {
    pub max_iter: usize,
    /// Stop once the relative distortion decrease falls below this.
    pub tol: f64,
    /// Z-score the input before clustering. Off only for tests and for data
    /// that is already on a common scale.
    pub standardize: bool,
}

impl Default for KMeansOptions {
    fn default() -> Self {
        KMeansOptions {
            max_iter: 100,
            tol: 1e-6,
            standardize: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantizerModel {
    pub k: usize,
    /// Centroids in standardized space, one row per class.
    pub centroids: Vec<Vec<f64>>,
    pub standardizer: Standardizer,
    pub seed: u64,
    /// Sum of squared standardized distances at the final assignment.
    pub distortion: f64,
    /// Distortion after each assignment step. Empty for models loaded from disk.
    pub history: Vec<f64>,
}

/// Squared distance, summed in blocks of 8 dimensions. Every distance in
/// this module goes through here so equal inputs round identically.
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    sq_dist_bounded(a, b, f64::INFINITY)
}

/// Squared distance, abandoning the sum once it reaches `bound`. Terms are
/// non-negative, so a partial sum at or above `bound` proves the full sum is
/// too; the returned value is then only a lower bound.
fn sq_dist_bounded(a: &[f64], b: &[f64], bound: f64) -> f64 {
    let mut acc = 0.0;
    for (ca, cb) in a.chunks(8).zip(b.chunks(8)) {
        acc += ca.iter().zip(cb).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
        if acc >= bound {
            return acc;
        }
    }
    acc
}

/// Index and squared distance of the nearest centroid; ties go to the
/// lowest index.
fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, sq_dist(point, &centroids[0]));
    for (i, c) in centroids.iter().enumerate().skip(1) {
        let d = sq_dist_bounded(point, c, best.1);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

/// Relative slack on the expanded-form distance, far above its rounding
/// error (about `(dim + 3)·ε` of the magnitudes involved).
const EXPANSION_SLACK: f64 = 1e-10;

/// Nearest centroid for every point, identical to a full exact search.
/// Approximate distances `‖x‖² + ‖c‖² − 2x·c` come from one matrix product
/// per block of points; every centroid that could be the exact minimum
/// within the rounding margin is then rechecked with [`sq_dist`].
fn assign_all(points: &[Vec<f64>], centroids: &[Vec<f64>]) -> Vec<(usize, f64)> {
    const BLOCK: usize = 256;
    let k = centroids.len();
    let dim = points[0].len();
    let ct = DMatrix::from_fn(dim, k, |r, c| centroids[c][r]);
    let cnorm: Vec<f64> = centroids.iter().map(|c| c.iter().map(|x| x * x).sum()).collect();
    points
        .par_chunks(BLOCK)
        .flat_map_iter(|block| {
            let xm = DMatrix::from_fn(block.len(), dim, |r, c| block[r][c]);
            let g = &xm * &ct;
            let ct_norm = &cnorm;
            block.iter().enumerate().map(move |(r, p)| {
                let xx: f64 = p.iter().map(|x| x * x).sum();
                let approx = |i: usize| xx + ct_norm[i] - 2.0 * g[(r, i)];
                let margin = |i: usize| EXPANSION_SLACK * (xx + ct_norm[i] + 1.0);
                let b = (0..k).min_by(|&i, &j| approx(i).total_cmp(&approx(j))).expect("k >= 1");
                let ceiling = approx(b) + margin(b);
                let mut best = (usize::MAX, f64::INFINITY);
                for i in 0..k {
                    if approx(i) - margin(i) <= ceiling {
                        let d = sq_dist(p, &centroids[i]);
                        if d < best.1 {
                            best = (i, d);
                        }
                    }
                }
                best
            })
        })
        .collect()
}

fn count_distinct(points: &[Vec<f64>]) -> usize {
    let mut keys: Vec<Vec<u64>> = points
        .iter()
        .map(|p| p.iter().map(|x| (x + 0.0).to_bits()).collect())
        .collect();
    keys.sort_unstable();
    keys.dedup();
    keys.len()
}

fn kmeans_pp(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = points.len();
    let first = rng.random_range(0..n);
    let mut centroids = vec![points[first].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let threshold = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut pick = None;
        for (i, &d) in d2.iter().enumerate() {
            if d <= 0.0 {
                continue;
            }
            acc += d;
            pick = Some(i);
            if acc > threshold {
                break;
            }
        }
        // `pick` is always set: k never exceeds the distinct point count.
        let c = points[pick.expect("positive mass remains")].clone();
        d2.par_iter_mut().zip(points).for_each(|(d, p)| *d = d.min(sq_dist(p, &c)));
        centroids.push(c);
    }
    centroids
}

#[cfg(test)]
fn assign(points: &[Vec<f64>], centroids: &[Vec<f64>]) -> Vec<(usize, f64)> {
    points.par_iter().map(|p| nearest(p, centroids)).collect()
}

/// Clusters `vectors` into `k` groups. Deterministic in `(vectors, k, seed)`.
pub fn fit_kmeans<V: AsRef<[f64]>>(
    vectors: &[V],
    k: usize,
    seed: u64,
    opts: &KMeansOptions,
) -> Result<QuantizerModel> {
    if vectors.is_empty() {
        return Err(Error::InsufficientData("no vectors to cluster".into()));
    }
    let dim = vectors[0].as_ref().len();
    if vectors.iter().any(|v| v.as_ref().len() != dim) {
        return Err(Error::InvalidInput("vectors differ in length".into()));
    }
    if vectors.iter().any(|v| v.as_ref().iter().any(|x| !x.is_finite())) {
        return Err(Error::InvalidInput("non-finite vector entry".into()));
    }
    let standardizer = if opts.standardize {
        Standardizer::fit(vectors)?
    } else {
        Standardizer::identity(dim)
    };
    let points: Vec<Vec<f64>> = vectors
        .iter()
        .map(|v| standardizer.apply(v.as_ref()))
        .collect();
    let distinct = count_distinct(&points);
    if k == 0 || k > distinct {
        return Err(Error::Infeasible(format!(
            "k = {k} but only {distinct} distinct vectors"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = kmeans_pp(&points, k, &mut rng);
    let mut history = Vec::new();
    let mut iter = 0;
    loop {
        let assignment = assign_all(&points, &centroids);
        let distortion: f64 = assignment.iter().map(|a| a.1).sum();
        let converged = match history.last() {
            Some(&prev) => distortion == 0.0 || prev - distortion <= opts.tol * prev,
            None => distortion == 0.0,
        };
        history.push(distortion);
        if converged || iter >= opts.max_iter {
            break;
        }
        iter += 1;
        update_centroids(&points, &assignment, &mut centroids);
    }
    let distortion = *history.last().expect("at least one assignment");
    log::debug!(
        "k-means k={k}: {} assignment steps, distortion {distortion}",
        history.len()
    );
    Ok(QuantizerModel {
        k,
        centroids,
        standardizer,
        seed,
        distortion,
        history,
    })
}

fn update_centroids(points: &[Vec<f64>], assignment: &[(usize, f64)], centroids: &mut [Vec<f64>]) {
    let k = centroids.len();
    let dim = points[0].len();
    let mut sums = vec![vec![0.0; dim]; k];
    let mut counts = vec![0usize; k];
    for (p, &(c, _)) in points.iter().zip(assignment) {
        counts[c] += 1;
        for (s, x) in sums[c].iter_mut().zip(p) {
            *s += x;
        }
    }
    let mut empty = Vec::new();
    for c in 0..k {
        if counts[c] == 0 {
            empty.push(c);
        } else {
            let n = counts[c] as f64;
            centroids[c] = sums[c].iter().map(|s| s / n).collect();
        }
    }
    if empty.is_empty() {
        return;
    }
    // Reseed each empty cluster with the point farthest from its own centroid.
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| assignment[b].1.total_cmp(&assignment[a].1).then(a.cmp(&b)));
    let mut used: Vec<&[f64]> = Vec::new();
    let mut candidates = order
        .into_iter()
        .filter(|&i| assignment[i].1 > 0.0);
    for c in empty {
        for i in candidates.by_ref() {
            let p = points[i].as_slice();
            if used.iter().all(|u| *u != p) {
                used.push(p);
                centroids[c] = p.to_vec();
                break;
            }
        }
    }
}

impl QuantizerModel {
    pub fn dim(&self) -> usize {
        self.standardizer.dim()
    }

    /// Centroid `i` mapped back to the input feature space.
    pub fn centroid_raw(&self, i: usize) -> Vec<f64> {
        self.standardizer.invert(&self.centroids[i])
    }

    /// Class of the nearest centroid in standardized Euclidean distance.
    pub fn quantize(&self, vector: &[f64]) -> Result<u32> {
        if vector.len() != self.dim() {
            return Err(Error::InvalidInput(format!(
                "expected {}-dimensional vector, got {}",
                self.dim(),
                vector.len()
            )));
        }
        if vector.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("non-finite vector entry".into()));
        }
        let z = self.standardizer.apply(vector);
        Ok(nearest(&z, &self.centroids).0 as u32)
    }

    pub fn quantize_corpus(&self, corpus: &Corpus) -> Result<QuantizedCorpus> {
        let labels = corpus
            .utterances
            .iter()
            .map(|u| {
                u.tokens
                    .iter()
                    .map(|t| match &t.prosody {
                        Some(v) => self.quantize(v).map(ProsClass::new),
                        None => Ok(ProsClass::NOPROS),
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        QuantizedCorpus::new(corpus.clone(), labels)
    }

    pub fn to_codebook_string(&self) -> String {
        fn row(out: &mut String, v: &[f64]) {
            let line: Vec<String> = v.iter().map(f64::to_string).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        let mut out = String::new();
        let _ = writeln!(out, "{} {} {} {}", self.k, self.dim(), self.seed, self.distortion);
        row(&mut out, &self.standardizer.mean);
        row(&mut out, &self.standardizer.stddev);
        for c in &self.centroids {
            row(&mut out, c);
        }
        out
    }

    /// Parses the codebook text format. The constant-dimension flags are not
    /// stored; dimensions with unit stddev behave identically either way.
    pub fn from_codebook_str(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let bad = |m: &str| Error::Format(format!("codebook: {m}"));
        let header: Vec<&str> = lines
            .next()
            .ok_or_else(|| bad("missing header"))?
            .split_whitespace()
            .collect();
        if header.len() != 4 {
            return Err(bad("header must be `k dim seed distortion`"));
        }
        let k: usize = header[0].parse().map_err(|_| bad("bad k"))?;
        let dim: usize = header[1].parse().map_err(|_| bad("bad dim"))?;
        let seed: u64 = header[2].parse().map_err(|_| bad("bad seed"))?;
        let distortion: f64 = header[3].parse().map_err(|_| bad("bad distortion"))?;
        let mut next_row = |what: &str| -> Result<Vec<f64>> {
            let line = lines
                .next()
                .ok_or_else(|| bad(&format!("truncated before {what}")))?;
            let v = line
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| bad(&format!("unparsable {what}")))?;
            if v.len() != dim {
                return Err(bad(&format!("{what} has {} values, expected {dim}", v.len())));
            }
            Ok(v)
        };
        let mean = next_row("means")?;
        let stddev = next_row("stddevs")?;
        let centroids = (0..k)
            .map(|i| next_row(&format!("centroid {i}")))
            .collect::<Result<Vec<_>>>()?;
        if k == 0 {
            return Err(bad("k must be positive"));
        }
        Ok(QuantizerModel {
            k,
            centroids,
            standardizer: Standardizer {
                mean,
                stddev,
                constant: vec![false; dim],
            },
            seed,
            distortion,
            history: Vec::new(),
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_codebook_string()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_codebook_str(&text)
    }
}

/// Clusters every prosody vector in the corpus.
pub fn fit_corpus(corpus: &Corpus, k: usize, seed: u64, opts: &KMeansOptions) -> Result<QuantizerModel> {
    let vectors: Vec<&[f64]> = corpus
        .tokens()
        .filter_map(|t| t.prosody.as_deref())
        .collect();
    fit_kmeans(&vectors, k, seed, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn raw() -> KMeansOptions {
        KMeansOptions {
            standardize: false,
            ..Default::default()
        }
    }

    #[test]
    fn two_point_statistics() {
        let s = Standardizer::fit(&[vec![0.0, 5.0], vec![2.0, 5.0], vec![1.0, 5.0]]).unwrap();
        assert_eq!(s.mean[0], 1.0);
        assert!((s.stddev[0] - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
        let s = Standardizer::fit(&[vec![0.0], vec![2.0]]).unwrap();
        assert_eq!((s.mean[0], s.stddev[0]), (1.0, 1.0));
    }

    #[test]
    fn constant_dimension_flagged() {
        let s = Standardizer::fit(&[vec![5.0], vec![5.0], vec![5.0]]).unwrap();
        assert_eq!(s.mean[0], 5.0);
        assert_eq!(s.stddev[0], 1.0);
        assert!(s.constant[0]);
    }

    #[test]
    fn standardized_data_is_fixed_point() {
        let data: Vec<Vec<f64>> = vec![vec![-1.0], vec![1.0], vec![-1.0], vec![1.0]];
        let s = Standardizer::fit(&data).unwrap();
        assert!(s.mean[0].abs() < 1e-12 && (s.stddev[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fewer_than_two_vectors_rejected() {
        assert!(matches!(
            Standardizer::fit(&[vec![1.0]]),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn k1_centroid_is_mean() {
        let m = fit_kmeans(&[vec![0.0, 0.0], vec![2.0, 2.0]], 1, 0, &raw()).unwrap();
        assert_eq!(m.centroids[0], vec![1.0, 1.0]);
        assert_eq!(m.distortion, 4.0);
    }

    #[test]
    fn one_dim_two_clusters() {
        let pts = [vec![0.0], vec![0.1], vec![10.0], vec![10.1]];
        let m = fit_kmeans(&pts, 2, 11, &raw()).unwrap();
        let mut c: Vec<f64> = m.centroids.iter().map(|c| c[0]).collect();
        c.sort_by(f64::total_cmp);
        assert!((c[0] - 0.05).abs() < 1e-12 && (c[1] - 10.05).abs() < 1e-12);
        let low = m.centroids.iter().position(|c| c[0] < 5.0).unwrap() as u32;
        assert_eq!(m.quantize(&[0.04]).unwrap(), low);
    }

    #[test]
    fn infeasible_k() {
        let pts = [vec![1.0], vec![1.0], vec![2.0]];
        assert!(matches!(fit_kmeans(&pts, 3, 0, &raw()), Err(Error::Infeasible(_))));
        assert!(matches!(fit_kmeans(&pts, 0, 0, &raw()), Err(Error::Infeasible(_))));
    }

    #[test]
    fn ties_go_to_lowest_label() {
        let m = QuantizerModel {
            k: 5,
            centroids: vec![vec![9.0], vec![-1.0], vec![5.0], vec![7.0], vec![1.0]],
            standardizer: Standardizer::identity(1),
            seed: 0,
            distortion: 0.0,
            history: vec![],
        };
        assert_eq!(m.quantize(&[0.0]).unwrap(), 1);
        assert_eq!(m.quantize(&[7.0]).unwrap(), 3);
        assert!(m.quantize(&[f64::NAN]).is_err());
    }

    #[test]
    fn codebook_round_trip() {
        let pts: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64 * 0.37, (i * i) as f64 / 7.0]).collect();
        let m = fit_kmeans(&pts, 4, 5, &KMeansOptions::default()).unwrap();
        let back = QuantizerModel::from_codebook_str(&m.to_codebook_string()).unwrap();
        assert_eq!(back.centroids, m.centroids);
        assert_eq!(back.standardizer.mean, m.standardizer.mean);
        assert_eq!(back.distortion, m.distortion);
        let truncated: String = m.to_codebook_string().lines().take(4).collect::<Vec<_>>().join("\n");
        assert!(matches!(QuantizerModel::from_codebook_str(&truncated), Err(Error::Format(_))));
    }

    /// Plain Lloyd iterations with a full nearest-centroid search each step.
    fn reference_lloyd(points: &[Vec<f64>], k: usize, seed: u64, opts: &KMeansOptions) -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut centroids = kmeans_pp(points, k, &mut rng);
        let mut history: Vec<f64> = Vec::new();
        for iter in 0.. {
            let a = assign(points, &centroids);
            let d: f64 = a.iter().map(|x| x.1).sum();
            let done = match history.last() {
                Some(&p) => d == 0.0 || p - d <= opts.tol * p,
                None => d == 0.0,
            };
            history.push(d);
            if done || iter >= opts.max_iter {
                break;
            }
            update_centroids(points, &a, &mut centroids);
        }
        (centroids, history)
    }

    #[test]
    fn blocked_search_matches_full_search() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts: Vec<Vec<f64>> = (0..400)
            .map(|i| (0..6).map(|d| ((i % 7) as f64) * (d as f64 - 2.5) + rng.random::<f64>()).collect())
            .collect();
        for (k, seed) in [(3, 1), (12, 2), (40, 3)] {
            let m = fit_kmeans(&pts, k, seed, &raw()).unwrap();
            let (c, h) = reference_lloyd(&pts, k, seed, &raw());
            assert_eq!(m.centroids, c);
            assert_eq!(m.history, h);
        }
    }

    proptest! {
        #[test]
        fn unstandardize_inverts(v in proptest::collection::vec(-1e3f64..1e3, 3..6)) {
            let data = vec![vec![0.0, 1.0, -4.0], vec![3.0, 2.5, 8.0], vec![-2.0, 7.0, 1.0]];
            let s = Standardizer::fit(&data).unwrap();
            let v = &v[..3];
            let back = s.invert(&s.apply(v));
            for (a, b) in back.iter().zip(v) {
                prop_assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0));
            }
        }

        #[test]
        fn centroids_quantize_to_themselves(seed in 0u64..50, k in 1usize..6) {
            let pts: Vec<Vec<f64>> = (0..30)
                .map(|i| vec![((i * 7919) % 31) as f64, ((i * 104_729) % 17) as f64])
                .collect();
            let m = fit_kmeans(&pts, k, seed, &KMeansOptions::default()).unwrap();
            for w in m.history.windows(2) {
                prop_assert!(w[1] <= w[0]);
            }
            for i in 0..k {
                prop_assert_eq!(m.quantize(&m.centroid_raw(i)).unwrap() as usize, i);
            }
        }
    }
}
