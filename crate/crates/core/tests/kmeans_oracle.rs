mod common;

use common::normal;
use proptest::prelude::*;
use prosolm::quantizer::{fit_kmeans, KMeansOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const RAW: KMeansOptions = KMeansOptions { max_iter: 100, tol: 1e-6, standardize: false };

/// Minimum within-cluster SSE over every assignment of points to k labels.
fn exhaustive_min_sse(points: &[Vec<f64>], k: usize) -> f64 {
    let n = points.len();
    let d = points[0].len();
    let mut best = f64::INFINITY;
    let mut labels = vec![0usize; n];
    loop {
        let mut sse = 0.0;
        for c in 0..k {
            let members: Vec<&Vec<f64>> = points.iter().zip(&labels).filter(|(_, &l)| l == c).map(|(p, _)| p).collect();
            if members.is_empty() {
                continue;
            }
            for j in 0..d {
                let m = members.iter().map(|p| p[j]).sum::<f64>() / members.len() as f64;
                sse += members.iter().map(|p| (p[j] - m).powi(2)).sum::<f64>();
            }
        }
        best = best.min(sse);
        let mut i = 0;
        while i < n {
            labels[i] += 1;
            if labels[i] < k {
                break;
            }
            labels[i] = 0;
            i += 1;
        }
        if i == n {
            return best;
        }
    }
}

#[test]
fn separated_clusters_reach_exhaustive_optimum() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for k in 2..=3 {
        let centers = [[0.0, 0.0], [10.0, 0.0], [0.0, 10.0]];
        let points: Vec<Vec<f64>> = (0..9)
            .map(|i| {
                let c = centers[i % k];
                vec![c[0] + 0.3 * normal(&mut rng), c[1] + 0.3 * normal(&mut rng)]
            })
            .collect();
        let m = fit_kmeans(&points, k, 1, &RAW).unwrap();
        let want = exhaustive_min_sse(&points, k);
        assert!((m.distortion - want).abs() < 1e-9 * want.max(1.0), "k={k}: {} vs {want}", m.distortion);
    }
}

#[test]
fn one_cluster_per_distinct_point_has_zero_distortion() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let points: Vec<Vec<f64>> = (0..25).map(|_| (0..88).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let m = fit_kmeans(&points, 25, 0, &KMeansOptions::default()).unwrap();
    assert_eq!(m.distortion, 0.0);
}

#[test]
fn same_seed_gives_identical_codebook() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let points: Vec<Vec<f64>> = (0..800).map(|_| (0..88).map(|_| normal(&mut rng)).collect()).collect();
    let a = fit_kmeans(&points, 20, 42, &KMeansOptions::default()).unwrap();
    let b = fit_kmeans(&points, 20, 42, &KMeansOptions::default()).unwrap();
    assert_eq!(a.to_codebook_string(), b.to_codebook_string());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn distortion_never_increases(seed in any::<u64>(), n in 5usize..80, d in 1usize..6, k in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let points: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| normal(&mut rng)).collect()).collect();
        let m = fit_kmeans(&points, k.min(n), seed, &KMeansOptions::default()).unwrap();
        for w in m.history.windows(2) {
            prop_assert!(w[1] <= w[0]);
        }
        prop_assert_eq!(*m.history.last().unwrap(), m.distortion);
    }

    #[test]
    fn labels_are_nearest_centroid(seed in any::<u64>(), k in 1usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let points: Vec<Vec<f64>> = (0..60).map(|_| (0..4).map(|_| 5.0 * normal(&mut rng)).collect()).collect();
        let m = fit_kmeans(&points, k, seed, &KMeansOptions::default()).unwrap();
        for _ in 0..20 {
            let v: Vec<f64> = (0..4).map(|_| 5.0 * normal(&mut rng)).collect();
            let z = m.standardizer.apply(&v);
            let dist = |c: &Vec<f64>| c.iter().zip(&z).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
            let mut best = 0;
            for (i, c) in m.centroids.iter().enumerate() {
                if dist(c) < dist(&m.centroids[best]) {
                    best = i;
                }
            }
            prop_assert_eq!(m.quantize(&v).unwrap() as usize, best);
        }
    }
}
