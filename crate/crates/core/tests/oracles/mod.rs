//! Slow reference implementations shared by the integration and acceptance
//! tests.
#![allow(dead_code)]

use facetproto_core::facets::{SimilarityMatrix, TIE_TOLERANCE};
use facetproto_core::rng::Xorshift64Star;
use facetproto_core::{Episode, FeatureBank, Record};

/// O(m^2) Kendall tau-b.
pub fn brute_tau_b(x: &[f64], y: &[f64]) -> f64 {
    let m = x.len();
    let (mut concordant, mut discordant, mut tied_x, mut tied_y) = (0i64, 0i64, 0i64, 0i64);
    for i in 0..m {
        for j in i + 1..m {
            let dx = x[i] - x[j];
            let dy = y[i] - y[j];
            if dx == 0.0 {
                tied_x += 1;
            }
            if dy == 0.0 {
                tied_y += 1;
            }
            if dx != 0.0 && dy != 0.0 {
                if (dx > 0.0) == (dy > 0.0) {
                    concordant += 1;
                } else {
                    discordant += 1;
                }
            }
        }
    }
    let n0 = (m * (m - 1) / 2) as i64;
    let denom = ((n0 - tied_x) as f64) * ((n0 - tied_y) as f64);
    if denom == 0.0 {
        return 0.0;
    }
    (concordant - discordant) as f64 / denom.sqrt()
}

/// One merge as `(left, right, average dissimilarity)`.
pub type NaiveMerge = (usize, usize, f64);

/// Average-link agglomeration recomputing every cluster distance from the raw
/// pairwise dissimilarities at each step.
pub fn naive_agglomerate(
    sim: &SimilarityMatrix,
    num_facets: usize,
) -> (Vec<Vec<usize>>, Vec<NaiveMerge>) {
    let n = sim.len();
    let mut clusters: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    let mut merges = Vec::new();
    while clusters.len() > num_facets {
        let mut pairs = Vec::new();
        for a in 0..clusters.len() {
            for b in a + 1..clusters.len() {
                let mut total = 0.0;
                for &i in &clusters[a] {
                    for &j in &clusters[b] {
                        total += 1.0 - sim.get(i, j);
                    }
                }
                let d = total / (clusters[a].len() * clusters[b].len()) as f64;
                pairs.push((clusters[a][0], clusters[b][0], d, a, b));
            }
        }
        let min = pairs.iter().map(|p| p.2).fold(f64::INFINITY, f64::min);
        let &(left, right, d, a, b) = pairs
            .iter()
            .filter(|p| p.2 <= min + TIE_TOLERANCE)
            .min_by_key(|p| (p.0, p.1))
            .unwrap();
        merges.push((left, right, d));
        let moved = clusters.remove(b);
        clusters[a].extend(moved);
        clusters[a].sort_unstable();
        clusters.sort_by_key(|c| c[0]);
    }
    (clusters, merges)
}

/// Adjusted Rand index between two labelings of the same items.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> f64 {
    let ka = a.iter().max().map_or(0, |m| m + 1);
    let kb = b.iter().max().map_or(0, |m| m + 1);
    let mut table = vec![vec![0u64; kb]; ka];
    for (&i, &j) in a.iter().zip(b) {
        table[i][j] += 1;
    }
    let c2 = |v: u64| (v * v.saturating_sub(1) / 2) as f64;
    let index: f64 = table.iter().flatten().map(|&v| c2(v)).sum();
    let rows: f64 = table.iter().map(|r| c2(r.iter().sum())).sum();
    let cols: f64 = (0..kb).map(|j| c2(table.iter().map(|r| r[j]).sum())).sum();
    let total = c2(a.len() as u64);
    let expected = rows * cols / total;
    let max = 0.5 * (rows + cols);
    if max == expected {
        return 1.0;
    }
    (index - expected) / (max - expected)
}

/// Nearest-prototype decisions computed directly from the episode's raw
/// support and query vectors.
pub fn reference_protonet(episode: &Episode<'_>) -> Vec<usize> {
    let n = episode.n_way();
    let dim = episode.dim();
    let mut means = vec![vec![0.0; dim]; n];
    let mut counts = vec![0usize; n];
    for s in episode.support() {
        counts[s.class_index] += 1;
        for (m, v) in means[s.class_index].iter_mut().zip(s.features) {
            *m += v;
        }
    }
    for (m, c) in means.iter_mut().zip(&counts) {
        m.iter_mut().for_each(|v| *v /= *c as f64);
    }
    episode
        .query()
        .iter()
        .map(|q| {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (c, m) in means.iter().enumerate() {
                let d: f64 = q
                    .features
                    .iter()
                    .zip(m)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                if d < best_d {
                    best = c;
                    best_d = d;
                }
            }
            best
        })
        .collect()
}

/// Bank of `classes` classes named `c00`, `c01`, ... with `per_class` standard
/// normal feature vectors each, class means spread by `spread`.
pub fn random_bank(
    classes: usize,
    per_class: usize,
    dim: usize,
    spread: f64,
    seed: u64,
) -> FeatureBank {
    let mut rng = Xorshift64Star::new(seed);
    let mut records = Vec::with_capacity(classes * per_class);
    for c in 0..classes {
        let mean: Vec<f64> = (0..dim).map(|_| spread * rng.gaussian()).collect();
        for i in 0..per_class {
            records.push(Record {
                class_id: format!("c{c:02}"),
                image_id: format!("c{c:02}_{i:03}"),
                features: mean.iter().map(|m| m + rng.gaussian()).collect(),
            });
        }
    }
    FeatureBank::new(dim, records).unwrap()
}

/// Relative closeness with an absolute floor on the scale.
pub fn close(a: f64, b: f64, rel: f64, floor: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(floor)
}
