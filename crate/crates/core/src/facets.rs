//! Facet discovery: rank correlation between importance columns, then
//! average-link agglomerative clustering of the coordinates.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::error::{check_len, config, invalid, Error, Result};
use crate::types::{FacetPartition, ImportanceMatrix};

/// Average dissimilarities closer than this are treated as tied when picking
/// the next merge, so rounding in the linkage update cannot reorder merges.
pub const TIE_TOLERANCE: f64 = 1e-12;

fn cmp_f64(a: &f64, b: &f64) -> Ordering {
    a.partial_cmp(b).expect("finite inputs")
}

/// Number of tied pairs `sum t (t - 1) / 2` over runs of equal values in a
/// sorted sequence.
fn tied_pairs<T>(sorted: &[T], eq: impl Fn(&T, &T) -> bool) -> u64 {
    let mut total = 0u64;
    let mut run = 1u64;
    for w in sorted.windows(2) {
        if eq(&w[0], &w[1]) {
            run += 1;
        } else {
            total += run * (run - 1) / 2;
            run = 1;
        }
    }
    total + run * (run - 1) / 2
}

/// Sorts `v` in place and returns the number of inversions (pairs `i < j`
/// with `v[i] > v[j]`).
fn merge_sort_inversions(v: &mut [f64], buf: &mut [f64]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = merge_sort_inversions(&mut v[..mid], &mut buf[..mid])
        + merge_sort_inversions(&mut v[mid..], &mut buf[mid..]);
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if v[j] < v[i] {
            buf[k] = v[j];
            swaps += (mid - i) as u64;
            j += 1;
        } else {
            buf[k] = v[i];
            i += 1;
        }
        k += 1;
    }
    buf[k..k + mid - i].copy_from_slice(&v[i..mid]);
    k += mid - i;
    buf[k..k + n - j].copy_from_slice(&v[j..n]);
    v.copy_from_slice(&buf[..n]);
    swaps
}

/// Kendall tau-b between two samples, in `O(m log m)`.
///
/// `tau_b = (C - D) / sqrt((n0 - n1) (n0 - n2))` where `n0 = m (m - 1) / 2`,
/// `n1` and `n2` count pairs tied in `x` and in `y`. When either sample is
/// constant the statistic is undefined and `0.0` is returned.
pub fn kendall_tau(x: &[f64], y: &[f64]) -> Result<f64> {
    check_len("kendall tau", x.len(), y.len())?;
    let m = x.len();
    if m < 2 {
        return Err(config(format!(
            "kendall tau needs at least 2 observations, got {m}"
        )));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(invalid("kendall tau inputs must be finite"));
    }
    let mut pairs: Vec<(f64, f64)> = x.iter().copied().zip(y.iter().copied()).collect();
    pairs.sort_unstable_by(|a, b| cmp_f64(&a.0, &b.0).then_with(|| cmp_f64(&a.1, &b.1)));

    let n0 = (m as u64) * (m as u64 - 1) / 2;
    let n1 = tied_pairs(&pairs, |a, b| a.0 == b.0);
    let n3 = tied_pairs(&pairs, |a, b| a.0 == b.0 && a.1 == b.1);

    let mut ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let mut buf = vec![0.0; m];
    let swaps = merge_sort_inversions(&mut ys, &mut buf);
    let n2 = tied_pairs(&ys, |a, b| a == b);

    if n0 == n1 || n0 == n2 {
        return Ok(0.0);
    }
    let score = n0 as i64 - n1 as i64 - n2 as i64 + n3 as i64 - 2 * swaps as i64;
    let tau = score as f64 / libm::sqrt((n0 - n1) as f64 * (n0 - n2) as f64);
    Ok(tau.clamp(-1.0, 1.0))
}

/// Symmetric `n x n` similarity matrix with unit diagonal and entries in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SimilarityMatrix {
    pub fn new(n: usize, data: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(config("similarity matrix must be non-empty"));
        }
        check_len("similarity matrix", n * n, data.len())?;
        for i in 0..n {
            if data[i * n + i] != 1.0 {
                return Err(invalid(format!("similarity diagonal ({i}, {i}) is not 1")));
            }
            for j in 0..n {
                let v = data[i * n + j];
                if !(-1.0..=1.0).contains(&v) {
                    return Err(invalid(format!(
                        "similarity ({i}, {j}) = {v} outside [-1, 1]"
                    )));
                }
                if v != data[j * n + i] {
                    return Err(invalid(format!(
                        "similarity is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(Self { n, data })
    }

    /// Builds the matrix from the strictly upper triangle, listed row by row
    /// in the order of [`upper_pairs`].
    pub fn from_upper_triangle(n: usize, upper: &[f64]) -> Result<Self> {
        check_len(
            "similarity upper triangle",
            n * n.saturating_sub(1) / 2,
            upper.len(),
        )?;
        let mut data = vec![1.0; n * n];
        for ((i, j), &v) in upper_pairs(n).zip(upper) {
            data[i * n + j] = v;
            data[j * n + i] = v;
        }
        Self::new(n, data)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }
}

/// Index pairs `(i, j)` with `i < j`, in row-major order.
pub fn upper_pairs(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).flat_map(move |i| (i + 1..n).map(move |j| (i, j)))
}

/// Kendall tau-b between every pair of columns of `a`.
pub fn build_similarity(a: &ImportanceMatrix) -> Result<SimilarityMatrix> {
    let columns: Vec<Vec<f64>> = (0..a.cols()).map(|i| a.column(i)).collect();
    let upper = upper_pairs(a.cols())
        .map(|(i, j)| kendall_tau(&columns[i], &columns[j]))
        .collect::<Result<Vec<_>>>()?;
    SimilarityMatrix::from_upper_triangle(a.cols(), &upper)
}

/// One agglomeration step. Clusters are named by their smallest coordinate
/// index; `left < right` and the merged cluster keeps the name `left`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub dissimilarity: f64,
    pub size: usize,
}

/// Average-link clustering of the coordinates into `num_facets` facets, using
/// dissimilarity `1 - similarity`.
pub fn agglomerate(sim: &SimilarityMatrix, num_facets: usize) -> Result<FacetPartition> {
    agglomerate_with_trace(sim, num_facets).map(|(p, _)| p)
}

/// [`agglomerate`] that also returns the merge sequence.
///
/// Each step merges the pair of clusters with the smallest average pairwise
/// dissimilarity, ties (within [`TIE_TOLERANCE`]) going to the
/// lexicographically smallest `(left, right)` pair. Average distances are
/// maintained with the Lance-Williams update. Facets come out ordered by their
/// smallest member.
pub fn agglomerate_with_trace(
    sim: &SimilarityMatrix,
    num_facets: usize,
) -> Result<(FacetPartition, Vec<Merge>)> {
    let n = sim.len();
    if num_facets == 0 || num_facets > n {
        return Err(Error::Config(format!(
            "number of facets must be in 1..={n}, got {num_facets}"
        )));
    }
    let mut dist: Vec<f64> = sim.data.iter().map(|s| 1.0 - s).collect();
    let mut members: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    let mut active: Vec<usize> = (0..n).collect();
    let mut trace = Vec::with_capacity(n - num_facets);

    while active.len() > num_facets {
        let mut best: Option<(usize, usize, f64)> = None;
        for (ai, &a) in active.iter().enumerate() {
            for &b in &active[ai + 1..] {
                let d = dist[a * n + b];
                match best {
                    Some((_, _, bd)) if d >= bd - TIE_TOLERANCE => {}
                    _ => best = Some((a, b, d)),
                }
            }
        }
        let (a, b, d) = best.expect("at least two active clusters");
        let (size_a, size_b) = (members[a].len() as f64, members[b].len() as f64);
        for &k in &active {
            if k == a || k == b {
                continue;
            }
            let merged = (size_a * dist[k * n + a] + size_b * dist[k * n + b]) / (size_a + size_b);
            dist[k * n + a] = merged;
            dist[a * n + k] = merged;
        }
        let moved = core::mem::take(&mut members[b]);
        members[a].extend(moved);
        active.retain(|&k| k != b);
        trace.push(Merge {
            left: a,
            right: b,
            dissimilarity: d,
            size: members[a].len(),
        });
    }

    let facets = active
        .iter()
        .map(|&a| core::mem::take(&mut members[a]))
        .collect();
    Ok((FacetPartition::new(n, facets)?, trace))
}
