//! Prototypes and the distances used to score a query against them.
//!
//! All distances accumulate in `f64`. The plain squared Euclidean distance is
//! always summed in coordinate order, so the blended distance at `lambda = 0`
//! is bitwise equal to it and nearest-prototype decisions are unchanged.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_len, config, invalid, Result};
use crate::types::{Episode, FacetPartition};

/// Tolerance on the sum of facet weights.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;

/// Mean support feature of one episode class.
#[derive(Debug, Clone, PartialEq)]
pub struct Prototype {
    pub class_index: usize,
    pub vector: Vec<f64>,
}

/// Probability vector over facets.
#[derive(Debug, Clone, PartialEq)]
pub struct FacetWeights(Vec<f64>);

impl FacetWeights {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(invalid("facet weights are empty"));
        }
        if let Some(w) = weights.iter().find(|w| !(0.0..=1.0).contains(*w)) {
            return Err(invalid(format!("facet weight {w} outside [0, 1]")));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            return Err(invalid(format!("facet weights sum to {sum}, not 1")));
        }
        Ok(Self(weights))
    }

    /// Divides non-negative scores by their sum.
    pub fn normalized(scores: &[f64]) -> Result<Self> {
        if scores.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(invalid("facet scores must be finite and non-negative"));
        }
        let sum: f64 = scores.iter().sum();
        if sum <= 0.0 {
            return Err(invalid("facet scores sum to zero"));
        }
        Self::new(scores.iter().map(|s| s / sum).collect())
    }

    pub fn uniform(num_facets: usize) -> Self {
        Self(vec![1.0 / num_facets as f64; num_facets])
    }

    pub fn one_hot(num_facets: usize, facet: usize) -> Self {
        let mut w = vec![0.0; num_facets];
        w[facet] = 1.0;
        Self(w)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub(crate) fn from_raw(weights: Vec<f64>) -> Self {
        Self(weights)
    }
}

/// One prototype per episode class, the mean of its `K` support features.
pub fn compute_prototypes(episode: &Episode<'_>) -> Vec<Prototype> {
    let dim = episode.dim();
    let mut sums = vec![vec![0.0; dim]; episode.n_way()];
    for shot in episode.support() {
        for (s, x) in sums[shot.class_index].iter_mut().zip(shot.features) {
            *s += x;
        }
    }
    let k = episode.k_shot() as f64;
    sums.into_iter()
        .enumerate()
        .map(|(class_index, mut vector)| {
            vector.iter_mut().for_each(|v| *v /= k);
            Prototype {
                class_index,
                vector,
            }
        })
        .collect()
}

pub fn sq_euclidean(a: &[f64], b: &[f64]) -> Result<f64> {
    check_len("squared euclidean", a.len(), b.len())?;
    Ok(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum())
}

/// Squared distance restricted to each facet's coordinates.
pub fn block_sq_distances(
    query: &[f64],
    proto: &[f64],
    partition: &FacetPartition,
) -> Result<Vec<f64>> {
    check_len("facet partition", partition.dim(), query.len())?;
    check_len("prototype", query.len(), proto.len())?;
    let mut blocks = vec![0.0; partition.num_facets()];
    for ((x, y), &f) in query.iter().zip(proto).zip(partition.facet_of()) {
        blocks[f] += (x - y) * (x - y);
    }
    Ok(blocks)
}

/// Facet-weighted squared distance `sum_f eta_f * ||query_f - proto_f||^2`.
pub fn fdist(
    query: &[f64],
    proto: &[f64],
    partition: &FacetPartition,
    eta: &FacetWeights,
) -> Result<f64> {
    check_len("facet weights", partition.num_facets(), eta.len())?;
    let blocks = block_sq_distances(query, proto, partition)?;
    Ok(blocks.iter().zip(eta.as_slice()).map(|(d, w)| w * d).sum())
}

/// `sq_euclidean + lambda * fdist`.
pub fn blended_dist(
    query: &[f64],
    proto: &[f64],
    partition: &FacetPartition,
    eta: &FacetWeights,
    lambda: f64,
) -> Result<f64> {
    if lambda.is_nan() || lambda < 0.0 {
        return Err(config(format!("lambda must be >= 0, got {lambda}")));
    }
    let plain = sq_euclidean(query, proto)?;
    let facet = fdist(query, proto, partition, eta)?;
    Ok(plain + lambda * facet)
}

/// Index of the smallest score; ties go to the lowest index.
pub fn argmin(scores: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &s) in scores.iter().enumerate() {
        match best {
            Some((_, b)) if s >= b => {}
            _ => best = Some((i, s)),
        }
    }
    best.map(|(i, _)| i)
}

/// Class index of the prototype with the smallest blended distance.
pub fn classify(
    query: &[f64],
    prototypes: &[Prototype],
    partition: &FacetPartition,
    eta: &FacetWeights,
    lambda: f64,
) -> Result<usize> {
    let scores = prototypes
        .iter()
        .map(|p| blended_dist(query, &p.vector, partition, eta, lambda))
        .collect::<Result<Vec<_>>>()?;
    argmin(&scores)
        .map(|i| prototypes[i].class_index)
        .ok_or_else(|| invalid("classify needs at least one prototype"))
}

/// Variant of [`classify`] scoring prototype `c` with its own class weights
/// `per_class[c]` instead of one episode-averaged vector.
pub fn classify_per_class(
    query: &[f64],
    prototypes: &[Prototype],
    partition: &FacetPartition,
    per_class: &[FacetWeights],
    lambda: f64,
) -> Result<usize> {
    check_len("per-class facet weights", prototypes.len(), per_class.len())?;
    let scores = prototypes
        .iter()
        .zip(per_class)
        .map(|(p, eta)| blended_dist(query, &p.vector, partition, eta, lambda))
        .collect::<Result<Vec<_>>>()?;
    argmin(&scores)
        .map(|i| prototypes[i].class_index)
        .ok_or_else(|| invalid("classify needs at least one prototype"))
}

/// Plain nearest-prototype decision under squared Euclidean distance.
pub fn nearest_prototype(query: &[f64], prototypes: &[Prototype]) -> Result<usize> {
    let scores = prototypes
        .iter()
        .map(|p| sq_euclidean(query, &p.vector))
        .collect::<Result<Vec<_>>>()?;
    argmin(&scores)
        .map(|i| prototypes[i].class_index)
        .ok_or_else(|| invalid("classify needs at least one prototype"))
}
