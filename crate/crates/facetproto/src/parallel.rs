//! Thread-parallel versions of the embarrassingly parallel pipeline stages.
//!
//! Work is split by episode index (or column pair) and gathered in index
//! order, so every result is bitwise identical to the serial functions in
//! `facetproto_core` regardless of thread count. Functions run on the current
//! rayon pool; wrap calls in [`with_threads`] to pin the pool size.

use facetproto_core::eval::{episode_accuracy, EpisodeClassifier, EvalReport};
use facetproto_core::facets::{kendall_tau, upper_pairs, SimilarityMatrix};
use facetproto_core::importance::importance_row_at;
use facetproto_core::{FeatureBank, ImportanceMatrix, Result, RunConfig};
use rayon::prelude::*;

/// Runs `f` on a dedicated pool of `threads` workers (0 = rayon default).
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .expect("thread pool")
        .install(f)
}

/// Parallel [`facetproto_core::importance::build_importance_matrix`].
pub fn build_importance_matrix(bank: &FeatureBank, config: &RunConfig) -> Result<ImportanceMatrix> {
    config.validate()?;
    let rows = (0..config.m_importance)
        .into_par_iter()
        .map(|j| importance_row_at(bank, config, j))
        .collect::<Result<Vec<_>>>()?;
    ImportanceMatrix::from_rows(rows)
}

/// Parallel [`facetproto_core::facets::build_similarity`].
pub fn build_similarity(a: &ImportanceMatrix) -> Result<SimilarityMatrix> {
    let columns: Vec<Vec<f64>> = (0..a.cols()).into_par_iter().map(|i| a.column(i)).collect();
    let pairs: Vec<(usize, usize)> = upper_pairs(a.cols()).collect();
    let upper = pairs
        .par_iter()
        .map(|&(i, j)| kendall_tau(&columns[i], &columns[j]))
        .collect::<Result<Vec<_>>>()?;
    SimilarityMatrix::from_upper_triangle(a.cols(), &upper)
}

/// Parallel [`facetproto_core::eval::evaluate_with`].
pub fn evaluate_with<C: EpisodeClassifier + Sync + ?Sized>(
    bank: &FeatureBank,
    config: &RunConfig,
    classifier: &C,
) -> Result<EvalReport> {
    config.validate()?;
    let accuracies = (0..config.episodes)
        .into_par_iter()
        .map(|j| episode_accuracy(bank, config, classifier, j))
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalReport::from_accuracies(config.seed, accuracies))
}
