//! Per-coordinate discriminative importance.
//!
//! For an example `x` of class `c` and coordinate `i`, the term is
//!
//! ```text
//! min(CAP, relu( sum_{d != c} (x[i] - v_d[i])^2 / ((N - 1) * ((x[i] - v_c[i])^2 + EPSILON)) - 1 ))
//! ```
//!
//! summed over every support and query example of `c`. The ratio compares the
//! mean squared gap to rival prototypes with the gap to the own prototype, so
//! the term is positive only when `x[i]` sits closer to its own prototype.
//! A one-shot support example coincides with its prototype, which is why the
//! denominator carries `EPSILON` and terms are capped at `CAP`.

use alloc::vec;
use alloc::vec::Vec;

use crate::episodes::episode_at;
use crate::error::Result;
use crate::metric::{compute_prototypes, Prototype};
use crate::types::{Episode, FeatureBank, ImportanceMatrix, RunConfig};

pub const EPSILON: f64 = 1e-12;
pub const CAP: f64 = 1e6;

/// One capped ReLU term for value `x` whose own prototype coordinate is
/// `own` and whose rival prototype coordinates are `rivals`.
pub fn importance_term(x: f64, own: f64, rivals: impl Iterator<Item = f64>, n_way: usize) -> f64 {
    let rival_gap: f64 = rivals.map(|v| (x - v) * (x - v)).sum();
    let own_gap = (x - own) * (x - own);
    let arg = rival_gap / ((n_way - 1) as f64 * (own_gap + EPSILON)) - 1.0;
    if arg > 0.0 {
        arg.min(CAP)
    } else {
        0.0
    }
}

/// Importance `a_c^i` of coordinate `coord` for episode class `class_index`.
pub fn coordinate_importance_class(
    episode: &Episode<'_>,
    prototypes: &[Prototype],
    class_index: usize,
    coord: usize,
) -> f64 {
    let n = episode.n_way();
    episode
        .labelled()
        .filter(|s| s.class_index == class_index)
        .map(|s| {
            let rivals = prototypes
                .iter()
                .filter(|p| p.class_index != class_index)
                .map(|p| p.vector[coord]);
            importance_term(
                s.features[coord],
                prototypes[class_index].vector[coord],
                rivals,
                n,
            )
        })
        .sum()
}

/// Episode importance `a^i`: the mean of `a_c^i` over the episode classes.
pub fn coordinate_importance_episode(
    episode: &Episode<'_>,
    prototypes: &[Prototype],
    coord: usize,
) -> f64 {
    let n = episode.n_way();
    let total: f64 = (0..n)
        .map(|c| coordinate_importance_class(episode, prototypes, c, coord))
        .sum();
    total / n as f64
}

/// All coordinate importances of one episode, `(a^0, .., a^{dim-1})`.
///
/// Bitwise equal to calling [`coordinate_importance_episode`] per coordinate.
pub fn importance_row(episode: &Episode<'_>) -> Vec<f64> {
    let prototypes = compute_prototypes(episode);
    let n = episode.n_way();
    let dim = episode.dim();
    // per_class[c][i] accumulates a_c^i in labelled order
    let mut per_class = vec![vec![0.0; dim]; n];
    for shot in episode.labelled() {
        let c = shot.class_index;
        let acc = &mut per_class[c];
        for (i, a) in acc.iter_mut().enumerate() {
            let rivals = prototypes
                .iter()
                .filter(|p| p.class_index != c)
                .map(|p| p.vector[i]);
            *a += importance_term(shot.features[i], prototypes[c].vector[i], rivals, n);
        }
    }
    (0..dim)
        .map(|i| per_class.iter().map(|row| row[i]).sum::<f64>() / n as f64)
        .collect()
}

/// Row `index` of the importance matrix: the importance row of episode `index`
/// of the stream defined by `config`.
pub fn importance_row_at(bank: &FeatureBank, config: &RunConfig, index: usize) -> Result<Vec<f64>> {
    Ok(importance_row(&episode_at(bank, config, index)?))
}

/// Stacks `config.m_importance` episode rows into an `m x dim` matrix.
pub fn build_importance_matrix(bank: &FeatureBank, config: &RunConfig) -> Result<ImportanceMatrix> {
    config.validate()?;
    let m = config.m_importance;
    let mut data = Vec::with_capacity(m * bank.dim());
    for j in 0..m {
        data.extend(importance_row_at(bank, config, j)?);
    }
    ImportanceMatrix::new(m, bank.dim(), data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Shot;
    use alloc::vec;

    fn shot<'a>(image_id: &'a str, features: &'a [f64], class_index: usize) -> Shot<'a> {
        Shot {
            image_id,
            features,
            class_index,
        }
    }

    #[test]
    fn hand_evaluated_term() {
        // own prototype 0, rival 2, x = 0.5, N = 2: ratio 2.25 / 0.25 = 9.
        let t = importance_term(0.5, 0.0, [2.0].into_iter(), 2);
        assert!((t - 8.0).abs() < 1e-9, "{t}");
    }

    #[test]
    fn equidistant_and_rival_side_terms_vanish() {
        assert_eq!(importance_term(1.0, 0.0, [2.0].into_iter(), 2), 0.0);
        assert_eq!(importance_term(1.8, 0.0, [2.0].into_iter(), 2), 0.0);
        // averaged rivals: (1-0)^2 + (1-2)^2 over 2 * (1-... ) with own gap 1
        assert_eq!(importance_term(1.0, 0.0, [0.0, 2.0].into_iter(), 3), 0.0);
    }

    #[test]
    fn zero_denominator_is_capped() {
        assert_eq!(importance_term(1.0, 1.0, [3.0].into_iter(), 2), CAP);
        assert_eq!(importance_term(1.0, 1.0, [1.0].into_iter(), 2), 0.0);
    }

    #[test]
    fn episode_importance_is_class_mean() {
        // Two classes, K = 2, Q = 1, one coordinate.
        let f = [[0.5], [-0.5], [0.0], [2.0], [2.0], [2.0]];
        let ep = Episode::new(
            vec!["a", "b"],
            2,
            1,
            vec![
                shot("1", &f[0], 0),
                shot("2", &f[1], 0),
                shot("4", &f[3], 1),
                shot("5", &f[4], 1),
            ],
            vec![shot("3", &f[2], 0), shot("6", &f[5], 1)],
        )
        .unwrap();
        let protos = compute_prototypes(&ep);
        // class a: prototype 0, rival 2. x=0.5 -> 8, x=-0.5 -> 6.25/0.25-1 = 24, x=0 -> CAP.
        let a = coordinate_importance_class(&ep, &protos, 0, 0);
        assert!((a - (8.0 + 24.0 + CAP)).abs() < 1e-6, "{a}");
        // class b: all examples equal to the prototype -> CAP each.
        let b = coordinate_importance_class(&ep, &protos, 1, 0);
        assert_eq!(b, 3.0 * CAP);
        let e = coordinate_importance_episode(&ep, &protos, 0);
        assert_eq!(e, (a + b) / 2.0);
        assert_eq!(importance_row(&ep), vec![e]);
    }
}
