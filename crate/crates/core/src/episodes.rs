//! Seeded N-way K-shot episode sampling.
//!
//! One episode consumes a single [`Xorshift64Star`] stream: first the sorted
//! class-id list is shuffled and its first `n` entries become the roster, then
//! for each roster class in order the class's image ids (sorted) are shuffled;
//! the first `k` become support shots and the next `q` query shots.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::rng::{mix, Xorshift64Star};
use crate::types::{Episode, FeatureBank, RunConfig, Shot};

/// Samples one episode. Identical arguments give an identical episode.
pub fn sample_episode(
    bank: &FeatureBank,
    n: usize,
    k: usize,
    q: usize,
    rng_seed: u64,
) -> Result<Episode<'_>> {
    if bank.num_classes() < n {
        return Err(Error::Capacity {
            class_id: None,
            needed: n,
            available: bank.num_classes(),
        });
    }
    let mut rng = Xorshift64Star::new(rng_seed);
    let mut classes: Vec<&str> = bank.class_ids().collect();
    rng.shuffle(&mut classes);
    classes.truncate(n);

    let records = bank.records();
    let mut support = Vec::with_capacity(n * k);
    let mut query = Vec::with_capacity(n * q);
    for (class_index, &class_id) in classes.iter().enumerate() {
        let members = bank.class_records(class_id).unwrap_or(&[]);
        if members.len() < k + q {
            return Err(Error::Capacity {
                class_id: Some(class_id.into()),
                needed: k + q,
                available: members.len(),
            });
        }
        let mut members = members.to_vec();
        members.sort_unstable_by(|&a, &b| records[a].image_id.cmp(&records[b].image_id));
        rng.shuffle(&mut members);
        let shot = |&idx: &usize| Shot {
            image_id: records[idx].image_id.as_str(),
            features: records[idx].features.as_slice(),
            class_index,
        };
        support.extend(members[..k].iter().map(shot));
        query.extend(members[k..k + q].iter().map(shot));
    }
    Episode::new(classes, k, q, support, query)
}

/// The `index`-th episode of the stream defined by `config`.
pub fn episode_at<'a>(
    bank: &'a FeatureBank,
    config: &RunConfig,
    index: usize,
) -> Result<Episode<'a>> {
    sample_episode(
        bank,
        config.n_way,
        config.k_shot,
        config.q_query,
        mix(config.seed, index as u64),
    )
}

/// Lazily yields `config.episodes` episodes; episode `j` is seeded with
/// `mix(config.seed, j)`, so any episode can be regenerated independently.
pub fn episode_stream<'a>(
    bank: &'a FeatureBank,
    config: &'a RunConfig,
) -> impl Iterator<Item = Result<Episode<'a>>> + 'a {
    (0..config.episodes).map(move |j| episode_at(bank, config, j))
}
