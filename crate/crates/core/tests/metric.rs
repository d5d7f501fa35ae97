mod oracles;

use facetproto_core::episodes::sample_episode;
use facetproto_core::metric::{
    argmin, blended_dist, block_sq_distances, classify, compute_prototypes, fdist, sq_euclidean,
    FacetWeights,
};
use facetproto_core::FacetPartition;
use proptest::prelude::*;

fn vectors_and_labels() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<usize>, usize)> {
    (1usize..40).prop_flat_map(|dim| {
        (1usize..=dim).prop_flat_map(move |f| {
            (
                prop::collection::vec(-50.0f64..50.0, dim),
                prop::collection::vec(-50.0f64..50.0, dim),
                prop::collection::vec(0..f, dim),
                Just(f),
            )
        })
    })
}

fn relabel(labels: &[usize]) -> FacetPartition {
    let mut used: Vec<usize> = labels.to_vec();
    used.sort_unstable();
    used.dedup();
    let dense: Vec<usize> = labels
        .iter()
        .map(|l| used.binary_search(l).unwrap())
        .collect();
    FacetPartition::from_labels(&dense, used.len()).unwrap()
}

proptest! {
    #[test]
    fn block_distances_sum_to_full_distance((q, p, labels, _f) in vectors_and_labels()) {
        let partition = relabel(&labels);
        let full = sq_euclidean(&q, &p).unwrap();
        let blocks: f64 = block_sq_distances(&q, &p, &partition).unwrap().iter().sum();
        prop_assert!(oracles::close(blocks, full, 1e-9, 1e-300));
        let uniform = FacetWeights::uniform(partition.num_facets());
        let fd = fdist(&q, &p, &partition, &uniform).unwrap();
        let expected = full / partition.num_facets() as f64;
        prop_assert!(oracles::close(fd, expected, 1e-9, 1e-300));
    }

    #[test]
    fn zero_lambda_is_plain_euclidean((q, p, labels, _f) in vectors_and_labels(), seed in any::<u64>()) {
        let partition = relabel(&labels);
        let mut rng = facetproto_core::rng::Xorshift64Star::new(seed);
        let scores: Vec<f64> = (0..partition.num_facets()).map(|_| rng.next_f64()).collect();
        let eta = FacetWeights::normalized(&scores).unwrap();
        let blended = blended_dist(&q, &p, &partition, &eta, 0.0).unwrap();
        prop_assert_eq!(blended.to_bits(), sq_euclidean(&q, &p).unwrap().to_bits());
    }

    #[test]
    fn blended_distance_is_monotone_in_lambda(
        (q, p, labels, _f) in vectors_and_labels(),
        l1 in 0.0f64..20.0,
        l2 in 0.0f64..20.0,
    ) {
        let partition = relabel(&labels);
        let eta = FacetWeights::uniform(partition.num_facets());
        let (lo, hi) = if l1 <= l2 { (l1, l2) } else { (l2, l1) };
        let a = blended_dist(&q, &p, &partition, &eta, lo).unwrap();
        let b = blended_dist(&q, &p, &partition, &eta, hi).unwrap();
        prop_assert!(a <= b);
    }

    #[test]
    fn one_hot_weights_select_one_block((q, p, labels, _f) in vectors_and_labels(), pick in any::<prop::sample::Index>()) {
        let partition = relabel(&labels);
        let facet = pick.index(partition.num_facets());
        let eta = FacetWeights::one_hot(partition.num_facets(), facet);
        let blocks = block_sq_distances(&q, &p, &partition).unwrap();
        prop_assert_eq!(fdist(&q, &p, &partition, &eta).unwrap(), blocks[facet]);
    }

    #[test]
    fn argmin_picks_first_minimum(scores in prop::collection::vec(prop::sample::select(vec![0.0, 1.0, 2.0, 3.0]), 1..12)) {
        let best = argmin(&scores).unwrap();
        let min = scores.iter().copied().fold(f64::INFINITY, f64::min);
        prop_assert_eq!(best, scores.iter().position(|&s| s == min).unwrap());
    }
}

#[test]
fn decisions_survive_uniform_feature_scaling() {
    let bank = oracles::random_bank(8, 10, 12, 1.0, 5);
    let scaled_records: Vec<_> = bank
        .records()
        .iter()
        .map(|r| {
            let mut r = r.clone();
            r.features.iter_mut().for_each(|v| *v *= 4.0);
            r
        })
        .collect();
    let scaled = facetproto_core::FeatureBank::new(12, scaled_records).unwrap();
    let partition =
        FacetPartition::from_labels(&(0..12).map(|i| i % 3).collect::<Vec<_>>(), 3).unwrap();
    let eta = FacetWeights::new(vec![0.5, 0.3, 0.2]).unwrap();
    for seed in 0..20 {
        let a = sample_episode(&bank, 5, 1, 5, seed).unwrap();
        let b = sample_episode(&scaled, 5, 1, 5, seed).unwrap();
        let pa = compute_prototypes(&a);
        let pb = compute_prototypes(&b);
        for (qa, qb) in a.query().iter().zip(b.query()) {
            assert_eq!(
                classify(qa.features, &pa, &partition, &eta, 3.0).unwrap(),
                classify(qb.features, &pb, &partition, &eta, 3.0).unwrap()
            );
        }
    }
}

#[test]
fn prototypes_are_support_means() {
    let bank = oracles::random_bank(6, 8, 4, 2.0, 9);
    let episode = sample_episode(&bank, 3, 4, 2, 1).unwrap();
    for proto in compute_prototypes(&episode) {
        for d in 0..4 {
            let members: Vec<f64> = episode
                .support()
                .iter()
                .filter(|s| s.class_index == proto.class_index)
                .map(|s| s.features[d])
                .collect();
            let mean = members.iter().sum::<f64>() / members.len() as f64;
            assert!(oracles::close(proto.vector[d], mean, 1e-12, 1e-12));
        }
    }
}

#[test]
fn weights_must_sum_to_one() {
    assert!(FacetWeights::new(vec![0.5, 0.4]).is_err());
    assert!(FacetWeights::new(vec![-0.5, 1.5]).is_err());
    assert!(FacetWeights::new(vec![0.25, 0.75]).is_ok());
}
