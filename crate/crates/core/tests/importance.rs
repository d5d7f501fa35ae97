mod oracles;

use facetproto_core::episodes::sample_episode;
use facetproto_core::importance::{
    build_importance_matrix, coordinate_importance_episode, importance_row, importance_row_at, CAP,
};
use facetproto_core::metric::compute_prototypes;
use facetproto_core::{FeatureBank, Record, RunConfig};

fn transform(bank: &FeatureBank, f: impl Fn(&[f64]) -> Vec<f64>) -> FeatureBank {
    let records: Vec<Record> = bank
        .records()
        .iter()
        .map(|r| Record {
            class_id: r.class_id.clone(),
            image_id: r.image_id.clone(),
            features: f(&r.features),
        })
        .collect();
    let dim = records[0].features.len();
    FeatureBank::new(dim, records).unwrap()
}

#[test]
fn row_matches_per_coordinate_definition() {
    let bank = oracles::random_bank(7, 12, 9, 1.5, 2);
    for seed in 0..10 {
        let episode = sample_episode(&bank, 5, 2, 4, seed).unwrap();
        let prototypes = compute_prototypes(&episode);
        let row = importance_row(&episode);
        for (j, &value) in row.iter().enumerate() {
            assert_eq!(
                value.to_bits(),
                coordinate_importance_episode(&episode, &prototypes, j).to_bits()
            );
            assert!((0.0..=CAP).contains(&value));
        }
    }
}

#[test]
fn coordinate_permutation_permutes_columns() {
    let bank = oracles::random_bank(6, 10, 7, 1.0, 4);
    let perm = [3usize, 0, 6, 1, 5, 2, 4];
    let permuted = transform(&bank, |x| perm.iter().map(|&p| x[p]).collect());
    for seed in 0..10 {
        let a = importance_row(&sample_episode(&bank, 4, 2, 3, seed).unwrap());
        let b = importance_row(&sample_episode(&permuted, 4, 2, 3, seed).unwrap());
        for (j, &p) in perm.iter().enumerate() {
            assert_eq!(b[j].to_bits(), a[p].to_bits());
        }
    }
}

#[test]
fn column_scaling_leaves_importance_unchanged() {
    let bank = oracles::random_bank(6, 10, 5, 1.0, 8);
    let scaled = transform(&bank, |x| {
        let mut y = x.to_vec();
        y[2] *= 7.5;
        y
    });
    for seed in 0..10 {
        let a = importance_row(&sample_episode(&bank, 4, 3, 3, seed).unwrap());
        let b = importance_row(&sample_episode(&scaled, 4, 3, 3, seed).unwrap());
        for j in 0..5 {
            assert!(
                oracles::close(a[j], b[j], 1e-6, 1e-9),
                "coord {j}: {} vs {}",
                a[j],
                b[j]
            );
        }
    }
}

#[test]
fn duplicated_coordinate_has_identical_column() {
    let bank = oracles::random_bank(6, 10, 5, 1.0, 12);
    let widened = transform(&bank, |x| {
        let mut y = x.to_vec();
        y.push(x[1]);
        y
    });
    let config = RunConfig {
        n_way: 4,
        k_shot: 2,
        q_query: 3,
        m_importance: 30,
        ..RunConfig::default()
    };
    let matrix = build_importance_matrix(&widened, &config).unwrap();
    assert_eq!(matrix.column(1), matrix.column(5));
}

#[test]
fn matrix_rows_follow_the_episode_stream() {
    let bank = oracles::random_bank(6, 10, 4, 1.0, 3);
    let config = RunConfig {
        n_way: 3,
        k_shot: 1,
        q_query: 4,
        m_importance: 12,
        seed: 77,
        ..RunConfig::default()
    };
    let matrix = build_importance_matrix(&bank, &config).unwrap();
    assert_eq!((matrix.rows(), matrix.cols()), (12, 4));
    for j in 0..12 {
        assert_eq!(
            matrix.row(j),
            importance_row_at(&bank, &config, j).unwrap().as_slice()
        );
    }
    assert_eq!(matrix, build_importance_matrix(&bank, &config).unwrap());
}
