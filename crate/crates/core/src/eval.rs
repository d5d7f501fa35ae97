//! Episodic evaluation, paired comparison of runs, and the planted-facet
//! synthetic generator.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::episodes::episode_at;
use crate::error::{config, Error, Result};
use crate::gate::{episode_weights, per_class_weights, GateParams};
use crate::metric::{
    classify, classify_per_class, compute_prototypes, nearest_prototype, Prototype,
};
use crate::rng::Xorshift64Star;
use crate::types::{ClassEmbeddings, Episode, FacetPartition, FeatureBank, Record, RunConfig};

/// Normal-approximation 95% quantile.
pub const Z95: f64 = 1.96;

/// Predicts one class index per query of an episode.
pub trait EpisodeClassifier {
    fn predict(&self, episode: &Episode<'_>, prototypes: &[Prototype]) -> Result<Vec<usize>>;
}

/// Plain nearest-prototype classification under squared Euclidean distance.
#[derive(Debug, Clone, Copy, Default)]
pub struct ProtoNet;

impl EpisodeClassifier for ProtoNet {
    fn predict(&self, episode: &Episode<'_>, prototypes: &[Prototype]) -> Result<Vec<usize>> {
        episode
            .query()
            .iter()
            .map(|q| nearest_prototype(q.features, prototypes))
            .collect()
    }
}

/// How gate outputs become the facet weights used for scoring.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Weighting {
    /// One weight vector per episode: the mean over the roster's classes.
    #[default]
    EpisodeAverage,
    /// Each prototype is scored with its own class's weights.
    PerClass,
}

/// Blended-distance classifier driven by a trained gate.
#[derive(Debug, Clone, Copy)]
pub struct FacetClassifier<'a> {
    pub gate: &'a GateParams,
    pub embeddings: &'a ClassEmbeddings,
    pub partition: &'a FacetPartition,
    pub lambda: f64,
    pub weighting: Weighting,
}

impl EpisodeClassifier for FacetClassifier<'_> {
    fn predict(&self, episode: &Episode<'_>, prototypes: &[Prototype]) -> Result<Vec<usize>> {
        let queries = episode.query().iter();
        match self.weighting {
            Weighting::EpisodeAverage => {
                let eta = episode_weights(self.gate, self.embeddings, episode.classes())?;
                queries
                    .map(|q| classify(q.features, prototypes, self.partition, &eta, self.lambda))
                    .collect()
            }
            Weighting::PerClass => {
                let etas = per_class_weights(self.gate, self.embeddings, episode.classes())?;
                queries
                    .map(|q| {
                        classify_per_class(
                            q.features,
                            prototypes,
                            self.partition,
                            &etas,
                            self.lambda,
                        )
                    })
                    .collect()
            }
        }
    }
}

/// Query accuracy of episode `index` of the stream `(bank, config)`.
pub fn episode_accuracy<C: EpisodeClassifier + ?Sized>(
    bank: &FeatureBank,
    config: &RunConfig,
    classifier: &C,
    index: usize,
) -> Result<f64> {
    let episode = episode_at(bank, config, index)?;
    let prototypes = compute_prototypes(&episode);
    let predictions = classifier.predict(&episode, &prototypes)?;
    let correct = predictions
        .iter()
        .zip(episode.query())
        .filter(|(p, q)| **p == q.class_index)
        .count();
    Ok(correct as f64 / episode.query().len() as f64)
}

/// Mean accuracy over episodes with a normal-approximation 95% interval.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub seed: u64,
    pub episodes: usize,
    pub mean_accuracy: f64,
    /// Half-width `1.96 * s / sqrt(E)` with `s` the sample standard deviation.
    pub ci95: f64,
    pub per_episode_accuracies: Vec<f64>,
}

/// Mean and `1.96 * s / sqrt(n)` of a sample; the interval is 0 when `n < 2`.
pub fn mean_ci95(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, Z95 * libm::sqrt(var) / libm::sqrt(n as f64))
}

impl EvalReport {
    pub fn from_accuracies(seed: u64, per_episode_accuracies: Vec<f64>) -> Self {
        let (mean_accuracy, ci95) = mean_ci95(&per_episode_accuracies);
        Self {
            seed,
            episodes: per_episode_accuracies.len(),
            mean_accuracy,
            ci95,
            per_episode_accuracies,
        }
    }
}

/// Evaluates `classifier` on `config.episodes` episodes, serially.
pub fn evaluate_with<C: EpisodeClassifier + ?Sized>(
    bank: &FeatureBank,
    config: &RunConfig,
    classifier: &C,
) -> Result<EvalReport> {
    config.validate()?;
    let accuracies = (0..config.episodes)
        .map(|j| episode_accuracy(bank, config, classifier, j))
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalReport::from_accuracies(config.seed, accuracies))
}

/// Evaluates the gate-weighted blended-distance classifier with `config.lambda`.
pub fn evaluate(
    bank: &FeatureBank,
    embeddings: &ClassEmbeddings,
    partition: &FacetPartition,
    gate: &GateParams,
    config: &RunConfig,
) -> Result<EvalReport> {
    let classifier = FacetClassifier {
        gate,
        embeddings,
        partition,
        lambda: config.lambda,
        weighting: Weighting::EpisodeAverage,
    };
    evaluate_with(bank, config, &classifier)
}

/// Paired difference `a - b` of per-episode accuracies.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedComparison {
    pub episodes: usize,
    pub mean_difference: f64,
    pub ci95: f64,
}

impl PairedComparison {
    /// True when the whole interval lies above zero.
    pub fn significantly_positive(&self) -> bool {
        self.mean_difference - self.ci95 > 0.0
    }
}

/// Compares two reports evaluated on the same episodes.
pub fn compare_runs(a: &EvalReport, b: &EvalReport) -> Result<PairedComparison> {
    if a.episodes != b.episodes || a.per_episode_accuracies.len() != b.per_episode_accuracies.len()
    {
        return Err(Error::Pairing(format!(
            "episode counts differ ({} vs {})",
            a.episodes, b.episodes
        )));
    }
    if a.seed != b.seed {
        return Err(Error::Pairing(format!(
            "seeds differ ({} vs {})",
            a.seed, b.seed
        )));
    }
    let diffs: Vec<f64> = a
        .per_episode_accuracies
        .iter()
        .zip(&b.per_episode_accuracies)
        .map(|(x, y)| x - y)
        .collect();
    let (mean_difference, ci95) = mean_ci95(&diffs);
    Ok(PairedComparison {
        episodes: diffs.len(),
        mean_difference,
        ci95,
    })
}

/// Parameters of a planted-facet synthetic bank.
///
/// Class `c` has mean `0` everywhere except on the coordinates of facet
/// `class_facets[c]`, where each coordinate is `+separation` or `-separation`
/// (sign drawn per coordinate). Features are the mean plus
/// `noise_sigma * N(0, 1)` noise. The class embedding is the one-hot indicator
/// of the class's facet plus `embedding_noise * N(0, 1)` noise.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub class_prefix: String,
    pub per_class: usize,
    pub planted: FacetPartition,
    pub class_facets: Vec<usize>,
    pub separation: f64,
    pub noise_sigma: f64,
    pub embedding_noise: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub bank: FeatureBank,
    pub embeddings: ClassEmbeddings,
}

/// Facet `c mod num_facets` for each of `n_classes` classes.
pub fn round_robin_facets(n_classes: usize, num_facets: usize) -> Vec<usize> {
    (0..n_classes).map(|c| c % num_facets).collect()
}

/// Balanced random partition of `0..dim`: a seeded shuffle of the indices is
/// dealt to the facets in turn.
pub fn planted_partition(dim: usize, num_facets: usize, seed: u64) -> Result<FacetPartition> {
    if num_facets == 0 || num_facets > dim {
        return Err(config(format!(
            "cannot plant {num_facets} facets over {dim} coordinates"
        )));
    }
    let mut order: Vec<usize> = (0..dim).collect();
    Xorshift64Star::new(seed).shuffle(&mut order);
    let mut labels = vec![0; dim];
    for (pos, &i) in order.iter().enumerate() {
        labels[i] = pos % num_facets;
    }
    FacetPartition::from_labels(&labels, num_facets)
}

/// Draw order: for each class, its facet signs (ascending coordinate), then
/// its embedding noise, then `per_class` feature vectors.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticData> {
    let num_facets = spec.planted.num_facets();
    let dim = spec.planted.dim();
    if let Some(&f) = spec.class_facets.iter().find(|&&f| f >= num_facets) {
        return Err(config(format!(
            "class facet {f} out of range for {num_facets} facets"
        )));
    }
    if spec.per_class == 0 {
        return Err(config("per_class must be positive"));
    }
    if !(spec.noise_sigma >= 0.0 && spec.embedding_noise >= 0.0 && spec.separation.is_finite()) {
        return Err(config(
            "noise levels must be non-negative and separation finite",
        ));
    }
    let mut rng = Xorshift64Star::new(spec.seed);
    let mut records = Vec::with_capacity(spec.class_facets.len() * spec.per_class);
    let mut embeddings = ClassEmbeddings::new(num_facets);
    for (c, &facet) in spec.class_facets.iter().enumerate() {
        let class_id = format!("{}{c:03}", spec.class_prefix);
        let mut mean = vec![0.0; dim];
        for &j in spec.planted.facet(facet) {
            mean[j] = if rng.next_u64() >> 63 == 1 {
                spec.separation
            } else {
                -spec.separation
            };
        }
        let embedding: Vec<f64> = (0..num_facets)
            .map(|k| f64::from(u8::from(k == facet)) + spec.embedding_noise * rng.gaussian())
            .collect();
        embeddings.insert(class_id.clone(), embedding)?;
        for i in 0..spec.per_class {
            let features = mean
                .iter()
                .map(|m| m + spec.noise_sigma * rng.gaussian())
                .collect();
            records.push(Record {
                class_id: class_id.clone(),
                image_id: format!("{class_id}_{i:04}"),
                features,
            });
        }
    }
    Ok(SyntheticData {
        bank: FeatureBank::new(dim, records)?,
        embeddings,
    })
}
