//! Facet-importance gate: an affine map from a class-name embedding to facet
//! scores, softmax-normalised into facet weights and averaged over the classes
//! of an episode.
//!
//! Training minimises the episodic softmax cross-entropy whose logits are the
//! negative blended distances between queries and prototypes. Only the gate
//! parameters move; features are fixed. With `g_z` the logit gradient and
//! `B[q][c][f]` the facet block distances, the chain rule gives
//!
//! ```text
//! dL/deta_f   = -lambda * sum_{q,c} g_z[q][c] * B[q][c][f]
//! dL/db_c[k]  = s_c[k] * (dL/deta_k - sum_f dL/deta_f * s_c[f]) / N
//! dL/dW[k][l] = sum_c dL/db_c[k] * n_c[l],   dL/dbias[k] = sum_c dL/db_c[k]
//! ```
//!
//! where `s_c = softmax(b_c)` and `b_c = W n_c + bias`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::episodes::episode_at;
use crate::error::{check_len, config, invalid, Result};
use crate::metric::{block_sq_distances, compute_prototypes, sq_euclidean, FacetWeights};
use crate::rng::Xorshift64Star;
use crate::types::{ClassEmbeddings, Episode, FacetPartition, FeatureBank, RunConfig};

/// XORed into the run seed to seed parameter initialisation.
pub const INIT_SEED_TAG: u64 = 0x6761_7465_696E_6974;

/// Affine gate parameters: `weights` is `num_facets x dim`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GateParams {
    num_facets: usize,
    dim: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl GateParams {
    pub fn new(num_facets: usize, dim: usize, weights: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        if num_facets == 0 || dim == 0 {
            return Err(config("gate shape must be positive"));
        }
        check_len("gate weights", num_facets * dim, weights.len())?;
        check_len("gate bias", num_facets, bias.len())?;
        if weights.iter().chain(&bias).any(|v| !v.is_finite()) {
            return Err(invalid("gate parameters must be finite"));
        }
        Ok(Self {
            num_facets,
            dim,
            weights,
            bias,
        })
    }

    pub fn zeros(num_facets: usize, dim: usize) -> Self {
        Self {
            num_facets,
            dim,
            weights: vec![0.0; num_facets * dim],
            bias: vec![0.0; num_facets],
        }
    }

    /// Every parameter drawn from `uniform(-scale, scale)`, weights first in
    /// row-major order, then bias.
    pub fn random(num_facets: usize, dim: usize, scale: f64, rng: &mut Xorshift64Star) -> Self {
        let weights = (0..num_facets * dim)
            .map(|_| rng.uniform(-scale, scale))
            .collect();
        let bias = (0..num_facets)
            .map(|_| rng.uniform(-scale, scale))
            .collect();
        Self {
            num_facets,
            dim,
            weights,
            bias,
        }
    }

    pub fn num_facets(&self) -> usize {
        self.num_facets
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight_row(&self, facet: usize) -> &[f64] {
        &self.weights[facet * self.dim..(facet + 1) * self.dim]
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    /// Number of scalar parameters.
    pub fn len(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Parameter `i` in the flat order weights-then-bias.
    pub fn param(&self, i: usize) -> f64 {
        if i < self.weights.len() {
            self.weights[i]
        } else {
            self.bias[i - self.weights.len()]
        }
    }

    pub fn param_mut(&mut self, i: usize) -> &mut f64 {
        let nw = self.weights.len();
        if i < nw {
            &mut self.weights[i]
        } else {
            &mut self.bias[i - nw]
        }
    }

    fn step(&mut self, grad: &GateGradient, learning_rate: f64) {
        for (w, g) in self.weights.iter_mut().zip(&grad.weights) {
            *w -= learning_rate * g;
        }
        for (b, g) in self.bias.iter_mut().zip(&grad.bias) {
            *b -= learning_rate * g;
        }
    }
}

/// Gradient of the episodic loss, shaped like [`GateParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct GateGradient {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl GateGradient {
    fn zeros(params: &GateParams) -> Self {
        Self {
            weights: vec![0.0; params.weights.len()],
            bias: vec![0.0; params.bias.len()],
        }
    }

    /// Entry `i` in the flat order weights-then-bias.
    pub fn get(&self, i: usize) -> f64 {
        if i < self.weights.len() {
            self.weights[i]
        } else {
            self.bias[i - self.weights.len()]
        }
    }

    fn add_scaled(&mut self, other: &Self, scale: f64) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            *a += scale * b;
        }
        for (a, b) in self.bias.iter_mut().zip(&other.bias) {
            *a += scale * b;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GateConfig {
    pub learning_rate: f64,
    pub train_episodes: usize,
    pub init_scale: f64,
}

impl Default for GateConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            train_episodes: 10_000,
            init_scale: 0.01,
        }
    }
}

impl GateConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(config(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(self.init_scale >= 0.0 && self.init_scale.is_finite()) {
            return Err(config(format!(
                "init scale must be non-negative, got {}",
                self.init_scale
            )));
        }
        Ok(())
    }
}

/// Pre-softmax facet scores `W n + bias`.
pub fn gate_forward(params: &GateParams, embedding: &[f64]) -> Result<Vec<f64>> {
    check_len("class embedding", params.dim, embedding.len())?;
    Ok((0..params.num_facets)
        .map(|k| {
            let row = params.weight_row(k);
            row.iter().zip(embedding).map(|(w, x)| w * x).sum::<f64>() + params.bias[k]
        })
        .collect())
}

/// Max-shifted softmax.
pub fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| libm::exp(s - max)).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Facet weights of a single class.
pub fn class_weights(params: &GateParams, embedding: &[f64]) -> Result<FacetWeights> {
    Ok(FacetWeights::from_raw(softmax(&gate_forward(
        params, embedding,
    )?)))
}

/// Facet weights of each class, in roster order.
pub fn per_class_weights(
    params: &GateParams,
    embeddings: &ClassEmbeddings,
    classes: &[&str],
) -> Result<Vec<FacetWeights>> {
    classes
        .iter()
        .map(|c| class_weights(params, embeddings.lookup(c)?))
        .collect()
}

/// Componentwise mean of the class weights of an episode roster.
pub fn episode_weights(
    params: &GateParams,
    embeddings: &ClassEmbeddings,
    classes: &[&str],
) -> Result<FacetWeights> {
    if classes.is_empty() {
        return Err(config("episode roster is empty"));
    }
    let per_class = per_class_weights(params, embeddings, classes)?;
    Ok(FacetWeights::from_raw(mean_weights(&per_class)))
}

pub(crate) fn mean_weights(per_class: &[FacetWeights]) -> Vec<f64> {
    let mut mean = vec![0.0; per_class[0].len()];
    for w in per_class {
        for (m, v) in mean.iter_mut().zip(w.as_slice()) {
            *m += v;
        }
    }
    let n = per_class.len() as f64;
    mean.iter_mut().for_each(|m| *m /= n);
    mean
}

fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + libm::log(values.iter().map(|v| libm::exp(v - max)).sum::<f64>())
}

/// Mean query cross-entropy of one episode under logits `-blended_dist`.
pub fn episode_loss(
    params: &GateParams,
    episode: &Episode<'_>,
    embeddings: &ClassEmbeddings,
    partition: &FacetPartition,
    lambda: f64,
) -> Result<f64> {
    episode_loss_impl(params, episode, embeddings, partition, lambda, false).map(|(l, _)| l)
}

/// [`episode_loss`] and its analytic gradient with respect to the gate.
pub fn episode_loss_and_gradient(
    params: &GateParams,
    episode: &Episode<'_>,
    embeddings: &ClassEmbeddings,
    partition: &FacetPartition,
    lambda: f64,
) -> Result<(f64, GateGradient)> {
    episode_loss_impl(params, episode, embeddings, partition, lambda, true)
        .map(|(l, g)| (l, g.expect("gradient requested")))
}

fn episode_loss_impl(
    params: &GateParams,
    episode: &Episode<'_>,
    embeddings: &ClassEmbeddings,
    partition: &FacetPartition,
    lambda: f64,
    want_grad: bool,
) -> Result<(f64, Option<GateGradient>)> {
    if lambda.is_nan() || lambda < 0.0 {
        return Err(config(format!("lambda must be >= 0, got {lambda}")));
    }
    check_len("gate facets", partition.num_facets(), params.num_facets)?;
    let n = episode.n_way();
    let nf = params.num_facets;
    let class_embeddings: Vec<&[f64]> = episode
        .classes()
        .iter()
        .map(|c| embeddings.lookup(c))
        .collect::<Result<_>>()?;
    let soft: Vec<Vec<f64>> = class_embeddings
        .iter()
        .map(|e| gate_forward(params, e).map(|b| softmax(&b)))
        .collect::<Result<_>>()?;
    let mut eta = vec![0.0; nf];
    for s in &soft {
        for (e, v) in eta.iter_mut().zip(s) {
            *e += v;
        }
    }
    eta.iter_mut().for_each(|e| *e /= n as f64);

    let prototypes = compute_prototypes(episode);
    let queries = episode.query();
    let inv_q = 1.0 / queries.len() as f64;
    let mut loss = 0.0;
    let mut d_eta = vec![0.0; nf];
    let mut logits = vec![0.0; n];
    let mut blocks = vec![Vec::new(); n];
    for q in queries {
        for (c, p) in prototypes.iter().enumerate() {
            let plain = sq_euclidean(q.features, &p.vector)?;
            blocks[c] = block_sq_distances(q.features, &p.vector, partition)?;
            let facet: f64 = blocks[c].iter().zip(&eta).map(|(d, w)| w * d).sum();
            logits[c] = -(plain + lambda * facet);
        }
        let lse = log_sum_exp(&logits);
        loss += (lse - logits[q.class_index]) * inv_q;
        if want_grad {
            for c in 0..n {
                let p = libm::exp(logits[c] - lse);
                let g = (p - if c == q.class_index { 1.0 } else { 0.0 }) * inv_q;
                for (de, b) in d_eta.iter_mut().zip(&blocks[c]) {
                    *de -= g * lambda * b;
                }
            }
        }
    }
    if !want_grad {
        return Ok((loss, None));
    }

    let mut grad = GateGradient::zeros(params);
    for (s, emb) in soft.iter().zip(&class_embeddings) {
        let dot: f64 = d_eta.iter().zip(s).map(|(g, v)| g * v).sum();
        for k in 0..nf {
            let db = s[k] * (d_eta[k] - dot) / n as f64;
            grad.bias[k] += db;
            let row = &mut grad.weights[k * params.dim..(k + 1) * params.dim];
            for (w, x) in row.iter_mut().zip(emb.iter()) {
                *w += db * x;
            }
        }
    }
    Ok((loss, Some(grad)))
}

/// Output of gate training.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedGate {
    pub params: GateParams,
    /// Loss of each training episode, measured before its update.
    pub losses: Vec<f64>,
}

/// Initial parameters for a run: `uniform(-init_scale, init_scale)` drawn from
/// a generator seeded with `seed ^ INIT_SEED_TAG`.
pub fn initial_params(num_facets: usize, dim: usize, seed: u64, init_scale: f64) -> GateParams {
    let mut rng = Xorshift64Star::new(seed ^ INIT_SEED_TAG);
    GateParams::random(num_facets, dim, init_scale, &mut rng)
}

/// Episodic SGD on the gate over `gate_config.train_episodes` episodes of the
/// stream `(bank, config.seed)`, one update per episode.
pub fn train_gate(
    bank: &FeatureBank,
    embeddings: &ClassEmbeddings,
    partition: &FacetPartition,
    config: &RunConfig,
    gate_config: &GateConfig,
) -> Result<TrainedGate> {
    config.validate()?;
    gate_config.validate()?;
    check_len("facet partition", bank.dim(), partition.dim())?;
    let mut params = initial_params(
        partition.num_facets(),
        embeddings.dim(),
        config.seed,
        gate_config.init_scale,
    );
    let mut losses = Vec::with_capacity(gate_config.train_episodes);
    for j in 0..gate_config.train_episodes {
        let episode = episode_at(bank, config, j)?;
        let (loss, grad) =
            episode_loss_and_gradient(&params, &episode, embeddings, partition, config.lambda)?;
        params.step(&grad, gate_config.learning_rate);
        losses.push(loss);
    }
    Ok(TrainedGate { params, losses })
}

/// Full-batch gradient descent over a fixed episode set for `epochs` epochs.
/// Returns the mean loss before each epoch's update, plus the final mean loss.
pub fn replay_epochs(
    params: &mut GateParams,
    episodes: &[Episode<'_>],
    embeddings: &ClassEmbeddings,
    partition: &FacetPartition,
    lambda: f64,
    learning_rate: f64,
    epochs: usize,
) -> Result<Vec<f64>> {
    if episodes.is_empty() {
        return Err(config("replay needs at least one episode"));
    }
    let scale = 1.0 / episodes.len() as f64;
    let mut history = Vec::with_capacity(epochs + 1);
    for _ in 0..epochs {
        let mut total = GateGradient::zeros(params);
        let mut loss = 0.0;
        for ep in episodes {
            let (l, g) = episode_loss_and_gradient(params, ep, embeddings, partition, lambda)?;
            loss += l * scale;
            total.add_scaled(&g, scale);
        }
        history.push(loss);
        params.step(&total, learning_rate);
    }
    let mut final_loss = 0.0;
    for ep in episodes {
        final_loss += episode_loss(params, ep, embeddings, partition, lambda)? * scale;
    }
    history.push(final_loss);
    Ok(history)
}
