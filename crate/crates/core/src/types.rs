//! Domain types shared by every stage of the pipeline.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{check_len, config, invalid, Error, Result};

fn ensure_finite(what: &str, values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        None => Ok(()),
        Some(i) => Err(invalid(format!("{what}: entry {i} is not finite"))),
    }
}

/// One labelled visual feature vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub class_id: String,
    pub image_id: String,
    pub features: Vec<f64>,
}

/// Immutable store of labelled feature vectors of a common dimension.
///
/// Construction validates every record, so a `FeatureBank` value always has
/// finite features of length [`dim`](Self::dim), unique `(class_id, image_id)`
/// pairs and at least two classes.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBank {
    dim: usize,
    records: Vec<Record>,
    // class_id -> record indices, in file order
    by_class: BTreeMap<String, Vec<usize>>,
}

impl FeatureBank {
    pub fn new(dim: usize, records: Vec<Record>) -> Result<Self> {
        if dim == 0 {
            return Err(config("feature dimension must be positive"));
        }
        let mut by_class: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        let mut seen = BTreeSet::new();
        for (idx, rec) in records.iter().enumerate() {
            check_len("feature record", dim, rec.features.len())?;
            ensure_finite("feature record", &rec.features)?;
            if !seen.insert((rec.class_id.as_str(), rec.image_id.as_str())) {
                return Err(invalid(format!(
                    "duplicate record ({}, {})",
                    rec.class_id, rec.image_id
                )));
            }
            by_class.entry(rec.class_id.clone()).or_default().push(idx);
        }
        if by_class.len() < 2 {
            return Err(invalid(format!(
                "a feature bank needs at least 2 classes, found {}",
                by_class.len()
            )));
        }
        Ok(Self {
            dim,
            records,
            by_class,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Distinct class ids in sorted order.
    pub fn class_ids(&self) -> impl Iterator<Item = &str> {
        self.by_class.keys().map(String::as_str)
    }

    pub fn num_classes(&self) -> usize {
        self.by_class.len()
    }

    /// Record indices of a class, in insertion order.
    pub fn class_records(&self, class_id: &str) -> Option<&[usize]> {
        self.by_class.get(class_id).map(Vec::as_slice)
    }
}

/// Class-name embeddings keyed by class id, all of width `dim`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ClassEmbeddings {
    dim: usize,
    vectors: BTreeMap<String, Vec<f64>>,
}

impl ClassEmbeddings {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            vectors: BTreeMap::new(),
        }
    }

    /// Adds one embedding; rejects duplicates, wrong widths and non-finite entries.
    pub fn insert(&mut self, class_id: impl Into<String>, vector: Vec<f64>) -> Result<()> {
        let class_id = class_id.into();
        check_len("class embedding", self.dim, vector.len())?;
        ensure_finite("class embedding", &vector)?;
        if self.vectors.contains_key(&class_id) {
            return Err(invalid(format!("duplicate class embedding `{class_id}`")));
        }
        self.vectors.insert(class_id, vector);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, class_id: &str) -> Option<&[f64]> {
        self.vectors.get(class_id).map(Vec::as_slice)
    }

    pub fn lookup(&self, class_id: &str) -> Result<&[f64]> {
        self.get(class_id)
            .ok_or_else(|| Error::MissingEmbedding(class_id.into()))
    }

    /// Entries sorted by class id.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.vectors.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }
}

/// One labelled example inside an episode, borrowing its features.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Shot<'a> {
    pub image_id: &'a str,
    pub features: &'a [f64],
    pub class_index: usize,
}

/// One N-way K-shot task: a class roster plus support and query shots.
#[derive(Debug, Clone, PartialEq)]
pub struct Episode<'a> {
    classes: Vec<&'a str>,
    k_shot: usize,
    q_query: usize,
    dim: usize,
    support: Vec<Shot<'a>>,
    query: Vec<Shot<'a>>,
}

impl<'a> Episode<'a> {
    /// Validates the roster and per-class counts: at least two classes, exactly
    /// `k_shot` support and `q_query` query shots per class, one feature width,
    /// and no image shared between support and query.
    pub fn new(
        classes: Vec<&'a str>,
        k_shot: usize,
        q_query: usize,
        support: Vec<Shot<'a>>,
        query: Vec<Shot<'a>>,
    ) -> Result<Self> {
        let n = classes.len();
        if n < 2 {
            return Err(config(format!(
                "an episode needs at least 2 classes, got {n}"
            )));
        }
        if k_shot == 0 {
            return Err(config("k_shot must be at least 1"));
        }
        let dim = support
            .first()
            .map(|s| s.features.len())
            .ok_or_else(|| invalid("episode has no support shots"))?;
        for (set, want, name) in [(&support, k_shot, "support"), (&query, q_query, "query")] {
            let mut counts = alloc::vec![0usize; n];
            for shot in set.iter() {
                if shot.class_index >= n {
                    return Err(invalid(format!(
                        "{name} shot class index {} out of range for {n} classes",
                        shot.class_index
                    )));
                }
                check_len("episode shot", dim, shot.features.len())?;
                counts[shot.class_index] += 1;
            }
            if let Some(c) = counts.iter().position(|&k| k != want) {
                return Err(invalid(format!(
                    "{name} set holds {} shots of class `{}`, expected {want}",
                    counts[c], classes[c]
                )));
            }
        }
        let support_ids: BTreeSet<(usize, &str)> = support
            .iter()
            .map(|s| (s.class_index, s.image_id))
            .collect();
        if let Some(q) = query
            .iter()
            .find(|q| support_ids.contains(&(q.class_index, q.image_id)))
        {
            return Err(invalid(format!(
                "image `{}` is in both support and query",
                q.image_id
            )));
        }
        Ok(Self {
            classes,
            k_shot,
            q_query,
            dim,
            support,
            query,
        })
    }

    pub fn classes(&self) -> &[&'a str] {
        &self.classes
    }

    pub fn n_way(&self) -> usize {
        self.classes.len()
    }

    pub fn k_shot(&self) -> usize {
        self.k_shot
    }

    pub fn q_query(&self) -> usize {
        self.q_query
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn support(&self) -> &[Shot<'a>] {
        &self.support
    }

    pub fn query(&self) -> &[Shot<'a>] {
        &self.query
    }

    /// Support followed by query: every labelled example of the episode.
    pub fn labelled(&self) -> impl Iterator<Item = &Shot<'a>> {
        self.support.iter().chain(self.query.iter())
    }
}

/// `rows x cols` matrix of per-episode coordinate importance, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ImportanceMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl ImportanceMatrix {
    /// Entries must be finite and non-negative.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(config(
                "importance matrix needs at least one row and column",
            ));
        }
        check_len("importance matrix", rows * cols, data.len())?;
        ensure_finite("importance matrix", &data)?;
        if let Some(i) = data.iter().position(|&v| v < 0.0) {
            return Err(invalid(format!(
                "importance entry ({}, {}) is negative",
                i / cols,
                i % cols
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let m = rows.len();
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(m * cols);
        for row in &rows {
            check_len("importance row", cols, row.len())?;
            data.extend_from_slice(row);
        }
        Self::new(m, cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, col)).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// Partition of the coordinate indices `0..dim` into non-empty facets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FacetPartition {
    dim: usize,
    facets: Vec<Vec<usize>>,
    facet_of: Vec<usize>,
}

impl FacetPartition {
    /// Checks the facets are non-empty, pairwise disjoint and cover `0..dim`.
    /// Facet order is kept as given; indices inside each facet are sorted.
    pub fn new(dim: usize, facets: Vec<Vec<usize>>) -> Result<Self> {
        if facets.is_empty() {
            return Err(invalid("a partition needs at least one facet"));
        }
        let mut facet_of = alloc::vec![usize::MAX; dim];
        let mut sorted = Vec::with_capacity(facets.len());
        for (f, mut facet) in facets.into_iter().enumerate() {
            if facet.is_empty() {
                return Err(invalid(format!("facet {f} is empty")));
            }
            facet.sort_unstable();
            for &i in &facet {
                if i >= dim {
                    return Err(invalid(format!(
                        "facet {f} holds index {i}, out of range for dimension {dim}"
                    )));
                }
                if facet_of[i] != usize::MAX {
                    return Err(invalid(format!("index {i} appears in more than one facet")));
                }
                facet_of[i] = f;
            }
            sorted.push(facet);
        }
        if let Some(i) = facet_of.iter().position(|&f| f == usize::MAX) {
            return Err(invalid(format!("index {i} is not covered by any facet")));
        }
        Ok(Self {
            dim,
            facets: sorted,
            facet_of,
        })
    }

    /// Builds a partition from a per-coordinate facet label in `0..num_facets`.
    pub fn from_labels(labels: &[usize], num_facets: usize) -> Result<Self> {
        let mut facets = alloc::vec![Vec::new(); num_facets];
        for (i, &f) in labels.iter().enumerate() {
            if f >= num_facets {
                return Err(invalid(format!("label {f} of index {i} >= {num_facets}")));
            }
            facets[f].push(i);
        }
        Self::new(labels.len(), facets)
    }

    /// One facet holding every coordinate.
    pub fn whole(dim: usize) -> Result<Self> {
        Self::new(dim, alloc::vec![(0..dim).collect()])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_facets(&self) -> usize {
        self.facets.len()
    }

    pub fn facets(&self) -> &[Vec<usize>] {
        &self.facets
    }

    pub fn facet(&self, f: usize) -> &[usize] {
        &self.facets[f]
    }

    /// Facet index owning each coordinate.
    pub fn facet_of(&self) -> &[usize] {
        &self.facet_of
    }

    /// The same partition with facets ordered by their smallest member.
    pub fn canonical(&self) -> Self {
        let mut facets = self.facets.clone();
        facets.sort_unstable_by_key(|f| f[0]);
        Self::new(self.dim, facets).expect("reordering keeps a valid partition")
    }

    /// Equality as set partitions, ignoring facet order.
    pub fn same_partition(&self, other: &Self) -> bool {
        self.dim == other.dim && self.canonical().facets == other.canonical().facets
    }
}

/// Hyper-parameters of one pipeline run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub n_way: usize,
    pub k_shot: usize,
    pub q_query: usize,
    pub episodes: usize,
    pub lambda: f64,
    pub f_facets: usize,
    pub seed: u64,
    pub m_importance: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            n_way: 5,
            k_shot: 1,
            q_query: 15,
            episodes: 600,
            lambda: 10.0,
            f_facets: 7,
            seed: 0,
            m_importance: 5000,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_way < 2 {
            return Err(config(format!("n_way must be >= 2, got {}", self.n_way)));
        }
        if self.k_shot < 1 {
            return Err(config("k_shot must be >= 1"));
        }
        if self.q_query < 1 {
            return Err(config("q_query must be >= 1"));
        }
        if !self.lambda.is_finite() || self.lambda < 0.0 {
            return Err(config(format!(
                "lambda must be finite and >= 0, got {}",
                self.lambda
            )));
        }
        if self.f_facets < 1 {
            return Err(config("f_facets must be >= 1"));
        }
        Ok(())
    }

    /// Also checks `f_facets <= dim`.
    pub fn validate_for_dim(&self, dim: usize) -> Result<()> {
        self.validate()?;
        if self.f_facets > dim {
            return Err(config(format!(
                "f_facets = {} exceeds feature dimension {dim}",
                self.f_facets
            )));
        }
        Ok(())
    }
}
