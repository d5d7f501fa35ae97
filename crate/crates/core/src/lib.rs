//! Facet-weighted prototype classification for few-shot learning.
//!
//! The crate is `no_std` (it needs `alloc`) and holds every numerical kernel of
//! the pipeline:
//!
//! * [`episodes`] samples N-way K-shot episodes from a [`FeatureBank`] with a
//!   pinned, portable PRNG ([`rng`]).
//! * [`importance`] scores how well each feature coordinate separates the
//!   classes of an episode and stacks those scores into an [`ImportanceMatrix`].
//! * [`facets`] groups coordinates into facets: Kendall tau-b between importance
//!   columns, then average-link agglomerative clustering.
//! * [`gate`] maps class-name embeddings to facet weights and trains that map
//!   episodically with analytic gradients.
//! * [`metric`] holds prototypes and the plain, facet-weighted and blended
//!   distances used to classify queries.
//! * [`eval`] runs episodic evaluation, paired comparisons and the planted-facet
//!   synthetic generator.
//!
//! IO, file formats and the command line live in the `facetproto` crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod episodes;
mod error;
pub mod eval;
pub mod facets;
pub mod gate;
pub mod importance;
pub mod metric;
pub mod rng;
pub mod types;

pub use error::{Error, Result};
pub use types::{
    ClassEmbeddings, Episode, FacetPartition, FeatureBank, ImportanceMatrix, Record, RunConfig,
    Shot,
};
