//! File formats, thread-parallel drivers and the `facetproto` command line for
//! facet-weighted prototype classification.
//!
//! The numerical kernels live in [`facetproto_core`], re-exported here as
//! [`core`].

pub use facetproto_core as core;

pub mod cli;
pub mod formats;
pub mod parallel;
