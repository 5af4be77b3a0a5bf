//! Multi-aspect search result diversification.
//!
//! Given a relevance-ranked candidate pool, this crate selects a size-k
//! subset that balances relevance against an evenness-aware diversity
//! objective built from pairwise same-value statistics across item aspects.
//! The objective is a positive semidefinite quadratic program with a
//! cardinality constraint, solved by Frank-Wolfe over the box-polytope
//! relaxation followed by randomized rounding. Three determinantal point
//! process selectors (exact greedy MAP, incremental greedy MAP, exact k-DPP
//! sampling) serve as comparison baselines, with the usual IR diversity
//! metrics for evaluation. Brute-force reference solvers back the whole
//! pipeline on small instances.

pub mod baselines;
pub mod catalog;
pub mod diversity;
pub mod error;
pub mod metrics;
pub mod oracle;
pub mod relevance;
pub mod solver;
pub mod synth;

pub use catalog::{load_catalog, Catalog, IngestConfig, IngestStats, Item, QuerySet};
pub use diversity::{build_qp, compute_weights, AspectWeighting, QuadraticProgram};
pub use error::{Error, Result};
pub use relevance::{build_pool, Bm25Index, Bm25Params, CandidatePool};
pub use solver::{diversify, Selection, SolverConfig};
