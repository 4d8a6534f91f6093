//! Approximate near neighbor search in high-dimensional `lp` spaces, `p > 2`.
//!
//! The index reduces `lp` to `l_{p/2}` with scaled Mazur maps, restricted to
//! the clusters of sparse neighborhood covers so the total space stays
//! polynomial, and recurses down to `l2`, where a hashing scheme answers.
//! See [`preprocess`] and [`AnnIndex::query`].

pub mod base;
pub mod campaign;
pub mod cover;
pub mod error;
pub mod geometry;
pub mod io;
pub mod oracle;
pub mod recursive;
pub mod seed;

pub use base::{build_coarse_ann, build_l2_ann, query_coarse_ann, query_l2_ann, CoarseScheme, L2Scheme};
pub use campaign::{run_campaign, BenchSpec, ReportFile};
pub use cover::{build_sparse_cover, cover_lookup, verify_cover, Cluster, CoverReport, SparseCover};
pub use error::{LpError, Result};
pub use geometry::{
    lp_dist, lp_distance, lp_norm, mazur_scale_factor, subset_diameter, Dataset, MazurMapSpec,
    NormParam,
};
pub use oracle::{
    exact_nn, fit_scaling, make_planted_batch, make_planted_instance, run_trials, sample_dataset,
    Distribution, NearNeighborIndex, TrialReport, TrialSpec,
};
pub use recursive::{
    approximation_bound, nns_search, preprocess, query, space_usage, AnnIndex, ApproximationBound,
    BoundConstants, NnsIndex, QueryAnswer, SchemeConfig, SpaceReport,
};
