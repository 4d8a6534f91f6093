//! The double recursion: refinement ladders within a norm level, norm levels
//! `p -> p/2 -> ... -> 2`.

mod bound;
mod config;
mod index;
mod nns;
mod scheme;
mod space;

pub use bound::{
    approximation_bound, c_new, ladder_length, ApproximationBound, BoundConstants, LevelBound,
};
pub use config::{normalize_norm, Amplification, NormalizedNorm, SchemeConfig};
pub use index::{preprocess, query, AnnIndex, LevelSummary, QueryAnswer};
pub use nns::{nns_search, NnsIndex};
pub use scheme::{CopyTrace, Ladder, LadderLevel, LadderStep, LpScheme, QueryTrace};
pub use space::{scheme_space, space_usage, LevelSpace, SpaceReport};

pub(crate) use index::exact_table;
pub(crate) use scheme::{ClusterEntry, SchemeBody};

#[cfg(test)]
mod tests;
