//! Leaf schemes the recursion bottoms out on.

mod coarse;
mod l2;

pub use coarse::{build_coarse_ann, coarse_approx, grid_count, query_coarse_ann, CoarseScheme};
pub use l2::{build_l2_ann, collision_probability, query_l2_ann, L2Params, L2Scheme, L2_APPROX};

pub(crate) use coarse::ShiftedGrid;
pub(crate) use l2::HashTable;
