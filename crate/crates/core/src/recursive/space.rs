//! Stored-point accounting.
//!
//! Every substructure is charged the number of points it holds: a cover its
//! sparsity, a Mazur image set its cluster size, each grid or hashing copy its
//! full point count. Child nodes are charged recursively at their own norm
//! level.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::index::AnnIndex;
use super::scheme::{LpScheme, SchemeBody};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelSpace {
    /// `i` with `t = 2^i`.
    pub norm_level: u32,
    /// Ladder position; `0` holds the grid bases (or l2 tables at `i = 1`).
    pub ladder_level: usize,
    /// Number of nodes contributing to this entry.
    pub nodes: usize,
    pub cover_points: usize,
    pub image_points: usize,
    pub scheme_points: usize,
    /// Independent copies built (grid copies at `j = 0`, l2 copies at `i = 1`).
    pub copies: usize,
}

impl LevelSpace {
    pub fn total(&self) -> usize {
        self.cover_points + self.image_points + self.scheme_points
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpaceReport {
    /// Ordered by norm level descending, then ladder level.
    pub per_level: Vec<LevelSpace>,
    pub total_points: usize,
}

impl SpaceReport {
    pub fn entry(&self, norm_level: u32, ladder_level: usize) -> Option<&LevelSpace> {
        self.per_level
            .iter()
            .find(|e| e.norm_level == norm_level && e.ladder_level == ladder_level)
    }
}

fn accumulate(node: &LpScheme, acc: &mut BTreeMap<(std::cmp::Reverse<u32>, usize), LevelSpace>) {
    let i = node.level();
    let n = node.points.len();
    let key = |j: usize| (std::cmp::Reverse(i), j);
    match &node.body {
        SchemeBody::L2(copies) => {
            let e = acc.entry(key(0)).or_default();
            e.nodes += 1;
            e.scheme_points += n * copies.len();
            e.copies += copies.len();
        }
        SchemeBody::Ladder(ladder) => {
            let e = acc.entry(key(0)).or_default();
            e.nodes += 1;
            for copy in &ladder.bases {
                e.scheme_points += n * copy.len();
                e.copies += copy.len();
            }
            for level in &ladder.levels {
                let e = acc.entry(key(level.index)).or_default();
                e.nodes += 1;
                e.cover_points += level.cover.sparsity;
                for (entry, cluster) in level.clusters.iter().zip(&level.cover.clusters) {
                    if entry.map.is_some() {
                        e.image_points += cluster.len();
                    }
                }
                for entry in &level.clusters {
                    for child in &entry.children {
                        accumulate(child, acc);
                    }
                }
            }
        }
    }
}

pub fn scheme_space(node: &LpScheme) -> SpaceReport {
    let mut acc = BTreeMap::new();
    accumulate(node, &mut acc);
    let per_level: Vec<LevelSpace> = acc
        .into_iter()
        .map(|((std::cmp::Reverse(i), j), mut e)| {
            e.norm_level = i;
            e.ladder_level = j;
            e
        })
        .collect();
    let total_points = per_level.iter().map(LevelSpace::total).sum();
    SpaceReport {
        per_level,
        total_points,
    }
}

pub fn space_usage(index: &AnnIndex) -> SpaceReport {
    scheme_space(&index.root)
}
