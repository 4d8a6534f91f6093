//! Sparse neighborhood covers by phased coarsening of `radius`-balls.
//!
//! A `(beta, radius)` cover is a family of clusters such that every point's
//! `radius`-ball (restricted to the dataset) lies inside the cluster it
//! references, with every cluster of diameter `O(beta * radius)` and total
//! membership `O(n^(1 + 1/beta) log n)`.
//!
//! Each phase walks the balls not yet absorbed. From the lowest-indexed one
//! it grows a group `Y` of balls: `Z` is every remaining ball meeting the
//! union of `Y`, and growth stops once `|Z| <= n^(1/beta) |Y|`. The union of
//! `Y` becomes a cluster, the balls of `Y` are absorbed into it, and all of
//! `Z` leaves the phase. Clusters emitted in one phase are disjoint, and each
//! phase absorbs at least a `n^(-1/beta)` fraction of the remaining balls.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LpError, Result};
use crate::geometry::{lp_dist, subset_diameter, Dataset, NormParam};

/// Ratio of the worst-case certified diameter to `beta * radius`,
/// i.e. `(4 ceil(beta) - 2) / beta`.
pub fn diameter_constant(beta: f64) -> f64 {
    (4.0 * beta.ceil() - 2.0) / beta
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    /// Sorted ascending.
    pub member_ids: Vec<usize>,
    pub center_id: usize,
    /// Every member is within this distance of the center.
    pub ball_radius: f64,
}

impl Cluster {
    pub fn contains(&self, id: usize) -> bool {
        self.member_ids.binary_search(&id).is_ok()
    }

    pub fn len(&self) -> usize {
        self.member_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.member_ids.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseCover {
    pub clusters: Vec<Cluster>,
    /// For each point, the index of a cluster containing its `radius`-ball.
    pub covering_ref: Vec<usize>,
    pub beta: f64,
    pub radius: f64,
    /// Certified upper bound on every cluster's diameter.
    pub diameter_bound: f64,
    pub sparsity: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoverReport {
    pub cover_ok: bool,
    pub max_diameter: f64,
    pub sparsity: usize,
}

pub fn build_sparse_cover(
    dataset: &Dataset,
    p: NormParam,
    radius: f64,
    beta: f64,
) -> Result<SparseCover> {
    let n = dataset.len();
    if n == 0 {
        return Err(LpError::usage("cannot build a cover of an empty dataset"));
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(LpError::usage(format!("cover radius must be positive, got {radius}")));
    }
    if !(beta > 1.0 && beta.is_finite()) {
        return Err(LpError::usage(format!("cover beta must exceed 1, got {beta}")));
    }
    let p = p.get();
    let growth = (n as f64).powf(1.0 / beta);

    // balls[x]: ids within `radius` of x, ascending.
    let balls: Vec<Vec<u32>> = (0..n)
        .into_par_iter()
        .map(|x| {
            let px = dataset.point(x);
            (0..n)
                .filter(|&u| lp_dist(px, dataset.point(u), p) <= radius)
                .map(|u| u as u32)
                .collect()
        })
        .collect();

    let mut covering_ref = vec![usize::MAX; n];
    let mut clusters: Vec<Cluster> = Vec::new();
    let mut max_steps = 0usize;
    let mut remaining: Vec<usize> = (0..n).collect();
    // Stamps avoid clearing per-group membership arrays.
    let mut in_phase = vec![0u32; n];
    let mut in_union = vec![0u32; n];
    let mut in_z = vec![0u32; n];
    let mut phase = 0u32;
    let mut group = 0u32;

    while !remaining.is_empty() {
        phase += 1;
        for &s in &remaining {
            in_phase[s] = phase;
        }
        for &s in &remaining {
            if in_phase[s] != phase {
                continue;
            }
            let mut y = vec![s];
            let mut union: Vec<usize> = Vec::new();
            let mut steps = 0usize;
            let z = loop {
                group += 1;
                union.clear();
                for &c in &y {
                    for &u in &balls[c] {
                        let u = u as usize;
                        if in_union[u] != group {
                            in_union[u] = group;
                            union.push(u);
                        }
                    }
                }
                let mut z = Vec::new();
                for &u in &union {
                    for &c in &balls[u] {
                        let c = c as usize;
                        if in_phase[c] == phase && in_z[c] != group {
                            in_z[c] = group;
                            z.push(c);
                        }
                    }
                }
                if z.len() as f64 <= growth * y.len() as f64 {
                    break z;
                }
                y = z;
                steps += 1;
            };
            max_steps = max_steps.max(steps);
            for &c in &z {
                in_phase[c] = 0;
            }
            let idx = clusters.len();
            for &c in &y {
                covering_ref[c] = idx;
            }
            union.sort_unstable();
            clusters.push(Cluster {
                member_ids: union,
                center_id: s,
                ball_radius: (2 * steps + 1) as f64 * radius,
            });
        }
        remaining.retain(|&s| covering_ref[s] == usize::MAX);
    }

    let sparsity = clusters.iter().map(Cluster::len).sum();
    Ok(SparseCover {
        clusters,
        covering_ref,
        beta,
        radius,
        diameter_bound: 2.0 * (2 * max_steps + 1) as f64 * radius,
        sparsity,
    })
}

impl SparseCover {
    /// Index of the cluster covering point `x`.
    pub fn lookup(&self, x: usize) -> Result<usize> {
        self.covering_ref
            .get(x)
            .copied()
            .ok_or_else(|| LpError::usage(format!("point id {x} is not in the covered dataset")))
    }

    pub fn cluster_of(&self, x: usize) -> Result<&Cluster> {
        Ok(&self.clusters[self.lookup(x)?])
    }

    pub fn len(&self) -> usize {
        self.covering_ref.len()
    }

    pub fn is_empty(&self) -> bool {
        self.covering_ref.is_empty()
    }

    /// `diameter_bound / radius`, the effective beta the certified diameter
    /// corresponds to.
    pub fn beta_eff(&self) -> f64 {
        self.diameter_bound / self.radius
    }
}

pub fn cover_lookup(cover: &SparseCover, x: usize) -> Result<usize> {
    cover.lookup(x)
}

/// Exhaustive check of the cover property plus per-cluster diameters.
pub fn verify_cover(cover: &SparseCover, dataset: &Dataset, p: NormParam) -> CoverReport {
    let n = dataset.len();
    let pv = p.get();
    let refs_ok = cover.covering_ref.len() == n
        && cover.covering_ref.iter().all(|&c| c < cover.clusters.len());
    let cover_ok = refs_ok
        && (0..n).into_par_iter().all(|x| {
            let cluster = &cover.clusters[cover.covering_ref[x]];
            let px = dataset.point(x);
            (0..n).all(|z| lp_dist(px, dataset.point(z), pv) > cover.radius || cluster.contains(z))
        });
    let max_diameter = cover
        .clusters
        .par_iter()
        .map(|c| {
            let pts: Vec<&[f64]> = c.member_ids.iter().map(|&i| dataset.point(i)).collect();
            subset_diameter(&pts, p).unwrap_or(f64::INFINITY)
        })
        .reduce(|| 0.0, f64::max);
    CoverReport {
        cover_ok,
        max_diameter,
        sparsity: cover.clusters.iter().map(Cluster::len).sum(),
    }
}
