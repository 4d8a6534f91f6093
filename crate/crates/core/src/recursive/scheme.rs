//! Recursive index nodes.
//!
//! A node for `lt`, `t > 2`, holds a grid base and a ladder of `k` refinement
//! levels. Level `j` covers the node's points with a sparse cover at radius
//! `2 c_{j-1} r`; every non-singleton cluster is Mazur-mapped around its center
//! into `l_{t/2}` and indexed by a child node at radius `r`. A query takes the
//! base answer, then repeatedly jumps to the cluster covering its current
//! answer and asks that cluster's child. The `l2` node at the bottom is a set
//! of hashing schemes.

use std::sync::Arc;

use rayon::prelude::*;

use super::bound::{c_new, ladder_length};
use super::config::SchemeConfig;
use crate::base::{build_coarse_ann, build_l2_ann, coarse_approx, CoarseScheme, L2Scheme, L2_APPROX};
use crate::cover::{build_sparse_cover, SparseCover};
use crate::error::{LpError, Result};
use crate::geometry::{lp_dist, Dataset, MazurMapSpec, NormParam};
use crate::seed::{self, tag};

#[derive(Debug, Clone)]
pub struct LpScheme {
    /// Norm exponent of this node, a power of two.
    pub(crate) t: f64,
    pub(crate) radius: f64,
    pub(crate) points: Arc<Dataset>,
    /// Approximation this node guarantees given its actual covers.
    pub(crate) approx: f64,
    pub(crate) body: SchemeBody,
}

#[derive(Debug, Clone)]
pub(crate) enum SchemeBody {
    L2(Vec<L2Scheme>),
    Ladder(Ladder),
}

#[derive(Debug, Clone)]
pub struct Ladder {
    pub(crate) c0: f64,
    /// `[norm copy][base copy]`.
    pub(crate) bases: Vec<Vec<CoarseScheme>>,
    pub(crate) levels: Vec<LadderLevel>,
}

#[derive(Debug, Clone)]
pub struct LadderLevel {
    /// 1-based position in the ladder.
    pub(crate) index: usize,
    pub(crate) base_approx: f64,
    pub(crate) new_approx: f64,
    /// `cover.diameter_bound / (2 base_approx r)`.
    pub(crate) beta_eff: f64,
    pub(crate) child_approx: f64,
    pub(crate) cover: SparseCover,
    pub(crate) clusters: Vec<ClusterEntry>,
}

/// Per-cluster Mazur map and child schemes, one child per norm copy.
/// Singleton clusters carry neither.
#[derive(Debug, Clone)]
pub(crate) struct ClusterEntry {
    pub(crate) map: Option<MazurMapSpec>,
    pub(crate) children: Vec<LpScheme>,
}

pub(crate) struct BuildCtx {
    pub beta: f64,
    pub norm_copies: usize,
    pub base_copies: usize,
    pub l2_delta_fail: f64,
}

impl BuildCtx {
    pub(crate) fn new(config: &SchemeConfig, p_eff: f64) -> Self {
        BuildCtx {
            beta: config.beta_for(p_eff),
            norm_copies: config.norm_copies_for(p_eff),
            base_copies: config.amplification.base_copies,
            l2_delta_fail: config.amplification.l2_delta_fail,
        }
    }
}

pub(crate) fn build_node(points: Arc<Dataset>, t: f64, radius: f64, ctx: &BuildCtx, seed: u64) -> Result<LpScheme> {
    if t <= 2.0 {
        let copies = (0..ctx.norm_copies)
            .into_par_iter()
            .map(|c| {
                build_l2_ann(
                    points.clone(),
                    radius,
                    ctx.l2_delta_fail,
                    seed::derive(seed, tag::L2, c as u64),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        return Ok(LpScheme {
            t: 2.0,
            radius,
            points,
            approx: L2_APPROX,
            body: SchemeBody::L2(copies),
        });
    }

    let norm = NormParam::new(t)?;
    let half = t / 2.0;
    let bases = (0..ctx.norm_copies)
        .into_par_iter()
        .map(|c| {
            let copy_seed = seed::derive(seed, tag::NORM_COPY, c as u64);
            (0..ctx.base_copies)
                .map(|b| {
                    build_coarse_ann(
                        points.clone(),
                        norm,
                        radius,
                        seed::derive(copy_seed, tag::COARSE, b as u64),
                    )
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    let c0 = coarse_approx(points.dim(), t);
    let k = ladder_length(c0);
    let mut levels = Vec::with_capacity(k);
    let mut prev = c0;
    for j in 1..=k {
        let cover_radius = 2.0 * prev * radius;
        let cover = build_sparse_cover(&points, norm, cover_radius, ctx.beta)?;
        let beta_eff = cover.diameter_bound / cover_radius;
        let level_seed = seed::derive(seed, tag::LADDER, j as u64);
        let c0_map = cover.diameter_bound;

        let clusters = cover
            .clusters
            .par_iter()
            .enumerate()
            .map(|(ci, cluster)| -> Result<ClusterEntry> {
                if cluster.len() == 1 {
                    return Ok(ClusterEntry {
                        map: None,
                        children: Vec::new(),
                    });
                }
                let map = MazurMapSpec::new(t, half, c0_map)?;
                let center = points.point(cluster.center_id);
                let mut coords = Vec::with_capacity(cluster.len() * points.dim());
                for &m in &cluster.member_ids {
                    map.apply_offset_into(points.point(m), Some(center), &mut coords)
                        .map_err(|e| LpError::numeric(format!("ladder level {j}, cluster {ci}: {e}")))?;
                }
                let images = Arc::new(Dataset::new(points.dim(), coords)?);
                let children = (0..ctx.norm_copies)
                    .into_par_iter()
                    .map(|c| {
                        let s = seed::derive(level_seed, tag::CLUSTER, (ci * ctx.norm_copies + c) as u64);
                        build_node(images.clone(), half, radius, ctx, s)
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(ClusterEntry {
                    map: Some(map),
                    children,
                })
            })
            .collect::<Result<Vec<_>>>()?;

        let child_approx = clusters
            .iter()
            .flat_map(|c| c.children.iter().map(|s| s.approx))
            .fold(None, |acc: Option<f64>, a| Some(acc.map_or(a, |b| b.max(a))))
            .unwrap_or(1.0);
        let new_approx = c_new(t, half, child_approx, beta_eff, prev).min(prev);
        levels.push(LadderLevel {
            index: j,
            base_approx: prev,
            new_approx,
            beta_eff,
            child_approx,
            cover,
            clusters,
        });
        prev = new_approx;
    }

    Ok(LpScheme {
        t,
        radius,
        points,
        approx: prev,
        body: SchemeBody::Ladder(Ladder { c0, bases, levels }),
    })
}

/// One refinement step as observed at query time. Ids are node-local.
#[derive(Debug, Clone, PartialEq)]
pub struct LadderStep {
    pub level: usize,
    pub input_id: usize,
    pub input_distance: f64,
    pub cluster: usize,
    pub center_id: usize,
    /// Child answer lifted back to a point of this node, with its distance.
    pub lifted: Option<(usize, f64)>,
    pub kept_id: usize,
    pub kept_distance: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CopyTrace {
    /// Base answer and its distance.
    pub base: Option<(usize, f64)>,
    pub steps: Vec<LadderStep>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct QueryTrace {
    pub copies: Vec<CopyTrace>,
}

impl LpScheme {
    pub fn norm(&self) -> f64 {
        self.t
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn approx(&self) -> f64 {
        self.approx
    }

    pub fn points(&self) -> &Arc<Dataset> {
        &self.points
    }

    /// Recursion depth below and including this node; `1` for l2.
    pub fn level(&self) -> u32 {
        self.t.log2().round() as u32
    }

    pub fn ladder(&self) -> Option<&Ladder> {
        match &self.body {
            SchemeBody::Ladder(l) => Some(l),
            SchemeBody::L2(_) => None,
        }
    }

    pub fn l2_copies(&self) -> Option<&[L2Scheme]> {
        match &self.body {
            SchemeBody::L2(c) => Some(c),
            SchemeBody::Ladder(_) => None,
        }
    }

    pub fn copies(&self) -> usize {
        match &self.body {
            SchemeBody::L2(c) => c.len(),
            SchemeBody::Ladder(l) => l.bases.len(),
        }
    }

    /// Best answer over all copies, with its lt distance.
    pub(crate) fn query_local(&self, q: &[f64]) -> Option<(usize, f64)> {
        self.query_impl(q, None)
    }

    pub(crate) fn query_traced(&self, q: &[f64]) -> (Option<(usize, f64)>, QueryTrace) {
        let mut trace = QueryTrace::default();
        let ans = self.query_impl(q, Some(&mut trace));
        (ans, trace)
    }

    fn query_impl(&self, q: &[f64], mut trace: Option<&mut QueryTrace>) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for c in 0..self.copies() {
            let mut copy_trace = trace.as_ref().map(|_| CopyTrace::default());
            let ans = self.query_copy(c, q, copy_trace.as_mut());
            if let (Some(t), Some(ct)) = (trace.as_deref_mut(), copy_trace) {
                t.copies.push(ct);
            }
            if let Some((id, dist)) = ans {
                if best.is_none_or(|(_, b)| dist < b) {
                    best = Some((id, dist));
                }
            }
        }
        best
    }

    fn query_copy(&self, c: usize, q: &[f64], mut trace: Option<&mut CopyTrace>) -> Option<(usize, f64)> {
        let ladder = match &self.body {
            SchemeBody::L2(copies) => {
                let ans = copies[c]
                    .query_unchecked(q)
                    .map(|id| (id, lp_dist(self.points.point(id), q, 2.0)));
                if let Some(t) = trace {
                    t.base = ans;
                }
                return ans;
            }
            SchemeBody::Ladder(l) => l,
        };

        let mut cur: Option<(usize, f64)> = None;
        for base in &ladder.bases[c] {
            if let Some((id, dist)) = base.query_unchecked(q) {
                if cur.is_none_or(|(_, b)| dist < b) {
                    cur = Some((id, dist));
                }
            }
        }
        if let Some(t) = trace.as_deref_mut() {
            t.base = cur;
        }
        let (mut cur_id, mut cur_dist) = cur?;

        let mut image = Vec::with_capacity(q.len());
        for level in &ladder.levels {
            let ci = level.cover.covering_ref[cur_id];
            let cluster = &level.cover.clusters[ci];
            let entry = &level.clusters[ci];
            let candidate = match &entry.map {
                None => Some(cluster.member_ids[0]),
                Some(map) => {
                    image.clear();
                    let center = self.points.point(cluster.center_id);
                    match map.apply_offset_into(q, Some(center), &mut image) {
                        Ok(()) => entry.children[c]
                            .query_local(&image)
                            .map(|(local, _)| cluster.member_ids[local]),
                        Err(_) => None,
                    }
                }
            };
            let lifted = candidate.map(|z| (z, lp_dist(self.points.point(z), q, self.t)));
            let (input_id, input_distance) = (cur_id, cur_dist);
            if let Some((z, dz)) = lifted {
                if dz < cur_dist {
                    cur_id = z;
                    cur_dist = dz;
                }
            }
            if let Some(t) = trace.as_deref_mut() {
                t.steps.push(LadderStep {
                    level: level.index,
                    input_id,
                    input_distance,
                    cluster: ci,
                    center_id: cluster.center_id,
                    lifted,
                    kept_id: cur_id,
                    kept_distance: cur_dist,
                });
            }
        }
        Some((cur_id, cur_dist))
    }
}

impl Ladder {
    pub fn c0(&self) -> f64 {
        self.c0
    }

    pub fn levels(&self) -> &[LadderLevel] {
        &self.levels
    }

    pub fn bases(&self) -> &[Vec<CoarseScheme>] {
        &self.bases
    }
}

impl LadderLevel {
    pub fn index(&self) -> usize {
        self.index
    }

    pub fn base_approx(&self) -> f64 {
        self.base_approx
    }

    pub fn new_approx(&self) -> f64 {
        self.new_approx
    }

    pub fn beta_eff(&self) -> f64 {
        self.beta_eff
    }

    pub fn child_approx(&self) -> f64 {
        self.child_approx
    }

    pub fn cover(&self) -> &SparseCover {
        &self.cover
    }

    pub fn mazur_map(&self, cluster: usize) -> Option<&MazurMapSpec> {
        self.clusters[cluster].map.as_ref()
    }

    pub fn children(&self, cluster: usize) -> &[LpScheme] {
        &self.clusters[cluster].children
    }
}
