use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::bound::{approximation_bound, ApproximationBound, BoundConstants};
use super::config::{normalize_norm, NormalizedNorm, SchemeConfig};
use super::scheme::{build_node, BuildCtx, LpScheme, QueryTrace};
use crate::error::{LpError, Result};
use crate::geometry::{check_vector, lp_dist, Dataset};

/// A built `(c_p, r)` near neighbor index over an lp dataset.
///
/// Coincident input points are stored once; internal ids number the distinct
/// points and every answer reports the lowest original id of its point.
#[derive(Debug, Clone)]
pub struct AnnIndex {
    pub(crate) config: SchemeConfig,
    pub(crate) norm: NormalizedNorm,
    pub(crate) dim: usize,
    /// internal id -> lowest original id
    pub(crate) representatives: Vec<usize>,
    /// original id -> internal id
    pub(crate) internal_of: Vec<usize>,
    /// Bit pattern of each distinct point -> internal id.
    pub(crate) exact: HashMap<Vec<u64>, usize>,
    pub(crate) bound: ApproximationBound,
    pub(crate) root: LpScheme,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryAnswer {
    pub id: usize,
    /// Distance to the query in the original lp.
    pub distance: f64,
    /// Per-copy base answers and ladder steps of the top node, in internal ids.
    #[serde(skip)]
    pub trace: QueryTrace,
}

/// One refinement level of the top ladder as built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSummary {
    pub index: usize,
    pub clusters: usize,
    pub sparsity: usize,
    pub cover_radius: f64,
    pub beta_eff: f64,
    pub base_approx: f64,
    pub new_approx: f64,
}

pub(crate) fn point_key(v: &[f64]) -> Vec<u64> {
    // +0.0 and -0.0 are the same point
    v.iter().map(|c| (c + 0.0).to_bits()).collect()
}

pub(crate) fn exact_table(points: &Dataset) -> HashMap<Vec<u64>, usize> {
    points.iter().enumerate().map(|(i, v)| (point_key(v), i)).collect()
}

fn dedup(dataset: &Dataset) -> (Vec<usize>, Vec<usize>) {
    let mut seen: HashMap<Vec<u64>, usize> = HashMap::with_capacity(dataset.len());
    let mut representatives = Vec::new();
    let mut internal_of = Vec::with_capacity(dataset.len());
    for (id, v) in dataset.iter().enumerate() {
        let key = point_key(v);
        let internal = *seen.entry(key).or_insert_with(|| {
            representatives.push(id);
            representatives.len() - 1
        });
        internal_of.push(internal);
    }
    (representatives, internal_of)
}

/// Distances between stored points must stay finite.
fn check_span(dataset: &Dataset) -> Result<()> {
    let dim = dataset.dim();
    let mut lo = vec![f64::INFINITY; dim];
    let mut hi = vec![f64::NEG_INFINITY; dim];
    for v in dataset.iter() {
        for (i, &x) in v.iter().enumerate() {
            lo[i] = lo[i].min(x);
            hi[i] = hi[i].max(x);
        }
    }
    match (0..dim).find(|&i| !(hi[i] - lo[i]).is_finite()) {
        Some(i) => Err(LpError::numeric(format!(
            "coordinate {i} spans [{}, {}]; differences overflow",
            lo[i], hi[i]
        ))),
        None => Ok(()),
    }
}

/// Build the full recursive index.
pub fn preprocess(dataset: &Dataset, config: &SchemeConfig) -> Result<AnnIndex> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(LpError::usage("cannot index an empty dataset"));
    }
    let dim = dataset.dim();
    check_span(dataset)?;
    let norm = normalize_norm(config.p, dim);
    let (representatives, internal_of) = dedup(dataset);
    let points = Arc::new(dataset.select(&representatives));
    let ctx = BuildCtx::new(config, norm.p_eff);
    let radius = config.r * norm.holder_factor;
    let exact = exact_table(&points);
    let root = build_node(points, norm.p_eff, radius, &ctx, config.seed)?;
    Ok(AnnIndex {
        config: config.clone(),
        norm,
        dim,
        representatives,
        internal_of,
        exact,
        bound: approximation_bound(config, dim, BoundConstants::Implemented),
        root,
    })
}

impl AnnIndex {
    pub fn query(&self, q: &[f64]) -> Result<Option<QueryAnswer>> {
        check_vector(q, self.dim)?;
        if let Some(&internal) = self.exact.get(&point_key(q)) {
            return Ok(Some(QueryAnswer {
                id: self.representatives[internal],
                distance: 0.0,
                trace: QueryTrace::default(),
            }));
        }
        let (ans, trace) = self.root.query_traced(q);
        Ok(ans.map(|(internal, _)| QueryAnswer {
            id: self.representatives[internal],
            distance: lp_dist(self.root.points.point(internal), q, self.config.p),
            trace,
        }))
    }

    pub fn config(&self) -> &SchemeConfig {
        &self.config
    }

    pub fn normalized_norm(&self) -> NormalizedNorm {
        self.norm
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of input points, duplicates included.
    pub fn len(&self) -> usize {
        self.internal_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.internal_of.is_empty()
    }

    pub fn distinct_points(&self) -> usize {
        self.representatives.len()
    }

    pub fn original_id(&self, internal: usize) -> usize {
        self.representatives[internal]
    }

    pub fn internal_id(&self, original: usize) -> Option<usize> {
        self.internal_of.get(original).copied()
    }

    /// Calculator bound for this configuration; answers are guaranteed
    /// within `bound().c_p * r` with probability at least 2/3.
    pub fn bound(&self) -> &ApproximationBound {
        &self.bound
    }

    /// Approximation certified by the covers actually built, in the original lp.
    pub fn achieved_approx(&self) -> f64 {
        self.root.approx * self.norm.holder_factor
    }

    /// Empty when the top level is already l2.
    pub fn ladder_summary(&self) -> Vec<LevelSummary> {
        self.root
            .ladder()
            .map(|l| {
                l.levels()
                    .iter()
                    .map(|lv| LevelSummary {
                        index: lv.index(),
                        clusters: lv.cover().clusters.len(),
                        sparsity: lv.cover().sparsity,
                        cover_radius: lv.cover().radius,
                        beta_eff: lv.beta_eff(),
                        base_approx: lv.base_approx(),
                        new_approx: lv.new_approx(),
                    })
                    .collect()
            })
            .unwrap_or_default()
    }

    pub fn root(&self) -> &LpScheme {
        &self.root
    }

    /// Stored distinct points, by internal id.
    pub fn points(&self) -> &Dataset {
        &self.root.points
    }
}

pub fn query(index: &AnnIndex, q: &[f64]) -> Result<Option<QueryAnswer>> {
    index.query(q)
}
