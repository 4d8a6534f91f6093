//! Ground truth and the statistical trial harness.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::base::{CoarseScheme, L2Scheme};
use crate::error::{LpError, Result};
use crate::geometry::{lp_dist, lp_norm, Dataset, NormParam};
use crate::recursive::{space_usage, AnnIndex, LevelSummary, SpaceReport};
use crate::seed::{self, tag};

/// Anything that answers near neighbor queries with an original point id.
pub trait NearNeighborIndex: Send + Sync {
    fn query_id(&self, q: &[f64]) -> Result<Option<usize>>;

    fn space(&self) -> Option<SpaceReport> {
        None
    }

    fn ladder(&self) -> Vec<LevelSummary> {
        Vec::new()
    }
}

impl NearNeighborIndex for AnnIndex {
    fn query_id(&self, q: &[f64]) -> Result<Option<usize>> {
        Ok(self.query(q)?.map(|a| a.id))
    }

    fn space(&self) -> Option<SpaceReport> {
        Some(space_usage(self))
    }

    fn ladder(&self) -> Vec<LevelSummary> {
        self.ladder_summary()
    }
}

impl NearNeighborIndex for L2Scheme {
    fn query_id(&self, q: &[f64]) -> Result<Option<usize>> {
        self.query(q)
    }
}

impl NearNeighborIndex for CoarseScheme {
    fn query_id(&self, q: &[f64]) -> Result<Option<usize>> {
        self.query(q)
    }
}

/// Exhaustive nearest neighbor; ties go to the lowest id.
pub fn exact_nn(dataset: &Dataset, q: &[f64], p: NormParam) -> Result<(usize, f64)> {
    if dataset.is_empty() {
        return Err(LpError::usage("nearest neighbor in an empty dataset"));
    }
    dataset.check_query(q)?;
    let p = p.get();
    let mut best = (0, f64::INFINITY);
    for (id, v) in dataset.iter().enumerate() {
        let d = lp_dist(v, q, p);
        if d < best.1 {
            best = (id, d);
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Distribution {
    /// i.i.d. `N(0, scale^2)` coordinates.
    Gaussian,
    /// i.i.d. uniform on `[-scale, scale]`.
    #[serde(alias = "uniform")]
    UniformCube,
    /// 16 Gaussian blobs of std `scale` around centers of std `10 scale`.
    Clustered,
}

impl std::str::FromStr for Distribution {
    type Err = LpError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(Distribution::Gaussian),
            "uniform" | "uniform_cube" | "uniform-cube" => Ok(Distribution::UniformCube),
            "clustered" => Ok(Distribution::Clustered),
            other => Err(LpError::usage(format!(
                "unknown distribution {other:?} (expected gaussian, uniform or clustered)"
            ))),
        }
    }
}

const BLOBS: usize = 16;

pub fn sample_dataset(n: usize, d: usize, dist: Distribution, scale: f64, seed: u64) -> Result<Dataset> {
    if n == 0 || d == 0 {
        return Err(LpError::usage("n and d must be at least 1"));
    }
    let mut rng = seed::rng(seed);
    let coords: Vec<f64> = match dist {
        Distribution::Gaussian => (0..n * d)
            .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
            .collect(),
        Distribution::UniformCube => (0..n * d).map(|_| rng.random_range(-scale..=scale)).collect(),
        Distribution::Clustered => {
            let centers: Vec<f64> = (0..BLOBS * d)
                .map(|_| 10.0 * scale * rng.sample::<f64, _>(StandardNormal))
                .collect();
            let mut coords = Vec::with_capacity(n * d);
            for _ in 0..n {
                let c = rng.random_range(0..BLOBS);
                for i in 0..d {
                    coords.push(centers[c * d + i] + scale * rng.sample::<f64, _>(StandardNormal));
                }
            }
            coords
        }
    };
    Dataset::new(d, coords)
}

fn default_scale() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSpec {
    pub n: usize,
    pub d: usize,
    pub p: f64,
    pub r: f64,
    pub distribution: Distribution,
    /// Planted query distance, `0 <= rho <= r`.
    pub rho: f64,
    pub trials: usize,
    pub seed: u64,
    #[serde(default = "default_scale")]
    pub scale: f64,
    /// Queries answered per built dataset; `None` builds once for all trials.
    #[serde(default)]
    pub queries_per_build: Option<usize>,
}

impl TrialSpec {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.n == 0 {
            problems.push("n must be at least 1".to_string());
        }
        if self.d == 0 {
            problems.push("d must be at least 1".to_string());
        }
        if NormParam::new(self.p).is_err() {
            problems.push(format!("p must be finite and >= 1, got {}", self.p));
        }
        if !(self.r > 0.0 && self.r.is_finite()) {
            problems.push(format!("r must be positive, got {}", self.r));
        }
        if !(self.rho >= 0.0 && self.rho <= self.r) {
            problems.push(format!("rho must lie in [0, r], got {}", self.rho));
        }
        if self.trials == 0 {
            problems.push("trials must be at least 1".to_string());
        }
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            problems.push(format!("scale must be positive, got {}", self.scale));
        }
        if self.queries_per_build == Some(0) {
            problems.push("queries_per_build must be at least 1".to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(LpError::usage(problems.join("; ")))
        }
    }

    fn norm(&self) -> NormParam {
        NormParam::new(self.p).expect("validated")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedQuery {
    pub query: Vec<f64>,
    pub planted_id: usize,
}

/// A query at lp distance exactly `rho` from `point`, along a Gaussian direction.
fn plant_query<R: Rng>(point: &[f64], rho: f64, p: f64, rng: &mut R) -> Vec<f64> {
    if rho == 0.0 {
        return point.to_vec();
    }
    loop {
        let dir: Vec<f64> = (0..point.len()).map(|_| rng.sample(StandardNormal)).collect();
        let len = lp_norm(&dir, p);
        if len > 0.0 {
            let s = rho / len;
            return point.iter().zip(&dir).map(|(x, u)| x + s * u).collect();
        }
    }
}

/// One dataset with `m` planted queries, each near a distinct point when `m <= n`.
pub fn make_planted_batch(spec: &TrialSpec, m: usize, seed: u64) -> Result<(Dataset, Vec<PlantedQuery>)> {
    spec.validate()?;
    let dataset = sample_dataset(spec.n, spec.d, spec.distribution, spec.scale, seed::derive(seed, tag::DATASET, 0))?;
    let mut rng = seed::rng(seed::derive(seed, tag::QUERY, 0));
    let mut ids: Vec<usize> = (0..spec.n).collect();
    ids.shuffle(&mut rng);
    let queries = (0..m)
        .map(|i| {
            let planted_id = ids[i % ids.len()];
            PlantedQuery {
                query: plant_query(dataset.point(planted_id), spec.rho, spec.p, &mut rng),
                planted_id,
            }
        })
        .collect();
    Ok((dataset, queries))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedInstance {
    pub dataset: Dataset,
    pub query: Vec<f64>,
    pub planted_id: usize,
}

pub fn make_planted_instance(spec: &TrialSpec) -> Result<PlantedInstance> {
    let (dataset, mut queries) = make_planted_batch(spec, 1, spec.seed)?;
    let PlantedQuery { query, planted_id } = queries.remove(0);
    Ok(PlantedInstance {
        dataset,
        query,
        planted_id,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub trial: usize,
    pub planted_id: usize,
    pub returned_id: Option<usize>,
    pub returned_distance: Option<f64>,
    pub exact_id: usize,
    pub exact_distance: f64,
    /// `returned / exact`, when both exist and `exact > 0`.
    pub ratio: Option<f64>,
    pub success: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioQuantiles {
    pub p50: f64,
    pub p90: f64,
    pub p99: f64,
    pub max: f64,
}

/// Nearest-rank quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let rank = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}

impl RatioQuantiles {
    pub fn from_values(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        Some(RatioQuantiles {
            p50: quantile(&v, 0.5),
            p90: quantile(&v, 0.9),
            p99: quantile(&v, 0.99),
            max: *v.last().unwrap(),
        })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub build_ms: f64,
    pub mean_query_us: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub spec: TrialSpec,
    pub c_target: f64,
    pub outcomes: Vec<TrialOutcome>,
    pub success_rate: f64,
    pub ratio_quantiles: Option<RatioQuantiles>,
    /// Space of the first built index, when the index reports one.
    pub space: Option<SpaceReport>,
    /// Top ladder of the first built index.
    #[serde(default)]
    pub ladder: Vec<LevelSummary>,
    pub timing: Timing,
}

impl TrialReport {
    /// The report with wall-clock fields zeroed, for reproducibility checks.
    pub fn without_timing(&self) -> TrialReport {
        TrialReport {
            timing: Timing::default(),
            ..self.clone()
        }
    }

    pub fn successes(&self) -> usize {
        self.outcomes.iter().filter(|o| o.success).count()
    }
}

pub type Builder<'a> = dyn Fn(&Dataset, u64) -> Result<Box<dyn NearNeighborIndex>> + Sync + 'a;

/// Builds once per dataset batch and runs every planted query against it.
/// Success means the returned point is within `c_target * r`.
pub fn run_trials(builder: &Builder<'_>, spec: &TrialSpec, c_target: f64) -> Result<TrialReport> {
    spec.validate()?;
    let p = spec.norm();
    let per_build = spec.queries_per_build.unwrap_or(spec.trials).min(spec.trials);
    let batches = spec.trials.div_ceil(per_build);
    let limit = c_target * spec.r;

    let mut outcomes = Vec::with_capacity(spec.trials);
    let mut space = None;
    let mut ladder = None;
    let mut build_ms = 0.0;
    let mut query_us = 0.0;
    let mut queries_timed = 0usize;

    for b in 0..batches {
        let m = per_build.min(spec.trials - b * per_build);
        let batch_seed = seed::derive(spec.seed, tag::DATASET, b as u64);
        let (dataset, queries) = make_planted_batch(spec, m, batch_seed)?;
        let start = Instant::now();
        let built = builder(&dataset, seed::derive(spec.seed, tag::BUILD, b as u64));
        build_ms += start.elapsed().as_secs_f64() * 1e3;
        let first = b * per_build;

        let index = match built {
            Ok(index) => index,
            Err(e) => {
                for (i, pq) in queries.iter().enumerate() {
                    let (exact_id, exact_distance) = exact_nn(&dataset, &pq.query, p)?;
                    outcomes.push(TrialOutcome {
                        trial: first + i,
                        planted_id: pq.planted_id,
                        returned_id: None,
                        returned_distance: None,
                        exact_id,
                        exact_distance,
                        ratio: None,
                        success: false,
                        error: Some(e.to_string()),
                    });
                }
                continue;
            }
        };
        if ladder.is_none() {
            space = index.space();
            ladder = Some(index.ladder());
        }

        let results: Vec<(TrialOutcome, f64)> = queries
            .par_iter()
            .enumerate()
            .map(|(i, pq)| -> Result<(TrialOutcome, f64)> {
                let (exact_id, exact_distance) = exact_nn(&dataset, &pq.query, p)?;
                let start = Instant::now();
                let answer = index.query_id(&pq.query);
                let us = start.elapsed().as_secs_f64() * 1e6;
                let (returned_id, error) = match answer {
                    Ok(a) => (a, None),
                    Err(e) => (None, Some(e.to_string())),
                };
                let returned_distance = returned_id.map(|id| lp_dist(dataset.point(id), &pq.query, p.get()));
                let ratio = match returned_distance {
                    Some(r) if exact_distance > 0.0 => Some(r / exact_distance),
                    _ => None,
                };
                Ok((
                    TrialOutcome {
                        trial: first + i,
                        planted_id: pq.planted_id,
                        returned_id,
                        returned_distance,
                        exact_id,
                        exact_distance,
                        ratio,
                        success: returned_distance.is_some_and(|d| d <= limit),
                        error,
                    },
                    us,
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        for (o, us) in results {
            query_us += us;
            queries_timed += 1;
            outcomes.push(o);
        }
    }

    let successes = outcomes.iter().filter(|o| o.success).count();
    let ratios: Vec<f64> = outcomes.iter().filter_map(|o| o.ratio).collect();
    Ok(TrialReport {
        spec: spec.clone(),
        c_target,
        success_rate: successes as f64 / outcomes.len() as f64,
        ratio_quantiles: RatioQuantiles::from_values(&ratios),
        outcomes,
        space,
        ladder: ladder.unwrap_or_default(),
        timing: Timing {
            build_ms,
            mean_query_us: if queries_timed > 0 {
                query_us / queries_timed as f64
            } else {
                0.0
            },
        },
    })
}

/// Slope of the least-squares line through `(ln n, ln measurement)`.
pub fn fit_scaling(points: &[(f64, f64)]) -> Result<f64> {
    if points.iter().any(|&(n, m)| !(n > 0.0 && m > 0.0 && n.is_finite() && m.is_finite())) {
        return Err(LpError::usage("scaling fit needs positive, finite sizes and measurements"));
    }
    let mut distinct: Vec<f64> = points.iter().map(|&(n, _)| n).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(LpError::usage(format!(
            "scaling fit needs at least 3 distinct sizes, got {}",
            distinct.len()
        )));
    }
    let xs: Vec<f64> = points.iter().map(|&(n, _)| n.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|&(_, m)| m.ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    Ok(sxy / sxx)
}
