//! `(2, r)` near neighbor in l2 by p-stable (Gaussian) projection hashing.
//!
//! Each of `L` tables keys a point by `k` concatenated buckets
//! `floor((a . v + b) / w)`. A query scans its bucket in each table in turn,
//! at most `max_probe` entries in total, and returns the first point within `2r`.

use std::collections::HashMap;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{LpError, Result};
use crate::geometry::{lp_dist, Dataset};
use crate::seed;

/// Approximation the l2 scheme certifies.
pub const L2_APPROX: f64 = 2.0;

/// Bucket width in units of `r`.
pub const WIDTH_FACTOR: f64 = 4.0;

/// Probability that two points at distance `u` share one projection bucket
/// of width `w` (Datar et al. closed form for the Gaussian).
pub fn collision_probability(w: f64, u: f64) -> f64 {
    if u <= 0.0 {
        return 1.0;
    }
    let c = w / u;
    let phi = Normal::new(0.0, 1.0).expect("standard normal").cdf(-c);
    1.0 - 2.0 * phi - 2.0 / ((2.0 * std::f64::consts::PI).sqrt() * c) * (1.0 - (-c * c / 2.0).exp())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct L2Params {
    pub k: usize,
    pub tables: usize,
    pub width: f64,
    pub max_probe: usize,
}

impl L2Params {
    /// `k = ceil(log2 n)`, `w = 4r`, and `L` large enough that an r-near pair
    /// collides in some table with probability at least `1 - delta_fail`.
    pub fn for_instance(n: usize, r: f64, delta_fail: f64) -> Self {
        let k = ((n.max(2) as f64).log2().ceil() as usize).max(1);
        let width = WIDTH_FACTOR * r;
        let p1 = collision_probability(width, r);
        let tables = ((1.0 / delta_fail).ln() / p1.powi(k as i32)).ceil().max(1.0) as usize;
        L2Params {
            k,
            tables,
            width,
            max_probe: 3 * tables,
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct HashTable {
    /// `k x dim`, row-major.
    pub projections: Vec<f64>,
    pub offsets: Vec<f64>,
    pub buckets: HashMap<u64, Vec<u32>>,
}

impl HashTable {
    fn key(&self, v: &[f64], width: f64) -> u64 {
        let dim = v.len();
        let mut h = 0xcbf2_9ce4_8422_2325u64;
        for (row, b) in self.projections.chunks_exact(dim).zip(&self.offsets) {
            let dot: f64 = row.iter().zip(v).map(|(a, x)| a * x).sum();
            let bucket = ((dot + b) / width).floor() as i64;
            h = (h ^ bucket as u64).wrapping_mul(0x0000_0100_0000_01B3);
            h ^= h >> 29;
        }
        h
    }
}

#[derive(Debug, Clone)]
pub struct L2Scheme {
    pub(crate) points: Arc<Dataset>,
    pub(crate) radius: f64,
    pub(crate) params: L2Params,
    pub(crate) seed: u64,
    pub(crate) tables: Vec<HashTable>,
}

pub fn build_l2_ann(points: Arc<Dataset>, r: f64, delta_fail: f64, seed: u64) -> Result<L2Scheme> {
    if points.is_empty() {
        return Err(LpError::usage("cannot build an l2 scheme over no points"));
    }
    if !(r > 0.0 && r.is_finite()) {
        return Err(LpError::usage(format!("radius must be positive, got {r}")));
    }
    if !(delta_fail > 0.0 && delta_fail < 1.0) {
        return Err(LpError::usage(format!("failure probability must lie in (0,1), got {delta_fail}")));
    }
    let params = L2Params::for_instance(points.len(), r, delta_fail);
    let dim = points.dim();
    let tables = (0..params.tables)
        .map(|t| {
            let mut rng = seed::rng(seed::derive(seed, seed::tag::TABLE, t as u64));
            let projections: Vec<f64> = (0..params.k * dim).map(|_| rng.sample(StandardNormal)).collect();
            let offsets: Vec<f64> = (0..params.k).map(|_| rng.random_range(0.0..params.width)).collect();
            let mut table = HashTable {
                projections,
                offsets,
                buckets: HashMap::new(),
            };
            for (id, v) in points.iter().enumerate() {
                let key = table.key(v, params.width);
                table.buckets.entry(key).or_default().push(id as u32);
            }
            table
        })
        .collect();
    Ok(L2Scheme {
        points,
        radius: r,
        params,
        seed,
        tables,
    })
}

impl L2Scheme {
    pub fn params(&self) -> L2Params {
        self.params
    }

    pub fn points(&self) -> &Arc<Dataset> {
        &self.points
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn query(&self, q: &[f64]) -> Result<Option<usize>> {
        self.points.check_query(q)?;
        Ok(self.query_unchecked(q))
    }

    pub(crate) fn query_unchecked(&self, q: &[f64]) -> Option<usize> {
        let limit = L2_APPROX * self.radius;
        let mut budget = self.params.max_probe;
        for table in &self.tables {
            let Some(bucket) = table.buckets.get(&table.key(q, self.params.width)) else {
                continue;
            };
            for &id in bucket {
                if budget == 0 {
                    return None;
                }
                budget -= 1;
                let id = id as usize;
                if lp_dist(self.points.point(id), q, 2.0) <= limit {
                    return Some(id);
                }
            }
        }
        None
    }
}

pub fn query_l2_ann(scheme: &L2Scheme, q: &[f64]) -> Result<Option<usize>> {
    scheme.query(q)
}
