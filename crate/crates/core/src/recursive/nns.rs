//! Nearest neighbor search from near neighbor indexes over a geometric
//! ladder of radii.

use rayon::prelude::*;

use super::config::SchemeConfig;
use super::index::{preprocess, AnnIndex, QueryAnswer};
use crate::error::{LpError, Result};
use crate::geometry::{lp_dist, Dataset};

#[derive(Debug, Clone)]
pub struct NnsIndex {
    radii: Vec<f64>,
    indexes: Vec<AnnIndex>,
    c_slack: f64,
}

/// Smallest nonzero pairwise distance and the diameter, by exhaustive scan.
fn distance_range(dataset: &Dataset, p: f64) -> (Option<f64>, f64) {
    let n = dataset.len();
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut lo: Option<f64> = None;
            let mut hi = 0.0f64;
            for j in (i + 1)..n {
                let d = lp_dist(dataset.point(i), dataset.point(j), p);
                hi = hi.max(d);
                if d > 0.0 {
                    lo = Some(lo.map_or(d, |l| l.min(d)));
                }
            }
            (lo, hi)
        })
        .reduce(
            || (None, 0.0),
            |(la, ha), (lb, hb)| {
                let lo = match (la, lb) {
                    (Some(a), Some(b)) => Some(a.min(b)),
                    (a, b) => a.or(b),
                };
                (lo, ha.max(hb))
            },
        )
}

impl NnsIndex {
    /// Builds one index per radius `r_min (1 + c_slack)^j` covering
    /// `[min nonzero distance / 2, diameter]`. `template.r` is ignored.
    pub fn build(dataset: &Dataset, template: &SchemeConfig, c_slack: f64) -> Result<Self> {
        if dataset.is_empty() {
            return Err(LpError::usage("cannot search an empty dataset"));
        }
        if !(c_slack > 0.0 && c_slack.is_finite()) {
            return Err(LpError::usage(format!("radius slack must be positive, got {c_slack}")));
        }
        let radii = match distance_range(dataset, template.p) {
            (Some(min), diameter) => {
                let mut radii = vec![min / 2.0];
                while *radii.last().unwrap() < diameter {
                    let next = radii.last().unwrap() * (1.0 + c_slack);
                    radii.push(next);
                }
                radii
            }
            (None, _) => vec![1.0],
        };
        let indexes = radii
            .par_iter()
            .map(|&r| preprocess(dataset, &SchemeConfig { r, ..template.clone() }))
            .collect::<Result<Vec<_>>>()?;
        Ok(NnsIndex {
            radii,
            indexes,
            c_slack,
        })
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    /// Guaranteed ratio to the true nearest neighbor distance, `c_p (1 + c_slack)`.
    pub fn approx(&self) -> f64 {
        self.indexes[0].bound().c_p * (1.0 + self.c_slack)
    }

    /// Binary search for the smallest radius whose index answers within
    /// `c_p r`. Falls back to the closest answer seen if no probe succeeds.
    pub fn search(&self, q: &[f64]) -> Result<Option<QueryAnswer>> {
        let mut best: Option<QueryAnswer> = None;
        let mut found: Option<QueryAnswer> = None;
        let (mut lo, mut hi) = (0usize, self.radii.len());
        while lo < hi {
            let mid = (lo + hi) / 2;
            let index = &self.indexes[mid];
            let ans = index.query(q)?;
            let ok = ans
                .as_ref()
                .is_some_and(|a| a.distance <= index.bound().c_p * self.radii[mid]);
            if let Some(a) = &ans {
                if best.as_ref().is_none_or(|b| a.distance < b.distance) {
                    best = Some(a.clone());
                }
            }
            if ok {
                found = ans;
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        Ok(found.or(best))
    }
}

/// Build-and-query convenience wrapper.
pub fn nns_search(dataset: &Dataset, template: &SchemeConfig, c_slack: f64, q: &[f64]) -> Result<Option<usize>> {
    let index = NnsIndex::build(dataset, template, c_slack)?;
    Ok(index.search(q)?.map(|a| a.id))
}
