//! Benchmark campaigns: planted trials over a grid of dataset sizes.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{LpError, Result};
use crate::oracle::{
    fit_scaling, run_trials, Distribution, NearNeighborIndex, RatioQuantiles, Timing, TrialSpec,
};
use crate::recursive::{
    approximation_bound, preprocess, Amplification, ApproximationBound, BoundConstants, LevelSpace,
    LevelSummary, SchemeConfig,
};
use crate::seed::{self, tag};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchSpec {
    pub n_grid: Vec<usize>,
    pub d: usize,
    pub p: f64,
    pub r: f64,
    pub distribution: Distribution,
    pub rho: f64,
    pub trials: usize,
    pub seed: u64,
    pub scale: f64,
    pub queries_per_build: Option<usize>,
    pub delta: f64,
    pub amplification: Amplification,
}

impl Default for BenchSpec {
    fn default() -> Self {
        BenchSpec {
            n_grid: vec![250, 500, 1000, 2000],
            d: 32,
            p: 4.0,
            r: 1.0,
            distribution: Distribution::Gaussian,
            rho: 0.9,
            trials: 300,
            seed: 0,
            scale: 1.0,
            queries_per_build: None,
            delta: 1.0,
            amplification: Amplification::default(),
        }
    }
}

const REQUIRED: [&str; 6] = ["d", "p", "r", "rho", "trials", "seed"];
const OPTIONAL: [&str; 7] = [
    "n_grid",
    "n",
    "distribution",
    "scale",
    "queries_per_build",
    "delta",
    "amplification",
];

fn field<T: DeserializeOwned>(obj: &Map<String, Value>, key: &str, problems: &mut Vec<String>) -> Option<T> {
    let v = obj.get(key)?;
    match serde_json::from_value(v.clone()) {
        Ok(x) => Some(x),
        Err(e) => {
            problems.push(format!("{key}: {e}"));
            None
        }
    }
}

impl BenchSpec {
    /// Parse a spec, reporting every schema and range problem at once.
    ///
    /// Accepts the trial-spec keys plus `n_grid` (a single `n` is a one-point
    /// grid), `delta` and `amplification`.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text).map_err(|e| LpError::Parse {
            line: e.line(),
            message: format!("spec is not valid JSON: {e}"),
        })?;
        let obj = value
            .as_object()
            .ok_or_else(|| LpError::usage("spec must be a JSON object"))?;
        let mut problems = Vec::new();
        for key in obj.keys() {
            if !REQUIRED.contains(&key.as_str()) && !OPTIONAL.contains(&key.as_str()) {
                problems.push(format!("unknown key {key:?}"));
            }
        }
        for key in REQUIRED {
            if !obj.contains_key(key) {
                problems.push(format!("missing key {key:?}"));
            }
        }
        let n_grid = match (obj.contains_key("n_grid"), obj.contains_key("n")) {
            (true, true) => {
                problems.push("give either \"n\" or \"n_grid\", not both".into());
                None
            }
            (false, false) => {
                problems.push("missing key \"n_grid\" (or \"n\")".into());
                None
            }
            (true, false) => field::<Vec<usize>>(obj, "n_grid", &mut problems),
            (false, true) => field::<usize>(obj, "n", &mut problems).map(|n| vec![n]),
        };
        let def = BenchSpec::default();
        let d = field(obj, "d", &mut problems);
        let p = field(obj, "p", &mut problems);
        let r = field(obj, "r", &mut problems);
        let rho = field(obj, "rho", &mut problems);
        let trials = field(obj, "trials", &mut problems);
        let seed = field(obj, "seed", &mut problems);
        let distribution = field(obj, "distribution", &mut problems).unwrap_or(def.distribution);
        let scale = field(obj, "scale", &mut problems).unwrap_or(def.scale);
        let queries_per_build = field(obj, "queries_per_build", &mut problems).unwrap_or(None);
        let delta = field(obj, "delta", &mut problems).unwrap_or(def.delta);
        let amplification = field(obj, "amplification", &mut problems).unwrap_or_default();

        let spec = match (n_grid, d, p, r, rho, trials, seed) {
            (Some(n_grid), Some(d), Some(p), Some(r), Some(rho), Some(trials), Some(seed)) if problems.is_empty() => {
                BenchSpec {
                    n_grid,
                    d,
                    p,
                    r,
                    distribution,
                    rho,
                    trials,
                    seed,
                    scale,
                    queries_per_build,
                    delta,
                    amplification,
                }
            }
            _ => return Err(LpError::usage(format!("invalid bench spec: {}", problems.join("; ")))),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.n_grid.is_empty() {
            problems.push("n_grid must not be empty".to_string());
        }
        if let Err(e) = self.trial_spec(self.n_grid.first().copied().unwrap_or(1), 0).validate() {
            problems.push(strip(e));
        }
        if self.n_grid.contains(&0) {
            problems.push("every n must be at least 1".to_string());
        }
        if let Err(e) = self.scheme_config(0).validate() {
            problems.push(strip(e));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(LpError::usage(format!("invalid bench spec: {}", problems.join("; "))))
        }
    }

    pub fn trial_spec(&self, n: usize, seed: u64) -> TrialSpec {
        TrialSpec {
            n,
            d: self.d,
            p: self.p,
            r: self.r,
            distribution: self.distribution,
            rho: self.rho,
            trials: self.trials,
            seed,
            scale: self.scale,
            queries_per_build: self.queries_per_build,
        }
    }

    pub fn scheme_config(&self, seed: u64) -> SchemeConfig {
        SchemeConfig {
            p: self.p,
            r: self.r,
            delta: self.delta,
            amplification: self.amplification.clone(),
            seed,
        }
    }
}

fn strip(e: LpError) -> String {
    match e {
        LpError::Usage(m) => m,
        other => other.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpacePoint {
    pub n: usize,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceSection {
    /// Per-level breakdown at the largest `n`.
    pub per_level: Vec<LevelSpace>,
    /// Total stored points at the largest `n`.
    pub total: usize,
    pub by_n: Vec<SpacePoint>,
    /// Log-log slope of total against `n`; needs three distinct sizes.
    pub fit_slope: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub n: usize,
    pub success_rate: f64,
    pub ratio_quantiles: Option<RatioQuantiles>,
    pub space_total: usize,
    pub timing: Timing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub config: BenchSpec,
    pub approximation_bound: ApproximationBound,
    /// Top ladder as built at the largest `n`.
    pub ladder: Vec<LevelSummary>,
    /// Pooled over every run.
    pub success_rate: f64,
    pub ratio_quantiles: Option<RatioQuantiles>,
    pub space: SpaceSection,
    pub timing: Timing,
    pub runs: Vec<RunSummary>,
}

impl ReportFile {
    pub fn without_timing(&self) -> ReportFile {
        let mut r = self.clone();
        r.timing = Timing::default();
        for run in &mut r.runs {
            run.timing = Timing::default();
        }
        r
    }
}

/// Run the planted-trial campaign at every size in the grid.
pub fn run_campaign(spec: &BenchSpec) -> Result<ReportFile> {
    spec.validate()?;
    let bound = approximation_bound(&spec.scheme_config(spec.seed), spec.d, BoundConstants::Implemented);
    let builder = |ds: &crate::Dataset, seed: u64| -> Result<Box<dyn NearNeighborIndex>> {
        Ok(Box::new(preprocess(ds, &spec.scheme_config(seed))?))
    };

    let mut runs = Vec::new();
    let mut ratios = Vec::new();
    let (mut successes, mut trials) = (0, 0);
    let mut largest: Option<(usize, crate::oracle::TrialReport)> = None;
    let mut timing = Timing::default();
    let mut queries = 0usize;
    for (i, &n) in spec.n_grid.iter().enumerate() {
        let ts = spec.trial_spec(n, seed::derive(spec.seed, tag::CAMPAIGN, i as u64));
        let report = run_trials(&builder, &ts, bound.c_p)?;
        successes += report.successes();
        trials += report.outcomes.len();
        ratios.extend(report.outcomes.iter().filter_map(|o| o.ratio));
        timing.build_ms += report.timing.build_ms;
        timing.mean_query_us += report.timing.mean_query_us * report.outcomes.len() as f64;
        queries += report.outcomes.len();
        runs.push(RunSummary {
            n,
            success_rate: report.success_rate,
            ratio_quantiles: report.ratio_quantiles,
            space_total: report.space.as_ref().map_or(0, |s| s.total_points),
            timing: report.timing,
        });
        if largest.as_ref().is_none_or(|(m, _)| n >= *m) {
            largest = Some((n, report));
        }
    }
    timing.mean_query_us /= queries.max(1) as f64;

    let by_n: Vec<SpacePoint> = runs
        .iter()
        .map(|r| SpacePoint {
            n: r.n,
            total: r.space_total,
        })
        .collect();
    let fit_points: Vec<(f64, f64)> = by_n.iter().map(|s| (s.n as f64, s.total as f64)).collect();
    let fit_slope = fit_scaling(&fit_points).ok();
    let (_, top) = largest.expect("non-empty grid");
    let space = top.space.clone().unwrap_or_default();

    Ok(ReportFile {
        config: spec.clone(),
        approximation_bound: bound,
        ladder: top.ladder,
        success_rate: successes as f64 / trials as f64,
        ratio_quantiles: RatioQuantiles::from_values(&ratios),
        space: SpaceSection {
            per_level: space.per_level,
            total: space.total_points,
            by_n,
            fit_slope,
        },
        timing,
        runs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_errors_are_enumerated() {
        let err = BenchSpec::from_json(r#"{"n_grid": [10], "p": "four", "bogus": 1, "r": 1}"#)
            .unwrap_err()
            .to_string();
        for needle in ["bogus", "missing key \"d\"", "p:", "missing key \"trials\""] {
            assert!(err.contains(needle), "{needle} not in {err}");
        }
        let ranges = BenchSpec::from_json(
            r#"{"n_grid": [10, 0], "d": 4, "p": 2, "r": 1, "rho": 3, "trials": 1, "seed": 0}"#,
        )
        .unwrap_err()
        .to_string();
        for needle in ["rho", "every n", "exceed 2"] {
            assert!(ranges.contains(needle), "{needle} not in {ranges}");
        }
        let parse = BenchSpec::from_json("{\n\"d\": }").unwrap_err();
        assert!(matches!(parse, LpError::Parse { line: 2, .. }));
    }

    #[test]
    fn single_n_and_defaults() {
        let s = BenchSpec::from_json(r#"{"n": 50, "d": 8, "p": 4, "r": 1, "rho": 0.9, "trials": 3, "seed": 1}"#)
            .unwrap();
        assert_eq!(s.n_grid, vec![50]);
        assert_eq!(s.distribution, Distribution::Gaussian);
        assert_eq!(s.delta, 1.0);
    }

    #[test]
    fn campaign_is_reproducible() {
        let spec = BenchSpec {
            n_grid: vec![60, 90, 120],
            d: 16,
            trials: 12,
            seed: 3,
            ..Default::default()
        };
        let a = run_campaign(&spec).unwrap();
        let b = run_campaign(&spec).unwrap();
        assert_eq!(a.without_timing(), b.without_timing());
        assert_eq!(a.runs.len(), 3);
        assert!(a.space.fit_slope.is_some());
        assert_eq!(a.space.total, a.runs[2].space_total);
        assert_eq!(a.ladder.len(), a.approximation_bound.levels[0].k);
        let json = serde_json::to_string(&a).unwrap();
        let back: ReportFile = serde_json::from_str(&json).unwrap();
        assert_eq!(back, a);
    }
}
