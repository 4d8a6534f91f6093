//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run with `cargo test -p lpann-core --test acceptance`.

use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use lpann_core::base::coarse_approx;
use lpann_core::{
    approximation_bound, build_coarse_ann, build_l2_ann, build_sparse_cover, exact_nn, fit_scaling,
    lp_dist, lp_norm, make_planted_batch, preprocess, run_campaign, run_trials, sample_dataset, space_usage,
    verify_cover, AnnIndex, BenchSpec, BoundConstants, Dataset, Distribution, MazurMapSpec, NearNeighborIndex,
    NormParam, Result, SchemeConfig, TrialSpec,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn secs(t: Duration) -> f64 {
    t.as_secs_f64()
}

fn point_in_ball(rng: &mut impl Rng, d: usize, p: f64, c0: f64) -> Vec<f64> {
    let dir: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
    let len = lp_norm(&dir, p);
    let rad = c0 * rng.random_range(0.0..=1.0f64);
    dir.iter().map(|x| x * rad / len).collect()
}

fn mazur_suite() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst_upper = f64::NEG_INFINITY;
    let mut worst_lower = f64::NEG_INFINITY;
    let mut violations = 0usize;
    for (p, q, c0) in [(4.0, 2.0, 1.0), (4.0, 2.0, 10.0), (8.0, 4.0, 2.0)] {
        let map = MazurMapSpec::new(p, q, c0).unwrap();
        let slack = 1e-9 * c0;
        for _ in 0..10_000 {
            let d = rng.random_range(1..=16);
            let x = point_in_ball(&mut rng, d, p, c0);
            let y = point_in_ball(&mut rng, d, p, c0);
            let src = lp_dist(&x, &y, p);
            let img = lp_dist(&map.apply(&x).unwrap(), &map.apply(&y).unwrap(), q);
            let lower = (q / p) * (2.0 * c0).powf(1.0 - p / q) * src.powf(p / q);
            worst_upper = worst_upper.max(img - src);
            worst_lower = worst_lower.max(lower - img);
            if img > src + slack || lower > img + slack {
                violations += 1;
            }
        }
    }
    let t = start.elapsed();
    outcome(
        violations == 0 && t < Duration::from_secs(10),
        format!(
            "30000 pairs, violations {violations}, max(img - src) {worst_upper:.3e}, max(lower - img) {worst_lower:.3e}, {:.2}s",
            secs(t)
        ),
    )
}

fn cover_suite() -> Outcome {
    let start = Instant::now();
    let ns = [250usize, 500, 1000, 2000];
    let p = NormParam::new(4.0).unwrap();
    let mut pass = true;
    let mut lines = Vec::new();
    let mut c_sp = 0.0f64;
    for d in [8usize, 32] {
        for beta in [2.0f64, 3.0] {
            let limit = 1.0 + 1.0 / beta + 0.15;
            for radius in [1.0, 2.0, 3.0] {
                let mut points = Vec::new();
                let mut ok = true;
                for (i, &n) in ns.iter().enumerate() {
                    let ds = sample_dataset(n, d, Distribution::Gaussian, 1.0, 100 + i as u64).unwrap();
                    let cover = build_sparse_cover(&ds, p, radius, beta).unwrap();
                    let rep = verify_cover(&cover, &ds, p);
                    ok &= rep.cover_ok && rep.max_diameter <= cover.diameter_bound;
                    c_sp = c_sp.max(cover.sparsity as f64 / (n as f64).powf(1.0 + 1.0 / beta));
                    points.push((n as f64, cover.sparsity as f64));
                }
                let slope = fit_scaling(&points).unwrap();
                ok &= slope <= limit;
                pass &= ok;
                lines.push(format!("d={d} beta={beta} R={radius} slope {slope:.3}/{limit:.3}{}", if ok { "" } else { " !" }));
            }
        }
    }
    let t = start.elapsed();
    pass &= t < Duration::from_secs(120);
    outcome(pass, format!("C_SP {c_sp:.3}, {:.1}s; {}", secs(t), lines.join(", ")))
}

fn planted(n: usize, d: usize, p: f64, trials: usize, seed: u64) -> (TrialSpec, Dataset, Vec<lpann_core::oracle::PlantedQuery>) {
    let spec = TrialSpec {
        n,
        d,
        p,
        r: 1.0,
        distribution: Distribution::Gaussian,
        rho: 0.9,
        trials,
        seed,
        scale: 1.0,
        queries_per_build: None,
    };
    let (ds, queries) = make_planted_batch(&spec, trials, seed).unwrap();
    (spec, ds, queries)
}

fn base_suite() -> Outcome {
    let start = Instant::now();
    let (_, ds, queries) = planted(500, 32, 2.0, 200, 31);
    let l2 = build_l2_ann(Arc::new(ds.clone()), 1.0, 0.05, 32).unwrap();
    let l2_ok = queries
        .iter()
        .filter(|pq| {
            l2.query(&pq.query)
                .unwrap()
                .is_some_and(|id| lp_dist(ds.point(id), &pq.query, 2.0) <= 2.0)
        })
        .count();
    let l2_rate = l2_ok as f64 / queries.len() as f64;

    let (d, p) = (32, 4.0);
    let (_, ds, queries) = planted(500, d, p, 200, 33);
    let coarse = build_coarse_ann(Arc::new(ds.clone()), NormParam::new(p).unwrap(), 1.0, 34).unwrap();
    let limit = coarse_approx(d, p);
    let mut coarse_ok = 0usize;
    let mut worst = 0.0f64;
    let mut over = 0usize;
    for pq in &queries {
        if let Some(id) = coarse.query(&pq.query).unwrap() {
            let dist = lp_dist(ds.point(id), &pq.query, p);
            worst = worst.max(dist);
            if dist <= limit {
                coarse_ok += 1;
            } else {
                over += 1;
            }
        }
    }
    let coarse_rate = coarse_ok as f64 / queries.len() as f64;
    let t = start.elapsed();
    outcome(
        l2_rate >= 0.90 && coarse_rate >= 2.0 / 3.0 && over == 0 && t < Duration::from_secs(60),
        format!(
            "l2 success {l2_rate:.3} (>= 0.90), coarse success {coarse_rate:.3} (>= 0.667), coarse max distance {worst:.2} <= {limit:.2} ({over} over), {:.1}s",
            secs(t)
        ),
    )
}

fn index_builder(p: f64) -> impl Fn(&Dataset, u64) -> Result<Box<dyn NearNeighborIndex>> + Sync {
    move |ds, seed| {
        let config = SchemeConfig {
            p,
            seed,
            ..Default::default()
        };
        Ok(Box::new(preprocess(ds, &config)?) as Box<dyn NearNeighborIndex>)
    }
}

fn end_to_end(scale: f64) -> (bool, String) {
    let mut pass = true;
    let mut parts = Vec::new();
    for p in [4.0, 8.0] {
        let spec = TrialSpec {
            n: 1000,
            d: 32,
            p,
            r: 1.0,
            distribution: Distribution::Gaussian,
            rho: 0.9,
            trials: 300,
            seed: 41,
            scale,
            queries_per_build: None,
        };
        let c_p = approximation_bound(&SchemeConfig { p, ..Default::default() }, spec.d, BoundConstants::Implemented).c_p;
        let report = run_trials(&index_builder(p), &spec, c_p).unwrap();
        let p90 = report.ratio_quantiles.map_or(f64::NAN, |q| q.p90);
        pass &= report.success_rate >= 2.0 / 3.0;
        parts.push(format!(
            "p={p}: success {:.3} at c_p {c_p:.1}, p90 ratio {p90:.4}, clusters/level {:?}",
            report.success_rate,
            report.ladder.iter().map(|l| l.clusters).collect::<Vec<_>>()
        ));
    }
    (pass, parts.join("; "))
}

fn end_to_end_suite() -> Outcome {
    let start = Instant::now();
    let (pass, detail) = end_to_end(1.0);
    let t = start.elapsed();
    outcome(pass && t < Duration::from_secs(600), format!("{detail}; {:.1}s", secs(t)))
}

/// Trials with a checkable step, and those where the exact neighbor was in the cluster.
fn containment(index: &AnnIndex, queries: &[Vec<f64>]) -> (usize, usize) {
    let root = index.root();
    let Some(ladder) = root.ladder() else {
        return (0, 0);
    };
    let p_eff = NormParam::new(root.norm()).unwrap();
    let radius = root.radius();
    let (mut checked, mut held) = (0, 0);
    for q in queries {
        let Some(answer) = index.query(q).unwrap() else {
            continue;
        };
        let (star, star_dist) = exact_nn(root.points(), q, p_eff).unwrap();
        if star_dist > radius {
            continue;
        }
        let mut any = false;
        let mut all = true;
        for copy in &answer.trace.copies {
            for step in &copy.steps {
                let level = ladder.levels().iter().find(|l| l.index() == step.level).unwrap();
                if step.input_distance <= level.base_approx() * radius {
                    any = true;
                    all &= level.cover().clusters[step.cluster].contains(star);
                }
            }
        }
        if any {
            checked += 1;
            held += all as usize;
        }
    }
    (checked, held)
}

fn containment_suite() -> Outcome {
    let start = Instant::now();
    let mut pass = true;
    let mut parts = Vec::new();
    for scale in [1.0, 200.0] {
        let spec = TrialSpec {
            n: 1000,
            d: 32,
            p: 4.0,
            r: 1.0,
            distribution: Distribution::Gaussian,
            rho: 0.9,
            trials: 300,
            seed: 51,
            scale,
            queries_per_build: None,
        };
        let (ds, planted) = make_planted_batch(&spec, spec.trials, 51).unwrap();
        let index = preprocess(&ds, &SchemeConfig { seed: 52, ..Default::default() }).unwrap();
        let queries: Vec<Vec<f64>> = planted.into_iter().map(|pq| pq.query).collect();
        let (checked, held) = containment(&index, &queries);
        let rate = if checked == 0 { 0.0 } else { held as f64 / checked as f64 };
        pass &= checked > 0 && rate >= 0.95;
        parts.push(format!("scale {scale}: {held}/{checked} trials contained ({rate:.3})"));
    }
    let t = start.elapsed();
    outcome(pass, format!("{}; {:.1}s", parts.join("; "), secs(t)))
}

/// Log-log slope of stored points over the n grid, the totals, and whether
/// per-level counts equal the cover sparsities.
fn space_growth(scale: f64) -> (f64, Vec<usize>, bool) {
    let mut points = Vec::new();
    let mut levels_match = true;
    for (i, n) in [250usize, 500, 1000, 2000].into_iter().enumerate() {
        let ds = sample_dataset(n, 32, Distribution::Gaussian, scale, 60 + i as u64).unwrap();
        let index = preprocess(&ds, &SchemeConfig { seed: 61, ..Default::default() }).unwrap();
        let space = space_usage(&index);
        if let Some(ladder) = index.root().ladder() {
            for level in ladder.levels() {
                levels_match &= space
                    .entry(2, level.index())
                    .is_some_and(|e| e.cover_points == level.cover().sparsity);
            }
        }
        points.push((n as f64, space.total_points as f64));
    }
    let slope = fit_scaling(&points).unwrap();
    (slope, points.iter().map(|&(_, s)| s as usize).collect(), levels_match)
}

fn space_suite() -> Outcome {
    let start = Instant::now();
    let (slope, totals, levels_match) = space_growth(1.0);
    let limit = 1.0 + 2.0 / 4f64.log2() + 0.2;
    let t = start.elapsed();
    outcome(
        slope <= limit && levels_match,
        format!(
            "slope {slope:.3} (<= {limit:.1}), totals {totals:?}, per-level counts match covers: {levels_match}, {:.1}s",
            secs(t)
        ),
    )
}

fn closed_form_suite() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for p in [4.0f64, 8.0, 16.0] {
        let config = SchemeConfig { p, ..Default::default() };
        let b = approximation_bound(&config, 1 << 16, BoundConstants::Paper);
        let beta = p.log2();
        let closed = (16.0 * beta).powf(p.log2());
        let alt = p.powf(4.0 + p.log2().log2());
        let err = ((b.c_p - closed).abs() / closed).max((b.c_p - alt).abs() / alt);
        pass &= err <= 1e-12;
        parts.push(format!("p={p}: c_p {:.6e} vs {closed:.6e} (rel err {err:.1e})", b.c_p));
    }
    outcome(pass, parts.join("; "))
}

fn determinism_suite() -> Outcome {
    let start = Instant::now();
    let spec = BenchSpec::default();
    let a = run_campaign(&spec).unwrap();
    let b = run_campaign(&spec).unwrap();
    let same = a.without_timing() == b.without_timing();
    let json_same = serde_json::to_string(&a.without_timing()).unwrap()
        == serde_json::to_string(&b.without_timing()).unwrap();
    let t = start.elapsed();
    outcome(
        same && json_same,
        format!(
            "default campaign n_grid {:?} repeated: identical {same}, success {:.3}, {:.1}s",
            spec.n_grid,
            a.success_rate,
            secs(t)
        ),
    )
}

fn main() -> ExitCode {
    // `cargo test` passes harness flags; listing must not run the suite.
    if std::env::args().any(|a| a == "--list") {
        return ExitCode::SUCCESS;
    }
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("mazur distortion", mazur_suite),
        ("sparse covers", cover_suite),
        ("base schemes", base_suite),
        ("end to end", end_to_end_suite),
        ("cluster containment", containment_suite),
        ("space growth", space_suite),
        ("closed-form bound", closed_form_suite),
        ("determinism", determinism_suite),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let o = run();
        if !o.pass {
            failed += 1;
        }
        println!("{} {}. {name}: {}", if o.pass { "PASS" } else { "FAIL" }, i + 1, o.detail);
    }
    let (_, detail) = end_to_end(200.0);
    println!("INFO end to end at coordinate scale 200: {detail}");
    let (slope, totals, levels_match) = space_growth(200.0);
    println!("INFO space growth at coordinate scale 200: slope {slope:.3}, totals {totals:?}, per-level counts match covers: {levels_match}");
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
