use super::*;
use crate::geometry::{lp_dist, Dataset};
use crate::oracle::{exact_nn, make_planted_batch, sample_dataset, Distribution, TrialSpec};
use crate::NormParam;

fn config(p: f64, seed: u64) -> SchemeConfig {
    SchemeConfig {
        p,
        seed,
        ..Default::default()
    }
}

fn gaussian(n: usize, d: usize, scale: f64, seed: u64) -> Dataset {
    sample_dataset(n, d, Distribution::Gaussian, scale, seed).unwrap()
}

#[test]
fn single_point_index() {
    let ds = Dataset::from_rows(&[[1.0, 2.0, 3.0, 4.0]]).unwrap();
    let index = preprocess(&ds, &config(4.0, 1)).unwrap();
    let a = index.query(&[1.0, 2.0, 3.0, 4.5]).unwrap().unwrap();
    assert_eq!(a.id, 0);
    assert!((a.distance - 0.5).abs() < 1e-12);
    let far = index.query(&[100.0, 0.0, 0.0, 0.0]).unwrap();
    assert!(far.is_none_or(|a| a.id == 0));
}

#[test]
fn rejects_bad_inputs() {
    let ds = gaussian(10, 4, 1.0, 0);
    assert!(preprocess(&ds, &config(2.0, 0)).is_err());
    let index = preprocess(&ds, &config(4.0, 0)).unwrap();
    assert!(matches!(
        index.query(&[0.0; 3]),
        Err(crate::LpError::DimensionMismatch { expected: 4, actual: 3 })
    ));
    assert!(index.query(&[f64::NAN, 0.0, 0.0, 0.0]).is_err());
    let wide = Dataset::from_rows(&[[1.7e308], [-1.7e308]]).unwrap();
    assert_eq!(preprocess(&wide, &config(4.0, 0)).unwrap_err().exit_code(), 4);
}

#[test]
fn ladder_shape_matches_the_calculator() {
    let ds = gaussian(60, 16, 1.0, 3);
    let index = preprocess(&ds, &config(4.0, 3)).unwrap();
    let ladder = index.root().ladder().unwrap();
    let bound = index.bound();
    assert_eq!(ladder.levels().len(), bound.levels[0].k);
    assert_eq!(ladder.levels().len(), 3);
    assert_eq!(ladder.c0(), bound.levels[0].c0);
    assert_eq!(index.root().copies(), 3);
    for level in ladder.levels() {
        let c = c_new(4.0, 2.0, level.child_approx(), level.beta_eff(), level.base_approx());
        assert_eq!(level.new_approx(), c.min(level.base_approx()));
        assert!(level.beta_eff() <= bound.levels[0].beta_eff + 1e-12);
    }
}

#[test]
fn every_cover_is_valid_and_maps_are_contractions() {
    // Small scale so the covers have several clusters.
    let ds = gaussian(200, 16, 40.0, 5);
    let index = preprocess(&ds, &config(4.0, 5)).unwrap();
    let root = index.root();
    let p = NormParam::new(4.0).unwrap();
    for level in root.ladder().unwrap().levels() {
        let report = crate::verify_cover(level.cover(), root.points(), p);
        assert!(report.cover_ok);
        assert!(report.max_diameter <= level.cover().diameter_bound * (1.0 + 1e-12));
        for (ci, cluster) in level.cover().clusters.iter().enumerate() {
            let Some(map) = level.mazur_map(ci) else {
                assert_eq!(cluster.len(), 1);
                continue;
            };
            let child = &level.children(ci)[0];
            assert_eq!(child.points().len(), cluster.len());
            let center = root.points().point(cluster.center_id);
            let mut img = Vec::new();
            for (local, &m) in cluster.member_ids.iter().enumerate() {
                img.clear();
                map.apply_offset_into(root.points().point(m), Some(center), &mut img).unwrap();
                assert_eq!(img.as_slice(), child.points().point(local));
            }
            for a in 0..cluster.len().min(8) {
                for b in a + 1..cluster.len().min(8) {
                    let x = root.points().point(cluster.member_ids[a]);
                    let y = root.points().point(cluster.member_ids[b]);
                    let dx = lp_dist(x, y, 4.0);
                    let dy = lp_dist(child.points().point(a), child.points().point(b), 2.0);
                    assert!(dy <= dx * (1.0 + 1e-9));
                }
            }
        }
    }
}

#[test]
fn space_entries_match_the_structure() {
    let ds = gaussian(150, 16, 40.0, 9);
    let index = preprocess(&ds, &config(4.0, 9)).unwrap();
    let space = space_usage(&index);
    let ladder = index.root().ladder().unwrap();
    for level in ladder.levels() {
        let e = space.entry(2, level.index()).unwrap();
        assert_eq!(e.cover_points, level.cover().sparsity);
        assert_eq!(e.nodes, 1);
    }
    let base = space.entry(2, 0).unwrap();
    assert_eq!(base.scheme_points, 150 * 3 * 3);
    assert_eq!(space.total_points, space.per_level.iter().map(|e| e.total()).sum::<usize>());
    assert!(space.entry(1, 0).is_some());
}

#[test]
fn builds_are_deterministic() {
    let ds = gaussian(120, 8, 20.0, 11);
    let a = preprocess(&ds, &config(4.0, 42)).unwrap();
    let b = preprocess(&ds, &config(4.0, 42)).unwrap();
    assert_eq!(space_usage(&a), space_usage(&b));
    let queries = gaussian(30, 8, 20.0, 12);
    for q in queries.iter() {
        assert_eq!(a.query(q).unwrap(), b.query(q).unwrap());
    }
}

#[test]
fn three_norm_levels_at_p8() {
    let ds = gaussian(40, 256, 1.0, 13);
    let index = preprocess(&ds, &config(8.0, 13)).unwrap();
    assert_eq!(index.normalized_norm().p_eff, 8.0);
    let root = index.root();
    assert_eq!(root.level(), 3);
    let space = space_usage(&index);
    let levels: std::collections::BTreeSet<u32> = space.per_level.iter().map(|e| e.norm_level).collect();
    assert_eq!(levels.into_iter().collect::<Vec<_>>(), vec![1, 2, 3]);
    assert_eq!(index.bound().levels.len(), 2);
}

#[test]
fn ladder_steps_never_get_worse() {
    let ds = gaussian(200, 16, 30.0, 17);
    let index = preprocess(&ds, &config(4.0, 17)).unwrap();
    for q in gaussian(40, 16, 30.0, 18).iter() {
        let Some(a) = index.query(q).unwrap() else { continue };
        for copy in &a.trace.copies {
            let mut last = copy.base.map(|b| b.1).unwrap_or(f64::INFINITY);
            for step in &copy.steps {
                assert_eq!(step.input_distance, last);
                assert!(step.kept_distance <= step.input_distance);
                if let Some((_, dz)) = step.lifted {
                    assert!(step.kept_distance <= dz);
                }
                last = step.kept_distance;
            }
        }
    }
}

#[test]
fn duplicates_answer_with_the_lowest_id() {
    let ds = Dataset::from_rows(&[[5.0, 5.0], [0.0, 0.0], [5.0, 5.0], [-0.0, 0.0]]).unwrap();
    let index = preprocess(&ds, &config(4.0, 0)).unwrap();
    assert_eq!(index.distinct_points(), 2);
    assert_eq!(index.len(), 4);
    assert_eq!(index.internal_id(2), index.internal_id(0));
    assert_eq!(index.query(&[5.0, 5.0]).unwrap().unwrap().id, 0);
    let a = index.query(&[0.0, 0.0]).unwrap().unwrap();
    assert_eq!((a.id, a.distance), (1, 0.0));
}

#[test]
fn planted_queries_are_answered() {
    for (p, d) in [(4.0, 16), (8.0, 32)] {
        let spec = TrialSpec {
            n: 300,
            d,
            p,
            r: 1.0,
            distribution: Distribution::Gaussian,
            rho: 0.9,
            trials: 60,
            seed: 21,
            scale: 1.0,
            queries_per_build: None,
        };
        let (ds, queries) = make_planted_batch(&spec, spec.trials, 21).unwrap();
        let index = preprocess(&ds, &config(p, 21)).unwrap();
        let c_p = index.bound().c_p;
        let mut ok = 0;
        for pq in &queries {
            if let Some(a) = index.query(&pq.query).unwrap() {
                let (_, nn) = exact_nn(&ds, &pq.query, NormParam::new(p).unwrap()).unwrap();
                assert!(a.distance >= nn);
                assert!((a.distance - lp_dist(ds.point(a.id), &pq.query, p)).abs() < 1e-12);
                if a.distance <= c_p * spec.r {
                    ok += 1;
                }
            }
        }
        assert!(ok * 3 >= queries.len() * 2, "p={p}: {ok}/{}", queries.len());
    }
}

#[test]
fn nns_returns_an_exact_match() {
    let ds = gaussian(50, 8, 1.0, 23);
    let template = config(4.0, 23);
    let q = ds.point(17).to_vec();
    assert_eq!(nns_search(&ds, &template, 1.0, &q).unwrap(), Some(17));
}

#[test]
fn nns_answers_are_approximate_nearest() {
    let ds = gaussian(80, 8, 1.0, 29);
    let template = config(4.0, 29);
    let nns = NnsIndex::build(&ds, &template, 1.0).unwrap();
    let p = NormParam::new(4.0).unwrap();
    for q in gaussian(20, 8, 1.0, 30).iter() {
        let id = nns.search(q).unwrap().unwrap().id;
        let (_, nn) = exact_nn(&ds, q, p).unwrap();
        assert!(lp_dist(ds.point(id), q, 4.0) <= nns.approx() * nn * (1.0 + 1e-9));
    }
}
