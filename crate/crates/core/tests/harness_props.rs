mod common;

use proptest::prelude::*;
use terminal_embed::harness::{self, median, ReportConfig, Sampler, ScalingConfig};
use terminal_embed::{plan_dimension, BuildConfig, EfnBaseline, ModeChoice, TerminalEmbedder};

fn config(seed: u64) -> ReportConfig {
    ReportConfig { epsilon: 0.3, m: 0, constant: Some(0.5), seed, map: "terminal".into() }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn ratios_are_finite_and_consistent(n in 2usize..10, d in 2usize..10, seed in any::<u64>()) {
        let x = common::random_points(n, d, seed);
        let cfg = BuildConfig { epsilon: 0.3, constant: 0.5, seed, mode: ModeChoice::Sketch, ..BuildConfig::default() };
        let (f, _) = TerminalEmbedder::build(x.clone(), &cfg).unwrap();
        let batches = harness::sample_suite(&x, &harness::standard_suite(), 4, seed).unwrap();
        let eval = harness::evaluate(&f, &batches, config(seed)).unwrap();
        for pair in &eval.pairs {
            prop_assert!(pair.ratio.is_finite() && pair.ratio > 0.0);
        }
        let r = &eval.report;
        prop_assert!(r.ratios.max_abs_deviation >= r.anchor_isometry_error);
        prop_assert!(r.anchor_isometry_error <= 1e-8);
        prop_assert_eq!(r.histogram.counts.len(), 64);
        prop_assert_eq!(r.histogram.counts.iter().sum::<u64>(), r.ratios.count);
        prop_assert_eq!(r.query_count, 4 * harness::standard_suite().len());
    }
}

#[test]
fn reports_are_byte_identical() {
    let x = common::random_points(9, 6, 4);
    let cfg = BuildConfig { epsilon: 0.3, constant: 0.5, seed: 4, mode: ModeChoice::Sketch, ..BuildConfig::default() };
    let render = || {
        let (f, _) = TerminalEmbedder::build(x.clone(), &cfg).unwrap();
        let batches = harness::sample_suite(&x, &harness::standard_suite(), 6, 4).unwrap();
        serde_json::to_vec_pretty(&harness::evaluate(&f, &batches, config(4)).unwrap().report).unwrap()
    };
    let first = render();
    let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(render);
    assert_eq!(first, render());
    assert_eq!(first, single);
}

#[test]
fn efn_baseline_on_line_instance() {
    let x = terminal_embed::PointSet::new(vec![vec![-1.0], vec![0.0], vec![2.0]]).unwrap();
    let efn = EfnBaseline::new(x.clone(), x.points().to_vec()).unwrap();
    let batch = [harness::QueryBatch { label: "u".into(), queries: vec![vec![1.0]] }];
    let report = harness::evaluate(&efn, &batch, config(0)).unwrap().report;
    assert!((report.ratios.distortion - 10f64.sqrt()).abs() <= 1e-12);
}

#[test]
fn samplers_are_seed_deterministic_and_shaped() {
    let x = common::random_points(7, 3, 2);
    for s in harness::standard_suite().into_iter().chain([Sampler::Shell { radius: 2.0 }]) {
        let a = harness::sample_queries(&x, s, 10, 5).unwrap();
        assert_eq!(a, harness::sample_queries(&x, s, 10, 5).unwrap());
        assert!(a.iter().all(|q| q.len() == 3));
        if s == Sampler::Member {
            assert!(a.iter().all(|q| x.position(q).is_some()));
        }
        if let Sampler::Shell { radius } = s {
            assert!(a.iter().all(|q| x.iter().any(|p| (common::dist(p, q) - radius).abs() < 1e-9)));
        }
    }
}

#[test]
fn scaling_rows_follow_the_plan_and_the_trend() {
    let x = common::random_points(10, 32, 6);
    let cfg = ScalingConfig { chd_samples: 2000, queries_per_sampler: 2, ..ScalingConfig::default() };
    let seeds: Vec<u64> = (0..5).collect();
    let rows = harness::scaling_study(&x, &[0.5], &[1.0, 2.0], &seeds, &cfg).unwrap();
    assert_eq!(rows.len(), 10);
    for row in &rows {
        assert_eq!(row.epsilon, 0.5);
        assert_eq!(row.m, plan_dimension(10, 0.5, row.constant).unwrap().m);
    }
    let med = |c: f64| median(&mut rows.iter().filter(|r| r.constant == c).map(|r| r.chd_violation).collect::<Vec<_>>());
    assert!(med(2.0) <= med(1.0), "median violation rose: {} -> {}", med(1.0), med(2.0));
}
