mod common;

use proptest::prelude::*;
use terminal_embed::chd;
use terminal_embed::extension::TerminalMap;
use terminal_embed::{direction_set, BuildConfig, Distribution, ModeChoice, PointSet, TerminalEmbedder};

fn sketch_embedder(x: PointSet, epsilon: f64, constant: f64, seed: u64) -> TerminalEmbedder {
    let cfg = BuildConfig { epsilon, constant, seed, mode: ModeChoice::Sketch, ..BuildConfig::default() };
    TerminalEmbedder::build(x, &cfg).unwrap().0
}

fn queries_near(x: &PointSet, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let noise = common::gaussian_rows(count, x.dim(), seed);
    noise
        .into_iter()
        .enumerate()
        .map(|(j, z)| {
            let base = x.point(j % x.len());
            let scale = [0.01, 0.3, 1.0, 4.0][j % 4];
            base.iter().zip(&z).map(|(b, v)| b + scale * v).collect()
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn anchor_distance_is_preserved(n in 2usize..12, d in 2usize..16, seed in any::<u64>(), c in 0.05f64..1.0) {
        let x = common::random_points(n, d, seed);
        let f = sketch_embedder(x.clone(), 0.3, c, seed);
        for u in queries_near(&x, 24, seed ^ 1) {
            let q = f.embed_query(&u).unwrap();
            let want = common::dist(&u, x.point(q.anchor));
            let got = common::dist(&q.point, &f.terminal_image(q.anchor));
            prop_assert!((got - want).abs() <= 1e-8 * (1.0 + want));
        }
    }

    #[test]
    fn terminals_map_to_padded_sketch(n in 1usize..10, d in 1usize..10, seed in any::<u64>()) {
        let x = common::random_points(n, d, seed);
        let f = sketch_embedder(x.clone(), 0.5, 0.5, seed);
        let pi = f.sketch().unwrap();
        for i in 0..n {
            let image = f.embed_terminal(x.point(i)).unwrap();
            prop_assert_eq!(image.len(), pi.rows() + 1);
            let projected = pi.apply(x.point(i)).unwrap();
            prop_assert_eq!(&image[..pi.rows()], projected.as_slice());
            prop_assert_eq!(image[pi.rows()], 0.0);
        }
    }

    #[test]
    fn measured_bound_holds(n in 3usize..10, d in 4usize..24, seed in any::<u64>()) {
        let x = common::random_points(n, d, seed);
        let f = sketch_embedder(x.clone(), 0.3, 1.0, seed);
        let dirs = direction_set(&x);
        let chd_value = chd::estimate_sampled(f.sketch().unwrap(), dirs.directions(), 2000, seed).unwrap().max_violation;
        for u in queries_near(&x, 24, seed ^ 2) {
            let q = f.embed_query(&u).unwrap();
            let eps_hat = chd_value + q.residual;
            for i in 0..n {
                let d2 = common::dist(&u, x.point(i)).powi(2);
                let e2 = common::dist(&q.point, &f.terminal_image(i)).powi(2);
                prop_assert!((e2 - d2).abs() <= 20.0 * eps_hat * d2 + 1e-8, "pair {}: {} vs {}", i, e2, d2);
            }
        }
    }

    #[test]
    fn ratios_ignore_common_translation(n in 2usize..8, d in 2usize..10, seed in any::<u64>(), shift in -10.0f64..10.0) {
        let x = common::random_points(n, d, seed);
        let offset: Vec<f64> = (0..d).map(|k| shift * (1.0 + k as f64).sin()).collect();
        let moved = PointSet::new(x.iter().map(|p| p.iter().zip(&offset).map(|(a, b)| a + b).collect()).collect()).unwrap();
        let f = sketch_embedder(x.clone(), 0.3, 0.5, seed);
        let g = sketch_embedder(moved.clone(), 0.3, 0.5, seed);
        for u in queries_near(&x, 12, seed ^ 4) {
            let v: Vec<f64> = u.iter().zip(&offset).map(|(a, b)| a + b).collect();
            let (fu, gv) = (f.embed_terminal(&u).unwrap(), g.embed_terminal(&v).unwrap());
            for i in 0..n {
                let r1 = common::dist(&fu, &f.terminal_image(i)) / common::dist(&u, x.point(i));
                let r2 = common::dist(&gv, &g.terminal_image(i)) / common::dist(&v, moved.point(i));
                prop_assert!((r1 - r2).abs() <= 1e-9, "{} vs {}", r1, r2);
            }
        }
    }

    #[test]
    fn scalar_fact(x in 0.0f64..100.0) {
        prop_assert!(1f64.max((x - 1.0).powi(2)) >= (x * x + 1.0) / 5.0);
    }
}

#[test]
fn single_terminal_embeds_by_distance() {
    let x = PointSet::new(vec![vec![0.0, 0.0, 0.0]]).unwrap();
    let f = sketch_embedder(x, 0.3, 1.0, 0);
    for u in common::gaussian_rows(10, 3, 5) {
        let out = f.embed_terminal(&u).unwrap();
        let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((common::dist(&out, &f.terminal_image(0)) - norm).abs() <= 1e-12);
    }
}

#[test]
fn gaussian_sketch_also_satisfies_anchor_isometry() {
    let x = common::random_points(16, 12, 8);
    let cfg = BuildConfig {
        epsilon: 0.3,
        constant: 0.5,
        distribution: Distribution::Gaussian,
        mode: ModeChoice::Sketch,
        ..BuildConfig::default()
    };
    let (f, _) = TerminalEmbedder::build(x.clone(), &cfg).unwrap();
    for u in queries_near(&x, 40, 3) {
        let q = f.embed_query(&u).unwrap();
        let want = common::dist(&u, x.point(q.anchor));
        assert!((common::dist(&q.point, &f.terminal_image(q.anchor)) - want).abs() <= 1e-8 * (1.0 + want));
    }
}
