mod common;

use proptest::prelude::*;
use terminal_embed::chd::{self, HullPoint};
use terminal_embed::harness::median;
use terminal_embed::{direction_set, generate_sketch, Distribution, SketchMatrix};

fn unit_rows(t: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
    common::gaussian_rows(t, d, seed)
        .into_iter()
        .map(|v| {
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.into_iter().map(|x| x / n).collect()
        })
        .collect()
}

fn simplex_weights(t: usize, seed: u64) -> Vec<f64> {
    let raw: Vec<f64> = common::gaussian_rows(1, t, seed).remove(0).iter().map(|v| v.abs() + 1e-3).collect();
    let total: f64 = raw.iter().sum();
    let mut w: Vec<f64> = raw.iter().map(|v| v / total).collect();
    let drift: f64 = 1.0 - w.iter().sum::<f64>();
    w[0] += drift;
    w
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn violation_is_scale_covariant(t in 1usize..6, d in 1usize..6, m in 1usize..6, seed in any::<u64>(), c in 0.1f64..10.0) {
        let dirs = unit_rows(t, d, seed);
        let pi = generate_sketch(m, d, Distribution::Gaussian, seed).unwrap();
        let p = HullPoint::new(&dirs, simplex_weights(t, seed ^ 5)).unwrap();
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let img = norm(&pi.apply(p.vector()).unwrap());
        let scaled = norm(&pi.scaled(c).apply(p.vector()).unwrap());
        prop_assert!((scaled - c * img).abs() <= 1e-10 * (1.0 + c * img));
        // Two ways to the same violation: via the estimator API and by hand.
        let by_hand = (norm(&pi.scaled(c).apply(p.vector()).unwrap()) - norm(p.vector())).abs();
        prop_assert!((chd::violation(&pi.scaled(c), &p).unwrap() - by_hand).abs() <= 1e-10);
    }

    #[test]
    fn mirrored_sets_give_identical_results(n in 2usize..6, d in 1usize..5, m in 1usize..5, seed in any::<u64>()) {
        let x = common::random_points(n, d, seed);
        let dirs = direction_set(&x);
        let mirrored: Vec<Vec<f64>> = dirs.directions().iter().map(|v| v.iter().map(|c| -c).collect()).collect();
        let pi = generate_sketch(m, d, Distribution::Rademacher, seed).unwrap();
        let w = simplex_weights(dirs.len(), seed ^ 9);
        let a = chd::violation(&pi, &HullPoint::new(dirs.directions(), w.clone()).unwrap()).unwrap();
        let b = chd::violation(&pi, &HullPoint::new(&mirrored, w).unwrap()).unwrap();
        prop_assert_eq!(a.to_bits(), b.to_bits());
        let sa = chd::estimate_sampled(&pi, dirs.directions(), 300, seed).unwrap();
        let sb = chd::estimate_sampled(&pi, &mirrored, 300, seed).unwrap();
        prop_assert_eq!(sa.max_violation.to_bits(), sb.max_violation.to_bits());
        prop_assert_eq!(sa.witness.weights(), sb.witness.weights());
    }

    #[test]
    fn local_ascent_never_decreases(t in 2usize..7, d in 1usize..5, m in 1usize..5, seed in any::<u64>()) {
        let dirs = unit_rows(t, d, seed);
        let pi = generate_sketch(m, d, Distribution::Gaussian, seed).unwrap();
        let start = HullPoint::new(&dirs, simplex_weights(t, seed ^ 2)).unwrap();
        let before = chd::violation(&pi, &start).unwrap();
        let after = chd::refine_local(&pi, &dirs, &start, 50).unwrap();
        prop_assert!(after.max_violation >= before);
        let recomputed = chd::violation(&pi, &after.witness).unwrap();
        prop_assert!((recomputed - after.max_violation).abs() <= 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn grid_certificate_sandwiches_fine_grid(t in 1usize..=3, d in 1usize..4, m in 1usize..4, seed in any::<u64>()) {
        let dirs = unit_rows(t, d, seed);
        let pi = generate_sketch(m, d, Distribution::Gaussian, seed).unwrap();
        let coarse = chd::certify_grid(&pi, &dirs, 0.1).unwrap();
        let fine = chd::certify_grid(&pi, &dirs, 1e-3).unwrap();
        // The coarse grid is a subset of the fine one.
        prop_assert!(fine.max_violation >= coarse.max_violation - 1e-12);
        prop_assert!(coarse.certified_bound.unwrap() >= fine.max_violation - 1e-12);
        prop_assert!(fine.certified_bound.unwrap() >= fine.max_violation);
        let refined = chd::estimate_refined(&pi, &dirs, 500, seed, 200).unwrap();
        prop_assert!(refined.max_violation <= fine.certified_bound.unwrap() + 1e-12);
    }
}

#[test]
fn identity_has_no_violation() {
    let x = common::random_points(6, 4, 1);
    let dirs = direction_set(&x);
    let est = chd::estimate_refined(&SketchMatrix::identity(4), dirs.directions(), 1000, 3, 50).unwrap();
    assert!(est.max_violation <= 1e-12);
}

#[test]
fn median_violation_shrinks_with_m() {
    let d = 48;
    let dirs = direction_set(&common::random_points(10, d, 17));
    let mut medians = Vec::new();
    for m in [32, 128, 512] {
        let mut values: Vec<f64> = (0..5u64)
            .map(|s| {
                let pi = generate_sketch(m, d, Distribution::Rademacher, 100 + s).unwrap();
                chd::estimate_sampled(&pi, dirs.directions(), 4000, s).unwrap().max_violation
            })
            .collect();
        medians.push(median(&mut values));
    }
    assert!(medians.windows(2).all(|w| w[1] <= w[0]), "medians {medians:?}");
}

#[test]
fn grid_rejects_large_sets() {
    let dirs = unit_rows(7, 2, 0);
    let pi = SketchMatrix::identity(2);
    assert!(matches!(chd::certify_grid(&pi, &dirs, 0.1), Err(terminal_embed::Error::TooManyDirections { .. })));
}
