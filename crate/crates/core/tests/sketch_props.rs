mod common;

use proptest::prelude::*;
use terminal_embed::exact::exact_small_embedding;
use terminal_embed::{apply_sketch, generate_sketch, Distribution, SketchMatrix};

fn distribution() -> impl Strategy<Value = Distribution> {
    prop_oneof![Just(Distribution::Rademacher), Just(Distribution::Gaussian)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn apply_is_linear(
        m in 1usize..12,
        d in 1usize..12,
        dist in distribution(),
        seed in any::<u64>(),
        a in -10.0f64..10.0,
        b in -10.0f64..10.0,
    ) {
        let pi = generate_sketch(m, d, dist, seed).unwrap();
        let xs = common::gaussian_rows(2, d, seed ^ 7);
        let combo: Vec<f64> = xs[0].iter().zip(&xs[1]).map(|(x, y)| a * x + b * y).collect();
        let lhs = apply_sketch(&pi, &combo).unwrap();
        let (px, py) = (apply_sketch(&pi, &xs[0]).unwrap(), apply_sketch(&pi, &xs[1]).unwrap());
        let rhs: Vec<f64> = px.iter().zip(&py).map(|(x, y)| a * x + b * y).collect();
        let scale = 1.0 + rhs.iter().map(|v| v * v).sum::<f64>().sqrt();
        prop_assert!(common::dist(&lhs, &rhs) <= 1e-10 * scale);
    }

    #[test]
    fn serialization_round_trip_is_bit_exact(m in 1usize..8, d in 1usize..8, dist in distribution(), seed in any::<u64>()) {
        let pi = generate_sketch(m, d, dist, seed).unwrap();
        let mut buf = Vec::new();
        pi.write_to(&mut buf, Some(4.0)).unwrap();
        let (back, header) = SketchMatrix::read_from(&buf[..], "mem").unwrap();
        prop_assert_eq!(header.constant, Some(4.0));
        let x = common::gaussian_rows(1, d, seed).remove(0);
        let (a, b) = (pi.apply(&x).unwrap(), back.apply(&x).unwrap());
        prop_assert!(a.iter().zip(&b).all(|(p, q)| p.to_bits() == q.to_bits()));
    }

    #[test]
    fn exact_embedding_preserves_all_distances(n in 1usize..=6, d in 1usize..=8, seed in any::<u64>()) {
        let x = common::random_points(n, d, seed);
        let e = exact_small_embedding(&x);
        let images: Vec<Vec<f64>> = x.iter().map(|p| e.map(p).unwrap()).collect();
        for u in common::gaussian_rows(100, d, seed ^ 3) {
            let fu = e.map(&u).unwrap();
            for (p, fp) in x.iter().zip(&images) {
                prop_assert!((common::dist(&fu, fp) - common::dist(&u, p)).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn exact_basis_is_orthonormal(n in 1usize..=6, d in 1usize..=8, seed in any::<u64>()) {
        let e = exact_small_embedding(&common::random_points(n, d, seed));
        let basis = e.basis();
        prop_assert!(basis.len() <= (n - 1).min(d));
        for (i, a) in basis.iter().enumerate() {
            for (j, b) in basis.iter().enumerate() {
                let g: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                prop_assert!((g - want).abs() <= 1e-10);
            }
        }
    }
}

#[test]
fn norms_are_unbiased_over_seeds() {
    let d = 20;
    let x = common::gaussian_rows(1, d, 99).remove(0);
    let target: f64 = x.iter().map(|v| v * v).sum();
    for dist in [Distribution::Rademacher, Distribution::Gaussian] {
        for m in [4, 16] {
            let mean = (0..200u64)
                .map(|s| apply_sketch(&generate_sketch(m, d, dist, s).unwrap(), &x).unwrap().iter().map(|v| v * v).sum::<f64>())
                .sum::<f64>()
                / 200.0;
            assert!((mean / target - 1.0).abs() <= 0.1, "{dist:?} m={m}: mean {mean} vs {target}");
        }
    }
}

#[test]
fn low_rank_sets_drop_dependent_directions() {
    // Collinear points span a line regardless of the ambient dimension.
    let x = terminal_embed::PointSet::new((0..5).map(|i| vec![i as f64, 2.0 * i as f64, -(i as f64)]).collect()).unwrap();
    let e = exact_small_embedding(&x);
    assert_eq!(e.rank(), 1);
    assert_eq!(e.output_dim(), 2);
}
