use std::sync::Arc;

use nnlsif::dataset::{read_csv, write_csv, ObservationalDataset, TwoSampleData};
use nnlsif::linalg::SymMatrix;
use nnlsif::lsif::{self, solve_ridge, PolynomialBasis};
use nnlsif::neighbors::{
    brute_within, matched_times_direct, matched_times_two_sample, matching_structures, KdTree, Metric,
};
use nnlsif::points::Points;
use nnlsif::{ate_matching, ate_weight_form, Arm};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn points(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> Points<f64> {
    Points::new((0..n * dim).map(|_| rng.random::<f64>()).collect(), dim).unwrap()
}

fn observational(seed: u64, n: usize, dim: usize, min_arm: usize) -> Option<ObservationalDataset<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = points(&mut rng, n, dim);
    let flags: Vec<u8> = (0..n).map(|_| u8::from(rng.random::<bool>())).collect();
    let y: Vec<f64> = x.rows().map(|r| r[0] * 2.0 + rng.random::<f64>()).collect();
    let treated = flags.iter().filter(|&&f| f == 1).count();
    if treated < min_arm || n - treated < min_arm {
        return None;
    }
    Some(ObservationalDataset::from_flags(x, &flags, y).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn range_queries_match_brute_force(seed in any::<u64>(), n in 1usize..300, dim in 1usize..5, r in 0.0f64..0.6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = points(&mut rng, n, dim);
        let metric = Metric::Euclidean;
        let tree = KdTree::build(&p, &metric);
        let q: Vec<f64> = (0..dim).map(|_| rng.random()).collect();
        prop_assert_eq!(tree.within(&p, &metric, &q, r * r), brute_within(&p, &metric, &q, r * r));
    }

    #[test]
    fn matched_times_are_conserved(seed in any::<u64>(), n in 4usize..200, dim in 1usize..4, m in 1usize..5) {
        let Some(ds) = observational(seed, n, dim, m) else { return Ok(()) };
        let s = matching_structures(&ds, &Metric::Euclidean, m).unwrap();
        for arm in [Arm::Treated, Arm::Control] {
            let total: usize = ds.arm_indices(arm).iter().map(|&i| s.count(i)).sum();
            prop_assert_eq!(total, m * ds.arm_size(arm.opposite()));
        }
    }

    #[test]
    fn counts_grow_with_m(seed in any::<u64>(), n in 6usize..200, dim in 1usize..4, m in 1usize..4) {
        let Some(ds) = observational(seed, n, dim, m + 1) else { return Ok(()) };
        let small = matching_structures(&ds, &Metric::Euclidean, m).unwrap();
        let large = matching_structures(&ds, &Metric::Euclidean, m + 1).unwrap();
        for i in 0..ds.len() {
            prop_assert!(small.count(i) <= large.count(i));
        }
    }

    #[test]
    fn catchment_counts_equal_direct_counts(seed in any::<u64>(), n0 in 1usize..150, n1 in 1usize..150, dim in 1usize..4, m in 1usize..6) {
        prop_assume!(m <= n0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = TwoSampleData::new(points(&mut rng, n0, dim), points(&mut rng, n1, dim)).unwrap();
        let metric = Metric::Euclidean;
        prop_assert_eq!(matched_times_two_sample(&data, &metric, m).unwrap(), matched_times_direct(&data, &metric, m).unwrap());
    }

    #[test]
    fn csv_round_trip_is_exact(seed in any::<u64>(), n in 2usize..60, dim in 1usize..4) {
        let Some(ds) = observational(seed, n, dim, 1) else { return Ok(()) };
        let mut buf = Vec::new();
        write_csv(&ds, &mut buf).unwrap();
        let back: ObservationalDataset<f64> = read_csv(buf.as_slice()).unwrap();
        prop_assert_eq!(back, ds);
    }

    #[test]
    fn matching_is_permutation_invariant(seed in any::<u64>(), n in 4usize..150, dim in 1usize..4, m in 1usize..4) {
        let Some(ds) = observational(seed, n, dim, m) else { return Ok(()) };
        let mut order: Vec<usize> = (0..n).collect();
        order.reverse();
        order.rotate_left(seed as usize % n);
        let shuffled = ds.permuted(&order).unwrap();
        let a = ate_matching(&ds, &Metric::Euclidean, m).unwrap().tau;
        let b = ate_matching(&shuffled, &Metric::Euclidean, m).unwrap().tau;
        prop_assert!((a - b).abs() <= 1e-12, "{} vs {}", a, b);
    }

    #[test]
    fn outcome_shift_and_scale(seed in any::<u64>(), n in 4usize..150, m in 1usize..4, shift in -5.0f64..5.0, scale in 0.1f64..10.0) {
        let Some(ds) = observational(seed, n, 2, m) else { return Ok(()) };
        let metric = Metric::Euclidean;
        let base = ate_weight_form(&ds, &metric, m).unwrap().tau;
        let shifted = ds.with_outcome(ds.outcome().iter().map(|y| y + shift).collect()).unwrap();
        let scaled = ds.with_outcome(ds.outcome().iter().map(|y| y * scale).collect()).unwrap();
        prop_assert!((ate_weight_form(&shifted, &metric, m).unwrap().tau - base).abs() <= 1e-11);
        prop_assert!((ate_weight_form(&scaled, &metric, m).unwrap().tau - scale * base).abs() <= 1e-11 * scale.max(1.0));
    }

    #[test]
    fn ridge_solution_is_linear_in_h(seed in any::<u64>(), b in 1usize..6, a in -4.0f64..4.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut h = SymMatrix::zeros(b);
        for _ in 0..b + 2 {
            let v: Vec<f64> = (0..b).map(|_| rng.random::<f64>() - 0.5).collect();
            h.add_outer(&v, 1.0);
        }
        let hv: Vec<f64> = (0..b).map(|_| rng.random::<f64>()).collect();
        let scaled: Vec<f64> = hv.iter().map(|v| a * v).collect();
        let x = solve_ridge(&h, &hv, 0.1).unwrap();
        let y = solve_ridge(&h, &scaled, 0.1).unwrap();
        for (u, v) in x.iter().zip(&y) {
            prop_assert!((a * u - v).abs() <= 1e-10 * (1.0 + u.abs()));
        }
    }

    #[test]
    fn fitted_lsif_minimizes_the_objective(seed in any::<u64>(), n0 in 10usize..100, n1 in 10usize..100, degree in 0u32..3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = TwoSampleData::new(points(&mut rng, n0, 1), points(&mut rng, n1, 1)).unwrap();
        let fit = lsif::fit(&data, Arc::new(PolynomialBasis::new(1, degree).unwrap()), 1e-3).unwrap();
        let best = fit.objective(&fit.beta);
        for _ in 0..10 {
            let other: Vec<f64> = fit.beta.iter().map(|b| b + rng.random::<f64>() - 0.5).collect();
            prop_assert!(fit.objective(&other) >= best);
        }
    }
}

#[test]
fn single_precision_matches_double() {
    let ds = observational(9, 120, 2, 3).unwrap();
    let x32 = Points::new(ds.covariates().as_slice().iter().map(|&v| v as f32).collect(), 2).unwrap();
    let flags: Vec<u8> = ds.treatment().iter().map(|a| a.flag()).collect();
    let y32: Vec<f32> = ds.outcome().iter().map(|&v| v as f32).collect();
    let ds32 = ObservationalDataset::from_flags(x32, &flags, y32).unwrap();
    let t64 = ate_matching(&ds, &Metric::Euclidean, 3).unwrap().tau;
    let t32 = ate_matching(&ds32, &Metric::Euclidean, 3).unwrap().tau;
    assert!((f64::from(t32) - t64).abs() < 1e-4, "{t32} vs {t64}");
}
