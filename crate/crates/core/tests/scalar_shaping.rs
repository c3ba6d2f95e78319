use cfrelay_core::scalar::{lloyd_max, ScalarQuantizer};
use cfrelay_core::tcq::{assign_labels, viterbi_quantize, GeneratorMatrix, Trellis};
use cfrelay_core::Point;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn gaussian(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
}

/// Lloyd-Max fixed point for the unit Gaussian by trapezoidal integration
/// on a fine grid; returns the MSE.
fn lloyd_max_by_integration(levels: usize) -> f64 {
    const GRID: usize = 200_000;
    const HALF: f64 = 9.0;
    let h = 2.0 * HALF / GRID as f64;
    let xs: Vec<f64> = (0..=GRID).map(|i| -HALF + i as f64 * h).collect();
    let pdf: Vec<f64> = xs.iter().map(|&x| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()).collect();
    let mut points: Vec<f64> = (0..levels).map(|i| -1.5 + 3.0 * i as f64 / (levels - 1) as f64).collect();
    let mut mse = f64::INFINITY;
    for _ in 0..2000 {
        let bounds: Vec<f64> = points.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        let mut m0 = vec![0.0; levels];
        let mut m1 = vec![0.0; levels];
        let mut err = 0.0;
        for (i, (&x, &p)) in xs.iter().zip(&pdf).enumerate() {
            let w = if i == 0 || i == GRID { 0.5 * h } else { h };
            let c = bounds.partition_point(|&b| b < x);
            m0[c] += w * p;
            m1[c] += w * p * x;
            err += w * p * (x - points[c]).powi(2);
        }
        mse = err;
        let next: Vec<f64> = m1.iter().zip(&m0).map(|(a, b)| a / b).collect();
        let moved = next.iter().zip(&points).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        points = next;
        if moved < 1e-12 {
            break;
        }
    }
    mse
}

#[test]
fn four_level_lloyd_max_matches_integration_oracle() {
    let oracle = lloyd_max_by_integration(4);
    assert!((oracle - 0.1175).abs() < 5e-4, "oracle {oracle}");
    let q = lloyd_max(&gaussian(200_000, 1), 4, 1e-9, 500).unwrap();
    let mse = q.mse(&gaussian(200_000, 2));
    assert!((mse - oracle).abs() < 0.05 * oracle, "{mse} vs {oracle}");
    // symmetric design
    assert!(q.boundaries[1].abs() < 0.02);
    assert!((q.points[0] + q.points[3]).abs() < 0.03);
}

#[test]
fn lloyd_max_beats_best_uniform_quantizer() {
    let train = gaussian(100_000, 3);
    let lm = lloyd_max(&train, 4, 1e-9, 500).unwrap().mse(&train);
    let best_uniform = (50..150)
        .map(|i| ScalarQuantizer::uniform(4, i as f64 / 100.0).mse(&train))
        .fold(f64::INFINITY, f64::min);
    assert!(lm <= best_uniform + 1e-12, "{lm} vs {best_uniform}");
}

#[test]
fn quantize_round_trip_and_ties() {
    let q = lloyd_max(&gaussian(20_000, 4), 4, 1e-9, 500).unwrap();
    let (idx, rec) = q.quantize(&q.points);
    assert_eq!(idx, vec![0, 1, 2, 3]);
    assert_eq!(rec, q.points);
    assert_eq!(q.index(q.boundaries[1]), 1);
    assert_eq!(q.index_bits(&[2, 1]), vec![0, 1, 1, 0]);
}

/// Mean squared error of 8-state TCQ at 2 bits/sample with the 8-level
/// Lloyd-Max codebook.
fn tcq_mse(train: &[f64], test: &[f64]) -> f64 {
    let trellis = Trellis::build(&GeneratorMatrix::scalar_default()).unwrap();
    let lm8 = lloyd_max(train, 8, 1e-9, 500).unwrap();
    let cb: Vec<Point> = lm8.points.iter().map(|&v| Point::new(v, 0.0)).collect();
    let labeled = assign_labels(&trellis, &cb).unwrap();
    let y: Vec<Point> = test.iter().map(|&v| Point::new(v, 0.0)).collect();
    let d: f64 = y.chunks(10_000).map(|c| viterbi_quantize(&trellis, &labeled, c).unwrap().distortion).sum();
    d / y.len() as f64
}

#[test]
fn trellis_quantizer_has_shaping_gain_over_lloyd_max() {
    let train = gaussian(200_000, 5);
    let test = gaussian(200_000, 6);
    let lm = lloyd_max(&train, 4, 1e-9, 500).unwrap().mse(&test);
    let tcq = tcq_mse(&train, &test);
    let gain_db = 10.0 * (lm / tcq).log10();
    assert!(gain_db >= 0.3, "gain {gain_db} dB");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn lloyd_max_invariants(seed in any::<u64>(), levels in 2usize..9) {
        let train = gaussian(10_000, seed);
        let q = lloyd_max(&train, levels, 1e-9, 200).unwrap();
        prop_assert!(q.points.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(q.boundaries.windows(2).all(|w| w[0] < w[1]));
        for (b, w) in q.boundaries.iter().zip(q.points.windows(2)) {
            prop_assert!(w[0] < *b && *b < w[1]);
        }
        prop_assert!(q.mse_history.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
    }

    #[test]
    fn nearest_cell_assignment(y in -5.0f64..5.0) {
        let q = ScalarQuantizer::uniform(4, 1.0);
        let i = q.index(y);
        let d = (y - q.points[i]).abs();
        prop_assert!(q.points.iter().all(|&p| d <= (y - p).abs() + 1e-12));
    }
}
