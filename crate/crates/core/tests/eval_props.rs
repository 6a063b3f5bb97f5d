use fed_core::eval::{correlate, krocc, logistic, logistic_fit, plcc, srocc};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn brute_tau_b(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len();
    let (mut conc, mut disc, mut tx, mut ty) = (0i64, 0i64, 0i64, 0i64);
    for i in 0..n {
        for j in i + 1..n {
            let dx = x[i] - x[j];
            let dy = y[i] - y[j];
            if dx == 0.0 && dy == 0.0 {
                tx += 1;
                ty += 1;
            } else if dx == 0.0 {
                tx += 1;
            } else if dy == 0.0 {
                ty += 1;
            } else if dx * dy > 0.0 {
                conc += 1;
            } else {
                disc += 1;
            }
        }
    }
    let n0 = (n * (n - 1) / 2) as f64;
    (conc - disc) as f64 / ((n0 - tx as f64) * (n0 - ty as f64)).sqrt()
}

fn brute_spearman(x: &[f64], y: &[f64]) -> f64 {
    let rank = |v: &[f64]| -> Vec<f64> {
        v.iter()
            .map(|a| {
                let less = v.iter().filter(|b| *b < a).count() as f64;
                let eq = v.iter().filter(|b| *b == a).count() as f64;
                less + (eq + 1.0) / 2.0
            })
            .collect()
    };
    let (rx, ry) = (rank(x), rank(y));
    let n = x.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let sxy: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    sxy / (sxx * syy).sqrt()
}

#[test]
fn logistic_recovers_exact_parameters() {
    let truth = [100.0, 0.0, 50.0, 10.0];
    let xs: Vec<f64> = (0..30).map(|i| i as f64 * 100.0 / 29.0).collect();
    let ys: Vec<f64> = xs.iter().map(|&x| logistic(x, &truth)).collect();
    let fit = logistic_fit(&xs, &ys).unwrap();
    for (got, want) in fit.beta.iter().zip(truth) {
        let rel = if want == 0.0 { got.abs() } else { ((got - want) / want).abs() };
        assert!(rel < 1e-4, "{:?}", fit.beta);
    }
    assert!(fit.sse < 1e-12);
    assert!(fit.converged);
}

#[test]
fn krocc_matches_brute_force_with_ties() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..200 {
        let n = rng.random_range(2..25);
        // coarse values so ties occur
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(0..6) as f64).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(0..6) as f64).collect();
        let want = brute_tau_b(&x, &y);
        match krocc(&x, &y) {
            Ok(t) => assert!((t - want).abs() < 1e-12, "{t} vs {want}"),
            Err(_) => assert!(want.is_nan()),
        }
    }
}

proptest! {
    #[test]
    fn rank_correlations_invariant_under_monotone_maps(
        pairs in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 3..40)
    ) {
        let x: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let y: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        let ex: Vec<f64> = x.iter().map(|v| v.exp()).collect();
        if let (Ok(a), Ok(b)) = (srocc(&x, &y), srocc(&ex, &y)) {
            prop_assert!((a - b).abs() < 1e-12);
        }
        if let (Ok(a), Ok(b)) = (krocc(&x, &y), krocc(&ex, &y)) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn small_sets_match_definitions(
        pairs in prop::collection::vec((0u8..4, 0u8..4), 2..=10)
    ) {
        let x: Vec<f64> = pairs.iter().map(|p| p.0 as f64).collect();
        let y: Vec<f64> = pairs.iter().map(|p| p.1 as f64).collect();
        let bt = brute_tau_b(&x, &y);
        if bt.is_finite() {
            prop_assert!((krocc(&x, &y).unwrap() - bt).abs() < 1e-12);
            prop_assert!((srocc(&x, &y).unwrap() - brute_spearman(&x, &y)).abs() < 1e-12);
        }
    }
}

#[test]
fn plcc_after_fit_is_affine_invariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let xs: Vec<f64> = (0..40).map(|_| rng.random_range(0.0..10.0)).collect();
    let ys: Vec<f64> = xs
        .iter()
        .map(|&x| 80.0 / (1.0 + (-(x - 5.0)).exp()) + 10.0 + rng.random_range(-6.0..6.0))
        .collect();
    let base = {
        let f = logistic_fit(&xs, &ys).unwrap();
        plcc(&xs, &ys, &f).unwrap()
    };
    for (a, b) in [(3.0, 7.0), (0.01, -2.0), (-2.5, 100.0)] {
        let t: Vec<f64> = xs.iter().map(|x| a * x + b).collect();
        let f = logistic_fit(&t, &ys).unwrap();
        let p = plcc(&t, &ys, &f).unwrap();
        assert!((p - base).abs() < 1e-9, "{a},{b}: {p} vs {base}");
    }
}

#[test]
fn correlate_bundles_all_measures() {
    let xs: Vec<f64> = (0..10).map(|i| i as f64).collect();
    let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x + 1.0).collect();
    let c = correlate(&xs, &ys).unwrap();
    assert_eq!(c.n, 10);
    assert!((c.srocc - 1.0).abs() < 1e-15 && (c.krocc - 1.0).abs() < 1e-15);
    assert!(c.plcc > 0.999 && c.rmse < 0.5);
}
