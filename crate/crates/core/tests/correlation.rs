mod common;

use common::{corr_direct, fd_gradient, fd_jacobian, kde_direct};
use cskit::correlation::{corr_gradient, corr_hessian, corr_value, kde_oracle, CorrelationFn, SmoothField};
use cskit::datagen::{gen_gmm, make_separated_spec};
use cskit::rng;
use cskit::sketch::{sample_frequencies, sketch_dataset};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::Rng;

fn random_residual(m: usize, seed: u64) -> Vec<Complex64> {
    let mut g = rng::stream(seed);
    (0..m)
        .map(|_| Complex64::new(g.random::<f64>() - 0.5, g.random::<f64>() - 0.5))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn value_matches_complex_inner_product(
        x in prop::collection::vec(-1.0f64..1.0, 3),
        seed in 0u64..1000,
        sigma in 0.05f64..1.0,
    ) {
        let freqs = sample_frequencies(3, 40, sigma, seed).unwrap();
        let r = random_residual(40, seed + 1);
        let f = CorrelationFn::new(&r, &freqs).unwrap();
        let expect = corr_direct(&r, &freqs, &x);
        prop_assert!((corr_value(&f, &x).unwrap() - expect).abs() < 1e-12);
        let (v, g) = f.value_and_gradient(&x);
        let (v2, g2, _) = f.value_gradient_hessian(&x);
        prop_assert!((v - expect).abs() < 1e-12 && (v2 - expect).abs() < 1e-12);
        for (a, b) in g.iter().zip(&g2) {
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn derivatives_match_finite_differences(
        x in prop::collection::vec(-1.0f64..1.0, 2),
        seed in 0u64..1000,
    ) {
        let freqs = sample_frequencies(2, 30, 0.4, seed).unwrap();
        let r = random_residual(30, seed + 7);
        let f = CorrelationFn::new(&r, &freqs).unwrap();
        let g = corr_gradient(&f, &x).unwrap();
        let fd = fd_gradient(|p| corr_direct(&r, &freqs, p), &x, 1e-6);
        let scale = g.iter().chain(&fd).fold(1e-3f64, |a, b| a.max(b.abs()));
        for (a, b) in g.iter().zip(&fd) {
            prop_assert!((a - b).abs() <= 1e-6 * scale, "{a} vs {b}");
        }
        let h = corr_hessian(&f, &x).unwrap();
        let fdh = fd_jacobian(|p| corr_gradient(&f, p).unwrap(), &x, 1e-5);
        let hscale = h.iter().chain(fdh.iter()).fold(1e-3f64, |a, b| a.max(b.abs()));
        prop_assert!((&h - &fdh).amax() <= 1e-5 * hscale);
        prop_assert_eq!(h.clone(), h.transpose());
    }
}

#[test]
fn kde_oracle_matches_direct_sum() {
    let spec = make_separated_spec(3, 2, 4).unwrap();
    let (data, _) = gen_gmm(&spec, 200, 1).unwrap();
    for x in [[0.0, 0.0], [0.4, -0.2], [-0.9, 0.9]] {
        let a = kde_oracle(&x, &data, 0.15).unwrap();
        let b = kde_direct(&x, &data, 0.15);
        assert!((a - b).abs() < 1e-14);
    }
}

/// Averaging `f_{z_X}` over independent frequency draws approaches the KDE.
#[test]
fn sketch_correlation_is_unbiased_for_the_kde() {
    let spec = make_separated_spec(3, 2, 2).unwrap();
    let (data, _) = gen_gmm(&spec, 300, 5).unwrap();
    let sigma = 0.2;
    let probes = [[0.0, 0.0], [0.3, 0.3], [-0.5, 0.1]];
    let reps = 100;
    let mut samples = vec![Vec::with_capacity(reps); probes.len()];
    for rep in 0..reps {
        let freqs = sample_frequencies(2, 200, sigma, 1000 + rep as u64).unwrap();
        let z = sketch_dataset(&data, &freqs).unwrap();
        let f = CorrelationFn::new(&z.values, &freqs).unwrap();
        for (p, s) in probes.iter().zip(samples.iter_mut()) {
            s.push(corr_value(&f, p).unwrap());
        }
    }
    for (p, s) in probes.iter().zip(&samples) {
        let n = s.len() as f64;
        let mean = s.iter().sum::<f64>() / n;
        let var = s.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let se = (var / n).sqrt();
        let target = kde_direct(p, &data, sigma);
        assert!((mean - target).abs() <= 4.0 * se, "{p:?}: {mean} vs {target} (se {se})");
    }
}
