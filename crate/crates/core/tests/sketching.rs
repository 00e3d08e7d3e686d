mod common;

use cskit::datagen::{gen_gmm, make_separated_spec};
use cskit::rng;
use cskit::sketch::{
    feature_map, merge_sketches, sample_frequencies, sketch_dataset, sketch_gaussian, FrequencyMatrix, SketchFile,
};
use cskit::Dataset;
use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;

proptest! {
    #[test]
    fn feature_vectors_have_unit_norm(
        x in prop::collection::vec(-5.0f64..5.0, 1..10),
        sigma in 0.01f64..3.0,
        seed in any::<u64>(),
    ) {
        let freqs = sample_frequencies(x.len(), 64, sigma, seed).unwrap();
        let phi = feature_map(&x, &freqs).unwrap();
        let norm = phi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        prop_assert!((norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bandwidth_scales_frequencies_exactly(seed in any::<u64>(), sigma in 0.01f64..3.0) {
        let unit = sample_frequencies(3, 16, 1.0, seed).unwrap();
        let scaled = sample_frequencies(3, 16, sigma, seed).unwrap();
        for (a, b) in unit.omegas().iter().zip(scaled.omegas()) {
            prop_assert_eq!(*a / sigma, *b);
        }
    }
}

fn dataset(n: usize, seed: u64) -> Dataset {
    let spec = make_separated_spec(3, 2, 1).unwrap();
    gen_gmm(&spec, n, seed).unwrap().0
}

#[test]
fn merging_chunks_reproduces_the_full_sketch() {
    let data = dataset(3000, 2);
    let freqs = sample_frequencies(2, 100, 0.2, 9).unwrap();
    let full = sketch_dataset(&data, &freqs).unwrap();
    for chunks in [1usize, 10, 100] {
        let size = data.len().div_ceil(chunks);
        let mut acc: Option<cskit::Sketch> = None;
        for start in (0..data.len()).step_by(size) {
            let part = sketch_dataset(&data.slice_rows(start, (start + size).min(data.len())), &freqs).unwrap();
            acc = Some(match acc {
                None => part,
                Some(a) => merge_sketches(&a, &part).unwrap(),
            });
        }
        let merged = acc.unwrap();
        assert_eq!(merged.count, full.count);
        for (a, b) in merged.values.iter().zip(&full.values) {
            assert!((a - b).norm() < 1e-12, "{chunks} chunks");
        }
    }
}

#[test]
fn sketch_matches_direct_feature_average() {
    let data = dataset(500, 3);
    let freqs = sample_frequencies(2, 20, 0.3, 1).unwrap();
    let z = sketch_dataset(&data, &freqs).unwrap();
    let mut direct = vec![Complex64::new(0.0, 0.0); 20];
    for x in data.rows() {
        for (acc, phi) in direct.iter_mut().zip(feature_map(x, &freqs).unwrap()) {
            *acc += phi / data.len() as f64;
        }
    }
    for (a, b) in z.values.iter().zip(&direct) {
        assert!((a - b).norm() < 1e-14);
    }
}

#[test]
fn gaussian_sketch_matches_monte_carlo() {
    let freqs = sample_frequencies(2, 32, 1.0, 4).unwrap();
    let cov = DMatrix::from_row_slice(2, 2, &[0.04, 0.01, 0.01, 0.02]);
    let c = [0.2, -0.1];
    let closed = sketch_gaussian(&c, &cov, &freqs).unwrap();
    let l = cov.clone().cholesky().unwrap().l();
    let mut g = rng::stream(77);
    let n = 100_000;
    let rows: Vec<f64> = (0..n)
        .flat_map(|_| {
            let e = nalgebra::DVector::from_fn(2, |_, _| g.sample::<f64, _>(StandardNormal));
            let x = &l * e;
            [c[0] + x[0], c[1] + x[1]]
        })
        .collect();
    let z = sketch_dataset(&Dataset::new(n, 2, rows).unwrap(), &freqs).unwrap();
    for (a, b) in closed.iter().zip(&z.values) {
        assert!((a - b).norm() < 1e-2, "{a} vs {b}");
    }
}

#[test]
fn sketch_file_round_trip_is_exact() {
    let data = dataset(100, 4);
    let freqs = sample_frequencies(2, 25, 0.17, 3).unwrap();
    let z = sketch_dataset(&data, &freqs).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.json");
    SketchFile::new(&z, &freqs).unwrap().save(&path).unwrap();
    let (z2, f2): (cskit::Sketch, FrequencyMatrix) = SketchFile::load(&path).unwrap().into_parts().unwrap();
    assert_eq!(z2, z);
    assert_eq!(f2.omegas(), freqs.omegas());
    assert_eq!(f2.id(), freqs.id());
}
