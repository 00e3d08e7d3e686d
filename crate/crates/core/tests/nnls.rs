mod common;

use common::nnls_exhaustive;
use cskit::decoders::{nnls, nnls_weights, stack_atoms};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use proptest::prelude::*;

fn kkt_violation(a: &DMatrix<f64>, b: &DVector<f64>, x: &DVector<f64>) -> f64 {
    // gradient of |Ax - b|^2 / 2
    let grad = a.tr_mul(&(a * x - b));
    let mut worst = 0.0f64;
    for i in 0..x.len() {
        worst = worst.max((-x[i]).max(0.0));
        worst = worst.max((-grad[i]).max(0.0));
        worst = worst.max((x[i] * grad[i]).abs());
    }
    worst
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn kkt_and_exhaustive_optimum(
        n in 1usize..=6,
        vals in prop::collection::vec(-1.0f64..1.0, 32 * 7),
    ) {
        let rows = 32;
        let a = DMatrix::from_fn(rows, n, |i, j| vals[j * rows + i]);
        let b = DVector::from_fn(rows, |i, _| vals[6 * rows + i]);
        let x = nnls(&a, &b);
        prop_assert!(kkt_violation(&a, &b, &x) <= 1e-8);
        let (_, best) = nnls_exhaustive(&a, &b);
        let obj = (&a * &x - &b).norm_squared();
        prop_assert!((obj - best).abs() <= 1e-8, "{obj} vs {best}");
    }
}

#[test]
fn complex_atoms_stack_real_and_imaginary_parts() {
    let atoms = vec![
        vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)],
        vec![Complex64::new(0.0, 1.0), Complex64::new(1.0, 0.0)],
    ];
    let a = stack_atoms(&atoms);
    assert_eq!(a.shape(), (4, 2));
    assert_eq!(a.column(0).as_slice(), &[1.0, 0.0, 0.0, 1.0]);
    let z: Vec<Complex64> = atoms[0].iter().zip(&atoms[1]).map(|(p, q)| p * 0.3 + q * 0.7).collect();
    let w = nnls_weights(&z, &atoms);
    assert!((w[0] - 0.3).abs() < 1e-12 && (w[1] - 0.7).abs() < 1e-12);
}

#[test]
fn rank_deficient_problem_reaches_the_optimum() {
    let a = DMatrix::from_row_slice(3, 3, &[1.0, 1.0, 2.0, 0.0, 0.0, 0.0, 1.0, 1.0, 2.0]);
    let b = DVector::from_vec(vec![1.0, 1.0, 1.0]);
    let x = nnls(&a, &b);
    let (_, best) = nnls_exhaustive(&a, &b);
    assert!(((&a * &x - &b).norm_squared() - best).abs() < 1e-10);
    assert!(kkt_violation(&a, &b, &x) < 1e-8);
}
