//! Local covariance estimation from the curvature of `log f`.
//!
//! Near a well-separated cluster `N(c, S)`, the kernel mean embedding behaves
//! like `exp(-(x - c)^T (S + sigma^2 I)^{-1} (x - c) / 2)`, so the Hessian `H` of
//! `-log f` at `c` satisfies `H^{-1} - sigma^2 I = S`.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::correlation::SmoothField;
use crate::linalg;

/// Below this correlation value `log f` is not estimated.
pub const V_FLOOR: f64 = 1e-6;
const MAX_CONDITION: f64 = 1e12;
const EPS_PD_REL: f64 = 1e-10;

/// Covariance estimate at `c`, or the all-zero matrix when the estimate is not
/// strictly positive definite (the caller then uses a Dirac).
pub fn estimate_sigma<F: SmoothField + ?Sized>(f: &F, c: &[f64], sigma: f64) -> DMatrix<f64> {
    let d = c.len();
    let zero = DMatrix::zeros(d, d);
    let (v, g, hess) = f.value_gradient_hessian(c);
    if !(v > V_FLOOR) {
        return zero;
    }
    // Hessian of -log f: -(hess f - g g^T) / f^2
    let mut h = hess * v;
    for p in 0..d {
        for q in 0..d {
            h[(p, q)] -= g[p] * g[q];
        }
    }
    let h = linalg::symmetrize(&(h * (-1.0 / (v * v))));
    if h.iter().any(|x| !x.is_finite()) {
        return zero;
    }
    let eig = SymmetricEigen::new(h);
    let lo = eig.eigenvalues.min();
    let hi = eig.eigenvalues.max();
    if !(lo > 0.0) || hi / lo > MAX_CONDITION {
        return zero;
    }
    let inv: Vec<f64> = eig.eigenvalues.iter().map(|l| 1.0 / l).collect();
    let eps_pd = EPS_PD_REL * inv.iter().sum::<f64>() / d as f64;
    let shifted: Vec<f64> = inv.iter().map(|l| l - sigma * sigma).collect();
    if shifted.iter().any(|l| !(*l > eps_pd)) {
        return zero;
    }
    linalg::recompose(&eig.eigenvectors, &shifted)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Stand-in field with a prescribed value, gradient and Hessian.
    struct Fixed {
        v: f64,
        g: Vec<f64>,
        h: DMatrix<f64>,
    }

    impl SmoothField for Fixed {
        fn dim(&self) -> usize {
            self.g.len()
        }
        fn value(&self, _: &[f64]) -> f64 {
            self.v
        }
        fn value_and_gradient(&self, _: &[f64]) -> (f64, Vec<f64>) {
            (self.v, self.g.clone())
        }
        fn value_gradient_hessian(&self, _: &[f64]) -> (f64, Vec<f64>, DMatrix<f64>) {
            (self.v, self.g.clone(), self.h.clone())
        }
    }

    #[test]
    fn curvature_above_kernel_reverts() {
        let sigma = 0.1;
        // -log f Hessian = diag(200, 50): 1/200 - 0.01 < 0 on the first axis
        let f = Fixed {
            v: 0.5,
            g: vec![0.0, 0.0],
            h: DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![-100.0, -25.0])),
        };
        assert_eq!(estimate_sigma(&f, &[0.0, 0.0], sigma), DMatrix::zeros(2, 2));
    }

    #[test]
    fn value_floor_and_indefinite() {
        let low = Fixed {
            v: 1e-7,
            g: vec![0.0],
            h: DMatrix::from_element(1, 1, -1.0),
        };
        assert_eq!(estimate_sigma(&low, &[0.0], 0.1), DMatrix::zeros(1, 1));
        let saddle = Fixed {
            v: 0.5,
            g: vec![0.0, 0.0],
            h: DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![-1.0, 1.0])),
        };
        assert_eq!(estimate_sigma(&saddle, &[0.0, 0.0], 0.1), DMatrix::zeros(2, 2));
    }

    #[test]
    fn valid_estimate_is_positive_definite() {
        // -log f Hessian = diag(20, 10) -> inverse diag(0.05, 0.1) - 0.01
        let f = Fixed {
            v: 0.5,
            g: vec![0.0, 0.0],
            h: DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![-10.0, -5.0])),
        };
        let s = estimate_sigma(&f, &[0.0, 0.0], 0.1);
        assert!((s[(0, 0)] - 0.04).abs() < 1e-12);
        assert!((s[(1, 1)] - 0.09).abs() < 1e-12);
        assert_eq!(linalg::max_asymmetry(&s), 0.0);
    }
}
