//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use cskit::sketch::FrequencyMatrix;
use cskit::Dataset;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

/// `Re sum_j r_j conj(exp(i <w_j, x>) / sqrt(m))` evaluated term by term in
/// complex arithmetic.
pub fn corr_direct(r: &[Complex64], freqs: &FrequencyMatrix, x: &[f64]) -> f64 {
    let m = freqs.m() as f64;
    let mut acc = Complex64::new(0.0, 0.0);
    for (j, rj) in r.iter().enumerate() {
        let theta: f64 = freqs.omega(j).iter().zip(x).map(|(w, v)| w * v).sum();
        acc += rj * Complex64::from_polar(1.0 / m.sqrt(), theta).conj();
    }
    acc.re
}

/// Central-difference gradient of `f`.
pub fn fd_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let mut a = x.to_vec();
            let mut b = x.to_vec();
            a[i] += h;
            b[i] -= h;
            (f(&a) - f(&b)) / (2.0 * h)
        })
        .collect()
}

/// Central differences of a gradient; column `i` is `d grad / d x_i`.
pub fn fd_jacobian(g: impl Fn(&[f64]) -> Vec<f64>, x: &[f64], h: f64) -> DMatrix<f64> {
    let d = x.len();
    let mut out = DMatrix::zeros(d, d);
    for i in 0..d {
        let mut a = x.to_vec();
        let mut b = x.to_vec();
        a[i] += h;
        b[i] -= h;
        let (ga, gb) = (g(&a), g(&b));
        for p in 0..d {
            out[(p, i)] = (ga[p] - gb[p]) / (2.0 * h);
        }
    }
    out
}

/// Gaussian-kernel density `(1/N) sum_n exp(-|x - x_n|^2 / (2 sigma^2))`.
pub fn kde_direct(x: &[f64], data: &Dataset, sigma: f64) -> f64 {
    let total: f64 = data
        .rows()
        .map(|y| {
            let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
            (-d2 / (2.0 * sigma * sigma)).exp()
        })
        .sum();
    total / data.len() as f64
}

/// `min_{x >= 0} |A x - b|^2` by solving the unconstrained problem on every
/// support and keeping the best feasible one.
pub fn nnls_exhaustive(a: &DMatrix<f64>, b: &DVector<f64>) -> (DVector<f64>, f64) {
    let n = a.ncols();
    let mut best = (DVector::zeros(n), b.norm_squared());
    for mask in 1u32..(1 << n) {
        let cols: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        let sub = a.select_columns(cols.iter());
        // normal equations; supports with a singular Gram matrix are skipped
        let Some(chol) = (sub.transpose() * &sub).cholesky() else { continue };
        let sol = chol.solve(&(sub.transpose() * b));
        if sol.iter().any(|v| *v < 0.0) {
            continue;
        }
        let mut x = DVector::zeros(n);
        for (k, &i) in cols.iter().enumerate() {
            x[i] = sol[k];
        }
        let obj = (a * &x - b).norm_squared();
        if obj < best.1 {
            best = (x, obj);
        }
    }
    best
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Largest distance from a true point to its nearest estimate.
pub fn max_match_error(truth: &[Vec<f64>], estimate: &[Vec<f64>]) -> f64 {
    truth
        .iter()
        .map(|t| {
            estimate
                .iter()
                .map(|e| t.iter().zip(e).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
}
