//! Non-negative least squares by the Lawson-Hanson active-set method.
//!
//! Complex problems `min_{a >= 0} |z - sum_i a_i v_i|` are solved on the real
//! system obtained by stacking real and imaginary parts.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

/// Stacks complex atoms as the columns of a `2m x n` real matrix.
pub fn stack_atoms(atoms: &[Vec<Complex64>]) -> DMatrix<f64> {
    let m = atoms.first().map_or(0, Vec::len);
    let mut a = DMatrix::zeros(2 * m, atoms.len());
    for (col, atom) in atoms.iter().enumerate() {
        for (j, v) in atom.iter().enumerate() {
            a[(j, col)] = v.re;
            a[(m + j, col)] = v.im;
        }
    }
    a
}

fn stack_target(z: &[Complex64]) -> DVector<f64> {
    let m = z.len();
    DVector::from_fn(2 * m, |j, _| if j < m { z[j].re } else { z[j - m].im })
}

/// `argmin_{a >= 0} |z - sum_i a_i atoms_i|`.
pub fn nnls_weights(z: &[Complex64], atoms: &[Vec<Complex64>]) -> Vec<f64> {
    if atoms.is_empty() {
        return Vec::new();
    }
    nnls(&stack_atoms(atoms), &stack_target(z)).as_slice().to_vec()
}

/// `argmin_{x >= 0} |A x - b|`.
pub fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let n = a.ncols();
    let mut x = DVector::zeros(n);
    if n == 0 {
        return x;
    }
    let scale = a.norm() * b.norm();
    if scale == 0.0 {
        return x;
    }
    let tol = 1e-13 * scale;
    let mut passive = vec![false; n];
    // columns that re-entered and left again without progress
    let mut blocked = vec![false; n];
    let max_outer = 3 * n + 10;

    for _ in 0..max_outer {
        let w = a.tr_mul(&(b - a * &x));
        let candidate = (0..n)
            .filter(|&j| !passive[j] && !blocked[j] && w[j] > tol)
            .max_by(|&i, &j| w[i].total_cmp(&w[j]).then(j.cmp(&i)));
        let Some(j) = candidate else { break };
        passive[j] = true;

        let before = x.clone();
        for _ in 0..max_outer {
            let s = solve_passive(a, b, &passive);
            if (0..n).all(|i| !passive[i] || s[i] > 0.0) {
                x = s;
                break;
            }
            let mut alpha = f64::INFINITY;
            let mut blocking = usize::MAX;
            for i in 0..n {
                if passive[i] && s[i] <= 0.0 {
                    let denom = x[i] - s[i];
                    let ratio = if denom > 0.0 { x[i] / denom } else { 0.0 };
                    if ratio < alpha {
                        alpha = ratio;
                        blocking = i;
                    }
                }
            }
            x += alpha * (&s - &x);
            x[blocking] = 0.0;
            for i in 0..n {
                if passive[i] && x[i] <= 0.0 {
                    passive[i] = false;
                    x[i] = 0.0;
                }
            }
        }
        if passive[j] || x != before {
            blocked.iter_mut().for_each(|v| *v = false);
        } else {
            blocked[j] = true;
        }
    }
    x.iter_mut().for_each(|v| *v = v.max(0.0));
    x
}

/// Unconstrained least squares restricted to the passive columns (minimum
/// norm when the passive columns are rank deficient).
fn solve_passive(a: &DMatrix<f64>, b: &DVector<f64>, passive: &[bool]) -> DVector<f64> {
    let cols: Vec<usize> = (0..a.ncols()).filter(|&i| passive[i]).collect();
    let mut out = DVector::zeros(a.ncols());
    if cols.is_empty() {
        return out;
    }
    let sub = a.select_columns(cols.iter());
    let svd = sub.svd(true, true);
    let eps = 1e-12 * svd.singular_values.max();
    let sol = svd.solve(b, eps).expect("SVD computed with U and V");
    for (k, &i) in cols.iter().enumerate() {
        out[i] = sol[k];
    }
    out
}
