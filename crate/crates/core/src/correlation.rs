//! The correlation function `f_r(x) = Re <r, A delta_x>` of a residual sketch.
//!
//! With random Fourier features, writing `r_j / sqrt(m) = a_j + i b_j` and
//! `theta_j = <omega_j, x>`:
//!
//! ```text
//! f(x)      =  sum_j  a_j cos(theta_j) + b_j sin(theta_j)
//! grad f(x) =  sum_j (b_j cos(theta_j) - a_j sin(theta_j)) omega_j
//! hess f(x) = -sum_j (a_j cos(theta_j) + b_j sin(theta_j)) omega_j omega_j^T
//! ```
//!
//! Averaged over Gaussian frequencies, `f_{z_X}` is the Gaussian kernel density
//! estimate with bandwidth `sigma`; [`kde_oracle`] evaluates that limit directly.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::data::{dot, sq_dist, Dataset};
use crate::error::{check_dim, Error, Result};
use crate::{linalg, trig};
use crate::sketch::{l2_norm, FrequencyMatrix};

/// A twice-differentiable scalar field on `R^d`.
///
/// Implemented by [`CorrelationFn`]; the decoders' local searches and the
/// covariance estimator only need this interface. Callers guarantee that `x`
/// has length [`SmoothField::dim`].
pub trait SmoothField {
    fn dim(&self) -> usize;

    fn value(&self, x: &[f64]) -> f64;

    fn value_and_gradient(&self, x: &[f64]) -> (f64, Vec<f64>);

    fn value_gradient_hessian(&self, x: &[f64]) -> (f64, Vec<f64>, DMatrix<f64>);

    /// An upper bound on `|value|`, used to scale degeneracy thresholds.
    fn scale(&self) -> f64 {
        1.0
    }
}

#[derive(Debug, Clone)]
pub struct CorrelationFn<'a> {
    residual: Vec<Complex64>,
    coef_re: Vec<f64>,
    coef_im: Vec<f64>,
    norm: f64,
    freqs: &'a FrequencyMatrix,
}

impl<'a> CorrelationFn<'a> {
    pub fn new(residual: &[Complex64], freqs: &'a FrequencyMatrix) -> Result<Self> {
        check_dim(freqs.m(), residual.len())?;
        let scale = 1.0 / (freqs.m() as f64).sqrt();
        Ok(Self {
            residual: residual.to_vec(),
            coef_re: residual.iter().map(|z| z.re * scale).collect(),
            coef_im: residual.iter().map(|z| z.im * scale).collect(),
            norm: l2_norm(residual),
            freqs,
        })
    }

    pub fn residual(&self) -> &[Complex64] {
        &self.residual
    }

    pub fn residual_norm(&self) -> f64 {
        self.norm
    }

    pub fn freqs(&self) -> &FrequencyMatrix {
        self.freqs
    }
}

impl SmoothField for CorrelationFn<'_> {
    fn dim(&self) -> usize {
        self.freqs.dim()
    }

    fn scale(&self) -> f64 {
        self.residual_norm()
    }

    fn value(&self, x: &[f64]) -> f64 {
        let mut v = 0.0;
        for ((w, a), b) in self.freqs.rows().zip(&self.coef_re).zip(&self.coef_im) {
            let (s, c) = trig::sin_cos(dot(w, x));
            v += a * c + b * s;
        }
        v
    }

    fn value_and_gradient(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let mut v = 0.0;
        let mut g = vec![0.0; x.len()];
        for ((w, a), b) in self.freqs.rows().zip(&self.coef_re).zip(&self.coef_im) {
            let (s, c) = trig::sin_cos(dot(w, x));
            v += a * c + b * s;
            let t = b * c - a * s;
            for (gi, wi) in g.iter_mut().zip(w) {
                *gi += t * wi;
            }
        }
        (v, g)
    }

    fn value_gradient_hessian(&self, x: &[f64]) -> (f64, Vec<f64>, DMatrix<f64>) {
        let d = x.len();
        let mut v = 0.0;
        let mut g = vec![0.0; d];
        let mut h = DMatrix::zeros(d, d);
        for ((w, a), b) in self.freqs.rows().zip(&self.coef_re).zip(&self.coef_im) {
            let (s, c) = trig::sin_cos(dot(w, x));
            let re = a * c + b * s;
            v += re;
            let t = b * c - a * s;
            for p in 0..d {
                g[p] += t * w[p];
                for q in p..d {
                    h[(p, q)] -= re * w[p] * w[q];
                }
            }
        }
        for p in 0..d {
            for q in 0..p {
                h[(p, q)] = h[(q, p)];
            }
        }
        (v, g, h)
    }
}

/// `f_r(x)`.
pub fn corr_value(f: &CorrelationFn<'_>, x: &[f64]) -> Result<f64> {
    check_dim(f.dim(), x.len())?;
    Ok(f.value(x))
}

/// Closed-form gradient of `f_r` at `x`.
pub fn corr_gradient(f: &CorrelationFn<'_>, x: &[f64]) -> Result<Vec<f64>> {
    check_dim(f.dim(), x.len())?;
    Ok(f.value_and_gradient(x).1)
}

/// Closed-form Hessian of `f_r` at `x`, exactly symmetric.
pub fn corr_hessian(f: &CorrelationFn<'_>, x: &[f64]) -> Result<DMatrix<f64>> {
    check_dim(f.dim(), x.len())?;
    Ok(linalg::symmetrize(&f.value_gradient_hessian(x).2))
}

/// Gaussian kernel `exp(-|x - y|^2 / (2 sigma^2))`.
pub fn gaussian_kernel(x: &[f64], y: &[f64], sigma: f64) -> f64 {
    (-sq_dist(x, y) / (2.0 * sigma * sigma)).exp()
}

/// Gaussian kernel density estimate `(1/N) sum_i kappa_sigma(x, x_i)`.
pub fn kde_oracle(x: &[f64], data: &Dataset, sigma: f64) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    check_dim(data.dim(), x.len())?;
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::InvalidParameter(format!("sigma must be > 0, got {sigma}")));
    }
    let sum: f64 = data.rows().map(|xi| gaussian_kernel(x, xi, sigma)).sum();
    Ok(sum / data.len() as f64)
}
