//! Synthetic Gaussian mixtures.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{sq_dist, Dataset};
use crate::error::{check_dim, Error, Result};
use crate::{io, linalg, rng};

/// Half-width of the cube the separated means are drawn from.
pub const MEAN_HALF_WIDTH: f64 = 0.7;
/// Minimum pairwise mean distance in units of the cluster standard deviation.
pub const SEPARATION: f64 = 6.0;
pub const MAX_PLACEMENT_ATTEMPTS: usize = 100_000;
const SIMPLEX_TOL: f64 = 1e-12;

/// `sum_i w_i N(mean_i, cov_i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmSpec {
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    /// One row-major `d x d` matrix per component, as nested rows.
    pub covariances: Vec<Vec<Vec<f64>>>,
}

impl GmmSpec {
    /// Equal weights and covariance `std^2 I` for every component.
    pub fn isotropic(means: Vec<Vec<f64>>, std: f64) -> Result<Self> {
        let k = means.len();
        let d = means.first().map_or(0, Vec::len);
        let cov: Vec<Vec<f64>> = (0..d)
            .map(|i| (0..d).map(|j| if i == j { std * std } else { 0.0 }).collect())
            .collect();
        let spec = Self {
            weights: vec![1.0 / k as f64; k],
            means,
            covariances: vec![cov; k],
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn k(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.means.first().map_or(0, Vec::len)
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.k();
        if k == 0 {
            return Err(Error::InvalidParameter("mixture needs at least one component".into()));
        }
        check_dim(k, self.means.len())?;
        check_dim(k, self.covariances.len())?;
        if self.weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidParameter("mixture weights must be finite and >= 0".into()));
        }
        let total: f64 = self.weights.iter().sum();
        if (total - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::InvalidParameter(format!("mixture weights sum to {total}, expected 1")));
        }
        let d = self.dim();
        if d == 0 {
            return Err(Error::InvalidParameter("mixture dimension must be >= 1".into()));
        }
        for (mean, cov) in self.means.iter().zip(&self.covariances) {
            check_dim(d, mean.len())?;
            if mean.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParameter("mixture means must be finite".into()));
            }
            check_dim(d, cov.len())?;
            for row in cov {
                check_dim(d, row.len())?;
            }
            linalg::check_psd(&linalg::from_rows(cov), d)?;
        }
        Ok(())
    }

    pub fn covariance(&self, i: usize) -> DMatrix<f64> {
        linalg::from_rows(&self.covariances[i])
    }

    pub fn load(path: &Path) -> Result<Self> {
        let spec: Self = io::read_json(path)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        io::write_json(path, self)
    }
}

/// Draws `n` points and their component labels. Row `i` uses its own random
/// stream, so the output does not depend on the thread count.
pub fn gen_gmm(spec: &GmmSpec, n: usize, seed: u64) -> Result<(Dataset, Vec<usize>)> {
    spec.validate()?;
    let d = spec.dim();
    let factors: Vec<DMatrix<f64>> = (0..spec.k())
        .map(|i| linalg::psd_sqrt_factor(&spec.covariance(i)))
        .collect();
    let last_positive = spec
        .weights
        .iter()
        .rposition(|w| *w > 0.0)
        .expect("weights sum to one");
    let mut values = vec![0.0; n * d];
    let mut labels = vec![0usize; n];
    values
        .par_chunks_mut(d)
        .zip(labels.par_iter_mut())
        .enumerate()
        .for_each(|(i, (row, label))| {
            let mut g = rng::substream(seed, rng::TAG_GMM_ROWS, i as u64);
            let u: f64 = g.random();
            let mut acc = 0.0;
            let mut comp = last_positive;
            for (j, w) in spec.weights.iter().enumerate() {
                acc += w;
                if u < acc && *w > 0.0 {
                    comp = j;
                    break;
                }
            }
            *label = comp;
            let xi = DVector::from_fn(d, |_, _| g.sample::<f64, _>(StandardNormal));
            let shift = &factors[comp] * xi;
            for ((out, m), s) in row.iter_mut().zip(&spec.means[comp]).zip(shift.iter()) {
                *out = m + s;
            }
        });
    Ok((Dataset::new(n, d, values)?, labels))
}

/// Per-axis cluster standard deviation of the separated mixtures, `0.12 / sqrt(d)`.
pub fn separated_std(d: usize) -> f64 {
    0.12 / (d as f64).sqrt()
}

/// Smallest pairwise distance between the means (infinite for `k = 1`).
pub fn min_mean_distance(spec: &GmmSpec) -> f64 {
    let mut best = f64::INFINITY;
    for (i, a) in spec.means.iter().enumerate() {
        for b in &spec.means[i + 1..] {
            best = best.min(sq_dist(a, b).sqrt());
        }
    }
    best
}

/// `k` equally weighted isotropic clusters with std `separated_std(d)` whose
/// means lie in `[-0.7, 0.7]^d` at pairwise distance at least six standard
/// deviations, placed by rejection sampling.
pub fn make_separated_spec(k: usize, d: usize, seed: u64) -> Result<GmmSpec> {
    if k == 0 || d == 0 {
        return Err(Error::InvalidParameter("k and d must be >= 1".into()));
    }
    let std = separated_std(d);
    let min_dist = SEPARATION * std;
    let mut g = rng::substream(seed, rng::TAG_SPEC, 0);
    let mut means: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut attempts = 0;
    while means.len() < k {
        if attempts == MAX_PLACEMENT_ATTEMPTS {
            return Err(Error::SeparationInfeasible(attempts));
        }
        attempts += 1;
        let cand: Vec<f64> = (0..d)
            .map(|_| g.random_range(-MEAN_HALF_WIDTH..=MEAN_HALF_WIDTH))
            .collect();
        if means.iter().all(|m| sq_dist(m, &cand).sqrt() >= min_dist) {
            means.push(cand);
        }
    }
    let spec = GmmSpec::isotropic(means, std)?;
    debug_assert!(min_mean_distance(&spec) >= min_dist);
    Ok(spec)
}

/// `k` equally weighted isotropic clusters of std `std` whose means sit on a
/// regular polygon centered at the origin with neighbouring means `spacing`
/// apart (`k = 2`: a segment, `k = 3`: an equilateral triangle).
pub fn make_ring_spec(k: usize, d: usize, std: f64, spacing: f64) -> Result<GmmSpec> {
    if k == 0 || d == 0 || (d == 1 && k > 2) {
        return Err(Error::InvalidParameter("ring layout needs k, d >= 1 and d >= 2 for k > 2".into()));
    }
    if !(std >= 0.0 && spacing > 0.0) {
        return Err(Error::InvalidParameter("ring layout needs std >= 0 and spacing > 0".into()));
    }
    let radius = if k == 1 {
        0.0
    } else {
        spacing / (2.0 * (std::f64::consts::PI / k as f64).sin())
    };
    let means = (0..k)
        .map(|i| {
            let angle = std::f64::consts::FRAC_PI_2 + 2.0 * std::f64::consts::PI * i as f64 / k as f64;
            let mut m = vec![0.0; d];
            if d == 1 {
                m[0] = radius * angle.sin();
            } else {
                m[0] = radius * angle.cos();
                m[1] = radius * angle.sin();
            }
            m
        })
        .collect();
    GmmSpec::isotropic(means, std)
}
