//! Lloyd's k-means baseline and the MSE / RSE metrics.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{sq_dist, Dataset};
use crate::error::{check_dim, Error, Result};
use crate::rng;

pub const DEFAULT_N_INIT: usize = 5;
pub const DEFAULT_LLOYD_ITERS: usize = 300;

/// A non-empty set of `k` finite centers of equal dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct Centroids {
    centers: Vec<Vec<f64>>,
}

impl Centroids {
    pub fn new(centers: Vec<Vec<f64>>) -> Result<Self> {
        let d = centers
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::InvalidParameter("need at least one centroid".into()))?;
        if d == 0 {
            return Err(Error::InvalidParameter("centroid dimension must be >= 1".into()));
        }
        for c in &centers {
            check_dim(d, c.len())?;
            if c.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParameter("centroids must be finite".into()));
            }
        }
        Ok(Self { centers })
    }

    pub fn k(&self) -> usize {
        self.centers.len()
    }

    pub fn dim(&self) -> usize {
        self.centers[0].len()
    }

    pub fn centers(&self) -> &[Vec<f64>] {
        &self.centers
    }

    pub fn into_inner(self) -> Vec<Vec<f64>> {
        self.centers
    }
}

impl TryFrom<Vec<Vec<f64>>> for Centroids {
    type Error = Error;

    fn try_from(v: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<Centroids> for Vec<Vec<f64>> {
    fn from(c: Centroids) -> Self {
        c.centers
    }
}

/// Index of the nearest center (lowest index among equidistant ones) and the
/// squared distance to it.
fn nearest(x: &[f64], centers: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, c) in centers.iter().enumerate() {
        let d = sq_dist(x, c);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

fn assign(data: &Dataset, centers: &[Vec<f64>]) -> Vec<(usize, f64)> {
    data.as_slice()
        .par_chunks(data.dim())
        .map(|x| nearest(x, centers))
        .collect()
}

/// Mean of squared distances, summed in ascending order so that the result
/// does not depend on the order of the rows.
fn mean_of(mut dists: Vec<f64>) -> f64 {
    let n = dists.len() as f64;
    dists.sort_unstable_by(f64::total_cmp);
    dists.iter().sum::<f64>() / n
}

/// `(1/N) sum_n min_i |x_n - c_i|^2`.
pub fn mse(centroids: &Centroids, data: &Dataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    check_dim(centroids.dim(), data.dim())?;
    Ok(mean_of(assign(data, centroids.centers()).into_iter().map(|p| p.1).collect()))
}

/// `MSE(centroids) / MSE(reference)`.
pub fn rse(centroids: &Centroids, data: &Dataset, reference: &Centroids) -> Result<f64> {
    let base = mse(reference, data)?;
    if base <= 0.0 {
        return Err(Error::DegenerateReference);
    }
    Ok(mse(centroids, data)? / base)
}

/// Cluster index of every row.
pub fn assignments(centroids: &Centroids, data: &Dataset) -> Result<Vec<usize>> {
    check_dim(centroids.dim(), data.dim())?;
    Ok(assign(data, centroids.centers()).into_iter().map(|p| p.0).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LloydReport {
    pub centroids: Centroids,
    pub mse: f64,
    pub best_replica: usize,
    /// Final MSE of each replica.
    pub replica_mse: Vec<f64>,
    /// MSE after every assignment step, per replica.
    pub histories: Vec<Vec<f64>>,
}

/// k-means++ seeding: the first center uniformly, each next one with
/// probability proportional to the squared distance to the chosen centers.
fn kmeanspp<R: Rng>(data: &Dataset, k: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let n = data.len();
    let mut centers = vec![data.row(rng.random_range(0..n)).to_vec()];
    let mut dist: Vec<f64> = data.rows().map(|x| sq_dist(x, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = dist.iter().sum();
        let idx = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &w) in dist.iter().enumerate() {
                if w > 0.0 {
                    acc += w;
                    pick = Some(i);
                    if acc > target {
                        break;
                    }
                }
            }
            pick.expect("positive total implies a positive weight")
        } else {
            rng.random_range(0..n)
        };
        let c = data.row(idx).to_vec();
        for (d, x) in dist.iter_mut().zip(data.rows()) {
            *d = d.min(sq_dist(x, &c));
        }
        centers.push(c);
    }
    centers
}

/// One Lloyd replica; returns its centers and the MSE history.
fn replica(data: &Dataset, k: usize, seed: u64, r: usize, max_iters: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut rng = rng::substream(seed, rng::TAG_LLOYD, r as u64);
    let d = data.dim();
    let mut centers = kmeanspp(data, k, &mut rng);
    let mut history = Vec::new();
    let mut labels: Option<Vec<usize>> = None;
    for _ in 0..max_iters {
        let assigned = assign(data, &centers);
        history.push(mean_of(assigned.iter().map(|p| p.1).collect()));
        let new_labels: Vec<usize> = assigned.iter().map(|p| p.0).collect();
        if labels.as_ref() == Some(&new_labels) {
            break;
        }
        // means are accumulated relative to the first member of each cluster,
        // so a cluster of identical points has exactly that point as its mean
        let mut anchors: Vec<Option<&[f64]>> = vec![None; k];
        let mut sums = vec![0.0; k * d];
        let mut counts = vec![0usize; k];
        for (x, &l) in data.rows().zip(&new_labels) {
            counts[l] += 1;
            let a = *anchors[l].get_or_insert(x);
            sums[l * d..(l + 1) * d]
                .iter_mut()
                .zip(x.iter().zip(a))
                .for_each(|(s, (v, a))| *s += v - a);
        }
        let mut taken: Vec<usize> = Vec::new();
        for j in 0..k {
            if let Some(a) = anchors[j] {
                let inv = 1.0 / counts[j] as f64;
                centers[j] = sums[j * d..(j + 1) * d]
                    .iter()
                    .zip(a)
                    .map(|(s, a)| a + s * inv)
                    .collect();
            }
        }
        for j in 0..k {
            if counts[j] == 0 {
                // re-seed at the point farthest from its own center
                let mut far = (usize::MAX, -1.0);
                for (i, (x, &l)) in data.rows().zip(&new_labels).enumerate() {
                    let dist = sq_dist(x, &centers[l]);
                    if dist > far.1 && !taken.contains(&i) {
                        far = (i, dist);
                    }
                }
                if far.0 != usize::MAX {
                    taken.push(far.0);
                    centers[j] = data.row(far.0).to_vec();
                }
            }
        }
        labels = Some(new_labels);
    }
    (centers, history)
}

/// Best of `n_init` seeded k-means++ / Lloyd replicas by final MSE (ties go
/// to the lower replica index).
pub fn lloyd_report(data: &Dataset, k: usize, n_init: usize, seed: u64, max_iters: usize) -> Result<LloydReport> {
    if k == 0 || n_init == 0 || max_iters == 0 {
        return Err(Error::InvalidParameter("k, n_init and max_iters must be >= 1".into()));
    }
    if data.len() < k {
        return Err(Error::InvalidParameter(format!(
            "need at least k = {k} points, dataset has {}",
            data.len()
        )));
    }
    let runs: Vec<(Vec<Vec<f64>>, Vec<f64>)> = (0..n_init)
        .into_par_iter()
        .map(|r| replica(data, k, seed, r, max_iters))
        .collect();
    let mut replica_mse = Vec::with_capacity(n_init);
    let mut histories = Vec::with_capacity(n_init);
    let mut best: Option<(usize, f64, Centroids)> = None;
    for (r, (centers, history)) in runs.into_iter().enumerate() {
        let c = Centroids::new(centers)?;
        let m = mse(&c, data)?;
        replica_mse.push(m);
        histories.push(history);
        if best.as_ref().is_none_or(|b| m < b.1) {
            best = Some((r, m, c));
        }
    }
    let (best_replica, mse, centroids) = best.expect("n_init >= 1");
    Ok(LloydReport {
        centroids,
        mse,
        best_replica,
        replica_mse,
        histories,
    })
}

pub fn lloyd(data: &Dataset, k: usize, n_init: usize, seed: u64, max_iters: usize) -> Result<Centroids> {
    lloyd_report(data, k, n_init, seed, max_iters).map(|r| r.centroids)
}
