//! Random Fourier feature sketches.
//!
//! A sketch is the empirical mean of the feature map
//! `x -> (1/sqrt(m)) exp(i <omega_j, x>)` over a dataset. Sketches built with
//! the same [`FrequencyMatrix`] can be merged, so datasets can be summarized in
//! chunks, in parallel or as a stream.

use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{dot, Dataset};
use crate::error::{check_dim, Error, Result};
use crate::{io, linalg, rng, trig};

/// Rows summed per leaf block before pairwise combination.
pub const SKETCH_CHUNK: usize = 1024;
const PAIRWISE_LEAF: usize = 64;

/// `m` frequencies in `R^d` drawn from `N(0, sigma^-2 I)`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyMatrix {
    m: usize,
    d: usize,
    sigma: f64,
    seed: u64,
    omegas: Vec<f64>,
    id: String,
}

impl FrequencyMatrix {
    /// Builds a frequency matrix from explicit rows (e.g. loaded from a file).
    pub fn from_parts(m: usize, d: usize, sigma: f64, seed: u64, omegas: Vec<f64>) -> Result<Self> {
        validate_shape(d, m, sigma)?;
        if omegas.len() != m * d {
            return Err(Error::DimensionMismatch {
                expected: m * d,
                got: omegas.len(),
            });
        }
        if omegas.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite frequency".into()));
        }
        let id = content_id(m, d, sigma, &omegas);
        Ok(Self {
            m,
            d,
            sigma,
            seed,
            omegas,
            id,
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Content hash of `(m, d, sigma, omegas)`.
    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn omega(&self, j: usize) -> &[f64] {
        &self.omegas[j * self.d..(j + 1) * self.d]
    }

    pub fn omegas(&self) -> &[f64] {
        &self.omegas
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.omegas.chunks_exact(self.d)
    }

    /// `<omega_j, x>` for every `j`.
    pub(crate) fn phases_into(&self, x: &[f64], out: &mut [f64]) {
        for (p, w) in out.iter_mut().zip(self.rows()) {
            *p = dot(w, x);
        }
    }
}

fn validate_shape(d: usize, m: usize, sigma: f64) -> Result<()> {
    if d == 0 {
        return Err(Error::InvalidParameter("dimension d must be >= 1".into()));
    }
    if m == 0 {
        return Err(Error::InvalidParameter("sketch size m must be >= 1".into()));
    }
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "bandwidth sigma must be finite and > 0, got {sigma}"
        )));
    }
    Ok(())
}

fn content_id(m: usize, d: usize, sigma: f64, omegas: &[f64]) -> String {
    let mut hasher = Sha256::new();
    hasher.update((m as u64).to_le_bytes());
    hasher.update((d as u64).to_le_bytes());
    hasher.update(sigma.to_bits().to_le_bytes());
    for w in omegas {
        hasher.update(w.to_bits().to_le_bytes());
    }
    hasher.finalize()[..8].iter().map(|b| format!("{b:02x}")).collect()
}

/// Draws `m` i.i.d. frequencies from `N(0, sigma^-2 I_d)`.
///
/// Standard normals are drawn first and then divided by `sigma`, so one seed
/// gives common random numbers across a bandwidth sweep.
pub fn sample_frequencies(d: usize, m: usize, sigma: f64, seed: u64) -> Result<FrequencyMatrix> {
    validate_shape(d, m, sigma)?;
    let mut rng = rng::stream(seed);
    let omegas: Vec<f64> = (0..m * d)
        .map(|_| rng.sample::<f64, _>(StandardNormal) / sigma)
        .collect();
    FrequencyMatrix::from_parts(m, d, sigma, seed, omegas)
}

/// `Phi(x)_j = (1/sqrt(m)) exp(i <omega_j, x>)`.
pub fn feature_map(x: &[f64], freqs: &FrequencyMatrix) -> Result<Vec<Complex64>> {
    check_dim(freqs.d, x.len())?;
    let scale = 1.0 / (freqs.m as f64).sqrt();
    Ok(freqs
        .rows()
        .map(|w| {
            let (s, c) = trig::sin_cos(dot(w, x));
            Complex64::new(scale * c, scale * s)
        })
        .collect())
}

/// Sketch of a Dirac mass at `c`; identical to [`feature_map`].
pub fn sketch_dirac(c: &[f64], freqs: &FrequencyMatrix) -> Result<Vec<Complex64>> {
    feature_map(c, freqs)
}

/// Sketch of `N(c, cov)`, i.e. its characteristic function at each frequency:
/// `(1/sqrt(m)) exp(i <omega_j, c> - omega_j^T cov omega_j / 2)`.
pub fn sketch_gaussian(c: &[f64], cov: &DMatrix<f64>, freqs: &FrequencyMatrix) -> Result<Vec<Complex64>> {
    check_dim(freqs.d, c.len())?;
    let cov = linalg::check_psd(cov, freqs.d)?;
    Ok(sketch_gaussian_unchecked(c, &cov, freqs))
}

pub(crate) fn sketch_gaussian_unchecked(c: &[f64], cov: &DMatrix<f64>, freqs: &FrequencyMatrix) -> Vec<Complex64> {
    let d = freqs.d;
    let scale = 1.0 / (freqs.m as f64).sqrt();
    freqs
        .rows()
        .map(|w| {
            let mut quad = 0.0;
            for a in 0..d {
                let mut row = 0.0;
                for b in 0..d {
                    row += cov[(a, b)] * w[b];
                }
                quad += w[a] * row;
            }
            let (s, co) = trig::sin_cos(dot(w, c));
            let damp = scale * (-0.5 * quad).exp();
            Complex64::new(damp * co, damp * s)
        })
        .collect()
}

/// A dataset summary: the mean feature vector and the number of points.
#[derive(Debug, Clone, PartialEq)]
pub struct Sketch {
    pub values: Vec<Complex64>,
    pub count: u64,
    pub freq_id: String,
}

impl Sketch {
    /// The merge identity: all-zero values and zero count.
    pub fn empty(freqs: &FrequencyMatrix) -> Self {
        Self {
            values: vec![Complex64::new(0.0, 0.0); freqs.m],
            count: 0,
            freq_id: freqs.id.clone(),
        }
    }

    pub fn norm(&self) -> f64 {
        l2_norm(&self.values)
    }
}

pub(crate) fn l2_norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Mean of [`feature_map`] over the rows of `data`.
pub fn sketch_dataset(data: &Dataset, freqs: &FrequencyMatrix) -> Result<Sketch> {
    check_dim(freqs.d, data.dim())?;
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let chunk_sums: Vec<Vec<Complex64>> = data
        .as_slice()
        .par_chunks(SKETCH_CHUNK * data.dim())
        .map(|chunk| pairwise_sum(chunk, freqs))
        .collect();
    let mut total = reduce_pairwise(chunk_sums);
    let scale = 1.0 / ((freqs.m as f64).sqrt() * data.len() as f64);
    total.iter_mut().for_each(|z| *z *= scale);
    Ok(Sketch {
        values: total,
        count: data.len() as u64,
        freq_id: freqs.id.clone(),
    })
}

/// Unnormalized `sum_i exp(i <omega_j, x_i>)` over a block of rows.
fn pairwise_sum(rows: &[f64], freqs: &FrequencyMatrix) -> Vec<Complex64> {
    let n = rows.len() / freqs.d;
    if n <= PAIRWISE_LEAF {
        let mut acc = vec![Complex64::new(0.0, 0.0); freqs.m];
        let mut phases = vec![0.0; freqs.m];
        for x in rows.chunks_exact(freqs.d) {
            freqs.phases_into(x, &mut phases);
            for (a, p) in acc.iter_mut().zip(&phases) {
                let (s, c) = trig::sin_cos(*p);
                a.re += c;
                a.im += s;
            }
        }
        return acc;
    }
    let half = n / 2;
    let (left, right) = rows.split_at(half * freqs.d);
    let mut a = pairwise_sum(left, freqs);
    let b = pairwise_sum(right, freqs);
    a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
    a
}

fn reduce_pairwise(mut parts: Vec<Vec<Complex64>>) -> Vec<Complex64> {
    while parts.len() > 1 {
        let mut next = Vec::with_capacity(parts.len().div_ceil(2));
        let mut it = parts.into_iter();
        while let Some(mut a) = it.next() {
            if let Some(b) = it.next() {
                a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
            }
            next.push(a);
        }
        parts = next;
    }
    parts.pop().unwrap_or_default()
}

/// Count-weighted average of two sketches over the same frequencies.
pub fn merge_sketches(a: &Sketch, b: &Sketch) -> Result<Sketch> {
    if a.freq_id != b.freq_id {
        return Err(Error::FrequencyMismatch(a.freq_id.clone(), b.freq_id.clone()));
    }
    check_dim(a.values.len(), b.values.len())?;
    match (a.count, b.count) {
        (0, 0) => Err(Error::EmptyMerge),
        (0, _) => Ok(b.clone()),
        (_, 0) => Ok(a.clone()),
        (na, nb) => {
            let total = na + nb;
            let wa = na as f64 / total as f64;
            let wb = nb as f64 / total as f64;
            let values = a
                .values
                .iter()
                .zip(&b.values)
                .map(|(x, y)| x * wa + y * wb)
                .collect();
            Ok(Sketch {
                values,
                count: total,
                freq_id: a.freq_id.clone(),
            })
        }
    }
}

/// On-disk sketch: values plus the frequencies that produced them.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SketchFile {
    pub m: usize,
    pub d: usize,
    pub sigma: f64,
    pub count: u64,
    pub values_re: Vec<f64>,
    pub values_im: Vec<f64>,
    pub omegas: Vec<Vec<f64>>,
    pub seed: u64,
}

impl SketchFile {
    pub fn new(sketch: &Sketch, freqs: &FrequencyMatrix) -> Result<Self> {
        if sketch.freq_id != freqs.id {
            return Err(Error::FrequencyMismatch(sketch.freq_id.clone(), freqs.id.clone()));
        }
        Ok(Self {
            m: freqs.m,
            d: freqs.d,
            sigma: freqs.sigma,
            count: sketch.count,
            values_re: sketch.values.iter().map(|z| z.re).collect(),
            values_im: sketch.values.iter().map(|z| z.im).collect(),
            omegas: freqs.rows().map(<[f64]>::to_vec).collect(),
            seed: freqs.seed,
        })
    }

    /// Rebuilds the frequency matrix and sketch, checking shapes.
    pub fn into_parts(self) -> Result<(Sketch, FrequencyMatrix)> {
        if self.values_re.len() != self.m || self.values_im.len() != self.m || self.omegas.len() != self.m {
            return Err(Error::DimensionMismatch {
                expected: self.m,
                got: self.values_re.len().min(self.values_im.len()).min(self.omegas.len()),
            });
        }
        let mut flat = Vec::with_capacity(self.m * self.d);
        for row in &self.omegas {
            check_dim(self.d, row.len())?;
            flat.extend_from_slice(row);
        }
        let freqs = FrequencyMatrix::from_parts(self.m, self.d, self.sigma, self.seed, flat)?;
        let values = self
            .values_re
            .iter()
            .zip(&self.values_im)
            .map(|(&re, &im)| Complex64::new(re, im))
            .collect();
        let sketch = Sketch {
            values,
            count: self.count,
            freq_id: freqs.id.clone(),
        };
        Ok((sketch, freqs))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        io::write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        io::read_json(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn cnear(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn sampling_rejects_bad_shapes() {
        assert!(sample_frequencies(0, 3, 1.0, 0).is_err());
        assert!(sample_frequencies(2, 0, 1.0, 0).is_err());
        assert!(sample_frequencies(2, 3, 0.0, 0).is_err());
        assert!(sample_frequencies(2, 3, -1.0, 0).is_err());
        assert!(sample_frequencies(2, 3, f64::INFINITY, 0).is_err());
        assert!(sample_frequencies(2, 3, f64::NAN, 0).is_err());
    }

    #[test]
    fn sigma_scaling_is_exact() {
        let a = sample_frequencies(2, 3, 1.0, 7).unwrap();
        let b = sample_frequencies(2, 3, 2.0, 7).unwrap();
        for (x, y) in a.omegas().iter().zip(b.omegas()) {
            assert_eq!(x / 2.0, *y);
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let a = sample_frequencies(1, 1, 1.0, 99).unwrap();
        let b = sample_frequencies(1, 1, 1.0, 99).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.omegas(), sample_frequencies(1, 1, 1.0, 100).unwrap().omegas());
    }

    #[test]
    fn column_variance_concentrates() {
        // For m = 10^4 the sample variance of a standard normal column has
        // standard deviation sqrt(2/m) ~ 0.0141; [0.94, 1.06] is > 4 sd wide.
        let f = sample_frequencies(2, 10_000, 1.0, 3).unwrap();
        for col in 0..2 {
            let vals: Vec<f64> = f.rows().map(|r| r[col]).collect();
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (vals.len() - 1) as f64;
            assert!((0.94..=1.06).contains(&var), "column {col} variance {var}");
        }
    }

    #[test]
    fn feature_map_at_origin_and_pi() {
        let f = sample_frequencies(3, 5, 0.7, 1).unwrap();
        let phi = feature_map(&[0.0, 0.0, 0.0], &f).unwrap();
        for z in phi {
            assert_eq!(z, Complex64::new(1.0 / 5f64.sqrt(), 0.0));
        }
        let f = FrequencyMatrix::from_parts(1, 1, 1.0, 0, vec![PI]).unwrap();
        let phi = feature_map(&[1.0], &f).unwrap();
        assert!(cnear(phi[0], Complex64::new(-1.0, 0.0), 1e-12));
        assert!(feature_map(&[1.0, 2.0], &f).is_err());
    }

    #[test]
    fn sketch_of_single_point_and_symmetric_pair() {
        let f = sample_frequencies(2, 16, 0.5, 2).unwrap();
        let x = [0.3, -0.8];
        let ds = Dataset::from_rows(&[x]).unwrap();
        let s = sketch_dataset(&ds, &f).unwrap();
        let phi = feature_map(&x, &f).unwrap();
        for (a, b) in s.values.iter().zip(&phi) {
            assert!(cnear(*a, *b, 1e-15));
        }
        assert_eq!(s.count, 1);

        let ds = Dataset::from_rows(&[x, [-0.3, 0.8]]).unwrap();
        let s = sketch_dataset(&ds, &f).unwrap();
        for (z, w) in s.values.iter().zip(f.rows()) {
            assert!(z.im.abs() < 1e-12);
            assert!((z.re - dot(w, &x).cos() / 4.0).abs() < 1e-12);
        }
    }

    #[test]
    fn sketch_matches_direct_sum() {
        // d=1, m=2, omega=(pi, pi/2), X={0,1,2}:
        //   j=1: (1 + e^{i pi} + e^{2 i pi}) / 3 / sqrt2 = (1/3)/sqrt2
        //   j=2: (1 + i - 1) / 3 / sqrt2 = (i/3)/sqrt2
        let f = FrequencyMatrix::from_parts(2, 1, 1.0, 0, vec![PI, PI / 2.0]).unwrap();
        let ds = Dataset::from_rows(&[[0.0], [1.0], [2.0]]).unwrap();
        let s = sketch_dataset(&ds, &f).unwrap();
        let r2 = 2f64.sqrt();
        assert!(cnear(s.values[0], Complex64::new(1.0 / 3.0 / r2, 0.0), 1e-12));
        assert!(cnear(s.values[1], Complex64::new(0.0, 1.0 / 3.0 / r2), 1e-12));
    }

    #[test]
    fn empty_dataset_is_an_error() {
        let f = sample_frequencies(2, 4, 1.0, 0).unwrap();
        let ds = Dataset::empty(2).unwrap();
        assert!(matches!(sketch_dataset(&ds, &f), Err(Error::EmptyDataset)));
    }

    #[test]
    fn merge_identity_and_errors() {
        let f = sample_frequencies(2, 8, 1.0, 0).unwrap();
        let g = sample_frequencies(2, 8, 1.0, 1).unwrap();
        let ds = Dataset::from_rows(&[[0.1, 0.2], [0.5, -0.1]]).unwrap();
        let s = sketch_dataset(&ds, &f).unwrap();
        assert_eq!(merge_sketches(&s, &Sketch::empty(&f)).unwrap(), s);
        assert_eq!(merge_sketches(&Sketch::empty(&f), &s).unwrap(), s);
        assert!(matches!(
            merge_sketches(&Sketch::empty(&f), &Sketch::empty(&f)),
            Err(Error::EmptyMerge)
        ));
        let t = sketch_dataset(&ds, &g).unwrap();
        assert!(matches!(merge_sketches(&s, &t), Err(Error::FrequencyMismatch(..))));
    }

    #[test]
    fn gaussian_sketch_limits() {
        let f = sample_frequencies(2, 32, 0.4, 5).unwrap();
        let c = [0.2, 0.1];
        let zero = DMatrix::zeros(2, 2);
        let g = sketch_gaussian(&c, &zero, &f).unwrap();
        let dirac = sketch_dirac(&c, &f).unwrap();
        for (a, b) in g.iter().zip(&dirac) {
            assert!(cnear(*a, *b, 1e-12));
        }
        let cov = DMatrix::from_row_slice(2, 2, &[0.02, 0.005, 0.005, 0.01]);
        let g = sketch_gaussian(&c, &cov, &f).unwrap();
        for z in &g {
            assert!(z.norm() <= 1.0 / 32f64.sqrt() + 1e-15);
        }
        let bad = DMatrix::from_row_slice(2, 2, &[0.02, 0.0, 0.0, -0.01]);
        assert!(sketch_gaussian(&c, &bad, &f).is_err());
    }

    #[test]
    fn sketch_file_roundtrip() {
        let f = sample_frequencies(2, 4, 0.3, 11).unwrap();
        let ds = Dataset::from_rows(&[[0.1, 0.2]]).unwrap();
        let s = sketch_dataset(&ds, &f).unwrap();
        let file = SketchFile::new(&s, &f).unwrap();
        let text = serde_json::to_string(&file).unwrap();
        let back: SketchFile = serde_json::from_str(&text).unwrap();
        let (s2, f2) = back.into_parts().unwrap();
        assert_eq!(f2, f);
        assert_eq!(s2, s);
    }
}
