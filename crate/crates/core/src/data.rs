use crate::error::{Error, Result};

/// An `N x d` matrix of finite points stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    n: usize,
    d: usize,
    values: Vec<f64>,
}

impl Dataset {
    pub fn new(n: usize, d: usize, values: Vec<f64>) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidParameter("dataset dimension must be >= 1".into()));
        }
        if values.len() != n * d {
            return Err(Error::DimensionMismatch {
                expected: n * d,
                got: values.len(),
            });
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "non-finite value at row {}, column {}",
                pos / d,
                pos % d
            )));
        }
        Ok(Self { n, d, values })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let d = rows
            .first()
            .map(|r| r.as_ref().len())
            .ok_or(Error::EmptyDataset)?;
        let mut values = Vec::with_capacity(rows.len() * d);
        for row in rows {
            crate::error::check_dim(d, row.as_ref().len())?;
            values.extend_from_slice(row.as_ref());
        }
        Self::new(rows.len(), d, values)
    }

    /// An empty dataset of the given dimension.
    pub fn empty(d: usize) -> Result<Self> {
        Self::new(0, d, Vec::new())
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.values.chunks_exact(self.d)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    /// Rows `start..end` as a new dataset.
    pub fn slice_rows(&self, start: usize, end: usize) -> Dataset {
        Dataset {
            n: end - start,
            d: self.d,
            values: self.values[start * self.d..end * self.d].to_vec(),
        }
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut mean = vec![0.0; self.d];
        for row in self.rows() {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        let n = self.n.max(1) as f64;
        mean.iter_mut().for_each(|m| *m /= n);
        mean
    }
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_finite_and_ragged() {
        assert!(Dataset::new(1, 2, vec![0.0, f64::NAN]).is_err());
        assert!(Dataset::new(2, 2, vec![0.0; 3]).is_err());
        assert!(Dataset::from_rows(&[vec![1.0, 2.0], vec![3.0]]).is_err());
    }

    #[test]
    fn rows_and_mean() {
        let ds = Dataset::from_rows(&[[1.0, 2.0], [3.0, 6.0]]).unwrap();
        assert_eq!(ds.row(1), &[3.0, 6.0]);
        assert_eq!(ds.mean(), vec![2.0, 4.0]);
        assert_eq!(ds.slice_rows(1, 2).row(0), &[3.0, 6.0]);
    }
}
