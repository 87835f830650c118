//! Compressed sparse rows plus thin wrappers over faer factorizations.

use crate::error::{GlError, Result};
use faer::prelude::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, Side};

#[derive(Clone, Debug)]
pub struct Csr {
    pub nrows: usize,
    pub ncols: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl Csr {
    /// Duplicate entries are summed.
    pub fn from_triplets(nrows: usize, ncols: usize, mut t: Vec<(usize, usize, f64)>) -> Self {
        t.sort_unstable_by_key(|&(i, j, _)| (i, j));
        let mut indptr = vec![0usize; nrows + 1];
        let mut indices = Vec::with_capacity(t.len());
        let mut values: Vec<f64> = Vec::with_capacity(t.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in t {
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(j);
                values.push(v);
                indptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..nrows {
            indptr[i + 1] += indptr[i];
        }
        Csr { nrows, ncols, indptr, indices, values }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows)
            .flat_map(move |i| (self.indptr[i]..self.indptr[i + 1]).map(move |k| (i, self.indices[k], self.values[k])))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let row = &self.indices[self.indptr[i]..self.indptr[i + 1]];
        match row.binary_search(&j) {
            Ok(k) => self.values[self.indptr[i] + k],
            Err(_) => 0.0,
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        for i in 0..self.nrows {
            let mut s = 0.0;
            for k in self.indptr[i]..self.indptr[i + 1] {
                s += self.values[k] * x[self.indices[k]];
            }
            y[i] = s;
        }
    }

    pub fn transpose(&self) -> Csr {
        let t = self.triplets().map(|(i, j, v)| (j, i, v)).collect();
        Csr::from_triplets(self.ncols, self.nrows, t)
    }

    /// Max |A_ij - A_ji| over stored entries, relative to max |A_ij|.
    pub fn symmetry_defect(&self) -> f64 {
        let mut d = 0.0f64;
        let mut m = 0.0f64;
        for (i, j, v) in self.triplets() {
            d = d.max((v - self.get(j, i)).abs());
            m = m.max(v.abs());
        }
        if m == 0.0 {
            0.0
        } else {
            d / m
        }
    }

    /// A + s I
    pub fn shifted(&self, s: f64) -> Csr {
        let mut t: Vec<_> = self.triplets().collect();
        t.extend((0..self.nrows).map(|i| (i, i, s)));
        Csr::from_triplets(self.nrows, self.ncols, t)
    }

    pub fn add(&self, other: &Csr, scale: f64) -> Csr {
        let mut t: Vec<_> = self.triplets().collect();
        t.extend(other.triplets().map(|(i, j, v)| (i, j, scale * v)));
        Csr::from_triplets(self.nrows, self.ncols, t)
    }

    /// Principal submatrix on the given (sorted) index set.
    /// A^T A, accumulated from outer products of the rows.
    pub fn gram(&self) -> Csr {
        let mut t = Vec::new();
        for i in 0..self.nrows {
            let (lo, hi) = (self.indptr[i], self.indptr[i + 1]);
            for p in lo..hi {
                for q in lo..hi {
                    t.push((self.indices[p], self.indices[q], self.values[p] * self.values[q]));
                }
            }
        }
        Csr::from_triplets(self.ncols, self.ncols, t)
    }

    pub fn submatrix(&self, keep: &[usize]) -> Csr {
        let mut map = vec![usize::MAX; self.nrows];
        for (k, &i) in keep.iter().enumerate() {
            map[i] = k;
        }
        let t = self
            .triplets()
            .filter(|&(i, j, _)| map[i] != usize::MAX && map[j] != usize::MAX)
            .map(|(i, j, v)| (map[i], map[j], v))
            .collect();
        Csr::from_triplets(keep.len(), keep.len(), t)
    }

    fn to_faer(&self) -> Result<SparseColMat<usize, f64>> {
        let t: Vec<Triplet<usize, usize, f64>> = self.triplets().map(|(i, j, v)| Triplet::new(i, j, v)).collect();
        SparseColMat::<usize, f64>::try_new_from_triplets(self.nrows, self.ncols, &t)
            .map_err(|e| GlError::Linalg(format!("sparse build: {e:?}")))
    }
}

fn col(b: &[f64]) -> Mat<f64> {
    Mat::<f64>::from_fn(b.len(), 1, |i, _| b[i])
}

pub struct SparseLu {
    lu: faer::sparse::linalg::solvers::Lu<usize, f64>,
}

impl SparseLu {
    pub fn new(a: &Csr) -> Result<Self> {
        let lu = a.to_faer()?.sp_lu().map_err(|e| GlError::Linalg(format!("sparse LU: {e:?}")))?;
        Ok(SparseLu { lu })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let x = self.lu.solve(&col(b));
        (0..b.len()).map(|i| x[(i, 0)]).collect()
    }
}

/// Cholesky factor of a symmetric positive definite matrix; construction fails otherwise.
pub struct SparseCholesky {
    llt: faer::sparse::linalg::solvers::Llt<usize, f64>,
}

impl SparseCholesky {
    pub fn new(a: &Csr) -> Result<Self> {
        let llt =
            a.to_faer()?.sp_cholesky(Side::Lower).map_err(|e| GlError::Linalg(format!("sparse Cholesky: {e:?}")))?;
        Ok(SparseCholesky { llt })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let x = self.llt.solve(&col(b));
        (0..b.len()).map(|i| x[(i, 0)]).collect()
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}
