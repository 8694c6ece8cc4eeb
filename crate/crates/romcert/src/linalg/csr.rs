use crate::error::{Error, Result};
use nalgebra::DMatrix;

/// Compressed sparse row matrix over f64. Column indices are sorted and
/// unique within each row; duplicate triplets are summed on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Csr {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl Csr {
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self> {
        let mut per_row: Vec<Vec<(usize, f64)>> = vec![Vec::new(); nrows];
        for &(i, j, v) in triplets {
            if i >= nrows || j >= ncols {
                return Err(Error::InvalidArgument(format!(
                    "triplet ({i},{j}) outside {nrows}x{ncols}"
                )));
            }
            per_row[i].push((j, v));
        }
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for row in &mut per_row {
            row.sort_by_key(|&(j, _)| j);
            let mut last: Option<usize> = None;
            for &(j, v) in row.iter() {
                if last == Some(j) {
                    *values.last_mut().unwrap() += v;
                } else {
                    col_idx.push(j);
                    values.push(v);
                    last = Some(j);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Ok(Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            nrows: n,
            ncols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let lo = self.row_ptr[i];
        let hi = self.row_ptr[i + 1];
        (&self.col_idx[lo..hi], &self.values[lo..hi])
    }

    /// True when both matrices have identical dimensions and nonzero layout,
    /// regardless of the stored values.
    pub fn same_pattern(&self, other: &Csr) -> bool {
        self.nrows == other.nrows
            && self.ncols == other.ncols
            && self.row_ptr == other.row_ptr
            && self.col_idx == other.col_idx
    }

    /// y = A x
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(y.len(), self.nrows);
        for i in 0..self.nrows {
            let lo = self.row_ptr[i];
            let hi = self.row_ptr[i + 1];
            let mut acc = 0.0;
            for (v, &c) in self.values[lo..hi].iter().zip(&self.col_idx[lo..hi]) {
                acc += v * x[c];
            }
            y[i] = acc;
        }
    }

    /// y += alpha * A x
    pub fn mul_vec_add(&self, alpha: f64, x: &[f64], y: &mut [f64]) {
        for i in 0..self.nrows {
            let lo = self.row_ptr[i];
            let hi = self.row_ptr[i + 1];
            let mut acc = 0.0;
            for (v, &c) in self.values[lo..hi].iter().zip(&self.col_idx[lo..hi]) {
                acc += v * x[c];
            }
            y[i] += alpha * acc;
        }
    }

    /// y = A^T x
    pub fn mul_vec_transpose(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.nrows);
        debug_assert_eq!(y.len(), self.ncols);
        y.fill(0.0);
        for i in 0..self.nrows {
            let lo = self.row_ptr[i];
            let hi = self.row_ptr[i + 1];
            let xi = x[i];
            for k in lo..hi {
                y[self.col_idx[k]] += self.values[k] * xi;
            }
        }
    }

    pub fn transpose(&self) -> Csr {
        let mut triplets = Vec::with_capacity(self.nnz());
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (j, v) in cols.iter().zip(vals) {
                triplets.push((*j, i, *v));
            }
        }
        Csr::from_triplets(self.ncols, self.nrows, &triplets).expect("transpose within bounds")
    }

    /// I - c * A (square matrices only). The result keeps the union pattern of
    /// A and the diagonal, so the layout is stable across parameter values.
    pub fn identity_minus_scaled(&self, c: f64) -> Result<Csr> {
        if self.nrows != self.ncols {
            return Err(Error::DimensionMismatch {
                context: "identity_minus_scaled".into(),
                expected: self.nrows,
                got: self.ncols,
            });
        }
        let mut triplets = Vec::with_capacity(self.nnz() + self.nrows);
        for i in 0..self.nrows {
            triplets.push((i, i, 1.0));
            let (cols, vals) = self.row(i);
            for (j, v) in cols.iter().zip(vals) {
                triplets.push((i, *j, -c * v));
            }
        }
        Csr::from_triplets(self.nrows, self.ncols, &triplets)
    }

    /// Half-bandwidths (lower, upper) of the stored pattern.
    pub fn bandwidths(&self) -> (usize, usize) {
        let mut kl = 0usize;
        let mut ku = 0usize;
        for i in 0..self.nrows {
            let (cols, _) = self.row(i);
            for &j in cols {
                if j < i {
                    kl = kl.max(i - j);
                } else {
                    ku = ku.max(j - i);
                }
            }
        }
        (kl, ku)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nrows, self.ncols);
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (j, v) in cols.iter().zip(vals) {
                m[(i, *j)] = *v;
            }
        }
        m
    }

    /// B = A V for a dense V, one sparse pass per column.
    pub fn mul_dense(&self, v: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.nrows, v.ncols());
        let mut col = vec![0.0; self.nrows];
        let mut x = vec![0.0; self.ncols];
        for c in 0..v.ncols() {
            for r in 0..self.ncols {
                x[r] = v[(r, c)];
            }
            self.mul_vec(&x, &mut col);
            for r in 0..self.nrows {
                out[(r, c)] = col[r];
            }
        }
        out
    }
}

/// Square matrix stored by diagonals, a cache for matrices whose nonzeros
/// sit on a handful of fixed offsets (the discretized operators here are
/// narrowly banded, possibly with two far block diagonals). Multiplication
/// walks whole diagonals instead of 3-element rows, which vectorizes and
/// runs several times faster inside adaptive-solver stage loops.
#[derive(Debug, Clone)]
pub struct Dia {
    n: usize,
    /// Sorted column-minus-row offsets.
    offsets: Vec<isize>,
    /// `diags[j][i] = A[i, i + offsets[j]]`, zero where out of range.
    diags: Vec<Vec<f64>>,
}

impl Dia {
    /// Repack a square CSR matrix whose pattern uses at most `max_offsets`
    /// distinct diagonals; returns None otherwise.
    pub fn try_from_csr(a: &Csr, max_offsets: usize) -> Option<Self> {
        if a.nrows() != a.ncols() {
            return None;
        }
        let n = a.nrows();
        let mut offsets: Vec<isize> = Vec::new();
        for i in 0..n {
            let (cols, _) = a.row(i);
            for &j in cols {
                let d = j as isize - i as isize;
                if let Err(pos) = offsets.binary_search(&d) {
                    if offsets.len() == max_offsets {
                        return None;
                    }
                    offsets.insert(pos, d);
                }
            }
        }
        let mut diags = vec![vec![0.0; n]; offsets.len()];
        for i in 0..n {
            let (cols, vals) = a.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                let d = j as isize - i as isize;
                let slot = offsets.binary_search(&d).expect("offset collected above");
                diags[slot][i] = v;
            }
        }
        Some(Self { n, offsets, diags })
    }

    /// y += alpha * A x
    pub fn mul_vec_add(&self, alpha: f64, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        debug_assert_eq!(y.len(), self.n);
        for (d, diag) in self.offsets.iter().zip(&self.diags) {
            let (lo, hi) = if *d >= 0 {
                (0usize, self.n - *d as usize)
            } else {
                ((-d) as usize, self.n)
            };
            let xs = &x[(lo as isize + d) as usize..];
            for ((yi, di), xi) in y[lo..hi].iter_mut().zip(&diag[lo..hi]).zip(xs) {
                *yi += alpha * di * xi;
            }
        }
    }

    /// y = A x
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        y.fill(0.0);
        self.mul_vec_add(1.0, x, y);
    }
}
