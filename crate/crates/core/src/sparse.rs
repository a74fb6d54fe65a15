//! Compressed sparse row matrices and the handful of kernels the solver needs.

use crate::error::{invalid, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn from_raw(
        nrows: usize,
        ncols: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if row_ptr.len() != nrows + 1 || row_ptr[0] != 0 || *row_ptr.last().unwrap() != col_idx.len() {
            return Err(invalid("malformed CSR row pointer"));
        }
        if col_idx.len() != values.len() {
            return Err(invalid("CSR column and value arrays differ in length"));
        }
        if row_ptr.windows(2).any(|w| w[0] > w[1]) || col_idx.iter().any(|&c| c >= ncols) {
            return Err(invalid("CSR structure out of range"));
        }
        Ok(Self { nrows, ncols, row_ptr, col_idx, values })
    }

    /// Builds from `(row, col, value)` triplets; duplicates are summed in input order.
    pub fn from_triplets(nrows: usize, ncols: usize, mut triplets: Vec<(usize, usize, f64)>) -> Result<Self> {
        if triplets.iter().any(|&(r, c, _)| r >= nrows || c >= ncols) {
            return Err(invalid("triplet index out of range"));
        }
        triplets.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; nrows + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..nrows {
            row_ptr[r + 1] += row_ptr[r];
        }
        Ok(Self { nrows, ncols, row_ptr, col_idx, values })
    }

    pub fn diagonal_matrix(diag: &[f64]) -> Self {
        let n = diag.len();
        Self {
            nrows: n,
            ncols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: diag.to_vec(),
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

    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.row_ptr[r], self.row_ptr[r + 1]);
        (&self.col_idx[a..b], &self.values[a..b])
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (cols, vals) = self.row(r);
        cols.iter().position(|&j| j == c).map_or(0.0, |k| vals[k])
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols, "matvec: input length");
        assert_eq!(y.len(), self.nrows, "matvec: output length");
        for (r, yr) in y.iter_mut().enumerate() {
            let (cols, vals) = self.row(r);
            *yr = cols.iter().zip(vals).map(|(&c, v)| v * x[c]).sum();
        }
    }

    /// `A^T x`
    pub fn transpose_mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.nrows, "transpose matvec: input length");
        let mut y = vec![0.0; self.ncols];
        for (r, xr) in x.iter().enumerate() {
            let (cols, vals) = self.row(r);
            for (&c, v) in cols.iter().zip(vals) {
                y[c] += v * xr;
            }
        }
        y
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols)).map(|r| self.get(r, r)).collect()
    }

    /// `A^T diag(w) A`, assembled from the upper triangle and mirrored so the
    /// result is bitwise symmetric.
    pub fn weighted_gram(&self, w: &[f64]) -> Result<CsrMatrix> {
        if w.len() != self.nrows {
            return Err(invalid(format!(
                "weight vector has length {}, matrix has {} rows",
                w.len(),
                self.nrows
            )));
        }
        let mut upper = Vec::new();
        for (r, &wr) in w.iter().enumerate() {
            let (cols, vals) = self.row(r);
            for (a, (&ci, &vi)) in cols.iter().zip(vals).enumerate() {
                let wv = wr * vi;
                for (&cj, &vj) in cols[a..].iter().zip(&vals[a..]) {
                    let (i, j) = if ci <= cj { (ci, cj) } else { (cj, ci) };
                    upper.push((i, j, wv * vj));
                }
            }
        }
        let upper = CsrMatrix::from_triplets(self.ncols, self.ncols, upper)?;
        let mut full = Vec::with_capacity(2 * upper.nnz());
        for r in 0..upper.nrows {
            let (cols, vals) = upper.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                full.push((r, c, v));
                if c != r {
                    full.push((c, r, v));
                }
            }
        }
        CsrMatrix::from_triplets(self.ncols, self.ncols, full)
    }

    /// Keeps the rows and columns whose `map` entry is `Some`, renumbered.
    pub fn restrict(&self, map: &[Option<usize>], reduced: usize) -> CsrMatrix {
        let mut row_ptr = vec![0];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        for r in 0..self.nrows {
            if map[r].is_none() {
                continue;
            }
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                if let Some(rc) = map[c] {
                    col_idx.push(rc);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        CsrMatrix { nrows: reduced, ncols: reduced, row_ptr, col_idx, values }
    }

    /// Largest `|A_ij - A_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                worst = worst.max((v - self.get(c, r)).abs());
            }
        }
        worst
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.ncols]; self.nrows];
        for (r, row) in d.iter_mut().enumerate() {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                row[c] += v;
            }
        }
        d
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
