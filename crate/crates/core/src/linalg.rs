//! Small dense kernels: banded Cholesky and the symmetric tridiagonal
//! eigenproblem (implicit QL).

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

/// Cholesky factor of a symmetric positive definite banded matrix.
#[derive(Debug, Clone)]
pub struct BandCholesky {
    n: usize,
    bw: usize,
    // row i holds L[i][i-bw..=i]; slot bw is the diagonal
    band: Vec<f64>,
}

/// Half bandwidth: the largest `|i - j|` over stored entries.
pub fn bandwidth(a: &CsrMatrix) -> usize {
    (0..a.nrows())
        .flat_map(|r| a.row(r).0.iter().map(move |&c| r.abs_diff(c)))
        .max()
        .unwrap_or(0)
}

impl BandCholesky {
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        let n = a.nrows();
        let bw = bandwidth(a);
        let w = bw + 1;
        let mut band = vec![0.0; n * w];
        for i in 0..n {
            let (cols, vals) = a.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                if j <= i {
                    band[i * w + bw - (i - j)] += v;
                }
            }
        }
        for i in 0..n {
            let i0 = i.saturating_sub(bw);
            for j in i0..=i {
                let k0 = i0.max(j.saturating_sub(bw));
                let mut s = band[i * w + bw - (i - j)];
                for k in k0..j {
                    s -= band[i * w + bw - (i - k)] * band[j * w + bw - (j - k)];
                }
                if i == j {
                    if !(s > 0.0) {
                        return Err(Error::Inconsistent(format!(
                            "matrix is not positive definite (pivot {s:e} at row {i})"
                        )));
                    }
                    band[i * w + bw] = s.sqrt();
                } else {
                    band[i * w + bw - (i - j)] = s / band[j * w + bw];
                }
            }
        }
        Ok(Self { n, bw, band })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let (n, bw, w) = (self.n, self.bw, self.bw + 1);
        assert_eq!(b.len(), n, "band solve: right-hand side length");
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in i.saturating_sub(bw)..i {
                s -= self.band[i * w + bw - (i - k)] * y[k];
            }
            y[i] = s / self.band[i * w + bw];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..n.min(i + bw + 1) {
                s -= self.band[k * w + bw - (k - i)] * y[k];
            }
            y[i] = s / self.band[i * w + bw];
        }
        y
    }
}

/// Eigenvalues and eigenvectors of the symmetric tridiagonal matrix with
/// diagonal `d` and off-diagonal `e` (`e.len() == d.len() - 1`).
///
/// Returns eigenvalues ascending; column `k` of the row-major matrix holds
/// the eigenvector of eigenvalue `k`.
pub fn tridiagonal_eigen(d: &[f64], e: &[f64]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = d.len();
    let mut d = d.to_vec();
    let mut e: Vec<f64> = e.iter().copied().chain(std::iter::once(0.0)).collect();
    let mut z: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return Err(Error::Inconsistent("tridiagonal QL failed to converge".into()));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut i = m;
            let mut early = false;
            while i > l {
                i -= 1;
                let mut f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    early = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                for row in z.iter_mut() {
                    f = row[i + 1];
                    row[i + 1] = s * row[i] + c * f;
                    row[i] = c * row[i] - s * f;
                }
            }
            if early {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
    let vals = order.iter().map(|&k| d[k]).collect();
    let vecs = (0..n).map(|i| order.iter().map(|&k| z[i][k]).collect()).collect();
    Ok((vals, vecs))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian(n: usize) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        CsrMatrix::from_triplets(n, n, t).unwrap()
    }

    #[test]
    fn band_cholesky_solves() {
        let a = laplacian(50);
        assert_eq!(bandwidth(&a), 1);
        let f = BandCholesky::factor(&a).unwrap();
        let x: Vec<f64> = (0..50).map(|i| (i as f64 * 0.3).sin()).collect();
        let b = a.mul_vec(&x);
        for (got, want) in f.solve(&b).iter().zip(&x) {
            assert!((got - want).abs() < 1e-10);
        }
    }

    #[test]
    fn band_cholesky_rejects_indefinite() {
        let a = CsrMatrix::from_triplets(2, 2, vec![(0, 0, 1.0), (0, 1, 2.0), (1, 0, 2.0), (1, 1, 1.0)]).unwrap();
        assert!(BandCholesky::factor(&a).is_err());
    }

    #[test]
    fn tridiagonal_matches_closed_form() {
        // eigenvalues of tridiag(-1, 2, -1) are 2 - 2 cos(k pi / (n + 1))
        let n = 12;
        let (vals, vecs) = tridiagonal_eigen(&vec![2.0; n], &vec![-1.0; n - 1]).unwrap();
        for (k, v) in vals.iter().enumerate() {
            let exact = 2.0 - 2.0 * ((k + 1) as f64 * std::f64::consts::PI / (n + 1) as f64).cos();
            assert!((v - exact).abs() < 1e-13);
        }
        // A z = lambda z for the smallest pair
        let z: Vec<f64> = vecs.iter().map(|row| row[0]).collect();
        let az = laplacian(n).mul_vec(&z);
        for (a, zi) in az.iter().zip(&z) {
            assert!((a - vals[0] * zi).abs() < 1e-12);
        }
    }

    #[test]
    fn one_by_one() {
        let (vals, vecs) = tridiagonal_eigen(&[3.0], &[]).unwrap();
        assert_eq!(vals, vec![3.0]);
        assert_eq!(vecs, vec![vec![1.0]]);
    }
}
