//! Gauss-Legendre rules on `[0,1]` and their tensor products.

use crate::error::{invalid, Result};

/// `n`-point Gauss-Legendre nodes and weights on `[0, 1]`, ascending.
///
/// Exact for polynomials of degree `<= 2n - 1`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss-Legendre rule needs at least one point");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Chebyshev-like initial guess for the i-th largest root on [-1, 1]
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() <= 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        // map to [0, 1]
        nodes[i] = 0.5 * (1.0 - z);
        nodes[n - 1 - i] = 0.5 * (1.0 + z);
        weights[i] = 0.5 * w;
        weights[n - 1 - i] = 0.5 * w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.5;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, z);
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Tensor-product Gauss rule on the reference cell `[0,1]^dim`.
///
/// Points are ordered row-major: the last axis varies fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    order: usize,
    dim: usize,
    points: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn gauss(order: usize, dim: usize) -> Result<Self> {
        if order < 1 {
            return Err(invalid("quadrature order must be at least 1"));
        }
        if dim == 0 {
            return Err(invalid("quadrature dimension must be positive"));
        }
        let (x, w) = gauss_legendre(order);
        let total = order.pow(dim as u32);
        let mut points = Vec::with_capacity(total);
        let mut weights = Vec::with_capacity(total);
        for flat in 0..total {
            let mut rem = flat;
            let mut p = vec![0.0; dim];
            let mut wt = 1.0;
            for a in (0..dim).rev() {
                let i = rem % order;
                rem /= order;
                p[a] = x[i];
                wt *= w[i];
            }
            points.push(p);
            weights.push(wt);
        }
        Ok(Self { order, dim, points, weights })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// Composite tensor Gauss integral of `f` over the box `[lo, hi]`, with
/// `cells[a]` equal subintervals on axis `a` and `order` points per subinterval.
pub fn integrate_box<F>(lo: &[f64], hi: &[f64], cells: &[usize], order: usize, mut f: F) -> f64
where
    F: FnMut(&[f64]) -> f64,
{
    let dim = lo.len();
    let (x, w) = gauss_legendre(order);
    let per_axis: Vec<Vec<(f64, f64)>> = (0..dim)
        .map(|a| {
            let h = (hi[a] - lo[a]) / cells[a] as f64;
            (0..cells[a])
                .flat_map(|c| {
                    let base = lo[a] + c as f64 * h;
                    x.iter().zip(&w).map(move |(xi, wi)| (base + xi * h, wi * h))
                })
                .collect()
        })
        .collect();
    let mut idx = vec![0usize; dim];
    let mut point = vec![0.0; dim];
    let mut total = 0.0;
    if per_axis.iter().any(|p| p.is_empty()) {
        return 0.0;
    }
    loop {
        let mut wt = 1.0;
        for a in 0..dim {
            let (p, wa) = per_axis[a][idx[a]];
            point[a] = p;
            wt *= wa;
        }
        total += wt * f(&point);
        // odometer increment, last axis fastest
        let mut a = dim;
        loop {
            if a == 0 {
                return total;
            }
            a -= 1;
            idx[a] += 1;
            if idx[a] < per_axis[a].len() {
                break;
            }
            idx[a] = 0;
        }
    }
}
