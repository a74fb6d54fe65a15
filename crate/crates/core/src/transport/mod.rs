//! Continuous multilinear (Q1) elements on the space-time grid: values of
//! the nodal basis and of `(d/dt + v . grad_x)` applied to it at Gauss
//! points, plus interpolation and quadrature norms.

pub mod quadrature;

use crate::error::{invalid, Result};
use crate::expr::{EvalContext, Expression, Var};
use crate::geometry::SpaceTimeGrid;
use crate::sparse::CsrMatrix;

pub use quadrature::{gauss_legendre, integrate_box, QuadratureRule};

/// Default Gauss points per axis: exact for every STILS integrand of Q1 functions.
pub const DEFAULT_QUAD_ORDER: usize = 2;

/// Basis values `S` (quad points x nodes) and global weights `W`.
#[derive(Debug, Clone)]
pub struct BasisEval {
    values: CsrMatrix,
    weights: Vec<f64>,
    points: Vec<f64>,
    ndim: usize,
}

impl BasisEval {
    pub fn values(&self) -> &CsrMatrix {
        &self.values
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn nquad(&self) -> usize {
        self.weights.len()
    }

    pub fn ndof(&self) -> usize {
        self.values.ncols()
    }

    /// Space-time coordinates `(t, x[, y])` of quadrature point `q`.
    pub fn point(&self, q: usize) -> &[f64] {
        &self.points[q * self.ndim..(q + 1) * self.ndim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.points.chunks_exact(self.ndim)
    }

    /// `sqrt(sum_q W_q s_q^2)`.
    pub fn l2_norm_samples(&self, samples: &[f64]) -> Result<f64> {
        if samples.len() != self.nquad() {
            return Err(invalid(format!(
                "{} samples for {} quadrature points",
                samples.len(),
                self.nquad()
            )));
        }
        Ok(self.weights.iter().zip(samples).map(|(w, s)| w * s * s).sum::<f64>().sqrt())
    }

    pub fn l2_norm_coefficients(&self, coefficients: &[f64]) -> Result<f64> {
        if coefficients.len() != self.ndof() {
            return Err(invalid(format!(
                "{} coefficients for {} nodes",
                coefficients.len(),
                self.ndof()
            )));
        }
        self.l2_norm_samples(&self.values.mul_vec(coefficients))
    }

    /// Evaluates `field` at every quadrature point, velocity bound to `v`.
    pub fn sample(&self, field: &Expression, v: &[f64]) -> Result<Vec<f64>> {
        let sd = self.ndim - 1;
        check_field_vars(field, sd, v.len())?;
        let mut ctx = EvalContext::new();
        ctx.bind_velocity(v);
        self.points()
            .map(|p| {
                ctx.set(Var::T, p[0]);
                ctx.bind_space(&p[1..]);
                field.eval_finite(&ctx)
            })
            .collect()
    }
}

/// Either quadrature-point samples or nodal coefficients.
#[derive(Debug, Clone, Copy)]
pub enum FieldValues<'a> {
    Samples(&'a [f64]),
    Coefficients(&'a [f64]),
}

pub fn l2_norm(values: FieldValues<'_>, basis: &BasisEval) -> Result<f64> {
    match values {
        FieldValues::Samples(s) => basis.l2_norm_samples(s),
        FieldValues::Coefficients(c) => basis.l2_norm_coefficients(c),
    }
}

/// `D`: values of `(d/dt + v . grad_x) phi_j` at the quadrature points.
#[derive(Debug, Clone)]
pub struct AdvectionSamples {
    matrix: CsrMatrix,
    velocity: Vec<f64>,
}

impl AdvectionSamples {
    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn velocity(&self) -> &[f64] {
        &self.velocity
    }

    pub fn apply(&self, coefficients: &[f64]) -> Vec<f64> {
        self.matrix.mul_vec(coefficients)
    }
}

/// Walks cells row-major and, per quadrature point, hands the callback the
/// global point, its weight, the corner node indices and the local basis
/// values and gradients (gradient axis 0 = time).
fn for_each_point<F>(grid: &SpaceTimeGrid, rule: &QuadratureRule, mut f: F)
where
    F: FnMut(&[f64], f64, &[usize], &[f64], &[Vec<f64>]),
{
    let ndim = grid.ndim();
    assert_eq!(rule.dim(), ndim, "quadrature rule dimension must match the grid");
    let cells = grid.cells();
    let widths = grid.widths();
    let cell_strides = crate::geometry::strides(&cells);
    let node_strides = grid.node_strides();
    let ncorner = 1usize << ndim;
    let volume: f64 = widths.iter().product();

    let mut corners = vec![0usize; ncorner];
    let mut phi = vec![0.0; ncorner];
    let mut grad = vec![vec![0.0; ndim]; ncorner];
    let mut global = vec![0.0; ndim];
    let mut lo = vec![0.0; ndim];

    for cell in 0..grid.cell_count() {
        let mut rem = cell;
        let mut base = 0;
        for a in 0..ndim {
            let i = rem / cell_strides[a];
            rem %= cell_strides[a];
            base += i * node_strides[a];
            lo[a] = grid.coordinate(a, i);
        }
        for (k, c) in corners.iter_mut().enumerate() {
            // bit a of k selects the upper node on axis a (axis 0 is the top bit)
            *c = base
                + (0..ndim)
                    .filter(|&a| k >> (ndim - 1 - a) & 1 == 1)
                    .map(|a| node_strides[a])
                    .sum::<usize>();
        }
        for (xi, w) in rule.points().iter().zip(rule.weights()) {
            for a in 0..ndim {
                global[a] = lo[a] + xi[a] * widths[a];
            }
            for k in 0..ncorner {
                let mut p = 1.0;
                for a in 0..ndim {
                    let up = k >> (ndim - 1 - a) & 1 == 1;
                    p *= if up { xi[a] } else { 1.0 - xi[a] };
                }
                phi[k] = p;
                for a in 0..ndim {
                    let mut g = 1.0;
                    for b in 0..ndim {
                        let up = k >> (ndim - 1 - b) & 1 == 1;
                        g *= if b == a {
                            if up {
                                1.0 / widths[b]
                            } else {
                                -1.0 / widths[b]
                            }
                        } else if up {
                            xi[b]
                        } else {
                            1.0 - xi[b]
                        };
                    }
                    grad[k][a] = g;
                }
            }
            f(&global, w * volume, &corners, &phi, &grad);
        }
    }
}

fn csr_from_rows(nrows: usize, ncols: usize, per_row: usize, cols: Vec<usize>, vals: Vec<f64>) -> CsrMatrix {
    let row_ptr = (0..=nrows).map(|r| r * per_row).collect();
    CsrMatrix::from_raw(nrows, ncols, row_ptr, cols, vals).expect("assembled CSR is well formed")
}

pub fn assemble_basis(grid: &SpaceTimeGrid, rule: &QuadratureRule) -> Result<BasisEval> {
    if rule.dim() != grid.ndim() {
        return Err(invalid(format!(
            "{}-dimensional rule for a {}-dimensional space-time grid",
            rule.dim(),
            grid.ndim()
        )));
    }
    let ncorner = 1usize << grid.ndim();
    let nquad = grid.cell_count() * rule.len();
    let mut cols = Vec::with_capacity(nquad * ncorner);
    let mut vals = Vec::with_capacity(nquad * ncorner);
    let mut weights = Vec::with_capacity(nquad);
    let mut points = Vec::with_capacity(nquad * grid.ndim());
    for_each_point(grid, rule, |p, w, corners, phi, _| {
        points.extend_from_slice(p);
        weights.push(w);
        cols.extend_from_slice(corners);
        vals.extend_from_slice(phi);
    });
    Ok(BasisEval {
        values: csr_from_rows(nquad, grid.node_count(), ncorner, cols, vals),
        weights,
        points,
        ndim: grid.ndim(),
    })
}

pub fn assemble_advection(grid: &SpaceTimeGrid, v: &[f64], rule: &QuadratureRule) -> Result<AdvectionSamples> {
    if v.len() != grid.space_dim() {
        return Err(invalid(format!(
            "velocity has {} components, grid is {}-dimensional",
            v.len(),
            grid.space_dim()
        )));
    }
    if rule.dim() != grid.ndim() {
        return Err(invalid("quadrature rule dimension must match the grid"));
    }
    let ncorner = 1usize << grid.ndim();
    let nquad = grid.cell_count() * rule.len();
    let mut cols = Vec::with_capacity(nquad * ncorner);
    let mut vals = Vec::with_capacity(nquad * ncorner);
    for_each_point(grid, rule, |_, _, corners, _, grad| {
        cols.extend_from_slice(corners);
        vals.extend(grad.iter().map(|g| g[0] + v.iter().zip(&g[1..]).map(|(vi, gi)| vi * gi).sum::<f64>()));
    });
    Ok(AdvectionSamples {
        matrix: csr_from_rows(nquad, grid.node_count(), ncorner, cols, vals),
        velocity: v.to_vec(),
    })
}

fn check_field_vars(field: &Expression, space_dim: usize, vel_dim: usize) -> Result<()> {
    let allowed: Vec<Var> = std::iter::once(Var::T)
        .chain((0..space_dim).map(Var::space))
        .chain((0..vel_dim).map(Var::velocity))
        .collect();
    field.check_vars(&allowed, "field")
}

/// Nodal interpolant: coefficient `j` is `field` at node `j`.
pub fn interpolate(field: &Expression, grid: &SpaceTimeGrid, v: &[f64]) -> Result<Vec<f64>> {
    check_field_vars(field, grid.space_dim(), v.len())?;
    let mut ctx = EvalContext::new();
    ctx.bind_velocity(v);
    (0..grid.node_count())
        .map(|n| {
            let p = grid.node_point(n);
            ctx.set(Var::T, p[0]);
            ctx.bind_space(&p[1..]);
            field.eval_finite(&ctx)
        })
        .collect()
}
