//! Space-time least-squares (STILS) solve of the transport problem.
//!
//! Find `f` vanishing on the inflow boundary with
//! `B(f, g) = int (a.grad f)(a.grad g) = int G (a.grad g) = L(g)` for all
//! admissible `g`. With `D` the advection samples and `W` the quadrature
//! weights the discrete problem is the normal system `D^T W D f = D^T W G`.

use std::io::Write;

use crate::error::{invalid, Error, Result};
use crate::expr::Expression;
use crate::geometry::{classify_faces, constrained_dofs, ConstraintSet, SpaceTimeGrid, DEFAULT_FLUX_EPS};
use crate::lifting::{lift, LiftedField};
use crate::report::fmt_f64;
use crate::sparse::{dot, norm2, CsrMatrix};
use crate::transport::{assemble_advection, assemble_basis, AdvectionSamples, BasisEval, QuadratureRule, DEFAULT_QUAD_ORDER};

/// Relative slack on the `2T` stability bound.
pub const STABILITY_SLACK: f64 = 1e-8;

/// Reduced SPD system over the unconstrained nodes.
#[derive(Debug, Clone)]
pub struct NormalSystem {
    pub k: CsrMatrix,
    pub b: Vec<f64>,
    /// Full node index of each reduced unknown.
    pub free: Vec<usize>,
    /// Reduced index of each full node, `None` if constrained.
    pub map: Vec<Option<usize>>,
}

impl NormalSystem {
    /// Wraps an arbitrary SPD matrix with no constrained nodes.
    pub fn from_parts(k: CsrMatrix, b: Vec<f64>) -> Result<Self> {
        if k.nrows() != k.ncols() || k.nrows() != b.len() {
            return Err(invalid("system matrix and right-hand side sizes differ"));
        }
        let n = b.len();
        Ok(Self { k, b, free: (0..n).collect(), map: (0..n).map(Some).collect() })
    }

    pub fn reduced_len(&self) -> usize {
        self.free.len()
    }

    pub fn full_len(&self) -> usize {
        self.map.len()
    }

    pub fn expand(&self, reduced: &[f64]) -> Vec<f64> {
        let mut full = vec![0.0; self.full_len()];
        for (&n, &x) in self.free.iter().zip(reduced) {
            full[n] = x;
        }
        full
    }

    pub fn reduce(&self, full: &[f64]) -> Vec<f64> {
        self.free.iter().map(|&n| full[n]).collect()
    }
}

pub fn assemble_system(
    d: &AdvectionSamples,
    basis: &BasisEval,
    g_samples: &[f64],
    constraints: &ConstraintSet,
) -> Result<NormalSystem> {
    let dm = d.matrix();
    if dm.nrows() != basis.nquad() || dm.ncols() != basis.ndof() {
        return Err(invalid("advection samples and basis disagree in shape"));
    }
    if g_samples.len() != basis.nquad() {
        return Err(invalid(format!(
            "{} source samples for {} quadrature points",
            g_samples.len(),
            basis.nquad()
        )));
    }
    if g_samples.iter().any(|g| !g.is_finite()) {
        return Err(invalid("source samples must be finite"));
    }
    if constraints.node_count() != basis.ndof() {
        return Err(invalid("constraint set was built for a different grid"));
    }
    let (map, free) = constraints.free_index_map();
    let k = dm.weighted_gram(basis.weights())?.restrict(&map, free.len());
    let wg: Vec<f64> = basis.weights().iter().zip(g_samples).map(|(w, g)| w * g).collect();
    let b_full = dm.transpose_mul_vec(&wg);
    let b = free.iter().map(|&n| b_full[n]).collect();
    Ok(NormalSystem { k, b, free, map })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub tol: f64,
    /// `None` means ten times the number of unknowns.
    pub max_iter: Option<usize>,
    pub jacobi: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: None, jacobi: true }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(invalid(format!("solver tolerance must lie in (0, 1), got {}", self.tol)));
        }
        if self.max_iter == Some(0) {
            return Err(invalid("solver needs at least one iteration"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    /// Full-length coefficients, zero at constrained nodes.
    pub f: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
    pub tolerance: f64,
    /// `||f||`, filled in by [`solve_transport`].
    pub l2_f: Option<f64>,
    /// `||a.grad f - G||`, filled in by [`solve_transport`].
    pub l2_residual: Option<f64>,
}

/// Outcome of a preconditioned CG run on an SPD matrix.
#[derive(Debug, Clone)]
pub(crate) struct CgOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

/// Jacobi-preconditioned conjugate gradients for `K x = b`.
///
/// Stops when `||b - K x|| <= tol ||b||`, checked on the true residual.
pub(crate) fn pcg(
    k: &CsrMatrix,
    b: &[f64],
    x0: Option<&[f64]>,
    tol: f64,
    max_iter: usize,
    jacobi: bool,
) -> Result<CgOutcome> {
    let n = b.len();
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        return Ok(CgOutcome { x: vec![0.0; n], iterations: 0, residual: 0.0 });
    }
    let inv_diag: Vec<f64> = if jacobi {
        k.diagonal().iter().map(|&d| if d > 0.0 { 1.0 / d } else { 1.0 }).collect()
    } else {
        vec![1.0; n]
    };
    let mut x = x0.map_or_else(|| vec![0.0; n], <[f64]>::to_vec);
    let mut kx = vec![0.0; n];
    k.mul_vec_into(&x, &mut kx);
    let mut r: Vec<f64> = b.iter().zip(&kx).map(|(bi, ki)| bi - ki).collect();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(ri, di)| ri * di).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut kp = vec![0.0; n];
    let mut best = (norm2(&r) / bnorm, x.clone());
    if best.0 <= tol {
        return Ok(CgOutcome { x, iterations: 0, residual: best.0 });
    }

    for it in 1..=max_iter {
        k.mul_vec_into(&p, &mut kp);
        let pkp = dot(&p, &kp);
        if !(pkp > 0.0) {
            return Err(Error::NoConvergence { iterations: it, residual: best.0, best: best.1 });
        }
        let alpha = rz / pkp;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * kp[i];
        }
        let mut rel = norm2(&r) / bnorm;
        if rel <= tol {
            // confirm against the true residual; restart from it if the
            // recurrence has drifted
            k.mul_vec_into(&x, &mut kx);
            for i in 0..n {
                r[i] = b[i] - kx[i];
            }
            rel = norm2(&r) / bnorm;
            if rel <= tol {
                return Ok(CgOutcome { x, iterations: it, residual: rel });
            }
            for i in 0..n {
                z[i] = r[i] * inv_diag[i];
            }
            p.copy_from_slice(&z);
            rz = dot(&r, &z);
        } else {
            for i in 0..n {
                z[i] = r[i] * inv_diag[i];
            }
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
        if rel < best.0 {
            best = (rel, x.clone());
        }
    }
    Err(Error::NoConvergence { iterations: max_iter, residual: best.0, best: best.1 })
}

pub fn cg_solve(system: &NormalSystem, cfg: &SolverConfig) -> Result<Solution> {
    cfg.validate()?;
    let max_iter = cfg.max_iter.unwrap_or(10 * system.reduced_len().max(1));
    let out = pcg(&system.k, &system.b, None, cfg.tol, max_iter, cfg.jacobi).map_err(|e| match e {
        Error::NoConvergence { iterations, residual, best } => {
            Error::NoConvergence { iterations, residual, best: system.expand(&best) }
        }
        other => other,
    })?;
    Ok(Solution {
        f: system.expand(&out.x),
        iterations: out.iterations,
        residual: out.residual,
        tolerance: cfg.tol,
        l2_f: None,
        l2_residual: None,
    })
}

/// Data of one transport solve at fixed velocity.
#[derive(Debug, Clone)]
pub struct TransportCase {
    pub source: Expression,
    pub initial: Expression,
    pub inflow: Expression,
    pub velocity: Vec<f64>,
    pub grid: SpaceTimeGrid,
    pub solver: SolverConfig,
    pub quad_order: usize,
}

impl TransportCase {
    pub fn new(
        source: Expression,
        initial: Expression,
        inflow: Expression,
        velocity: Vec<f64>,
        grid: SpaceTimeGrid,
    ) -> Self {
        Self {
            source,
            initial,
            inflow,
            velocity,
            grid,
            solver: SolverConfig::default(),
            quad_order: DEFAULT_QUAD_ORDER,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TransportSolution {
    /// `u = f + g` at the nodes.
    pub u: Vec<f64>,
    pub f: Solution,
    pub g: LiftedField,
    /// `||G||` from the quadrature samples.
    pub l2_source: f64,
    pub basis: BasisEval,
}

/// Lifts the data, solves the homogeneous STILS problem for `f` and returns `u = f + g`.
pub fn solve_transport(case: &TransportCase) -> Result<TransportSolution> {
    let grid = &case.grid;
    let v = &case.velocity;
    let g = lift(&case.initial, &case.inflow, v, grid)?;
    let rule = QuadratureRule::gauss(case.quad_order, grid.ndim())?;
    let basis = assemble_basis(grid, &rule)?;
    let d = assemble_advection(grid, v, &rule)?;
    let faces = classify_faces(grid, v, DEFAULT_FLUX_EPS)?;
    let constraints = constrained_dofs(grid, &faces)?;
    let g_samples = basis.sample(&case.source, v)?;
    let system = assemble_system(&d, &basis, &g_samples, &constraints)?;
    let mut f = cg_solve(&system, &case.solver)?;

    let l2_source = basis.l2_norm_samples(&g_samples)?;
    f.l2_f = Some(basis.l2_norm_coefficients(&f.f)?);
    let df = d.apply(&f.f);
    let misfit: Vec<f64> = df.iter().zip(&g_samples).map(|(a, b)| a - b).collect();
    f.l2_residual = Some(basis.l2_norm_samples(&misfit)?);

    let u = f.f.iter().zip(&g.coefficients).map(|(a, b)| a + b).collect();
    Ok(TransportSolution { u, f, g, l2_source, basis })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityReport {
    /// `||f|| / ||G||`; `None` when `G` vanishes.
    pub ratio: Option<f64>,
    pub bound: f64,
    pub pass: bool,
}

/// Checks `||f|| <= 2T ||G||`.
pub fn stability_check(f: &Solution, g_norm: f64, t_final: f64) -> Result<StabilityReport> {
    let fnorm = f.l2_f.ok_or_else(|| invalid("solution carries no L2 norm"))?;
    let bound = 2.0 * t_final;
    if g_norm == 0.0 {
        if fnorm > f.tolerance {
            return Err(Error::Inconsistent(format!("source vanishes but ||f|| = {fnorm:e}")));
        }
        return Ok(StabilityReport { ratio: None, bound, pass: true });
    }
    let ratio = fnorm / g_norm;
    Ok(StabilityReport { ratio: Some(ratio), bound, pass: ratio <= bound * (1.0 + STABILITY_SLACK) })
}

/// Writes `t, x[, y], u, f, g`, one row per node in node order.
pub fn write_solution_csv<W: Write>(
    mut out: W,
    grid: &SpaceTimeGrid,
    u: &[f64],
    f: &[f64],
    g: &[f64],
) -> Result<()> {
    let space = ["x", "y"];
    let mut header = vec!["t"];
    header.extend(&space[..grid.space_dim()]);
    header.extend(["u", "f", "g"]);
    writeln!(out, "{}", header.join(","))?;
    for n in 0..grid.node_count() {
        let mut row: Vec<String> = grid.node_point(n).into_iter().map(fmt_f64).collect();
        row.extend([fmt_f64(u[n]), fmt_f64(f[n]), fmt_f64(g[n])]);
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

/// `||u - exact||` at the quadrature points of the solve.
pub fn l2_error(solution: &TransportSolution, exact: &Expression, v: &[f64]) -> Result<f64> {
    let basis = &solution.basis;
    let want = basis.sample(exact, v)?;
    let got = basis.values().mul_vec(&solution.u);
    let diff: Vec<f64> = got.iter().zip(&want).map(|(a, b)| a - b).collect();
    basis.l2_norm_samples(&diff)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub n: usize,
    pub h: f64,
    pub error: f64,
    /// `log(e_prev / e) / log(h_prev / h)`, absent on the coarsest level.
    pub order: Option<f64>,
    pub iterations: usize,
}

/// Solves `base` on `nt = nx = n` for each `n` in `ladder` and measures the
/// error against `exact`.
pub fn convergence_study(base: &TransportCase, exact: &Expression, ladder: &[usize]) -> Result<Vec<ConvergenceRow>> {
    if ladder.is_empty() {
        return Err(invalid("refinement ladder is empty"));
    }
    let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(ladder.len());
    for &n in ladder {
        let dim = base.grid.space_dim();
        let grid = SpaceTimeGrid::new(base.grid.t_final(), base.grid.domain().clone(), n, vec![n; dim])?;
        let case = TransportCase { grid, ..base.clone() };
        let sol = solve_transport(&case)?;
        let error = l2_error(&sol, exact, &case.velocity)?;
        let h = 1.0 / n as f64;
        let order = rows.last().map(|p| (p.error / error).ln() / (p.h / h).ln());
        rows.push(ConvergenceRow { n, h, error, order, iterations: sol.f.iterations });
    }
    Ok(rows)
}

pub fn write_convergence_csv<W: Write>(mut out: W, rows: &[ConvergenceRow]) -> Result<()> {
    writeln!(out, "n,h,l2_error,order,iterations")?;
    for r in rows {
        let order = r.order.map(fmt_f64).unwrap_or_default();
        writeln!(out, "{},{},{},{},{}", r.n, fmt_f64(r.h), fmt_f64(r.error), order, r.iterations)?;
    }
    Ok(())
}
