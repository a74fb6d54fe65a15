//! Discrete kinetic Poincare constant and the weight-function identity
//! behind the `||f|| <= 2T ||a.grad f||` bound.
//!
//! `C_h = 1 / sqrt(lambda_min)` where `lambda_min` is the smallest
//! eigenvalue of `K f = lambda M f` on the space of Q1 functions vanishing
//! on the inflow boundary, `K = D^T W D` and `M = S^T W S`.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::expr::{EvalContext, Expression, Var};
use crate::geometry::{
    classify_faces, constrained_dofs, FaceClass, FaceId, SpaceDomain, SpaceTimeGrid, DEFAULT_FLUX_EPS,
};
use crate::report::{csv_line, fmt_f64};
use crate::linalg::{bandwidth, tridiagonal_eigen, BandCholesky};
use crate::sparse::{dot, norm2, CsrMatrix};
use crate::stils::pcg;
use crate::transport::{assemble_advection, assemble_basis, integrate_box, QuadratureRule, DEFAULT_QUAD_ORDER};

/// Relative slack when certifying `C_h <= 2T`.
pub const BOUND_SLACK: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenConfig {
    /// Stop when `||K f - lambda M f|| / ||M f||` drops below this.
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    /// Relative residual for the inner CG solves.
    pub inner_tol: f64,
}

impl Default for EigenConfig {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 200, seed: 42, inner_tol: 1e-12 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RayleighResult {
    pub lambda_min: f64,
    pub c_h: f64,
    pub iterations: usize,
    pub residual: f64,
    /// Full-length eigenvector, `M`-normalized, zero at constrained nodes.
    pub eigenvector: Vec<f64>,
}

impl RayleighResult {
    pub fn bound(t_final: f64) -> f64 {
        2.0 * t_final
    }

    pub fn certifies(&self, t_final: f64) -> bool {
        self.c_h <= Self::bound(t_final) * (1.0 + BOUND_SLACK)
    }
}

/// Reduced stiffness and mass pencils for velocity `v`.
pub fn reduced_pencil(grid: &SpaceTimeGrid, v: &[f64]) -> Result<(CsrMatrix, CsrMatrix, Vec<usize>)> {
    let rule = QuadratureRule::gauss(DEFAULT_QUAD_ORDER, grid.ndim())?;
    let basis = assemble_basis(grid, &rule)?;
    let d = assemble_advection(grid, v, &rule)?;
    let faces = classify_faces(grid, v, DEFAULT_FLUX_EPS)?;
    let constraints = constrained_dofs(grid, &faces)?;
    let (map, free) = constraints.free_index_map();
    let k = d.matrix().weighted_gram(basis.weights())?.restrict(&map, free.len());
    let m = basis.values().weighted_gram(basis.weights())?.restrict(&map, free.len());
    Ok((k, m, free))
}

/// Direct banded factorization when affordable, otherwise CG.
enum InnerSolver<'a> {
    Band(BandCholesky),
    Cg { k: &'a CsrMatrix, tol: f64, cap: usize },
}

// flop budget n * bw^2 under which the banded factorization is used
const BAND_BUDGET: f64 = 2e9;

impl<'a> InnerSolver<'a> {
    fn new(k: &'a CsrMatrix, tol: f64) -> Result<Self> {
        let bw = bandwidth(k) as f64;
        if k.nrows() as f64 * bw * bw <= BAND_BUDGET {
            Ok(InnerSolver::Band(BandCholesky::factor(k)?))
        } else {
            Ok(InnerSolver::Cg { k, tol, cap: 20 * k.nrows() + 100 })
        }
    }

    fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        match self {
            InnerSolver::Band(f) => Ok(f.solve(rhs)),
            InnerSolver::Cg { k, tol, cap } => Ok(pcg(k, rhs, None, *tol, *cap, true)?.x),
        }
    }
}

// Krylov vectors kept per restart cycle
const KRYLOV_DIM: usize = 120;

/// Smallest generalized eigenpair of `(K, M)`.
///
/// Inverse iteration accelerated by Lanczos: the Krylov space of `K^-1 M`
/// built from the seeded start vector, `M`-orthonormalized with full
/// reorthogonalization. Each step costs one solve with `K`; `cfg.max_iter`
/// caps the total number of solves. Returns `(lambda, x, solves, residual)`.
pub fn smallest_eigenpair(k: &CsrMatrix, m: &CsrMatrix, cfg: &EigenConfig) -> Result<(f64, Vec<f64>, usize, f64)> {
    if !(cfg.tol > 0.0) || cfg.max_iter == 0 {
        return Err(invalid("eigen tolerance must be positive and the iteration cap at least 1"));
    }
    let n = k.nrows();
    if n == 0 {
        return Err(invalid("no unconstrained unknowns"));
    }
    let inner = InnerSolver::new(k, cfg.inner_tol)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut x: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();

    let mut solves = 0;
    let mut best = (f64::INFINITY, f64::INFINITY);
    while solves < cfg.max_iter {
        let mx = m.mul_vec(&x);
        let scale = dot(&x, &mx).sqrt();
        let mut q: Vec<Vec<f64>> = vec![x.iter().map(|v| v / scale).collect()];
        let mut mq: Vec<Vec<f64>> = vec![mx.iter().map(|v| v / scale).collect()];
        let mut alpha: Vec<f64> = Vec::new();
        let mut beta: Vec<f64> = Vec::new();

        x = loop {
            let j = alpha.len();
            let mut w = inner.solve(&mq[j])?;
            solves += 1;
            let a = dot(&mq[j], &w);
            for (wi, qi) in w.iter_mut().zip(&q[j]) {
                *wi -= a * qi;
            }
            if j > 0 {
                for (wi, qi) in w.iter_mut().zip(&q[j - 1]) {
                    *wi -= beta[j - 1] * qi;
                }
            }
            for _ in 0..2 {
                for (qi, mqi) in q.iter().zip(&mq) {
                    let c = dot(mqi, &w);
                    for (wk, qk) in w.iter_mut().zip(qi) {
                        *wk -= c * qk;
                    }
                }
            }
            alpha.push(a);
            let mw = m.mul_vec(&w);
            let b = dot(&w, &mw).max(0.0).sqrt();

            let last = solves >= cfg.max_iter || alpha.len() >= KRYLOV_DIM.min(n) || !(b > 1e-300);
            if alpha.len().is_multiple_of(4) || last {
                let (theta, s) = tridiagonal_eigen(&alpha, &beta)?;
                let top = theta.len() - 1;
                let coeffs: Vec<f64> = s.iter().map(|row| row[top]).collect();
                let mut y = vec![0.0; n];
                for (c, qi) in coeffs.iter().zip(&q) {
                    for (yk, qk) in y.iter_mut().zip(qi) {
                        *yk += c * qk;
                    }
                }
                let (lambda, residual) = rayleigh(k, m, &mut y);
                if residual < best.1 {
                    best = (lambda, residual);
                }
                if residual <= cfg.tol {
                    return Ok((lambda, y, solves, residual));
                }
                if last {
                    break y;
                }
            }
            beta.push(b);
            q.push(w.iter().map(|v| v / b).collect());
            mq.push(mw.iter().map(|v| v / b).collect());
        };
    }
    Err(Error::EigenNoConvergence { iterations: solves, lambda: best.0, residual: best.1 })
}

/// `M`-normalizes `y` in place and returns its Rayleigh quotient and
/// eigen-residual `||K y - lambda M y|| / ||M y||`.
fn rayleigh(k: &CsrMatrix, m: &CsrMatrix, y: &mut [f64]) -> (f64, f64) {
    let my = m.mul_vec(y);
    let s = dot(y, &my).sqrt();
    y.iter_mut().for_each(|v| *v /= s);
    let my: Vec<f64> = my.iter().map(|v| v / s).collect();
    let ky = k.mul_vec(y);
    let lambda = dot(y, &ky);
    let r: Vec<f64> = ky.iter().zip(&my).map(|(a, b)| a - lambda * b).collect();
    (lambda, norm2(&r) / norm2(&my))
}

pub fn discrete_constant(grid: &SpaceTimeGrid, v: &[f64], cfg: &EigenConfig) -> Result<RayleighResult> {
    let (k, m, free) = reduced_pencil(grid, v)?;
    let (lambda_min, x, iterations, residual) = smallest_eigenpair(&k, &m, cfg)?;
    if !(lambda_min > 0.0) {
        return Err(Error::Inconsistent(format!("nonpositive smallest eigenvalue {lambda_min:e}")));
    }
    let mut eigenvector = vec![0.0; grid.node_count()];
    for (&nidx, &xi) in free.iter().zip(&x) {
        eigenvector[nidx] = xi;
    }
    Ok(RayleighResult { lambda_min, c_h: 1.0 / lambda_min.sqrt(), iterations, residual, eigenvector })
}

/// One entry of a Poincare sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepCase {
    pub velocity: Vec<f64>,
    pub t_final: f64,
    pub nt: usize,
    pub nx: Vec<usize>,
    pub domain: SpaceDomain,
}

impl SweepCase {
    pub fn grid(&self) -> Result<SpaceTimeGrid> {
        SpaceTimeGrid::new(self.t_final, self.domain.clone(), self.nt, self.nx.clone())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub case: SweepCase,
    pub result: RayleighResult,
    pub pass: bool,
}

pub fn run_sweep(cases: &[SweepCase], cfg: &EigenConfig) -> Result<Vec<SweepRow>> {
    cases
        .iter()
        .map(|c| {
            let result = discrete_constant(&c.grid()?, &c.velocity, cfg)?;
            let pass = result.certifies(c.t_final);
            Ok(SweepRow { case: c.clone(), result, pass })
        })
        .collect()
}

fn join<T>(items: &[T], f: impl Fn(&T) -> String) -> String {
    items.iter().map(f).collect::<Vec<_>>().join(";")
}

/// Columns `v, T, nt, nx, lambda_min, C_h, bound_2T, pass`. Vector-valued
/// `v` and `nx` are written `;`-separated.
pub fn write_sweep_csv<W: Write>(mut out: W, rows: &[SweepRow]) -> Result<()> {
    out.write_all(csv_line(["v", "T", "nt", "nx", "lambda_min", "C_h", "bound_2T", "pass"]).as_bytes())?;
    for r in rows {
        let line = csv_line([
            join(&r.case.velocity, |v| fmt_f64(*v)),
            fmt_f64(r.case.t_final),
            r.case.nt.to_string(),
            join(&r.case.nx, |n| n.to_string()),
            fmt_f64(r.result.lambda_min),
            fmt_f64(r.result.c_h),
            fmt_f64(RayleighResult::bound(r.case.t_final)),
            r.pass.to_string(),
        ]);
        out.write_all(line.as_bytes())?;
    }
    Ok(())
}

/// `w(t) = t - T`: nonpositive on the slab, with `(d/dt + v . grad_x) w = 1`.
pub fn weight(t: f64, t_final: f64) -> f64 {
    t - t_final
}

/// `sup |w|` over the grid nodes; equals `T`, attained at `t = 0`.
pub fn weight_sup(grid: &SpaceTimeGrid) -> f64 {
    (0..=grid.nt()).map(|i| weight(grid.coordinate(0, i), grid.t_final()).abs()).fold(0.0, f64::max)
}

/// Largest `|f|` tolerated on the inflow boundary.
pub const INFLOW_TOL: f64 = 1e-10;
/// Tolerance on `|I - boundary|` and on the sign `I <= 0`.
pub const IDENTITY_TOL: f64 = 1e-8;

/// Interior and boundary sides of the divergence identity for `w f^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightCheckReport {
    /// `int_R (d/dt + v . grad_x)(w f^2)`
    pub interior: f64,
    /// `int_{outflow} w f^2 (n_t + v . n_x)`
    pub boundary: f64,
    pub identity_residual: f64,
    pub sign_pass: bool,
    pub inflow_max: f64,
    pub weight_sup: f64,
}

impl WeightCheckReport {
    pub fn pass(&self) -> bool {
        self.sign_pass && self.identity_residual <= IDENTITY_TOL
    }
}

/// Central difference of `g` along direction `dir` at `p`, step `1e-5` relative.
pub(crate) fn directional_derivative<F>(p: &[f64], dir: &[f64], mut g: F) -> Result<f64>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let scale = p.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    let h = 1e-5 * scale;
    let plus: Vec<f64> = p.iter().zip(dir).map(|(x, d)| x + h * d).collect();
    let minus: Vec<f64> = p.iter().zip(dir).map(|(x, d)| x - h * d).collect();
    Ok((g(&plus)? - g(&minus)?) / (2.0 * h))
}

/// Space-time box points of a face: free axes take the integration point,
/// the face axis is pinned.
fn face_point(face: FaceId, grid: &SpaceTimeGrid, free: &[f64]) -> Vec<f64> {
    let (axis, value) = match face {
        FaceId::TimeStart => (0, 0.0),
        FaceId::TimeEnd => (0, grid.t_final()),
        FaceId::Lower(a) => (a + 1, grid.domain().lower()[a]),
        FaceId::Upper(a) => (a + 1, grid.domain().upper()[a]),
    };
    let mut p = Vec::with_capacity(grid.ndim());
    let mut it = free.iter();
    for ax in 0..grid.ndim() {
        p.push(if ax == axis { value } else { *it.next().unwrap() });
    }
    p
}

/// Integrates `g` over one face with the grid's cells and `order` points.
fn integrate_face<F>(face: FaceId, grid: &SpaceTimeGrid, order: usize, mut g: F) -> f64
where
    F: FnMut(&[f64]) -> f64,
{
    let axis = match face {
        FaceId::TimeStart | FaceId::TimeEnd => 0,
        FaceId::Lower(a) | FaceId::Upper(a) => a + 1,
    };
    let origin = grid.origin();
    let top: Vec<f64> = std::iter::once(grid.t_final()).chain(grid.domain().upper().iter().copied()).collect();
    let cells = grid.cells();
    let keep: Vec<usize> = (0..grid.ndim()).filter(|&a| a != axis).collect();
    let lo: Vec<f64> = keep.iter().map(|&a| origin[a]).collect();
    let hi: Vec<f64> = keep.iter().map(|&a| top[a]).collect();
    let nc: Vec<usize> = keep.iter().map(|&a| cells[a]).collect();
    integrate_box(&lo, &hi, &nc, order, |free| g(&face_point(face, grid, free)))
}

fn eval_at(f: &Expression, p: &[f64], v: &[f64]) -> Result<f64> {
    f.eval_finite(&EvalContext::at(p[0], &p[1..], v))
}

/// Checks `int_R a.grad(w f^2) = int_{outflow} w f^2 (a.n) <= 0` for `f`
/// vanishing on the inflow boundary, by composite Gauss quadrature of
/// order `order` on the cells of `grid`.
pub fn proof_identity_check(f: &Expression, v: &[f64], grid: &SpaceTimeGrid, order: usize) -> Result<WeightCheckReport> {
    if v.len() != grid.space_dim() {
        return Err(invalid("velocity dimension does not match the grid"));
    }
    if order == 0 {
        return Err(invalid("quadrature order must be positive"));
    }
    let vars: Vec<Var> = std::iter::once(Var::T)
        .chain((0..grid.space_dim()).map(Var::space))
        .chain((0..v.len()).map(Var::velocity))
        .collect();
    f.check_vars(&vars, "test function")?;
    let t_final = grid.t_final();
    let faces = classify_faces(grid, v, DEFAULT_FLUX_EPS)?;

    // inflow samples: quadrature points and grid nodes of every inflow face
    let mut inflow_max = 0.0f64;
    let mut first_err: Option<Error> = None;
    for face in faces.inflow() {
        integrate_face(face, grid, order, |p| {
            match eval_at(f, p, v) {
                Ok(val) => inflow_max = inflow_max.max(val.abs()),
                Err(e) => {
                    first_err.get_or_insert(e);
                }
            }
            0.0
        });
    }
    let constraints = crate::geometry::ConstraintSet::for_faces(grid, faces.inflow());
    for &n in constraints.nodes() {
        inflow_max = inflow_max.max(eval_at(f, &grid.node_point(n), v)?.abs());
    }
    if let Some(e) = first_err {
        return Err(e);
    }
    if inflow_max > INFLOW_TOL {
        return Err(Error::PreconditionViolation(format!(
            "test function reaches |f| = {inflow_max:e} on the inflow boundary"
        )));
    }

    let dir: Vec<f64> = std::iter::once(1.0).chain(v.iter().copied()).collect();
    let wf2 = |p: &[f64]| -> Result<f64> {
        let val = eval_at(f, p, v)?;
        Ok(weight(p[0], t_final) * val * val)
    };
    let top: Vec<f64> = std::iter::once(t_final).chain(grid.domain().upper().iter().copied()).collect();
    let mut first_err: Option<Error> = None;
    let interior = integrate_box(&grid.origin(), &top, &grid.cells(), order, |p| {
        directional_derivative(p, &dir, wf2).unwrap_or_else(|e| {
            first_err.get_or_insert(e);
            0.0
        })
    });
    let mut boundary = 0.0;
    for bf in faces.faces().iter().filter(|bf| bf.class == FaceClass::Outflow) {
        boundary += bf.flux
            * integrate_face(bf.id, grid, order, |p| {
                wf2(p).unwrap_or_else(|e| {
                    first_err.get_or_insert(e);
                    0.0
                })
            });
    }
    if let Some(e) = first_err {
        return Err(e);
    }
    Ok(WeightCheckReport {
        interior,
        boundary,
        identity_residual: (interior - boundary).abs(),
        sign_pass: interior <= IDENTITY_TOL,
        inflow_max,
        weight_sup: weight_sup(grid),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use crate::geometry::build_grid;

    fn unit_grid(t: f64, n: usize) -> SpaceTimeGrid {
        build_grid(t, SpaceDomain::unit_interval(), n, &[n]).unwrap()
    }

    #[test]
    fn zero_velocity_matches_sine_mode() {
        // lambda_min -> (pi / 2T)^2 from above
        let r = discrete_constant(&unit_grid(1.0, 32), &[0.0], &EigenConfig::default()).unwrap();
        let exact = 2.0 / std::f64::consts::PI;
        assert!(r.c_h <= exact && r.c_h > 0.99 * exact, "{}", r.c_h);
        assert!(r.residual <= 1e-8);
        assert!(r.certifies(1.0));
    }

    #[test]
    fn eigenvector_vanishes_on_inflow() {
        let g = unit_grid(1.0, 8);
        let r = discrete_constant(&g, &[1.0], &EigenConfig::default()).unwrap();
        let faces = classify_faces(&g, &[1.0], DEFAULT_FLUX_EPS).unwrap();
        for &n in constrained_dofs(&g, &faces).unwrap().nodes() {
            assert_eq!(r.eigenvector[n], 0.0);
        }
    }

    #[test]
    fn iteration_cap_is_reported() {
        let cfg = EigenConfig { tol: 1e-300, max_iter: 3, ..Default::default() };
        match discrete_constant(&unit_grid(1.0, 8), &[1.0], &cfg) {
            Err(Error::EigenNoConvergence { iterations, lambda, .. }) => {
                assert_eq!(iterations, 3);
                assert!(lambda.is_finite());
            }
            other => panic!("expected eigen no-convergence, got {other:?}"),
        }
    }

    #[test]
    fn weight_sup_is_final_time() {
        assert_eq!(weight_sup(&unit_grid(1.5, 4)), 1.5);
        assert_eq!(weight(1.5, 1.5), 0.0);
    }

    #[test]
    fn identity_for_zero_function() {
        let r = proof_identity_check(&parse("0").unwrap(), &[1.0], &unit_grid(1.0, 2), 6).unwrap();
        assert_eq!((r.interior, r.boundary), (0.0, 0.0));
        assert!(r.pass());
    }

    #[test]
    fn identity_with_outflow_trace() {
        // f = t x: vanishes at t = 0 and x = 0; outflow through x = 1 gives
        // int_0^1 (t - 1) t^2 dt = -1/12
        let r = proof_identity_check(&parse("t*x").unwrap(), &[1.0], &unit_grid(1.0, 2), 6).unwrap();
        assert!((r.boundary + 1.0 / 12.0).abs() < 1e-14);
        assert!(r.identity_residual <= 1e-8, "{}", r.identity_residual);
        assert!(r.interior < 0.0);
    }

    #[test]
    fn vanishing_outflow_trace_gives_zero() {
        // f = 0 on x = 1 and w = 0 on t = T, so both sides vanish
        let r = proof_identity_check(&parse("t*x*(1-x)").unwrap(), &[1.0], &unit_grid(1.0, 4), 6).unwrap();
        assert!(r.boundary.abs() <= 1e-14);
        assert!(r.interior.abs() <= 1e-8 && r.identity_residual <= 1e-8);
        assert!(r.pass());
    }

    #[test]
    fn inflow_violation_is_reported() {
        let err = proof_identity_check(&parse("1+t").unwrap(), &[1.0], &unit_grid(1.0, 2), 6).unwrap_err();
        assert!(matches!(err, Error::PreconditionViolation(_)));
    }

    #[test]
    fn sweep_csv_columns() {
        let case = SweepCase { velocity: vec![1.0], t_final: 1.0, nt: 4, nx: vec![4], domain: SpaceDomain::unit_interval() };
        let rows = run_sweep(&[case], &EigenConfig::default()).unwrap();
        let mut buf = Vec::new();
        write_sweep_csv(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("v,T,nt,nx,lambda_min,C_h,bound_2T,pass"));
        let cells: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(cells.len(), 8);
        assert_eq!(cells[2], "4");
        assert_eq!(cells[7], "true");
    }
}
