//! Python bindings: expressions, grids, lifting, the transport solve, the
//! discrete Poincare constant and the Vlasov checks.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use kinetic_stils::error::Error;
use kinetic_stils::expr::{parse, EvalContext, Expression, Var};
use kinetic_stils::geometry::{SpaceDomain, SpaceTimeGrid};
use kinetic_stils::lifting::{backtrack as core_backtrack, lift as core_lift, HitKind};
use kinetic_stils::poincare::{discrete_constant as core_constant, EigenConfig};
use kinetic_stils::stils::{solve_transport as core_solve, stability_check, SolverConfig, TransportCase};
use kinetic_stils::vlasov::{self, EMFields, PhaseState, VlasovTestFunction};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::InvalidArgument(_) | Error::Parse { .. } | Error::Eval(_) | Error::PreconditionViolation(_) => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

#[pyclass(name = "Expr", frozen)]
struct PyExpr {
    inner: Expression,
}

#[pymethods]
impl PyExpr {
    #[new]
    fn new(src: &str) -> PyResult<Self> {
        Ok(Self { inner: parse(src).map_err(py_err)? })
    }

    #[pyo3(signature = (t=None, x=None, y=None, vx=None, vy=None, vz=None))]
    fn eval(
        &self,
        t: Option<f64>,
        x: Option<f64>,
        y: Option<f64>,
        vx: Option<f64>,
        vy: Option<f64>,
        vz: Option<f64>,
    ) -> PyResult<f64> {
        let mut ctx = EvalContext::new();
        for (var, val) in [(Var::T, t), (Var::X, x), (Var::Y, y), (Var::Vx, vx), (Var::Vy, vy), (Var::Vz, vz)] {
            if let Some(v) = val {
                ctx.set(var, v);
            }
        }
        self.inner.eval(&ctx).map_err(py_err)
    }

    fn free_vars(&self) -> Vec<&'static str> {
        self.inner.free_var_names().into_iter().collect()
    }

    fn __str__(&self) -> String {
        self.inner.to_string()
    }

    fn __repr__(&self) -> String {
        format!("Expr({:?})", self.inner.to_string())
    }
}

#[pyclass(name = "Grid", frozen)]
struct PyGrid {
    inner: SpaceTimeGrid,
}

fn domain(lower: Option<Vec<f64>>, upper: Option<Vec<f64>>, dim: usize) -> PyResult<SpaceDomain> {
    SpaceDomain::new(lower.unwrap_or_else(|| vec![0.0; dim]), upper.unwrap_or_else(|| vec![1.0; dim])).map_err(py_err)
}

#[pymethods]
impl PyGrid {
    #[new]
    #[pyo3(signature = (t_final, nt, nx, lower=None, upper=None))]
    fn new(t_final: f64, nt: usize, nx: Vec<usize>, lower: Option<Vec<f64>>, upper: Option<Vec<f64>>) -> PyResult<Self> {
        let d = domain(lower, upper, nx.len())?;
        Ok(Self { inner: SpaceTimeGrid::new(t_final, d, nt, nx).map_err(py_err)? })
    }

    #[getter]
    fn node_count(&self) -> usize {
        self.inner.node_count()
    }

    #[getter]
    fn space_dim(&self) -> usize {
        self.inner.space_dim()
    }

    fn node_point(&self, index: usize) -> PyResult<Vec<f64>> {
        if index >= self.inner.node_count() {
            return Err(PyValueError::new_err(format!("node {index} out of range")));
        }
        Ok(self.inner.node_point(index))
    }

    fn nodes(&self) -> Vec<Vec<f64>> {
        (0..self.inner.node_count()).map(|n| self.inner.node_point(n)).collect()
    }
}

/// `(kind, hit_time, hit_point)` with kind `"initial"` or `"boundary"`.
#[pyfunction]
#[pyo3(signature = (t, x, v, lower=None, upper=None))]
fn backtrack(
    t: f64,
    x: Vec<f64>,
    v: Vec<f64>,
    lower: Option<Vec<f64>>,
    upper: Option<Vec<f64>>,
) -> PyResult<(&'static str, f64, Vec<f64>)> {
    let d = domain(lower, upper, x.len())?;
    let hit = core_backtrack(t, &x, &v, &d).map_err(py_err)?;
    let kind = match hit.kind {
        HitKind::Initial => "initial",
        HitKind::Boundary => "boundary",
    };
    Ok((kind, hit.hit_time, hit.hit_point))
}

/// Nodal values of the characteristic lifting of `u0` and `ub`.
#[pyfunction]
fn lift(u0: &str, ub: &str, v: Vec<f64>, grid: PyRef<'_, PyGrid>) -> PyResult<Vec<f64>> {
    let (u0, ub) = (parse(u0).map_err(py_err)?, parse(ub).map_err(py_err)?);
    Ok(core_lift(&u0, &ub, &v, &grid.inner).map_err(py_err)?.coefficients)
}

#[pyfunction]
#[pyo3(signature = (source, u0, ub, v, grid, tol=1e-10))]
fn solve_transport<'py>(
    py: Python<'py>,
    source: &str,
    u0: &str,
    ub: &str,
    v: Vec<f64>,
    grid: PyRef<'_, PyGrid>,
    tol: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let mut case = TransportCase::new(
        parse(source).map_err(py_err)?,
        parse(u0).map_err(py_err)?,
        parse(ub).map_err(py_err)?,
        v,
        grid.inner.clone(),
    );
    case.solver = SolverConfig { tol, ..Default::default() };
    let sol = core_solve(&case).map_err(py_err)?;
    let report = stability_check(&sol.f, sol.l2_source, case.grid.t_final()).map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("u", &sol.u)?;
    d.set_item("f", &sol.f.f)?;
    d.set_item("g", &sol.g.coefficients)?;
    d.set_item("l2_f", sol.f.l2_f)?;
    d.set_item("l2_G", sol.l2_source)?;
    d.set_item("ratio", report.ratio)?;
    d.set_item("bound", report.bound)?;
    d.set_item("pass", report.pass)?;
    d.set_item("iterations", sol.f.iterations)?;
    Ok(d)
}

#[pyfunction]
#[pyo3(signature = (grid, v, seed=42))]
fn discrete_constant<'py>(
    py: Python<'py>,
    grid: PyRef<'_, PyGrid>,
    v: Vec<f64>,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = EigenConfig { seed, ..Default::default() };
    let r = core_constant(&grid.inner, &v, &cfg).map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("lambda_min", r.lambda_min)?;
    d.set_item("c_h", r.c_h)?;
    d.set_item("bound", 2.0 * grid.inner.t_final())?;
    d.set_item("pass", r.certifies(grid.inner.t_final()))?;
    d.set_item("iterations", r.iterations)?;
    d.set_item("residual", r.residual)?;
    Ok(d)
}

fn fields(e: [String; 3], b: [String; 3]) -> PyResult<EMFields> {
    EMFields::parse([&e[0], &e[1], &e[2]], [&b[0], &b[1], &b[2]]).map_err(py_err)
}

#[pyfunction]
fn field_a(t: f64, x: [f64; 3], v: [f64; 3], e: [String; 3], b: [String; 3]) -> PyResult<[f64; 7]> {
    let s = PhaseState::new(t, x, v).map_err(py_err)?;
    vlasov::field_a(&s, &fields(e, b)?).map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (t, x, v, e, b, h=vlasov::FD_STEP))]
fn divergence_a(t: f64, x: [f64; 3], v: [f64; 3], e: [String; 3], b: [String; 3], h: f64) -> PyResult<f64> {
    let s = PhaseState::new(t, x, v).map_err(py_err)?;
    vlasov::divergence_a(&s, &fields(e, b)?, h).map_err(py_err)
}

/// Trajectory as rows `(t, x1, x2, x3, v1, v2, v3)`.
#[pyfunction]
fn flow_rk4(
    x: [f64; 3],
    v: [f64; 3],
    e: [String; 3],
    b: [String; 3],
    dt: f64,
    nsteps: usize,
) -> PyResult<Vec<[f64; 7]>> {
    let s = PhaseState::new(0.0, x, v).map_err(py_err)?;
    let traj = vlasov::flow_rk4(&s, &fields(e, b)?, dt, nsteps).map_err(py_err)?;
    Ok(traj.iter().map(|s| s.to_array()).collect())
}

#[pyfunction]
#[pyo3(signature = (f, support_x, support_v, e, b, t_final, quad_order=6, lower=None, upper=None))]
#[allow(clippy::too_many_arguments)]
fn vlasov_ratio<'py>(
    py: Python<'py>,
    f: &str,
    support_x: Vec<(f64, f64)>,
    support_v: [(f64, f64); 3],
    e: [String; 3],
    b: [String; 3],
    t_final: f64,
    quad_order: usize,
    lower: Option<Vec<f64>>,
    upper: Option<Vec<f64>>,
) -> PyResult<Bound<'py, PyDict>> {
    let omega = domain(lower, upper, support_x.len())?;
    let testfn = VlasovTestFunction::new(parse(f).map_err(py_err)?, support_x, support_v).map_err(py_err)?;
    let r = vlasov::vlasov_ratio(&testfn, &fields(e, b)?, t_final, quad_order, &omega).map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("lhs", r.lhs)?;
    d.set_item("rhs", r.rhs)?;
    d.set_item("ratio", r.ratio)?;
    d.set_item("bound", r.bound)?;
    d.set_item("pass", r.pass)?;
    Ok(d)
}

#[pymodule]
fn kinetic_stils_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyExpr>()?;
    m.add_class::<PyGrid>()?;
    m.add_function(wrap_pyfunction!(backtrack, m)?)?;
    m.add_function(wrap_pyfunction!(lift, m)?)?;
    m.add_function(wrap_pyfunction!(solve_transport, m)?)?;
    m.add_function(wrap_pyfunction!(discrete_constant, m)?)?;
    m.add_function(wrap_pyfunction!(field_a, m)?)?;
    m.add_function(wrap_pyfunction!(divergence_a, m)?)?;
    m.add_function(wrap_pyfunction!(flow_rk4, m)?)?;
    m.add_function(wrap_pyfunction!(vlasov_ratio, m)?)?;
    Ok(())
}
