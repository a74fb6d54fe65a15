//! Phase-space transport under the Lorentz force: the field
//! `a = (1, v, E + v x B)`, its divergence, the characteristic flow, and a
//! quadrature check of `||f|| <= 2T ||a . grad f||` on compactly supported
//! test functions.

use std::io::Write;

use crate::error::{invalid, Error, Result};
use crate::expr::{parse, EvalContext, Expression, Var};
use crate::geometry::{SpaceDomain, DEFAULT_FLUX_EPS};
use crate::report::{csv_line, fmt_f64};
use crate::transport::quadrature::QuadratureRule;

/// Relative step for the central differences.
pub const FD_STEP: f64 = 1e-5;
/// Slack on the `2T` bound, covering quadrature and difference error.
pub const RATIO_SLACK: f64 = 1e-4;
/// Largest `|f|` tolerated where the test function must vanish.
pub const VANISH_TOL: f64 = 1e-10;

const SUPPORT_TOL: f64 = 1e-12;

/// Electric and magnetic fields, each component an expression in `t, x, y`.
#[derive(Debug, Clone, PartialEq)]
pub struct EMFields {
    e: [Expression; 3],
    b: [Expression; 3],
}

impl EMFields {
    pub fn new(e: [Expression; 3], b: [Expression; 3]) -> Result<Self> {
        let allowed = [Var::T, Var::X, Var::Y];
        for (i, c) in e.iter().enumerate() {
            c.check_vars(&allowed, &format!("E component {}", i + 1))?;
        }
        for (i, c) in b.iter().enumerate() {
            c.check_vars(&allowed, &format!("B component {}", i + 1))?;
        }
        Ok(Self { e, b })
    }

    pub fn parse(e: [&str; 3], b: [&str; 3]) -> Result<Self> {
        let p = |s: [&str; 3]| -> Result<[Expression; 3]> { Ok([parse(s[0])?, parse(s[1])?, parse(s[2])?]) };
        Self::new(p(e)?, p(b)?)
    }

    pub fn zero() -> Self {
        let z = || Expression::constant(0.0);
        Self { e: [z(), z(), z()], b: [z(), z(), z()] }
    }

    pub fn e(&self) -> &[Expression; 3] {
        &self.e
    }

    pub fn b(&self) -> &[Expression; 3] {
        &self.b
    }

    /// `(E(t, x), B(t, x))`.
    pub fn eval(&self, t: f64, x: &[f64; 3]) -> Result<([f64; 3], [f64; 3])> {
        let ctx = EvalContext::new().with(Var::T, t).with(Var::X, x[0]).with(Var::Y, x[1]);
        let mut e = [0.0; 3];
        let mut b = [0.0; 3];
        for i in 0..3 {
            e[i] = self.e[i].eval(&ctx)?;
            b[i] = self.b[i].eval(&ctx)?;
        }
        Ok((e, b))
    }

    pub fn force(&self, t: f64, x: &[f64; 3], v: &[f64; 3]) -> Result<[f64; 3]> {
        let (e, b) = self.eval(t, x)?;
        let c = cross(v, &b);
        Ok([e[0] + c[0], e[1] + c[1], e[2] + c[2]])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseState {
    pub t: f64,
    pub x: [f64; 3],
    pub v: [f64; 3],
}

impl PhaseState {
    pub fn new(t: f64, x: [f64; 3], v: [f64; 3]) -> Result<Self> {
        let s = Self { t, x, v };
        if !s.is_finite() {
            return Err(invalid("phase state has non-finite components"));
        }
        Ok(s)
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite() && self.x.iter().chain(&self.v).all(|c| c.is_finite())
    }

    /// `(t, x1, x2, x3, v1, v2, v3)`.
    pub fn to_array(&self) -> [f64; 7] {
        [self.t, self.x[0], self.x[1], self.x[2], self.v[0], self.v[1], self.v[2]]
    }

    pub fn from_array(z: &[f64; 7]) -> Self {
        Self { t: z[0], x: [z[1], z[2], z[3]], v: [z[4], z[5], z[6]] }
    }

    pub fn speed(&self) -> f64 {
        self.v.iter().map(|c| c * c).sum::<f64>().sqrt()
    }
}

pub fn cross(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

/// `(1, v, E + v x B)` at `state`.
pub fn field_a(state: &PhaseState, fields: &EMFields) -> Result<[f64; 7]> {
    let f = fields.force(state.t, &state.x, &state.v)?;
    let v = state.v;
    Ok([1.0, v[0], v[1], v[2], f[0], f[1], f[2]])
}

/// Central-difference divergence of `a` over all seven coordinates, with step
/// `h * max(1, |z_i|)` on coordinate `i`.
pub fn divergence_a(state: &PhaseState, fields: &EMFields, h: f64) -> Result<f64> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(invalid(format!("difference step must be positive, got {h}")));
    }
    let z = state.to_array();
    let mut div = 0.0;
    for i in 0..7 {
        let hi = h * z[i].abs().max(1.0);
        let mut zp = z;
        let mut zm = z;
        zp[i] += hi;
        zm[i] -= hi;
        let ap = field_a(&PhaseState::from_array(&zp), fields)?;
        let am = field_a(&PhaseState::from_array(&zm), fields)?;
        div += (ap[i] - am[i]) / (2.0 * hi);
    }
    Ok(div)
}

fn rhs(z: &[f64; 7], fields: &EMFields) -> Result<[f64; 7]> {
    field_a(&PhaseState::from_array(z), fields)
}

/// Classical RK4 for `x' = v`, `v' = E + v x B`; returns `nsteps + 1` states.
pub fn flow_rk4(state0: &PhaseState, fields: &EMFields, dt: f64, nsteps: usize) -> Result<Vec<PhaseState>> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(invalid(format!("time step must be positive, got {dt}")));
    }
    if nsteps == 0 {
        return Err(invalid("at least one step is required"));
    }
    if !state0.is_finite() {
        return Err(Error::IntegrationFailure { step: 0 });
    }
    let mut out = Vec::with_capacity(nsteps + 1);
    out.push(*state0);
    let mut z = state0.to_array();
    let axpy = |z: &[f64; 7], k: &[f64; 7], s: f64| -> [f64; 7] { std::array::from_fn(|i| z[i] + s * k[i]) };
    for step in 1..=nsteps {
        let k1 = rhs(&z, fields)?;
        let k2 = rhs(&axpy(&z, &k1, 0.5 * dt), fields)?;
        let k3 = rhs(&axpy(&z, &k2, 0.5 * dt), fields)?;
        let k4 = rhs(&axpy(&z, &k3, dt), fields)?;
        z = std::array::from_fn(|i| z[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]));
        // the clock is advanced exactly to avoid drift in t
        z[0] = state0.t + step as f64 * dt;
        let s = PhaseState::from_array(&z);
        if !s.is_finite() {
            return Err(Error::IntegrationFailure { step });
        }
        out.push(s);
    }
    Ok(out)
}

pub fn write_trajectory_csv<W: Write>(out: &mut W, traj: &[PhaseState]) -> Result<()> {
    out.write_all(csv_line(["step", "t", "x1", "x2", "x3", "v1", "v2", "v3"]).as_bytes())?;
    for (k, s) in traj.iter().enumerate() {
        let mut cells = vec![k.to_string()];
        cells.extend(s.to_array().iter().map(|&c| fmt_f64(c)));
        out.write_all(csv_line(cells).as_bytes())?;
    }
    Ok(())
}

/// A test function `f(t, x, v)` together with the box outside which it
/// vanishes: `support_x` has one interval per spatial dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct VlasovTestFunction {
    pub f: Expression,
    pub support_x: Vec<(f64, f64)>,
    pub support_v: [(f64, f64); 3],
}

impl VlasovTestFunction {
    pub fn new(f: Expression, support_x: Vec<(f64, f64)>, support_v: [(f64, f64); 3]) -> Result<Self> {
        if support_x.is_empty() || support_x.len() > 2 {
            return Err(invalid("x support must have one or two intervals"));
        }
        for &(lo, hi) in support_x.iter().chain(&support_v) {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(invalid(format!("support interval [{lo}, {hi}] is not a bounded nonempty interval")));
            }
        }
        let vars: Vec<Var> = std::iter::once(Var::T)
            .chain((0..support_x.len()).map(Var::space))
            .chain((0..3).map(Var::velocity))
            .collect();
        f.check_vars(&vars, "test function")?;
        Ok(Self { f, support_x, support_v })
    }

    pub fn space_dim(&self) -> usize {
        self.support_x.len()
    }

    fn eval(&self, z: &[f64]) -> Result<f64> {
        let d = self.space_dim();
        let ctx = EvalContext::at(z[0], &z[1..1 + d], &z[1 + d..]);
        self.f.eval_finite(&ctx)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VlasovRatio {
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    pub bound: f64,
    pub pass: bool,
}

/// Phase point `(t, x[..d], v)` as a full state; unused x components are 0.
fn state_of(z: &[f64], d: usize) -> PhaseState {
    let mut x = [0.0; 3];
    x[..d].copy_from_slice(&z[1..1 + d]);
    PhaseState { t: z[0], x, v: [z[1 + d], z[2 + d], z[3 + d]] }
}

/// Advection field restricted to the coordinates the test function uses.
fn reduced_a(z: &[f64], d: usize, fields: &EMFields) -> Result<Vec<f64>> {
    let a = field_a(&state_of(z, d), fields)?;
    Ok(std::iter::once(a[0]).chain(a[1..1 + d].iter().copied()).chain(a[4..].iter().copied()).collect())
}

fn advective_derivative(testfn: &VlasovTestFunction, fields: &EMFields, z: &[f64]) -> Result<f64> {
    let a = reduced_a(z, testfn.space_dim(), fields)?;
    let mut p = z.to_vec();
    let mut sum = 0.0;
    for (i, ai) in a.iter().enumerate() {
        if *ai == 0.0 {
            continue;
        }
        let h = FD_STEP * z[i].abs().max(1.0);
        p[i] = z[i] + h;
        let fp = testfn.eval(&p)?;
        p[i] = z[i] - h;
        let fm = testfn.eval(&p)?;
        p[i] = z[i];
        sum += ai * (fp - fm) / (2.0 * h);
    }
    Ok(sum)
}

const FACE_SAMPLES: usize = 7;

/// Largest `|f|` over sampled face points where `f` is required to vanish:
/// `t = 0`, every velocity face, x faces inside `omega`, and the inflow part
/// (`v . n < 0`) of x faces on the boundary of `omega`.
fn vanishing_max(testfn: &VlasovTestFunction, fields: &EMFields, t_final: f64, omega: &SpaceDomain) -> Result<f64> {
    let d = testfn.space_dim();
    let n = 1 + d + 3;
    let mut lo = vec![0.0];
    let mut hi = vec![t_final];
    for &(a, b) in testfn.support_x.iter().chain(&testfn.support_v) {
        lo.push(a);
        hi.push(b);
    }
    let mut worst = 0.0f64;
    let total = FACE_SAMPLES.pow((n - 1) as u32);
    for axis in 0..n {
        for upper in [false, true] {
            if axis == 0 && upper {
                continue;
            }
            let value = if upper { hi[axis] } else { lo[axis] };
            let on_boundary = (1..=d).contains(&axis)
                && ((!upper && (value - omega.lower()[axis - 1]).abs() <= SUPPORT_TOL)
                    || (upper && (value - omega.upper()[axis - 1]).abs() <= SUPPORT_TOL));
            let sign = if upper { 1.0 } else { -1.0 };
            let mut z = vec![0.0; n];
            for flat in 0..total {
                let mut rem = flat;
                for a in (0..n).rev() {
                    if a == axis {
                        z[a] = value;
                        continue;
                    }
                    let k = rem % FACE_SAMPLES;
                    rem /= FACE_SAMPLES;
                    z[a] = lo[a] + (hi[a] - lo[a]) * k as f64 / (FACE_SAMPLES - 1) as f64;
                }
                if on_boundary {
                    let an = sign * reduced_a(&z, d, fields)?[axis];
                    if an >= -DEFAULT_FLUX_EPS {
                        continue;
                    }
                }
                worst = worst.max(testfn.eval(&z)?.abs());
            }
        }
    }
    Ok(worst)
}

/// `||f||` and `||a . grad f||` over `(0, T) x support_x x support_v` by
/// tensor Gauss quadrature; passes iff `lhs <= 2T rhs (1 + 1e-4)`.
pub fn vlasov_ratio(
    testfn: &VlasovTestFunction,
    fields: &EMFields,
    t_final: f64,
    quad_order: usize,
    omega: &SpaceDomain,
) -> Result<VlasovRatio> {
    if !(t_final > 0.0 && t_final.is_finite()) {
        return Err(invalid(format!("final time must be positive, got {t_final}")));
    }
    if quad_order == 0 {
        return Err(invalid("quadrature order must be positive"));
    }
    let d = testfn.space_dim();
    if omega.dim() != d {
        return Err(invalid("test function and domain dimensions differ"));
    }
    for (i, &(a, b)) in testfn.support_x.iter().enumerate() {
        if a < omega.lower()[i] - SUPPORT_TOL || b > omega.upper()[i] + SUPPORT_TOL {
            return Err(invalid(format!("x support [{a}, {b}] on axis {i} escapes the domain")));
        }
    }
    let worst = vanishing_max(testfn, fields, t_final, omega)?;
    if worst > VANISH_TOL {
        return Err(Error::PreconditionViolation(format!(
            "test function reaches |f| = {worst:e} where it must vanish"
        )));
    }

    let n = 1 + d + 3;
    let mut lo = vec![0.0];
    let mut width = vec![t_final];
    for &(a, b) in testfn.support_x.iter().chain(&testfn.support_v) {
        lo.push(a);
        width.push(b - a);
    }
    let jac: f64 = width.iter().product();
    let rule = QuadratureRule::gauss(quad_order, n)?;
    let mut z = vec![0.0; n];
    let (mut ff, mut gg) = (0.0, 0.0);
    for (p, w) in rule.points().iter().zip(rule.weights()) {
        for a in 0..n {
            z[a] = lo[a] + width[a] * p[a];
        }
        let f = testfn.eval(&z)?;
        let g = advective_derivative(testfn, fields, &z)?;
        ff += w * f * f;
        gg += w * g * g;
    }
    let lhs = (jac * ff).sqrt();
    let rhs = (jac * gg).sqrt();
    let bound = 2.0 * t_final;
    let ratio = if lhs == 0.0 { 0.0 } else { lhs / rhs };
    Ok(VlasovRatio { lhs, rhs, ratio, bound, pass: lhs <= bound * rhs * (1.0 + RATIO_SLACK) })
}

pub fn write_ratio_csv<W: Write>(out: &mut W, rows: &[(String, VlasovRatio)]) -> Result<()> {
    out.write_all(csv_line(["case", "lhs", "rhs", "ratio", "bound", "pass"]).as_bytes())?;
    for (name, r) in rows {
        out.write_all(
            csv_line([
                name.clone(),
                fmt_f64(r.lhs),
                fmt_f64(r.rhs),
                fmt_f64(r.ratio),
                fmt_f64(r.bound),
                r.pass.to_string(),
            ])
            .as_bytes(),
        )?;
    }
    Ok(())
}

/// Smooth field pairs used by the checks.
pub fn field_catalog() -> Vec<(&'static str, EMFields)> {
    let cases = [
        ("uniform_b", ["0", "0", "0"], ["0", "0", "1"]),
        ("mixed", ["t", "x", "y"], ["sin(t+x)", "cos(y)", "x*y"]),
        ("wave", ["cos(x)", "sin(t*y)", "0.5"], ["exp(-x*x)", "t", "sin(y) + 0.3"]),
    ];
    cases.iter().map(|(name, e, b)| (*name, EMFields::parse(*e, *b).expect("catalog fields parse"))).collect()
}

/// `(s - a)^2 (b - s)^2`, a C^1 bump on `[a, b]`.
fn bump(var: &str, a: f64, b: f64) -> String {
    format!("(({var})-({a}))^2*(({b})-({var}))^2")
}

/// A named test function with the domain it lives on.
#[derive(Debug, Clone)]
pub struct VlasovCase {
    pub name: String,
    pub testfn: VlasovTestFunction,
    pub fields: EMFields,
    pub omega: SpaceDomain,
}

type CatalogEntry = (&'static str, String, Vec<(f64, f64)>, [(f64, f64); 3]);

/// Every catalog test function paired with every catalog field.
pub fn catalog_cases() -> Vec<VlasovCase> {
    let vbump = |c: f64| format!("{}*{}*{}", bump("vx", c - 1.0, c + 1.0), bump("vy", -1.0, 1.0), bump("vz", -1.0, 1.0));
    let vbox = |c: f64| [(c - 1.0, c + 1.0), (-1.0, 1.0), (-1.0, 1.0)];
    let functions: Vec<CatalogEntry> = vec![
        ("t_bump", format!("t*{}*{}", bump("x", 0.0, 1.0), vbump(0.0)), vec![(0.0, 1.0)], vbox(0.0)),
        ("t2_bump", format!("t^2*{}*{}", bump("x", 0.2, 0.9), vbump(0.0)), vec![(0.2, 0.9)], vbox(0.0)),
        ("sin_t_bump", format!("sin(t)*{}*{}", bump("x", 0.0, 1.0), vbump(0.5)), vec![(0.0, 1.0)], vbox(0.5)),
        // nonzero on the outflow wall x = 1, where vx > 0 throughout the support
        ("outflow_wall", format!("t*x^2*{}", vbump(2.0)), vec![(0.0, 1.0)], vbox(2.0)),
        (
            "t_bump_2d",
            format!("t*{}*{}*{}", bump("x", 0.0, 1.0), bump("y", 0.0, 1.0), vbump(0.0)),
            vec![(0.0, 1.0), (0.0, 1.0)],
            vbox(0.0),
        ),
    ];
    let mut out = Vec::new();
    for (fname, src, sx, sv) in functions {
        let omega = if sx.len() == 1 { SpaceDomain::unit_interval() } else { SpaceDomain::unit_square() };
        let testfn = VlasovTestFunction::new(parse(&src).expect("catalog function parses"), sx, sv)
            .expect("catalog function is valid");
        for (field_name, fields) in field_catalog() {
            out.push(VlasovCase {
                name: format!("{fname}/{field_name}"),
                testfn: testfn.clone(),
                fields,
                omega: omega.clone(),
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn gyro() -> EMFields {
        EMFields::parse(["0", "0", "0"], ["0", "0", "1"]).unwrap()
    }

    #[test]
    fn field_examples() {
        let s = PhaseState::new(0.0, [0.0; 3], [1.0, 0.0, 0.0]).unwrap();
        assert_eq!(field_a(&s, &gyro()).unwrap(), [1.0, 1.0, 0.0, 0.0, 0.0, -1.0, 0.0]);
        let e = EMFields::parse(["2", "0", "0"], ["0", "0", "0"]).unwrap();
        let s = PhaseState::new(0.3, [0.1, 0.2, 0.0], [-4.0, 7.0, 1.5]).unwrap();
        assert_eq!(&field_a(&s, &e).unwrap()[4..], &[2.0, 0.0, 0.0]);
        let b = EMFields::parse(["0", "0", "0"], ["sin(x)", "t", "y^3"]).unwrap();
        let s = PhaseState::new(0.3, [0.1, 0.2, 0.0], [0.0; 3]).unwrap();
        assert_eq!(&field_a(&s, &b).unwrap()[4..], &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn fields_reject_velocity_dependence() {
        assert!(EMFields::parse(["vx", "0", "0"], ["0", "0", "0"]).is_err());
    }

    #[test]
    fn divergence_vanishes() {
        let s = PhaseState::new(0.4, [0.2, 0.7, 0.0], [0.3, -1.2, 2.0]).unwrap();
        assert!(divergence_a(&s, &gyro(), 1e-5).unwrap().abs() <= 1e-10);
        let mixed = EMFields::parse(["t", "x", "y"], ["sin(t+x)", "cos(y)", "x*y"]).unwrap();
        assert!(divergence_a(&s, &mixed, 1e-5).unwrap().abs() <= 1e-6);
        assert!(divergence_a(&s, &mixed, 0.0).is_err());
    }

    fn gyration_error(steps: usize) -> f64 {
        let s0 = PhaseState::new(0.0, [0.0; 3], [1.0, 0.0, 0.0]).unwrap();
        let traj = flow_rk4(&s0, &gyro(), 2.0 * PI / steps as f64, steps).unwrap();
        let end = traj.last().unwrap();
        end.x.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    #[test]
    fn gyration_closes() {
        let s0 = PhaseState::new(0.0, [0.0; 3], [1.0, 0.0, 0.0]).unwrap();
        let dt = 2.0 * PI / 1000.0;
        let traj = flow_rk4(&s0, &gyro(), dt, 1000).unwrap();
        assert_eq!(traj.len(), 1001);
        for s in traj.iter().step_by(97) {
            let t = s.t;
            assert!((s.x[0] - t.sin()).abs() < 1e-8);
            assert!((s.x[1] - (t.cos() - 1.0)).abs() < 1e-8);
            assert!((s.v[0] - t.cos()).abs() < 1e-8);
            assert!((s.v[1] + t.sin()).abs() < 1e-8);
        }
        assert!(gyration_error(1000) <= 1e-6);
    }

    #[test]
    fn rk4_order() {
        let (e1, e2) = (gyration_error(50), gyration_error(100));
        assert!((e1 / e2).log2() >= 3.9, "order {}", (e1 / e2).log2());
    }

    #[test]
    fn constant_force_is_exact() {
        let e = EMFields::parse(["1", "0", "0"], ["0", "0", "0"]).unwrap();
        let s0 = PhaseState::new(0.0, [0.0; 3], [0.0; 3]).unwrap();
        let traj = flow_rk4(&s0, &e, 0.1, 20).unwrap();
        for s in &traj {
            assert!((s.v[0] - s.t).abs() <= 1e-14);
            assert!((s.x[0] - 0.5 * s.t * s.t).abs() <= 1e-14);
        }
    }

    #[test]
    fn speed_is_conserved_without_e() {
        let b = EMFields::parse(["0", "0", "0"], ["sin(x)", "0.5", "cos(y)"]).unwrap();
        let s0 = PhaseState::new(0.0, [0.1, 0.2, 0.0], [0.3, -0.4, 0.5]).unwrap();
        let traj = flow_rk4(&s0, &b, 1e-3, 1000).unwrap();
        let sp = s0.speed();
        let drift = traj.iter().fold(0.0f64, |m, s| m.max((s.speed() - sp).abs()));
        assert!(drift <= 1e-8, "drift {drift:e}");
    }

    #[test]
    fn blow_up_reports_step() {
        let e = EMFields::parse(["exp(exp(t*20))", "0", "0"], ["0", "0", "0"]).unwrap();
        let s0 = PhaseState::new(0.0, [0.0; 3], [0.0; 3]).unwrap();
        match flow_rk4(&s0, &e, 0.1, 100) {
            Err(Error::IntegrationFailure { step }) => assert!(step > 0),
            Err(Error::Eval(_)) => {}
            other => panic!("expected failure, got {other:?}"),
        }
        assert!(flow_rk4(&s0, &e, 0.0, 1).is_err());
        assert!(flow_rk4(&s0, &e, 0.1, 0).is_err());
    }

    fn simple(src: &str) -> VlasovTestFunction {
        VlasovTestFunction::new(parse(src).unwrap(), vec![(0.0, 1.0)], [(0.0, 1.0); 3]).unwrap()
    }

    #[test]
    fn zero_is_vacuous() {
        let r = vlasov_ratio(&simple("0"), &gyro(), 1.0, 4, &SpaceDomain::unit_interval()).unwrap();
        assert_eq!((r.lhs, r.rhs, r.ratio, r.pass), (0.0, 0.0, 0.0, true));
    }

    #[test]
    fn free_streaming_norm_matches_separable_integral() {
        let q = |v: &str| bump(v, 0.0, 1.0);
        let f = simple(&format!("t*{}*{}*{}*{}", q("x"), q("vx"), q("vy"), q("vz")));
        let r = vlasov_ratio(&f, &EMFields::zero(), 1.0, 6, &SpaceDomain::unit_interval()).unwrap();
        // int_0^1 t^2 = 1/3; int_0^1 s^4 (1-s)^4 = 1/630
        let exact = (1.0 / 3.0 * (1.0f64 / 630.0).powi(4)).sqrt();
        assert!((r.lhs - exact).abs() <= 1e-12 * exact);
        assert!(r.pass && r.ratio <= 2.0);
        let g = vlasov_ratio(&f, &gyro(), 1.0, 6, &SpaceDomain::unit_interval()).unwrap();
        assert!(g.pass);
        assert_eq!(g.lhs, r.lhs);
    }

    #[test]
    fn ratio_is_scale_invariant() {
        let q = |v: &str| bump(v, 0.0, 1.0);
        let body = format!("t*{}*{}*{}*{}", q("x"), q("vx"), q("vy"), q("vz"));
        let a = vlasov_ratio(&simple(&body), &gyro(), 1.5, 5, &SpaceDomain::unit_interval()).unwrap();
        let b = vlasov_ratio(&simple(&format!("10*{body}")), &gyro(), 1.5, 5, &SpaceDomain::unit_interval()).unwrap();
        assert!((a.ratio - b.ratio).abs() <= 1e-10 * a.ratio);
    }

    #[test]
    fn preconditions() {
        let omega = SpaceDomain::unit_interval();
        // nonzero at t = 0
        assert!(matches!(
            vlasov_ratio(&simple("1"), &gyro(), 1.0, 3, &omega),
            Err(Error::PreconditionViolation(_))
        ));
        let escaping =
            VlasovTestFunction::new(parse("0").unwrap(), vec![(0.0, 2.0)], [(0.0, 1.0); 3]).unwrap();
        assert!(matches!(vlasov_ratio(&escaping, &gyro(), 1.0, 3, &omega), Err(Error::InvalidArgument(_))));
        assert!(VlasovTestFunction::new(parse("y").unwrap(), vec![(0.0, 1.0)], [(0.0, 1.0); 3]).is_err());
    }

    #[test]
    fn catalog_passes() {
        let cases = catalog_cases();
        assert_eq!(cases.len(), 15);
        for c in cases.iter().filter(|c| c.testfn.space_dim() == 1) {
            let r = vlasov_ratio(&c.testfn, &c.fields, 1.0, 4, &c.omega).unwrap();
            assert!(r.pass, "{}: {r:?}", c.name);
        }
    }

    #[test]
    fn csv_headers() {
        let mut buf = Vec::new();
        let s0 = PhaseState::new(0.0, [0.0; 3], [1.0, 0.0, 0.0]).unwrap();
        write_trajectory_csv(&mut buf, &flow_rk4(&s0, &gyro(), 0.1, 2).unwrap()).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("step,t,x1,x2,x3,v1,v2,v3\n0,"));
        assert_eq!(text.lines().count(), 4);
        let mut buf = Vec::new();
        let r = VlasovRatio { lhs: 1.0, rhs: 1.0, ratio: 1.0, bound: 2.0, pass: true };
        write_ratio_csv(&mut buf, &[("a".into(), r)]).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("case,lhs,rhs,ratio,bound,pass\na,"));
    }
}
