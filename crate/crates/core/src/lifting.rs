//! Lifting of initial and inflow data: `g` with `(d/dt + v . grad_x) g = 0`,
//! `g(0, x) = u0(x)` and `g = ub` on the spatial inflow boundary, obtained by
//! following the straight characteristics backward to where they enter.

use crate::error::{invalid, Result};
use crate::expr::{EvalContext, Expression, Var};
use crate::geometry::{classify_faces, FaceId, SpaceDomain, SpaceTimeGrid, DEFAULT_FLUX_EPS};

/// Slack allowed when checking that a point lies in the closed domain.
const CONTAINS_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HitKind {
    Initial,
    Boundary,
}

/// Where the backward characteristic through `(t, x)` enters the domain.
#[derive(Debug, Clone, PartialEq)]
pub struct CharacteristicHit {
    pub kind: HitKind,
    pub hit_time: f64,
    pub hit_point: Vec<f64>,
}

/// Follows `X(s) = x - v (t - s)` back from `s = t`.
///
/// The exit time is the largest `s` at which some axis reaches its inflow
/// wall; if that is `<= 0` the characteristic starts at `t = 0`.
pub fn backtrack(t: f64, x: &[f64], v: &[f64], domain: &SpaceDomain) -> Result<CharacteristicHit> {
    if x.len() != domain.dim() || v.len() != domain.dim() {
        return Err(invalid("point, velocity and domain dimensions differ"));
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(invalid(format!("time must be finite and nonnegative, got {t}")));
    }
    if !domain.contains(x, CONTAINS_TOL) {
        return Err(invalid(format!("point {x:?} lies outside the domain")));
    }
    let lo = domain.lower();
    let hi = domain.upper();
    let x: Vec<f64> = x.iter().enumerate().map(|(i, xi)| xi.clamp(lo[i], hi[i])).collect();

    // backward travel time to the wall each axis would hit first
    let mut exit: Option<(f64, usize, f64)> = None;
    for i in 0..x.len() {
        let (tau, wall) = if v[i] > 0.0 {
            ((x[i] - lo[i]) / v[i], lo[i])
        } else if v[i] < 0.0 {
            ((hi[i] - x[i]) / -v[i], hi[i])
        } else {
            continue;
        };
        if exit.is_none_or(|(best, _, _)| tau < best) {
            exit = Some((tau, i, wall));
        }
    }

    match exit {
        Some((tau, axis, wall)) if tau < t => {
            let mut p: Vec<f64> = x
                .iter()
                .zip(v)
                .enumerate()
                .map(|(i, (xi, vi))| (xi - vi * tau).clamp(lo[i], hi[i]))
                .collect();
            p[axis] = wall;
            Ok(CharacteristicHit { kind: HitKind::Boundary, hit_time: t - tau, hit_point: p })
        }
        _ => {
            let p = x
                .iter()
                .zip(v)
                .enumerate()
                .map(|(i, (xi, vi))| (xi - vi * t).clamp(lo[i], hi[i]))
                .collect();
            Ok(CharacteristicHit { kind: HitKind::Initial, hit_time: 0.0, hit_point: p })
        }
    }
}

/// Nodal values of the lifting plus the sup of the data actually sampled.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedField {
    pub coefficients: Vec<f64>,
    pub velocity: Vec<f64>,
    pub initial_sup: f64,
    pub boundary_sup: f64,
}

fn data_vars(space_dim: usize, vel_dim: usize) -> Vec<Var> {
    std::iter::once(Var::T)
        .chain((0..space_dim).map(Var::space))
        .chain((0..vel_dim).map(Var::velocity))
        .collect()
}

/// Evaluates the data expression that the hit selects.
pub fn evaluate_hit(hit: &CharacteristicHit, u0: &Expression, ub: &Expression, v: &[f64]) -> Result<f64> {
    let ctx = EvalContext::at(hit.hit_time, &hit.hit_point, v);
    match hit.kind {
        HitKind::Initial => u0.eval_finite(&ctx),
        HitKind::Boundary => ub.eval_finite(&ctx),
    }
}

pub fn lift(u0: &Expression, ub: &Expression, v: &[f64], grid: &SpaceTimeGrid) -> Result<LiftedField> {
    if v.len() != grid.space_dim() {
        return Err(invalid("velocity dimension does not match the grid"));
    }
    let vars = data_vars(grid.space_dim(), v.len());
    u0.check_vars(&vars, "initial datum")?;
    ub.check_vars(&vars, "inflow datum")?;
    let mut initial_sup: f64 = 0.0;
    let mut boundary_sup: f64 = 0.0;
    let mut coefficients = Vec::with_capacity(grid.node_count());
    for n in 0..grid.node_count() {
        let p = grid.node_point(n);
        let hit = backtrack(p[0], &p[1..], v, grid.domain())?;
        let value = evaluate_hit(&hit, u0, ub, v)?;
        match hit.kind {
            HitKind::Initial => initial_sup = initial_sup.max(value.abs()),
            HitKind::Boundary => boundary_sup = boundary_sup.max(value.abs()),
        }
        coefficients.push(value);
    }
    Ok(LiftedField { coefficients, velocity: v.to_vec(), initial_sup, boundary_sup })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinfReport {
    pub max_abs: f64,
    pub bound: f64,
    pub pass: bool,
}

/// Checks `max |g| <= sup |u0| + sup |ub|` over nodes and sampled hits.
pub fn linf_bound_check(
    g: &LiftedField,
    u0: &Expression,
    ub: &Expression,
    grid: &SpaceTimeGrid,
) -> Result<LinfReport> {
    let v = &g.velocity;
    let faces = classify_faces(grid, v, DEFAULT_FLUX_EPS)?;
    let inflow: Vec<FaceId> = faces.inflow().filter(|f| !matches!(f, FaceId::TimeStart)).collect();
    let mut u0_sup = g.initial_sup;
    let mut ub_sup = g.boundary_sup;
    for n in 0..grid.node_count() {
        let m = grid.node_multi_index(n);
        let p = grid.node_point(n);
        let ctx = EvalContext::at(p[0], &p[1..], v);
        if m[0] == 0 {
            u0_sup = u0_sup.max(u0.eval_finite(&ctx)?.abs());
        }
        let on_inflow = inflow.iter().any(|f| match *f {
            FaceId::Lower(a) => m[a + 1] == 0,
            FaceId::Upper(a) => m[a + 1] == grid.nx()[a],
            _ => false,
        });
        if on_inflow {
            ub_sup = ub_sup.max(ub.eval_finite(&ctx)?.abs());
        }
    }
    let max_abs = g.coefficients.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    let bound = u0_sup + ub_sup;
    Ok(LinfReport { max_abs, bound, pass: max_abs <= bound + 1e-12 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use crate::geometry::build_grid;

    fn unit() -> SpaceDomain {
        SpaceDomain::unit_interval()
    }

    #[test]
    fn boundary_hit() {
        let h = backtrack(0.5, &[0.2], &[1.0], &unit()).unwrap();
        assert_eq!(h.kind, HitKind::Boundary);
        assert!((h.hit_time - 0.3).abs() < 1e-15);
        assert_eq!(h.hit_point, vec![0.0]);
    }

    #[test]
    fn initial_hits() {
        let h = backtrack(0.5, &[0.8], &[1.0], &unit()).unwrap();
        assert_eq!(h.kind, HitKind::Initial);
        assert_eq!(h.hit_time, 0.0);
        assert!((h.hit_point[0] - 0.3).abs() < 1e-15);
        let h = backtrack(0.7, &[0.4], &[0.0], &unit()).unwrap();
        assert_eq!(h, CharacteristicHit { kind: HitKind::Initial, hit_time: 0.0, hit_point: vec![0.4] });
    }

    #[test]
    fn corner_goes_to_initial_datum() {
        let h = backtrack(0.0, &[0.0], &[1.0], &unit()).unwrap();
        assert_eq!(h.kind, HitKind::Initial);
        // exit exactly at s = 0 also counts as initial
        let h = backtrack(0.5, &[0.5], &[1.0], &unit()).unwrap();
        assert_eq!(h.kind, HitKind::Initial);
    }

    #[test]
    fn negative_velocity_enters_from_upper_wall() {
        let h = backtrack(1.0, &[0.5], &[-2.0], &unit()).unwrap();
        assert_eq!(h.kind, HitKind::Boundary);
        assert_eq!(h.hit_point, vec![1.0]);
        assert!((h.hit_time - 0.75).abs() < 1e-15);
    }

    #[test]
    fn two_dimensional_exit_is_latest_entry() {
        let d = SpaceDomain::unit_square();
        // x-wall reached after 0.4 backward, y-wall after 0.1
        let h = backtrack(1.0, &[0.4, 0.9], &[1.0, -1.0], &d).unwrap();
        assert_eq!(h.kind, HitKind::Boundary);
        assert!((h.hit_time - 0.9).abs() < 1e-15);
        assert_eq!(h.hit_point[1], 1.0);
        assert!((h.hit_point[0] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn outside_point_rejected() {
        assert!(backtrack(0.5, &[1.5], &[1.0], &unit()).is_err());
        assert!(backtrack(-0.1, &[0.5], &[1.0], &unit()).is_err());
    }

    #[test]
    fn lift_examples() {
        let g = build_grid(1.0, unit(), 4, &[4]).unwrap();
        let lifted = lift(&parse("x").unwrap(), &parse("t").unwrap(), &[1.0], &g).unwrap();
        for n in 0..g.node_count() {
            let p = g.node_point(n);
            assert!((lifted.coefficients[n] - (p[1] - p[0]).abs()).abs() <= 1e-12);
        }
        let c = lift(&parse("3.5").unwrap(), &parse("3.5").unwrap(), &[-0.3], &g).unwrap();
        assert!(c.coefficients.iter().all(|&v| v == 3.5));
        let frozen = lift(&parse("sin(pi*x)").unwrap(), &parse("0").unwrap(), &[0.0], &g).unwrap();
        for n in 0..g.node_count() {
            let p = g.node_point(n);
            assert_eq!(frozen.coefficients[n], (std::f64::consts::PI * p[1]).sin());
        }
    }

    #[test]
    fn linf_examples() {
        let g = build_grid(1.0, unit(), 4, &[4]).unwrap();
        let (u0, ub) = (parse("x").unwrap(), parse("t").unwrap());
        let l = lift(&u0, &ub, &[1.0], &g).unwrap();
        let r = linf_bound_check(&l, &u0, &ub, &g).unwrap();
        assert_eq!(r.max_abs, 1.0);
        assert_eq!(r.bound, 2.0);
        assert!(r.pass);

        let z = parse("0").unwrap();
        let l = lift(&z, &z, &[1.0], &g).unwrap();
        let r = linf_bound_check(&l, &z, &z, &g).unwrap();
        assert_eq!((r.max_abs, r.pass), (0.0, true));

        let five = parse("5").unwrap();
        let l = lift(&five, &five, &[1.0], &g).unwrap();
        let r = linf_bound_check(&l, &five, &five, &g).unwrap();
        assert_eq!((r.max_abs, r.bound, r.pass), (5.0, 10.0, true));
    }

    #[test]
    fn data_variables_are_checked() {
        let g = build_grid(1.0, unit(), 2, &[2]).unwrap();
        assert!(lift(&parse("y").unwrap(), &parse("0").unwrap(), &[1.0], &g).is_err());
        assert!(lift(&parse("1/0").unwrap(), &parse("0").unwrap(), &[1.0], &g).is_err());
    }
}
