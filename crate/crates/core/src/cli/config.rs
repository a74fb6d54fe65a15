//! JSON configuration files for the command-line workflows.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{invalid, Result};
use crate::expr::{parse, Expression};
use crate::geometry::{SpaceDomain, SpaceTimeGrid};
use crate::poincare::{EigenConfig, SweepCase};
use crate::stils::{SolverConfig, TransportCase};
use crate::transport::DEFAULT_QUAD_ORDER;
use crate::vlasov::{EMFields, VlasovTestFunction};

/// A scalar or a list; `1.0` and `[1.0]` mean the same thing.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    pub fn to_vec(&self) -> Vec<T> {
        match self {
            Self::One(x) => vec![x.clone()],
            Self::Many(xs) => xs.clone(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl DomainConfig {
    pub fn build(&self) -> Result<SpaceDomain> {
        SpaceDomain::new(self.lower.clone(), self.upper.clone())
    }
}

/// The unit box of `dim` dimensions unless bounds are given.
fn domain_or_unit(domain: &Option<DomainConfig>, dim: usize) -> Result<SpaceDomain> {
    match domain {
        Some(d) => {
            let d = d.build()?;
            if d.dim() != dim {
                return Err(invalid(format!("domain has dimension {} but velocity has {dim}", d.dim())));
            }
            Ok(d)
        }
        None => SpaceDomain::new(vec![0.0; dim], vec![1.0; dim]),
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub jacobi: Option<bool>,
}

impl SolverSection {
    pub fn build(&self) -> Result<SolverConfig> {
        let d = SolverConfig::default();
        let cfg = SolverConfig {
            tol: self.tol.unwrap_or(d.tol),
            max_iter: self.max_iter.or(d.max_iter),
            jacobi: self.jacobi.unwrap_or(d.jacobi),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

fn default_zero() -> String {
    "0".to_string()
}

/// Configuration of `solve`, `lift` and `convergence`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseConfig {
    #[serde(rename = "T")]
    pub t_final: f64,
    #[serde(default)]
    pub domain: Option<DomainConfig>,
    pub nt: usize,
    pub nx: OneOrMany<usize>,
    pub v: OneOrMany<f64>,
    #[serde(rename = "G", default = "default_zero")]
    pub source: String,
    #[serde(default = "default_zero")]
    pub u0: String,
    #[serde(default = "default_zero")]
    pub ub: String,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub quad_order: Option<usize>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Exact solution for `convergence`.
    #[serde(default)]
    pub exact: Option<String>,
    /// Mesh sizes for `convergence`, used for both `nt` and `nx`.
    #[serde(default)]
    pub ladder: Option<Vec<usize>>,
    /// Smallest acceptable observed order for `convergence`.
    #[serde(default)]
    pub min_order: Option<f64>,
}

impl CaseConfig {
    pub fn velocity(&self) -> Vec<f64> {
        self.v.to_vec()
    }

    pub fn grid(&self) -> Result<SpaceTimeGrid> {
        let v = self.velocity();
        let domain = domain_or_unit(&self.domain, v.len())?;
        let mut nx = self.nx.to_vec();
        if nx.len() == 1 && v.len() > 1 {
            nx = vec![nx[0]; v.len()];
        }
        SpaceTimeGrid::new(self.t_final, domain, self.nt, nx)
    }

    /// Parses every expression and checks the numeric fields.
    pub fn transport_case(&self) -> Result<TransportCase> {
        let mut case = TransportCase::new(
            parse(&self.source)?,
            parse(&self.u0)?,
            parse(&self.ub)?,
            self.velocity(),
            self.grid()?,
        );
        case.solver = self.solver.build()?;
        case.quad_order = self.quad_order.unwrap_or(DEFAULT_QUAD_ORDER);
        if case.quad_order == 0 {
            return Err(invalid("quad_order must be positive"));
        }
        Ok(case)
    }

    pub fn exact(&self) -> Result<Expression> {
        let src = self.exact.as_deref().ok_or_else(|| invalid("convergence needs an \"exact\" expression"))?;
        parse(src)
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EigenSection {
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub seed: Option<u64>,
}

impl EigenSection {
    pub fn build(&self) -> Result<EigenConfig> {
        let d = EigenConfig::default();
        let cfg = EigenConfig {
            tol: self.tol.unwrap_or(d.tol),
            max_iter: self.max_iter.unwrap_or(d.max_iter),
            seed: self.seed.unwrap_or(d.seed),
            ..d
        };
        if !(cfg.tol > 0.0 && cfg.tol < 1.0) {
            return Err(invalid(format!("eigen tolerance must lie in (0, 1), got {}", cfg.tol)));
        }
        if cfg.max_iter == 0 {
            return Err(invalid("eigen solver needs at least one iteration"));
        }
        Ok(cfg)
    }
}

/// Sweep file for `poincare --sweep`: either explicit `cases` or the
/// product of the `v`, `T` and `n` lists (with `nt = nx = n`).
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default)]
    pub cases: Vec<SweepEntry>,
    #[serde(default)]
    pub v: Vec<OneOrMany<f64>>,
    #[serde(rename = "T", default)]
    pub t_final: Vec<f64>,
    #[serde(default)]
    pub n: Vec<usize>,
    #[serde(default)]
    pub domain: Option<DomainConfig>,
    #[serde(default)]
    pub eigen: EigenSection,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepEntry {
    pub v: OneOrMany<f64>,
    #[serde(rename = "T")]
    pub t_final: f64,
    pub nt: usize,
    pub nx: OneOrMany<usize>,
    #[serde(default)]
    pub domain: Option<DomainConfig>,
}

impl SweepEntry {
    fn build(&self, fallback: &Option<DomainConfig>) -> Result<SweepCase> {
        let velocity = self.v.to_vec();
        let domain = domain_or_unit(if self.domain.is_some() { &self.domain } else { fallback }, velocity.len())?;
        let mut nx = self.nx.to_vec();
        if nx.len() == 1 && velocity.len() > 1 {
            nx = vec![nx[0]; velocity.len()];
        }
        let case = SweepCase { velocity, t_final: self.t_final, nt: self.nt, nx, domain };
        case.grid()?;
        Ok(case)
    }
}

impl SweepConfig {
    /// Explicit cases first, then the product in `v`, `T`, `n` order.
    pub fn cases(&self) -> Result<Vec<SweepCase>> {
        let lists = [self.v.is_empty(), self.t_final.is_empty(), self.n.is_empty()];
        if lists.iter().any(|e| !e) && lists.iter().any(|e| *e) {
            return Err(invalid("sweep product needs all of \"v\", \"T\" and \"n\""));
        }
        let mut out = Vec::new();
        for c in &self.cases {
            out.push(c.build(&self.domain)?);
        }
        for v in &self.v {
            for &t_final in &self.t_final {
                for &n in &self.n {
                    let e = SweepEntry { v: v.clone(), t_final, nt: n, nx: OneOrMany::One(n), domain: None };
                    out.push(e.build(&self.domain)?);
                }
            }
        }
        if out.is_empty() {
            return Err(invalid("sweep has no cases"));
        }
        Ok(out)
    }
}

/// Single `poincare` case from a config file.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoincareConfig {
    #[serde(rename = "T")]
    pub t_final: f64,
    pub v: OneOrMany<f64>,
    pub nt: usize,
    pub nx: OneOrMany<usize>,
    #[serde(default)]
    pub domain: Option<DomainConfig>,
    #[serde(default)]
    pub eigen: EigenSection,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

impl PoincareConfig {
    pub fn case(&self) -> Result<SweepCase> {
        SweepEntry { v: self.v.clone(), t_final: self.t_final, nt: self.nt, nx: self.nx.clone(), domain: None }
            .build(&self.domain)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldsConfig {
    #[serde(rename = "E")]
    pub e: [String; 3],
    #[serde(rename = "B")]
    pub b: [String; 3],
}

impl FieldsConfig {
    pub fn build(&self) -> Result<EMFields> {
        EMFields::parse(
            [&self.e[0], &self.e[1], &self.e[2]],
            [&self.b[0], &self.b[1], &self.b[2]],
        )
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VlasovCaseConfig {
    pub name: String,
    pub f: String,
    pub support_x: Vec<(f64, f64)>,
    pub support_v: [(f64, f64); 3],
    pub fields: FieldsConfig,
    #[serde(default)]
    pub domain: Option<DomainConfig>,
}

impl VlasovCaseConfig {
    pub fn build(&self) -> Result<(VlasovTestFunction, EMFields, SpaceDomain)> {
        let testfn = VlasovTestFunction::new(parse(&self.f)?, self.support_x.clone(), self.support_v)?;
        let omega = domain_or_unit(&self.domain, testfn.space_dim())?;
        Ok((testfn, self.fields.build()?, omega))
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryConfig {
    pub x0: [f64; 3],
    pub v0: [f64; 3],
    pub dt: f64,
    pub nsteps: usize,
    pub fields: FieldsConfig,
    pub output: PathBuf,
}

fn default_vlasov_order() -> usize {
    6
}

/// Configuration of `vlasov-check`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VlasovConfig {
    #[serde(rename = "T")]
    pub t_final: f64,
    #[serde(default = "default_vlasov_order")]
    pub quad_order: usize,
    /// Include the built-in catalog of test functions and fields.
    #[serde(default)]
    pub catalog: bool,
    #[serde(default)]
    pub cases: Vec<VlasovCaseConfig>,
    #[serde(default)]
    pub trajectory: Option<TrajectoryConfig>,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

pub fn load<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}
