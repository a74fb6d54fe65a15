//! Command-line front end.
//!
//! Exit codes: 0 success, 2 configuration or usage error, 3 bound
//! violation, 4 solver non-convergence.

pub mod config;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::expr::parse;
use crate::lifting::{lift, linf_bound_check};
use crate::poincare::{discrete_constant, run_sweep, write_sweep_csv, SweepCase, SweepRow};
use crate::report::csv_line;
use crate::report::fmt_f64;
use crate::stils::{convergence_study, solve_transport, stability_check, write_convergence_csv, write_solution_csv};
use crate::vlasov::{catalog_cases, flow_rk4, vlasov_ratio, write_ratio_csv, write_trajectory_csv, PhaseState};

use config::{load, CaseConfig, EigenSection, PoincareConfig, SweepConfig, VlasovConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_BOUND: i32 = 3;
pub const EXIT_NO_CONVERGENCE: i32 = 4;

const DEFAULT_LADDER: [usize; 3] = [8, 16, 32];

#[derive(Debug, Parser)]
#[command(name = "kinetic-stils", version, about = "Space-time least-squares transport solver and Poincare checks")]
pub struct Cli {
    /// JSON configuration file
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output file; overrides the configuration's "output"
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Suppress the human-readable report on stdout
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve a transport problem and check the stability bound
    Solve,
    /// Lift initial and inflow data along characteristics
    Lift,
    /// Discrete Poincare constant for one case or a sweep
    Poincare(PoincareArgs),
    /// Vlasov divergence, flow and inequality checks
    VlasovCheck,
    /// Refinement study against an exact solution
    Convergence,
}

#[derive(Debug, clap::Args)]
pub struct PoincareArgs {
    #[arg(long = "T", allow_negative_numbers = true)]
    pub t_final: Option<f64>,
    /// Velocity, comma-separated in 2D
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub v: Option<Vec<f64>>,
    #[arg(long, default_value_t = 32)]
    pub nt: usize,
    /// Spatial cells, comma-separated per axis
    #[arg(long, value_delimiter = ',', default_value = "32")]
    pub nx: Vec<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// JSON sweep description; writes one CSV row per case
    #[arg(long, value_name = "FILE")]
    pub sweep: Option<PathBuf>,
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::NoConvergence { .. } | Error::EigenNoConvergence { .. } | Error::IntegrationFailure { .. } => {
            EXIT_NO_CONVERGENCE
        }
        Error::Inconsistent(_) => EXIT_BOUND,
        _ => EXIT_USAGE,
    }
}

struct Session<'a> {
    stdout: &'a mut dyn Write,
    quiet: bool,
    out: Option<PathBuf>,
    config: Option<PathBuf>,
}

impl Session<'_> {
    fn say(&mut self, line: &str) -> Result<()> {
        if !self.quiet {
            writeln!(self.stdout, "{line}")?;
        }
        Ok(())
    }

    fn config_path(&self) -> Result<&Path> {
        self.config.as_deref().ok_or_else(|| invalid("this command needs --config PATH"))
    }

    fn output(&self, fallback: &Option<PathBuf>) -> Option<PathBuf> {
        self.out.clone().or_else(|| fallback.clone())
    }

    /// Writes `bytes` to `path`, or to stdout when there is no path.
    fn emit(&mut self, path: &Option<PathBuf>, bytes: &[u8]) -> Result<()> {
        match path {
            Some(p) => std::fs::write(p, bytes)?,
            None if !self.quiet => self.stdout.write_all(bytes)?,
            None => {}
        }
        Ok(())
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{text}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(stderr, "{text}");
                    EXIT_USAGE
                }
            };
        }
    };
    let mut session = Session { stdout, quiet: cli.quiet, out: cli.out, config: cli.config };
    let outcome = match &cli.command {
        Command::Solve => cmd_solve(&mut session),
        Command::Lift => cmd_lift(&mut session),
        Command::Poincare(args) => cmd_poincare(&mut session, args),
        Command::VlasovCheck => cmd_vlasov_check(&mut session),
        Command::Convergence => cmd_convergence(&mut session),
    };
    match outcome {
        Ok(true) => EXIT_OK,
        Ok(false) => EXIT_BOUND,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            exit_code(&e)
        }
    }
}

fn summary_path(csv: &Path) -> PathBuf {
    csv.with_extension("summary.json")
}

#[derive(Serialize)]
struct SolveSummary {
    l2_f: f64,
    #[serde(rename = "l2_G")]
    l2_g: f64,
    ratio: Option<f64>,
    bound: f64,
    pass: bool,
    iterations: usize,
    residual: f64,
}

fn cmd_solve(s: &mut Session) -> Result<bool> {
    let cfg: CaseConfig = load(s.config_path()?)?;
    let case = cfg.transport_case()?;
    let sol = solve_transport(&case)?;
    let report = stability_check(&sol.f, sol.l2_source, case.grid.t_final())?;
    let summary = SolveSummary {
        l2_f: sol.f.l2_f.unwrap_or(0.0),
        l2_g: sol.l2_source,
        ratio: report.ratio,
        bound: report.bound,
        pass: report.pass,
        iterations: sol.f.iterations,
        residual: sol.f.residual,
    };
    let json = serde_json::to_string_pretty(&summary)?;
    if let Some(path) = s.output(&cfg.output) {
        let mut buf = Vec::new();
        write_solution_csv(&mut buf, &case.grid, &sol.u, &sol.f.f, &sol.g.coefficients)?;
        std::fs::write(&path, buf)?;
        std::fs::write(summary_path(&path), format!("{json}\n"))?;
    }
    s.say(&json)?;
    Ok(report.pass)
}

fn cmd_lift(s: &mut Session) -> Result<bool> {
    let cfg: CaseConfig = load(s.config_path()?)?;
    let grid = cfg.grid()?;
    let v = cfg.velocity();
    let (u0, ub) = (parse(&cfg.u0)?, parse(&cfg.ub)?);
    let g = lift(&u0, &ub, &v, &grid)?;
    let report = linf_bound_check(&g, &u0, &ub, &grid)?;

    let mut header = vec!["t", "x", "y"];
    header.truncate(1 + grid.space_dim());
    header.push("g");
    let mut buf = csv_line(header).into_bytes();
    for n in 0..grid.node_count() {
        let mut row: Vec<String> = grid.node_point(n).into_iter().map(fmt_f64).collect();
        row.push(fmt_f64(g.coefficients[n]));
        buf.extend(csv_line(row).into_bytes());
    }
    let path = s.output(&cfg.output);
    let to_file = path.is_some();
    s.emit(&path, &buf)?;
    if to_file {
        s.say(&format!(
            "max |g| = {}  bound = {}  pass = {}",
            fmt_f64(report.max_abs),
            fmt_f64(report.bound),
            report.pass
        ))?;
    }
    Ok(report.pass)
}

fn poincare_cases(s: &Session, args: &PoincareArgs) -> Result<(Vec<SweepCase>, EigenSection, Option<PathBuf>, bool)> {
    if let Some(sweep) = &args.sweep {
        let cfg: SweepConfig = load(sweep)?;
        let mut eigen = cfg.eigen.clone();
        eigen.seed = args.seed.or(eigen.seed);
        return Ok((cfg.cases()?, eigen, cfg.output.clone(), true));
    }
    if let Some(path) = &s.config {
        let cfg: PoincareConfig = load(path)?;
        let mut eigen = cfg.eigen.clone();
        eigen.seed = args.seed.or(eigen.seed);
        return Ok((vec![cfg.case()?], eigen, cfg.output.clone(), false));
    }
    let t_final = args.t_final.ok_or_else(|| invalid("poincare needs --T (or --config / --sweep)"))?;
    let velocity = args.v.clone().ok_or_else(|| invalid("poincare needs --v (or --config / --sweep)"))?;
    let domain = crate::geometry::SpaceDomain::new(vec![0.0; velocity.len()], vec![1.0; velocity.len()])?;
    let mut nx = args.nx.clone();
    if nx.len() == 1 && velocity.len() > 1 {
        nx = vec![nx[0]; velocity.len()];
    }
    let case = SweepCase { velocity, t_final, nt: args.nt, nx, domain };
    case.grid()?;
    Ok((vec![case], EigenSection { seed: args.seed, ..Default::default() }, None, false))
}

fn cmd_poincare(s: &mut Session, args: &PoincareArgs) -> Result<bool> {
    let (cases, eigen, cfg_out, sweep) = poincare_cases(s, args)?;
    let eigen = eigen.build()?;
    let rows: Vec<SweepRow> = if sweep {
        run_sweep(&cases, &eigen)?
    } else {
        let c = &cases[0];
        let result = discrete_constant(&c.grid()?, &c.velocity, &eigen)?;
        let pass = result.certifies(c.t_final);
        vec![SweepRow { case: c.clone(), result, pass }]
    };
    let mut buf = Vec::new();
    write_sweep_csv(&mut buf, &rows)?;
    let path = s.output(&cfg_out);
    if sweep && path.is_none() {
        s.emit(&None, &buf)?;
    } else {
        if let Some(p) = &path {
            std::fs::write(p, &buf)?;
        }
        for r in &rows {
            s.say(&format!(
                "v = {:?}  T = {}  nt = {}  nx = {:?}  C_h = {}  2T = {}  pass = {}",
                r.case.velocity,
                r.case.t_final,
                r.case.nt,
                r.case.nx,
                fmt_f64(r.result.c_h),
                fmt_f64(2.0 * r.case.t_final),
                r.pass
            ))?;
        }
    }
    Ok(rows.iter().all(|r| r.pass))
}

fn cmd_vlasov_check(s: &mut Session) -> Result<bool> {
    let cfg: VlasovConfig = load(s.config_path()?)?;
    let mut rows = Vec::new();
    if cfg.catalog {
        for c in catalog_cases() {
            let r = vlasov_ratio(&c.testfn, &c.fields, cfg.t_final, cfg.quad_order, &c.omega)?;
            rows.push((c.name, r));
        }
    }
    for c in &cfg.cases {
        let (testfn, fields, omega) = c.build()?;
        let r = vlasov_ratio(&testfn, &fields, cfg.t_final, cfg.quad_order, &omega)?;
        rows.push((c.name.clone(), r));
    }
    if rows.is_empty() && cfg.trajectory.is_none() {
        return Err(invalid("vlasov-check needs \"catalog\": true, \"cases\" or a \"trajectory\""));
    }
    if let Some(tr) = &cfg.trajectory {
        let state = PhaseState::new(0.0, tr.x0, tr.v0)?;
        let traj = flow_rk4(&state, &tr.fields.build()?, tr.dt, tr.nsteps)?;
        let mut buf = Vec::new();
        write_trajectory_csv(&mut buf, &traj)?;
        std::fs::write(&tr.output, buf)?;
    }
    let pass = rows.iter().all(|(_, r)| r.pass);
    if !rows.is_empty() {
        let mut buf = Vec::new();
        write_ratio_csv(&mut buf, &rows)?;
        let path = s.output(&cfg.output);
        let to_file = path.is_some();
        s.emit(&path, &buf)?;
        if to_file {
            let failed = rows.iter().filter(|(_, r)| !r.pass).count();
            s.say(&format!("{} cases, {} failed", rows.len(), failed))?;
        }
    }
    Ok(pass)
}

fn cmd_convergence(s: &mut Session) -> Result<bool> {
    let cfg: CaseConfig = load(s.config_path()?)?;
    let case = cfg.transport_case()?;
    let exact = cfg.exact()?;
    let ladder = cfg.ladder.clone().unwrap_or_else(|| DEFAULT_LADDER.to_vec());
    let rows = convergence_study(&case, &exact, &ladder)?;
    let decreasing = rows.windows(2).all(|w| w[1].error < w[0].error);
    let order = rows.last().and_then(|r| r.order);
    let order_ok = match (cfg.min_order, order) {
        (Some(min), Some(o)) => o >= min,
        (Some(_), None) => false,
        (None, _) => true,
    };
    let mut buf = Vec::new();
    write_convergence_csv(&mut buf, &rows)?;
    let path = s.output(&cfg.output);
    let to_file = path.is_some();
    s.emit(&path, &buf)?;
    if to_file {
        let shown = order.map(fmt_f64).unwrap_or_else(|| "n/a".into());
        s.say(&format!("observed order = {shown}  decreasing = {decreasing}"))?;
    }
    Ok(decreasing && order_ok)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn call(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(std::iter::once("kinetic-stils").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn usage_errors() {
        assert_eq!(call(&[]).0, EXIT_USAGE);
        assert_eq!(call(&["frobnicate"]).0, EXIT_USAGE);
        assert_eq!(call(&["solve"]).0, EXIT_USAGE);
        assert_eq!(call(&["--help"]).0, EXIT_OK);
    }

    #[test]
    fn poincare_flags() {
        let (code, out, _) = call(&["poincare", "--T", "1", "--v", "0", "--nt", "8", "--nx", "4"]);
        assert_eq!(code, EXIT_OK);
        assert!(out.contains("pass = true"));
        let (code, _, err) = call(&["poincare", "--T", "-1", "--v", "0"]);
        assert_eq!(code, EXIT_USAGE, "{err}");
        assert_eq!(call(&["poincare", "--v", "0"]).0, EXIT_USAGE);
    }

    #[test]
    fn exit_code_mapping() {
        assert_eq!(exit_code(&Error::IntegrationFailure { step: 3 }), EXIT_NO_CONVERGENCE);
        assert_eq!(exit_code(&Error::EigenNoConvergence { iterations: 1, lambda: 1.0, residual: 1.0 }), 4);
        assert_eq!(exit_code(&Error::InvalidArgument("x".into())), EXIT_USAGE);
        assert_eq!(exit_code(&Error::Inconsistent("x".into())), EXIT_BOUND);
    }
}
