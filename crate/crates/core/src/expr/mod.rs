//! Arithmetic mini-language for analytic data: source terms, initial and
//! inflow data, electromagnetic fields and test functions.
//!
//! ```text
//! expr   := term (("+"|"-") term)*
//! term   := factor (("*"|"/") factor)*
//! factor := unary ("^" factor)?
//! unary  := "-" unary | atom
//! atom   := number | name | name "(" expr ("," expr)* ")" | "(" expr ")"
//! ```

mod parser;

use std::collections::BTreeSet;
use std::fmt;

use crate::error::{Error, Result};

pub use parser::parse;

/// Free variables of the language.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Var {
    T,
    X,
    Y,
    Vx,
    Vy,
    Vz,
}

impl Var {
    pub const ALL: [Var; 6] = [Var::T, Var::X, Var::Y, Var::Vx, Var::Vy, Var::Vz];

    pub fn name(self) -> &'static str {
        match self {
            Var::T => "t",
            Var::X => "x",
            Var::Y => "y",
            Var::Vx => "vx",
            Var::Vy => "vy",
            Var::Vz => "vz",
        }
    }

    pub fn from_name(name: &str) -> Option<Var> {
        Var::ALL.into_iter().find(|v| v.name() == name)
    }

    /// Spatial variable for axis `i` (0 = x, 1 = y).
    pub fn space(i: usize) -> Var {
        [Var::X, Var::Y][i]
    }

    /// Velocity component `i` (0 = vx, 1 = vy, 2 = vz).
    pub fn velocity(i: usize) -> Var {
        [Var::Vx, Var::Vy, Var::Vz][i]
    }

    fn slot(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Abs,
    Sqrt,
    Min,
    Max,
}

impl Func {
    const ALL: [Func; 7] = [Func::Sin, Func::Cos, Func::Exp, Func::Abs, Func::Sqrt, Func::Min, Func::Max];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Abs => "abs",
            Func::Sqrt => "sqrt",
            Func::Min => "min",
            Func::Max => "max",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == name)
    }

    pub fn arity(self) -> usize {
        match self {
            Func::Min | Func::Max => 2,
            _ => 1,
        }
    }

    fn apply(self, args: &[f64]) -> f64 {
        match self {
            Func::Sin => args[0].sin(),
            Func::Cos => args[0].cos(),
            Func::Exp => args[0].exp(),
            Func::Abs => args[0].abs(),
            Func::Sqrt => args[0].sqrt(),
            Func::Min => args[0].min(args[1]),
            Func::Max => args[0].max(args[1]),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
            BinOp::Pow => '^',
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expression {
    Num(f64),
    Pi,
    Var(Var),
    Neg(Box<Expression>),
    Binary(BinOp, Box<Expression>, Box<Expression>),
    Call(Func, Vec<Expression>),
}

/// Variable bindings for evaluation.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EvalContext {
    slots: [Option<f64>; 6],
}

impl EvalContext {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, var: Var, value: f64) -> Self {
        self.set(var, value);
        self
    }

    pub fn set(&mut self, var: Var, value: f64) {
        self.slots[var.slot()] = Some(value);
    }

    pub fn unset(&mut self, var: Var) {
        self.slots[var.slot()] = None;
    }

    pub fn get(&self, var: Var) -> Option<f64> {
        self.slots[var.slot()]
    }

    /// Binds `t`, the spatial coordinates and the velocity components.
    pub fn at(t: f64, x: &[f64], v: &[f64]) -> Self {
        let mut ctx = Self::new().with(Var::T, t);
        ctx.bind_space(x);
        ctx.bind_velocity(v);
        ctx
    }

    pub fn bind_space(&mut self, x: &[f64]) {
        for (i, xi) in x.iter().enumerate() {
            self.set(Var::space(i), *xi);
        }
    }

    pub fn bind_velocity(&mut self, v: &[f64]) {
        for (i, vi) in v.iter().enumerate() {
            self.set(Var::velocity(i), *vi);
        }
    }

    pub fn is_bound(&self, var: Var) -> bool {
        self.get(var).is_some()
    }
}

impl Expression {
    pub fn eval(&self, ctx: &EvalContext) -> Result<f64> {
        Ok(match self {
            Expression::Num(n) => *n,
            Expression::Pi => std::f64::consts::PI,
            Expression::Var(v) => ctx
                .get(*v)
                .ok_or_else(|| Error::Eval(format!("variable '{}' is not bound", v.name())))?,
            Expression::Neg(e) => -e.eval(ctx)?,
            Expression::Binary(op, l, r) => {
                let (a, b) = (l.eval(ctx)?, r.eval(ctx)?);
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => a / b,
                    BinOp::Pow => pow(a, b),
                }
            }
            Expression::Call(f, args) => {
                let mut vals = [0.0; 2];
                for (slot, a) in vals.iter_mut().zip(args) {
                    *slot = a.eval(ctx)?;
                }
                f.apply(&vals[..args.len()])
            }
        })
    }

    /// Evaluates and rejects non-finite results.
    pub fn eval_finite(&self, ctx: &EvalContext) -> Result<f64> {
        let v = self.eval(ctx)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Eval(format!("'{self}' evaluated to {v}")))
        }
    }

    pub fn free_vars(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<Var>) {
        match self {
            Expression::Var(v) => {
                out.insert(*v);
            }
            Expression::Neg(e) => e.collect_vars(out),
            Expression::Binary(_, l, r) => {
                l.collect_vars(out);
                r.collect_vars(out);
            }
            Expression::Call(_, args) => args.iter().for_each(|a| a.collect_vars(out)),
            Expression::Num(_) | Expression::Pi => {}
        }
    }

    pub fn free_var_names(&self) -> BTreeSet<&'static str> {
        self.free_vars().into_iter().map(Var::name).collect()
    }

    /// Fails unless every free variable is in `allowed`.
    pub fn check_vars(&self, allowed: &[Var], what: &str) -> Result<()> {
        match self.free_vars().into_iter().find(|v| !allowed.contains(v)) {
            Some(v) => Err(Error::InvalidArgument(format!(
                "{what}: variable '{}' is not available here",
                v.name()
            ))),
            None => Ok(()),
        }
    }

    pub fn constant(value: f64) -> Self {
        Expression::Num(value)
    }

    pub fn is_zero_literal(&self) -> bool {
        matches!(self, Expression::Num(n) if *n == 0.0)
    }
}

// Integer exponents go through powi so that squares and cubes of negative
// bases stay exact and finite.
fn pow(a: f64, b: f64) -> f64 {
    if b.fract() == 0.0 && b.abs() <= i32::MAX as f64 {
        a.powi(b as i32)
    } else {
        a.powf(b)
    }
}

/// Fully parenthesized form; parses back to an identical tree.
impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expression::Num(n) if *n < 0.0 || (*n == 0.0 && n.is_sign_negative()) => {
                write!(f, "(-{:?})", -n)
            }
            Expression::Num(n) => write!(f, "{n:?}"),
            Expression::Pi => f.write_str("pi"),
            Expression::Var(v) => f.write_str(v.name()),
            Expression::Neg(e) => write!(f, "(-{e})"),
            Expression::Binary(op, l, r) => write!(f, "({l}{}{r})", op.symbol()),
            Expression::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
        }
    }
}

impl std::str::FromStr for Expression {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse(s)
    }
}
