use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Geometric and coordinate variables a coefficient may reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Var {
    K,
    Tau,
    S,
    T,
}

impl Var {
    pub fn name(self) -> &'static str {
        match self {
            Var::K => "k",
            Var::Tau => "tau",
            Var::S => "s",
            Var::T => "t",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Sqrt,
    Abs,
}

impl Func {
    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
        }
    }

    pub fn apply(self, x: f64) -> f64 {
        match self {
            Func::Sin => x.sin(),
            Func::Cos => x.cos(),
            Func::Exp => x.exp(),
            Func::Sqrt => x.sqrt(),
            Func::Abs => x.abs(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
        }
    }

    pub fn apply(self, a: f64, b: f64) -> f64 {
        match self {
            BinOp::Add => a + b,
            BinOp::Sub => a - b,
            BinOp::Mul => a * b,
        }
    }
}

/// Coefficient expression tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Expr {
    Num(f64),
    Var(Var),
    /// Named constant, resolved from the flow's constants table.
    Const(String),
    Neg(Box<Expr>),
    Binary { op: BinOp, lhs: Box<Expr>, rhs: Box<Expr> },
    /// Division; `bare_k` records whether the denominator is the variable `k` itself.
    Div { num: Box<Expr>, den: Box<Expr>, bare_k: bool },
    Pow(Box<Expr>, f64),
    Call(Func, Box<Expr>),
    /// Arclength derivative `d_s(...)`.
    Ds(Box<Expr>),
}

impl Expr {
    pub fn num(x: f64) -> Self {
        Expr::Num(x)
    }

    pub fn binary(op: BinOp, lhs: Expr, rhs: Expr) -> Self {
        Expr::Binary { op, lhs: Box::new(lhs), rhs: Box::new(rhs) }
    }

    pub fn div(num: Expr, den: Expr) -> Self {
        let bare_k = matches!(den, Expr::Var(Var::K));
        Expr::Div { num: Box::new(num), den: Box::new(den), bare_k }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Num(x) if *x == 0.0)
    }

    fn as_num(&self) -> Option<f64> {
        match self {
            Expr::Num(x) => Some(*x),
            _ => None,
        }
    }

    fn children(&self) -> Vec<&Expr> {
        match self {
            Expr::Num(_) | Expr::Var(_) | Expr::Const(_) => vec![],
            Expr::Neg(e) | Expr::Pow(e, _) | Expr::Call(_, e) | Expr::Ds(e) => vec![e],
            Expr::Binary { lhs, rhs, .. } => vec![lhs, rhs],
            Expr::Div { num, den, .. } => vec![num, den],
        }
    }

    pub fn uses(&self, var: Var) -> bool {
        matches!(self, Expr::Var(v) if *v == var) || self.children().iter().any(|c| c.uses(var))
    }

    pub fn constants(&self, out: &mut Vec<String>) {
        if let Expr::Const(name) = self {
            if !out.contains(name) {
                out.push(name.clone());
            }
        }
        for c in self.children() {
            c.constants(out);
        }
    }

    /// Deepest nesting of `d_s`.
    pub fn derivative_depth(&self) -> usize {
        let inner = self.children().iter().map(|c| c.derivative_depth()).max().unwrap_or(0);
        inner + usize::from(matches!(self, Expr::Ds(_)))
    }

    /// True when the value at a node is a function of `k` at that node alone.
    pub fn is_k_only(&self) -> bool {
        match self {
            Expr::Var(Var::K) | Expr::Num(_) | Expr::Const(_) => true,
            Expr::Var(_) | Expr::Ds(_) => false,
            _ => self.children().iter().all(|c| c.is_k_only()),
        }
    }

    /// Top-level additive terms with their signs.
    pub fn additive_terms(&self) -> Vec<(f64, &Expr)> {
        let mut out = Vec::new();
        self.collect_terms(1.0, &mut out);
        out
    }

    fn collect_terms<'a>(&'a self, sign: f64, out: &mut Vec<(f64, &'a Expr)>) {
        match self {
            Expr::Binary { op: BinOp::Add, lhs, rhs } => {
                lhs.collect_terms(sign, out);
                rhs.collect_terms(sign, out);
            }
            Expr::Binary { op: BinOp::Sub, lhs, rhs } => {
                lhs.collect_terms(sign, out);
                rhs.collect_terms(-sign, out);
            }
            Expr::Neg(e) => e.collect_terms(-sign, out),
            _ => out.push((sign, self)),
        }
    }

    /// Replaces bound constants by their values without any other rewriting.
    pub fn substitute(&self, constants: &BTreeMap<String, f64>) -> Expr {
        let sub = |e: &Expr| Box::new(e.substitute(constants));
        match self {
            Expr::Num(_) | Expr::Var(_) => self.clone(),
            Expr::Const(name) => constants.get(name).map_or_else(|| self.clone(), |&v| Expr::Num(v)),
            Expr::Neg(e) => Expr::Neg(sub(e)),
            Expr::Binary { op, lhs, rhs } => Expr::Binary { op: *op, lhs: sub(lhs), rhs: sub(rhs) },
            Expr::Div { num, den, bare_k } => Expr::Div { num: sub(num), den: sub(den), bare_k: *bare_k },
            Expr::Pow(b, e) => Expr::Pow(sub(b), *e),
            Expr::Call(f, a) => Expr::Call(*f, sub(a)),
            Expr::Ds(e) => Expr::Ds(sub(e)),
        }
    }

    /// Constant folding with the named constants substituted. Applies only the
    /// identities `x + 0`, `x - 0`, `0 - x`, `x * 0`, `x * 1`, `x / 1`, `0 / x`, `x ^ 1`,
    /// `x ^ 0`, `--x`, and `d_s` of a quantity independent of arclength.
    pub fn fold(&self, constants: &BTreeMap<String, f64>) -> Expr {
        match self {
            Expr::Num(_) | Expr::Var(_) => self.clone(),
            Expr::Const(name) => constants.get(name).map_or_else(|| self.clone(), |&v| Expr::Num(v)),
            Expr::Neg(e) => match e.fold(constants) {
                Expr::Num(x) => Expr::Num(-x),
                Expr::Neg(inner) => *inner,
                other => Expr::Neg(Box::new(other)),
            },
            Expr::Binary { op, lhs, rhs } => {
                let (l, r) = (lhs.fold(constants), rhs.fold(constants));
                match (op, l.as_num(), r.as_num()) {
                    (_, Some(a), Some(b)) => Expr::Num(op.apply(a, b)),
                    (BinOp::Add, Some(z), _) if z == 0.0 => r,
                    (BinOp::Add | BinOp::Sub, _, Some(z)) if z == 0.0 => l,
                    (BinOp::Sub, Some(z), _) if z == 0.0 => Expr::Neg(Box::new(r)),
                    (BinOp::Mul, Some(z), _) | (BinOp::Mul, _, Some(z)) if z == 0.0 => Expr::Num(0.0),
                    (BinOp::Mul, Some(o), _) if o == 1.0 => r,
                    (BinOp::Mul, _, Some(o)) if o == 1.0 => l,
                    _ => Expr::binary(*op, l, r),
                }
            }
            Expr::Div { num, den, .. } => {
                let (n, d) = (num.fold(constants), den.fold(constants));
                match (n.as_num(), d.as_num()) {
                    (Some(a), Some(b)) => Expr::Num(a / b),
                    (_, Some(o)) if o == 1.0 => n,
                    (Some(z), _) if z == 0.0 => Expr::Num(0.0),
                    _ => Expr::div(n, d),
                }
            }
            Expr::Pow(base, e) => {
                let b = base.fold(constants);
                match b.as_num() {
                    Some(x) => Expr::Num(pow(x, *e)),
                    None if *e == 1.0 => b,
                    None if *e == 0.0 => Expr::Num(1.0),
                    None => Expr::Pow(Box::new(b), *e),
                }
            }
            Expr::Call(f, arg) => match arg.fold(constants) {
                Expr::Num(x) => Expr::Num(f.apply(x)),
                other => Expr::Call(*f, Box::new(other)),
            },
            Expr::Ds(e) => {
                let inner = e.fold(constants);
                if matches!(inner, Expr::Var(Var::S)) {
                    Expr::Num(1.0)
                } else if !(inner.uses(Var::K) || inner.uses(Var::Tau) || inner.uses(Var::S)) {
                    Expr::Num(0.0)
                } else {
                    Expr::Ds(Box::new(inner))
                }
            }
        }
    }

    /// Coefficients `[c0, c1, ...]` when the expression is a polynomial in `k` alone.
    pub fn k_polynomial(&self) -> Option<Vec<f64>> {
        match self {
            Expr::Num(x) => Some(vec![*x]),
            Expr::Var(Var::K) => Some(vec![0.0, 1.0]),
            Expr::Var(_) | Expr::Const(_) | Expr::Call(..) | Expr::Ds(_) => None,
            Expr::Neg(e) => Some(e.k_polynomial()?.into_iter().map(|c| -c).collect()),
            Expr::Binary { op, lhs, rhs } => {
                let (a, b) = (lhs.k_polynomial()?, rhs.k_polynomial()?);
                Some(match op {
                    BinOp::Add => poly_add(&a, &b, 1.0),
                    BinOp::Sub => poly_add(&a, &b, -1.0),
                    BinOp::Mul => poly_mul(&a, &b),
                })
            }
            Expr::Div { num, den, .. } => {
                let d = den.as_num()?;
                Some(num.k_polynomial()?.into_iter().map(|c| c / d).collect())
            }
            Expr::Pow(base, e) => {
                if *e < 0.0 || e.fract() != 0.0 || *e > 64.0 {
                    return None;
                }
                let b = base.k_polynomial()?;
                let mut acc = vec![1.0];
                for _ in 0..(*e as usize) {
                    acc = poly_mul(&acc, &b);
                }
                Some(acc)
            }
        }
    }

    /// Rough polynomial degree in `k`, used by the step-size heuristic.
    pub fn k_degree(&self) -> f64 {
        if let Some(p) = self.k_polynomial() {
            return p.iter().rposition(|&c| c != 0.0).unwrap_or(0) as f64;
        }
        match self {
            Expr::Var(Var::K) => 1.0,
            Expr::Num(_) | Expr::Var(_) | Expr::Const(_) => 0.0,
            Expr::Neg(e) | Expr::Ds(e) | Expr::Call(_, e) => e.k_degree(),
            Expr::Binary { op: BinOp::Mul, lhs, rhs } => lhs.k_degree() + rhs.k_degree(),
            Expr::Binary { lhs, rhs, .. } => lhs.k_degree().max(rhs.k_degree()),
            Expr::Div { num, den, .. } => (num.k_degree() - den.k_degree()).max(0.0),
            Expr::Pow(b, e) => b.k_degree() * e.max(0.0),
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Binary { op: BinOp::Add | BinOp::Sub, .. } => 1,
            Expr::Binary { op: BinOp::Mul, .. } | Expr::Div { .. } => 2,
            Expr::Neg(_) => 3,
            Expr::Pow(..) => 4,
            Expr::Num(x) if x.is_sign_negative() => 3,
            _ => 5,
        }
    }
}

pub(crate) fn pow(x: f64, e: f64) -> f64 {
    if e.fract() == 0.0 && e.abs() <= i32::MAX as f64 {
        x.powi(e as i32)
    } else {
        x.powf(e)
    }
}

fn poly_add(a: &[f64], b: &[f64], sign: f64) -> Vec<f64> {
    let mut out = vec![0.0; a.len().max(b.len())];
    for (i, &c) in a.iter().enumerate() {
        out[i] += c;
    }
    for (i, &c) in b.iter().enumerate() {
        out[i] += sign * c;
    }
    out
}

fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

struct Wrapped<'a>(&'a Expr, bool);

impl fmt::Display for Wrapped<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.1 {
            write!(f, "({})", self.0)
        } else {
            write!(f, "{}", self.0)
        }
    }
}

/// Prints with the minimal parentheses that reparse to the identical tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = self.precedence();
        match self {
            Expr::Num(x) if x.is_sign_negative() => write!(f, "-{}", -x),
            Expr::Num(x) => write!(f, "{x}"),
            Expr::Var(v) => f.write_str(v.name()),
            Expr::Const(name) => f.write_str(name),
            Expr::Neg(e) => write!(f, "-{}", Wrapped(e, e.precedence() <= 3 || matches!(**e, Expr::Num(_)))),
            Expr::Binary { op, lhs, rhs } => write!(
                f,
                "{} {} {}",
                Wrapped(lhs, lhs.precedence() < p),
                op.symbol(),
                Wrapped(rhs, rhs.precedence() <= p)
            ),
            Expr::Div { num, den, .. } => {
                write!(f, "{} / {}", Wrapped(num, num.precedence() < p), Wrapped(den, den.precedence() <= p))
            }
            Expr::Pow(b, e) => write!(f, "{}^{}", Wrapped(b, b.precedence() < 5), e),
            Expr::Call(func, arg) => write!(f, "{}({})", func.name(), arg),
            Expr::Ds(e) => write!(f, "d_s({e})"),
        }
    }
}
