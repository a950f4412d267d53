//! Pointwise evaluation of coefficient expressions on a sampled profile.

use super::ast::{pow, Expr, Var};
use super::FlowError;
use crate::spectral;

/// Denominator magnitude below which division is refused.
pub const DIVISION_GUARD: f64 = 1e-12;

/// Evaluated expression; constants stay scalar so that derivatives of them are exact zeros.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Scalar(f64),
    Field(Vec<f64>),
}

impl Value {
    pub fn into_field(self, n: usize) -> Vec<f64> {
        match self {
            Value::Scalar(x) => vec![x; n],
            Value::Field(v) => v,
        }
    }

    pub fn at(&self, j: usize) -> f64 {
        match self {
            Value::Scalar(x) => *x,
            Value::Field(v) => v[j],
        }
    }

    fn map(self, f: impl Fn(f64) -> f64) -> Value {
        match self {
            Value::Scalar(x) => Value::Scalar(f(x)),
            Value::Field(mut v) => {
                v.iter_mut().for_each(|x| *x = f(*x));
                Value::Field(v)
            }
        }
    }

    fn zip(self, other: Value, f: impl Fn(f64, f64) -> f64) -> Value {
        match (self, other) {
            (Value::Scalar(a), Value::Scalar(b)) => Value::Scalar(f(a, b)),
            (Value::Scalar(a), Value::Field(mut v)) => {
                v.iter_mut().for_each(|x| *x = f(a, *x));
                Value::Field(v)
            }
            (Value::Field(mut v), Value::Scalar(b)) => {
                v.iter_mut().for_each(|x| *x = f(*x, b));
                Value::Field(v)
            }
            (Value::Field(mut v), Value::Field(w)) => {
                v.iter_mut().zip(w).for_each(|(x, y)| *x = f(*x, y));
                Value::Field(v)
            }
        }
    }
}

/// Sampled geometry an expression is evaluated against.
#[derive(Debug, Clone, Copy)]
pub struct EvalContext<'a> {
    pub k: &'a [f64],
    pub tau: &'a [f64],
    /// Arclength of each node measured from node 0.
    pub s: &'a [f64],
    pub t: f64,
    /// Period of the grid coordinate the samples are uniform in.
    pub period: f64,
    /// `ds/du` when the grid coordinate `u` is not arclength.
    pub speed: Option<&'a [f64]>,
}

impl EvalContext<'_> {
    pub fn len(&self) -> usize {
        self.k.len()
    }

    pub fn is_empty(&self) -> bool {
        self.k.is_empty()
    }

    /// Spectral arclength derivative of a periodic field.
    pub fn d_s(&self, f: &[f64]) -> Vec<f64> {
        let mut d = spectral::derivative(f, self.period, 1);
        if let Some(speed) = self.speed {
            d.iter_mut().zip(speed).for_each(|(x, v)| *x /= v);
        }
        d
    }
}

pub fn eval(expr: &Expr, ctx: &EvalContext) -> Result<Value, FlowError> {
    Ok(match expr {
        Expr::Num(x) => Value::Scalar(*x),
        Expr::Var(v) => match v {
            Var::K => Value::Field(ctx.k.to_vec()),
            Var::Tau => Value::Field(ctx.tau.to_vec()),
            Var::S => Value::Field(ctx.s.to_vec()),
            Var::T => Value::Scalar(ctx.t),
        },
        Expr::Const(name) => return Err(FlowError::UnboundConstant(name.clone())),
        Expr::Neg(e) => eval(e, ctx)?.map(|x| -x),
        Expr::Binary { op, lhs, rhs } => {
            let op = *op;
            eval(lhs, ctx)?.zip(eval(rhs, ctx)?, move |a, b| op.apply(a, b))
        }
        Expr::Div { num, den, bare_k } => {
            if *bare_k {
                if let Some(poly) = num.k_polynomial().filter(|p| p[0] == 0.0) {
                    // sum_n c_n k^n / k = sum_n c_n k^(n-1), regular at k = 0
                    let reduced = &poly[1..];
                    return Ok(Value::Field(ctx.k.iter().map(|&k| horner(reduced, k)).collect()));
                }
            }
            let d = eval(den, ctx)?;
            let bad = match &d {
                Value::Scalar(x) => (x.abs() < DIVISION_GUARD).then_some(0),
                Value::Field(v) => v.iter().position(|x| x.abs() < DIVISION_GUARD),
            };
            if let Some(node) = bad {
                return Err(FlowError::DivisionNearZero { node, expr: expr.to_string() });
            }
            eval(num, ctx)?.zip(d, |a, b| a / b)
        }
        Expr::Pow(b, e) => {
            let e = *e;
            eval(b, ctx)?.map(move |x| pow(x, e))
        }
        Expr::Call(f, arg) => {
            let f = *f;
            eval(arg, ctx)?.map(move |x| f.apply(x))
        }
        Expr::Ds(e) => match eval(e, ctx)? {
            Value::Scalar(_) => Value::Scalar(0.0),
            Value::Field(v) => Value::Field(ctx.d_s(&v)),
        },
    })
}

fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

/// Evaluates an expression that depends on `k` alone at a single curvature value.
pub fn eval_k_only(expr: &Expr, k: f64) -> Result<f64, FlowError> {
    debug_assert!(expr.is_k_only());
    Ok(match expr {
        Expr::Num(x) => *x,
        Expr::Var(Var::K) => k,
        Expr::Var(_) | Expr::Ds(_) => unreachable!("not a k-only expression"),
        Expr::Const(name) => return Err(FlowError::UnboundConstant(name.clone())),
        Expr::Neg(e) => -eval_k_only(e, k)?,
        Expr::Binary { op, lhs, rhs } => op.apply(eval_k_only(lhs, k)?, eval_k_only(rhs, k)?),
        Expr::Div { num, den, bare_k } => {
            if *bare_k {
                if let Some(poly) = num.k_polynomial().filter(|p| p[0] == 0.0) {
                    return Ok(horner(&poly[1..], k));
                }
            }
            let d = eval_k_only(den, k)?;
            if d.abs() < DIVISION_GUARD {
                return Err(FlowError::DivisionNearZero { node: 0, expr: expr.to_string() });
            }
            eval_k_only(num, k)? / d
        }
        Expr::Pow(b, e) => pow(eval_k_only(b, k)?, *e),
        Expr::Call(f, arg) => f.apply(eval_k_only(arg, k)?),
    })
}
