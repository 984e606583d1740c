use thiserror::Error;

use super::{Func, Node};

/// Evaluation point: decision vector `x` and scenario parameters `p`.
#[derive(Debug, Clone, Copy)]
pub struct Env<'a> {
    pub x: &'a [f64],
    pub p: &'a [f64],
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("{func} of {arg} is outside its domain")]
    DomainViolation { func: &'static str, arg: f64 },
    #[error("division by zero")]
    DivByZero,
    #[error("result overflowed to a non-finite value")]
    Overflow,
    #[error("environment has dimensions {found:?}, expression expects {expected:?}")]
    Dimension {
        expected: (usize, usize),
        found: (usize, usize),
    },
}

fn finite(v: f64) -> Result<f64, EvalError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(EvalError::Overflow)
    }
}

pub(super) fn apply(func: Func, a: f64) -> Result<f64, EvalError> {
    let v = match func {
        Func::Sin => a.sin(),
        Func::Cos => a.cos(),
        Func::Exp => a.exp(),
        Func::Log => {
            if a <= 0.0 {
                return Err(EvalError::DomainViolation { func: "log", arg: a });
            }
            a.ln()
        }
        Func::Sqrt => {
            if a < 0.0 {
                return Err(EvalError::DomainViolation { func: "sqrt", arg: a });
            }
            a.sqrt()
        }
    };
    finite(v)
}

pub(super) fn power(base: f64, exponent: i32) -> Result<f64, EvalError> {
    if base == 0.0 && exponent < 0 {
        return Err(EvalError::DivByZero);
    }
    finite(base.powi(exponent))
}

pub(super) fn divide(a: f64, b: f64) -> Result<f64, EvalError> {
    if b == 0.0 {
        return Err(EvalError::DivByZero);
    }
    finite(a / b)
}

pub(super) fn eval(node: &Node, env: &Env<'_>) -> Result<f64, EvalError> {
    match node {
        Node::Num(c) => Ok(*c),
        Node::Var(i) => Ok(env.x[*i]),
        Node::Param(i) => Ok(env.p[*i]),
        Node::Neg(a) => Ok(-eval(a, env)?),
        Node::Add(a, b) => finite(eval(a, env)? + eval(b, env)?),
        Node::Sub(a, b) => finite(eval(a, env)? - eval(b, env)?),
        Node::Mul(a, b) => finite(eval(a, env)? * eval(b, env)?),
        Node::Div(a, b) => divide(eval(a, env)?, eval(b, env)?),
        Node::Pow(a, e) => power(eval(a, env)?, *e),
        Node::Call(f, a) => apply(*f, eval(a, env)?),
    }
}
