//! Arithmetic expressions over decision variables `x1..xn` and scenario
//! parameters `p1..pk`.
//!
//! The language is closed under differentiation: powers only take integer
//! literal exponents, and every primitive (`sin`, `cos`, `exp`, `log`,
//! `sqrt`) has a derivative expressible in the same grammar.

mod diff;
mod eval;
mod parse;
mod print;

use std::fmt;

use thiserror::Error;

pub use eval::{Env, EvalError};
pub use parse::{ParseError, MAX_DEPTH, MAX_EXPONENT, MAX_NESTING};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            _ => return None,
        })
    }
}

/// Syntax tree node. Variable and parameter indices are zero-based.
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Num(f64),
    Var(usize),
    Param(usize),
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Pow(Box<Node>, i32),
    Call(Func, Box<Node>),
}

impl Node {
    pub fn as_num(&self) -> Option<f64> {
        match self {
            Node::Num(c) => Some(*c),
            _ => None,
        }
    }

    fn is_num(&self, value: f64) -> bool {
        matches!(self, Node::Num(c) if *c == value)
    }

    pub fn depth(&self) -> usize {
        match self {
            Node::Num(_) | Node::Var(_) | Node::Param(_) => 1,
            Node::Neg(a) | Node::Pow(a, _) | Node::Call(_, a) => 1 + a.depth(),
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => 1 + a.depth().max(b.depth()),
        }
    }

    /// Whether any `Param` leaf occurs in the tree.
    pub fn has_params(&self) -> bool {
        match self {
            Node::Param(_) => true,
            Node::Num(_) | Node::Var(_) => false,
            Node::Neg(a) | Node::Pow(a, _) | Node::Call(_, a) => a.has_params(),
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => a.has_params() || b.has_params(),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExprError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("exponent {0} is out of range")]
    Exponent(i32),
    #[error("{name} at byte {offset} is out of range: {limit} declared")]
    Dimension { offset: usize, name: String, limit: usize },
}

impl ExprError {
    pub fn offset(&self) -> usize {
        match self {
            ExprError::Parse(e) => e.offset,
            ExprError::Dimension { offset, .. } => *offset,
            ExprError::Exponent(_) => 0,
        }
    }
}

/// A parsed expression together with its declared variable and parameter
/// counts.
#[derive(Debug, Clone, PartialEq)]
pub struct Expression {
    n: usize,
    k: usize,
    root: Node,
}

impl Expression {
    pub fn parse(text: &str, n: usize, k: usize) -> Result<Self, ExprError> {
        let root = parse::parse(text, n, k)?;
        Ok(Self { n, k, root })
    }

    /// Wraps a node; fails if it references indices beyond `n` or `k`.
    pub fn from_node(root: Node, n: usize, k: usize) -> Result<Self, ExprError> {
        fn check(node: &Node, n: usize, k: usize) -> Result<(), ExprError> {
            match node {
                Node::Var(i) if *i >= n => Err(ExprError::Dimension {
                    offset: 0,
                    name: format!("x{}", i + 1),
                    limit: n,
                }),
                Node::Param(i) if *i >= k => Err(ExprError::Dimension {
                    offset: 0,
                    name: format!("p{}", i + 1),
                    limit: k,
                }),
                Node::Pow(_, e) if e.unsigned_abs() > MAX_EXPONENT.unsigned_abs() => Err(ExprError::Exponent(*e)),
                Node::Num(_) | Node::Var(_) | Node::Param(_) => Ok(()),
                Node::Neg(a) | Node::Pow(a, _) | Node::Call(_, a) => check(a, n, k),
                Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
                    check(a, n, k)?;
                    check(b, n, k)
                }
            }
        }
        check(&root, n, k)?;
        Ok(Self { n, k, root })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn param_dim(&self) -> usize {
        self.k
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn eval(&self, env: &Env<'_>) -> Result<f64, EvalError> {
        if env.x.len() != self.n || env.p.len() != self.k {
            return Err(EvalError::Dimension {
                expected: (self.n, self.k),
                found: (env.x.len(), env.p.len()),
            });
        }
        eval::eval(&self.root, env)
    }

    /// Shorthand for `eval(&Env { x, p })`.
    pub fn eval_at(&self, x: &[f64], p: &[f64]) -> Result<f64, EvalError> {
        self.eval(&Env { x, p })
    }

    /// Symbolic partial derivative with respect to the zero-based variable
    /// `var`. Indices past the declared dimension give the zero expression.
    pub fn differentiate(&self, var: usize) -> Expression {
        Expression {
            n: self.n,
            k: self.k,
            root: diff::derivative(&self.root, var),
        }
    }

    /// Replaces every parameter by its value and folds constants. The result
    /// declares zero parameters.
    pub fn substitute_params(&self, p: &[f64]) -> Expression {
        Expression {
            n: self.n,
            k: 0,
            root: diff::substitute(&self.root, p),
        }
    }

    pub fn has_params(&self) -> bool {
        self.root.has_params()
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        print::write_node(f, &self.root)
    }
}

#[cfg(test)]
mod tests;
