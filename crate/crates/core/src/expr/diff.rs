//! Symbolic differentiation and constant folding.
//!
//! The smart constructors below fold constant operands and drop neutral
//! elements (`0 + e`, `1 * e`, `e ^ 1`, ...). No other rewriting happens,
//! so output is deterministic and structurally predictable.

use super::eval::{apply, divide, power};
use super::{Func, Node};

fn num(c: f64) -> Node {
    Node::Num(c)
}

fn boxed(n: Node) -> Box<Node> {
    Box::new(n)
}

fn fold(v: Result<f64, super::EvalError>) -> Option<Node> {
    v.ok().map(Node::Num)
}

pub(super) fn neg(a: Node) -> Node {
    match a {
        Node::Num(c) => num(-c),
        a => Node::Neg(boxed(a)),
    }
}

pub(super) fn add(a: Node, b: Node) -> Node {
    match (&a, &b) {
        (Node::Num(x), Node::Num(y)) if (x + y).is_finite() => num(x + y),
        _ if a.is_num(0.0) => b,
        _ if b.is_num(0.0) => a,
        _ => Node::Add(boxed(a), boxed(b)),
    }
}

pub(super) fn sub(a: Node, b: Node) -> Node {
    match (&a, &b) {
        (Node::Num(x), Node::Num(y)) if (x - y).is_finite() => num(x - y),
        _ if b.is_num(0.0) => a,
        _ if a.is_num(0.0) => neg(b),
        _ => Node::Sub(boxed(a), boxed(b)),
    }
}

pub(super) fn mul(a: Node, b: Node) -> Node {
    if a.is_num(0.0) || b.is_num(0.0) {
        return num(0.0);
    }
    if a.is_num(1.0) {
        return b;
    }
    if b.is_num(1.0) {
        return a;
    }
    match (a, b) {
        (Node::Num(x), Node::Num(y)) if (x * y).is_finite() => num(x * y),
        // c * (c' * e) -> (c c') * e
        (Node::Num(x), Node::Mul(l, r)) if matches!(*l, Node::Num(y) if (x * y).is_finite()) => {
            let y = l.as_num().unwrap_or(1.0);
            mul(num(x * y), *r)
        }
        (a, Node::Num(y)) => Node::Mul(boxed(num(y)), boxed(a)),
        (a, b) => Node::Mul(boxed(a), boxed(b)),
    }
}

pub(super) fn div(a: Node, b: Node) -> Node {
    if a.is_num(0.0) && !b.is_num(0.0) {
        return num(0.0);
    }
    if b.is_num(1.0) {
        return a;
    }
    if let (Node::Num(x), Node::Num(y)) = (&a, &b) {
        if let Some(n) = fold(divide(*x, *y)) {
            return n;
        }
    }
    Node::Div(boxed(a), boxed(b))
}

pub(super) fn pow(a: Node, e: i32) -> Node {
    match e {
        0 => return num(1.0),
        1 => return a,
        _ => {}
    }
    if let Node::Num(c) = a {
        if let Some(n) = fold(power(c, e)) {
            return n;
        }
    }
    Node::Pow(boxed(a), e)
}

pub(super) fn call(f: Func, a: Node) -> Node {
    if let Node::Num(c) = a {
        if let Some(n) = fold(apply(f, c)) {
            return n;
        }
    }
    Node::Call(f, boxed(a))
}

pub(super) fn derivative(node: &Node, var: usize) -> Node {
    match node {
        Node::Num(_) | Node::Param(_) => num(0.0),
        Node::Var(i) => num(if *i == var { 1.0 } else { 0.0 }),
        Node::Neg(a) => neg(derivative(a, var)),
        Node::Add(a, b) => add(derivative(a, var), derivative(b, var)),
        Node::Sub(a, b) => sub(derivative(a, var), derivative(b, var)),
        Node::Mul(a, b) => add(
            mul(derivative(a, var), (**b).clone()),
            mul((**a).clone(), derivative(b, var)),
        ),
        Node::Div(a, b) => {
            let da = derivative(a, var);
            let db = derivative(b, var);
            if db.is_num(0.0) {
                return div(da, (**b).clone());
            }
            div(
                sub(mul(da, (**b).clone()), mul((**a).clone(), db)),
                pow((**b).clone(), 2),
            )
        }
        Node::Pow(a, e) => {
            let da = derivative(a, var);
            if da.is_num(0.0) {
                return num(0.0);
            }
            mul(mul(num(f64::from(*e)), pow((**a).clone(), e - 1)), da)
        }
        Node::Call(f, a) => {
            let da = derivative(a, var);
            if da.is_num(0.0) {
                return num(0.0);
            }
            let u = (**a).clone();
            match f {
                Func::Sin => mul(call(Func::Cos, u), da),
                Func::Cos => neg(mul(call(Func::Sin, u), da)),
                Func::Exp => mul(call(Func::Exp, u), da),
                Func::Log => div(da, u),
                Func::Sqrt => div(da, mul(num(2.0), call(Func::Sqrt, u))),
            }
        }
    }
}

pub(super) fn substitute(node: &Node, p: &[f64]) -> Node {
    match node {
        Node::Param(i) => num(p[*i]),
        Node::Num(_) | Node::Var(_) => node.clone(),
        Node::Neg(a) => neg(substitute(a, p)),
        Node::Add(a, b) => add(substitute(a, p), substitute(b, p)),
        Node::Sub(a, b) => sub(substitute(a, p), substitute(b, p)),
        Node::Mul(a, b) => mul(substitute(a, p), substitute(b, p)),
        Node::Div(a, b) => div(substitute(a, p), substitute(b, p)),
        Node::Pow(a, e) => pow(substitute(a, p), *e),
        Node::Call(f, a) => call(*f, substitute(a, p)),
    }
}
