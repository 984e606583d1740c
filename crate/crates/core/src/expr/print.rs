use std::fmt::{self, Write};

use super::Node;

// Binding strength of the printed form of a node.
const SUM: u8 = 1;
const PRODUCT: u8 = 2;
const PREFIX: u8 = 3;
const POWER: u8 = 4;
const ATOM: u8 = 5;

fn strength(node: &Node) -> u8 {
    match node {
        Node::Num(c) if c.is_sign_negative() => PREFIX,
        Node::Num(_) | Node::Var(_) | Node::Param(_) | Node::Call(..) => ATOM,
        Node::Neg(_) => PREFIX,
        Node::Add(..) | Node::Sub(..) => SUM,
        Node::Mul(..) | Node::Div(..) => PRODUCT,
        Node::Pow(..) => POWER,
    }
}

fn child(f: &mut fmt::Formatter<'_>, node: &Node, parens: bool) -> fmt::Result {
    if parens {
        f.write_char('(')?;
        write_node(f, node)?;
        f.write_char(')')
    } else {
        write_node(f, node)
    }
}

fn binary(f: &mut fmt::Formatter<'_>, a: &Node, op: &str, b: &Node, level: u8) -> fmt::Result {
    // Left-associative: the right operand needs parentheses at equal strength.
    child(f, a, strength(a) < level)?;
    f.write_str(op)?;
    child(f, b, strength(b) <= level)
}

/// Writes `node` with the fewest parentheses that parse back to the same tree.
pub(super) fn write_node(f: &mut fmt::Formatter<'_>, node: &Node) -> fmt::Result {
    match node {
        Node::Num(c) => write!(f, "{c}"),
        Node::Var(i) => write!(f, "x{}", i + 1),
        Node::Param(i) => write!(f, "p{}", i + 1),
        Node::Neg(a) => {
            f.write_char('-')?;
            child(f, a, strength(a) < PREFIX)
        }
        Node::Add(a, b) => binary(f, a, " + ", b, SUM),
        Node::Sub(a, b) => binary(f, a, " - ", b, SUM),
        Node::Mul(a, b) => binary(f, a, "*", b, PRODUCT),
        Node::Div(a, b) => binary(f, a, "/", b, PRODUCT),
        Node::Pow(a, e) => {
            child(f, a, strength(a) < ATOM)?;
            write!(f, "^{e}")
        }
        Node::Call(func, a) => {
            write!(f, "{}(", func.name())?;
            write_node(f, a)?;
            f.write_char(')')
        }
    }
}
