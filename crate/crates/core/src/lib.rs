//! Random optimization problems in sample paths over finite probability
//! spaces.
//!
//! A random function f(ω, x) is optimized separately for every scenario ω,
//! and the per-scenario minimizers are assembled into a selection ξ(ω).
//! The selection is a *random solution* only if it is measurable, which on a
//! finite space means constant on every atom of the σ-algebra. The solvers in
//! [`selection`] compute one answer per atom and broadcast it, so their output
//! is measurable by construction, after checking that the problem data are
//! measurable themselves.

pub mod expr;
pub mod linalg;
pub mod optimize;
pub mod probspace;
pub mod randfunc;
pub mod selection;

pub use expr::{Env, EvalError, ExprError, Expression};
pub use linalg::Matrix;
pub use optimize::{Definiteness, OptimizeError};
pub use probspace::{ProbSpace, RandomVariableRn, ScenarioId, Verdict, Witness};
pub use randfunc::{BoxSet, RandomFunction, RandomSet, SetDescription};
pub use selection::{Certificate, Selection, SelectionError};
