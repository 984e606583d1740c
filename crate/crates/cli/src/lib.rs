//! Command-line front end: problem documents, command dispatch and JSON
//! reports.
//!
//! Exit codes: 0 solved or checked, 1 refused because the problem data are
//! not measurable, 2 no solution exists, 3 invalid input.

pub mod commands;
pub mod document;
pub mod report;

pub use commands::{execute, run_problem, Command, Overrides};
pub use document::{load_problem, parse_problem, DocumentError, Problem};
pub use report::{to_json, write_atomic, Report, Status};
