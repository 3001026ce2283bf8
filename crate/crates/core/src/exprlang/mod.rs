//! Arithmetic expression language for user-supplied Lagrangians, forces and
//! connection coefficients.
//!
//! Precedence from tightest to loosest: `^` (right associative), unary `-`,
//! `* /`, `+ -`. Functions: `sin cos tan exp log sqrt abs pow`.
//!
//! ```
//! use geomech::exprlang::{evaluate, parse, Bindings};
//! let e = parse("v1^2/2 - q1^2/2").unwrap();
//! let env = Bindings::from([("q1".to_string(), 1.0), ("v1".to_string(), 0.0)]);
//! assert_eq!(evaluate(&e, &env).unwrap(), -0.5);
//! ```

mod ast;
mod eval;
mod lexer;
mod parser;

pub use ast::{BinOp, Expr, Func};
pub use eval::{evaluate, Bindings, Compiled};
pub use parser::{chart_index, parse, parse_with_names, Names};

#[cfg(test)]
mod tests;
