//! Frontend for the Gaussian probabilistic language.
//!
//! Programs are Python-like: one statement per line (or `;`-separated),
//! `#` comments, indented `for i in range(k):` blocks and a final
//! `return X, Y`. Two distribution forms are available,
//! `Normal(mean, variance)` and `Normal(a * Y + b, variance)`; random
//! variables are combined with `Y op e` and `Y + Z` and observed with
//! `condition(Y, e)`. The second parameter of `Normal` is the variance.
//!
//! ```
//! let program = gaussi::lang::parse(
//!     "X = Normal(15, 2)\nY = Normal(2, 1)\nZ = X + Y\ncondition(Z, 1)\nreturn X, Y",
//! )
//! .unwrap();
//! assert!(gaussi::lang::validate(&program).is_empty());
//! ```

mod ast;
mod lexer;
mod parser;
mod pretty;
pub mod unroll;
mod validate;

use std::fmt;

use thiserror::Error;

pub use ast::{element_name, loop_count, DistSpec, EvalError, Expr, Program, RvRef, Span, Stmt, StmtKind};
pub use parser::parse;
pub use validate::validate;

/// Lexical or syntax error with its position.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{span}: {message}")]
pub struct ParseError {
    pub span: Span,
    pub message: String,
}

impl ParseError {
    pub fn new(span: Span, message: impl Into<String>) -> Self {
        Self {
            span,
            message: message.into(),
        }
    }
}

/// A well-formedness problem found by [`validate`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub span: Span,
    pub message: String,
}

impl Diagnostic {
    pub fn new(span: Span, message: impl Into<String>) -> Self {
        Self {
            span,
            message: message.into(),
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.span, self.message)
    }
}
