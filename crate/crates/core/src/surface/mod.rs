//! Text syntax for terms and signature files.
//!
//! Signature files are line oriented; `#` starts a comment. Declarations:
//!
//! ```text
//! sort NAME
//! coerce SUB -> SUP
//! binding SORT
//! op NAME : (SORT[CTX], ...) -> SORT [program | value N+ N- d-=(D, ...)]
//! label NAME : SORT@CTX -> SORT@CTX
//! define NAME : SORT = TERM
//! rule NAME: HEAD [with PREMISE, ...] gives LABEL TERM
//! schematic-rule NAME: _ [with PREMISE, ...] gives LABEL TERM
//! howe-rule NAME: HEAD [with PREMISE, ...] gives LABEL TERM
//! ```
//!
//! A premise is `TERM =LABEL=> PATTERN`. `CTX` is `m v + n p`, `0`, or a bare
//! number in single-sorted signatures. Terms:
//!
//! ```text
//! TERM := NAME                      bound variable, define, or nullary op
//!       | var N | var@SORT N        free variable (level N)
//!       | OP[@SORT](ARG, ...)       ARG := [x y .] TERM
//!       | ?k | ?k(TERM, ...)        metavariable (bare: identity arguments)
//!       | _                         schematic head
//! ```
//!
//! Operator annotations are inferred from the expected sort; a term of a
//! subsort in a supersort position is coerced implicitly.

mod parse;
mod print;

use thiserror::Error;

pub use parse::{parse_context, parse_signature, parse_term, parse_term_in};
pub use print::Printer;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{column}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}
