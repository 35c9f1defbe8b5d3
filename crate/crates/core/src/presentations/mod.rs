//! Finitely presented graded-commutative algebras over Q.
//!
//! A generator carries a cohomological degree and a form-weight; its parity is
//! the degree mod 2. Odd generators anticommute and square to zero, even
//! generators are polynomial. Relations may only involve even generators and
//! are kept as a reduced Gröbner basis under graded-lex order, so every element
//! has a unique normal form.
//!
//! Besides the two declared gradings every monomial has a poly-weight: the
//! number of generator occurrences. All truncations in this crate are in
//! poly-weight.

mod algebra;
mod groebner;
mod parser;

pub use algebra::{Element, GCAlgebra, Generator, Monomial};
pub use groebner::{buchberger, is_groebner, reduce, DEFAULT_BASIS_CAP};
pub use parser::{
    parse_algebra, parse_document, parse_expr, parse_expr_free, parse_expr_in, ConnectionDecl,
    Document, Expr,
};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PresentationError {
    #[error("parse error at {line}:{column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("relation `{relation}` is not homogeneous in (degree, weight)")]
    Grading { relation: String },
    #[error("odd generator `{generator}` is raised to a power; odd generators square to zero")]
    Sign { generator: String },
    #[error("unknown generator `{0}`")]
    UnknownGenerator(String),
    #[error("generator `{0}` declared twice")]
    DuplicateGenerator(String),
    #[error("relation `{0}` involves an odd generator; only even relations are supported")]
    OddRelation(String),
    #[error("Gröbner basis exceeded {cap} elements")]
    NonterminationGuard { cap: usize },
    #[error("component of bidegree ({degree}, {weight}) is infinite-dimensional")]
    InfiniteBasis { degree: i32, weight: i32 },
    #[error("basis of {size} elements exceeds the limit of {limit}")]
    BasisTooLarge { size: usize, limit: usize },
}
