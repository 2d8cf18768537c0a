//! Core verification toolkit: syntax, typing, equational rewriting, the
//! assertion-logic proof checker, the unary/relational program logics and the
//! graded lifting layer.

pub mod ast;
pub mod conv;
pub mod desugar;
pub mod driver;
pub mod error;
pub mod field;
pub mod kernel;
pub mod lexer;
pub mod liftings;
pub mod logics;
pub mod oracle;
pub mod parser;
pub mod printer;
pub mod rewrite;
pub mod schema;
pub mod script;
pub mod subst;
pub mod typecheck;
pub mod types;

pub use error::{CoreError, Result};
