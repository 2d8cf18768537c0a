//! Error types shared across the toolkit.

use std::fmt;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Pos {
    pub line: u32,
    pub col: u32,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("parse error at {pos}: {msg}")]
    Parse { pos: Pos, msg: String },

    #[error("type error{}: {msg}", fmt_pos(.pos))]
    Type { pos: Option<Pos>, msg: String },

    #[error("desugar error: {0}")]
    Desugar(String),

    #[error("rewrite error: {0}")]
    Rewrite(String),

    #[error("proof error in step '{step}': {msg}")]
    Proof { step: String, msg: String },

    #[error("arithmetic oracle: {0}")]
    Oracle(String),

    #[error("{0}")]
    Other(String),
}

fn fmt_pos(p: &Option<Pos>) -> String {
    match p {
        Some(p) => format!(" at {p}"),
        None => String::new(),
    }
}

impl CoreError {
    pub fn parse(pos: Pos, msg: impl Into<String>) -> CoreError {
        CoreError::Parse {
            pos,
            msg: msg.into(),
        }
    }
    pub fn ty(msg: impl Into<String>) -> CoreError {
        CoreError::Type {
            pos: None,
            msg: msg.into(),
        }
    }
    pub fn proof(step: impl Into<String>, msg: impl Into<String>) -> CoreError {
        CoreError::Proof {
            step: step.into(),
            msg: msg.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, CoreError>;
