use thiserror::Error;

use crate::bayesnet::Violation;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid Bayes net: {}", format_violations(.0))]
    InvalidNet(Vec<Violation>),

    #[error("graph contains a cycle: {}", format_cycle(.0))]
    Cycle(Vec<usize>),

    #[error("n = {n} exceeds the {what} cap of {cap}")]
    CapExceeded { what: &'static str, n: usize, cap: usize },

    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("hypothesis has zero mass at assignment {0} inside the restricted support")]
    ZeroMassInSupport(u64),

    #[error(
        "degenerate mask: node {node}, parent configuration {config} is reachable but both child values are excluded"
    )]
    DegenerateMask { node: usize, config: usize },

    #[error("models are defined on different graphs")]
    GraphMismatch,

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

fn format_violations(v: &[Violation]) -> String {
    v.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ")
}

fn format_cycle(c: &[usize]) -> String {
    let mut s = c.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(" -> ");
    if let Some(first) = c.first() {
        s.push_str(&format!(" -> {first}"));
    }
    s
}
