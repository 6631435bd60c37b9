use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::expr::NodeId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FaultKind {
    DivisionByZero,
    LogNonpositive,
}

impl fmt::Display for FaultKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FaultKind::DivisionByZero => "division-by-zero",
            FaultKind::LogNonpositive => "log-nonpositive",
        })
    }
}

/// An expression was evaluated outside its open domain.
///
/// `node` is the arena index of the offending `div` or `log` node inside the
/// expression; the input point is stored as `f64` so the fault does not carry
/// the scalar type around.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DomainFault {
    pub node: NodeId,
    pub kind: FaultKind,
    pub point: Vec<f64>,
}

impl fmt::Display for DomainFault {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at expression node {} (input {:?})", self.kind, self.node, self.point)
    }
}

impl std::error::Error for DomainFault {}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain fault: {0}")]
    Domain(DomainFault),
    #[error("domain fault in program node {node}: {fault}")]
    NodeDomain { node: usize, fault: DomainFault },
    #[error("no guard holds at {point:?} (selection is not total there)")]
    NotTotal { point: Vec<f64> },
    #[error("no guard holds in program node {node}")]
    NodeNotTotal { node: usize },
    #[error("branch refinement needs {count} branches, cap is {cap}")]
    BranchOverflow { count: usize, cap: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("invalid program: {0}")]
    InvalidProgram(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("{0}")]
    Invalid(String),
}

impl From<DomainFault> for Error {
    fn from(f: DomainFault) -> Self {
        Error::Domain(f)
    }
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension { expected, got })
    }
}
