//! Nonsmooth algorithmic differentiation over elementary selection functions.
//!
//! The crate models numerical programs as DAGs whose nodes are piecewise
//! log-exp functions (guarded branch lists), differentiates them in forward
//! and backward mode with all decision branches frozen, and provides the
//! tooling needed to reason about what those derivatives mean: the
//! representation-minimal set-valued field built from all active branches,
//! sampled Clarke subgradients, path-integral checks, and a minibatch SGD
//! harness that exhibits and avoids artificial critical points.
//!
//! All numerical code is generic over [`Scalar`] (implemented for `f32` and
//! `f64`); the aliases at the bottom of this file fix the scalar to `f64`,
//! which is what the command line tool and the experiments use.

pub mod autodiff;
pub mod error;
pub mod expr;
pub mod fixtures;
pub mod linalg;
pub mod minnorm;
pub mod optimize;
pub mod program;
pub mod quadrature;
pub mod scalar;
pub mod selection;
pub mod setfield;
pub mod text;
pub mod verify;

pub use error::{DomainFault, Error, FaultKind, Result};
pub use expr::{ElementaryExpr, NodeId};
pub use program::{EvalTrace, PredecessorRelation, Program, ProgramBuilder, Violation};
pub use scalar::Scalar;
pub use selection::{Cmp, IndexPredicate, SelectionFunction, SelectionMap};
pub use setfield::{CriticalityReport, Criticality, SetValuedGradient};

/// Elementary expression over `f64`.
pub type Expr = ElementaryExpr<f64>;
/// Scalar selection function over `f64`.
pub type Selection = SelectionFunction<f64>;
/// Vector-valued selection map over `f64`.
pub type Map = SelectionMap<f64>;
/// Program over `f64`.
pub type Prog = Program<f64>;
/// Evaluation trace over `f64`.
pub type Trace = EvalTrace<f64>;
/// Set-valued gradient over `f64`.
pub type Field = SetValuedGradient<f64>;
