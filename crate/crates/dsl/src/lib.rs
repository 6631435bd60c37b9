//! The `.sel` language: functions with `let` bindings, arithmetic, the
//! intrinsics `exp log affine relu abs max min`, and guarded `select`
//! expressions, compiled to straight-line programs.
//!
//! ```
//! let src = "fn relu(t) { select { t <= 0 => 0, else => t } }";
//! let art = seldiff_dsl::compile_source::<f64>(src, "relu").unwrap();
//! assert_eq!(art.program.node_count(), 2);
//! ```

pub mod ast;
pub mod compile;
pub mod diag;
pub mod lexer;
pub mod parser;
pub mod pretty;

pub use compile::{check_source, compile, compile_source, source_hash, CompileArtifact, Symbol};
pub use diag::{Diagnostic, Diagnostics, Phase, Span};
pub use parser::{parse, parse_expr};
pub use pretty::file_to_string;
