use std::fmt;

use serde::Serialize;

/// Source location. Spans never take part in structural comparisons, so
/// `==` on any AST node ignores where it came from.
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct Span {
    /// Byte offsets `[start, end)`.
    pub start: usize,
    pub end: usize,
    /// 1-based.
    pub line: usize,
    pub col: usize,
}

impl PartialEq for Span {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

impl Span {
    pub fn to(self, other: Span) -> Span {
        Span { start: self.start, end: other.end.max(self.end), line: self.line, col: self.col }
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Lex,
    Parse,
    Compile,
}

#[derive(Debug, Clone, Serialize)]
pub struct Diagnostic {
    pub phase: Phase,
    pub message: String,
    pub span: Span,
}

impl PartialEq for Diagnostic {
    fn eq(&self, other: &Self) -> bool {
        self.phase == other.phase
            && self.message == other.message
            && (self.span.start, self.span.end, self.span.line, self.span.col)
                == (other.span.start, other.span.end, other.span.line, other.span.col)
    }
}

impl Diagnostic {
    pub fn new(phase: Phase, span: Span, message: impl Into<String>) -> Self {
        Self { phase, message: message.into(), span }
    }

    /// `file:line:col: error: message` followed by the offending line and a caret.
    pub fn render(&self, name: &str, src: &str) -> String {
        let text = src.lines().nth(self.span.line.saturating_sub(1)).unwrap_or("");
        let width = (self.span.end.saturating_sub(self.span.start)).clamp(1, text.len().saturating_sub(self.span.col - 1).max(1));
        format!(
            "{name}:{}:{}: error: {}\n  {text}\n  {}{}",
            self.span.line,
            self.span.col,
            self.message,
            " ".repeat(self.span.col.saturating_sub(1)),
            "^".repeat(width)
        )
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: error: {}", self.span, self.message)
    }
}

/// A non-empty list of diagnostics.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("\n"))]
pub struct Diagnostics(pub Vec<Diagnostic>);
