//! Recursive-descent parser with recovery at `;`, `}` and `fn`.
//!
//! ```text
//! file   := fn*
//! fn     := "fn" IDENT "(" [IDENT ("," IDENT)*] ")" "{" ("let" IDENT "=" expr ";")* expr "}"
//! expr   := term (("+" | "-") term)*
//! term   := unary (("*" | "/") unary)*
//! unary  := "-" unary | atom
//! atom   := NUM | IDENT | IDENT "(" args ")" | "(" expr ")" | "[" args "]" | select
//! select := "select" "{" arm ("," arm)* [","] "}"
//! arm    := (guard | "else") "=>" expr
//! guard  := conj ("||" conj)*
//! conj   := neg ("&&" neg)*
//! neg    := "!" neg | "(" guard ")" | expr CMP expr
//! ```

use crate::ast::*;
use crate::diag::{Diagnostic, Phase, Span};
use crate::lexer::{lex, Tok, Token};

/// Parses a whole file, reporting every error found.
pub fn parse(src: &str) -> Result<SourceFile, Vec<Diagnostic>> {
    let (tokens, mut diags) = lex(src);
    let mut p = Parser { toks: tokens, pos: 0, diags: Vec::new() };
    let file = p.file();
    diags.append(&mut p.diags);
    if diags.is_empty() {
        Ok(file)
    } else {
        diags.sort_by_key(|d| d.span.start);
        diags.dedup();
        Err(diags)
    }
}

/// Parses a single expression.
pub fn parse_expr(src: &str) -> Result<Expr, Vec<Diagnostic>> {
    let (tokens, mut diags) = lex(src);
    let mut p = Parser { toks: tokens, pos: 0, diags: Vec::new() };
    let e = p.expr();
    if e.is_ok() && p.peek() != &Tok::Eof {
        let t = p.toks[p.pos].clone();
        p.error(t.span, format!("unexpected {} after expression", t.tok.describe()));
    }
    diags.append(&mut p.diags);
    match e {
        Ok(e) if diags.is_empty() => Ok(e),
        _ => Err(diags),
    }
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    diags: Vec<Diagnostic>,
}

/// Marker that a diagnostic was recorded and the caller should recover.
struct Failed;

type PResult<T> = Result<T, Failed>;

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)].tok
    }

    fn span(&self) -> Span {
        self.toks[self.pos].span
    }

    fn prev_span(&self) -> Span {
        self.toks[self.pos.saturating_sub(1)].span
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos < self.toks.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == t {
            self.bump();
            true
        } else {
            false
        }
    }

    fn error(&mut self, span: Span, msg: impl Into<String>) {
        self.diags.push(Diagnostic::new(Phase::Parse, span, msg));
    }

    fn expect(&mut self, t: Tok, context: &str) -> PResult<Span> {
        if self.peek() == &t {
            Ok(self.bump().span)
        } else {
            let found = self.toks[self.pos].clone();
            self.error(found.span, format!("expected `{}` {context}, found {}", t.text(), found.tok.describe()));
            Err(Failed)
        }
    }

    fn ident(&mut self, context: &str) -> PResult<Ident> {
        match self.peek().clone() {
            Tok::Ident(name) => {
                let span = self.bump().span;
                Ok(Ident { name, span })
            }
            other => {
                let span = self.span();
                self.error(span, format!("expected identifier {context}, found {}", other.describe()));
                Err(Failed)
            }
        }
    }

    fn file(&mut self) -> SourceFile {
        let mut functions = Vec::new();
        while self.peek() != &Tok::Eof {
            if self.peek() != &Tok::Fn {
                let t = self.toks[self.pos].clone();
                self.error(t.span, format!("expected `fn`, found {}", t.tok.describe()));
                self.bump();
                self.skip_to_fn();
                continue;
            }
            match self.function() {
                Ok(f) => functions.push(f),
                Err(Failed) => self.skip_to_fn(),
            }
        }
        SourceFile { functions }
    }

    fn skip_to_fn(&mut self) {
        while !matches!(self.peek(), Tok::Fn | Tok::Eof) {
            self.bump();
        }
    }

    /// Skips past the next `;` at the current brace depth, or stops before
    /// the `}` closing the current block.
    fn skip_statement(&mut self) {
        let mut depth = 0usize;
        loop {
            match self.peek() {
                Tok::Eof | Tok::Fn => return,
                Tok::Semi if depth == 0 => {
                    self.bump();
                    return;
                }
                Tok::RBrace if depth == 0 => return,
                Tok::LBrace | Tok::LParen | Tok::LBracket => depth += 1,
                Tok::RBrace | Tok::RParen | Tok::RBracket => depth = depth.saturating_sub(1),
                _ => {}
            }
            self.bump();
        }
    }

    fn function(&mut self) -> PResult<FnDef> {
        let start = self.expect(Tok::Fn, "")?;
        let name = self.ident("after `fn`")?;
        self.expect(Tok::LParen, "after the function name")?;
        let mut params = Vec::new();
        if self.peek() != &Tok::RParen {
            loop {
                params.push(self.ident("in the parameter list")?);
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
        }
        self.expect(Tok::RParen, "to close the parameter list")?;
        self.expect(Tok::LBrace, "to open the function body")?;
        let mut lets = Vec::new();
        let mut failed = false;
        while self.peek() == &Tok::Let {
            match self.let_binding() {
                Ok(l) => lets.push(l),
                Err(Failed) => {
                    failed = true;
                    self.skip_statement();
                }
            }
        }
        let body = match self.expr() {
            Ok(b) => b,
            Err(Failed) => {
                self.skip_statement();
                self.eat(&Tok::RBrace);
                return Err(Failed);
            }
        };
        if self.peek() == &Tok::Semi {
            let s = self.span();
            self.error(s, "the final expression of a function is not followed by `;`");
            return Err(Failed);
        }
        let end = self.expect(Tok::RBrace, "to close the function body")?;
        if failed {
            return Err(Failed);
        }
        Ok(FnDef { name, params, lets, body, span: start.to(end) })
    }

    fn let_binding(&mut self) -> PResult<Let> {
        self.expect(Tok::Let, "")?;
        let name = self.ident("after `let`")?;
        self.expect(Tok::Assign, "after the bound name")?;
        let value = self.expr()?;
        self.expect(Tok::Semi, "after the bound expression")?;
        Ok(Let { name, value })
    }

    fn expr(&mut self) -> PResult<Expr> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            let span = lhs.span.to(rhs.span);
            lhs = Expr { kind: ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)), span };
        }
    }

    fn term(&mut self) -> PResult<Expr> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            let span = lhs.span.to(rhs.span);
            lhs = Expr { kind: ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)), span };
        }
    }

    fn unary(&mut self) -> PResult<Expr> {
        if self.peek() == &Tok::Minus {
            let start = self.bump().span;
            let inner = self.unary()?;
            let span = start.to(inner.span);
            return Ok(Expr { kind: ExprKind::Neg(Box::new(inner)), span });
        }
        self.atom()
    }

    fn list(&mut self, close: Tok, what: &str) -> PResult<Vec<Expr>> {
        let mut items = Vec::new();
        if self.peek() != &close {
            loop {
                items.push(self.expr()?);
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
        }
        self.expect(close, &format!("to close the {what}"))?;
        Ok(items)
    }

    fn atom(&mut self) -> PResult<Expr> {
        let start = self.span();
        match self.peek().clone() {
            Tok::Num(v) => {
                self.bump();
                Ok(Expr { kind: ExprKind::Num(v), span: start })
            }
            Tok::Ident(name) => {
                self.bump();
                if self.eat(&Tok::LParen) {
                    let args = self.list(Tok::RParen, "argument list")?;
                    Ok(Expr {
                        kind: ExprKind::Call(Ident { name, span: start }, args),
                        span: start.to(self.prev_span()),
                    })
                } else {
                    Ok(Expr { kind: ExprKind::Var(name), span: start })
                }
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::RParen, "to close the parenthesis")?;
                Ok(e)
            }
            Tok::LBracket => {
                self.bump();
                let items = self.list(Tok::RBracket, "list")?;
                Ok(Expr { kind: ExprKind::List(items), span: start.to(self.prev_span()) })
            }
            Tok::Select => self.select(),
            other => {
                self.error(start, format!("expected an expression, found {}", other.describe()));
                Err(Failed)
            }
        }
    }

    fn select(&mut self) -> PResult<Expr> {
        let start = self.expect(Tok::Select, "")?;
        self.expect(Tok::LBrace, "after `select`")?;
        let mut arms = Vec::new();
        loop {
            if self.peek() == &Tok::RBrace {
                break;
            }
            let arm_start = self.span();
            let guard = if self.eat(&Tok::Else) { None } else { Some(self.guard()?) };
            self.expect(Tok::Arrow, "after the guard")?;
            let value = self.expr()?;
            arms.push(Arm { guard, value, span: arm_start.to(self.prev_span()) });
            if !self.eat(&Tok::Comma) {
                break;
            }
        }
        let end = self.expect(Tok::RBrace, "to close `select`")?;
        if arms.is_empty() {
            self.error(start, "`select` needs at least one arm");
            return Err(Failed);
        }
        Ok(Expr { kind: ExprKind::Select(arms), span: start.to(end) })
    }

    fn guard(&mut self) -> PResult<Guard> {
        let mut parts = vec![self.conj()?];
        while self.eat(&Tok::OrOr) {
            parts.push(self.conj()?);
        }
        Ok(if parts.len() == 1 { parts.pop().unwrap() } else { Guard::Or(parts) })
    }

    fn conj(&mut self) -> PResult<Guard> {
        let mut parts = vec![self.neg_guard()?];
        while self.eat(&Tok::AndAnd) {
            parts.push(self.neg_guard()?);
        }
        Ok(if parts.len() == 1 { parts.pop().unwrap() } else { Guard::And(parts) })
    }

    fn neg_guard(&mut self) -> PResult<Guard> {
        if self.eat(&Tok::Bang) {
            return Ok(Guard::Not(Box::new(self.neg_guard()?)));
        }
        if self.peek() == &Tok::LParen && self.paren_is_guard() {
            self.bump();
            let g = self.guard()?;
            self.expect(Tok::RParen, "to close the guard")?;
            return Ok(g);
        }
        let lhs = self.expr()?;
        let op = match self.peek() {
            Tok::Lt => CmpOp::Lt,
            Tok::Le => CmpOp::Le,
            Tok::Gt => CmpOp::Gt,
            Tok::Ge => CmpOp::Ge,
            Tok::EqEq => CmpOp::Eq,
            Tok::Ne => CmpOp::Ne,
            other => {
                let (span, d) = (self.span(), other.describe());
                self.error(span, format!("expected a comparison in the guard, found {d}"));
                return Err(Failed);
            }
        };
        self.bump();
        let rhs = self.expr()?;
        Ok(Guard::Cmp(op, lhs, rhs))
    }

    /// Whether the parenthesis at the cursor encloses a guard rather than an
    /// arithmetic operand: its contents hold a comparison or a logical
    /// operator at depth one.
    fn paren_is_guard(&self) -> bool {
        let mut depth = 0usize;
        let mut k = 0;
        loop {
            match self.peek_at(k) {
                Tok::LParen | Tok::LBracket | Tok::LBrace => depth += 1,
                Tok::RParen | Tok::RBracket | Tok::RBrace => {
                    depth -= 1;
                    if depth == 0 {
                        return false;
                    }
                }
                Tok::Lt | Tok::Le | Tok::Gt | Tok::Ge | Tok::EqEq | Tok::Ne | Tok::AndAnd | Tok::OrOr | Tok::Bang
                    if depth == 1 =>
                {
                    return true
                }
                Tok::Eof => return false,
                Tok::Arrow if depth == 1 => return false,
                _ => {}
            }
            k += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relu_definition() {
        let f = parse("fn relu(t){ select{ t <= 0 => 0, else => t } }").unwrap();
        assert_eq!(f.functions.len(), 1);
        match &f.functions[0].body.kind {
            ExprKind::Select(arms) => {
                assert_eq!(arms.len(), 2);
                assert!(arms[1].guard.is_none());
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn dangling_operator() {
        let d = parse("fn bad(t){ t + }").unwrap_err();
        assert_eq!(d.len(), 1);
        assert_eq!((d[0].span.line, d[0].span.col), (1, 16));
    }

    #[test]
    fn errors_in_several_functions_are_all_reported() {
        let src = "fn a(t) { t + }\nfn b(t) { let = 1; t }\nfn c(t) { t }\nfn d(t { t }";
        let d = parse(src).unwrap_err();
        let lines: Vec<usize> = d.iter().map(|d| d.span.line).collect();
        assert_eq!(lines, vec![1, 2, 4]);
    }

    #[test]
    fn precedence() {
        let e = parse_expr("1 + 2 * -x").unwrap();
        match e.kind {
            ExprKind::Binary(BinOp::Add, _, rhs) => {
                assert!(matches!(rhs.kind, ExprKind::Binary(BinOp::Mul, _, _)))
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn grouped_guards_and_arithmetic_parens() {
        let f = parse("fn f(a, b){ select{ (a - b) * 2 >= 0 && (a < 1 || !(b > 2)) => a, else => b } }").unwrap();
        let ExprKind::Select(arms) = &f.functions[0].body.kind else { panic!() };
        let Some(Guard::And(parts)) = &arms[0].guard else { panic!("{:?}", arms[0].guard) };
        assert!(matches!(parts[0], Guard::Cmp(CmpOp::Ge, _, _)));
        assert!(matches!(parts[1], Guard::Or(_)));
    }
}
