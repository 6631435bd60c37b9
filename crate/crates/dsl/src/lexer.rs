use crate::diag::{Diagnostic, Phase, Span};

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Ident(String),
    Num(f64),
    Fn,
    Let,
    Select,
    Else,
    LParen,
    RParen,
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Comma,
    Semi,
    Assign,
    Arrow,
    Plus,
    Minus,
    Star,
    Slash,
    Lt,
    Le,
    Gt,
    Ge,
    EqEq,
    Ne,
    AndAnd,
    OrOr,
    Bang,
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Num(v) => format!("number `{v}`"),
            Tok::Eof => "end of input".into(),
            other => format!("`{}`", other.text()),
        }
    }

    pub fn text(&self) -> &'static str {
        match self {
            Tok::Fn => "fn",
            Tok::Let => "let",
            Tok::Select => "select",
            Tok::Else => "else",
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::LBrace => "{",
            Tok::RBrace => "}",
            Tok::LBracket => "[",
            Tok::RBracket => "]",
            Tok::Comma => ",",
            Tok::Semi => ";",
            Tok::Assign => "=",
            Tok::Arrow => "=>",
            Tok::Plus => "+",
            Tok::Minus => "-",
            Tok::Star => "*",
            Tok::Slash => "/",
            Tok::Lt => "<",
            Tok::Le => "<=",
            Tok::Gt => ">",
            Tok::Ge => ">=",
            Tok::EqEq => "==",
            Tok::Ne => "!=",
            Tok::AndAnd => "&&",
            Tok::OrOr => "||",
            Tok::Bang => "!",
            Tok::Ident(_) | Tok::Num(_) | Tok::Eof => "",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Token {
    pub tok: Tok,
    pub span: Span,
}

/// Splits `src` into tokens ending with `Eof`. Unknown characters are
/// reported and skipped.
pub fn lex(src: &str) -> (Vec<Token>, Vec<Diagnostic>) {
    let bytes = src.as_bytes();
    let mut toks = Vec::new();
    let mut diags = Vec::new();
    let (mut i, mut line, mut line_start) = (0usize, 1usize, 0usize);
    let span_at = |start: usize, end: usize, line: usize, line_start: usize| Span {
        start,
        end,
        line,
        col: src[line_start..start].chars().count() + 1,
    };
    while i < bytes.len() {
        let c = bytes[i];
        if c == b'\n' {
            i += 1;
            line += 1;
            line_start = i;
            continue;
        }
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        if c == b'/' && bytes.get(i + 1) == Some(&b'/') {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        let start = i;
        if c.is_ascii_alphabetic() || c == b'_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            let word = &src[start..i];
            let tok = match word {
                "fn" => Tok::Fn,
                "let" => Tok::Let,
                "select" => Tok::Select,
                "else" => Tok::Else,
                _ => Tok::Ident(word.to_string()),
            };
            toks.push(Token { tok, span: span_at(start, i, line, line_start) });
            continue;
        }
        if c.is_ascii_digit() || (c == b'.' && bytes.get(i + 1).is_some_and(u8::is_ascii_digit)) {
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    i = j;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let span = span_at(start, i, line, line_start);
            match src[start..i].parse::<f64>() {
                Ok(v) if v.is_finite() => toks.push(Token { tok: Tok::Num(v), span }),
                _ => {
                    diags.push(Diagnostic::new(Phase::Lex, span, format!("malformed number `{}`", &src[start..i])));
                    toks.push(Token { tok: Tok::Num(0.0), span });
                }
            }
            continue;
        }
        let two = bytes.get(i + 1).copied();
        let (tok, len) = match (c, two) {
            (b'=', Some(b'>')) => (Some(Tok::Arrow), 2),
            (b'=', Some(b'=')) => (Some(Tok::EqEq), 2),
            (b'<', Some(b'=')) => (Some(Tok::Le), 2),
            (b'>', Some(b'=')) => (Some(Tok::Ge), 2),
            (b'!', Some(b'=')) => (Some(Tok::Ne), 2),
            (b'&', Some(b'&')) => (Some(Tok::AndAnd), 2),
            (b'|', Some(b'|')) => (Some(Tok::OrOr), 2),
            (b'=', _) => (Some(Tok::Assign), 1),
            (b'<', _) => (Some(Tok::Lt), 1),
            (b'>', _) => (Some(Tok::Gt), 1),
            (b'!', _) => (Some(Tok::Bang), 1),
            (b'(', _) => (Some(Tok::LParen), 1),
            (b')', _) => (Some(Tok::RParen), 1),
            (b'{', _) => (Some(Tok::LBrace), 1),
            (b'}', _) => (Some(Tok::RBrace), 1),
            (b'[', _) => (Some(Tok::LBracket), 1),
            (b']', _) => (Some(Tok::RBracket), 1),
            (b',', _) => (Some(Tok::Comma), 1),
            (b';', _) => (Some(Tok::Semi), 1),
            (b'+', _) => (Some(Tok::Plus), 1),
            (b'-', _) => (Some(Tok::Minus), 1),
            (b'*', _) => (Some(Tok::Star), 1),
            (b'/', _) => (Some(Tok::Slash), 1),
            _ => (None, src[i..].chars().next().map_or(1, char::len_utf8)),
        };
        let span = span_at(start, start + len, line, line_start);
        match tok {
            Some(tok) => toks.push(Token { tok, span }),
            None => diags.push(Diagnostic::new(
                Phase::Lex,
                span,
                format!("unexpected character `{}`", &src[start..start + len]),
            )),
        }
        i += len;
    }
    toks.push(Token { tok: Tok::Eof, span: span_at(bytes.len(), bytes.len(), line, line_start) });
    (toks, diags)
}
