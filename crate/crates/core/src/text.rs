//! Canonical S-expression text form for expressions, guards and selections.
//!
//! ```text
//! expr  := NUMBER | x<i> | (affine (c_0 ... c_{p-1}) b)
//!        | (+ expr expr) | (- expr expr) | (* expr expr) | (/ expr expr)
//!        | (exp expr) | (log expr)
//! guard := true | (< expr 0) | (<= expr 0) | (== expr 0) | (>= expr 0) | (> expr 0)
//!        | (and guard...) | (or guard...)
//! sel   := (select (case guard expr...)...)
//! ```
//!
//! Numbers are printed in Rust's shortest round-trip form, so printing and
//! re-parsing reproduces every literal bit for bit. The arity is not part of
//! the text; callers supply it when parsing.

use crate::error::{Error, Result};
use crate::expr::{ElementaryExpr, Node, NodeId};
use crate::scalar::Scalar;
use crate::selection::{Case, Cmp, IndexPredicate, SelectionFunction, SelectionMap};

pub fn expr_to_text<S: Scalar>(e: &ElementaryExpr<S>) -> String {
    let mut out = String::new();
    write_node(e.nodes(), e.root(), &mut out);
    out
}

fn write_node<S: Scalar>(nodes: &[Node<S>], i: NodeId, out: &mut String) {
    let bin = |op: &str, a: NodeId, b: NodeId, out: &mut String| {
        out.push('(');
        out.push_str(op);
        out.push(' ');
        write_node(nodes, a, out);
        out.push(' ');
        write_node(nodes, b, out);
        out.push(')');
    };
    match &nodes[i] {
        Node::Const(c) => out.push_str(&c.to_text()),
        Node::Var(j) => {
            out.push('x');
            out.push_str(&j.to_string());
        }
        Node::Affine { coeffs, offset } => {
            out.push_str("(affine (");
            let cs: Vec<String> = coeffs.iter().map(|c| c.to_text()).collect();
            out.push_str(&cs.join(" "));
            out.push_str(") ");
            out.push_str(&offset.to_text());
            out.push(')');
        }
        Node::Add(a, b) => bin("+", *a, *b, out),
        Node::Sub(a, b) => bin("-", *a, *b, out),
        Node::Mul(a, b) => bin("*", *a, *b, out),
        Node::Div(a, b) => bin("/", *a, *b, out),
        Node::Exp(a) => {
            out.push_str("(exp ");
            write_node(nodes, *a, out);
            out.push(')');
        }
        Node::Log(a) => {
            out.push_str("(log ");
            write_node(nodes, *a, out);
            out.push(')');
        }
    }
}

pub fn predicate_to_text<S: Scalar>(p: &IndexPredicate<S>) -> String {
    match p {
        IndexPredicate::True => "true".into(),
        IndexPredicate::Atom { expr, cmp } => format!("({} {} 0)", cmp.symbol(), expr_to_text(expr)),
        IndexPredicate::All(ps) | IndexPredicate::Any(ps) => {
            let kw = if matches!(p, IndexPredicate::All(_)) { "and" } else { "or" };
            let inner: Vec<String> = ps.iter().map(predicate_to_text).collect();
            if inner.is_empty() {
                format!("({kw})")
            } else {
                format!("({kw} {})", inner.join(" "))
            }
        }
    }
}

pub fn selection_to_text<S: Scalar>(m: &SelectionMap<S>) -> String {
    let mut out = String::from("(select");
    for c in m.cases() {
        out.push_str(" (case ");
        out.push_str(&predicate_to_text(&c.guard));
        for v in &c.values {
            out.push(' ');
            out.push_str(&expr_to_text(v));
        }
        out.push(')');
    }
    out.push(')');
    out
}

#[derive(Debug, Clone, PartialEq)]
enum Sx {
    Atom(String),
    List(Vec<Sx>),
}

fn read_sx(src: &str) -> Result<Sx> {
    let mut tokens = Vec::new();
    let mut cur = String::new();
    for ch in src.chars() {
        match ch {
            '(' | ')' => {
                if !cur.is_empty() {
                    tokens.push(std::mem::take(&mut cur));
                }
                tokens.push(ch.to_string());
            }
            c if c.is_whitespace() => {
                if !cur.is_empty() {
                    tokens.push(std::mem::take(&mut cur));
                }
            }
            c => cur.push(c),
        }
    }
    if !cur.is_empty() {
        tokens.push(cur);
    }
    let mut pos = 0;
    let sx = parse_sx(&tokens, &mut pos)?;
    if pos != tokens.len() {
        return Err(Error::Parse(format!("trailing input after token {pos}")));
    }
    Ok(sx)
}

fn parse_sx(tokens: &[String], pos: &mut usize) -> Result<Sx> {
    let tok = tokens
        .get(*pos)
        .ok_or_else(|| Error::Parse("unexpected end of input".into()))?;
    *pos += 1;
    match tok.as_str() {
        "(" => {
            let mut items = Vec::new();
            loop {
                match tokens.get(*pos).map(String::as_str) {
                    Some(")") => {
                        *pos += 1;
                        return Ok(Sx::List(items));
                    }
                    Some(_) => items.push(parse_sx(tokens, pos)?),
                    None => return Err(Error::Parse("unbalanced parenthesis".into())),
                }
            }
        }
        ")" => Err(Error::Parse("unexpected ')'".into())),
        a => Ok(Sx::Atom(a.to_string())),
    }
}

fn number<S: Scalar>(s: &str) -> Result<S> {
    s.parse::<S>().map_err(|_| Error::Parse(format!("bad number `{s}`")))
}

fn sx_to_expr<S: Scalar>(sx: &Sx, arity: usize) -> Result<ElementaryExpr<S>> {
    match sx {
        Sx::Atom(a) => {
            if let Some(idx) = a.strip_prefix('x') {
                let i: usize = idx.parse().map_err(|_| Error::Parse(format!("bad variable `{a}`")))?;
                if i >= arity {
                    return Err(Error::Parse(format!("variable {a} exceeds arity {arity}")));
                }
                Ok(ElementaryExpr::var(arity, i))
            } else {
                Ok(ElementaryExpr::constant(arity, number(a)?))
            }
        }
        Sx::List(items) => {
            let head = match items.first() {
                Some(Sx::Atom(h)) => h.as_str(),
                _ => return Err(Error::Parse("expression list needs an operator".into())),
            };
            let args = &items[1..];
            let need = |n: usize| {
                if args.len() == n {
                    Ok(())
                } else {
                    Err(Error::Parse(format!("`{head}` takes {n} arguments, got {}", args.len())))
                }
            };
            match head {
                "affine" => {
                    need(2)?;
                    let coeffs = match &args[0] {
                        Sx::List(cs) => cs
                            .iter()
                            .map(|c| match c {
                                Sx::Atom(a) => number::<S>(a),
                                _ => Err(Error::Parse("affine coefficient must be a number".into())),
                            })
                            .collect::<Result<Vec<S>>>()?,
                        _ => return Err(Error::Parse("affine coefficients must be a list".into())),
                    };
                    if coeffs.len() != arity {
                        return Err(Error::Parse(format!(
                            "affine has {} coefficients, arity is {arity}",
                            coeffs.len()
                        )));
                    }
                    let offset = match &args[1] {
                        Sx::Atom(a) => number::<S>(a)?,
                        _ => return Err(Error::Parse("affine offset must be a number".into())),
                    };
                    Ok(ElementaryExpr::affine(coeffs, offset))
                }
                "+" | "-" | "*" | "/" => {
                    need(2)?;
                    let a = sx_to_expr(&args[0], arity)?;
                    let b = sx_to_expr(&args[1], arity)?;
                    Ok(match head {
                        "+" => &a + &b,
                        "-" => &a - &b,
                        "*" => &a * &b,
                        _ => &a / &b,
                    })
                }
                "exp" | "log" => {
                    need(1)?;
                    let a = sx_to_expr(&args[0], arity)?;
                    Ok(if head == "exp" { a.exp() } else { a.ln() })
                }
                other => Err(Error::Parse(format!("unknown operator `{other}`"))),
            }
        }
    }
}

fn sx_to_pred<S: Scalar>(sx: &Sx, arity: usize) -> Result<IndexPredicate<S>> {
    match sx {
        Sx::Atom(a) if a == "true" => Ok(IndexPredicate::True),
        Sx::Atom(a) => Err(Error::Parse(format!("bad guard `{a}`"))),
        Sx::List(items) => {
            let head = match items.first() {
                Some(Sx::Atom(h)) => h.as_str(),
                _ => return Err(Error::Parse("guard list needs an operator".into())),
            };
            match head {
                "and" | "or" => {
                    let ps = items[1..]
                        .iter()
                        .map(|p| sx_to_pred(p, arity))
                        .collect::<Result<Vec<_>>>()?;
                    Ok(if head == "and" { IndexPredicate::All(ps) } else { IndexPredicate::Any(ps) })
                }
                op => {
                    let cmp = Cmp::from_symbol(op)
                        .ok_or_else(|| Error::Parse(format!("unknown comparison `{op}`")))?;
                    if items.len() != 3 || items[2] != Sx::Atom("0".into()) {
                        return Err(Error::Parse(format!("guard atom must read `({op} expr 0)`")));
                    }
                    Ok(IndexPredicate::atom(sx_to_expr(&items[1], arity)?, cmp))
                }
            }
        }
    }
}

pub fn parse_expr<S: Scalar>(src: &str, arity: usize) -> Result<ElementaryExpr<S>> {
    sx_to_expr(&read_sx(src)?, arity)
}

pub fn parse_predicate<S: Scalar>(src: &str, arity: usize) -> Result<IndexPredicate<S>> {
    sx_to_pred(&read_sx(src)?, arity)
}

pub fn parse_selection_map<S: Scalar>(src: &str, arity: usize) -> Result<SelectionMap<S>> {
    let sx = read_sx(src)?;
    let items = match &sx {
        Sx::List(items) if items.first() == Some(&Sx::Atom("select".into())) => &items[1..],
        _ => return Err(Error::Parse("selection must start with `(select`".into())),
    };
    let mut cases = Vec::with_capacity(items.len());
    for it in items {
        match it {
            Sx::List(parts) if parts.first() == Some(&Sx::Atom("case".into())) && parts.len() >= 3 => {
                let guard = sx_to_pred(&parts[1], arity)?;
                let values = parts[2..]
                    .iter()
                    .map(|v| sx_to_expr(v, arity))
                    .collect::<Result<Vec<_>>>()?;
                cases.push(Case { guard, values });
            }
            _ => return Err(Error::Parse("expected `(case guard expr...)`".into())),
        }
    }
    let outputs = cases.first().map_or(0, |c| c.values.len());
    SelectionMap::new(arity, outputs, cases)
}

pub fn parse_selection<S: Scalar>(src: &str, arity: usize) -> Result<SelectionFunction<S>> {
    SelectionFunction::from_map(parse_selection_map(src, arity)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::selection::prims;

    #[test]
    fn expr_text_roundtrip() {
        let src = "(+ (* x0 (exp x1)) (/ (affine (2.0 -0.5) 3.0) (log x0)))";
        let e: ElementaryExpr<f64> = parse_expr(src, 2).unwrap();
        assert_eq!(expr_to_text(&e), src);
        assert_eq!(e.eval(&[1.5, 0.25]).unwrap(), {
            let (a, b) = (1.5f64, 0.25f64);
            a * b.exp() + (2.0 * a - 0.5 * b + 3.0) / a.ln()
        });
    }

    #[test]
    fn literals_survive_roundtrip() {
        for v in [0.1f64, 1e-300, -2.5e17, 1.0 / 3.0] {
            let e = ElementaryExpr::constant(1, v);
            let back: ElementaryExpr<f64> = parse_expr(&expr_to_text(&e), 1).unwrap();
            assert_eq!(back.as_constant().unwrap().to_bits(), v.to_bits());
        }
    }

    #[test]
    fn selection_text_roundtrip() {
        let r = prims::relu::<f64>();
        let txt = r.to_string();
        assert_eq!(txt, "(select (case (<= x0 0) 0.0) (case true x0))");
        let back: SelectionFunction<f64> = parse_selection(&txt, 1).unwrap();
        assert_eq!(back, r);
        let z = prims::zero_representation::<f64>();
        let back: SelectionFunction<f64> = parse_selection(&z.to_string(), 1).unwrap();
        assert_eq!(back, z);
        let s = prims::sort2::<f64>();
        let back: SelectionMap<f64> = parse_selection_map(&selection_to_text(&s), 2).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn malformed_text_is_rejected() {
        assert!(parse_expr::<f64>("(+ x0)", 1).is_err());
        assert!(parse_expr::<f64>("(+ x0 x1", 2).is_err());
        assert!(parse_expr::<f64>("x3", 2).is_err());
        assert!(parse_predicate::<f64>("(<= x0 1)", 1).is_err());
        assert!(parse_selection::<f64>("(case true x0)", 1).is_err());
    }
}
