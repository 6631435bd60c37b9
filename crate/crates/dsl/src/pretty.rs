//! Canonical source text. Binary operations are fully parenthesized so that
//! re-parsing reproduces the tree exactly.

use std::fmt::Write;

use crate::ast::*;

pub fn file_to_string(file: &SourceFile) -> String {
    let mut out = String::new();
    for (i, f) in file.functions.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.push_str(&fn_to_string(f));
    }
    out
}

pub fn fn_to_string(f: &FnDef) -> String {
    let params: Vec<&str> = f.params.iter().map(|p| p.name.as_str()).collect();
    let mut out = format!("fn {}({}) {{\n", f.name.name, params.join(", "));
    for l in &f.lets {
        let _ = writeln!(out, "    let {} = {};", l.name.name, expr_to_string(&l.value));
    }
    let _ = writeln!(out, "    {}\n}}", expr_to_string(&f.body));
    out
}

pub fn expr_to_string(e: &Expr) -> String {
    let mut s = String::new();
    write_expr(&mut s, e);
    s
}

fn write_list(out: &mut String, items: &[Expr]) {
    for (i, a) in items.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        write_expr(out, a);
    }
}

fn write_expr(out: &mut String, e: &Expr) {
    match &e.kind {
        ExprKind::Num(v) => {
            let _ = write!(out, "{v:?}");
        }
        ExprKind::Var(v) => out.push_str(v),
        ExprKind::Neg(a) => {
            out.push('-');
            write_expr(out, a);
        }
        ExprKind::Binary(op, a, b) => {
            out.push('(');
            write_expr(out, a);
            let _ = write!(out, " {} ", op.symbol());
            write_expr(out, b);
            out.push(')');
        }
        ExprKind::Call(f, args) => {
            out.push_str(&f.name);
            out.push('(');
            write_list(out, args);
            out.push(')');
        }
        ExprKind::List(items) => {
            out.push('[');
            write_list(out, items);
            out.push(']');
        }
        ExprKind::Select(arms) => {
            out.push_str("select { ");
            for (i, arm) in arms.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                match &arm.guard {
                    Some(g) => write_guard(out, g),
                    None => out.push_str("else"),
                }
                out.push_str(" => ");
                write_expr(out, &arm.value);
            }
            out.push_str(" }");
        }
    }
}

fn write_guard(out: &mut String, g: &Guard) {
    match g {
        Guard::Cmp(op, a, b) => {
            write_expr(out, a);
            let _ = write!(out, " {} ", op.symbol());
            write_expr(out, b);
        }
        Guard::And(parts) | Guard::Or(parts) => {
            let sep = if matches!(g, Guard::And(_)) { " && " } else { " || " };
            for (i, p) in parts.iter().enumerate() {
                if i > 0 {
                    out.push_str(sep);
                }
                write_grouped(out, p);
            }
        }
        Guard::Not(inner) => {
            out.push('!');
            write_grouped(out, inner);
        }
    }
}

fn write_grouped(out: &mut String, g: &Guard) {
    if matches!(g, Guard::And(_) | Guard::Or(_)) {
        out.push('(');
        write_guard(out, g);
        out.push(')');
    } else {
        write_guard(out, g);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse;

    #[test]
    fn reparse_is_identical() {
        let src = "fn f(a, b) { let c = -a * (b - 1.5e-3); select { (a > 0 && b < 0) || !(c == 2) => exp(c), a != b => max(a, b), else => affine([1, -2], 0.5, a, b) } }";
        let ast = parse(src).unwrap();
        let text = file_to_string(&ast);
        assert_eq!(parse(&text).unwrap(), ast);
        assert_eq!(file_to_string(&parse(&text).unwrap()), text);
    }
}
