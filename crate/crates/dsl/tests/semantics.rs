//! Compiled programs against a direct interpreter of the syntax tree.

use std::fs;
use std::path::Path;

use seldiff_dsl::ast::*;
use seldiff_dsl::{check_source, parse};

fn eval(file: &SourceFile, e: &Expr, env: &[(String, f64)]) -> Option<f64> {
    let v = match &e.kind {
        ExprKind::Num(v) => *v,
        ExprKind::Var(n) => env.iter().rev().find(|(k, _)| k == n)?.1,
        ExprKind::Neg(a) => -eval(file, a, env)?,
        ExprKind::Binary(op, a, b) => {
            let (x, y) = (eval(file, a, env)?, eval(file, b, env)?);
            match op {
                BinOp::Add => x + y,
                BinOp::Sub => x - y,
                BinOp::Mul => x * y,
                BinOp::Div if y == 0.0 => return None,
                BinOp::Div => x / y,
            }
        }
        ExprKind::Call(f, args) => {
            if let Some(def) = file.function(&f.name) {
                let vals: Option<Vec<f64>> = args.iter().map(|a| eval(file, a, env)).collect();
                return call(file, def, &vals?);
            }
            if f.name == "affine" {
                let ExprKind::List(cs) = &args[0].kind else { return None };
                let mut acc = eval(file, &args[1], env)?;
                for (c, a) in cs.iter().zip(&args[2..]) {
                    acc += eval(file, c, env)? * eval(file, a, env)?;
                }
                return Some(acc);
            }
            let v: Option<Vec<f64>> = args.iter().map(|a| eval(file, a, env)).collect();
            let v = v?;
            match f.name.as_str() {
                "exp" => v[0].exp(),
                "log" if v[0] <= 0.0 => return None,
                "log" => v[0].ln(),
                "relu" => v[0].max(0.0),
                "abs" => v[0].abs(),
                "max" => v[0].max(v[1]),
                "min" => v[0].min(v[1]),
                _ => return None,
            }
        }
        ExprKind::List(_) => return None,
        ExprKind::Select(arms) => {
            for arm in arms {
                let hit = match &arm.guard {
                    None => true,
                    Some(g) => guard(file, g, env)?,
                };
                if hit {
                    return eval(file, &arm.value, env);
                }
            }
            return None;
        }
    };
    Some(v)
}

fn guard(file: &SourceFile, g: &Guard, env: &[(String, f64)]) -> Option<bool> {
    Some(match g {
        Guard::Cmp(op, a, b) => {
            let d = eval(file, a, env)? - eval(file, b, env)?;
            match op {
                CmpOp::Lt => d < 0.0,
                CmpOp::Le => d <= 0.0,
                CmpOp::Gt => d > 0.0,
                CmpOp::Ge => d >= 0.0,
                CmpOp::Eq => d == 0.0,
                CmpOp::Ne => d != 0.0,
            }
        }
        Guard::And(ps) => {
            for p in ps {
                if !guard(file, p, env)? {
                    return Some(false);
                }
            }
            true
        }
        Guard::Or(ps) => {
            for p in ps {
                if guard(file, p, env)? {
                    return Some(true);
                }
            }
            false
        }
        Guard::Not(p) => !guard(file, p, env)?,
    })
}

fn call(file: &SourceFile, def: &FnDef, args: &[f64]) -> Option<f64> {
    let mut env: Vec<(String, f64)> = def.params.iter().map(|p| p.name.clone()).zip(args.iter().copied()).collect();
    for l in &def.lets {
        let v = eval(file, &l.value, &env)?;
        env.push((l.name.name.clone(), v));
    }
    eval(file, &def.body, &env)
}

#[test]
fn compiled_programs_match_the_interpreter() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("corpus/valid");
    let grid = [-2.0, -1.0, -0.5, 0.0, 0.3, 1.0, 1.7];
    let mut checked = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let src = fs::read_to_string(entry.unwrap().path()).unwrap();
        let file = parse(&src).unwrap();
        for art in check_source(&src).unwrap() {
            let def = file.function(&art.function).unwrap();
            let p = def.params.len();
            for i in 0..grid.len().pow(p.min(3) as u32) {
                let x: Vec<f64> = (0..p).map(|k| grid[(i / grid.len().pow(k.min(2) as u32)) % grid.len()]).collect();
                let want = call(&file, def, &x);
                let got = art.program.call1(&x).ok();
                match (want, got) {
                    (Some(a), Some(b)) => assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()), "{} at {x:?}: {a} vs {b}", art.function),
                    (None, None) => {}
                    other => panic!("{} at {x:?}: {other:?}", art.function),
                }
                checked += 1;
            }
        }
    }
    assert!(checked > 500);
}
