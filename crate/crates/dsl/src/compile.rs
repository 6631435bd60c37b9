//! Lowering of parsed sources to programs.
//!
//! Calls are inlined. Smooth arithmetic is accumulated into an elementary
//! expression over the nodes it reads and only becomes a node of its own
//! when a nonsmooth operation consumes it, when it grows large, or when it
//! is the function result. Every `select`, `relu`, `abs`, `max` and `min`
//! becomes one node holding an elementary selection.

use serde::Serialize;
use sha2::{Digest, Sha256};

use seldiff::selection::{Cmp, IndexPredicate, SelectionFunction};
use seldiff::{ElementaryExpr, Program, ProgramBuilder, Scalar};

use crate::ast::*;
use crate::diag::{Diagnostic, Phase, Span};
use crate::parser::parse;

/// Expressions longer than this are stored in a node of their own.
const INLINE_LIMIT: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Symbol {
    pub node: usize,
    pub span: Span,
    /// What created the node: a parameter name, an operation, or `output`.
    pub label: String,
}

#[derive(Debug, Clone)]
pub struct CompileArtifact<S> {
    pub function: String,
    pub params: Vec<String>,
    pub program: Program<S>,
    pub symbols: Vec<Symbol>,
    /// SHA-256 of the source text, hex encoded.
    pub source_hash: String,
}

pub fn source_hash(src: &str) -> String {
    hex::encode(Sha256::digest(src.as_bytes()))
}

/// Smooth value: `expr(x_{preds[0]}, x_{preds[1]}, ...)`.
#[derive(Debug, Clone)]
struct Lazy<S> {
    preds: Vec<usize>,
    expr: ElementaryExpr<S>,
}

impl<S: Scalar> Lazy<S> {
    fn constant(c: S) -> Self {
        Lazy { preds: Vec::new(), expr: ElementaryExpr::constant(0, c) }
    }

    fn node(id: usize) -> Self {
        Lazy { preds: vec![id], expr: ElementaryExpr::var(1, 0) }
    }

    fn as_constant(&self) -> Option<S> {
        if self.preds.is_empty() {
            self.expr.eval(&[]).ok()
        } else {
            None
        }
    }

    fn as_node(&self) -> Option<usize> {
        self.expr.as_var().map(|v| self.preds[v])
    }

    fn unary(&self, f: impl Fn(&ElementaryExpr<S>) -> ElementaryExpr<S>) -> Self {
        Lazy { preds: self.preds.clone(), expr: f(&self.expr) }
    }
}

/// Union of predecessor lists and each list's positions in it.
fn merge(lists: &[&[usize]]) -> (Vec<usize>, Vec<Vec<usize>>) {
    let mut all: Vec<usize> = lists.iter().flat_map(|l| l.iter().copied()).collect();
    all.sort_unstable();
    all.dedup();
    let maps = lists
        .iter()
        .map(|l| l.iter().map(|p| all.binary_search(p).expect("merged")).collect())
        .collect();
    (all, maps)
}

fn combine<S: Scalar>(a: &Lazy<S>, b: &Lazy<S>, f: impl Fn(&ElementaryExpr<S>, &ElementaryExpr<S>) -> ElementaryExpr<S>) -> Lazy<S> {
    let (preds, maps) = merge(&[&a.preds, &b.preds]);
    let n = preds.len();
    Lazy { expr: f(&a.expr.remap_vars(n, &maps[0]), &b.expr.remap_vars(n, &maps[1])), preds }
}

/// Guard with smooth operands, before the operands share a variable space.
enum LGuard<S> {
    True,
    Atom(Lazy<S>, Cmp),
    All(Vec<LGuard<S>>),
    Any(Vec<LGuard<S>>),
}

impl<S: Scalar> LGuard<S> {
    fn collect<'a>(&'a self, out: &mut Vec<&'a Lazy<S>>) {
        match self {
            LGuard::True => {}
            LGuard::Atom(l, _) => out.push(l),
            LGuard::All(ps) | LGuard::Any(ps) => ps.iter().for_each(|p| p.collect(out)),
        }
    }

    fn lower(&self, preds: &[usize]) -> IndexPredicate<S> {
        match self {
            LGuard::True => IndexPredicate::True,
            LGuard::Atom(l, c) => IndexPredicate::atom(remap_into(l, preds), *c),
            LGuard::All(ps) => IndexPredicate::All(ps.iter().map(|p| p.lower(preds)).collect()),
            LGuard::Any(ps) => IndexPredicate::Any(ps.iter().map(|p| p.lower(preds)).collect()),
        }
    }
}

fn remap_into<S: Scalar>(l: &Lazy<S>, preds: &[usize]) -> ElementaryExpr<S> {
    let map: Vec<usize> = l.preds.iter().map(|p| preds.binary_search(p).expect("subset")).collect();
    l.expr.remap_vars(preds.len(), &map)
}

fn cmp_atoms<S: Scalar>(d: Lazy<S>, op: CmpOp) -> LGuard<S> {
    match op {
        CmpOp::Lt => LGuard::Atom(d, Cmp::Lt),
        CmpOp::Le => LGuard::Atom(d, Cmp::Le),
        CmpOp::Gt => LGuard::Atom(d, Cmp::Gt),
        CmpOp::Ge => LGuard::Atom(d, Cmp::Ge),
        CmpOp::Eq => LGuard::Atom(d, Cmp::Eq),
        CmpOp::Ne => LGuard::Any(vec![LGuard::Atom(d.clone(), Cmp::Lt), LGuard::Atom(d, Cmp::Gt)]),
    }
}

/// Whether two single comparisons cover every point: `a op b` against
/// `a op' b` with `op'` the negation of `op`, in either operand order.
fn complementary(a: &Guard, b: &Guard) -> bool {
    match (a, b) {
        (Guard::Cmp(o1, l1, r1), Guard::Cmp(o2, l2, r2)) => {
            (l1 == l2 && r1 == r2 && *o2 == o1.negated()) || (l1 == r2 && r1 == l2 && *o2 == o1.negated().mirrored())
        }
        _ => false,
    }
}

struct Compiler<'a, S> {
    file: &'a SourceFile,
    b: ProgramBuilder<S>,
    symbols: Vec<Symbol>,
    stack: Vec<String>,
}

type CResult<T> = Result<T, Diagnostic>;

fn err(span: Span, msg: impl Into<String>) -> Diagnostic {
    Diagnostic::new(Phase::Compile, span, msg)
}

const INTRINSICS: [(&str, usize); 6] = [("exp", 1), ("log", 1), ("relu", 1), ("abs", 1), ("max", 2), ("min", 2)];

impl<S: Scalar> Compiler<'_, S> {
    fn push(&mut self, g: SelectionFunction<S>, preds: &[usize], span: Span, label: &str) -> usize {
        let id = self.b.push(g, preds);
        self.symbols.push(Symbol { node: id, span, label: label.to_string() });
        id
    }

    /// Stores a value in a node unless it already is one.
    fn materialize(&mut self, l: &Lazy<S>, span: Span, label: &str) -> usize {
        if let Some(n) = l.as_node() {
            return n;
        }
        let (preds, expr) = if l.preds.is_empty() {
            (vec![0], l.expr.remap_vars(1, &[]))
        } else {
            (l.preds.clone(), l.expr.clone())
        };
        self.push(SelectionFunction::smooth(expr), &preds, span, label)
    }

    fn bound(&mut self, l: Lazy<S>, span: Span) -> Lazy<S> {
        if l.expr.len() > INLINE_LIMIT && !l.preds.is_empty() {
            Lazy::node(self.materialize(&l, span, "smooth"))
        } else {
            l
        }
    }

    /// One node holding `(guard_i => value_i)`, or a constant when nothing
    /// depends on the inputs.
    fn selection(&mut self, cases: Vec<(LGuard<S>, Lazy<S>)>, span: Span, label: &str) -> CResult<Lazy<S>> {
        let mut all: Vec<&Lazy<S>> = Vec::new();
        for (g, v) in &cases {
            g.collect(&mut all);
            all.push(v);
        }
        let lists: Vec<&[usize]> = all.iter().map(|l| l.preds.as_slice()).collect();
        let (preds, _) = merge(&lists);
        let branches = cases.iter().map(|(g, v)| (g.lower(&preds), remap_into(v, &preds))).collect();
        let f = SelectionFunction::new(preds.len(), branches).map_err(|e| err(span, e.to_string()))?;
        if preds.is_empty() {
            let v = f.eval(&[]).map_err(|e| err(span, format!("constant selection cannot be evaluated: {e}")))?;
            return Ok(Lazy::constant(v));
        }
        Ok(Lazy::node(self.push(f, &preds, span, label)))
    }

    fn guard(&mut self, g: &Guard, env: &[(String, Lazy<S>)], negate: bool) -> CResult<LGuard<S>> {
        Ok(match g {
            Guard::Cmp(op, a, b) => {
                let (la, lb) = (self.expr(a, env)?, self.expr(b, env)?);
                let d = if lb.as_constant() == Some(S::zero()) { la } else { combine(&la, &lb, |x, y| x - y) };
                cmp_atoms(d, if negate { op.negated() } else { *op })
            }
            Guard::And(ps) | Guard::Or(ps) => {
                let parts = ps.iter().map(|p| self.guard(p, env, negate)).collect::<CResult<Vec<_>>>()?;
                if matches!(g, Guard::And(_)) != negate {
                    LGuard::All(parts)
                } else {
                    LGuard::Any(parts)
                }
            }
            Guard::Not(inner) => self.guard(inner, env, !negate)?,
        })
    }

    fn select(&mut self, arms: &[Arm], span: Span, env: &[(String, Lazy<S>)]) -> CResult<Lazy<S>> {
        let mut last = arms.len() - 1;
        let mut total = false;
        if let Some(pos) = arms.iter().position(|a| a.guard.is_none()) {
            if pos != last {
                return Err(err(arms[pos + 1].span, "arm after `else` is unreachable"));
            }
            total = true;
        } else {
            'outer: for j in 1..arms.len() {
                for i in 0..j {
                    if complementary(arms[i].guard.as_ref().unwrap(), arms[j].guard.as_ref().unwrap()) {
                        last = j;
                        total = true;
                        break 'outer;
                    }
                }
            }
        }
        if !total {
            return Err(err(span, "guards not total: add an `else` arm"));
        }
        let mut cases = Vec::with_capacity(last + 1);
        for (i, arm) in arms[..=last].iter().enumerate() {
            let g = match &arm.guard {
                Some(g) if i < last => self.guard(g, env, false)?,
                _ => LGuard::True,
            };
            cases.push((g, self.expr(&arm.value, env)?));
        }
        self.selection(cases, span, "select")
    }

    fn constant_of(&mut self, e: &Expr, env: &[(String, Lazy<S>)], what: &str) -> CResult<S> {
        let l = self.expr(e, env)?;
        match l.as_constant() {
            Some(c) if c.is_finite() => Ok(c),
            _ => Err(err(e.span, format!("{what} must be a finite constant"))),
        }
    }

    fn call(&mut self, f: &Ident, args: &[Expr], span: Span, env: &[(String, Lazy<S>)]) -> CResult<Lazy<S>> {
        if let Some(def) = self.file.function(&f.name) {
            if let Some(pos) = self.stack.iter().position(|s| *s == f.name) {
                let mut cycle = self.stack[pos..].to_vec();
                cycle.push(f.name.clone());
                return Err(err(f.span, format!("recursion detected: {}", cycle.join(" -> "))));
            }
            if def.params.len() != args.len() {
                return Err(err(
                    span,
                    format!("arity mismatch: `{}` takes {} argument(s), got {}", f.name, def.params.len(), args.len()),
                ));
            }
            let vals = args.iter().map(|a| self.expr(a, env)).collect::<CResult<Vec<_>>>()?;
            return self.function(def, vals);
        }
        if f.name == "affine" {
            return self.affine(args, span, env);
        }
        let Some(&(_, arity)) = INTRINSICS.iter().find(|(n, _)| *n == f.name) else {
            return Err(err(f.span, format!("undefined symbol `{}`", f.name)));
        };
        if args.len() != arity {
            return Err(err(span, format!("arity mismatch: `{}` takes {arity} argument(s), got {}", f.name, args.len())));
        }
        let v = args.iter().map(|a| self.expr(a, env)).collect::<CResult<Vec<_>>>()?;
        let zero = Lazy::constant(S::zero());
        let neg = |l: &Lazy<S>| l.unary(|e| e.neg());
        Ok(match f.name.as_str() {
            "exp" => v[0].unary(|e| e.exp()),
            "log" => v[0].unary(|e| e.ln()),
            "relu" => self.selection(vec![(LGuard::Atom(v[0].clone(), Cmp::Le), zero), (LGuard::True, v[0].clone())], span, "relu")?,
            "abs" => self.selection(vec![(LGuard::Atom(v[0].clone(), Cmp::Ge), v[0].clone()), (LGuard::True, neg(&v[0]))], span, "abs")?,
            "max" | "min" => {
                let d = combine(&v[0], &v[1], |a, b| a - b);
                let cmp = if f.name == "max" { Cmp::Ge } else { Cmp::Le };
                self.selection(vec![(LGuard::Atom(d, cmp), v[0].clone()), (LGuard::True, v[1].clone())], span, &f.name)?
            }
            _ => unreachable!("intrinsic table"),
        })
    }

    /// `affine([c_1, ..., c_k], b, e_1, ..., e_k) = b + Σ c_i e_i`.
    fn affine(&mut self, args: &[Expr], span: Span, env: &[(String, Lazy<S>)]) -> CResult<Lazy<S>> {
        let Some(ExprKind::List(coeffs)) = args.first().map(|a| &a.kind) else {
            return Err(err(span, "`affine` expects a coefficient list `[c, ...]` first"));
        };
        if args.len() != coeffs.len() + 2 {
            return Err(err(
                span,
                format!("arity mismatch: `affine` with {} coefficient(s) takes {} argument(s), got {}", coeffs.len(), coeffs.len() + 2, args.len()),
            ));
        }
        let c = coeffs.iter().map(|e| self.constant_of(e, env, "an affine coefficient")).collect::<CResult<Vec<_>>>()?;
        let offset = self.constant_of(&args[1], env, "the affine offset")?;
        let vals = args[2..].iter().map(|a| self.expr(a, env)).collect::<CResult<Vec<_>>>()?;
        let lists: Vec<&[usize]> = vals.iter().map(|l| l.preds.as_slice()).collect();
        let (preds, _) = merge(&lists);
        if preds.is_empty() {
            let x: Vec<S> = vals.iter().map(|v| v.as_constant().unwrap_or(S::nan())).collect();
            let v = ElementaryExpr::affine(c, offset).eval(&x).map_err(|e| err(span, e.to_string()))?;
            return Ok(Lazy::constant(v));
        }
        let inner: Vec<ElementaryExpr<S>> = vals.iter().map(|v| remap_into(v, &preds)).collect();
        let expr = if c.is_empty() {
            ElementaryExpr::constant(preds.len(), offset)
        } else {
            ElementaryExpr::affine(c, offset).substitute(&inner)
        };
        Ok(Lazy { preds, expr })
    }

    fn expr(&mut self, e: &Expr, env: &[(String, Lazy<S>)]) -> CResult<Lazy<S>> {
        let l = match &e.kind {
            ExprKind::Num(v) => Lazy::constant(S::lit(*v)),
            ExprKind::Var(name) => match env.iter().rev().find(|(n, _)| n == name) {
                Some((_, l)) => l.clone(),
                None => return Err(err(e.span, format!("undefined symbol `{name}`"))),
            },
            ExprKind::Neg(a) => self.expr(a, env)?.unary(|x| x.neg()),
            ExprKind::Binary(op, a, b) => {
                let (la, lb) = (self.expr(a, env)?, self.expr(b, env)?);
                match op {
                    BinOp::Add => combine(&la, &lb, |x, y| x + y),
                    BinOp::Sub => combine(&la, &lb, |x, y| x - y),
                    BinOp::Mul => combine(&la, &lb, |x, y| x * y),
                    BinOp::Div => combine(&la, &lb, |x, y| x / y),
                }
            }
            ExprKind::Call(f, args) => self.call(f, args, e.span, env)?,
            ExprKind::List(_) => {
                return Err(err(e.span, "a list is only allowed as the first argument of `affine`"));
            }
            ExprKind::Select(arms) => self.select(arms, e.span, env)?,
        };
        if let Some(c) = l.as_constant() {
            if !c.is_finite() {
                return Err(err(e.span, "constant subexpression is undefined"));
            }
        } else if l.preds.is_empty() {
            return Err(err(e.span, "constant subexpression is undefined"));
        }
        Ok(self.bound(l, e.span))
    }

    fn function(&mut self, def: &FnDef, args: Vec<Lazy<S>>) -> CResult<Lazy<S>> {
        self.stack.push(def.name.name.clone());
        let mut env: Vec<(String, Lazy<S>)> = def.params.iter().map(|p| p.name.clone()).zip(args).collect();
        for l in &def.lets {
            let v = self.expr(&l.value, &env)?;
            env.push((l.name.name.clone(), v));
        }
        let out = self.expr(&def.body, &env);
        self.stack.pop();
        out
    }
}

/// Name-level checks that do not depend on the entry point.
fn check_definitions(file: &SourceFile) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    for (i, f) in file.functions.iter().enumerate() {
        if file.functions[..i].iter().any(|g| g.name.name == f.name.name) {
            diags.push(err(f.name.span, format!("function `{}` is defined twice", f.name.name)));
        }
        for (j, p) in f.params.iter().enumerate() {
            if f.params[..j].iter().any(|q| q.name == p.name) {
                diags.push(err(p.span, format!("parameter `{}` is declared twice", p.name)));
            }
        }
    }
    diags
}

/// Compiles function `name` of a parsed file into a program with one input
/// per parameter and one output.
pub fn compile<S: Scalar>(file: &SourceFile, name: &str, src_hash: &str) -> Result<CompileArtifact<S>, Vec<Diagnostic>> {
    let defs = check_definitions(file);
    if !defs.is_empty() {
        return Err(defs);
    }
    let Some(def) = file.function(name) else {
        let span = file.functions.first().map(|f| f.name.span).unwrap_or_default();
        return Err(vec![err(span, format!("undefined symbol `{name}`: no such function"))]);
    };
    let p = def.params.len();
    if p == 0 {
        return Err(vec![err(def.name.span, format!("`{name}` needs at least one parameter to be compiled"))]);
    }
    let mut c = Compiler { file, b: ProgramBuilder::new(p), symbols: Vec::new(), stack: Vec::new() };
    for (i, prm) in def.params.iter().enumerate() {
        c.symbols.push(Symbol { node: i, span: prm.span, label: prm.name.clone() });
    }
    let args = (0..p).map(Lazy::node).collect();
    let out = c.function(def, args).map_err(|d| vec![d])?;
    let node = c.materialize(&out, def.body.span, "output");
    let before = c.b.len();
    let program = c.b.finish(&[node]).map_err(|e| vec![err(def.span, e.to_string())])?;
    if program.node_count() > before {
        c.symbols.push(Symbol { node: before, span: def.body.span, label: "output".into() });
    }
    Ok(CompileArtifact {
        function: name.to_string(),
        params: def.params.iter().map(|p| p.name.clone()).collect(),
        program,
        symbols: c.symbols,
        source_hash: src_hash.to_string(),
    })
}

/// Parses `src` and compiles function `name`.
pub fn compile_source<S: Scalar>(src: &str, name: &str) -> Result<CompileArtifact<S>, Vec<Diagnostic>> {
    let file = parse(src)?;
    compile(&file, name, &source_hash(src))
}

/// Parses `src` and compiles every function that takes parameters,
/// collecting all diagnostics.
pub fn check_source(src: &str) -> Result<Vec<CompileArtifact<f64>>, Vec<Diagnostic>> {
    let file = parse(src)?;
    let hash = source_hash(src);
    let mut out = Vec::new();
    let mut diags = check_definitions(&file);
    if !diags.is_empty() {
        return Err(diags);
    }
    for f in &file.functions {
        if f.params.is_empty() {
            continue;
        }
        match compile(&file, &f.name.name, &hash) {
            Ok(a) => out.push(a),
            Err(mut d) => diags.append(&mut d),
        }
    }
    if diags.is_empty() {
        Ok(out)
    } else {
        diags.sort_by_key(|d| d.span.start);
        diags.dedup();
        Err(diags)
    }
}
