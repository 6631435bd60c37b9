//! Elementary selections: guarded lists of elementary branches.
//!
//! A selection is represented by an ordered list of cases `(guard_i, f_i)`.
//! The index `s(x)` is the first case whose guard holds, and the represented
//! function is `f_{s(x)}(x)`. The selection gradient is the gradient of the
//! active branch, i.e. what differentiation with frozen branches returns.
//!
//! Sums, products and compositions are represented on the product refinement
//! of the operands' indices. With first-true semantics the lexicographic order
//! of index tuples, guarded by the conjunction of the operands' guards,
//! reproduces exactly the tuple of the operands' own indices, so no negated
//! guards are needed.

use std::fmt;

use crate::error::{Error, Result};
use crate::expr::{ElementaryExpr, Scratch};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

/// Default cap on the number of branches produced by a refinement.
pub const DEFAULT_BRANCH_CAP: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Cmp {
    Lt,
    Le,
    Eq,
    Ge,
    Gt,
}

impl Cmp {
    /// Whether `v ⋈ 0`. Equality is exact.
    #[inline]
    pub fn holds<S: Scalar>(self, v: S) -> bool {
        let z = S::zero();
        match self {
            Cmp::Lt => v < z,
            Cmp::Le => v <= z,
            Cmp::Eq => v == z,
            Cmp::Ge => v >= z,
            Cmp::Gt => v > z,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Cmp::Lt => "<",
            Cmp::Le => "<=",
            Cmp::Eq => "==",
            Cmp::Ge => ">=",
            Cmp::Gt => ">",
        }
    }

    pub fn from_symbol(s: &str) -> Option<Self> {
        Some(match s {
            "<" => Cmp::Lt,
            "<=" => Cmp::Le,
            "=" | "==" => Cmp::Eq,
            ">=" => Cmp::Ge,
            ">" => Cmp::Gt,
            _ => return None,
        })
    }
}

/// Guard of a case: a finite and/or tree of atoms `g(x) ⋈ 0`.
#[derive(Debug, Clone, PartialEq)]
pub enum IndexPredicate<S> {
    True,
    Atom { expr: ElementaryExpr<S>, cmp: Cmp },
    All(Vec<IndexPredicate<S>>),
    Any(Vec<IndexPredicate<S>>),
}

impl<S: Scalar> IndexPredicate<S> {
    pub fn atom(expr: ElementaryExpr<S>, cmp: Cmp) -> Self {
        IndexPredicate::Atom { expr, cmp }
    }

    /// Conjunction, flattening nested conjunctions and dropping `True`.
    pub fn and(self, other: Self) -> Self {
        use IndexPredicate::*;
        match (self, other) {
            (True, p) | (p, True) => p,
            (All(mut a), All(b)) => {
                a.extend(b);
                All(a)
            }
            (All(mut a), p) => {
                a.push(p);
                All(a)
            }
            (p, All(mut b)) => {
                b.insert(0, p);
                All(b)
            }
            (p, q) => All(vec![p, q]),
        }
    }

    /// Evaluates with short-circuiting, left to right.
    pub fn eval(&self, x: &[S], scratch: &mut Vec<S>) -> Result<bool> {
        Ok(match self {
            IndexPredicate::True => true,
            IndexPredicate::Atom { expr, cmp } => cmp.holds(expr.eval_with(x, scratch)?),
            IndexPredicate::All(ps) => {
                for p in ps {
                    if !p.eval(x, scratch)? {
                        return Ok(false);
                    }
                }
                true
            }
            IndexPredicate::Any(ps) => {
                for p in ps {
                    if p.eval(x, scratch)? {
                        return Ok(true);
                    }
                }
                false
            }
        })
    }

    pub fn is_true(&self) -> bool {
        matches!(self, IndexPredicate::True)
    }

    /// Visits every atom expression.
    pub fn for_each_atom(&self, f: &mut impl FnMut(&ElementaryExpr<S>, Cmp)) {
        match self {
            IndexPredicate::True => {}
            IndexPredicate::Atom { expr, cmp } => f(expr, *cmp),
            IndexPredicate::All(ps) | IndexPredicate::Any(ps) => {
                ps.iter().for_each(|p| p.for_each_atom(f))
            }
        }
    }

    pub fn map_exprs(&self, f: &impl Fn(&ElementaryExpr<S>) -> ElementaryExpr<S>) -> Self {
        match self {
            IndexPredicate::True => IndexPredicate::True,
            IndexPredicate::Atom { expr, cmp } => IndexPredicate::Atom { expr: f(expr), cmp: *cmp },
            IndexPredicate::All(ps) => IndexPredicate::All(ps.iter().map(|p| p.map_exprs(f)).collect()),
            IndexPredicate::Any(ps) => IndexPredicate::Any(ps.iter().map(|p| p.map_exprs(f)).collect()),
        }
    }

    pub fn substitute(&self, args: &[ElementaryExpr<S>]) -> Self {
        self.map_exprs(&|e| e.substitute(args))
    }

    fn check_arity(&self, arity: usize) -> Result<()> {
        let mut bad = None;
        self.for_each_atom(&mut |e, _| {
            if e.arity() != arity {
                bad = Some(e.arity());
            }
        });
        match bad {
            Some(got) => Err(Error::Dimension { expected: arity, got }),
            None => Ok(()),
        }
    }
}

/// One guarded branch of a (possibly vector valued) selection.
#[derive(Debug, Clone, PartialEq)]
pub struct Case<S> {
    pub guard: IndexPredicate<S>,
    pub values: Vec<ElementaryExpr<S>>,
}

/// Vector-valued elementary selection `R^p -> R^q` with a common index.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionMap<S> {
    arity: usize,
    outputs: usize,
    cases: Vec<Case<S>>,
}

/// Reusable buffers for evaluating selections in hot loops.
#[derive(Debug, Clone, Default)]
pub struct SelScratch<S> {
    pub(crate) guard: Vec<S>,
    pub(crate) expr: Scratch<S>,
}

impl<S: Scalar> SelectionMap<S> {
    pub fn new(arity: usize, outputs: usize, cases: Vec<Case<S>>) -> Result<Self> {
        if cases.is_empty() {
            return Err(Error::Invalid("selection needs at least one case".into()));
        }
        for c in &cases {
            c.guard.check_arity(arity)?;
            if c.values.len() != outputs {
                return Err(Error::Dimension { expected: outputs, got: c.values.len() });
            }
            for v in &c.values {
                if v.arity() != arity {
                    return Err(Error::Dimension { expected: arity, got: v.arity() });
                }
            }
        }
        Ok(Self { arity, outputs, cases })
    }

    /// The smooth map given by `values` on all of its domain.
    pub fn smooth(values: Vec<ElementaryExpr<S>>) -> Self {
        let arity = values.first().map_or(0, |v| v.arity());
        Self::new(arity, values.len(), vec![Case { guard: IndexPredicate::True, values }])
            .expect("smooth map has consistent arity")
    }

    /// Identity on `R^p`.
    pub fn identity(p: usize) -> Self {
        Self::smooth((0..p).map(|i| ElementaryExpr::var(p, i)).collect())
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    pub fn cases(&self) -> &[Case<S>] {
        &self.cases
    }

    pub fn branch_count(&self) -> usize {
        self.cases.len()
    }

    pub fn index_of(&self, x: &[S]) -> Result<usize> {
        self.index_with(x, &mut Vec::new())
    }

    pub(crate) fn index_with(&self, x: &[S], scratch: &mut Vec<S>) -> Result<usize> {
        if x.len() != self.arity {
            return Err(Error::Dimension { expected: self.arity, got: x.len() });
        }
        for (i, c) in self.cases.iter().enumerate() {
            if c.guard.eval(x, scratch)? {
                return Ok(i);
            }
        }
        Err(Error::NotTotal { point: x.iter().map(|v| v.to_f64_lossy()).collect() })
    }

    pub fn eval(&self, x: &[S]) -> Result<Vec<S>> {
        let i = self.index_of(x)?;
        self.branch_value(i, x)
    }

    pub fn branch_value(&self, i: usize, x: &[S]) -> Result<Vec<S>> {
        self.cases[i].values.iter().map(|e| e.eval(x)).collect()
    }

    /// Jacobian of branch `i` at `x`, one row per output.
    pub fn branch_jacobian(&self, i: usize, x: &[S]) -> Result<Matrix<S>> {
        let rows = self.cases[i]
            .values
            .iter()
            .map(|e| e.grad(x))
            .collect::<Result<Vec<_>>>()?;
        Ok(Matrix::from_flat(self.outputs, self.arity, rows.into_iter().flatten().collect()))
    }

    /// Selection Jacobian: the Jacobian of the active branch.
    pub fn jacobian(&self, x: &[S]) -> Result<Matrix<S>> {
        let i = self.index_of(x)?;
        self.branch_jacobian(i, x)
    }

    /// Composition `self ∘ inner` on the product refinement of both indices.
    pub fn compose(&self, inner: &SelectionMap<S>, cap: usize) -> Result<Self> {
        if inner.outputs != self.arity {
            return Err(Error::Dimension { expected: self.arity, got: inner.outputs });
        }
        check_cap(inner.cases.len(), self.cases.len(), cap)?;
        let mut cases = Vec::with_capacity(inner.cases.len() * self.cases.len());
        for ci in &inner.cases {
            for co in &self.cases {
                let guard = ci.guard.clone().and(co.guard.substitute(&ci.values));
                let values = co.values.iter().map(|e| e.substitute(&ci.values)).collect();
                cases.push(Case { guard, values });
            }
        }
        Self::new(inner.arity, self.outputs, cases)
    }

    /// Refines two maps on the same domain to a common index and combines
    /// branch values pairwise.
    pub fn refine_with(
        &self,
        other: &Self,
        cap: usize,
        combine: impl Fn(&[ElementaryExpr<S>], &[ElementaryExpr<S>]) -> Vec<ElementaryExpr<S>>,
    ) -> Result<Self> {
        if self.arity != other.arity {
            return Err(Error::Dimension { expected: self.arity, got: other.arity });
        }
        check_cap(self.cases.len(), other.cases.len(), cap)?;
        let mut cases = Vec::with_capacity(self.cases.len() * other.cases.len());
        for a in &self.cases {
            for b in &other.cases {
                cases.push(Case {
                    guard: a.guard.clone().and(b.guard.clone()),
                    values: combine(&a.values, &b.values),
                });
            }
        }
        let outputs = cases[0].values.len();
        Self::new(self.arity, outputs, cases)
    }

    /// Stacks scalar selections into one map with a common (refined) index.
    pub fn stack(components: &[SelectionFunction<S>], cap: usize) -> Result<Self> {
        let (first, rest) = components
            .split_first()
            .ok_or_else(|| Error::Invalid("stacking needs at least one component".into()))?;
        let mut acc = first.0.clone();
        for c in rest {
            acc = acc.refine_with(&c.0, cap, |a, b| a.iter().chain(b).cloned().collect())?;
        }
        Ok(acc)
    }

    /// Splits into scalar components that share this map's index.
    pub fn components(&self) -> Vec<SelectionFunction<S>> {
        (0..self.outputs)
            .map(|k| {
                SelectionFunction(SelectionMap {
                    arity: self.arity,
                    outputs: 1,
                    cases: self
                        .cases
                        .iter()
                        .map(|c| Case { guard: c.guard.clone(), values: vec![c.values[k].clone()] })
                        .collect(),
                })
            })
            .collect()
    }

    pub fn cast<T: Scalar>(&self) -> SelectionMap<T> {
        fn cast_pred<S: Scalar, T: Scalar>(p: &IndexPredicate<S>) -> IndexPredicate<T> {
            match p {
                IndexPredicate::True => IndexPredicate::True,
                IndexPredicate::Atom { expr, cmp } => IndexPredicate::Atom { expr: expr.cast(), cmp: *cmp },
                IndexPredicate::All(ps) => IndexPredicate::All(ps.iter().map(cast_pred).collect()),
                IndexPredicate::Any(ps) => IndexPredicate::Any(ps.iter().map(cast_pred).collect()),
            }
        }
        SelectionMap {
            arity: self.arity,
            outputs: self.outputs,
            cases: self
                .cases
                .iter()
                .map(|c| Case {
                    guard: cast_pred(&c.guard),
                    values: c.values.iter().map(ElementaryExpr::cast).collect(),
                })
                .collect(),
        }
    }
}

fn check_cap(a: usize, b: usize, cap: usize) -> Result<()> {
    match a.checked_mul(b) {
        Some(n) if n <= cap => Ok(()),
        Some(n) => Err(Error::BranchOverflow { count: n, cap }),
        None => Err(Error::BranchOverflow { count: usize::MAX, cap }),
    }
}

/// Scalar elementary selection `R^p -> R`.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionFunction<S>(SelectionMap<S>);

impl<S: Scalar> SelectionFunction<S> {
    /// Builds `(guard_1 => f_1, ..., guard_m => f_m)`.
    pub fn new(arity: usize, branches: Vec<(IndexPredicate<S>, ElementaryExpr<S>)>) -> Result<Self> {
        let cases = branches
            .into_iter()
            .map(|(guard, f)| Case { guard, values: vec![f] })
            .collect();
        Ok(Self(SelectionMap::new(arity, 1, cases)?))
    }

    pub fn from_map(map: SelectionMap<S>) -> Result<Self> {
        if map.outputs != 1 {
            return Err(Error::Dimension { expected: 1, got: map.outputs });
        }
        Ok(Self(map))
    }

    /// A single always-active branch.
    pub fn smooth(f: ElementaryExpr<S>) -> Self {
        Self(SelectionMap::smooth(vec![f]))
    }

    pub fn as_map(&self) -> &SelectionMap<S> {
        &self.0
    }

    pub fn into_map(self) -> SelectionMap<S> {
        self.0
    }

    pub fn arity(&self) -> usize {
        self.0.arity
    }

    pub fn branch_count(&self) -> usize {
        self.0.cases.len()
    }

    pub fn guard(&self, i: usize) -> &IndexPredicate<S> {
        &self.0.cases[i].guard
    }

    pub fn branch(&self, i: usize) -> &ElementaryExpr<S> {
        &self.0.cases[i].values[0]
    }

    pub fn branches(&self) -> impl Iterator<Item = (&IndexPredicate<S>, &ElementaryExpr<S>)> {
        self.0.cases.iter().map(|c| (&c.guard, &c.values[0]))
    }

    /// Index of the active branch (0-based), first guard that holds.
    pub fn index_of(&self, x: &[S]) -> Result<usize> {
        self.0.index_of(x)
    }

    pub fn eval(&self, x: &[S]) -> Result<S> {
        let i = self.index_of(x)?;
        self.branch(i).eval(x)
    }

    /// Gradient of the active branch at `x`.
    pub fn selection_gradient(&self, x: &[S]) -> Result<Vec<S>> {
        let i = self.index_of(x)?;
        self.branch(i).grad(x)
    }

    /// Value and selection gradient in one pass using caller-owned buffers.
    pub(crate) fn value_grad_with(
        &self,
        x: &[S],
        scratch: &mut SelScratch<S>,
        grad: &mut [S],
    ) -> Result<(usize, S)> {
        let i = self.0.index_with(x, &mut scratch.guard)?;
        let v = self.branch(i).grad_into(x, &mut scratch.expr, grad)?;
        Ok((i, v))
    }

    /// `g ∘ (f_1, ..., f_k)` where `g` has arity `k`.
    pub fn compose(outer: &Self, inner: &[Self], cap: usize) -> Result<Self> {
        if inner.len() != outer.arity() {
            return Err(Error::Dimension { expected: outer.arity(), got: inner.len() });
        }
        let stacked = SelectionMap::stack(inner, cap)?;
        Ok(Self(outer.0.compose(&stacked, cap)?))
    }

    fn combine(&self, other: &Self, cap: usize, op: fn(&ElementaryExpr<S>, &ElementaryExpr<S>) -> ElementaryExpr<S>) -> Result<Self> {
        Ok(Self(self.0.refine_with(&other.0, cap, |a, b| vec![op(&a[0], &b[0])])?))
    }

    pub fn sum(&self, other: &Self) -> Result<Self> {
        self.combine(other, DEFAULT_BRANCH_CAP, |a, b| a + b)
    }

    pub fn difference(&self, other: &Self) -> Result<Self> {
        self.combine(other, DEFAULT_BRANCH_CAP, |a, b| a - b)
    }

    pub fn product(&self, other: &Self) -> Result<Self> {
        self.combine(other, DEFAULT_BRANCH_CAP, |a, b| a * b)
    }

    pub fn sum_capped(&self, other: &Self, cap: usize) -> Result<Self> {
        self.combine(other, cap, |a, b| a + b)
    }

    pub fn product_capped(&self, other: &Self, cap: usize) -> Result<Self> {
        self.combine(other, cap, |a, b| a * b)
    }

    /// Multiplies every branch by `c`; the index is unchanged.
    pub fn scale(&self, c: S) -> Self {
        self.map_branches(|e| e.scale(c))
    }

    pub fn neg(&self) -> Self {
        self.map_branches(ElementaryExpr::neg)
    }

    fn map_branches(&self, f: impl Fn(&ElementaryExpr<S>) -> ElementaryExpr<S>) -> Self {
        let cases = self
            .0
            .cases
            .iter()
            .map(|c| Case { guard: c.guard.clone(), values: vec![f(&c.values[0])] })
            .collect();
        Self(SelectionMap { arity: self.0.arity, outputs: 1, cases })
    }

    pub fn cast<T: Scalar>(&self) -> SelectionFunction<T> {
        SelectionFunction(self.0.cast())
    }
}

/// Stacks the selection gradients of components that share an index.
pub fn selection_jacobian<S: Scalar>(components: &[SelectionFunction<S>], x: &[S]) -> Result<Matrix<S>> {
    let rows = components
        .iter()
        .map(|f| f.selection_gradient(x))
        .collect::<Result<Vec<_>>>()?;
    Ok(Matrix::from_rows(rows))
}

impl<S: Scalar> fmt::Display for SelectionFunction<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&crate::text::selection_to_text(&self.0))
    }
}

/// Prebuilt nonsmooth primitives used as program nodes.
pub mod prims {
    use super::*;

    fn x<S: Scalar>(p: usize, i: usize) -> ElementaryExpr<S> {
        ElementaryExpr::var(p, i)
    }

    fn le0<S: Scalar>(e: ElementaryExpr<S>) -> IndexPredicate<S> {
        IndexPredicate::atom(e, Cmp::Le)
    }

    /// `relu(t)`: `t <= 0 => 0`, otherwise `t`.
    pub fn relu<S: Scalar>() -> SelectionFunction<S> {
        SelectionFunction::new(
            1,
            vec![(le0(x(1, 0)), ElementaryExpr::zero(1)), (IndexPredicate::True, x(1, 0))],
        )
        .unwrap()
    }

    /// `relu` with the strict test `t < 0`, so the identity branch is taken at 0.
    pub fn relu_strict<S: Scalar>() -> SelectionFunction<S> {
        SelectionFunction::new(
            1,
            vec![
                (IndexPredicate::atom(x(1, 0), Cmp::Lt), ElementaryExpr::zero(1)),
                (IndexPredicate::True, x(1, 0)),
            ],
        )
        .unwrap()
    }

    /// `|t|`: `t >= 0 => t`, otherwise `-t`.
    pub fn abs<S: Scalar>() -> SelectionFunction<S> {
        SelectionFunction::new(
            1,
            vec![
                (IndexPredicate::atom(x(1, 0), Cmp::Ge), x(1, 0)),
                (IndexPredicate::True, x(1, 0).neg()),
            ],
        )
        .unwrap()
    }

    /// `max(a, b)`: `a - b >= 0 => a`, otherwise `b`.
    pub fn max2<S: Scalar>() -> SelectionFunction<S> {
        SelectionFunction::new(
            2,
            vec![
                (IndexPredicate::atom(&x(2, 0) - &x(2, 1), Cmp::Ge), x(2, 0)),
                (IndexPredicate::True, x(2, 1)),
            ],
        )
        .unwrap()
    }

    /// `min(a, b)`: `a - b <= 0 => a`, otherwise `b`.
    pub fn min2<S: Scalar>() -> SelectionFunction<S> {
        SelectionFunction::new(
            2,
            vec![
                (le0(&x(2, 0) - &x(2, 1)), x(2, 0)),
                (IndexPredicate::True, x(2, 1)),
            ],
        )
        .unwrap()
    }

    /// `select(c, a, b) = a` if `c <= 0` else `b`. Continuous only where the
    /// caller guarantees `a = b` on `c = 0`.
    pub fn select<S: Scalar>() -> SelectionFunction<S> {
        SelectionFunction::new(
            3,
            vec![(le0(x(3, 0)), x(3, 1)), (IndexPredicate::True, x(3, 2))],
        )
        .unwrap()
    }

    /// The null function with index `s(t) = 0` for `t != 0` and `s(0) = 1`,
    /// branches `0` and `t`. Its selection derivative at 0 is 1.
    pub fn zero_representation<S: Scalar>() -> SelectionFunction<S> {
        SelectionFunction::new(
            1,
            vec![
                (
                    IndexPredicate::Any(vec![
                        IndexPredicate::atom(x(1, 0), Cmp::Lt),
                        IndexPredicate::atom(x(1, 0), Cmp::Gt),
                    ]),
                    ElementaryExpr::zero(1),
                ),
                (IndexPredicate::True, x(1, 0)),
            ],
        )
        .unwrap()
    }

    /// Smooth node `sum_i coeffs_i * t_i + offset`.
    pub fn affine<S: Scalar>(coeffs: Vec<S>, offset: S) -> SelectionFunction<S> {
        SelectionFunction::smooth(ElementaryExpr::affine(coeffs, offset))
    }

    pub fn identity<S: Scalar>() -> SelectionFunction<S> {
        SelectionFunction::smooth(x(1, 0))
    }

    /// Sorting `R^2 -> R^2` in descending order with a common index.
    pub fn sort2<S: Scalar>() -> SelectionMap<S> {
        let d = &x(2, 0) - &x(2, 1);
        SelectionMap::new(
            2,
            2,
            vec![
                Case { guard: IndexPredicate::atom(d, Cmp::Ge), values: vec![x(2, 0), x(2, 1)] },
                Case { guard: IndexPredicate::True, values: vec![x(2, 1), x(2, 0)] },
            ],
        )
        .unwrap()
    }
}
