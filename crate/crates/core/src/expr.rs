//! Elementary log-exp expressions.
//!
//! An [`ElementaryExpr`] is a finite expression built from constants, input
//! coordinates, affine forms, the four arithmetic operations, `exp` and `log`.
//! It is stored as an arena in which every child index is smaller than its
//! parent's index, so the last node is the root and a single forward sweep
//! evaluates the whole expression. Subexpressions may be shared (the arena is
//! a DAG), which keeps substitution and symbolic differentiation linear.

use std::ops;

use crate::error::{DomainFault, Error, FaultKind, Result};
use crate::scalar::Scalar;

/// Index of a node inside an expression arena.
pub type NodeId = usize;

#[derive(Debug, Clone, PartialEq)]
pub enum Node<S> {
    Const(S),
    Var(usize),
    /// `offset + sum_i coeffs[i] * x_i`, accumulated left to right.
    Affine { coeffs: Vec<S>, offset: S },
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Div(NodeId, NodeId),
    Exp(NodeId),
    Log(NodeId),
}

impl<S> Node<S> {
    fn shifted(&self, by: usize) -> Node<S>
    where
        S: Clone,
    {
        match self {
            Node::Const(c) => Node::Const(c.clone()),
            Node::Var(i) => Node::Var(*i),
            Node::Affine { coeffs, offset } => Node::Affine {
                coeffs: coeffs.clone(),
                offset: offset.clone(),
            },
            Node::Add(a, b) => Node::Add(a + by, b + by),
            Node::Sub(a, b) => Node::Sub(a + by, b + by),
            Node::Mul(a, b) => Node::Mul(a + by, b + by),
            Node::Div(a, b) => Node::Div(a + by, b + by),
            Node::Exp(a) => Node::Exp(a + by),
            Node::Log(a) => Node::Log(a + by),
        }
    }

    fn children(&self) -> (Option<NodeId>, Option<NodeId>) {
        match *self {
            Node::Const(_) | Node::Var(_) | Node::Affine { .. } => (None, None),
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
                (Some(a), Some(b))
            }
            Node::Exp(a) | Node::Log(a) => (Some(a), None),
        }
    }
}

/// A C-infinity function on its open domain, built from the log-exp grammar.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementaryExpr<S> {
    arity: usize,
    nodes: Vec<Node<S>>,
}

impl<S: Scalar> ElementaryExpr<S> {
    /// Builds an expression from a raw arena, checking the structural
    /// invariants (children precede parents, variables below `arity`).
    pub fn from_nodes(arity: usize, nodes: Vec<Node<S>>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::Invalid("empty expression".into()));
        }
        for (i, n) in nodes.iter().enumerate() {
            let (a, b) = n.children();
            if a.is_some_and(|a| a >= i) || b.is_some_and(|b| b >= i) {
                return Err(Error::Invalid(format!("node {i} refers forward")));
            }
            match n {
                Node::Var(v) if *v >= arity => {
                    return Err(Error::Invalid(format!("variable x{v} with arity {arity}")))
                }
                Node::Affine { coeffs, .. } if coeffs.len() != arity => {
                    return Err(Error::Dimension { expected: arity, got: coeffs.len() })
                }
                _ => {}
            }
        }
        Ok(Self { arity, nodes })
    }

    pub fn constant(arity: usize, c: S) -> Self {
        Self { arity, nodes: vec![Node::Const(c)] }
    }

    pub fn zero(arity: usize) -> Self {
        Self::constant(arity, S::zero())
    }

    /// The coordinate projection `x -> x_i`.
    pub fn var(arity: usize, i: usize) -> Self {
        assert!(i < arity, "variable x{i} out of range for arity {arity}");
        Self { arity, nodes: vec![Node::Var(i)] }
    }

    pub fn affine(coeffs: Vec<S>, offset: S) -> Self {
        Self { arity: coeffs.len(), nodes: vec![Node::Affine { coeffs, offset }] }
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn nodes(&self) -> &[Node<S>] {
        &self.nodes
    }

    pub fn root(&self) -> NodeId {
        self.nodes.len() - 1
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Value of a constant expression, if the root is a literal.
    pub fn as_constant(&self) -> Option<S> {
        match self.nodes.last() {
            Some(Node::Const(c)) => Some(*c),
            _ => None,
        }
    }

    /// Input coordinate if the root is a bare variable.
    pub fn as_var(&self) -> Option<usize> {
        match self.nodes.last() {
            Some(Node::Var(i)) => Some(*i),
            _ => None,
        }
    }

    fn binary(a: &Self, b: &Self, mk: fn(NodeId, NodeId) -> Node<S>) -> Self {
        assert_eq!(a.arity, b.arity, "arity mismatch in binary expression");
        let off = a.nodes.len();
        let mut nodes = Vec::with_capacity(a.nodes.len() + b.nodes.len() + 1);
        nodes.extend(a.nodes.iter().cloned());
        nodes.extend(b.nodes.iter().map(|n| n.shifted(off)));
        let (ra, rb) = (off - 1, nodes.len() - 1);
        nodes.push(mk(ra, rb));
        Self { arity: a.arity, nodes }
    }

    fn unary(&self, mk: fn(NodeId) -> Node<S>) -> Self {
        let mut nodes = self.nodes.clone();
        nodes.push(mk(self.root()));
        Self { arity: self.arity, nodes }
    }

    pub fn exp(&self) -> Self {
        self.unary(Node::Exp)
    }

    pub fn ln(&self) -> Self {
        self.unary(Node::Log)
    }

    /// `0 - self`; the grammar has no dedicated negation node.
    pub fn neg(&self) -> Self {
        &Self::zero(self.arity) - self
    }

    pub fn scale(&self, c: S) -> Self {
        &Self::constant(self.arity, c) * self
    }

    /// Evaluates at `x`.
    pub fn eval(&self, x: &[S]) -> Result<S> {
        let mut vals = Vec::with_capacity(self.nodes.len());
        self.eval_with(x, &mut vals)
    }

    /// Evaluates at `x`, leaving every node value in `vals`.
    pub fn eval_with(&self, x: &[S], vals: &mut Vec<S>) -> Result<S> {
        if x.len() != self.arity {
            return Err(Error::Dimension { expected: self.arity, got: x.len() });
        }
        vals.clear();
        for (i, node) in self.nodes.iter().enumerate() {
            let v = match *node {
                Node::Const(c) => c,
                Node::Var(j) => x[j],
                Node::Affine { ref coeffs, offset } => {
                    let mut acc = offset;
                    for (c, xi) in coeffs.iter().zip(x) {
                        acc = acc + *c * *xi;
                    }
                    acc
                }
                Node::Add(a, b) => vals[a] + vals[b],
                Node::Sub(a, b) => vals[a] - vals[b],
                Node::Mul(a, b) => vals[a] * vals[b],
                Node::Div(a, b) => {
                    if vals[b] == S::zero() {
                        return Err(self.fault(i, FaultKind::DivisionByZero, x));
                    }
                    vals[a] / vals[b]
                }
                Node::Exp(a) => vals[a].exp(),
                Node::Log(a) => {
                    if !(vals[a] > S::zero()) {
                        return Err(self.fault(i, FaultKind::LogNonpositive, x));
                    }
                    vals[a].ln()
                }
            };
            vals.push(v);
        }
        Ok(vals[self.root()])
    }

    fn fault(&self, node: NodeId, kind: FaultKind, x: &[S]) -> Error {
        Error::Domain(DomainFault {
            node,
            kind,
            point: x.iter().map(|v| v.to_f64_lossy()).collect(),
        })
    }

    /// Exact gradient at `x`.
    pub fn grad(&self, x: &[S]) -> Result<Vec<S>> {
        Ok(self.value_and_grad(x)?.1)
    }

    pub fn value_and_grad(&self, x: &[S]) -> Result<(S, Vec<S>)> {
        let mut out = vec![S::zero(); self.arity];
        let mut scratch = Scratch::default();
        let v = self.grad_into(x, &mut scratch, &mut out)?;
        Ok((v, out))
    }

    /// Evaluates and writes the gradient into `out` (overwritten).
    ///
    /// One forward sweep caches node values, then adjoints are pushed from
    /// the root back to the leaves.
    pub fn grad_into(&self, x: &[S], scratch: &mut Scratch<S>, out: &mut [S]) -> Result<S> {
        let value = self.eval_with(x, &mut scratch.vals)?;
        debug_assert_eq!(out.len(), self.arity);
        out.iter_mut().for_each(|o| *o = S::zero());
        let vals = &scratch.vals;
        let adj = &mut scratch.adj;
        adj.clear();
        adj.resize(self.nodes.len(), S::zero());
        adj[self.root()] = S::one();
        for i in (0..self.nodes.len()).rev() {
            let w = adj[i];
            if w == S::zero() {
                continue;
            }
            match self.nodes[i] {
                Node::Const(_) => {}
                Node::Var(j) => out[j] = out[j] + w,
                Node::Affine { ref coeffs, .. } => {
                    for (o, c) in out.iter_mut().zip(coeffs) {
                        *o = *o + w * *c;
                    }
                }
                Node::Add(a, b) => {
                    adj[a] = adj[a] + w;
                    adj[b] = adj[b] + w;
                }
                Node::Sub(a, b) => {
                    adj[a] = adj[a] + w;
                    adj[b] = adj[b] - w;
                }
                Node::Mul(a, b) => {
                    adj[a] = adj[a] + w * vals[b];
                    adj[b] = adj[b] + w * vals[a];
                }
                Node::Div(a, b) => {
                    adj[a] = adj[a] + w / vals[b];
                    adj[b] = adj[b] - w * vals[i] / vals[b];
                }
                Node::Exp(a) => adj[a] = adj[a] + w * vals[i],
                Node::Log(a) => adj[a] = adj[a] + w / vals[a],
            }
        }
        Ok(value)
    }

    /// Materializes `d self / d x_k` as a new expression.
    ///
    /// The result shares the original arena, so its size is at most a small
    /// constant times the size of `self`.
    pub fn derivative(&self, k: usize) -> Self {
        assert!(k < self.arity);
        let mut nodes = self.nodes.clone();
        let mut d: Vec<NodeId> = Vec::with_capacity(self.nodes.len());
        let push = |nodes: &mut Vec<Node<S>>, n: Node<S>| {
            nodes.push(n);
            nodes.len() - 1
        };
        for (i, node) in self.nodes.iter().enumerate() {
            let di = match *node {
                Node::Const(_) => push(&mut nodes, Node::Const(S::zero())),
                Node::Var(j) => {
                    let c = if j == k { S::one() } else { S::zero() };
                    push(&mut nodes, Node::Const(c))
                }
                Node::Affine { ref coeffs, .. } => push(&mut nodes, Node::Const(coeffs[k])),
                Node::Add(a, b) => push(&mut nodes, Node::Add(d[a], d[b])),
                Node::Sub(a, b) => push(&mut nodes, Node::Sub(d[a], d[b])),
                Node::Mul(a, b) => {
                    let l = push(&mut nodes, Node::Mul(d[a], b));
                    let r = push(&mut nodes, Node::Mul(a, d[b]));
                    push(&mut nodes, Node::Add(l, r))
                }
                Node::Div(a, b) => {
                    let l = push(&mut nodes, Node::Mul(d[a], b));
                    let r = push(&mut nodes, Node::Mul(a, d[b]));
                    let num = push(&mut nodes, Node::Sub(l, r));
                    let den = push(&mut nodes, Node::Mul(b, b));
                    push(&mut nodes, Node::Div(num, den))
                }
                Node::Exp(a) => push(&mut nodes, Node::Mul(i, d[a])),
                Node::Log(a) => push(&mut nodes, Node::Div(d[a], a)),
            };
            d.push(di);
        }
        debug_assert_eq!(d[self.root()], nodes.len() - 1);
        Self { arity: self.arity, nodes }
    }

    /// Composition `self(args_0(y), ..., args_{p-1}(y))`.
    ///
    /// Each argument is inlined once and shared by every occurrence of the
    /// corresponding variable. Affine leaves are expanded in the same left to
    /// right order as their evaluation, so the composite evaluates bit for bit
    /// like the two-stage computation.
    pub fn substitute(&self, args: &[ElementaryExpr<S>]) -> Self {
        assert_eq!(args.len(), self.arity, "substitution needs one argument per variable");
        let arity = args.first().map_or(0, |a| a.arity);
        let mut nodes: Vec<Node<S>> = Vec::new();
        let mut roots = Vec::with_capacity(args.len());
        for a in args {
            assert_eq!(a.arity, arity, "substituted arguments must share an arity");
            let off = nodes.len();
            nodes.extend(a.nodes.iter().map(|n| n.shifted(off)));
            roots.push(nodes.len() - 1);
        }
        let mut map = Vec::with_capacity(self.nodes.len());
        for node in &self.nodes {
            let id = match node {
                Node::Var(j) => roots[*j],
                Node::Const(c) => {
                    nodes.push(Node::Const(*c));
                    nodes.len() - 1
                }
                Node::Affine { coeffs, offset } => {
                    nodes.push(Node::Const(*offset));
                    let mut acc = nodes.len() - 1;
                    for (c, r) in coeffs.iter().zip(&roots) {
                        nodes.push(Node::Const(*c));
                        let cid = nodes.len() - 1;
                        nodes.push(Node::Mul(cid, *r));
                        let term = nodes.len() - 1;
                        nodes.push(Node::Add(acc, term));
                        acc = nodes.len() - 1;
                    }
                    acc
                }
                other => {
                    let n = match *other {
                        Node::Add(a, b) => Node::Add(map[a], map[b]),
                        Node::Sub(a, b) => Node::Sub(map[a], map[b]),
                        Node::Mul(a, b) => Node::Mul(map[a], map[b]),
                        Node::Div(a, b) => Node::Div(map[a], map[b]),
                        Node::Exp(a) => Node::Exp(map[a]),
                        Node::Log(a) => Node::Log(map[a]),
                        _ => unreachable!(),
                    };
                    nodes.push(n);
                    nodes.len() - 1
                }
            };
            map.push(id);
        }
        let root = map[self.root()];
        if root != nodes.len() - 1 {
            // The root is a bare argument; inline a second copy so it ends the arena.
            let j = self.as_var().expect("only a variable root can map to an argument");
            let off = nodes.len();
            nodes.extend(args[j].nodes.iter().map(|n| n.shifted(off)));
        }
        Self { arity, nodes }
    }

    /// Re-indexes variables: `x_i` becomes `y_{map[i]}` in an arity-`arity` space.
    pub fn remap_vars(&self, arity: usize, map: &[usize]) -> Self {
        assert_eq!(map.len(), self.arity);
        let nodes = self
            .nodes
            .iter()
            .map(|n| match n {
                Node::Var(i) => Node::Var(map[*i]),
                Node::Affine { coeffs, offset } => {
                    let mut c = vec![S::zero(); arity];
                    for (i, ci) in coeffs.iter().enumerate() {
                        c[map[i]] = c[map[i]] + *ci;
                    }
                    Node::Affine { coeffs: c, offset: *offset }
                }
                other => other.clone(),
            })
            .collect();
        Self { arity, nodes }
    }

    /// Sorted list of variables the expression depends on structurally.
    pub fn vars_used(&self) -> Vec<usize> {
        let mut used = vec![false; self.arity];
        for n in &self.nodes {
            match n {
                Node::Var(i) => used[*i] = true,
                Node::Affine { coeffs, .. } => {
                    for (i, c) in coeffs.iter().enumerate() {
                        if *c != S::zero() {
                            used[i] = true;
                        }
                    }
                }
                _ => {}
            }
        }
        used.iter().enumerate().filter(|(_, u)| **u).map(|(i, _)| i).collect()
    }

    /// Converts the scalar type of every literal.
    pub fn cast<T: Scalar>(&self) -> ElementaryExpr<T> {
        let c = |v: S| T::lit(v.to_f64_lossy());
        let nodes = self
            .nodes
            .iter()
            .map(|n| match n {
                Node::Const(v) => Node::Const(c(*v)),
                Node::Var(i) => Node::Var(*i),
                Node::Affine { coeffs, offset } => Node::Affine {
                    coeffs: coeffs.iter().map(|v| c(*v)).collect(),
                    offset: c(*offset),
                },
                Node::Add(a, b) => Node::Add(*a, *b),
                Node::Sub(a, b) => Node::Sub(*a, *b),
                Node::Mul(a, b) => Node::Mul(*a, *b),
                Node::Div(a, b) => Node::Div(*a, *b),
                Node::Exp(a) => Node::Exp(*a),
                Node::Log(a) => Node::Log(*a),
            })
            .collect();
        ElementaryExpr { arity: self.arity, nodes }
    }
}

/// Reusable buffers for [`ElementaryExpr::grad_into`].
#[derive(Debug, Clone, Default)]
pub struct Scratch<S> {
    pub(crate) vals: Vec<S>,
    pub(crate) adj: Vec<S>,
}

macro_rules! bin_op {
    ($tr:ident, $method:ident, $node:ident) => {
        impl<S: Scalar> ops::$tr<&ElementaryExpr<S>> for &ElementaryExpr<S> {
            type Output = ElementaryExpr<S>;
            fn $method(self, rhs: &ElementaryExpr<S>) -> ElementaryExpr<S> {
                ElementaryExpr::binary(self, rhs, Node::$node)
            }
        }
        impl<S: Scalar> ops::$tr for ElementaryExpr<S> {
            type Output = ElementaryExpr<S>;
            fn $method(self, rhs: ElementaryExpr<S>) -> ElementaryExpr<S> {
                ElementaryExpr::binary(&self, &rhs, Node::$node)
            }
        }
    };
}

bin_op!(Add, add, Add);
bin_op!(Sub, sub, Sub);
bin_op!(Mul, mul, Mul);
bin_op!(Div, div, Div);

#[cfg(test)]
mod tests {
    use super::*;

    type E = ElementaryExpr<f64>;

    fn x(p: usize, i: usize) -> E {
        E::var(p, i)
    }

    #[test]
    fn exp_log_roundtrip() {
        let e = x(1, 0).ln().exp();
        let v = e.eval(&[2.0]).unwrap();
        assert!((v - 2.0).abs() <= 1e-15 * 2.0);
    }

    #[test]
    fn affine_value() {
        let e = E::affine(vec![2.0, -1.0], 3.0);
        assert_eq!(e.eval(&[1.0, 4.0]).unwrap(), 1.0);
    }

    #[test]
    fn reciprocal_at_zero_faults() {
        let e = &E::constant(1, 1.0) / &x(1, 0);
        match e.eval(&[0.0]) {
            Err(Error::Domain(f)) => {
                assert_eq!(f.kind, FaultKind::DivisionByZero);
                assert_eq!(f.node, e.root());
                assert_eq!(f.point, vec![0.0]);
            }
            other => panic!("expected fault, got {other:?}"),
        }
    }

    #[test]
    fn log_of_nonpositive_faults() {
        let e = x(1, 0).ln();
        assert!(matches!(
            e.eval(&[0.0]),
            Err(Error::Domain(DomainFault { kind: FaultKind::LogNonpositive, .. }))
        ));
        assert!(e.grad(&[-1.0]).is_err());
    }

    #[test]
    fn square_gradient() {
        let e = &x(1, 0) * &x(1, 0);
        assert_eq!(e.grad(&[3.0]).unwrap(), vec![6.0]);
    }

    #[test]
    fn exp_product_gradient() {
        let e = (&x(2, 0) * &x(2, 1)).exp();
        assert_eq!(e.grad(&[0.0, 5.0]).unwrap(), vec![5.0, 0.0]);
    }

    #[test]
    fn dimension_is_checked() {
        assert!(matches!(
            x(2, 0).eval(&[1.0]),
            Err(Error::Dimension { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn derivative_materializes() {
        // d/dx (x*y / (1 + x)) = y / (1 + x)^2
        let num = &x(2, 0) * &x(2, 1);
        let den = &E::constant(2, 1.0) + &x(2, 0);
        let e = &num / &den;
        let d = e.derivative(0);
        let v = d.eval(&[1.0, 3.0]).unwrap();
        assert!((v - 0.75).abs() < 1e-15);
        assert!(E::from_nodes(2, d.nodes().to_vec()).is_ok());
    }

    #[test]
    fn substitution_composes() {
        // f(u, v) = u * exp(v); u = x + 1, v = 2x
        let f = &x(2, 0) * &x(2, 1).exp();
        let u = &x(1, 0) + &E::constant(1, 1.0);
        let v = x(1, 0).scale(2.0);
        let g = f.substitute(&[u, v]);
        let t: f64 = 0.3;
        assert_eq!(g.eval(&[t]).unwrap(), (t + 1.0) * (2.0 * t).exp());
    }

    #[test]
    fn substitution_of_affine_is_bit_exact() {
        let f = E::affine(vec![0.1, 0.7], 0.3);
        let a = (&x(1, 0) * &x(1, 0)).exp();
        let b = x(1, 0).ln();
        let g = f.substitute(&[a.clone(), b.clone()]);
        let t = [1.7];
        let two_stage = f.eval(&[a.eval(&t).unwrap(), b.eval(&t).unwrap()]).unwrap();
        assert_eq!(g.eval(&t).unwrap().to_bits(), two_stage.to_bits());
    }

    #[test]
    fn substitution_with_bare_variable_root() {
        let f = x(2, 1);
        let g = f.substitute(&[E::constant(1, 4.0), &x(1, 0) * &x(1, 0)]);
        assert_eq!(g.eval(&[3.0]).unwrap(), 9.0);
        assert!(E::from_nodes(1, g.nodes().to_vec()).is_ok());
    }

    #[test]
    fn from_nodes_rejects_forward_refs() {
        let bad = vec![Node::Add(0, 1), Node::Const(1.0)];
        assert!(E::from_nodes(1, bad).is_err());
        assert!(E::from_nodes(1, vec![Node::Var(1)]).is_err());
    }

    #[test]
    fn generic_over_f32() {
        let e = ElementaryExpr::<f32>::var(1, 0);
        let sq = &e * &e;
        assert_eq!(sq.grad(&[3.0f32]).unwrap(), vec![6.0f32]);
    }
}
