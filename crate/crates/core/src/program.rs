//! Programs as DAGs of elementary selections, and their forward evaluation.
//!
//! A program has `p` inputs (nodes `0..p`), `m - p` computed nodes, and its
//! `q` outputs are the last `q` nodes. Node `k >= p` applies the selection
//! `g_k` to the values of its predecessors `pr(k)`, all of which come earlier.
//! Node ids are 0-based throughout.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::ElementaryExpr;
use crate::selection::{SelScratch, SelectionFunction, SelectionMap};
use crate::scalar::Scalar;
use crate::text;

/// `pr(k)` for every node; input nodes have empty lists.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredecessorRelation {
    preds: Vec<Vec<usize>>,
}

impl PredecessorRelation {
    pub fn new(preds: Vec<Vec<usize>>) -> Self {
        Self { preds }
    }

    pub fn node_count(&self) -> usize {
        self.preds.len()
    }

    pub fn of(&self, k: usize) -> &[usize] {
        &self.preds[k]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[usize]> {
        self.preds.iter().map(Vec::as_slice)
    }
}

/// A broken program invariant, located at a node where applicable.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Violation {
    NoInputs,
    NoOutputs,
    TooFewNodes { m: usize, p: usize, q: usize },
    NodeCount { expected: usize, got: usize },
    InputHasPredecessors { node: usize },
    EmptyPredecessors { node: usize },
    NotEarlier { node: usize, pred: usize },
    DuplicatePredecessor { node: usize, pred: usize },
    ArityMismatch { node: usize, expected: usize, got: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NoInputs => write!(f, "program needs at least one input"),
            Violation::NoOutputs => write!(f, "program needs at least one output"),
            Violation::TooFewNodes { m, p, q } => write!(f, "m = {m} < p + q = {}", p + q),
            Violation::NodeCount { expected, got } => {
                write!(f, "expected {expected} node functions, got {got}")
            }
            Violation::InputHasPredecessors { node } => write!(f, "input node {node} has predecessors"),
            Violation::EmptyPredecessors { node } => write!(f, "empty predecessors at node {node}"),
            Violation::NotEarlier { node, pred } => {
                write!(f, "j < i broken at node {node} (predecessor {pred})")
            }
            Violation::DuplicatePredecessor { node, pred } => {
                write!(f, "predecessor {pred} listed twice at node {node}")
            }
            Violation::ArityMismatch { node, expected, got } => write!(
                f,
                "node {node} has {expected} predecessors but its function takes {got} arguments"
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Program<S> {
    p: usize,
    q: usize,
    relation: PredecessorRelation,
    /// `g_k` for `k = p..m`, stored at `k - p`.
    funcs: Vec<SelectionFunction<S>>,
}

/// Values, local selection gradients and branch choices of one evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalTrace<S> {
    p: usize,
    values: Vec<S>,
    grad_start: Vec<usize>,
    grads: Vec<S>,
    branches: Vec<usize>,
}

impl<S: Scalar> Default for EvalTrace<S> {
    fn default() -> Self {
        Self::empty()
    }
}

impl<S: Scalar> EvalTrace<S> {
    fn empty() -> Self {
        Self { p: 0, values: Vec::new(), grad_start: Vec::new(), grads: Vec::new(), branches: Vec::new() }
    }

    pub fn values(&self) -> &[S] {
        &self.values
    }

    pub fn value(&self, k: usize) -> S {
        self.values[k]
    }

    /// `d_k = ∇̂ g_k(x_{pr(k)})`, one entry per predecessor. Empty for inputs.
    pub fn local_grad(&self, k: usize) -> &[S] {
        if k < self.p {
            return &[];
        }
        let j = k - self.p;
        &self.grads[self.grad_start[j]..self.grad_start[j + 1]]
    }

    /// Active branch of node `k`, `None` for inputs.
    pub fn branch(&self, k: usize) -> Option<usize> {
        k.checked_sub(self.p).map(|j| self.branches[j])
    }

    pub fn branches(&self) -> &[usize] {
        &self.branches
    }

    pub fn node_count(&self) -> usize {
        self.values.len()
    }
}

/// Reusable evaluation buffers.
#[derive(Debug, Clone, Default)]
pub struct Workspace<S> {
    args: Vec<S>,
    sel: SelScratch<S>,
}

impl<S: Scalar> Program<S> {
    /// Builds and validates.
    pub fn new(p: usize, q: usize, preds: Vec<Vec<usize>>, funcs: Vec<SelectionFunction<S>>) -> Result<Self> {
        let prog = Self::unchecked(p, q, preds, funcs);
        let v = prog.validate();
        if v.is_empty() {
            Ok(prog)
        } else {
            let msgs: Vec<String> = v.iter().map(ToString::to_string).collect();
            Err(Error::InvalidProgram(msgs.join("; ")))
        }
    }

    /// Builds without validation; [`Program::validate`] reports the problems.
    pub fn unchecked(p: usize, q: usize, preds: Vec<Vec<usize>>, funcs: Vec<SelectionFunction<S>>) -> Self {
        Self { p, q, relation: PredecessorRelation::new(preds), funcs }
    }

    pub fn input_dim(&self) -> usize {
        self.p
    }

    pub fn output_dim(&self) -> usize {
        self.q
    }

    pub fn node_count(&self) -> usize {
        self.relation.node_count()
    }

    pub fn relation(&self) -> &PredecessorRelation {
        &self.relation
    }

    pub fn preds(&self, k: usize) -> &[usize] {
        self.relation.of(k)
    }

    /// `g_k` for a computed node `k >= p`.
    pub fn func(&self, k: usize) -> &SelectionFunction<S> {
        &self.funcs[k - self.p]
    }

    pub fn output_nodes(&self) -> std::ops::Range<usize> {
        let m = self.node_count();
        m - self.q..m
    }

    /// Every violated invariant, in node order.
    pub fn validate(&self) -> Vec<Violation> {
        let (p, q, m) = (self.p, self.q, self.node_count());
        let mut out = Vec::new();
        if p == 0 {
            out.push(Violation::NoInputs);
        }
        if q == 0 {
            out.push(Violation::NoOutputs);
        }
        if m < p + q {
            out.push(Violation::TooFewNodes { m, p, q });
        }
        if self.funcs.len() + p != m {
            out.push(Violation::NodeCount { expected: m.saturating_sub(p), got: self.funcs.len() });
        }
        for (node, pr) in self.relation.iter().enumerate() {
            if node < p {
                if !pr.is_empty() {
                    out.push(Violation::InputHasPredecessors { node });
                }
                continue;
            }
            if pr.is_empty() {
                out.push(Violation::EmptyPredecessors { node });
            }
            for (i, &pred) in pr.iter().enumerate() {
                if pred >= node {
                    out.push(Violation::NotEarlier { node, pred });
                }
                if pr[..i].contains(&pred) {
                    out.push(Violation::DuplicatePredecessor { node, pred });
                }
            }
            if let Some(g) = self.funcs.get(node - p) {
                if g.arity() != pr.len() {
                    out.push(Violation::ArityMismatch { node, expected: pr.len(), got: g.arity() });
                }
            }
        }
        out
    }

    /// Runs the program, returning outputs and the full trace.
    pub fn evaluate(&self, x: &[S]) -> Result<(Vec<S>, EvalTrace<S>)> {
        let mut trace = EvalTrace::empty();
        self.evaluate_into(x, &mut trace, &mut Workspace::default())?;
        let y = trace.values[self.output_nodes()].to_vec();
        Ok((y, trace))
    }

    /// Outputs only.
    pub fn call(&self, x: &[S]) -> Result<Vec<S>> {
        Ok(self.evaluate(x)?.0)
    }

    /// Single-output convenience.
    pub fn call1(&self, x: &[S]) -> Result<S> {
        let y = self.call(x)?;
        Ok(y[y.len() - 1])
    }

    /// Forward sweep into caller-owned buffers.
    pub fn evaluate_into(&self, x: &[S], trace: &mut EvalTrace<S>, ws: &mut Workspace<S>) -> Result<()> {
        if x.len() != self.p {
            return Err(Error::Dimension { expected: self.p, got: x.len() });
        }
        let m = self.node_count();
        trace.p = self.p;
        trace.values.clear();
        trace.values.extend_from_slice(x);
        trace.grad_start.clear();
        trace.grad_start.push(0);
        trace.grads.clear();
        trace.branches.clear();
        for k in self.p..m {
            let pr = self.relation.of(k);
            ws.args.clear();
            ws.args.extend(pr.iter().map(|&j| trace.values[j]));
            let start = trace.grads.len();
            trace.grads.resize(start + pr.len(), S::zero());
            let (branch, v) = self
                .funcs[k - self.p]
                .value_grad_with(&ws.args, &mut ws.sel, &mut trace.grads[start..])
                .map_err(|e| match e {
                    Error::Domain(fault) => Error::NodeDomain { node: k, fault },
                    Error::NotTotal { .. } => Error::NodeNotTotal { node: k },
                    other => other,
                })?;
            trace.values.push(v);
            trace.branches.push(branch);
            trace.grad_start.push(trace.grads.len());
        }
        Ok(())
    }

    /// The input-output map of the program.
    pub fn function_of(&self) -> impl Fn(&[S]) -> Result<Vec<S>> + '_ {
        move |x| self.call(x)
    }

    /// Composes every node into a single selection map over the inputs.
    ///
    /// Each node's representation is the composition of its function with
    /// its predecessors' representations, so the branch count grows
    /// multiplicatively; `cap` bounds every intermediate refinement.
    pub fn to_selection_map(&self, cap: usize) -> Result<SelectionMap<S>> {
        let p = self.p;
        let mut reps: Vec<SelectionFunction<S>> = (0..p)
            .map(|i| SelectionFunction::smooth(ElementaryExpr::var(p, i)))
            .collect();
        for k in p..self.node_count() {
            let inner: Vec<_> = self.preds(k).iter().map(|&j| reps[j].clone()).collect();
            reps.push(SelectionFunction::compose(self.func(k), &inner, cap)?);
        }
        let outs: Vec<_> = self.output_nodes().map(|k| reps[k].clone()).collect();
        SelectionMap::stack(&outs, cap)
    }

    /// Scalar-output composition, see [`Program::to_selection_map`].
    pub fn to_selection(&self, cap: usize) -> Result<SelectionFunction<S>> {
        if self.q != 1 {
            return Err(Error::Dimension { expected: 1, got: self.q });
        }
        SelectionFunction::from_map(self.to_selection_map(cap)?)
    }

    /// The program computing `(1/n) sum_i P_i(x)` for scalar programs sharing
    /// an input dimension.
    pub fn mean(parts: &[Program<S>]) -> Result<Self> {
        let first = parts.first().ok_or_else(|| Error::Invalid("mean of no programs".into()))?;
        let p = first.p;
        let mut b = ProgramBuilder::new(p);
        let mut outs = Vec::with_capacity(parts.len());
        for part in parts {
            if part.p != p || part.q != 1 {
                return Err(Error::Invalid("mean needs scalar programs with equal input dimension".into()));
            }
            let ids = b.append(part, &(0..p).collect::<Vec<_>>());
            outs.push(ids[part.node_count() - 1]);
        }
        let w = S::one() / S::lit(parts.len() as f64);
        let node = b.push(
            SelectionFunction::smooth(ElementaryExpr::affine(vec![w; outs.len()], S::zero())),
            &outs,
        );
        b.finish(&[node])
    }

    pub fn cast<T: Scalar>(&self) -> Program<T> {
        Program {
            p: self.p,
            q: self.q,
            relation: self.relation.clone(),
            funcs: self.funcs.iter().map(SelectionFunction::cast).collect(),
        }
    }

    pub fn to_doc(&self) -> ProgramDoc {
        ProgramDoc {
            schema_version: PROGRAM_SCHEMA_VERSION,
            p: self.p,
            q: self.q,
            m: self.node_count(),
            pr: self.relation.preds.clone(),
            nodes: self
                .funcs
                .iter()
                .enumerate()
                .map(|(i, g)| NodeDoc { id: self.p + i, selection: text::selection_to_text(g.as_map()) })
                .collect(),
        }
    }

    pub fn from_doc(doc: &ProgramDoc) -> Result<Self> {
        if doc.schema_version != PROGRAM_SCHEMA_VERSION {
            return Err(Error::Invalid(format!("unsupported schema_version {}", doc.schema_version)));
        }
        if doc.pr.len() != doc.m {
            return Err(Error::Invalid(format!("pr has {} entries, m = {}", doc.pr.len(), doc.m)));
        }
        let mut funcs = Vec::with_capacity(doc.nodes.len());
        for n in &doc.nodes {
            let arity = doc
                .pr
                .get(n.id)
                .ok_or_else(|| Error::Invalid(format!("node id {} out of range", n.id)))?
                .len();
            funcs.push(text::parse_selection(&n.selection, arity)?);
        }
        Self::new(doc.p, doc.q, doc.pr.clone(), funcs)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_doc()).expect("program document serializes")
    }

    pub fn from_json(src: &str) -> Result<Self> {
        let doc: ProgramDoc = serde_json::from_str(src).map_err(|e| Error::Parse(e.to_string()))?;
        Self::from_doc(&doc)
    }
}

pub const PROGRAM_SCHEMA_VERSION: u32 = 1;

/// On-disk form of a program.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProgramDoc {
    pub schema_version: u32,
    pub p: usize,
    pub q: usize,
    pub m: usize,
    pub pr: Vec<Vec<usize>>,
    pub nodes: Vec<NodeDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeDoc {
    pub id: usize,
    pub selection: String,
}

/// Incremental construction of programs in topological order.
#[derive(Debug, Clone)]
pub struct ProgramBuilder<S> {
    p: usize,
    preds: Vec<Vec<usize>>,
    funcs: Vec<SelectionFunction<S>>,
}

impl<S: Scalar> ProgramBuilder<S> {
    pub fn new(p: usize) -> Self {
        Self { p, preds: vec![Vec::new(); p], funcs: Vec::new() }
    }

    /// Starts from all nodes of an existing program.
    pub fn from_program(prog: &Program<S>) -> Self {
        Self { p: prog.p, preds: prog.relation.preds.clone(), funcs: prog.funcs.clone() }
    }

    pub fn input(&self, i: usize) -> usize {
        assert!(i < self.p);
        i
    }

    pub fn len(&self) -> usize {
        self.preds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.preds.is_empty()
    }

    /// Adds node `g(x_{preds})` and returns its id.
    pub fn push(&mut self, g: SelectionFunction<S>, preds: &[usize]) -> usize {
        assert_eq!(g.arity(), preds.len(), "node arity must match its predecessor count");
        self.preds.push(preds.to_vec());
        self.funcs.push(g);
        self.preds.len() - 1
    }

    /// Inlines every computed node of `prog`, feeding its inputs from
    /// `inputs`. Returns the new id of each of `prog`'s nodes.
    pub fn append(&mut self, prog: &Program<S>, inputs: &[usize]) -> Vec<usize> {
        assert_eq!(inputs.len(), prog.p);
        let mut ids = inputs.to_vec();
        for k in prog.p..prog.node_count() {
            let pr: Vec<usize> = prog.preds(k).iter().map(|&j| ids[j]).collect();
            ids.push(self.push(prog.func(k).clone(), &pr));
        }
        ids
    }

    /// Finishes with the given output nodes. Outputs that are not already the
    /// trailing nodes, in order, are copied into fresh identity nodes.
    pub fn finish(mut self, outputs: &[usize]) -> Result<Program<S>> {
        let m = self.preds.len();
        let q = outputs.len();
        let trailing = q <= m
            && outputs.iter().enumerate().all(|(i, &o)| o == m - q + i)
            && outputs.iter().all(|&o| o >= self.p);
        if !trailing {
            for &o in outputs {
                self.push(SelectionFunction::smooth(ElementaryExpr::var(1, 0)), &[o]);
            }
        }
        Program::new(self.p, q, self.preds, self.funcs)
    }
}
