//! The set-valued field built from every branch active at a point, its
//! minimum-norm criticality test, sampled Clarke subgradients, and the
//! three-way classification of critical points.

use std::collections::HashMap;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::autodiff::backward_into;
use crate::error::{check_dim, Error, Result};
use crate::expr::Scratch;
use crate::minnorm::{hull_distance, min_norm_point};
use crate::program::Program;
use crate::scalar::{max_abs_diff, norm, Scalar};
use crate::selection::{SelectionFunction, SelectionMap};

/// Default relative activity tolerance: a branch is active when
/// `|f_i(x) - f(x)| <= rel * (1 + |f(x)|)`.
pub const DEFAULT_TOL_ACTIVE: f64 = 1e-9;
/// Enumeration cap on branch assignments.
pub const DEFAULT_ASSIGNMENT_CAP: usize = 100_000;
pub const DEFAULT_TOL_D: f64 = 1e-8;
pub const DEFAULT_TOL_C: f64 = 1e-3;

/// Scalar piecewise-smooth function with a branch structure.
pub trait Piecewise<S: Scalar>: Sync {
    fn dim(&self) -> usize;

    fn value(&self, x: &[S]) -> Result<S>;

    /// Value and the gradient that frozen-branch AD returns.
    fn value_and_gradient(&self, x: &[S]) -> Result<(S, Vec<S>)>;

    /// Branch choices along the evaluation, written into `out`.
    fn signature(&self, x: &[S], out: &mut Vec<usize>) -> Result<()>;

    /// Generators of the field at `x`.
    fn active_generators(&self, x: &[S], tol_rel: S) -> Result<SetValuedGradient<S>>;
}

/// `conv(generators)` at `point`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SetValuedGradient<S> {
    pub point: Vec<S>,
    pub value: S,
    /// Generator vectors; for vector-valued maps each is a row-major Jacobian.
    pub generators: Vec<Vec<S>>,
    /// `(rows, cols)` of each generator.
    pub shape: (usize, usize),
    /// Branch assignment that produced each generator (one id per node for
    /// programs, a single id for selections).
    pub active: Vec<Vec<usize>>,
    /// Index into `generators` of the frozen-branch AD gradient.
    pub selection_index: usize,
    pub tol_active: S,
    pub assignments_enumerated: usize,
    pub truncated: bool,
}

impl<S: Scalar> SetValuedGradient<S> {
    pub fn len(&self) -> usize {
        self.generators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.generators.is_empty()
    }

    pub fn selection_gradient(&self) -> &[S] {
        &self.generators[self.selection_index]
    }

    /// Whether `v` is one of the generators, compared bit for bit.
    pub fn contains(&self, v: &[S]) -> bool {
        self.generators.iter().any(|g| g.as_slice() == v)
    }
}

fn bits_key<S: Scalar>(v: &[S]) -> Vec<u64> {
    v.iter().map(|x| x.to_f64_lossy().to_bits()).collect()
}

fn is_active<S: Scalar>(candidate: S, reference: S, tol_rel: S) -> bool {
    (candidate - reference).abs() <= tol_rel * (S::one() + reference.abs())
}

impl<S: Scalar> Piecewise<S> for SelectionFunction<S> {
    fn dim(&self) -> usize {
        self.arity()
    }

    fn value(&self, x: &[S]) -> Result<S> {
        self.eval(x)
    }

    fn value_and_gradient(&self, x: &[S]) -> Result<(S, Vec<S>)> {
        let i = self.index_of(x)?;
        self.branch(i).value_and_grad(x)
    }

    fn signature(&self, x: &[S], out: &mut Vec<usize>) -> Result<()> {
        out.clear();
        out.push(self.index_of(x)?);
        Ok(())
    }

    fn active_generators(&self, x: &[S], tol_rel: S) -> Result<SetValuedGradient<S>> {
        let map = self.as_map();
        let mut field = active_jacobians(map, x, tol_rel)?;
        field.shape = (1, self.arity());
        Ok(field)
    }
}

/// Generators for a vector-valued selection: Jacobians of every branch whose
/// value matches the selected one in each output coordinate.
pub fn active_jacobians<S: Scalar>(map: &SelectionMap<S>, x: &[S], tol_rel: S) -> Result<SetValuedGradient<S>> {
    check_dim(map.arity(), x.len())?;
    let sel = map.index_of(x)?;
    let f = map.branch_value(sel, x)?;
    let mut order: Vec<usize> = vec![sel];
    order.extend((0..map.branch_count()).filter(|&i| i != sel));
    let mut seen = HashMap::new();
    let mut generators = Vec::new();
    let mut active = Vec::new();
    for i in order {
        let vals = match map.branch_value(i, x) {
            Ok(v) => v,
            Err(Error::Domain(_)) => continue,
            Err(e) => return Err(e),
        };
        if !vals.iter().zip(&f).all(|(&v, &r)| is_active(v, r, tol_rel)) {
            continue;
        }
        let jac = map.branch_jacobian(i, x)?.into_vec();
        if seen.insert(bits_key(&jac), generators.len()).is_none() {
            generators.push(jac);
            active.push(vec![i]);
        }
    }
    Ok(SetValuedGradient {
        point: x.to_vec(),
        value: f[f.len() - 1],
        generators,
        shape: (map.outputs(), map.arity()),
        active,
        selection_index: 0,
        tol_active: tol_rel,
        assignments_enumerated: map.branch_count(),
        truncated: false,
    })
}

impl<S: Scalar> Piecewise<S> for Program<S> {
    fn dim(&self) -> usize {
        self.input_dim()
    }

    fn value(&self, x: &[S]) -> Result<S> {
        self.call1(x)
    }

    fn value_and_gradient(&self, x: &[S]) -> Result<(S, Vec<S>)> {
        let (y, trace) = self.evaluate(x)?;
        let mut v = Vec::new();
        backward_into(self, &trace, self.node_count() - 1, &mut v);
        v.truncate(self.input_dim());
        Ok((y[y.len() - 1], v))
    }

    fn signature(&self, x: &[S], out: &mut Vec<usize>) -> Result<()> {
        let (_, trace) = self.evaluate(x)?;
        out.clear();
        out.extend_from_slice(trace.branches());
        Ok(())
    }

    fn active_generators(&self, x: &[S], tol_rel: S) -> Result<SetValuedGradient<S>> {
        program_generators(self, x, tol_rel, DEFAULT_ASSIGNMENT_CAP)
    }
}

/// Per-node branch options for a program at a traced point.
struct NodeOptions<S> {
    /// Distinct local gradients of active branches; the traced branch first.
    grads: Vec<Vec<S>>,
    branch_ids: Vec<usize>,
}

/// Enumerates branch assignments node by node.
///
/// Every node is fed the true values of its predecessors, and a branch
/// survives only if its value there matches the true node value, so the
/// enumeration prunes at each node before combining. Branches with the
/// same local gradient are merged, and only nodes the output depends on are
/// varied. Generators are the chain-rule products for each surviving
/// assignment, deduplicated bit for bit; at most `cap` assignments are
/// visited.
pub fn program_generators<S: Scalar>(
    prog: &Program<S>,
    x: &[S],
    tol_rel: S,
    cap: usize,
) -> Result<SetValuedGradient<S>> {
    if prog.output_dim() != 1 {
        return Err(Error::Dimension { expected: 1, got: prog.output_dim() });
    }
    let (y, trace) = prog.evaluate(x)?;
    let (p, m) = (prog.input_dim(), prog.node_count());
    let out = m - 1;

    let mut relevant = vec![false; m];
    relevant[out] = true;
    for k in (p..m).rev() {
        if relevant[k] {
            for &j in prog.preds(k) {
                relevant[j] = true;
            }
        }
    }

    let mut scratch = Scratch::default();
    let mut args = Vec::new();
    let mut options: Vec<NodeOptions<S>> = Vec::with_capacity(m - p);
    for k in p..m {
        let traced = trace.branch(k).expect("computed node");
        let mut opt = NodeOptions { grads: vec![trace.local_grad(k).to_vec()], branch_ids: vec![traced] };
        if relevant[k] {
            args.clear();
            args.extend(prog.preds(k).iter().map(|&j| trace.value(j)));
            let g = prog.func(k);
            let xk = trace.value(k);
            for b in (0..g.branch_count()).filter(|&b| b != traced) {
                let mut grad = vec![S::zero(); args.len()];
                let v = match g.branch(b).grad_into(&args, &mut scratch, &mut grad) {
                    Ok(v) => v,
                    Err(Error::Domain(_)) => continue,
                    Err(e) => return Err(e),
                };
                if is_active(v, xk, tol_rel) && !opt.grads.contains(&grad) {
                    opt.grads.push(grad);
                    opt.branch_ids.push(b);
                }
            }
        }
        options.push(opt);
    }

    let total = options
        .iter()
        .try_fold(1usize, |acc, o| acc.checked_mul(o.grads.len()))
        .unwrap_or(usize::MAX);
    let truncated = total > cap;
    let visits = total.min(cap);

    let mut choice = vec![0usize; m - p];
    let mut v = vec![S::zero(); m];
    let mut seen = HashMap::new();
    let mut generators = Vec::new();
    let mut active = Vec::new();
    for _ in 0..visits {
        v.iter_mut().for_each(|e| *e = S::zero());
        v[out] = S::one();
        for t in (p..m).rev() {
            let vt = v[t];
            if vt == S::zero() {
                continue;
            }
            let d = &options[t - p].grads[choice[t - p]];
            for (&j, &dj) in prog.preds(t).iter().zip(d) {
                v[j] = v[j] + vt * dj;
            }
        }
        let g = v[..p].to_vec();
        if seen.insert(bits_key(&g), generators.len()).is_none() {
            generators.push(g);
            active.push(choice.iter().zip(&options).map(|(&c, o)| o.branch_ids[c]).collect());
        }
        // odometer over nodes with several options
        for (c, o) in choice.iter_mut().zip(&options) {
            *c += 1;
            if *c < o.grads.len() {
                break;
            }
            *c = 0;
        }
    }

    Ok(SetValuedGradient {
        point: x.to_vec(),
        value: y[0],
        generators,
        shape: (1, p),
        active,
        selection_index: 0,
        tol_active: tol_rel,
        assignments_enumerated: visits,
        truncated,
    })
}

/// Gradients at certified differentiability points sampled near a center.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClarkeCloud<S> {
    pub center: Vec<S>,
    pub radius: S,
    pub requested: usize,
    pub gradients: Vec<Vec<S>>,
    pub rejected: usize,
    /// At least 10 samples were certified.
    pub sufficient: bool,
}

pub const MIN_CERTIFIED_SAMPLES: usize = 10;

/// Central difference step used for differentiability certificates.
pub fn fd_step<S: Scalar>() -> S {
    let c = S::epsilon().cbrt();
    if c < S::lit(1e-5) {
        S::lit(1e-6)
    } else {
        c
    }
}

/// Relative tolerance for gradient-vs-difference agreement.
pub fn fd_tol<S: Scalar>() -> S {
    S::lit(1e-5).max(S::epsilon().sqrt() * S::lit(10.0))
}

/// Central finite differences of `f` at `x` with step `h`.
pub fn central_difference<S: Scalar, F: Piecewise<S> + ?Sized>(f: &F, x: &[S], h: S) -> Result<Vec<S>> {
    let mut probe = x.to_vec();
    let two_h = h + h;
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + h;
            let up = f.value(&probe)?;
            probe[i] = x[i] - h;
            let down = f.value(&probe)?;
            probe[i] = x[i];
            Ok((up - down) / two_h)
        })
        .collect()
}

/// Whether the AD gradient `g` agrees with finite differences `fd`.
pub fn gradients_agree<S: Scalar>(g: &[S], fd: &[S]) -> bool {
    let tol = fd_tol::<S>();
    g.iter().zip(fd).all(|(&a, &b)| (a - b).abs() <= tol * (S::one() + a.abs()))
}

/// Uniform point in the Euclidean ball.
pub fn sample_ball<S: Scalar, R: Rng + ?Sized>(rng: &mut R, center: &[S], radius: S) -> Vec<S> {
    let p = center.len();
    let dir: Vec<f64> = (0..p).map(|_| rng.sample(StandardNormal)).collect();
    let len = dir.iter().map(|d| d * d).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    let r = rng.random::<f64>().powf(1.0 / p as f64);
    center
        .iter()
        .zip(&dir)
        .map(|(&c, &d)| c + radius * S::lit(r * d / len))
        .collect()
}

/// Samples `n` points in the `radius`-ball around `x` and keeps the
/// gradients of those where AD agrees with central differences.
pub fn clarke_sample<S: Scalar, F: Piecewise<S> + ?Sized, R: Rng + ?Sized>(
    f: &F,
    x: &[S],
    radius: S,
    n: usize,
    rng: &mut R,
) -> Result<ClarkeCloud<S>> {
    if !(radius > S::zero()) {
        return Err(Error::Invalid("sampling radius must be positive".into()));
    }
    check_dim(f.dim(), x.len())?;
    let h = fd_step::<S>().min(radius / S::lit(10.0));
    let mut gradients = Vec::new();
    let mut rejected = 0;
    for _ in 0..n {
        let z = sample_ball(rng, x, radius);
        let certified = f
            .value_and_gradient(&z)
            .and_then(|(_, g)| Ok((central_difference(f, &z, h)?, g)))
            .ok()
            .filter(|(fd, g)| gradients_agree(g, fd));
        match certified {
            Some((_, g)) => gradients.push(g),
            None => rejected += 1,
        }
    }
    let sufficient = gradients.len() >= MIN_CERTIFIED_SAMPLES;
    Ok(ClarkeCloud { center: x.to_vec(), radius, requested: n, gradients, rejected, sufficient })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Criticality {
    NonCritical,
    ClarkeCritical,
    ArtificialCritical,
}

impl std::fmt::Display for Criticality {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Criticality::NonCritical => "non-critical",
            Criticality::ClarkeCritical => "clarke-critical",
            Criticality::ArtificialCritical => "artificial-critical",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifyOptions<S> {
    pub tol_d: S,
    pub tol_c: S,
    pub tol_active: S,
    pub radius: S,
    pub samples: usize,
    pub seed: u64,
}

impl<S: Scalar> Default for ClassifyOptions<S> {
    fn default() -> Self {
        Self {
            tol_d: S::lit(DEFAULT_TOL_D),
            tol_c: S::lit(DEFAULT_TOL_C),
            tol_active: S::lit(DEFAULT_TOL_ACTIVE),
            radius: S::lit(1e-3),
            samples: 200,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriticalityReport<S> {
    pub point: Vec<S>,
    pub value: S,
    pub classification: Criticality,
    /// Distance from 0 to the convex hull of the active generators.
    pub d_distance: S,
    pub d_weights: Vec<S>,
    pub d_generators: Vec<Vec<S>>,
    pub d_truncated: bool,
    /// Distance from 0 to the convex hull of the sampled Clarke cloud.
    pub clarke_distance: S,
    pub clarke_weights: Vec<S>,
    pub clarke_radius: S,
    pub clarke_requested: usize,
    pub clarke_certified: usize,
    pub clarke_sufficient: bool,
    pub tol_d: S,
    pub tol_c: S,
    pub tol_active: S,
}

impl<S: Scalar> CriticalityReport<S> {
    /// `0` lies in the field up to `tol_d`.
    pub fn selection_critical(&self) -> bool {
        self.d_distance <= self.tol_d
    }
}

/// Classifies `x` from the minimum-norm points of the field and of a
/// sampled Clarke cloud.
pub fn classify<S: Scalar, F: Piecewise<S> + ?Sized>(
    f: &F,
    x: &[S],
    opts: &ClassifyOptions<S>,
) -> Result<CriticalityReport<S>> {
    use rand::SeedableRng;
    let field = f.active_generators(x, opts.tol_active)?;
    let d = min_norm_point(&field.generators);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(opts.seed);
    let cloud = clarke_sample(f, x, opts.radius, opts.samples, &mut rng)?;
    let (clarke_distance, clarke_weights) = if cloud.gradients.is_empty() {
        (S::infinity(), Vec::new())
    } else {
        let c = min_norm_point(&cloud.gradients);
        (c.norm, c.weights)
    };
    let classification = if d.norm > opts.tol_d {
        Criticality::NonCritical
    } else if clarke_distance <= opts.tol_c {
        Criticality::ClarkeCritical
    } else {
        Criticality::ArtificialCritical
    };
    Ok(CriticalityReport {
        point: x.to_vec(),
        value: field.value,
        classification,
        d_distance: d.norm,
        d_weights: d.weights,
        d_generators: field.generators,
        d_truncated: field.truncated,
        clarke_distance,
        clarke_weights,
        clarke_radius: opts.radius,
        clarke_requested: cloud.requested,
        clarke_certified: cloud.gradients.len(),
        clarke_sufficient: cloud.sufficient,
        tol_d: opts.tol_d,
        tol_c: opts.tol_c,
        tol_active: opts.tol_active,
    })
}

/// How a sequence approaching `x̄` is generated.
#[derive(Debug, Clone, PartialEq)]
pub enum SequenceSpec<S> {
    /// `x_k = x̄ + direction / k`, `k = 1..=count`.
    Harmonic { direction: Vec<S>, count: usize },
    /// `x_k = x̄ + direction · 2^{-k}`, `k = 1..=count`.
    Geometric { direction: Vec<S>, count: usize },
    Explicit(Vec<Vec<S>>),
}

impl<S: Scalar> SequenceSpec<S> {
    pub fn points(&self, center: &[S]) -> Vec<Vec<S>> {
        let along = |d: &[S], scale: S| center.iter().zip(d).map(|(&c, &di)| c + di * scale).collect();
        match self {
            SequenceSpec::Harmonic { direction, count } => {
                (1..=*count).map(|k| along(direction, S::one() / S::lit(k as f64))).collect()
            }
            SequenceSpec::Geometric { direction, count } => {
                (1..=*count).map(|k| along(direction, S::lit(0.5f64.powi(k as i32)))).collect()
            }
            SequenceSpec::Explicit(points) => points.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeReport<S> {
    pub center: Vec<S>,
    /// Limit estimate: the last two gradients extrapolated linearly in the
    /// distance to the center when both lie on the same piece.
    pub limit: Vec<S>,
    /// Gradient at the last point of the sequence.
    pub last: Vec<S>,
    /// Largest change between the last two sequence gradients.
    pub tail_change: S,
    /// Distance from the limit to the convex hull of the field at the center.
    pub distance: S,
    pub generators: usize,
}

/// Follows AD gradients along a sequence converging to `center` and measures
/// how far their limit lies from the field at `center`.
pub fn closed_graph_probe<S: Scalar, F: Piecewise<S> + ?Sized>(
    f: &F,
    center: &[S],
    seq: &SequenceSpec<S>,
    tol_active: S,
) -> Result<ProbeReport<S>> {
    let points = seq.points(center);
    if points.is_empty() {
        return Err(Error::Invalid("empty sequence".into()));
    }
    let grads = points
        .iter()
        .map(|x| f.value_and_gradient(x).map(|(_, g)| g))
        .collect::<Result<Vec<_>>>()?;
    let n = grads.len();
    let last = grads[n - 1].clone();
    let tail_change = if n > 1 { max_abs_diff(&grads[n - 2], &last) } else { S::zero() };
    let limit = if n > 1 { extrapolate(f, center, &points[n - 2..], &grads[n - 2..])? } else { last.clone() };
    let field = f.active_generators(center, tol_active)?;
    let distance = hull_distance(&limit, &field.generators);
    Ok(ProbeReport { center: center.to_vec(), limit, last, tail_change, distance, generators: field.len() })
}

fn extrapolate<S: Scalar, F: Piecewise<S> + ?Sized>(f: &F, center: &[S], pts: &[Vec<S>], grads: &[Vec<S>]) -> Result<Vec<S>> {
    let (mut s1, mut s2) = (Vec::new(), Vec::new());
    f.signature(&pts[0], &mut s1)?;
    f.signature(&pts[1], &mut s2)?;
    let dist = |p: &[S]| norm(&p.iter().zip(center).map(|(&a, &b)| a - b).collect::<Vec<_>>());
    let (t1, t2) = (dist(&pts[0]), dist(&pts[1]));
    if s1 != s2 || !(t1 > t2) {
        return Ok(grads[1].clone());
    }
    let w = t2 / (t1 - t2);
    Ok(grads[1].iter().zip(&grads[0]).map(|(&b, &a)| b + (b - a) * w).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::selection::prims;

    fn tol() -> f64 {
        DEFAULT_TOL_ACTIVE
    }

    #[test]
    fn relu_field() {
        let r = prims::relu::<f64>();
        let at0 = r.active_generators(&[0.0], tol()).unwrap();
        assert_eq!(at0.generators, vec![vec![0.0], vec![1.0]]);
        assert_eq!(at0.selection_gradient(), &[0.0]);
        assert_eq!(r.active_generators(&[2.0], tol()).unwrap().generators, vec![vec![1.0]]);
        let prog = fixtures::relu_program::<f64>();
        let pf = prog.active_generators(&[0.0], tol()).unwrap();
        assert_eq!(pf.generators, vec![vec![0.0], vec![1.0]]);
    }

    #[test]
    fn sort_field_at_tie() {
        let s = prims::sort2::<f64>();
        let tie = active_jacobians(&s, &[1.0, 1.0], tol()).unwrap();
        assert_eq!(tie.len(), 2);
        assert!(tie.contains(&[1.0, 0.0, 0.0, 1.0]) && tie.contains(&[0.0, 1.0, 1.0, 0.0]));
        assert_eq!(active_jacobians(&s, &[2.0, 1.0], tol()).unwrap().len(), 1);
    }

    #[test]
    fn artefact_field_contains_zero() {
        let p = fixtures::identity_minus_zero_program::<f64>();
        let f = p.active_generators(&[0.0], tol()).unwrap();
        let mut g: Vec<f64> = f.generators.iter().map(|v| v[0]).collect();
        g.sort_by(f64::total_cmp);
        assert_eq!(g, vec![0.0, 1.0, 2.0]);
        assert_eq!(f.selection_gradient(), &[0.0]);
    }

    #[test]
    fn classification_examples() {
        let opts = ClassifyOptions::default();
        let relu = fixtures::relu_program::<f64>();
        assert_eq!(classify(&relu, &[0.0], &opts).unwrap().classification, Criticality::ClarkeCritical);
        let art = fixtures::identity_minus_zero_program::<f64>();
        let rep = classify(&art, &[0.0], &opts).unwrap();
        assert_eq!(rep.classification, Criticality::ArtificialCritical);
        assert!(rep.clarke_sufficient);
        let sq = fixtures::square_program::<f64>();
        assert_eq!(classify(&sq, &[3.0], &opts).unwrap().classification, Criticality::NonCritical);
    }

    #[test]
    fn clarke_clouds() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let relu = fixtures::relu_program::<f64>();
        let c = clarke_sample(&relu, &[0.0], 1e-3, 200, &mut rng).unwrap();
        assert!(c.gradients.iter().all(|g| g[0] == 0.0 || g[0] == 1.0));
        assert!(c.gradients.iter().any(|g| g[0] == 0.0) && c.gradients.iter().any(|g| g[0] == 1.0));
        let art = fixtures::identity_minus_zero_program::<f64>();
        let c = clarke_sample(&art, &[0.0], 1e-3, 200, &mut rng).unwrap();
        assert!(c.gradients.iter().all(|g| g[0] == 1.0));
        let sq = fixtures::square_program::<f64>();
        let c = clarke_sample(&sq, &[1.0], 1e-4, 200, &mut rng).unwrap();
        assert!(c.gradients.iter().all(|g| (g[0] - 2.0).abs() <= 1e-3));
        assert!(clarke_sample(&sq, &[1.0], 0.0, 10, &mut rng).is_err());
    }

    #[test]
    fn probe_relu_sequences() {
        let relu = fixtures::relu_program::<f64>();
        for dir in [1.0, -1.0] {
            let seq = SequenceSpec::Harmonic { direction: vec![dir], count: 50 };
            let r = closed_graph_probe(&relu, &[0.0], &seq, tol()).unwrap();
            assert_eq!(r.distance, 0.0);
        }
    }

    #[test]
    fn truncation_flag() {
        let p = fixtures::relu_chain::<f64>(10);
        let full = program_generators(&p, &[0.0], tol(), DEFAULT_ASSIGNMENT_CAP).unwrap();
        assert!(!full.truncated);
        let cut = program_generators(&p, &[0.0], tol(), 4).unwrap();
        assert!(cut.truncated);
        assert_eq!(cut.assignments_enumerated, 4);
    }
}
