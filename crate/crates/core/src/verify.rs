//! Numerical checks of the integral and differential identities satisfied by
//! selection gradients: exact integration along segments and polylines,
//! rule independence of path integrals, the selection chain rule, and
//! almost-everywhere agreement with the classical gradient.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::minnorm::min_norm_point;
use crate::quadrature::gl16_on;
use crate::scalar::{dot, inf_norm, Scalar};
use crate::selection::{SelectionFunction, SelectionMap};
use crate::setfield::{central_difference, fd_step, gradients_agree, Piecewise, DEFAULT_TOL_ACTIVE};

/// Scan resolution for switch detection along a segment.
pub const SCAN_STEPS: usize = 1024;
/// Parameter accuracy of bisected switch points.
pub const SWITCH_TOL: f64 = 1e-12;
/// Above this many switches on one segment the fixture is reported as
/// pathological.
pub const MAX_SWITCHES: usize = 10_000;
const MAX_SPLIT_DEPTH: usize = 40;

/// Piecewise-linear curve `γ: [0, 1] -> R^p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewisePath<S> {
    breakpoints: Vec<S>,
    vertices: Vec<Vec<S>>,
}

impl<S: Scalar> PiecewisePath<S> {
    /// Path through `vertices` with equally spaced breakpoints.
    pub fn new(vertices: Vec<Vec<S>>) -> Result<Self> {
        let n = vertices.len();
        if n < 2 {
            return Err(Error::Invalid("a path needs at least two vertices".into()));
        }
        let breakpoints = (0..n).map(|i| S::lit(i as f64 / (n - 1) as f64)).collect();
        Self::with_breakpoints(breakpoints, vertices)
    }

    pub fn with_breakpoints(breakpoints: Vec<S>, vertices: Vec<Vec<S>>) -> Result<Self> {
        if vertices.len() < 2 || breakpoints.len() != vertices.len() {
            return Err(Error::Invalid("need N + 1 >= 2 vertices and as many breakpoints".into()));
        }
        let p = vertices[0].len();
        if vertices.iter().any(|v| v.len() != p) {
            return Err(Error::Invalid("vertices differ in dimension".into()));
        }
        let ok_ends = breakpoints[0] == S::zero() && breakpoints[breakpoints.len() - 1] == S::one();
        if !ok_ends || breakpoints.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Invalid("breakpoints must increase from 0 to 1".into()));
        }
        Ok(Self { breakpoints, vertices })
    }

    /// Straight segment from `a` to `b`.
    pub fn segment(a: Vec<S>, b: Vec<S>) -> Result<Self> {
        Self::new(vec![a, b])
    }

    pub fn dim(&self) -> usize {
        self.vertices[0].len()
    }

    pub fn segments(&self) -> usize {
        self.vertices.len() - 1
    }

    pub fn vertices(&self) -> &[Vec<S>] {
        &self.vertices
    }

    pub fn breakpoints(&self) -> &[S] {
        &self.breakpoints
    }

    pub fn start(&self) -> &[S] {
        &self.vertices[0]
    }

    pub fn end(&self) -> &[S] {
        &self.vertices[self.vertices.len() - 1]
    }

    pub fn is_closed(&self) -> bool {
        self.start() == self.end()
    }

    /// Indices of segments whose endpoints coincide.
    pub fn degenerate_segments(&self) -> Vec<usize> {
        (0..self.segments()).filter(|&i| self.vertices[i] == self.vertices[i + 1]).collect()
    }

    /// `self` followed by `other`; `other` must start where `self` ends.
    pub fn concat(&self, other: &Self) -> Result<Self> {
        if self.end() != other.start() {
            return Err(Error::Invalid("paths do not join".into()));
        }
        let mut v = self.vertices.clone();
        v.extend(other.vertices[1..].iter().cloned());
        Self::new(v)
    }

    pub fn point_at(&self, t: S) -> Vec<S> {
        let i = self.breakpoints.windows(2).position(|w| t <= w[1]).unwrap_or(self.segments() - 1);
        let (t0, t1) = (self.breakpoints[i], self.breakpoints[i + 1]);
        let s = (t - t0) / (t1 - t0);
        lerp(&self.vertices[i], &self.vertices[i + 1], s)
    }
}

fn lerp<S: Scalar>(a: &[S], b: &[S], t: S) -> Vec<S> {
    a.iter().zip(b).map(|(&x, &y)| x + t * (y - x)).collect()
}

/// How a vector is picked from the field at each quadrature node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectionRule {
    /// The frozen-branch AD gradient.
    SelectionGradient,
    /// Minimum-norm element of the field.
    MinNorm,
    /// A uniformly chosen generator.
    RandomVertex,
    /// Generator maximizing the inner product with the path direction.
    MaxInner,
    /// Generator minimizing the inner product with the path direction.
    MinInner,
}

impl SelectionRule {
    pub const ALL: [SelectionRule; 5] = [
        SelectionRule::SelectionGradient,
        SelectionRule::MinNorm,
        SelectionRule::RandomVertex,
        SelectionRule::MaxInner,
        SelectionRule::MinInner,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SelectionRule::SelectionGradient => "selection-gradient",
            SelectionRule::MinNorm => "min-norm",
            SelectionRule::RandomVertex => "random-vertex",
            SelectionRule::MaxInner => "max-inner",
            SelectionRule::MinInner => "min-inner",
        }
    }
}

impl fmt::Display for SelectionRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SelectionRule {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| Error::Invalid(format!("unknown selection rule `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuadratureReport<S> {
    pub rule: SelectionRule,
    pub estimate: S,
    /// `f(γ(1)) - f(γ(0))`.
    pub difference: S,
    pub residual: S,
    /// Number of smooth pieces integrated.
    pub subsegments: usize,
    /// Path parameters in `[0, 1]` where the branch signature changes.
    pub switches: Vec<S>,
    pub switch_overflow: bool,
}

impl<S: Scalar> QuadratureReport<S> {
    /// `residual <= tol * (1 + |difference|)`.
    pub fn passes(&self, tol: S) -> bool {
        self.residual <= tol * (S::one() + self.difference.abs())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SwitchScan<S> {
    /// Segment parameters in `[0, 1]`, ascending.
    pub switches: Vec<S>,
    pub overflow: bool,
}

/// Bisects `[lo, hi]` (signatures differ at the ends) down to `tol`.
fn bisect_switch<S: Scalar, F: Piecewise<S> + ?Sized>(
    f: &F,
    a: &[S],
    b: &[S],
    mut lo: S,
    mut hi: S,
    sig_lo: &[usize],
    buf: &mut Vec<usize>,
) -> Result<(S, S)> {
    let tol = S::lit(SWITCH_TOL).max(S::epsilon() * S::lit(4.0));
    while hi - lo > tol {
        let mid = (lo + hi) / S::lit(2.0);
        if !(mid > lo && mid < hi) {
            break;
        }
        f.signature(&lerp(a, b, mid), buf)?;
        if buf.as_slice() == sig_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo, hi))
}

/// Parameters on `[a, b]` where the branch signature changes: a scan at
/// resolution 1/1024 followed by bisection of each changing interval.
pub fn detect_switch_points<S: Scalar, F: Piecewise<S> + ?Sized>(f: &F, a: &[S], b: &[S]) -> Result<SwitchScan<S>> {
    check_dim(f.dim(), a.len())?;
    check_dim(f.dim(), b.len())?;
    let n = S::lit(SCAN_STEPS as f64);
    let mut prev = Vec::new();
    let mut cur = Vec::new();
    let mut buf = Vec::new();
    f.signature(a, &mut prev)?;
    let mut switches = Vec::new();
    let mut overflow = false;
    for i in 1..=SCAN_STEPS {
        let t = S::lit(i as f64) / n;
        f.signature(&lerp(a, b, t), &mut cur)?;
        if cur != prev {
            if switches.len() >= MAX_SWITCHES {
                overflow = true;
                break;
            }
            let t0 = S::lit((i - 1) as f64) / n;
            let (lo, hi) = bisect_switch(f, a, b, t0, t, &prev, &mut buf)?;
            switches.push((lo + hi) / S::lit(2.0));
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    Ok(SwitchScan { switches, overflow })
}

/// Picks the vector the rule prescribes at `z`.
fn pick<S: Scalar, F: Piecewise<S> + ?Sized>(
    f: &F,
    z: &[S],
    dir: &[S],
    rule: SelectionRule,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<S>> {
    if rule == SelectionRule::SelectionGradient {
        return Ok(f.value_and_gradient(z)?.1);
    }
    let field = f.active_generators(z, S::lit(DEFAULT_TOL_ACTIVE))?;
    let g = field.generators;
    let by_inner = |best: &mut usize, better: fn(S, S) -> bool| {
        for i in 1..g.len() {
            if better(dot(&g[i], dir), dot(&g[*best], dir)) {
                *best = i;
            }
        }
    };
    let mut best = 0;
    match rule {
        SelectionRule::SelectionGradient => unreachable!(),
        SelectionRule::MinNorm => return Ok(min_norm_point(&g).point),
        SelectionRule::RandomVertex => best = rng.random_range(0..g.len()),
        SelectionRule::MaxInner => by_inner(&mut best, |a, b| a > b),
        SelectionRule::MinInner => by_inner(&mut best, |a, b| a < b),
    }
    Ok(g[best].clone())
}

/// GL16 on `[t0, t1]` of segment `a -> b`, halving while the quadrature
/// nodes straddle a signature change the scan missed.
#[allow(clippy::too_many_arguments)]
fn integrate_piece<S: Scalar, F: Piecewise<S> + ?Sized>(
    f: &F,
    a: &[S],
    b: &[S],
    t0: S,
    t1: S,
    rule: SelectionRule,
    rng: &mut ChaCha8Rng,
    depth: usize,
    pieces: &mut usize,
) -> Result<S> {
    let dir: Vec<S> = a.iter().zip(b).map(|(&x, &y)| y - x).collect();
    let nodes: Vec<(S, S)> = gl16_on(t0, t1).collect();
    if depth < MAX_SPLIT_DEPTH {
        let mut first = Vec::new();
        let mut sig = Vec::new();
        f.signature(&lerp(a, b, nodes[0].0), &mut first)?;
        let mut uniform = true;
        for &(t, _) in &nodes[1..] {
            f.signature(&lerp(a, b, t), &mut sig)?;
            if sig != first {
                uniform = false;
                break;
            }
        }
        if !uniform {
            let mid = (t0 + t1) / S::lit(2.0);
            let left = integrate_piece(f, a, b, t0, mid, rule, rng, depth + 1, pieces)?;
            let right = integrate_piece(f, a, b, mid, t1, rule, rng, depth + 1, pieces)?;
            return Ok(left + right);
        }
    }
    *pieces += 1;
    let mut acc = S::zero();
    for (t, w) in nodes {
        let v = pick(f, &lerp(a, b, t), &dir, rule, rng)?;
        acc = acc + w * dot(&dir, &v);
    }
    Ok(acc)
}

/// Integrates `⟨γ'(t), v(γ(t))⟩` along `path` for each rule, where `v` is
/// chosen from the field by the rule. Switch points are detected once and
/// shared by every rule.
pub fn integrate_path_rules<S: Scalar, F: Piecewise<S> + ?Sized>(
    f: &F,
    path: &PiecewisePath<S>,
    rules: &[SelectionRule],
    seed: u64,
) -> Result<Vec<QuadratureReport<S>>> {
    check_dim(f.dim(), path.dim())?;
    let difference = f.value(path.end())? - f.value(path.start())?;
    let mut scans = Vec::with_capacity(path.segments());
    for s in 0..path.segments() {
        scans.push(detect_switch_points(f, &path.vertices[s], &path.vertices[s + 1])?);
    }
    let mut switches = Vec::new();
    let mut overflow = false;
    for (s, scan) in scans.iter().enumerate() {
        let (b0, b1) = (path.breakpoints[s], path.breakpoints[s + 1]);
        switches.extend(scan.switches.iter().map(|&t| b0 + t * (b1 - b0)));
        overflow |= scan.overflow;
    }

    let mut reports = Vec::with_capacity(rules.len());
    for &rule in rules {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut estimate = S::zero();
        let mut pieces = 0;
        for (s, scan) in scans.iter().enumerate() {
            let (a, b) = (&path.vertices[s], &path.vertices[s + 1]);
            if a == b {
                continue;
            }
            let mut cuts = vec![S::zero()];
            cuts.extend(scan.switches.iter().copied());
            cuts.push(S::one());
            for w in cuts.windows(2) {
                if w[1] > w[0] {
                    estimate = estimate + integrate_piece(f, a, b, w[0], w[1], rule, &mut rng, 0, &mut pieces)?;
                }
            }
        }
        reports.push(QuadratureReport {
            rule,
            estimate,
            difference,
            residual: (estimate - difference).abs(),
            subsegments: pieces,
            switches: switches.clone(),
            switch_overflow: overflow,
        });
    }
    Ok(reports)
}

/// Path integral of the field under one selection rule.
pub fn integrate_selection_gradient<S: Scalar, F: Piecewise<S> + ?Sized>(
    f: &F,
    path: &PiecewisePath<S>,
    rule: SelectionRule,
    seed: u64,
) -> Result<QuadratureReport<S>> {
    Ok(integrate_path_rules(f, path, &[rule], seed)?.remove(0))
}

/// Relative discrepancy between the selection Jacobian of `outer ∘ inner`
/// and the product of the parts' selection Jacobians.
pub fn check_chain_rule<S: Scalar>(outer: &SelectionMap<S>, inner: &SelectionMap<S>, x: &[S], cap: usize) -> Result<S> {
    let composed = outer.compose(inner, cap)?;
    let direct = composed.jacobian(x)?;
    let y = inner.eval(x)?;
    let product = outer.jacobian(&y)?.matmul(&inner.jacobian(x)?);
    let scale = S::one() + inf_norm(direct.as_slice()).max(inf_norm(product.as_slice()));
    Ok(direct.max_abs_diff(&product) / scale)
}

/// Scalar convenience form of [`check_chain_rule`].
pub fn check_chain_rule_scalar<S: Scalar>(
    outer: &SelectionFunction<S>,
    inner: &[SelectionFunction<S>],
    x: &[S],
    cap: usize,
) -> Result<S> {
    let stacked = SelectionMap::stack(inner, cap)?;
    check_chain_rule(outer.as_map(), &stacked, x, cap)
}

/// Evidence that a point lies next to a guard boundary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundaryCertificate<S> {
    pub point: Vec<S>,
    pub coordinate: usize,
    /// A point on the far side of the signature change, within `distance`.
    pub boundary: Vec<S>,
    pub distance: S,
    pub certified: bool,
}

/// Distance within which a failing point must sit next to a boundary.
pub const CERTIFICATE_RADIUS: f64 = 1e-6;

/// Looks along every coordinate axis within `radius` for a signature change
/// and bisects it. Returns `None` when the signature is constant on the
/// probed stencil.
pub fn boundary_certificate<S: Scalar, F: Piecewise<S> + ?Sized>(
    f: &F,
    x: &[S],
    radius: S,
) -> Result<Option<BoundaryCertificate<S>>> {
    let mut base = Vec::new();
    let mut sig = Vec::new();
    let mut buf = Vec::new();
    f.signature(x, &mut base)?;
    for i in 0..x.len() {
        for sign in [S::one(), -S::one()] {
            let mut far = x.to_vec();
            far[i] = x[i] + sign * radius;
            f.signature(&far, &mut sig)?;
            if sig == base {
                continue;
            }
            let (_, hi) = bisect_switch(f, x, &far, S::zero(), S::one(), &base, &mut buf)?;
            let boundary = lerp(x, &far, hi);
            let distance = (boundary[i] - x[i]).abs();
            let certified = distance <= S::lit(CERTIFICATE_RADIUS);
            return Ok(Some(BoundaryCertificate { point: x.to_vec(), coordinate: i, boundary, distance, certified }));
        }
    }
    Ok(None)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AeReport<S> {
    pub samples: usize,
    pub failures: usize,
    pub failure_fraction: f64,
    /// Points skipped because a stencil evaluation left the domain.
    pub skipped: usize,
    pub certificates: Vec<BoundaryCertificate<S>>,
    /// Failures for which no boundary was found within the radius.
    pub uncertified: Vec<Vec<S>>,
}

/// Compares AD gradients with central differences at `n` points drawn
/// uniformly from the box `[lo, hi]`.
pub fn check_gradient_ae<S: Scalar, F: Piecewise<S> + ?Sized, R: Rng + ?Sized>(
    f: &F,
    lo: &[S],
    hi: &[S],
    n: usize,
    rng: &mut R,
) -> Result<AeReport<S>> {
    check_dim(f.dim(), lo.len())?;
    check_dim(f.dim(), hi.len())?;
    let h = fd_step::<S>();
    let mut failures = 0;
    let mut skipped = 0;
    let mut certificates = Vec::new();
    let mut uncertified = Vec::new();
    for _ in 0..n {
        let x: Vec<S> = lo
            .iter()
            .zip(hi)
            .map(|(&l, &u)| l + (u - l) * S::lit(rng.random::<f64>()))
            .collect();
        let (g, fd) = match f.value_and_gradient(&x).and_then(|(_, g)| Ok((g, central_difference(f, &x, h)?))) {
            Ok(pair) => pair,
            Err(Error::Domain(_) | Error::NodeDomain { .. }) => {
                skipped += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        if gradients_agree(&g, &fd) {
            continue;
        }
        failures += 1;
        match boundary_certificate(f, &x, S::lit(CERTIFICATE_RADIUS).max(h))? {
            Some(c) if c.certified => certificates.push(c),
            _ => uncertified.push(x),
        }
    }
    let evaluated = n - skipped;
    Ok(AeReport {
        samples: n,
        failures,
        failure_fraction: if evaluated == 0 { 0.0 } else { failures as f64 / evaluated as f64 },
        skipped,
        certificates,
        uncertified,
    })
}

/// At each switch of `f` along `a -> b`, the gap between the values of the
/// branches active on either side, evaluated at the switch point.
pub fn continuity_defects<S: Scalar>(f: &SelectionFunction<S>, a: &[S], b: &[S]) -> Result<Vec<S>> {
    let scan = detect_switch_points(f, a, b)?;
    let half = S::lit(SWITCH_TOL);
    scan.switches
        .iter()
        .map(|&t| {
            let before = f.index_of(&lerp(a, b, t - half))?;
            let after = f.index_of(&lerp(a, b, t + half))?;
            let z = lerp(a, b, t);
            Ok((f.branch(before).eval(&z)? - f.branch(after).eval(&z)?).abs())
        })
        .collect()
}

/// Point pair straddling the boundary between the pieces containing `a`
/// and `b`: the first is on `a`'s side, the second on the other, at most
/// `1e-12 |b - a|` apart. `None` when the signatures agree.
pub fn boundary_between<S: Scalar, F: Piecewise<S> + ?Sized>(
    f: &F,
    a: &[S],
    b: &[S],
) -> Result<Option<(Vec<S>, Vec<S>)>> {
    let mut sa = Vec::new();
    let mut sb = Vec::new();
    let mut buf = Vec::new();
    f.signature(a, &mut sa)?;
    f.signature(b, &mut sb)?;
    if sa == sb {
        return Ok(None);
    }
    let (lo, hi) = bisect_switch(f, a, b, S::zero(), S::one(), &sa, &mut buf)?;
    Ok(Some((lerp(a, b, lo), lerp(a, b, hi))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::selection::prims;

    #[test]
    fn switch_points() {
        let relu = prims::relu::<f64>();
        let s = detect_switch_points(&relu, &[-1.0], &[1.0]).unwrap();
        assert_eq!(s.switches.len(), 1);
        assert!((s.switches[0] - 0.5).abs() < 1e-12);
        let sq = fixtures::square_program::<f64>();
        assert!(detect_switch_points(&sq, &[-3.0], &[2.0]).unwrap().switches.is_empty());
        let mx = prims::max2::<f64>();
        let s = detect_switch_points(&mx, &[0.0, 1.0], &[1.0, 0.0]).unwrap();
        assert_eq!(s.switches.len(), 1);
        assert!((s.switches[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn relu_segment_integral() {
        let relu = fixtures::relu_program::<f64>();
        let path = PiecewisePath::segment(vec![-1.0], vec![1.0]).unwrap();
        let r = integrate_selection_gradient(&relu, &path, SelectionRule::SelectionGradient, 0).unwrap();
        assert_eq!(r.difference, 1.0);
        assert!(r.residual <= 1e-10, "{r:?}");
    }

    #[test]
    fn zero_program_every_rule() {
        let z = fixtures::zero_program::<f64>();
        let path = PiecewisePath::new(vec![vec![-2.0], vec![0.0], vec![1.5]]).unwrap();
        for r in integrate_path_rules(&z, &path, &SelectionRule::ALL, 3).unwrap() {
            assert_eq!(r.difference, 0.0);
            assert!(r.residual <= 1e-10, "{r:?}");
        }
    }

    #[test]
    fn chain_rule_at_tie() {
        let relu = prims::relu::<f64>();
        let aff = prims::affine(vec![2.0], 1.0);
        let d = check_chain_rule_scalar(&relu, &[aff], &[-0.5], 100).unwrap();
        assert_eq!(d, 0.0);
        let id = SelectionMap::<f64>::identity(2);
        assert_eq!(check_chain_rule(&id, &id, &[0.3, -1.0], 100).unwrap(), 0.0);
    }

    #[test]
    fn gradient_ae_relu_and_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let relu = prims::relu::<f64>();
        let r = check_gradient_ae(&relu, &[-1.0], &[1.0], 10_000, &mut rng).unwrap();
        assert_eq!(r.failures, 0);
        let z = prims::zero_representation::<f64>();
        let r = check_gradient_ae(&z, &[-1.0], &[1.0], 10_000, &mut rng).unwrap();
        assert_eq!(r.failures, 0);
    }

    #[test]
    fn certificates_at_engineered_points() {
        let relu = prims::relu::<f64>();
        let c = boundary_certificate(&relu, &[0.0], 1e-6).unwrap().unwrap();
        assert!(c.certified);
        assert!(boundary_certificate(&relu, &[0.5], 1e-6).unwrap().is_none());
        let z = fixtures::zero_program::<f64>();
        assert!(boundary_certificate(&z, &[0.0], 1e-6).unwrap().unwrap().certified);
    }

    #[test]
    fn path_helpers() {
        let a = PiecewisePath::new(vec![vec![0.0], vec![1.0]]).unwrap();
        let b = PiecewisePath::new(vec![vec![1.0], vec![0.0]]).unwrap();
        let loop_ = a.concat(&b).unwrap();
        assert!(loop_.is_closed());
        assert_eq!(loop_.point_at(0.25), vec![0.5]);
        assert!(PiecewisePath::<f64>::new(vec![vec![0.0]]).is_err());
        assert!(PiecewisePath::with_breakpoints(vec![0.0, 0.7], vec![vec![0.0], vec![1.0]]).is_err());
        assert_eq!("max-inner".parse::<SelectionRule>().unwrap(), SelectionRule::MaxInner);
    }

    #[test]
    fn continuity_of_abs() {
        let d = continuity_defects(&prims::abs::<f64>(), &[-1.0], &[2.0]).unwrap();
        assert_eq!(d.len(), 1);
        assert!(d[0] <= 1e-9);
    }
}
