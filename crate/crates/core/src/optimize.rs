//! Minibatch SGD driven by backward AD on finite-sum objectives, limit
//! classification, and the trap-avoidance experiment.

use std::io::{self, Write};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::autodiff::backward_into;
use crate::error::{check_dim, Error, Result};
use crate::program::{EvalTrace, Program, Workspace};
use crate::scalar::{norm, Scalar};
use crate::setfield::{classify, ClassifyOptions, CriticalityReport, Criticality};

/// `J = (1/n) Σ f_i` over scalar programs sharing an input dimension.
#[derive(Debug, Clone)]
pub struct FiniteSumProblem<S> {
    components: Vec<Program<S>>,
    mean: Program<S>,
}

impl<S: Scalar> FiniteSumProblem<S> {
    pub fn new(components: Vec<Program<S>>) -> Result<Self> {
        for c in &components {
            let v = c.validate();
            if !v.is_empty() {
                return Err(Error::InvalidProgram(v[0].to_string()));
            }
        }
        let mean = Program::mean(&components)?;
        Ok(Self { components, mean })
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.mean.input_dim()
    }

    pub fn components(&self) -> &[Program<S>] {
        &self.components
    }

    /// `J` as a single program; its field and classification are the
    /// objective's.
    pub fn objective(&self) -> &Program<S> {
        &self.mean
    }

    pub fn value(&self, x: &[S]) -> Result<S> {
        let mut acc = S::zero();
        for c in &self.components {
            acc = acc + c.call1(x)?;
        }
        Ok(acc / S::lit(self.len() as f64))
    }
}

/// Buffers for repeated gradient evaluation.
#[derive(Debug, Clone)]
struct GradScratch<S> {
    trace: EvalTrace<S>,
    ws: Workspace<S>,
    adj: Vec<S>,
}

impl<S: Scalar> Default for GradScratch<S> {
    fn default() -> Self {
        Self { trace: EvalTrace::default(), ws: Workspace::default(), adj: Vec::new() }
    }
}

impl<S: Scalar> GradScratch<S> {
    /// Mean of backward AD gradients of the selected components into `out`.
    fn minibatch(&mut self, problem: &FiniteSumProblem<S>, subset: &[usize], x: &[S], out: &mut [S]) -> Result<()> {
        out.iter_mut().for_each(|o| *o = S::zero());
        for &i in subset {
            let c = &problem.components[i];
            c.evaluate_into(x, &mut self.trace, &mut self.ws)?;
            backward_into(c, &self.trace, c.node_count() - 1, &mut self.adj);
            for (o, &g) in out.iter_mut().zip(&self.adj) {
                *o = *o + g;
            }
        }
        let w = S::one() / S::lit(subset.len() as f64);
        out.iter_mut().for_each(|o| *o = *o * w);
        Ok(())
    }
}

/// `(1/|I|) Σ_{i ∈ I}` of the backward AD gradients; `subset` holds
/// 0-based component indices.
pub fn minibatch_gradient<S: Scalar>(problem: &FiniteSumProblem<S>, subset: &[usize], x: &[S]) -> Result<Vec<S>> {
    check_dim(problem.dim(), x.len())?;
    if subset.is_empty() || subset.iter().any(|&i| i >= problem.len()) {
        return Err(Error::Invalid("subset must be a nonempty set of component indices".into()));
    }
    let mut out = vec![S::zero(); problem.dim()];
    GradScratch::default().minibatch(problem, subset, x, &mut out)?;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ScheduleKind {
    /// `α_k = (k + 2)^{-β}`, `0.5 < β <= 1`.
    Power { beta: f64 },
    /// `α_k = 1 / ((k + 2) log(k + 2))`.
    LogDamped,
}

/// `γ_k = c α_k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepSchedule {
    pub c: f64,
    pub kind: ScheduleKind,
}

impl StepSchedule {
    pub fn new(c: f64, kind: ScheduleKind) -> Result<Self> {
        if !(c > 0.0 && c <= 1.0) {
            return Err(Error::Invalid(format!("step constant c = {c} is outside (0, 1]")));
        }
        if let ScheduleKind::Power { beta } = kind {
            if !(beta > 0.5 && beta <= 1.0) {
                return Err(Error::Invalid(format!("power schedule needs 0.5 < beta <= 1, got {beta}")));
            }
        }
        Ok(Self { c, kind })
    }

    /// `power(0.6)` with constant `c`.
    pub fn power(c: f64, beta: f64) -> Result<Self> {
        Self::new(c, ScheduleKind::Power { beta })
    }

    pub fn alpha(&self, k: usize) -> f64 {
        let t = k as f64 + 2.0;
        match self.kind {
            ScheduleKind::Power { beta } => t.powf(-beta),
            ScheduleKind::LogDamped => 1.0 / (t * t.ln()),
        }
    }

    pub fn gamma(&self, k: usize) -> f64 {
        self.c * self.alpha(k)
    }
}

/// How the index set `I_k` is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BatchMode {
    /// Uniform over the `2^n - 1` nonempty subsets.
    UniformSubsets,
    /// Always all components.
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SgdConfig {
    pub iters: usize,
    pub seed: u64,
    /// RNG stream, one per run.
    pub run_id: u64,
    /// Runs leaving the ball of this radius are aborted.
    pub radius: f64,
    /// Record every `stride`-th iterate (and the last one).
    pub stride: usize,
    pub batch: BatchMode,
}

impl Default for SgdConfig {
    fn default() -> Self {
        Self { iters: 100_000, seed: 0, run_id: 0, radius: 1e6, stride: 100, batch: BatchMode::UniformSubsets }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryRow<S> {
    pub k: usize,
    pub gamma: f64,
    pub x: Vec<S>,
    pub j: S,
    /// FNV-1a hash of the index set used at step `k` (0 for the final row).
    pub batch_hash: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimRun<S> {
    pub seed: u64,
    pub run_id: u64,
    pub x0: Vec<S>,
    pub schedule: StepSchedule,
    pub iters: usize,
    pub radius: f64,
    pub stride: usize,
    pub batch: BatchMode,
    pub trajectory: Vec<TrajectoryRow<S>>,
    pub terminal: Vec<S>,
    /// Mean of the last 1% of iterates.
    pub tail_mean: Vec<S>,
    pub completed: usize,
    /// Iteration at which `‖x_k‖ > R`.
    pub aborted_at: Option<usize>,
    pub fault: Option<String>,
}

impl<S: Scalar> OptimRun<S> {
    pub fn aborted(&self) -> bool {
        self.aborted_at.is_some()
    }

    /// Trajectory as CSV: `k,gamma,x1..xp,J,batch_hash`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let p = self.x0.len();
        let xs: Vec<String> = (1..=p).map(|i| format!("x{i}")).collect();
        writeln!(w, "k,gamma,{},J,batch_hash", xs.join(","))?;
        for r in &self.trajectory {
            let xs: Vec<String> = r.x.iter().map(|v| v.to_text()).collect();
            writeln!(w, "{},{:?},{},{},{:016x}", r.k, r.gamma, xs.join(","), r.j.to_text(), r.batch_hash)?;
        }
        Ok(())
    }
}

fn fnv1a(indices: &[usize]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &i in indices {
        for b in (i as u64).to_le_bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    h
}

/// Fills `out` with a uniformly random nonempty subset of `0..n`: `n` fair
/// bits, redrawn while all are zero.
pub fn draw_subset<R: RngCore + ?Sized>(rng: &mut R, n: usize, out: &mut Vec<usize>) {
    assert!(n > 0);
    loop {
        out.clear();
        let mut word = 0u64;
        for i in 0..n {
            if i % 64 == 0 {
                word = rng.next_u64();
            }
            if word & 1 == 1 {
                out.push(i);
            }
            word >>= 1;
        }
        if !out.is_empty() {
            return;
        }
    }
}

/// The RNG driving run `run_id` of an experiment seeded with `seed`.
pub fn run_rng(seed: u64, run_id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(run_id);
    rng
}

/// Minibatch SGD `x_{k+1} = x_k - γ_k ∇̂f_{I_k}(x_k)`.
pub fn sgd_run<S: Scalar>(
    problem: &FiniteSumProblem<S>,
    x0: &[S],
    schedule: &StepSchedule,
    cfg: &SgdConfig,
) -> Result<OptimRun<S>> {
    check_dim(problem.dim(), x0.len())?;
    if cfg.iters == 0 || cfg.stride == 0 {
        return Err(Error::Invalid("iters and stride must be positive".into()));
    }
    let radius = S::lit(cfg.radius);
    if !(norm(x0) < radius) {
        return Err(Error::Invalid("the starting point must lie inside the abort radius".into()));
    }
    let n = problem.len();
    let p = problem.dim();
    let mut rng = run_rng(cfg.seed, cfg.run_id);
    let all: Vec<usize> = (0..n).collect();
    let mut subset = Vec::with_capacity(n);
    let mut scratch = GradScratch::default();
    let mut grad = vec![S::zero(); p];
    let mut x = x0.to_vec();
    let tail_len = cfg.iters.div_ceil(100);
    let mut tail_sum = vec![S::zero(); p];
    let mut tail_count = 0usize;
    let mut trajectory = Vec::with_capacity(cfg.iters / cfg.stride + 2);
    let mut aborted_at = None;
    let mut fault = None;
    let mut completed = 0;

    for k in 0..cfg.iters {
        match cfg.batch {
            BatchMode::UniformSubsets => draw_subset(&mut rng, n, &mut subset),
            BatchMode::Full => {
                subset.clear();
                subset.extend_from_slice(&all);
            }
        }
        if let Err(e) = scratch.minibatch(problem, &subset, &x, &mut grad) {
            fault = Some(format!("iteration {k}: {e}"));
            break;
        }
        let gamma = schedule.gamma(k);
        if k % cfg.stride == 0 {
            match problem.value(&x) {
                Ok(j) => trajectory.push(TrajectoryRow { k, gamma, x: x.clone(), j, batch_hash: fnv1a(&subset) }),
                Err(e) => {
                    fault = Some(format!("iteration {k}: {e}"));
                    break;
                }
            }
        }
        let g = S::lit(gamma);
        for (xi, &gi) in x.iter_mut().zip(&grad) {
            *xi = *xi - g * gi;
        }
        completed = k + 1;
        if cfg.iters - completed < tail_len {
            for (t, &xi) in tail_sum.iter_mut().zip(&x) {
                *t = *t + xi;
            }
            tail_count += 1;
        }
        if !(norm(&x) <= radius) {
            aborted_at = Some(k + 1);
            break;
        }
    }
    if fault.is_none() {
        if let Ok(j) = problem.value(&x) {
            trajectory.push(TrajectoryRow { k: completed, gamma: 0.0, x: x.clone(), j, batch_hash: 0 });
        }
    }
    let tail_mean = if tail_count > 0 {
        tail_sum.iter().map(|&t| t / S::lit(tail_count as f64)).collect()
    } else {
        x.clone()
    };
    Ok(OptimRun {
        seed: cfg.seed,
        run_id: cfg.run_id,
        x0: x0.to_vec(),
        schedule: *schedule,
        iters: cfg.iters,
        radius: cfg.radius,
        stride: cfg.stride,
        batch: cfg.batch,
        trajectory,
        terminal: x,
        tail_mean,
        completed,
        aborted_at,
        fault,
    })
}

/// Oscillation `max - min` of the last 10% of recorded objective values and
/// whether it is within `1e-4 (1 + |J|)`.
pub fn cauchy_tail<S: Scalar>(values: &[S]) -> (S, bool) {
    if values.is_empty() {
        return (S::infinity(), false);
    }
    let start = values.len() - values.len().div_ceil(10);
    let tail = &values[start..];
    let hi = tail.iter().copied().fold(S::neg_infinity(), S::max);
    let lo = tail.iter().copied().fold(S::infinity(), S::min);
    let last = tail[tail.len() - 1];
    let osc = hi - lo;
    (osc, osc <= S::lit(1e-4) * (S::one() + last.abs()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunVerdict<S> {
    pub j_oscillation: S,
    pub j_converged: bool,
    /// Classification of the objective at the terminal iterate.
    pub terminal: CriticalityReport<S>,
    /// Distance between the terminal iterate and the tail mean.
    pub tail_gap: S,
    pub aborted: bool,
    pub fault: Option<String>,
}

impl<S: Scalar> RunVerdict<S> {
    /// `0` is within `tol` of the field of `J` at the terminal iterate.
    pub fn selection_critical(&self, tol: S) -> bool {
        self.terminal.d_distance <= tol
    }
}

pub fn classify_run<S: Scalar>(
    run: &OptimRun<S>,
    problem: &FiniteSumProblem<S>,
    opts: &ClassifyOptions<S>,
) -> Result<RunVerdict<S>> {
    let js: Vec<S> = run.trajectory.iter().map(|r| r.j).collect();
    let (j_oscillation, j_converged) = cauchy_tail(&js);
    let terminal = classify(problem.objective(), &run.terminal, opts)?;
    let gap: Vec<S> = run.terminal.iter().zip(&run.tail_mean).map(|(&a, &b)| a - b).collect();
    Ok(RunVerdict {
        j_oscillation,
        j_converged,
        terminal,
        tail_gap: norm(&gap),
        aborted: run.aborted(),
        fault: run.fault.clone(),
    })
}

/// Continuous laws for the experiment's `(x₀, c)` pairs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrapConfig {
    pub n_inits: usize,
    /// `x₀` uniform on the box `[lo, hi]`.
    pub x0_lo: Vec<f64>,
    pub x0_hi: Vec<f64>,
    /// `c` uniform on `[c_lo, c_hi]`.
    pub c_lo: f64,
    pub c_hi: f64,
    pub kind: ScheduleKind,
    pub iters: usize,
    pub seed: u64,
    pub radius: f64,
    pub stride: usize,
    /// Optional point of interest; runs ending within `target_tol` of it are counted.
    pub target: Option<Vec<f64>>,
    pub target_tol: f64,
    pub bins: usize,
}

impl Default for TrapConfig {
    fn default() -> Self {
        Self {
            n_inits: 1000,
            x0_lo: vec![-2.0],
            x0_hi: vec![2.0],
            c_lo: 0.1,
            c_hi: 1.0,
            kind: ScheduleKind::Power { beta: 0.6 },
            iters: 20_000,
            seed: 0,
            radius: 1e6,
            stride: 100,
            target: None,
            target_tol: 1e-2,
            bins: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunOutcome {
    pub run_id: u64,
    pub x0: Vec<f64>,
    pub c: f64,
    pub terminal: Vec<f64>,
    pub classification: Option<Criticality>,
    pub d_distance: f64,
    pub j_converged: bool,
    pub aborted: bool,
    pub fault: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn of(values: &[f64], bins: usize) -> Self {
        let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
        let lo = finite.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let bins = bins.max(1);
        let mut counts = vec![0; bins];
        if finite.is_empty() {
            return Self { lo: 0.0, hi: 0.0, counts };
        }
        let width = (hi - lo) / bins as f64;
        for v in finite {
            let b = if width > 0.0 { (((v - lo) / width) as usize).min(bins - 1) } else { 0 };
            counts[b] += 1;
        }
        Self { lo, hi, counts }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrapSummary {
    pub schema_version: u32,
    pub config: TrapConfig,
    pub runs: usize,
    pub artificial_critical: usize,
    pub clarke_critical: usize,
    pub non_critical: usize,
    pub aborted: usize,
    pub faults: usize,
    pub near_target: usize,
    pub j_converged: usize,
    /// Histogram of the first terminal coordinate.
    pub histogram: Histogram,
    pub outcomes: Vec<RunOutcome>,
}

impl TrapSummary {
    pub fn artificial_fraction(&self) -> f64 {
        self.artificial_critical as f64 / self.runs.max(1) as f64
    }
}

pub const SUMMARY_SCHEMA_VERSION: u32 = 1;

/// Runs SGD from `n_inits` random `(x₀, c)` draws in parallel and counts how
/// the runs end. Each run owns the RNG stream keyed by its id, so the
/// summary does not depend on scheduling.
pub fn trap_avoidance_experiment(problem: &FiniteSumProblem<f64>, cfg: &TrapConfig) -> Result<TrapSummary> {
    check_dim(problem.dim(), cfg.x0_lo.len())?;
    check_dim(problem.dim(), cfg.x0_hi.len())?;
    if !(cfg.c_lo > 0.0 && cfg.c_lo <= cfg.c_hi && cfg.c_hi <= 1.0) {
        return Err(Error::Invalid("c law must lie in (0, 1]".into()));
    }
    let opts = ClassifyOptions::default();
    let outcomes: Vec<RunOutcome> = (0..cfg.n_inits as u64)
        .into_par_iter()
        .map(|id| {
            let mut init = run_rng(cfg.seed ^ 0x005e_ed1a_7e0f_c0de, id);
            let x0: Vec<f64> = cfg
                .x0_lo
                .iter()
                .zip(&cfg.x0_hi)
                .map(|(&l, &h)| l + (h - l) * init.random::<f64>())
                .collect();
            let c = cfg.c_lo + (cfg.c_hi - cfg.c_lo) * (1.0 - init.random::<f64>());
            run_one(problem, cfg, &opts, id, x0, c)
        })
        .collect();

    let count = |pred: &dyn Fn(&RunOutcome) -> bool| outcomes.iter().filter(|o| pred(o)).count();
    let near_target = match &cfg.target {
        Some(t) => count(&|o| {
            o.terminal.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt() <= cfg.target_tol
        }),
        None => 0,
    };
    let firsts: Vec<f64> = outcomes.iter().filter_map(|o| o.terminal.first().copied()).collect();
    Ok(TrapSummary {
        schema_version: SUMMARY_SCHEMA_VERSION,
        config: cfg.clone(),
        runs: outcomes.len(),
        artificial_critical: count(&|o| o.classification == Some(Criticality::ArtificialCritical)),
        clarke_critical: count(&|o| o.classification == Some(Criticality::ClarkeCritical)),
        non_critical: count(&|o| o.classification == Some(Criticality::NonCritical)),
        aborted: count(&|o| o.aborted),
        faults: count(&|o| o.fault.is_some()),
        near_target,
        j_converged: count(&|o| o.j_converged),
        histogram: Histogram::of(&firsts, cfg.bins),
        outcomes,
    })
}

fn run_one(
    problem: &FiniteSumProblem<f64>,
    cfg: &TrapConfig,
    opts: &ClassifyOptions<f64>,
    id: u64,
    x0: Vec<f64>,
    c: f64,
) -> RunOutcome {
    let failed = |x0: Vec<f64>, msg: String| RunOutcome {
        run_id: id,
        terminal: x0.clone(),
        x0,
        c,
        classification: None,
        d_distance: f64::NAN,
        j_converged: false,
        aborted: false,
        fault: Some(msg),
    };
    let schedule = match StepSchedule::new(c, cfg.kind) {
        Ok(s) => s,
        Err(e) => return failed(x0, e.to_string()),
    };
    let sgd = SgdConfig {
        iters: cfg.iters,
        seed: cfg.seed,
        run_id: id,
        radius: cfg.radius,
        stride: cfg.stride,
        batch: BatchMode::UniformSubsets,
    };
    let run = match sgd_run(problem, &x0, &schedule, &sgd) {
        Ok(r) => r,
        Err(e) => return failed(x0, e.to_string()),
    };
    let verdict = if run.aborted() || run.fault.is_some() { None } else { classify_run(&run, problem, opts).ok() };
    RunOutcome {
        run_id: id,
        x0,
        c,
        terminal: run.terminal.clone(),
        classification: verdict.as_ref().map(|v| v.terminal.classification),
        d_distance: verdict.as_ref().map_or(f64::NAN, |v| v.terminal.d_distance),
        j_converged: verdict.as_ref().is_some_and(|v| v.j_converged),
        aborted: run.aborted(),
        fault: run.fault,
    }
}
