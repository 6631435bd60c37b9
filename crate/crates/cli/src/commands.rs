use anyhow::{bail, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde_json::json;

use seldiff::autodiff::{backprop_products, backward_ad, forward_ad, gradient, prescribe_derivative, relative_mode_discrepancy};
use seldiff::minnorm::min_norm_point;
use seldiff::optimize::{
    classify_run, sgd_run, trap_avoidance_experiment, BatchMode, ScheduleKind, SgdConfig, StepSchedule, TrapConfig,
};
use seldiff::setfield::{classify, closed_graph_probe, program_generators, ClassifyOptions, SequenceSpec, DEFAULT_ASSIGNMENT_CAP};
use seldiff::verify::{
    boundary_between, boundary_certificate, check_gradient_ae, integrate_path_rules, SelectionRule, CERTIFICATE_RADIUS,
};
use seldiff::Prog;
use seldiff_dsl::compile_source;

use crate::report::{fmt_vec, num, table, Report};
use crate::{load, Cli, Command, DemoKind, ExperimentKind, FnArgs, ModeArg, ScheduleArg, Suite};

/// Accepted discrepancy between the two AD modes.
pub const MODE_TOL: f64 = 1e-12;
/// Loop integrals must vanish to this accuracy.
pub const LOOP_TOL: f64 = 1e-8;
/// Closed-graph limits must be this close to the field.
pub const PROBE_TOL: f64 = 1e-6;
/// Terminal min-norm accepted as selection-critical for SGD runs.
pub const CRITICAL_TOL: f64 = 1e-6;
/// Largest branch count when a program is flattened into one selection.
pub const FLATTEN_CAP: usize = 10_000;

const KINK_FAMILY_SRC: &str = include_str!("../../dsl/corpus/valid/kink_family.sel");

pub fn run(cli: &Cli) -> Result<Report> {
    let mut report = match &cli.command {
        Command::Eval { f, at } => eval(f, at)?,
        Command::Grad { f, at, mode, tol } => grad(f, at, *mode, *tol)?,
        Command::CheckLemma1 { p, m, trials, seed, tol } => check_backprop(*p, *m, *trials, *seed, *tol)?,
        Command::Dfield { f, at, tol_active } => dfield(f, at, *tol_active)?,
        Command::Classify { f, at, tol_d, tol_c, radius, samples, seed, expect } => {
            let opts = ClassifyOptions {
                tol_d: *tol_d,
                tol_c: *tol_c,
                radius: *radius,
                samples: *samples,
                seed: *seed,
                ..ClassifyOptions::default()
            };
            classify_cmd(f, at, &opts, expect.as_deref())?
        }
        Command::Integrate { f, path, rule, seed, tol } => integrate(f, path, rule, *seed, *tol)?,
        Command::Verify { f, suite, samples, seed, lo, hi, probes } => {
            let art = load::function(&f.file, &f.name)?;
            let p = art.params.len();
            let (lo, hi) = (load::corner(lo, p)?, load::corner(hi, p)?);
            if lo.iter().zip(&hi).any(|(l, h)| !(l < h)) {
                bail!("the sampling box needs lo < hi in every coordinate");
            }
            let opts = VerifyOptions { samples: *samples, seed: *seed, lo, hi, probes: *probes };
            match suite {
                Suite::Ae => verify_ae(&art.program, &opts)?,
                Suite::Chain => verify_chain(&art.program, &opts)?,
                Suite::Closedgraph => verify_closedgraph(&art.program, &opts)?,
            }
        }
        Command::Sgd { file, sum, x0, c, beta, schedule, iters, seed, run_id, radius, stride, full_batch } => {
            let (problem, hash) = load::problem(file, sum)?;
            let sched = StepSchedule::new(*c, kind(*schedule, *beta))?;
            let cfg = SgdConfig {
                iters: *iters,
                seed: *seed,
                run_id: *run_id,
                radius: *radius,
                stride: *stride,
                batch: if *full_batch { BatchMode::Full } else { BatchMode::UniformSubsets },
            };
            sgd(&problem, &hash, x0, &sched, &cfg)?
        }
        Command::Experiment { kind: ExperimentKind::Traps { file, sum, inits, x0_lo, x0_hi, c_lo, c_hi, beta, schedule, iters, seed, radius, target, target_tol, min_near_target } } => {
            let (problem, hash) = load::problem(file, sum)?;
            let p = problem.dim();
            let cfg = TrapConfig {
                n_inits: *inits,
                x0_lo: load::corner(x0_lo, p)?,
                x0_hi: load::corner(x0_hi, p)?,
                c_lo: *c_lo,
                c_hi: *c_hi,
                kind: kind(*schedule, *beta),
                iters: *iters,
                seed: *seed,
                radius: *radius,
                target: target.clone(),
                target_tol: *target_tol,
                ..TrapConfig::default()
            };
            traps(&problem, &hash, &cfg, *min_near_target)?
        }
        Command::Demo { which: DemoKind::Figure1 } => kink_demo()?,
        Command::Prescribe { f, at, shift, coord, base, samples, seed, emit } => {
            prescribe(f, *at, *shift, *coord, base.as_deref(), *samples, *seed, *emit)?
        }
    };
    if let Some(dir) = &cli.csv {
        for path in report.write_csv(dir)? {
            report.human += &format!("wrote {}\n", path.display());
        }
    }
    Ok(report)
}

fn kind(s: ScheduleArg, beta: f64) -> ScheduleKind {
    match s {
        ScheduleArg::Power => ScheduleKind::Power { beta },
        ScheduleArg::Log => ScheduleKind::LogDamped,
    }
}

fn eval(f: &FnArgs, at: &[f64]) -> Result<Report> {
    let art = load::function(&f.file, &f.name)?;
    load::check_point(&art, at)?;
    let (out, trace) = art.program.evaluate(at)?;
    let mut labels = vec![String::new(); art.program.node_count()];
    let mut spans = vec![String::new(); art.program.node_count()];
    for s in &art.symbols {
        labels[s.node] = s.label.clone();
        spans[s.node] = s.span.to_string();
    }
    let nodes: Vec<_> = (0..trace.node_count())
        .map(|k| {
            json!({
                "node": k,
                "label": labels[k],
                "span": spans[k],
                "value": trace.value(k),
                "branch": trace.branch(k),
            })
        })
        .collect();
    let rows: Vec<Vec<String>> = (0..trace.node_count())
        .map(|k| {
            vec![
                k.to_string(),
                labels[k].clone(),
                spans[k].clone(),
                num(trace.value(k)),
                trace.branch(k).map_or("-".into(), |b| b.to_string()),
            ]
        })
        .collect();
    let human = format!("{}({}) = {}\n\n{}", art.function, fmt_vec(at), num(out[0]), table(&["node", "label", "at", "value", "branch"], &rows));
    let mut r = Report::new(
        "eval",
        json!({
            "function": art.function,
            "source_hash": art.source_hash,
            "point": at,
            "value": out[0],
            "nodes": nodes,
        }),
        human,
    );
    r.table("eval", &["node", "label", "at", "value", "branch"], rows);
    Ok(r)
}

fn grad(f: &FnArgs, at: &[f64], mode: ModeArg, tol: f64) -> Result<Report> {
    let art = load::function(&f.file, &f.name)?;
    load::check_point(&art, at)?;
    let (out, trace) = art.program.evaluate(at)?;
    let fwd = matches!(mode, ModeArg::Forward | ModeArg::Both).then(|| forward_ad(&art.program, &trace)).transpose()?;
    let bwd = matches!(mode, ModeArg::Backward | ModeArg::Both).then(|| backward_ad(&art.program, &trace)).transpose()?;
    let discrepancy = match mode {
        ModeArg::Both => Some(relative_mode_discrepancy(&art.program, at)?),
        _ => None,
    };
    let mut human = format!("{}({}) = {}\n", art.function, fmt_vec(at), num(out[0]));
    if let Some(a) = &fwd {
        human += &format!("forward      {}\n", fmt_vec(a.gradient()));
    }
    if let Some(a) = &bwd {
        human += &format!("backward     {}\n", fmt_vec(a.gradient()));
    }
    if let Some(d) = discrepancy {
        human += &format!("discrepancy  {d}\n");
    }
    let mut r = Report::new(
        "grad",
        json!({
            "function": art.function,
            "source_hash": art.source_hash,
            "point": at,
            "value": out[0],
            "forward": fwd.as_ref().map(|a| a.gradient().to_vec()),
            "backward": bwd.as_ref().map(|a| a.gradient().to_vec()),
            "discrepancy": discrepancy,
            "tolerance": tol,
        }),
        human,
    );
    if let Some(d) = discrepancy {
        r.require(d <= tol, "modes agree", || format!("relative discrepancy {d:e} exceeds {tol:e}"));
    }
    Ok(r)
}

/// Lower-triangular standard-normal columns `d_i`, `i = p..m`.
pub fn backprop_instance(rng: &mut ChaCha8Rng, p: usize, m: usize) -> Vec<Vec<f64>> {
    (p..m)
        .map(|k| (0..m).map(|j| if j < k { rng.sample(StandardNormal) } else { 0.0 }).collect())
        .collect()
}

/// Entry discrepancy of the two products relative to their largest entry.
pub fn backprop_discrepancy(p: usize, m: usize, ds: &[Vec<f64>]) -> Result<f64> {
    let (l, r) = backprop_products(p, m, ds)?;
    let scale = l.max_abs().max(r.max_abs()).max(1.0);
    Ok(l.max_abs_diff(&r) / scale)
}

fn check_backprop(p: usize, m: usize, trials: usize, seed: u64, tol: f64) -> Result<Report> {
    if !(0 < p && p < m) {
        bail!("need 0 < p < m, got p = {p}, m = {m}");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let mut rows = Vec::with_capacity(trials);
    for t in 0..trials {
        let ds = backprop_instance(&mut rng, p, m);
        let d = backprop_discrepancy(p, m, &ds)?;
        worst = worst.max(d);
        rows.push(vec![t.to_string(), format!("{d:e}")]);
    }
    let human = format!("p = {p}, m = {m}, trials = {trials}\nmax relative discrepancy {worst:e} (tolerance {tol:e})\n");
    let mut r = Report::new(
        "check-lemma1",
        json!({ "p": p, "m": m, "trials": trials, "seed": seed, "max_discrepancy": worst, "tolerance": tol }),
        human,
    );
    r.table("backprop_identity", &["trial", "discrepancy"], rows);
    r.require(worst <= tol, "product identity", || format!("max discrepancy {worst:e} exceeds {tol:e}"));
    Ok(r)
}

fn dfield(f: &FnArgs, at: &[f64], tol_active: f64) -> Result<Report> {
    let art = load::function(&f.file, &f.name)?;
    load::check_point(&art, at)?;
    let field = program_generators(&art.program, at, tol_active, DEFAULT_ASSIGNMENT_CAP)?;
    let mn = min_norm_point(&field.generators);
    let rows: Vec<Vec<String>> = field
        .generators
        .iter()
        .zip(&mn.weights)
        .enumerate()
        .map(|(i, (g, w))| vec![i.to_string(), fmt_vec(g), num(*w)])
        .collect();
    let human = format!(
        "{}({}) = {}\n{} generator(s), AD gradient is #{}\n\n{}\nmin-norm element {}  (norm {:e})\n",
        art.function,
        fmt_vec(at),
        field.value,
        field.len(),
        field.selection_index,
        table(&["#", "generator", "weight"], &rows),
        fmt_vec(&mn.point),
        mn.norm
    );
    let mut r = Report::new(
        "dfield",
        json!({
            "function": art.function,
            "source_hash": art.source_hash,
            "point": at,
            "value": field.value,
            "tol_active": tol_active,
            "generators": field.generators,
            "selection_index": field.selection_index,
            "assignments_enumerated": field.assignments_enumerated,
            "truncated": field.truncated,
            "min_norm": { "point": mn.point, "norm": mn.norm, "weights": mn.weights },
        }),
        human,
    );
    r.table("dfield", &["index", "generator", "weight"], rows);
    r.require(!field.truncated, "complete enumeration", || {
        format!("stopped after {} branch assignments", field.assignments_enumerated)
    });
    Ok(r)
}

fn classify_cmd(f: &FnArgs, at: &[f64], opts: &ClassifyOptions<f64>, expect: Option<&str>) -> Result<Report> {
    let art = load::function(&f.file, &f.name)?;
    load::check_point(&art, at)?;
    let c = classify(&art.program, at, opts)?;
    let human = format!(
        "{}({}) = {}\nclassification     {}\nfield min-norm     {:e}  ({} generators, tol {:e})\nClarke min-norm    {:e}  ({} of {} samples certified, radius {:e}, tol {:e})\n",
        art.function,
        fmt_vec(at),
        c.value,
        c.classification,
        c.d_distance,
        c.d_generators.len(),
        c.tol_d,
        c.clarke_distance,
        c.clarke_certified,
        c.clarke_requested,
        c.clarke_radius,
        c.tol_c
    );
    let mut r = Report::new(
        "classify",
        json!({ "function": art.function, "source_hash": art.source_hash, "report": c }),
        human,
    );
    if let Some(want) = expect {
        let got = c.classification.to_string();
        r.require(got == want, "expected classification", || format!("expected {want}, got {got}"));
    }
    r.require(c.clarke_sufficient, "Clarke sample size", || {
        format!("only {} certified gradients", c.clarke_certified)
    });
    Ok(r)
}

fn integrate(f: &FnArgs, path_file: &std::path::Path, rule: &str, seed: u64, tol: f64) -> Result<Report> {
    let art = load::function(&f.file, &f.name)?;
    let path = load::path(path_file)?;
    if path.dim() != art.params.len() {
        bail!("path vertices have {} coordinates but `{}` takes {}", path.dim(), art.function, art.params.len());
    }
    let rules: Vec<SelectionRule> = if rule == "all" { SelectionRule::ALL.to_vec() } else { vec![rule.parse()?] };
    let reports = integrate_path_rules(&art.program, &path, &rules, seed)?;
    let rows: Vec<Vec<String>> = reports
        .iter()
        .map(|q| {
            vec![
                q.rule.to_string(),
                num(q.estimate),
                num(q.difference),
                format!("{:e}", q.residual),
                q.subsegments.to_string(),
                q.switches.len().to_string(),
            ]
        })
        .collect();
    let header = ["rule", "integral", "difference", "residual", "pieces", "switches"];
    let closed = path.is_closed();
    let human = format!(
        "{} along {} segment(s){}\n\n{}",
        art.function,
        path.segments(),
        if closed { " (closed)" } else { "" },
        table(&header, &rows)
    );
    let mut r = Report::new(
        "integrate",
        json!({
            "function": art.function,
            "source_hash": art.source_hash,
            "vertices": path.vertices(),
            "closed": closed,
            "tolerance": tol,
            "reports": reports,
        }),
        human,
    );
    r.table("integrate", &header, rows);
    for q in &reports {
        r.require(q.passes(tol), "path integral", || {
            format!("{}: residual {:e} exceeds {tol:e} (1 + |Δf|)", q.rule, q.residual)
        });
        if closed {
            r.require(q.estimate.abs() <= LOOP_TOL, "loop integral", || {
                format!("{}: loop integral {:e}", q.rule, q.estimate)
            });
        }
        r.require(!q.switch_overflow, "switch detection", || format!("{}: too many switches", q.rule));
    }
    Ok(r)
}

#[derive(Debug, Clone)]
pub struct VerifyOptions {
    pub samples: usize,
    pub seed: u64,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub probes: usize,
}

fn uniform(rng: &mut ChaCha8Rng, lo: &[f64], hi: &[f64]) -> Vec<f64> {
    lo.iter().zip(hi).map(|(&l, &h)| rng.random_range(l..h)).collect()
}

/// Boundary crossings found on random segments in the box: point pairs
/// straddling a guard boundary, at most `tries` segments scanned.
pub fn boundary_pairs(prog: &Prog, opts: &VerifyOptions, rng: &mut ChaCha8Rng) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
    let mut pairs = Vec::new();
    for _ in 0..opts.probes.saturating_mul(4) {
        if pairs.len() == opts.probes {
            break;
        }
        let a = uniform(rng, &opts.lo, &opts.hi);
        let b = uniform(rng, &opts.lo, &opts.hi);
        match boundary_between(prog, &a, &b) {
            Ok(Some(pair)) => pairs.push(pair),
            Ok(None) => {}
            Err(seldiff::Error::Domain(_) | seldiff::Error::NodeDomain { .. }) => {}
            Err(e) => return Err(e.into()),
        }
    }
    Ok(pairs)
}

pub fn verify_ae(prog: &Prog, opts: &VerifyOptions) -> Result<Report> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let ae = check_gradient_ae(prog, &opts.lo, &opts.hi, opts.samples, &mut rng)?;
    let uncertified_fraction = ae.uncertified.len() as f64 / (ae.samples - ae.skipped).max(1) as f64;
    let pairs = boundary_pairs(prog, opts, &mut rng)?;
    let mut engineered = Vec::new();
    for (inside, _) in &pairs {
        engineered.push(boundary_certificate(prog, inside, CERTIFICATE_RADIUS)?);
    }
    let certified = engineered.iter().filter(|c| c.as_ref().is_some_and(|c| c.certified)).count();
    let human = format!(
        "samples            {}\nskipped            {}\nFD mismatches      {} ({} certified next to a boundary)\nuncertified        {} (fraction {:e})\nengineered points  {} ({} certified)\n",
        ae.samples,
        ae.skipped,
        ae.failures,
        ae.certificates.len(),
        ae.uncertified.len(),
        uncertified_fraction,
        engineered.len(),
        certified
    );
    let rows: Vec<Vec<String>> = ae
        .certificates
        .iter()
        .map(|c| vec!["sampled".into(), fmt_vec(&c.point), c.coordinate.to_string(), format!("{:e}", c.distance), c.certified.to_string()])
        .chain(ae.uncertified.iter().map(|x| vec!["sampled".into(), fmt_vec(x), "-".into(), "-".into(), "false".into()]))
        .chain(pairs.iter().zip(&engineered).map(|((x, _), c)| match c {
            Some(c) => vec!["engineered".into(), fmt_vec(x), c.coordinate.to_string(), format!("{:e}", c.distance), c.certified.to_string()],
            None => vec!["engineered".into(), fmt_vec(x), "-".into(), "-".into(), "false".into()],
        }))
        .collect();
    let mut r = Report::new(
        "verify ae",
        json!({
            "samples": ae.samples,
            "skipped": ae.skipped,
            "failures": ae.failures,
            "failure_fraction": ae.failure_fraction,
            "uncertified_fraction": uncertified_fraction,
            "certificates": ae.certificates,
            "uncertified": ae.uncertified,
            "engineered": engineered,
        }),
        human,
    );
    r.table("verify_ae", &["kind", "point", "coordinate", "distance", "certified"], rows);
    r.require(ae.uncertified.is_empty(), "a.e. gradient", || {
        format!("{} finite-difference mismatches away from any boundary", ae.uncertified.len())
    });
    r.require(certified == engineered.len(), "boundary certificates", || {
        format!("{} of {} engineered boundary points certified", certified, engineered.len())
    });
    Ok(r)
}

pub fn verify_chain(prog: &Prog, opts: &VerifyOptions) -> Result<Report> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let flat = prog.to_selection(FLATTEN_CAP).ok();
    let mut worst_modes = 0.0f64;
    let mut worst_value = 0.0f64;
    let mut worst_grad = 0.0f64;
    let mut evaluated = 0;
    for _ in 0..opts.samples {
        let x = uniform(&mut rng, &opts.lo, &opts.hi);
        let d = match relative_mode_discrepancy(prog, &x) {
            Ok(d) => d,
            Err(seldiff::Error::Domain(_) | seldiff::Error::NodeDomain { .. }) => continue,
            Err(e) => return Err(e.into()),
        };
        evaluated += 1;
        worst_modes = worst_modes.max(d);
        if let Some(sel) = &flat {
            let a = prog.call1(&x)?;
            let b = sel.eval(&x)?;
            worst_value = worst_value.max((a - b).abs() / (1.0 + a.abs()));
            let ga = gradient(prog, &x)?;
            let gb = sel.selection_gradient(&x)?;
            for (u, v) in ga.iter().zip(&gb) {
                worst_grad = worst_grad.max((u - v).abs() / (1.0 + u.abs()));
            }
        }
    }
    let human = format!(
        "points             {evaluated}\nmode discrepancy   {worst_modes:e}\n{}",
        match &flat {
            Some(sel) => format!(
                "flattened          {} branches\nvalue discrepancy  {worst_value:e}\ngrad discrepancy   {worst_grad:e}\n",
                sel.branch_count()
            ),
            None => format!("flattened          skipped (more than {FLATTEN_CAP} branches)\n"),
        }
    );
    let mut r = Report::new(
        "verify chain",
        json!({
            "points": evaluated,
            "mode_discrepancy": worst_modes,
            "flattened": flat.as_ref().map(|s| s.branch_count()),
            "value_discrepancy": flat.as_ref().map(|_| worst_value),
            "gradient_discrepancy": flat.as_ref().map(|_| worst_grad),
        }),
        human,
    );
    r.require(worst_modes <= MODE_TOL, "modes agree", || format!("relative discrepancy {worst_modes:e}"));
    if flat.is_some() {
        r.require(worst_value <= 1e-12, "flattened value", || format!("relative discrepancy {worst_value:e}"));
        r.require(worst_grad <= 1e-10, "flattened gradient", || format!("relative discrepancy {worst_grad:e}"));
    }
    Ok(r)
}

/// Sequences approaching each boundary point from both sides.
pub fn verify_closedgraph(prog: &Prog, opts: &VerifyOptions) -> Result<Report> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let pairs = boundary_pairs(prog, opts, &mut rng)?;
    let scale: f64 = opts.lo.iter().zip(&opts.hi).map(|(l, h)| h - l).fold(f64::INFINITY, f64::min) * 0.05;
    let mut rows = Vec::new();
    let mut probes = Vec::new();
    let mut worst = 0.0f64;
    for (inside, outside) in &pairs {
        let dir: Vec<f64> = outside.iter().zip(inside).map(|(b, a)| b - a).collect();
        let len = dir.iter().map(|d| d * d).sum::<f64>().sqrt();
        if len == 0.0 {
            continue;
        }
        let unit: Vec<f64> = dir.iter().map(|d| d / len * scale).collect();
        let back: Vec<f64> = unit.iter().map(|d| -d).collect();
        for (side, d) in [("outside", unit), ("inside", back)] {
            for seq in [
                SequenceSpec::Harmonic { direction: d.clone(), count: 1000 },
                SequenceSpec::Geometric { direction: d.clone(), count: 30 },
            ] {
                let kind = if matches!(seq, SequenceSpec::Harmonic { .. }) { "harmonic" } else { "geometric" };
                let p = closed_graph_probe(prog, inside, &seq, seldiff::setfield::DEFAULT_TOL_ACTIVE)?;
                worst = worst.max(p.distance);
                rows.push(vec![fmt_vec(inside), side.to_string(), kind.to_string(), format!("{:e}", p.distance), p.generators.to_string()]);
                probes.push(p);
            }
        }
    }
    let human = format!(
        "boundary points    {}\nsequences          {}\nmax distance       {worst:e} (tolerance {PROBE_TOL:e})\n",
        pairs.len(),
        probes.len()
    );
    let mut r = Report::new(
        "verify closedgraph",
        json!({ "boundary_points": pairs.len(), "max_distance": worst, "tolerance": PROBE_TOL, "probes": probes }),
        human,
    );
    r.table("verify_closedgraph", &["center", "side", "sequence", "distance", "generators"], rows);
    r.require(worst <= PROBE_TOL, "closed graph", || format!("limit {worst:e} away from the field"));
    Ok(r)
}

fn sgd(
    problem: &seldiff::optimize::FiniteSumProblem<f64>,
    hash: &str,
    x0: &[f64],
    sched: &StepSchedule,
    cfg: &SgdConfig,
) -> Result<Report> {
    if x0.len() != problem.dim() {
        bail!("x0 has {} coordinates, the problem has {}", x0.len(), problem.dim());
    }
    let run = sgd_run(problem, x0, sched, cfg)?;
    let verdict = if run.aborted() || run.fault.is_some() {
        None
    } else {
        Some(classify_run(&run, problem, &ClassifyOptions::default())?)
    };
    let last_j = run.trajectory.last().map(|r| r.j);
    let mut human = format!(
        "{} component(s), {} of {} iterations\nterminal           {}\nJ                  {}\n",
        problem.len(),
        run.completed,
        run.iters,
        fmt_vec(&run.terminal),
        last_j.map_or("-".into(), num)
    );
    if let Some(at) = run.aborted_at {
        human += &format!("aborted at         {at} (left the ball of radius {})\n", run.radius);
    }
    if let Some(f) = &run.fault {
        human += &format!("fault              {f}\n");
    }
    if let Some(v) = &verdict {
        human += &format!(
            "J tail oscillation {:e} ({})\nfield min-norm     {:e}\nclassification     {}\n",
            v.j_oscillation,
            if v.j_converged { "converged" } else { "not converged" },
            v.terminal.d_distance,
            v.terminal.classification
        );
    }
    let rows: Vec<Vec<String>> = run
        .trajectory
        .iter()
        .map(|r| {
            let mut row = vec![r.k.to_string(), format!("{:?}", r.gamma)];
            row.extend(r.x.iter().map(|v| format!("{v:?}")));
            row.push(format!("{:?}", r.j));
            row.push(format!("{:016x}", r.batch_hash));
            row
        })
        .collect();
    let xs: Vec<String> = (1..=problem.dim()).map(|i| format!("x{i}")).collect();
    let mut header = vec!["k", "gamma"];
    header.extend(xs.iter().map(String::as_str));
    header.extend(["J", "batch_hash"]);
    let mut r = Report::new(
        "sgd",
        json!({
            "source_hash": hash,
            "seed": run.seed,
            "run_id": run.run_id,
            "schedule": run.schedule,
            "batch": run.batch,
            "iters": run.iters,
            "completed": run.completed,
            "x0": run.x0,
            "terminal": run.terminal,
            "tail_mean": run.tail_mean,
            "aborted_at": run.aborted_at,
            "fault": run.fault,
            "verdict": verdict,
        }),
        human,
    );
    r.table("sgd_trajectory", &header, rows);
    r.require(run.aborted_at.is_none(), "bounded iterates", || format!("left the ball of radius {}", run.radius));
    r.require(run.fault.is_none(), "in-domain iterates", || run.fault.clone().unwrap_or_default());
    if let Some(v) = &verdict {
        r.require(v.j_converged, "J tail Cauchy test", || format!("tail oscillation {:e}", v.j_oscillation));
        r.require(v.selection_critical(CRITICAL_TOL), "terminal criticality", || {
            format!("field min-norm {:e} exceeds {CRITICAL_TOL:e}", v.terminal.d_distance)
        });
    }
    Ok(r)
}

fn traps(
    problem: &seldiff::optimize::FiniteSumProblem<f64>,
    hash: &str,
    cfg: &TrapConfig,
    min_near_target: Option<f64>,
) -> Result<Report> {
    let s = trap_avoidance_experiment(problem, cfg)?;
    let mut human = format!(
        "runs                {}\nartificial-critical {}\nclarke-critical     {}\nnon-critical        {}\naborted             {}\nfaults              {}\nJ converged         {}\n",
        s.runs, s.artificial_critical, s.clarke_critical, s.non_critical, s.aborted, s.faults, s.j_converged
    );
    if let Some(t) = &cfg.target {
        human += &format!("within {:e} of {}  {}\n", cfg.target_tol, fmt_vec(t), s.near_target);
    }
    let h = &s.histogram;
    human += &format!("\nterminal x1 histogram on [{}, {}]\n", h.lo, h.hi);
    let peak = h.counts.iter().copied().max().unwrap_or(0).max(1);
    let width = (h.hi - h.lo) / h.counts.len().max(1) as f64;
    for (i, &c) in h.counts.iter().enumerate() {
        let bar = "#".repeat((c * 40).div_ceil(peak));
        human += &format!("{:>16.9e} {:>6} {bar}\n", h.lo + width * i as f64, c);
    }
    let rows: Vec<Vec<String>> = s
        .outcomes
        .iter()
        .map(|o| {
            vec![
                o.run_id.to_string(),
                fmt_vec(&o.x0),
                format!("{:?}", o.c),
                fmt_vec(&o.terminal),
                o.classification.map_or("-".into(), |c| c.to_string()),
                format!("{:e}", o.d_distance),
                o.j_converged.to_string(),
                o.aborted.to_string(),
            ]
        })
        .collect();
    let mut r = Report::new("experiment traps", json!({ "source_hash": hash, "summary": s }), human);
    r.table(
        "traps",
        &["run_id", "x0", "c", "terminal", "classification", "d_distance", "j_converged", "aborted"],
        rows,
    );
    r.require(s.artificial_critical == 0, "trap avoidance", || {
        format!("{} runs ended at artificial critical points", s.artificial_critical)
    });
    r.require(s.faults == 0, "in-domain iterates", || format!("{} runs faulted", s.faults));
    if let Some(min) = min_near_target {
        let frac = s.near_target as f64 / s.runs.max(1) as f64;
        r.require(cfg.target.is_some() && frac >= min, "runs near target", || {
            format!("{:.4} of runs near the target, need {min}", frac)
        });
    }
    Ok(r)
}

/// The five derivatives at 0, computed from the DSL source in both modes.
pub fn kink_family_rows() -> Result<Vec<(&'static str, f64, f64, f64)>> {
    let names = [
        ("relu", "relu", 0.0),
        ("relu2", "relu2", 1.0),
        ("relu3", "relu3", 0.5),
        ("zero", "zero", 1.0),
        ("id-zero", "id_minus_zero", 0.0),
    ];
    let mut rows = Vec::new();
    for (label, name, want) in names {
        let art = compile_source::<f64>(KINK_FAMILY_SRC, name).map_err(|d| anyhow::anyhow!("{}", d[0]))?;
        let (_, trace) = art.program.evaluate(&[0.0])?;
        let f = forward_ad(&art.program, &trace)?.gradient()[0];
        let b = backward_ad(&art.program, &trace)?.gradient()[0];
        rows.push((label, f, b, want));
    }
    Ok(rows)
}

fn kink_demo() -> Result<Report> {
    let rows = kink_family_rows()?;
    let cells: Vec<Vec<String>> = rows
        .iter()
        .map(|(n, f, b, w)| vec![n.to_string(), "0".into(), format!("{f}"), format!("{b}"), num(*w)])
        .collect();
    let header = ["function", "x", "forward", "backward", "expected"];
    let human = table(&header, &cells);
    let json_rows: Vec<_> = rows
        .iter()
        .map(|(n, f, b, w)| json!({ "function": n, "x": 0.0, "forward": f, "backward": b, "expected": w }))
        .collect();
    let mut r = Report::new("demo figure1", json!({ "rows": json_rows }), human);
    r.table("demo", &header, cells);
    for (n, f, b, w) in &rows {
        r.require(f == w && b == w, "golden value", || format!("{n}: forward {f}, backward {b}, expected {w}"));
    }
    Ok(r)
}

#[allow(clippy::too_many_arguments)]
fn prescribe(f: &FnArgs, s: f64, shift: f64, coord: usize, base: Option<&[f64]>, samples: usize, seed: u64, emit: bool) -> Result<Report> {
    let art = load::function(&f.file, &f.name)?;
    let p = art.params.len();
    if coord >= p {
        bail!("coordinate {coord} out of range for `{}` with {p} parameter(s)", art.function);
    }
    let mut at = match base {
        Some(b) => {
            load::check_point(&art, b)?;
            b.to_vec()
        }
        None => vec![0.0; p],
    };
    at[coord] = s;
    let q = prescribe_derivative(&art.program, coord, s, shift)?;
    let violations = q.validate();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut changed = 0;
    let mut compared = 0;
    for _ in 0..samples {
        let x: Vec<f64> = at.iter().map(|&c| c + rng.random_range(-3.0..3.0)).collect();
        let (Ok(a), Ok(b)) = (art.program.call1(&x), q.call1(&x)) else { continue };
        compared += 1;
        if a.to_bits() != b.to_bits() {
            changed += 1;
        }
    }
    let before = gradient(&art.program, &at)?[coord];
    let after = gradient(&q, &at)?[coord];
    let mut human = format!(
        "{} + {shift} * zero(x{} - {s})\nnodes              {} -> {}\nvalues compared    {compared} ({changed} changed)\nderivative at {}   {before} -> {after} (shift {})\n",
        art.function,
        coord + 1,
        art.program.node_count(),
        q.node_count(),
        fmt_vec(&at),
        after - before
    );
    if emit {
        human += &format!("\n{}\n", q.to_json());
    }
    let mut r = Report::new(
        "prescribe",
        json!({
            "function": art.function,
            "source_hash": art.source_hash,
            "point": at,
            "coordinate": coord,
            "shift": shift,
            "samples": compared,
            "values_changed": changed,
            "derivative_before": before,
            "derivative_after": after,
            "program": emit.then(|| serde_json::from_str::<serde_json::Value>(&q.to_json()).ok()).flatten(),
        }),
        human,
    );
    r.require(violations.is_empty(), "valid program", || format!("{violations:?}"));
    r.require(changed == 0, "values unchanged", || format!("{changed} of {compared} values differ"));
    r.require(after == before + shift, "derivative shift", || format!("{before} + {shift} != {after}"));
    Ok(r)
}
