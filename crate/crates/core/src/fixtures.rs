//! Reference programs and random generators shared by tests, the command
//! line tool and the experiments.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::autodiff::push_zero;
use crate::expr::ElementaryExpr;
use crate::optimize::FiniteSumProblem;
use crate::program::{Program, ProgramBuilder};
use crate::scalar::Scalar;
use crate::selection::{prims, SelectionFunction};

fn lit<S: Scalar>(v: f64) -> S {
    S::lit(v)
}

fn single<S: Scalar>(g: SelectionFunction<S>) -> Program<S> {
    let mut b = ProgramBuilder::new(g.arity());
    let ins: Vec<usize> = (0..g.arity()).collect();
    let n = b.push(g, &ins);
    b.finish(&[n]).expect("single node program")
}

fn negate<S: Scalar>() -> SelectionFunction<S> {
    prims::affine(vec![-S::one()], S::zero())
}

fn sum2<S: Scalar>() -> SelectionFunction<S> {
    prims::affine(vec![S::one(), S::one()], S::zero())
}

/// `relu(t)`.
pub fn relu_program<S: Scalar>() -> Program<S> {
    single(prims::relu())
}

/// `relu2(t) = relu(-t) + t`.
pub fn relu2_program<S: Scalar>() -> Program<S> {
    let mut b = ProgramBuilder::new(1);
    let neg = b.push(negate(), &[0]);
    let r = b.push(prims::relu(), &[neg]);
    let out = b.push(sum2(), &[r, 0]);
    b.finish(&[out]).unwrap()
}

/// `relu3(t) = (relu(t) + relu2(t)) / 2`.
pub fn relu3_program<S: Scalar>() -> Program<S> {
    let mut b = ProgramBuilder::new(1);
    let r = b.push(prims::relu(), &[0]);
    let neg = b.push(negate(), &[0]);
    let rn = b.push(prims::relu(), &[neg]);
    let r2 = b.push(sum2(), &[rn, 0]);
    let half = lit::<S>(0.5);
    let out = b.push(prims::affine(vec![half, half], S::zero()), &[r, r2]);
    b.finish(&[out]).unwrap()
}

/// `zero(t) = relu2(t) - relu(t)`.
pub fn zero_program<S: Scalar>() -> Program<S> {
    let mut b = ProgramBuilder::new(1);
    let z = push_zero(&mut b, 0);
    b.finish(&[z]).unwrap()
}

/// `t - zero(t)`, the identity with derivative 0 at the origin under AD.
pub fn identity_minus_zero_program<S: Scalar>() -> Program<S> {
    let mut b = ProgramBuilder::new(1);
    let z = push_zero(&mut b, 0);
    let out = b.push(prims::affine(vec![S::one(), -S::one()], S::zero()), &[0, z]);
    b.finish(&[out]).unwrap()
}

/// relu, relu2, relu3, zero and id - zero with their AD derivatives at 0.
pub fn kink_family<S: Scalar>() -> Vec<(&'static str, Program<S>, S)> {
    vec![
        ("relu", relu_program(), S::zero()),
        ("relu2", relu2_program(), S::one()),
        ("relu3", relu3_program(), lit(0.5)),
        ("zero", zero_program(), S::one()),
        ("id-zero", identity_minus_zero_program(), S::zero()),
    ]
}

fn x1<S: Scalar>() -> ElementaryExpr<S> {
    ElementaryExpr::var(1, 0)
}

/// `t²`.
pub fn square_program<S: Scalar>() -> Program<S> {
    single(SelectionFunction::smooth(&x1::<S>() * &x1()))
}

/// `t² / 2`.
pub fn half_square_program<S: Scalar>() -> Program<S> {
    single(SelectionFunction::smooth((&x1::<S>() * &x1()).scale(lit(0.5))))
}

/// `-t²`, unbounded below.
pub fn negative_square_program<S: Scalar>() -> Program<S> {
    single(SelectionFunction::smooth((&x1::<S>() * &x1()).neg()))
}

/// `(max(a, b), min(a, b))`.
pub fn sort2_program<S: Scalar>() -> Program<S> {
    let mut b = ProgramBuilder::new(2);
    let hi = b.push(prims::max2(), &[0, 1]);
    let lo = b.push(prims::min2(), &[0, 1]);
    b.finish(&[hi, lo]).unwrap()
}

/// `n` nested relus.
pub fn relu_chain<S: Scalar>(n: usize) -> Program<S> {
    let mut b = ProgramBuilder::new(1);
    let mut cur = 0;
    for _ in 0..n {
        cur = b.push(prims::relu(), &[cur]);
    }
    b.finish(&[cur]).unwrap()
}

/// `a (t - 1)² + zero(t)`.
fn shifted_square_plus_zero<S: Scalar>(a: f64) -> Program<S> {
    let mut b = ProgramBuilder::new(1);
    let u = ElementaryExpr::affine(vec![S::one()], -S::one());
    let sq = b.push(SelectionFunction::smooth((&u * &u).scale(lit(a))), &[0]);
    let z = push_zero(&mut b, 0);
    let out = b.push(sum2(), &[sq, z]);
    b.finish(&[out]).unwrap()
}

/// `J(t) = (t - 1)² / 2 + zero(t)` as the mean of
/// `(t - 1)²/4 + zero(t)` and `3(t - 1)²/4 + zero(t)`. AD returns 0 at the
/// origin although the true derivative there is -1.
pub fn artefact_problem<S: Scalar>() -> FiniteSumProblem<S> {
    FiniteSumProblem::new(vec![shifted_square_plus_zero(0.25), shifted_square_plus_zero(0.75)]).unwrap()
}

/// `f_i(x) = a_i |x - x*|² / 2` on `R^2` with a common minimizer
/// `x* = (1, -0.5)`.
pub fn quadratic_problem<S: Scalar>() -> FiniteSumProblem<S> {
    let star = [1.0, -0.5];
    let parts = [0.5, 1.0, 1.5]
        .iter()
        .map(|&a| {
            let mut e = ElementaryExpr::zero(2);
            for (i, &s) in star.iter().enumerate() {
                let mut c = vec![S::zero(); 2];
                c[i] = S::one();
                let d = ElementaryExpr::affine(c, lit(-s));
                e = &e + &(&d * &d);
            }
            single(SelectionFunction::smooth(e.scale(lit(a / 2.0))))
        })
        .collect();
    FiniteSumProblem::new(parts).unwrap()
}

/// Samples `a_i` and targets `y_i = relu(<w*, a_i>)` for the one-neuron
/// regression, `w* = (1, 2)`.
pub const NEURON_SAMPLES: [([f64; 2], f64); 3] = [([1.0, 0.0], 1.0), ([0.0, 1.0], 2.0), ([1.0, 1.0], 3.0)];

/// `f_i(w) = (relu(<w, a_i>) - y_i)² / 2` over the weights `w ∈ R^2`.
pub fn relu_neuron_problem<S: Scalar>() -> FiniteSumProblem<S> {
    let parts = NEURON_SAMPLES
        .iter()
        .map(|&(a, y)| {
            let mut b = ProgramBuilder::new(2);
            let pre = b.push(prims::affine(vec![lit(a[0]), lit(a[1])], S::zero()), &[0, 1]);
            let act = b.push(prims::relu(), &[pre]);
            let r = ElementaryExpr::affine(vec![S::one()], lit(-y));
            let out = b.push(SelectionFunction::smooth((&r * &r).scale(lit(0.5))), &[act]);
            b.finish(&[out]).unwrap()
        })
        .collect();
    FiniteSumProblem::new(parts).unwrap()
}

/// `J = relu`.
pub fn relu_problem<S: Scalar>() -> FiniteSumProblem<S> {
    FiniteSumProblem::new(vec![relu_program()]).unwrap()
}

fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// Random expression over `arity` variables with at most `depth` levels of
/// operators. May be undefined at a given point.
pub fn random_expr<S: Scalar, R: Rng + ?Sized>(rng: &mut R, arity: usize, depth: usize) -> ElementaryExpr<S> {
    if depth == 0 || rng.random_bool(0.2) {
        return match rng.random_range(0..3) {
            0 => ElementaryExpr::constant(arity, lit(rng.random_range(-2.0..2.0))),
            1 => ElementaryExpr::var(arity, rng.random_range(0..arity)),
            _ => ElementaryExpr::affine((0..arity).map(|_| lit(normal(rng))).collect(), lit(normal(rng))),
        };
    }
    let a = random_expr(rng, arity, depth - 1);
    match rng.random_range(0..6) {
        0 => &a + &random_expr(rng, arity, depth - 1),
        1 => &a - &random_expr(rng, arity, depth - 1),
        2 => &a * &random_expr(rng, arity, depth - 1),
        3 => &a / &random_expr(rng, arity, depth - 1),
        4 => a.scale(lit(0.5)).exp(),
        _ => a.ln(),
    }
}

/// Whether every division and logarithm in `e` stays at least `margin` away
/// from its singularity at `x` and all node values are below `bound`.
pub fn well_conditioned<S: Scalar>(e: &ElementaryExpr<S>, x: &[S], margin: f64, bound: f64) -> bool {
    use crate::expr::Node;
    let mut vals = Vec::new();
    if e.eval_with(x, &mut vals).is_err() {
        return false;
    }
    let (margin, bound) = (lit::<S>(margin), lit::<S>(bound));
    e.nodes().iter().zip(&vals).all(|(n, v)| {
        let ok_sing = match *n {
            Node::Div(_, d) => vals[d].abs() >= margin,
            Node::Log(a) => vals[a] >= margin,
            _ => true,
        };
        ok_sing && v.abs() <= bound
    })
}

/// A random expression together with a well-conditioned point in `[-2, 2]^p`.
pub fn random_expr_at<S: Scalar, R: Rng + ?Sized>(rng: &mut R, arity: usize, depth: usize) -> (ElementaryExpr<S>, Vec<S>) {
    loop {
        let e = random_expr(rng, arity, depth);
        for _ in 0..20 {
            let x: Vec<S> = (0..arity).map(|_| lit(rng.random_range(-2.0..2.0))).collect();
            if well_conditioned(&e, &x, 0.1, 1e3) {
                return (e, x);
            }
        }
    }
}

/// Random DAG program with `p` inputs and `m <= max_nodes` nodes mixing
/// relu, abs, max, min, exp, products and affine nodes.
pub fn random_dag<S: Scalar, R: Rng + ?Sized>(rng: &mut R, p: usize, max_nodes: usize) -> Program<S> {
    assert!(max_nodes > p);
    let m = rng.random_range(p + 1..=max_nodes);
    let mut b = ProgramBuilder::new(p);
    for k in p..m {
        let pick = |rng: &mut R| rng.random_range(0..k);
        let choice = if k < 2 { rng.random_range(0..2) } else { rng.random_range(0..7) };
        match choice {
            0 => {
                let j = pick(rng);
                b.push(prims::relu(), &[j])
            }
            1 => {
                let j = pick(rng);
                b.push(prims::abs(), &[j])
            }
            2 | 3 => {
                let (i, j) = distinct_pair(rng, k);
                let g = if rng.random_bool(0.5) { prims::max2() } else { prims::min2() };
                b.push(g, &[i, j])
            }
            4 => {
                let j = pick(rng);
                let e = ElementaryExpr::affine(vec![lit(0.3 * normal(rng))], S::zero()).exp();
                b.push(SelectionFunction::smooth(e), &[j])
            }
            5 => {
                let (i, j) = distinct_pair(rng, k);
                let e = &ElementaryExpr::var(2, 0) * &ElementaryExpr::var(2, 1);
                b.push(SelectionFunction::smooth(e.scale(lit(0.5))), &[i, j])
            }
            _ => {
                let n = rng.random_range(1..=3.min(k));
                let mut preds: Vec<usize> = rand::seq::index::sample(rng, k, n).into_vec();
                preds.sort_unstable();
                let coeffs = (0..n).map(|_| lit(normal(rng))).collect();
                b.push(prims::affine(coeffs, lit(normal(rng))), &preds)
            }
        };
    }
    let last = b.len() - 1;
    b.finish(&[last]).unwrap()
}

fn distinct_pair<R: Rng + ?Sized>(rng: &mut R, k: usize) -> (usize, usize) {
    let v = rand::seq::index::sample(rng, k, 2).into_vec();
    (v[0].min(v[1]), v[0].max(v[1]))
}

/// Random continuous piecewise-smooth program on `R^2`: a weighted sum of
/// kinked terms (relu, abs, max, min of affine maps, a relu of a curved
/// guard, a relu times a smooth factor) plus a smooth part. With
/// `artefact`, a `zero(·)` term on a random line is added so AD returns
/// spurious derivatives on that line.
pub fn random_piecewise_r2<S: Scalar, R: Rng + ?Sized>(rng: &mut R, artefact: bool) -> Program<S> {
    let mut b = ProgramBuilder::new(2);
    let aff = |rng: &mut R, b: &mut ProgramBuilder<S>| {
        let c = vec![lit(normal(rng)), lit(normal(rng))];
        b.push(prims::affine(c, lit(0.5 * normal(rng))), &[0, 1])
    };
    let mut terms = Vec::new();
    let count = rng.random_range(2..=5);
    for _ in 0..count {
        let t = match rng.random_range(0..6) {
            0 => {
                let a = aff(rng, &mut b);
                b.push(prims::relu(), &[a])
            }
            1 => {
                let a = aff(rng, &mut b);
                b.push(prims::abs(), &[a])
            }
            2 => {
                let (a, c) = (aff(rng, &mut b), aff(rng, &mut b));
                b.push(prims::max2(), &[a, c])
            }
            3 => {
                let (a, c) = (aff(rng, &mut b), aff(rng, &mut b));
                b.push(prims::min2(), &[a, c])
            }
            4 => {
                let r2 = lit::<S>(rng.random_range(0.2..2.0));
                let x = ElementaryExpr::var(2, 0);
                let y = ElementaryExpr::var(2, 1);
                let e = &(&(&x * &x) + &(&y * &y)) - &ElementaryExpr::constant(2, r2);
                let g = b.push(SelectionFunction::smooth(e), &[0, 1]);
                b.push(prims::relu(), &[g])
            }
            _ => {
                let a = aff(rng, &mut b);
                let r = b.push(prims::relu(), &[a]);
                let s = ElementaryExpr::affine(vec![lit(0.3 * normal(rng)), lit(0.3 * normal(rng))], S::zero()).exp();
                let sm = b.push(SelectionFunction::smooth(s), &[0, 1]);
                let prod = &ElementaryExpr::var(2, 0) * &ElementaryExpr::var(2, 1);
                b.push(SelectionFunction::smooth(prod), &[r, sm])
            }
        };
        terms.push(t);
    }
    let x = ElementaryExpr::var(2, 0);
    let y = ElementaryExpr::var(2, 1);
    let smooth = &(&x * &y).scale(lit(0.2 * normal(rng))) + &ElementaryExpr::affine(vec![lit(normal(rng)), lit(normal(rng))], S::zero());
    terms.push(b.push(SelectionFunction::smooth(smooth), &[0, 1]));
    if artefact {
        let a = aff(rng, &mut b);
        terms.push(push_zero(&mut b, a));
    }
    let weights = terms.iter().map(|_| lit(normal(rng))).collect();
    let out = b.push(prims::affine(weights, S::zero()), &terms);
    b.finish(&[out]).unwrap()
}

/// `relu(x₁ + x₂² - 1/2)`: a single kink along a curve in `R^2`.
pub fn curved_guard_program<S: Scalar>() -> Program<S> {
    let x = ElementaryExpr::var(2, 0);
    let y = ElementaryExpr::var(2, 1);
    let e = &(&x + &(&y * &y)) - &ElementaryExpr::constant(2, lit(0.5));
    let mut b = ProgramBuilder::new(2);
    let g = b.push(SelectionFunction::smooth(e), &[0, 1]);
    let r = b.push(prims::relu(), &[g]);
    b.finish(&[r]).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn fixtures_validate() {
        for (_, p, _) in kink_family::<f64>() {
            assert!(p.validate().is_empty());
        }
        assert_eq!(relu_program::<f64>().node_count(), 2);
        assert_eq!(sort2_program::<f64>().output_dim(), 2);
    }

    #[test]
    fn artefact_objective() {
        let pr = artefact_problem::<f64>();
        for x in [-1.5, 0.0, 0.5, 2.0] {
            let j = pr.value(&[x]).unwrap();
            assert!((j - 0.5 * (x - 1.0) * (x - 1.0)).abs() < 1e-15);
        }
        let g = crate::autodiff::gradient(pr.objective(), &[0.0]).unwrap();
        assert_eq!(g, vec![0.0]);
    }

    #[test]
    fn neuron_interpolates() {
        let pr = relu_neuron_problem::<f64>();
        assert_eq!(pr.value(&[1.0, 2.0]).unwrap(), 0.0);
    }

    #[test]
    fn random_generators_produce_valid_programs() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let d = random_dag::<f64, _>(&mut rng, 2, 30);
            assert!(d.validate().is_empty());
            assert!(d.node_count() <= 30);
            let f = random_piecewise_r2::<f64, _>(&mut rng, true);
            assert!(f.validate().is_empty());
            let (e, x) = random_expr_at::<f64, _>(&mut rng, 3, 4);
            assert!(e.eval(&x).is_ok());
        }
    }
}
