//! Forward and backward algorithmic differentiation over evaluation traces.
//!
//! Both modes only consume the local selection gradients `d_k` recorded by
//! [`Program::evaluate`], so they differentiate the program with every
//! decision branch frozen at the branch taken during evaluation.

use serde::Serialize;

use crate::error::{check_dim, Error, Result};
use crate::linalg::Matrix;
use crate::program::{EvalTrace, Program, ProgramBuilder};
use crate::scalar::{inf_norm, max_abs_diff, Scalar};
use crate::selection::{prims, SelectionFunction};
use crate::ElementaryExpr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Forward,
    Backward,
}

/// Jacobian (`q x p`) of a program at the traced point.
#[derive(Debug, Clone, PartialEq)]
pub struct AdResult<S> {
    pub mode: Mode,
    pub jacobian: Matrix<S>,
}

impl<S: Scalar> AdResult<S> {
    /// Gradient of the last output.
    pub fn gradient(&self) -> &[S] {
        self.jacobian.row(self.jacobian.rows() - 1)
    }
}

fn check_trace<S: Scalar>(prog: &Program<S>, trace: &EvalTrace<S>) -> Result<()> {
    check_dim(prog.node_count(), trace.node_count())
}

/// Propagates one tangent row per node, `∂x_k/∂x = Σ_{j∈pr(k)} d_k[j] ∂x_j/∂x`.
pub fn forward_ad<S: Scalar>(prog: &Program<S>, trace: &EvalTrace<S>) -> Result<AdResult<S>> {
    check_trace(prog, trace)?;
    let (p, m) = (prog.input_dim(), prog.node_count());
    let mut tangents = Matrix::zeros(m, p);
    for i in 0..p {
        tangents[(i, i)] = S::one();
    }
    for k in p..m {
        let d = trace.local_grad(k);
        for (&j, &dj) in prog.preds(k).iter().zip(d) {
            for c in 0..p {
                tangents[(k, c)] = tangents[(k, c)] + tangents[(j, c)] * dj;
            }
        }
    }
    let rows: Vec<Vec<S>> = prog.output_nodes().map(|k| tangents.row(k).to_vec()).collect();
    Ok(AdResult { mode: Mode::Forward, jacobian: Matrix::from_rows(rows) })
}

/// Adjoint sweep for a single output node into a caller-owned buffer.
///
/// `v` is resized to `m`; on return `v[..p]` holds the gradient.
pub fn backward_into<S: Scalar>(prog: &Program<S>, trace: &EvalTrace<S>, output: usize, v: &mut Vec<S>) {
    let (p, m) = (prog.input_dim(), prog.node_count());
    v.clear();
    v.resize(m, S::zero());
    v[output] = S::one();
    for t in (p..m).rev() {
        let vt = v[t];
        if vt == S::zero() {
            continue;
        }
        for (&j, &dj) in prog.preds(t).iter().zip(trace.local_grad(t)) {
            v[j] = v[j] + vt * dj;
        }
    }
}

/// Backward mode: one adjoint sweep per output node, seeded with `e_out`.
pub fn backward_ad<S: Scalar>(prog: &Program<S>, trace: &EvalTrace<S>) -> Result<AdResult<S>> {
    check_trace(prog, trace)?;
    let p = prog.input_dim();
    let mut v = Vec::new();
    let mut rows = Vec::with_capacity(prog.output_dim());
    for out in prog.output_nodes() {
        backward_into(prog, trace, out, &mut v);
        rows.push(v[..p].to_vec());
    }
    Ok(AdResult { mode: Mode::Backward, jacobian: Matrix::from_rows(rows) })
}

/// Evaluates and runs backward mode; gradient of the last output.
pub fn gradient<S: Scalar>(prog: &Program<S>, x: &[S]) -> Result<Vec<S>> {
    let (_, trace) = prog.evaluate(x)?;
    Ok(backward_ad(prog, &trace)?.gradient().to_vec())
}

/// `‖forward - backward‖_∞` at `x`.
pub fn check_modes_agree<S: Scalar>(prog: &Program<S>, x: &[S]) -> Result<S> {
    let (_, trace) = prog.evaluate(x)?;
    let f = forward_ad(prog, &trace)?;
    let b = backward_ad(prog, &trace)?;
    Ok(max_abs_diff(f.jacobian.as_slice(), b.jacobian.as_slice()))
}

/// Mode discrepancy relative to `1 + ‖grad‖_∞`.
pub fn relative_mode_discrepancy<S: Scalar>(prog: &Program<S>, x: &[S]) -> Result<S> {
    let (_, trace) = prog.evaluate(x)?;
    let f = forward_ad(prog, &trace)?;
    let b = backward_ad(prog, &trace)?;
    let scale = S::one() + inf_norm(b.jacobian.as_slice());
    Ok(max_abs_diff(f.jacobian.as_slice(), b.jacobian.as_slice()) / scale)
}

/// Both sides of the backpropagation identity as dense `m x m` products:
///
/// `P_p (I - e_i e_iᵀ + d_i e_iᵀ)…` and `P_p (I + d_i e_iᵀ)…` for
/// `i = p+1..m` (1-based), where `P_p` keeps the first `p` coordinates.
pub fn backprop_products<S: Scalar>(p: usize, m: usize, ds: &[Vec<S>]) -> Result<(Matrix<S>, Matrix<S>)> {
    if !(0 < p && p < m) {
        return Err(Error::Invalid(format!("need 0 < p < m, got p = {p}, m = {m}")));
    }
    check_dim(m - p, ds.len())?;
    let mut proj = Matrix::zeros(m, m);
    for i in 0..p {
        proj[(i, i)] = S::one();
    }
    let mut left = proj.clone();
    let mut right = proj;
    for (offset, d) in ds.iter().enumerate() {
        check_dim(m, d.len())?;
        let i = p + offset;
        let mut a = Matrix::identity(m);
        let mut b = Matrix::identity(m);
        a[(i, i)] = S::zero();
        for r in 0..m {
            // column i of d_i e_iᵀ is d_i
            a[(r, i)] = a[(r, i)] + d[r];
            b[(r, i)] = b[(r, i)] + d[r];
        }
        left = left.matmul(&a);
        right = right.matmul(&b);
    }
    Ok((left, right))
}

/// Largest entry difference between the two products, see [`backprop_products`].
pub fn check_backprop_identity<S: Scalar>(p: usize, m: usize, ds: &[Vec<S>]) -> Result<S> {
    let (l, r) = backprop_products(p, m, ds)?;
    Ok(l.max_abs_diff(&r))
}

/// The zero program `t -> (relu(-t) + t) - relu(t)` appended to `b` on node `input`.
pub(crate) fn push_zero<S: Scalar>(b: &mut ProgramBuilder<S>, input: usize) -> usize {
    let neg = b.push(SelectionFunction::smooth(ElementaryExpr::var(1, 0).neg()), &[input]);
    let r_neg = b.push(prims::relu(), &[neg]);
    let relu2 = b.push(prims::affine(vec![S::one(), S::one()], S::zero()), &[r_neg, input]);
    let r = b.push(prims::relu(), &[input]);
    b.push(prims::affine(vec![S::one(), -S::one()], S::zero()), &[relu2, r])
}

/// Rewrites `P` into `P + r · zero(x_k - s)`.
///
/// The new program computes the same function (the added term is exactly 0
/// everywhere), but its AD derivative along `x_k` at any point with
/// `x_k = s` is shifted by `r`.
pub fn prescribe_derivative<S: Scalar>(prog: &Program<S>, coord: usize, s: S, r: S) -> Result<Program<S>> {
    if prog.output_dim() != 1 {
        return Err(Error::Dimension { expected: 1, got: prog.output_dim() });
    }
    if coord >= prog.input_dim() {
        return Err(Error::Invalid(format!("coordinate {coord} out of range")));
    }
    let out = prog.node_count() - 1;
    let mut b = ProgramBuilder::from_program(prog);
    let shifted = b.push(prims::affine(vec![S::one()], -s), &[coord]);
    let z = push_zero(&mut b, shifted);
    let last = b.push(prims::affine(vec![S::one(), r], S::zero()), &[out, z]);
    b.finish(&[last])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn kink_family_values_both_modes() {
        let cases = [
            (fixtures::relu_program::<f64>(), 0.0),
            (fixtures::relu2_program(), 1.0),
            (fixtures::relu3_program(), 0.5),
            (fixtures::zero_program(), 1.0),
            (fixtures::identity_minus_zero_program(), 0.0),
        ];
        for (prog, want) in cases {
            let (_, t) = prog.evaluate(&[0.0]).unwrap();
            assert_eq!(forward_ad(&prog, &t).unwrap().gradient(), &[want]);
            assert_eq!(backward_ad(&prog, &t).unwrap().gradient(), &[want]);
        }
    }

    #[test]
    fn away_from_the_artefact() {
        let p = fixtures::identity_minus_zero_program::<f64>();
        assert_eq!(gradient(&p, &[0.3]).unwrap(), vec![1.0]);
        assert_eq!(check_modes_agree(&fixtures::relu3_program::<f64>(), &[0.0]).unwrap(), 0.0);
    }

    #[test]
    fn backprop_identity_single_factor() {
        let (l, r) = backprop_products(1, 2, &[vec![1.0, 0.0]]).unwrap();
        assert_eq!(l, r);
        assert_eq!(l.to_rows(), vec![vec![1.0, 1.0], vec![0.0, 0.0]]);
        assert!(backprop_products::<f64>(2, 2, &[]).is_err());
        assert!(backprop_products(1, 3, &[vec![0.0; 3]]).is_err());
    }

    #[test]
    fn prescribe_on_square() {
        let p = fixtures::square_program::<f64>();
        let q = prescribe_derivative(&p, 0, 1.0, 5.0).unwrap();
        assert_eq!(gradient(&q, &[1.0]).unwrap(), vec![7.0]);
        for i in 0..200 {
            let x = -3.0 + 0.03 * i as f64;
            assert_eq!(q.call1(&[x]).unwrap(), p.call1(&[x]).unwrap());
        }
        let r0 = prescribe_derivative(&p, 0, 1.0, 0.0).unwrap();
        assert_eq!(gradient(&r0, &[1.0]).unwrap(), vec![2.0]);
    }

    #[test]
    fn prescribe_on_relu() {
        let p = fixtures::relu_program::<f64>();
        let q = prescribe_derivative(&p, 0, 2.0, -1.0).unwrap();
        assert_eq!(gradient(&q, &[2.0]).unwrap(), vec![0.0]);
        assert_eq!(q.call1(&[2.0]).unwrap(), 2.0);
        assert!(prescribe_derivative(&p, 3, 0.0, 1.0).is_err());
    }

    #[test]
    fn jacobian_rows_per_output() {
        let p = fixtures::sort2_program::<f64>();
        let (_, t) = p.evaluate(&[1.0, 2.0]).unwrap();
        let f = forward_ad(&p, &t).unwrap();
        let b = backward_ad(&p, &t).unwrap();
        assert_eq!(f.jacobian, b.jacobian);
        assert_eq!(b.jacobian.to_rows(), vec![vec![0.0, 1.0], vec![1.0, 0.0]]);
    }
}
