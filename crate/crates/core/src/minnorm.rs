//! Minimum-norm point of the convex hull of finitely many vectors.
//!
//! Wolfe's active-set method: keep a corral of affinely independent
//! generators, minimize the norm over their affine hull with an exact
//! solve, and step back into the simplex whenever the affine minimizer
//! leaves it.

use serde::Serialize;

use crate::linalg::{solve, Matrix};
use crate::scalar::{dot, norm, Scalar};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MinNormPoint<S> {
    pub point: Vec<S>,
    pub norm: S,
    /// Convex weights, one per input generator.
    pub weights: Vec<S>,
    pub iterations: usize,
}

const MAX_MAJOR: usize = 1000;

/// Minimum-norm point of `conv(generators)`.
///
/// # Panics
/// If `generators` is empty or the vectors have different lengths.
pub fn min_norm_point<S: Scalar>(generators: &[Vec<S>]) -> MinNormPoint<S> {
    assert!(!generators.is_empty(), "min_norm_point needs at least one generator");
    let dim = generators[0].len();
    assert!(generators.iter().all(|g| g.len() == dim), "generators differ in length");

    let scale = generators.iter().map(|g| dot(g, g)).fold(S::zero(), S::max);
    let eps = S::lit(1e-13) * (S::one() + scale);
    let tiny = S::lit(1e-15);

    let first = (0..generators.len())
        .min_by(|&a, &b| {
            dot(&generators[a], &generators[a])
                .partial_cmp(&dot(&generators[b], &generators[b]))
                .unwrap_or(std::cmp::Ordering::Equal)
        })
        .expect("nonempty");
    let mut corral = vec![first];
    let mut lambda = vec![S::one()];
    let mut x = generators[first].clone();
    let mut iterations = 0;

    while iterations < MAX_MAJOR {
        iterations += 1;
        let xx = dot(&x, &x);
        let (j, xj) = generators
            .iter()
            .enumerate()
            .map(|(j, g)| (j, dot(&x, g)))
            .fold((usize::MAX, S::infinity()), |best, cur| if cur.1 < best.1 { cur } else { best });
        if xx - xj <= eps || corral.contains(&j) {
            break;
        }
        corral.push(j);
        lambda.push(S::zero());

        loop {
            let alpha = match affine_minimizer(generators, &corral) {
                Some(a) => a,
                None => {
                    // the new point is affinely dependent on the corral
                    corral.pop();
                    lambda.pop();
                    break;
                }
            };
            if alpha.iter().all(|&a| a > tiny) {
                lambda = alpha;
                break;
            }
            let mut theta = S::one();
            for (&l, &a) in lambda.iter().zip(&alpha) {
                if a <= tiny && l - a > S::zero() {
                    theta = theta.min(l / (l - a));
                }
            }
            for (l, &a) in lambda.iter_mut().zip(&alpha) {
                *l = *l + theta * (a - *l);
            }
            let mut k = 0;
            while k < corral.len() {
                if lambda[k] <= tiny {
                    corral.remove(k);
                    lambda.remove(k);
                } else {
                    k += 1;
                }
            }
            let total: S = lambda.iter().copied().sum();
            for l in &mut lambda {
                *l = *l / total;
            }
        }
        let next = combine(generators, &corral, &lambda, dim);
        if dot(&next, &next) >= xx && iterations > 1 && corral.len() > 1 {
            x = next;
            break;
        }
        x = next;
    }

    let mut weights = vec![S::zero(); generators.len()];
    for (&c, &l) in corral.iter().zip(&lambda) {
        weights[c] = weights[c] + l;
    }
    let n = norm(&x);
    MinNormPoint { point: x, norm: n, weights, iterations }
}

fn combine<S: Scalar>(generators: &[Vec<S>], corral: &[usize], lambda: &[S], dim: usize) -> Vec<S> {
    let mut x = vec![S::zero(); dim];
    for (&c, &l) in corral.iter().zip(lambda) {
        for (xi, &gi) in x.iter_mut().zip(&generators[c]) {
            *xi = *xi + l * gi;
        }
    }
    x
}

/// Minimizer of `|Σ a_i g_i|` subject to `Σ a_i = 1` over the corral.
fn affine_minimizer<S: Scalar>(generators: &[Vec<S>], corral: &[usize]) -> Option<Vec<S>> {
    let k = corral.len();
    let mut a = Matrix::zeros(k + 1, k + 1);
    let mut scale = S::zero();
    for (r, &i) in corral.iter().enumerate() {
        for (c, &j) in corral.iter().enumerate() {
            let v = dot(&generators[i], &generators[j]);
            a[(r, c)] = v;
            scale = scale.max(v.abs());
        }
        a[(r, k)] = S::one();
        a[(k, r)] = S::one();
    }
    let mut b = vec![S::zero(); k + 1];
    b[k] = S::one();
    let tiny = S::lit(1e-12) * (S::one() + scale);
    let sol = solve(a, b, tiny)?;
    Some(sol[..k].to_vec())
}

/// Euclidean distance from `v` to `conv(generators)`.
pub fn hull_distance<S: Scalar>(v: &[S], generators: &[Vec<S>]) -> S {
    let shifted: Vec<Vec<S>> = generators
        .iter()
        .map(|g| g.iter().zip(v).map(|(&a, &b)| a - b).collect())
        .collect();
    min_norm_point(&shifted).norm
}

/// One-sided Hausdorff distance `max_{c ∈ cloud} dist(c, conv(generators))`.
pub fn hull_excess<S: Scalar>(cloud: &[Vec<S>], generators: &[Vec<S>]) -> S {
    cloud.iter().map(|c| hull_distance(c, generators)).fold(S::zero(), S::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vertex_at_origin() {
        let r = min_norm_point(&[vec![0.0], vec![1.0]]);
        assert_eq!(r.point, vec![0.0]);
        assert_eq!(r.weights, vec![1.0, 0.0]);
        assert_eq!(min_norm_point(&[vec![-1.0], vec![0.0]]).norm, 0.0);
    }

    #[test]
    fn segment_projection() {
        let r = min_norm_point(&[vec![1.0f64, 0.0], vec![0.0, 1.0]]);
        assert!((r.point[0] - 0.5).abs() < 1e-12 && (r.point[1] - 0.5).abs() < 1e-12);
        assert!((r.norm - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert!((r.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn interval_straddling_zero() {
        let r = min_norm_point(&[vec![-1.0f64], vec![2.0]]);
        assert!(r.norm < 1e-12);
        assert!((r.weights[0] - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn singleton_and_duplicates() {
        let r = min_norm_point(&[vec![3.0, 4.0]]);
        assert_eq!(r.norm, 5.0);
        let d = min_norm_point(&[vec![1.0, 1.0], vec![1.0, 1.0], vec![2.0, 0.0]]);
        assert!((d.norm - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn triangle_containing_origin() {
        let g = vec![vec![1.0, 0.0], vec![-1.0, 1.0], vec![-1.0, -1.0]];
        let r = min_norm_point(&g);
        assert!(r.norm < 1e-12);
        assert!(r.weights.iter().all(|&w| w >= 0.0));
    }

    #[test]
    fn distance_helpers() {
        let g = vec![vec![0.0f64], vec![1.0]];
        assert_eq!(hull_distance(&[0.5], &g), 0.0);
        assert!((hull_distance(&[3.0], &g) - 2.0).abs() < 1e-12);
        assert!((hull_excess(&[vec![0.2], vec![-1.0]], &g) - 1.0).abs() < 1e-12);
    }
}
