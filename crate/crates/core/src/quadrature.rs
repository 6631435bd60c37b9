//! Gauss-Legendre rules.

use std::sync::OnceLock;

use crate::scalar::Scalar;

/// Nodes and weights of the `n`-point rule on `[-1, 1]`, nodes ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, z);
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// `P_n(z)` and `P_n'(z)` by the three-term recurrence.
fn legendre(n: usize, z: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, z);
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

fn gl16() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(16))
}

/// Nodes of the 16-point rule mapped to `[a, b]`, with matching weights.
pub fn gl16_on<S: Scalar>(a: S, b: S) -> impl Iterator<Item = (S, S)> {
    let (nodes, weights) = gl16();
    let half = (b - a) / S::lit(2.0);
    let mid = (a + b) / S::lit(2.0);
    nodes
        .iter()
        .zip(weights)
        .map(move |(&z, &w)| (mid + half * S::lit(z), half * S::lit(w)))
}

/// `∫_a^b f` with the 16-point rule.
pub fn integrate16<S: Scalar, E>(a: S, b: S, mut f: impl FnMut(S) -> Result<S, E>) -> Result<S, E> {
    let mut acc = S::zero();
    for (t, w) in gl16_on(a, b) {
        acc = acc + w * f(t)?;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_two() {
        for n in [1, 2, 5, 16] {
            let (x, w) = gauss_legendre(n);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-13, "n = {n}");
            assert!(x.windows(2).all(|p| p[0] < p[1]));
        }
    }

    #[test]
    fn two_point_rule() {
        let (x, w) = gauss_legendre(2);
        assert!((x[1] - 1.0 / 3f64.sqrt()).abs() < 1e-15);
        assert!((w[0] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn exact_for_degree_31() {
        let v: f64 = integrate16(0.0, 2.0, |t: f64| Ok::<_, ()>(t.powi(31))).unwrap();
        let exact = 2f64.powi(32) / 32.0;
        assert!((v - exact).abs() / exact < 1e-13);
        let e: f64 = integrate16(-1.0, 1.0, |t: f64| Ok::<_, ()>(t.exp())).unwrap();
        assert!((e - (1f64.exp() - (-1f64).exp())).abs() < 1e-14);
    }
}
