//! Gaussian quadrature and one-dimensional adaptive integration.
//!
//! The Gauss-Hermite rule here uses the probabilist normalization: nodes and
//! weights integrate against the standard normal density, so weights sum to 1
//! and `E[z^2] = 1`. Rules are built with the Golub-Welsch algorithm on the
//! Jacobi matrix of the Hermite recurrence He_{k+1} = x He_k - k He_{k-1}.

use crate::error::{Error, Result};
use nalgebra::DMatrix;

/// Largest supported rule order.
pub const MAX_ORDER: usize = 256;

/// Nodes and weights of a probabilist Gauss-Hermite rule.
///
/// Exact (up to rounding) for polynomials of degree <= 2*order - 1 under the
/// standard normal weight.
#[derive(Debug, Clone)]
pub struct GaussHermiteRule {
    order: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

/// Builds the order-`order` probabilist Gauss-Hermite rule.
pub fn gauss_hermite(order: usize) -> Result<GaussHermiteRule> {
    if order < 1 || order > MAX_ORDER {
        return Err(Error::invalid(format!(
            "gauss_hermite order must be in 1..={MAX_ORDER}, got {order}"
        )));
    }
    let n = order;
    let jacobi = DMatrix::<f64>::from_fn(n, n, |i, j| {
        if i + 1 == j {
            (j as f64).sqrt()
        } else if j + 1 == i {
            (i as f64).sqrt()
        } else {
            0.0
        }
    });
    let eigen = jacobi.symmetric_eigen();
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let v0 = eigen.eigenvectors[(0, i)];
            (eigen.eigenvalues[i], v0 * v0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut nodes: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let mut weights: Vec<f64> = pairs.iter().map(|p| p.1).collect();

    // The rule is symmetric; enforce it exactly so that odd integrands
    // cancel to zero instead of to rounding noise.
    for i in 0..n / 2 {
        let j = n - 1 - i;
        let x = 0.5 * (nodes[j] - nodes[i]);
        nodes[i] = -x;
        nodes[j] = x;
        let w = 0.5 * (weights[i] + weights[j]);
        weights[i] = w;
        weights[j] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    Ok(GaussHermiteRule {
        order,
        nodes,
        weights,
    })
}

impl GaussHermiteRule {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// E f(z) for standard normal z. See [`gaussian_expectation`].
    pub fn expect(&self, f: impl Fn(f64) -> f64) -> Result<f64> {
        gaussian_expectation(f, self)
    }

    /// E f(m + s z); convenient for integrating against N(m, s^2).
    pub fn expect_affine(&self, m: f64, s: f64, f: impl Fn(f64) -> f64) -> Result<f64> {
        gaussian_expectation(|z| f(m + s * z), self)
    }
}

/// E f(z) under the standard normal law, by the given rule.
pub fn gaussian_expectation(f: impl Fn(f64) -> f64, rule: &GaussHermiteRule) -> Result<f64> {
    let mut acc = 0.0;
    for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
        let v = f(x);
        if !v.is_finite() {
            return Err(Error::NumericFailure(format!(
                "integrand returned {v} at node {x}"
            )));
        }
        acc += w * v;
    }
    Ok(acc)
}

/// Adaptive Simpson quadrature of `f` over `[a, b]` to absolute tolerance `tol`.
///
/// The integrand is assumed finite on the interval. Known interior
/// discontinuities should be passed to [`integrate_with_splits`] instead.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_rec(f, a, b, fa, fm, fb, whole, tol, 52)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        left + right + delta / 15.0
    } else {
        let half = 0.5 * tol;
        simpson_rec(f, a, m, fa, flm, fm, left, half, depth - 1)
            + simpson_rec(f, m, b, fm, frm, fb, right, half, depth - 1)
    }
}

/// Adaptive Simpson over `[a, b]` split at each interior point of `splits`
/// (sorted ascending). Used for integrands with jump discontinuities.
pub fn integrate_with_splits(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    splits: &[f64],
    tol: f64,
) -> f64 {
    let mut cuts: Vec<f64> = Vec::with_capacity(splits.len() + 2);
    cuts.push(a);
    for &s in splits {
        if s > a && s < b {
            cuts.push(s);
        }
    }
    cuts.push(b);
    let pieces = cuts.len() - 1;
    let piece_tol = tol / pieces as f64;
    let mut total = 0.0;
    for w in cuts.windows(2) {
        total += adaptive_simpson(f, w[0], w[1], piece_tol);
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn order_one_is_the_mean() {
        let rule = gauss_hermite(1).unwrap();
        assert_eq!(rule.nodes(), &[0.0]);
        assert_eq!(rule.weights(), &[1.0]);
    }

    #[test]
    fn order_two_nodes_are_unit() {
        // He_2 = x^2 - 1, roots +-1, equal weights.
        let rule = gauss_hermite(2).unwrap();
        assert_abs_diff_eq!(rule.nodes()[0], -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(rule.nodes()[1], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(rule.weights()[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(rule.weights()[1], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn normal_moments_are_exact() {
        // E z^m = 0 (odd), (m-1)!! (even), within 1e-11 for m <= 2*order-1.
        for order in [2usize, 3, 8, 17, 64] {
            let rule = gauss_hermite(order).unwrap();
            assert_abs_diff_eq!(rule.weights().iter().sum::<f64>(), 1.0, epsilon = 1e-14);
            let mut expected = 1.0; // (m-1)!! running value for even m
            for m in 0..=(2 * order - 1) {
                let got = rule.expect(|z| z.powi(m as i32)).unwrap();
                if m % 2 == 1 {
                    assert_abs_diff_eq!(got, 0.0, epsilon = 1e-11);
                } else {
                    if m > 0 {
                        expected *= (m - 1) as f64;
                    }
                    assert_abs_diff_eq!(got / expected, 1.0, epsilon = 1e-11);
                }
            }
        }
    }

    #[test]
    fn variance_matches_standard_normal() {
        for order in [2usize, 16, 64, 256] {
            let rule = gauss_hermite(order).unwrap();
            assert_abs_diff_eq!(rule.expect(|z| z * z).unwrap(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn characteristic_function_oracle() {
        // E cos(z) = e^{-1/2}.
        let rule = gauss_hermite(32).unwrap();
        let got = rule.expect(f64::cos).unwrap();
        assert_abs_diff_eq!(got, (-0.5f64).exp(), epsilon = 1e-12);
    }

    #[test]
    fn identity_integrates_to_zero() {
        let rule = gauss_hermite(64).unwrap();
        assert_abs_diff_eq!(rule.expect(|z| z).unwrap(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn constant_argument_collapses() {
        let rule = gauss_hermite(64).unwrap();
        let (beta, h) = (0.0, 0.7);
        let got = rule
            .expect(|z| (beta * z + h as f64).tanh().powi(2))
            .unwrap();
        assert_abs_diff_eq!(got, 0.7f64.tanh().powi(2), epsilon = 1e-15);
    }

    #[test]
    fn order_out_of_range_rejected() {
        assert!(gauss_hermite(0).is_err());
        assert!(gauss_hermite(MAX_ORDER + 1).is_err());
    }

    #[test]
    fn non_finite_integrand_reported() {
        let rule = gauss_hermite(8).unwrap();
        assert!(matches!(
            rule.expect(|z| 1.0 / z),
            Err(Error::NumericFailure(_))
        ));
    }

    #[test]
    fn simpson_matches_closed_forms() {
        let got = adaptive_simpson(&|x: f64| x.sin(), 0.0, std::f64::consts::PI, 1e-12);
        assert_abs_diff_eq!(got, 2.0, epsilon = 1e-11);
        let got = adaptive_simpson(&|x: f64| (-x * x / 2.0).exp(), -10.0, 10.0, 1e-13);
        assert_abs_diff_eq!(got, (2.0 * std::f64::consts::PI).sqrt(), epsilon = 1e-11);
    }

    #[test]
    fn splits_handle_jumps() {
        // step function: integral of 1{x <= 0.25} over [-1, 1] is 1.25
        let f = |x: f64| if x <= 0.25 { 1.0 } else { 0.0 };
        let got = integrate_with_splits(&f, -1.0, 1.0, &[0.25], 1e-12);
        assert_abs_diff_eq!(got, 1.25, epsilon = 1e-10);
    }
}
