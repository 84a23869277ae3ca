//! The two-component Gaussian mixture family M(a, b, mu, sigma^2).
//!
//! A member has density
//!
//! ```text
//! psi(x) = Z^{-1} cosh(a x + b) exp(-(x - mu)^2 / (2 sigma^2)),
//! Z      = sqrt(2 pi) sigma cosh(a mu + b) exp(a^2 sigma^2 / 2),
//! ```
//!
//! which is exactly the mixture p N(mu + a sigma^2, sigma^2) +
//! (1-p) N(mu - a sigma^2, sigma^2) with mixing weight
//! p = e^{a mu + b} / (e^{a mu + b} + e^{-a mu - b}). The family is closed
//! under the tanh identity  E tanh(a X + b) = tanh(a mu + b), which is the
//! mixture-Gaussian face of the Onsager correction.

use crate::error::{Error, Result};
use crate::quad::{self, GaussHermiteRule};
use crate::streams::{self, stream};
use crate::testfn::TestFunction;
use rand::Rng;
use rand_distr::StandardNormal;

const LN_SQRT_TWO_PI: f64 = 0.918_938_533_204_672_8;

/// Gauss-Hermite order used for smooth mixture expectations.
pub const SMOOTH_QUAD_ORDER: usize = 64;

/// Absolute tolerance for the split-aware Simpson path.
pub const SPLIT_QUAD_TOL: f64 = 1e-11;

/// Half-width, in component standard deviations, of the truncated domain used
/// for discontinuous integrands. The discarded tail mass is below 1e-30.
pub const SPLIT_QUAD_SPAN: f64 = 12.0;

/// log cosh with no overflow for large |y|.
pub(crate) fn ln_cosh(y: f64) -> f64 {
    let a = y.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

/// The quadruple (a, b, mu, sigma^2) identifying a member of the family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixtureGaussianParams {
    a: f64,
    b: f64,
    mu: f64,
    sigma2: f64,
}

/// The same member written as an explicit two-Gaussian mixture.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixtureDecomposition {
    /// Weight of the `mean_plus` component, in (0, 1).
    pub p: f64,
    pub mean_plus: f64,
    pub mean_minus: f64,
    pub sigma2: f64,
}

impl MixtureGaussianParams {
    pub fn new(a: f64, b: f64, mu: f64, sigma2: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && mu.is_finite()) {
            return Err(Error::invalid("mixture parameters must be finite"));
        }
        if !(sigma2.is_finite() && sigma2 > 0.0) {
            return Err(Error::invalid(format!(
                "mixture variance must be positive, got {sigma2}"
            )));
        }
        Ok(MixtureGaussianParams { a, b, mu, sigma2 })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn sigma(&self) -> f64 {
        self.sigma2.sqrt()
    }

    /// Same (a, b, sigma^2) with the location parameter replaced.
    pub fn with_mu(&self, mu: f64) -> Self {
        MixtureGaussianParams { mu, ..*self }
    }

    /// log of the normalizing constant Z.
    pub fn log_norm(&self) -> f64 {
        LN_SQRT_TWO_PI + self.sigma().ln() + ln_cosh(self.a * self.mu + self.b)
            + 0.5 * self.a * self.a * self.sigma2
    }

    /// The density psi(x); computed in log space so large |a x + b| is safe.
    pub fn density(&self, x: f64) -> f64 {
        let log_num = ln_cosh(self.a * x + self.b) - (x - self.mu).powi(2) / (2.0 * self.sigma2);
        (log_num - self.log_norm()).exp()
    }

    /// The explicit two-Gaussian form (p, mu +- a sigma^2, sigma^2).
    pub fn decompose(&self) -> MixtureDecomposition {
        let s = self.a * self.mu + self.b;
        // p = e^s / (e^s + e^{-s}) = logistic(2s)
        let p = 1.0 / (1.0 + (-2.0 * s).exp());
        MixtureDecomposition {
            p,
            mean_plus: self.mu + self.a * self.sigma2,
            mean_minus: self.mu - self.a * self.sigma2,
            sigma2: self.sigma2,
        }
    }

    /// E X = mu + tanh(a mu + b) a sigma^2.
    pub fn mean(&self) -> f64 {
        self.mu + (self.a * self.mu + self.b).tanh() * self.a * self.sigma2
    }

    /// The closed form of the tanh identity: integral of tanh(a x + b) psi(x) dx.
    pub fn tanh_moment(&self) -> f64 {
        (self.a * self.mu + self.b).tanh()
    }

    /// E u(X) by quadrature: Gauss-Hermite per component for smooth u,
    /// split-aware adaptive Simpson when u declares discontinuities.
    pub fn expectation(&self, u: &TestFunction) -> Result<f64> {
        if u.is_smooth() {
            let rule = quad::gauss_hermite(SMOOTH_QUAD_ORDER)?;
            self.expectation_smooth_with(|x| u.eval(x), &rule)
        } else {
            Ok(self.expectation_split(|x| u.eval(x), u.discontinuities()))
        }
    }

    /// E f(X) for smooth f, with a caller-supplied rule.
    pub fn expectation_smooth_with(
        &self,
        f: impl Fn(f64) -> f64,
        rule: &GaussHermiteRule,
    ) -> Result<f64> {
        let d = self.decompose();
        let s = self.sigma();
        let plus = rule.expect_affine(d.mean_plus, s, &f)?;
        let minus = rule.expect_affine(d.mean_minus, s, &f)?;
        Ok(d.p * plus + (1.0 - d.p) * minus)
    }

    /// E f(X) for f with jump discontinuities at `splits`.
    pub fn expectation_split(&self, f: impl Fn(f64) -> f64, splits: &[f64]) -> f64 {
        let d = self.decompose();
        let s = self.sigma();
        let lo = d.mean_minus.min(d.mean_plus) - SPLIT_QUAD_SPAN * s;
        let hi = d.mean_minus.max(d.mean_plus) + SPLIT_QUAD_SPAN * s;
        let g = |x: f64| f(x) * self.density(x);
        quad::integrate_with_splits(&g, lo, hi, splits, SPLIT_QUAD_TOL)
    }

    /// Quadrature nodes and weights representing this mixture (the per-
    /// component Gauss-Hermite points with p-weighted masses). Weights sum
    /// to 1; useful as an "exact sample" in discrepancy checks.
    pub fn quadrature_nodes(&self, order: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        let rule = quad::gauss_hermite(order)?;
        let d = self.decompose();
        let s = self.sigma();
        let mut points = Vec::with_capacity(2 * order);
        let mut weights = Vec::with_capacity(2 * order);
        for (&z, &w) in rule.nodes().iter().zip(rule.weights()) {
            points.push(d.mean_plus + s * z);
            weights.push(d.p * w);
        }
        for (&z, &w) in rule.nodes().iter().zip(rule.weights()) {
            points.push(d.mean_minus + s * z);
            weights.push((1.0 - d.p) * w);
        }
        Ok((points, weights))
    }

    /// Draws `count` points: Bernoulli(p) component choice, then a Gaussian.
    /// Deterministic given the seed.
    pub fn sample(&self, count: usize, seed: u64) -> Vec<f64> {
        let d = self.decompose();
        let s = self.sigma();
        let mut rng = streams::rng(seed, stream::MIXTURE);
        (0..count)
            .map(|_| {
                let m = if rng.random::<f64>() < d.p {
                    d.mean_plus
                } else {
                    d.mean_minus
                };
                let z: f64 = rng.sample(StandardNormal);
                m + s * z
            })
            .collect()
    }

    /// The Stein characterizing operator of this member applied to f at x:
    /// Tf(x) = f'(x) - ((x - mu)/sigma^2 - a tanh(a x + b)) f(x).
    pub fn stein_apply(&self, f: &TestFunction, x: f64) -> Result<f64> {
        let fp = f
            .deriv(x)
            .ok_or_else(|| Error::invalid(format!("{} has no derivative", f.name())))?;
        Ok(fp - self.stein_drift(x) * f.eval(x))
    }

    /// The drift coefficient (x - mu)/sigma^2 - a tanh(a x + b).
    pub fn stein_drift(&self, x: f64) -> f64 {
        (x - self.mu) / self.sigma2 - self.a * (self.a * x + self.b).tanh()
    }
}

/// Checks the tanh/Onsager identity for the mixture
/// p N(mu1, sigma^2) + (1-p) N(mu2, sigma^2) with mu1 > mu2:
/// lhs = E tanh(a X + b) by quadrature, rhs = tanh(a E X + b - (2p-1) a^2 sigma^2)
/// with a = (mu1 - mu2)/(2 sigma^2), b = (1/2) log(p/(1-p)) - (mu1^2 - mu2^2)/(4 sigma^2).
pub fn onsager_identity_check(p: f64, mu1: f64, mu2: f64, sigma2: f64) -> Result<(f64, f64)> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::invalid(format!("p must be in (0,1), got {p}")));
    }
    if !(mu1 > mu2) {
        return Err(Error::invalid(format!(
            "onsager check requires mu1 > mu2, got {mu1} <= {mu2}"
        )));
    }
    if !(sigma2 > 0.0) {
        return Err(Error::invalid("sigma2 must be positive"));
    }
    let a = (mu1 - mu2) / (2.0 * sigma2);
    let b = 0.5 * (p / (1.0 - p)).ln() - (mu1 * mu1 - mu2 * mu2) / (4.0 * sigma2);
    let rule = quad::gauss_hermite(SMOOTH_QUAD_ORDER)?;
    let s = sigma2.sqrt();
    let u = |x: f64| (a * x + b).tanh();
    let lhs = p * rule.expect_affine(mu1, s, u)? + (1.0 - p) * rule.expect_affine(mu2, s, u)?;
    let mean = p * mu1 + (1.0 - p) * mu2;
    let rhs = (a * mean + b - (2.0 * p - 1.0) * a * a * sigma2).tanh();
    Ok((lhs, rhs))
}

/// Plain Gaussian density phi_{mean, var}(x).
pub fn normal_density(mean: f64, var: f64, x: f64) -> f64 {
    let s = var.sqrt();
    (-(x - mean).powi(2) / (2.0 * var)).exp() / (s * (2.0 * std::f64::consts::PI).sqrt())
}

/// Standard normal CDF (via erfc, accurate in both tails).
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn grid() -> Vec<MixtureGaussianParams> {
        // 50 randomized-but-frozen cases: |a|<=2, |b|<=2, |mu|<=3, sigma2 in [0.25, 4].
        let mut out = Vec::new();
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut next = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..50 {
            let a = 4.0 * next() - 2.0;
            let b = 4.0 * next() - 2.0;
            let mu = 6.0 * next() - 3.0;
            let s2 = 0.25 + 3.75 * next();
            out.push(MixtureGaussianParams::new(a, b, mu, s2).unwrap());
        }
        out
    }

    #[test]
    fn zero_a_b_is_plain_gaussian() {
        let m = MixtureGaussianParams::new(0.0, 0.0, -0.7, 2.3).unwrap();
        for &x in &[-3.0, -0.7, 0.0, 1.5, 4.0] {
            assert_abs_diff_eq!(
                m.density(x),
                normal_density(-0.7, 2.3, x),
                epsilon = 1e-15
            );
        }
    }

    #[test]
    fn density_normalizes_on_grid() {
        for m in grid() {
            let s = m.sigma();
            let total = quad::adaptive_simpson(
                &|x| m.density(x),
                m.mu() - m.a().abs() * m.sigma2() - 12.0 * s,
                m.mu() + m.a().abs() * m.sigma2() + 12.0 * s,
                1e-12,
            );
            assert_abs_diff_eq!(total, 1.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn quadrature_oracle_case() {
        let m = MixtureGaussianParams::new(1.0, 0.5, -0.3, 1.44).unwrap();
        let s = m.sigma();
        let total = quad::adaptive_simpson(
            &|x| m.density(x),
            m.mu() - 12.0 * s - m.a().abs() * m.sigma2(),
            m.mu() + 12.0 * s + m.a().abs() * m.sigma2(),
            1e-12,
        );
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn density_equals_two_gaussian_mixture_pointwise() {
        for m in grid() {
            let d = m.decompose();
            for k in -6..=6 {
                let x = m.mu() + 0.5 * k as f64 * m.sigma();
                let direct = m.density(x);
                let mixed = d.p * normal_density(d.mean_plus, d.sigma2, x)
                    + (1.0 - d.p) * normal_density(d.mean_minus, d.sigma2, x);
                assert_abs_diff_eq!(direct, mixed, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn decomposition_invariants() {
        for m in grid() {
            let d = m.decompose();
            assert!(d.p > 0.0 && d.p < 1.0);
            assert_abs_diff_eq!(
                d.mean_plus - d.mean_minus,
                2.0 * m.a() * m.sigma2(),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn balanced_cases_have_half_weight() {
        let m = MixtureGaussianParams::new(0.0, 0.0, 1.3, 0.8).unwrap();
        assert_abs_diff_eq!(m.decompose().p, 0.5, epsilon = 1e-15);
        // a mu + b = 0 via b = -a mu
        let m = MixtureGaussianParams::new(0.7, -0.7 * 1.3, 1.3, 0.8).unwrap();
        assert_abs_diff_eq!(m.decompose().p, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn logistic_weight_value() {
        // a mu + b = 3 -> p = e^3/(e^3 + e^-3)
        let m = MixtureGaussianParams::new(1.0, 3.0, 0.0, 1.0).unwrap();
        assert_abs_diff_eq!(m.decompose().p, 0.997527376843365, epsilon = 1e-12);
    }

    #[test]
    fn high_temperature_zero_field_member() {
        // M(beta, 0, 0, 1) is (1/2) phi_{beta,1} + (1/2) phi_{-beta,1}.
        let beta = 0.5;
        let m = MixtureGaussianParams::new(beta, 0.0, 0.0, 1.0).unwrap();
        let d = m.decompose();
        assert_abs_diff_eq!(d.p, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(d.mean_plus, beta, epsilon = 1e-15);
        assert_abs_diff_eq!(d.mean_minus, -beta, epsilon = 1e-15);
        assert_abs_diff_eq!(d.sigma2, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn mean_closed_form() {
        let m = MixtureGaussianParams::new(0.0, 1.0, -0.4, 2.0).unwrap();
        assert_abs_diff_eq!(m.mean(), -0.4, epsilon = 1e-15);
        let m = MixtureGaussianParams::new(1.0, 0.0, 0.5, 1.0).unwrap();
        assert_abs_diff_eq!(m.mean(), 0.5 + 0.5f64.tanh(), epsilon = 1e-15);
        // against quadrature
        for m in grid() {
            let rule = quad::gauss_hermite(SMOOTH_QUAD_ORDER).unwrap();
            let num = m.expectation_smooth_with(|x| x, &rule).unwrap();
            assert_abs_diff_eq!(num, m.mean(), epsilon = 1e-10);
        }
    }

    #[test]
    fn tanh_identity_on_grid() {
        for m in grid() {
            let rule = quad::gauss_hermite(SMOOTH_QUAD_ORDER).unwrap();
            let num = m
                .expectation_smooth_with(|x| (m.a() * x + m.b()).tanh(), &rule)
                .unwrap();
            assert_abs_diff_eq!(num, m.tanh_moment(), epsilon = 1e-8);
        }
    }

    #[test]
    fn tanh_moment_special_cases() {
        let m = MixtureGaussianParams::new(0.0, 0.9, 2.0, 1.0).unwrap();
        assert_abs_diff_eq!(m.tanh_moment(), 0.9f64.tanh(), epsilon = 1e-15);
        let m = MixtureGaussianParams::new(0.25, 0.3, 0.4, 0.96).unwrap();
        assert_abs_diff_eq!(m.tanh_moment(), 0.4f64.tanh(), epsilon = 1e-15);
        let m = MixtureGaussianParams::new(1.0, -1.0, 1.0, 1.0).unwrap();
        assert_abs_diff_eq!(m.tanh_moment(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn onsager_identity_cases() {
        // symmetric case: everything zero
        let (lhs, rhs) = onsager_identity_check(0.5, 0.5, -0.5, 1.0).unwrap();
        assert_abs_diff_eq!(lhs, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(rhs, 0.0, epsilon = 1e-15);
        // asymmetric case
        let (lhs, rhs) = onsager_identity_check(0.7, 1.0, -1.0, 1.0).unwrap();
        assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-8);
        // invalid ordering
        assert!(onsager_identity_check(0.5, -1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn onsager_round_trip_through_family() {
        // Map (p, mu1, mu2, sigma2) -> (a, b) and check that M with the
        // matching location parameter reproduces p and the component means.
        let (p, mu1, mu2, s2) = (0.7f64, 1.0f64, -1.0f64, 1.0f64);
        let a = (mu1 - mu2) / (2.0 * s2);
        let b = 0.5 * (p / (1.0 - p)).ln() - (mu1 * mu1 - mu2 * mu2) / (4.0 * s2);
        let mu = 0.5 * (mu1 + mu2);
        let m = MixtureGaussianParams::new(a, b, mu, s2).unwrap();
        let d = m.decompose();
        assert_abs_diff_eq!(d.p, p, epsilon = 1e-12);
        assert_abs_diff_eq!(d.mean_plus, mu1, epsilon = 1e-12);
        assert_abs_diff_eq!(d.mean_minus, mu2, epsilon = 1e-12);
    }

    #[test]
    fn sampling_matches_closed_form_mean() {
        let m = MixtureGaussianParams::new(1.0, 0.5, -0.3, 1.44).unwrap();
        let xs = m.sample(1_000_000, 77);
        let mean: f64 = xs.iter().sum::<f64>() / xs.len() as f64;
        let var: f64 = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / xs.len() as f64;
        let se = (var / xs.len() as f64).sqrt();
        assert!((mean - m.mean()).abs() < 4.0 * se);
        // determinism
        assert_eq!(m.sample(100, 5), m.sample(100, 5));
    }

    #[test]
    fn pure_gaussian_sampling_clt() {
        let m = MixtureGaussianParams::new(0.0, 0.0, 0.4, 1.0).unwrap();
        let xs = m.sample(1_000_000, 3);
        let mean: f64 = xs.iter().sum::<f64>() / xs.len() as f64;
        assert!((mean - 0.4).abs() < 4.0 / 1_000.0);
    }

    #[test]
    fn stein_apply_known_values() {
        let std = MixtureGaussianParams::new(0.0, 0.0, 0.0, 1.0).unwrap();
        let one = TestFunction::constant(1.0);
        assert_abs_diff_eq!(std.stein_apply(&one, 2.0).unwrap(), -2.0, epsilon = 1e-15);
        let id = TestFunction::identity();
        // Tf(x) = 1 - x^2; zero mean under N(0,1)
        assert_abs_diff_eq!(std.stein_apply(&id, 0.0).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(std.stein_apply(&id, 2.0).unwrap(), -3.0, epsilon = 1e-15);
    }

    #[test]
    fn stein_operator_annihilated_by_quadrature() {
        let m = MixtureGaussianParams::new(0.25, 0.3, 0.1, 0.96).unwrap();
        let f = TestFunction::sin();
        let (xs, ws) = m.quadrature_nodes(SMOOTH_QUAD_ORDER).unwrap();
        let mut acc = 0.0;
        for (&x, &w) in xs.iter().zip(&ws) {
            acc += w * m.stein_apply(&f, x).unwrap();
        }
        assert_abs_diff_eq!(acc, 0.0, epsilon = 1e-8);
    }

    #[test]
    fn split_expectation_matches_normal_cdf() {
        // E 1{X <= t} has a closed form through the component CDFs.
        let m = MixtureGaussianParams::new(0.8, -0.2, 0.3, 1.21).unwrap();
        let d = m.decompose();
        let s = m.sigma();
        for &t in &[-1.0, 0.0, 0.7] {
            let u = TestFunction::indicator_leq(t);
            let got = m.expectation(&u).unwrap();
            let exact = d.p * normal_cdf((t - d.mean_plus) / s)
                + (1.0 - d.p) * normal_cdf((t - d.mean_minus) / s);
            assert_abs_diff_eq!(got, exact, epsilon = 1e-10);
        }
    }

    #[test]
    fn rejects_bad_variance() {
        assert!(MixtureGaussianParams::new(0.1, 0.0, 0.0, 0.0).is_err());
        assert!(MixtureGaussianParams::new(0.1, 0.0, 0.0, -1.0).is_err());
    }
}
