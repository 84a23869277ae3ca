//! Bounded test functions used across experiments and Stein checks.
//!
//! A [`TestFunction`] bundles a scalar function with the metadata the
//! quadrature and Stein machinery needs: an optional analytic derivative,
//! an optional sup-norm, and the locations of jump discontinuities (which
//! route integrals through the split-aware Simpson path).

use crate::error::{Error, Result};
use std::fmt;
use std::sync::Arc;

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct TestFunction {
    name: String,
    f: ScalarFn,
    derivative: Option<ScalarFn>,
    sup_norm: Option<f64>,
    discontinuities: Vec<f64>,
}

impl fmt::Debug for TestFunction {
    fn fmt(&self, fm: &mut fmt::Formatter<'_>) -> fmt::Result {
        fm.debug_struct("TestFunction")
            .field("name", &self.name)
            .field("sup_norm", &self.sup_norm)
            .field("discontinuities", &self.discontinuities)
            .finish()
    }
}

impl TestFunction {
    pub fn new(
        name: impl Into<String>,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        TestFunction {
            name: name.into(),
            f: Arc::new(f),
            derivative: None,
            sup_norm: None,
            discontinuities: Vec::new(),
        }
    }

    pub fn with_derivative(mut self, d: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.derivative = Some(Arc::new(d));
        self
    }

    pub fn with_sup_norm(mut self, s: f64) -> Self {
        self.sup_norm = Some(s);
        self
    }

    pub fn with_discontinuities(mut self, mut points: Vec<f64>) -> Self {
        points.sort_by(f64::total_cmp);
        self.discontinuities = points;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.f)(x)
    }

    /// Analytic derivative, if one was attached.
    pub fn deriv(&self, x: f64) -> Option<f64> {
        self.derivative.as_ref().map(|d| d(x))
    }

    pub fn has_derivative(&self) -> bool {
        self.derivative.is_some()
    }

    pub fn sup_norm(&self) -> Option<f64> {
        self.sup_norm
    }

    pub fn discontinuities(&self) -> &[f64] {
        &self.discontinuities
    }

    pub fn is_smooth(&self) -> bool {
        self.discontinuities.is_empty()
    }

    // --- named constructors -------------------------------------------------

    pub fn constant(c: f64) -> Self {
        TestFunction::new(format!("const:{c}"), move |_| c)
            .with_derivative(|_| 0.0)
            .with_sup_norm(c.abs())
    }

    pub fn identity() -> Self {
        TestFunction::new("x", |x| x).with_derivative(|_| 1.0)
    }

    pub fn square() -> Self {
        TestFunction::new("x^2", |x| x * x).with_derivative(|x| 2.0 * x)
    }

    pub fn sin() -> Self {
        TestFunction::new("sin", f64::sin)
            .with_derivative(f64::cos)
            .with_sup_norm(1.0)
    }

    pub fn cos() -> Self {
        TestFunction::new("cos", f64::cos)
            .with_derivative(|x| -x.sin())
            .with_sup_norm(1.0)
    }

    /// tanh(a x + b); the theorems' canonical test function with a = beta, b = h.
    pub fn tanh_affine(a: f64, b: f64) -> Self {
        TestFunction::new("tanh", move |x| (a * x + b).tanh())
            .with_derivative(move |x| a / (a * x + b).cosh().powi(2))
            .with_sup_norm(1.0)
    }

    /// Logistic sigmoid 1 / (1 + e^{-x}).
    pub fn sigmoid() -> Self {
        let s = |x: f64| 1.0 / (1.0 + (-x).exp());
        TestFunction::new("sigmoid", s)
            .with_derivative(move |x| {
                let v = s(x);
                v * (1.0 - v)
            })
            .with_sup_norm(1.0)
    }

    /// Indicator of the half line x <= t.
    pub fn indicator_leq(t: f64) -> Self {
        TestFunction::new(format!("indicator:{t}"), move |x| {
            if x <= t {
                1.0
            } else {
                0.0
            }
        })
        .with_sup_norm(1.0)
        .with_discontinuities(vec![t])
    }

    pub fn gauss_bump() -> Self {
        TestFunction::new("exp(-x^2)", |x| (-x * x).exp())
            .with_derivative(|x| -2.0 * x * (-x * x).exp())
            .with_sup_norm(1.0)
    }

    /// Resolves a battery name from an experiment config. `beta` and `h`
    /// parameterize the "tanh" member as tanh(beta x + h).
    pub fn by_name(name: &str, beta: f64, h: f64) -> Result<Self> {
        if let Some(t) = name.strip_prefix("indicator:") {
            let t: f64 = t
                .parse()
                .map_err(|_| Error::invalid(format!("bad indicator threshold in {name:?}")))?;
            return Ok(TestFunction::indicator_leq(t));
        }
        match name {
            "tanh" => Ok(TestFunction::tanh_affine(beta, h)),
            "sin" => Ok(TestFunction::sin()),
            "cos" => Ok(TestFunction::cos()),
            "sigmoid" => Ok(TestFunction::sigmoid()),
            other => Err(Error::invalid(format!(
                "unknown test function {other:?} (expected tanh | sin | cos | sigmoid | indicator:<t>)"
            ))),
        }
    }
}

/// The battery used for the Stein characterizing-operator checks:
/// {1, x, x^2, sin, tanh(a x + b), e^{-x^2}}, all with analytic derivatives.
pub fn characterizing_battery(a: f64, b: f64) -> Vec<TestFunction> {
    vec![
        TestFunction::constant(1.0),
        TestFunction::identity(),
        TestFunction::square(),
        TestFunction::sin(),
        TestFunction::tanh_affine(a, b),
        TestFunction::gauss_bump(),
    ]
}

/// The default experiment battery: bounded functions, smooth and jumpy.
pub fn default_u_battery(beta: f64, h: f64) -> Vec<TestFunction> {
    vec![
        TestFunction::tanh_affine(beta, h),
        TestFunction::sin(),
        TestFunction::cos(),
        TestFunction::sigmoid(),
        TestFunction::indicator_leq(0.0),
        TestFunction::indicator_leq(0.5),
    ]
}
