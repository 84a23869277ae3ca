//! The q self-consistency equation and the TAP fixed-point system.

use crate::error::{Error, Result};
use crate::quad::{self, GaussHermiteRule};
use crate::sk::gibbs::ExactGibbsTable;
use crate::sk::{DisorderMatrix, ModelParams};

/// Gauss-Hermite order for E tanh^2(beta z sqrt(q) + h).
const Q_QUAD_ORDER: usize = 64;
const Q_DAMPING: f64 = 0.5;
const Q_MAX_ITER: usize = 10_000;

/// A solution of q = E tanh^2(beta z sqrt(q) + h).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QSolution {
    pub q: f64,
    pub iterations: usize,
    /// |q - E tanh^2(beta z sqrt(q) + h)| at the returned q.
    pub residual: f64,
}

fn q_map(beta: f64, h: f64, q: f64, rule: &GaussHermiteRule) -> f64 {
    let scale = beta * q.max(0.0).sqrt();
    rule.expect(|z| (scale * z + h).tanh().powi(2))
        .expect("tanh^2 is finite everywhere")
}

/// Solves the q equation by damped iteration from q0 = tanh^2(h).
///
/// At h = 0 and beta <= 1 the high-temperature root q = 0 is returned
/// exactly; at h = 0 and beta > 1 multiple fixed points exist outside the
/// high-temperature regime and the call is refused.
pub fn q_fixed_point(beta: f64, h: f64, tol: f64) -> Result<QSolution> {
    if !(beta.is_finite() && beta >= 0.0) {
        return Err(Error::invalid("beta must be finite and >= 0"));
    }
    if !h.is_finite() {
        return Err(Error::invalid("h must be finite"));
    }
    if !(tol >= 1e-14) {
        return Err(Error::invalid(format!("tol must be >= 1e-14, got {tol}")));
    }
    if h == 0.0 {
        if beta <= 1.0 {
            return Ok(QSolution {
                q: 0.0,
                iterations: 0,
                residual: 0.0,
            });
        }
        return Err(Error::AmbiguousRoot { beta });
    }
    let rule = quad::gauss_hermite(Q_QUAD_ORDER)?;
    let mut q = h.tanh().powi(2);
    let mut trajectory = Vec::new();
    for it in 0..Q_MAX_ITER {
        let mapped = q_map(beta, h, q, &rule);
        let residual = (mapped - q).abs();
        trajectory.push(residual);
        if residual <= tol {
            return Ok(QSolution {
                q,
                iterations: it,
                residual,
            });
        }
        q = (1.0 - Q_DAMPING) * q + Q_DAMPING * mapped;
    }
    Err(Error::ConvergenceFailure {
        iterations: Q_MAX_ITER,
        residual: *trajectory.last().unwrap(),
        trajectory,
    })
}

/// A TAP magnetization vector with convergence metadata.
#[derive(Debug, Clone)]
pub struct TapSolution {
    pub m: Vec<f64>,
    pub iterations: usize,
    /// sup_i |m_i - RHS_i(m)| at the returned iterate.
    pub residual_sup: f64,
    pub converged: bool,
}

fn tap_rhs(disorder: &DisorderMatrix, params: &ModelParams, q: f64, m: &[f64], out: &mut [f64]) {
    let n = params.n_sites();
    let scale = params.beta() / (n as f64).sqrt();
    let onsager = params.beta().powi(2) * (1.0 - q);
    for i in 0..n {
        let mut field = 0.0;
        for j in 0..n {
            if j != i {
                field += disorder.coupling(i, j) * m[j];
            }
        }
        out[i] = (scale * field + params.h() - onsager * m[i]).tanh();
    }
}

/// Damped synchronous iteration of the TAP system
/// m_i <- tanh((beta/sqrt N) sum_{j != i} g_ij m_j + h - beta^2 (1-q) m_i)
/// from m0_i = tanh(h).
///
/// Exhausting `max_iter` is not an error: the last iterate comes back with
/// `converged = false` so experiments can record failure rates.
pub fn tap_iterate(
    disorder: &DisorderMatrix,
    params: &ModelParams,
    q: f64,
    damping: f64,
    tol: f64,
    max_iter: usize,
) -> Result<TapSolution> {
    if params.n_sites() != disorder.n_sites() {
        return Err(Error::invalid("params and disorder disagree on n_sites"));
    }
    if !(0.0..1.0).contains(&q) {
        return Err(Error::invalid(format!("q must be in [0, 1), got {q}")));
    }
    if !(damping > 0.0 && damping <= 1.0) {
        return Err(Error::invalid("damping must be in (0, 1]"));
    }
    if !(tol > 0.0) {
        return Err(Error::invalid("tol must be positive"));
    }
    let n = params.n_sites();
    let mut m = vec![params.h().tanh(); n];
    let mut rhs = vec![0.0; n];
    for it in 1..=max_iter {
        tap_rhs(disorder, params, q, &m, &mut rhs);
        let residual_sup = m
            .iter()
            .zip(&rhs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        if residual_sup <= tol {
            return Ok(TapSolution {
                m,
                iterations: it,
                residual_sup,
                converged: true,
            });
        }
        for (mi, ri) in m.iter_mut().zip(&rhs) {
            *mi = (1.0 - damping) * *mi + damping * ri;
        }
    }
    tap_rhs(disorder, params, q, &m, &mut rhs);
    let residual_sup = m
        .iter()
        .zip(&rhs)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    Ok(TapSolution {
        m,
        iterations: max_iter,
        residual_sup,
        converged: residual_sup <= tol,
    })
}

/// Mean squared deviation (1/N) sum_i (m_i - <sigma_i>)^2 between a TAP
/// solution and the exact marginals.
pub fn tap_vs_exact(solution: &TapSolution, table: &ExactGibbsTable) -> Result<f64> {
    if solution.m.len() != table.n_sites() {
        return Err(Error::invalid("solution and table disagree on n_sites"));
    }
    let exact = table.marginals();
    let n = exact.len() as f64;
    Ok(solution
        .m
        .iter()
        .zip(&exact)
        .map(|(m, e)| (m - e).powi(2))
        .sum::<f64>()
        / n)
}

/// Per-site residual of the TAP equations with the EXACT marginals
/// substituted: <sigma_i> - tanh((beta/sqrt N) sum_{j!=i} g_ij <sigma_j>
/// + h - beta^2 (1-q) <sigma_i>).
pub fn tap_residual_exact(
    table: &ExactGibbsTable,
    disorder: &DisorderMatrix,
    q: f64,
) -> Result<Vec<f64>> {
    if !(0.0..1.0).contains(&q) {
        return Err(Error::invalid(format!("q must be in [0, 1), got {q}")));
    }
    if table.n_sites() != disorder.n_sites() {
        return Err(Error::invalid("table and disorder disagree on n_sites"));
    }
    let params = table.params();
    let marginals = table.marginals();
    let mut rhs = vec![0.0; marginals.len()];
    tap_rhs(disorder, params, q, &marginals, &mut rhs);
    Ok(marginals.iter().zip(&rhs).map(|(m, r)| m - r).collect())
}
