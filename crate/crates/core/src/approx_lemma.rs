//! Monte-Carlo verification of the Gaussian approximation lemma.
//!
//! For independent standard Gaussians g = (g_1, ..., g_n) and Sobolev-smooth
//! h_j(g), the second-moment identity
//!
//! ```text
//! E (sum_j g_j h_j - sum_j dh_j/dg_j)^2
//!   = sum_j E h_j^2 + sum_{j,k} E (dh_j/dg_k * dh_k/dg_j)
//! ```
//!
//! holds exactly. Both sides are estimated on the same Gaussian draws
//! (common random numbers), which makes the 4-standard-error agreement test
//! tight. The SK variant applies the identity to the quenched fields
//! h_j = N^{-1/2} <(sigma_j - <sigma_j>) f(l_1, r_1)> conditionally on the
//! couplings outside row 1, with the Jacobian taken by central finite
//! differences on rebuilt enumeration tables.

use crate::error::{Error, Result};
use crate::sk::gibbs::{self, build_exact_gibbs, ExactGibbsTable};
use crate::sk::DisorderMatrix;
use crate::stein::{solve_stein, SteinSolution};
use crate::streams::{self, stream};
use crate::testfn::TestFunction;
use rand::Rng;
use rand_distr::StandardNormal;

/// Enumeration cap for the SK variant: each finite-difference probe rebuilds
/// a full 2^N table.
pub const SK_LEMMA_CAP: usize = 14;

/// Finite-difference step in the coupling for the SK Jacobian.
pub const SK_FD_STEP: f64 = 1e-4;

/// A family h_1..h_n of smooth functions of n Gaussians, with analytic
/// partial derivatives.
pub trait SmoothFieldFamily {
    fn dimension(&self) -> usize;
    /// h_j(g).
    fn value(&self, g: &[f64], j: usize) -> f64;
    /// dh_j / dg_k at g.
    fn partial(&self, g: &[f64], j: usize, k: usize) -> f64;
}

/// Checks the family invariant: analytic partials match central finite
/// differences within `tol` at `points` random evaluation points.
pub fn spot_check_gradients(
    family: &dyn SmoothFieldFamily,
    points: usize,
    seed: u64,
    tol: f64,
) -> Result<()> {
    let n = family.dimension();
    let mut rng = streams::rng(seed, stream::GAUSS_MC);
    let step = 1e-5;
    for p in 0..points {
        let mut g: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        for j in 0..n {
            for k in 0..n {
                let orig = g[k];
                g[k] = orig + step;
                let up = family.value(&g, j);
                g[k] = orig - step;
                let down = family.value(&g, j);
                g[k] = orig;
                let fd = (up - down) / (2.0 * step);
                let analytic = family.partial(&g, j, k);
                if (fd - analytic).abs() > tol {
                    return Err(Error::NumericFailure(format!(
                        "gradient mismatch at point {p}, (j, k) = ({j}, {k}): \
                         fd {fd} vs analytic {analytic}"
                    )));
                }
            }
        }
    }
    Ok(())
}

/// Both sides of the lemma with their Monte-Carlo errors. `diff_stderr` is
/// the standard error of the per-sample difference (the common-random-
/// numbers combined error; the right scale for |lhs - rhs|).
#[derive(Debug, Clone, Copy)]
pub struct LemmaSides {
    pub lhs: f64,
    pub rhs: f64,
    pub lhs_stderr: f64,
    pub rhs_stderr: f64,
    pub diff_stderr: f64,
}

fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Monte-Carlo residual of Gaussian integration by parts,
/// |E g f(g) - E f'(g)|, with the pooled standard error of the per-sample
/// difference g f(g) - f'(g).
pub fn ibp_residual(
    f: impl Fn(f64) -> f64,
    fprime: impl Fn(f64) -> f64,
    samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if samples < 2 {
        return Err(Error::invalid("need at least 2 samples"));
    }
    let mut rng = streams::rng(seed, stream::GAUSS_MC);
    let mut diffs = Vec::with_capacity(samples);
    for _ in 0..samples {
        let g: f64 = rng.sample(StandardNormal);
        let d = g * f(g) - fprime(g);
        if !d.is_finite() {
            return Err(Error::NumericFailure(format!("non-finite value at g = {g}")));
        }
        diffs.push(d);
    }
    let (mean, se) = mean_and_stderr(&diffs);
    Ok((mean.abs(), se))
}

/// Estimates both sides of the lemma for an analytic family, on common draws.
pub fn approximation_lemma_sides(
    family: &dyn SmoothFieldFamily,
    samples: usize,
    seed: u64,
) -> Result<LemmaSides> {
    if samples < 1000 {
        return Err(Error::invalid(format!(
            "need at least 10^3 samples, got {samples}"
        )));
    }
    let n = family.dimension();
    let mut rng = streams::rng(seed, stream::GAUSS_MC);
    let mut lhs_vals = Vec::with_capacity(samples);
    let mut rhs_vals = Vec::with_capacity(samples);
    let mut g = vec![0.0f64; n];
    for _ in 0..samples {
        for gi in &mut g {
            *gi = rng.sample(StandardNormal);
        }
        let mut linear = 0.0;
        let mut divergence = 0.0;
        let mut sq = 0.0;
        for j in 0..n {
            let hj = family.value(&g, j);
            if !hj.is_finite() {
                return Err(Error::NumericFailure("non-finite family value".into()));
            }
            linear += g[j] * hj;
            divergence += family.partial(&g, j, j);
            sq += hj * hj;
        }
        let mut cross = 0.0;
        for j in 0..n {
            for k in 0..n {
                cross += family.partial(&g, j, k) * family.partial(&g, k, j);
            }
        }
        lhs_vals.push((linear - divergence).powi(2));
        rhs_vals.push(sq + cross);
    }
    let (lhs, lhs_stderr) = mean_and_stderr(&lhs_vals);
    let (rhs, rhs_stderr) = mean_and_stderr(&rhs_vals);
    let diffs: Vec<f64> = lhs_vals
        .iter()
        .zip(&rhs_vals)
        .map(|(a, b)| a - b)
        .collect();
    let (_, diff_stderr) = mean_and_stderr(&diffs);
    Ok(LemmaSides {
        lhs,
        rhs,
        lhs_stderr,
        rhs_stderr,
        diff_stderr,
    })
}

/// h_j vector of the SK quenched-field family for one realization of row-1
/// couplings: h_j = N^{-1/2} <(sigma_j - <sigma_j>) f(l_1, r_1)>, j >= 1.
fn sk_field_values(
    table: &ExactGibbsTable,
    disorder: &DisorderMatrix,
    q: f64,
    stein: &SteinSolution,
) -> Vec<f64> {
    let n = table.n_sites();
    let sqrt_n = (n as f64).sqrt();
    let marginals = table.marginals();
    let r1 = gibbs::r_value_from_marginals(&marginals, disorder, table.params().beta(), q, 0);
    let r_const = stein.r(r1).expect("bounded u");
    let row: Vec<f64> = disorder.row(0).iter().map(|g| g / sqrt_n).collect();

    let mut f_mean = 0.0;
    let mut spin_f = vec![0.0f64; n];
    gibbs::scan_configs(disorder, &[&row], |view| {
        let p = table.prob(view.index);
        if p == 0.0 {
            return;
        }
        let f_val = stein.f_with_r(view.functionals[0], r1, r_const);
        f_mean += p * f_val;
        for (acc, s) in spin_f.iter_mut().zip(view.spins) {
            *acc += p * f64::from(*s) * f_val;
        }
    });
    (1..n)
        .map(|j| (spin_f[j] - marginals[j] * f_mean) / sqrt_n)
        .collect()
}

/// The lemma applied to the SK quenched fields, conditionally on all
/// couplings outside row 1. Each replication draws a fresh row 1, rebuilds
/// the exact table, and measures the (N-1)x(N-1) Jacobian dh_j/dg_1k by
/// central finite differences (step `SK_FD_STEP`) on rebuilt tables.
pub fn approximation_lemma_sk(
    table: &ExactGibbsTable,
    disorder: &DisorderMatrix,
    q: f64,
    u_name: &str,
    replications: usize,
    seed: u64,
) -> Result<LemmaSides> {
    let n = table.n_sites();
    if n > SK_LEMMA_CAP {
        return Err(Error::CapacityExceeded {
            n_sites: n,
            cap: SK_LEMMA_CAP,
        });
    }
    if disorder.n_sites() != n {
        return Err(Error::invalid("table and disorder disagree on n_sites"));
    }
    if !(0.0..1.0).contains(&q) {
        return Err(Error::invalid(format!("q must be in [0, 1), got {q}")));
    }
    if replications < 2 {
        return Err(Error::invalid("need at least 2 replications"));
    }
    let params = *table.params();
    let u = TestFunction::by_name(u_name, params.beta(), params.h())?;
    let nu = gibbs::nu_params(&params, 0.0, q)?;
    let stein = solve_stein(&nu, u)?;

    let fields_for_row = |row: &[f64]| -> Result<Vec<f64>> {
        let d = disorder.with_row(0, row)?;
        let t = build_exact_gibbs(&params, &d)?;
        Ok(sk_field_values(&t, &d, q, &stein))
    };

    let m = n - 1; // fields h_1..h_{n-1}
    let mut lhs_vals = Vec::with_capacity(replications);
    let mut rhs_vals = Vec::with_capacity(replications);
    for rep in 0..replications {
        let mut rng = streams::rng(streams::mix(seed, &[rep as u64]), stream::ROW_REFRESH);
        let mut row = vec![0.0f64; n];
        for r in row.iter_mut().skip(1) {
            *r = rng.sample(StandardNormal);
        }
        let h = fields_for_row(&row)?;

        // Jacobian by central differences: perturbing g_1k re-evaluates all h_j.
        let mut jac = vec![vec![0.0f64; m]; m]; // jac[j][k] = dh_j / dg_1k
        for k in 1..n {
            let mut up = row.clone();
            up[k] += SK_FD_STEP;
            let h_up = fields_for_row(&up)?;
            let mut down = row.clone();
            down[k] -= SK_FD_STEP;
            let h_down = fields_for_row(&down)?;
            for j in 0..m {
                jac[j][k - 1] = (h_up[j] - h_down[j]) / (2.0 * SK_FD_STEP);
            }
        }

        let linear: f64 = (1..n).map(|j| row[j] * h[j - 1]).sum();
        let divergence: f64 = (0..m).map(|j| jac[j][j]).sum();
        let sq: f64 = h.iter().map(|v| v * v).sum();
        let mut cross = 0.0;
        for j in 0..m {
            for k in 0..m {
                cross += jac[j][k] * jac[k][j];
            }
        }
        lhs_vals.push((linear - divergence).powi(2));
        rhs_vals.push(sq + cross);
    }
    let (lhs, lhs_stderr) = mean_and_stderr(&lhs_vals);
    let (rhs, rhs_stderr) = mean_and_stderr(&rhs_vals);
    let diffs: Vec<f64> = lhs_vals
        .iter()
        .zip(&rhs_vals)
        .map(|(a, b)| a - b)
        .collect();
    let (_, diff_stderr) = mean_and_stderr(&diffs);
    Ok(LemmaSides {
        lhs,
        rhs,
        lhs_stderr,
        rhs_stderr,
        diff_stderr,
    })
}

// --- analytic families used by the oracle tests -----------------------------

/// h_j = c_j (constants): lhs = rhs = sum c_j^2.
pub struct ConstantFamily(pub Vec<f64>);

impl SmoothFieldFamily for ConstantFamily {
    fn dimension(&self) -> usize {
        self.0.len()
    }
    fn value(&self, _g: &[f64], j: usize) -> f64 {
        self.0[j]
    }
    fn partial(&self, _g: &[f64], _j: usize, _k: usize) -> f64 {
        0.0
    }
}

/// h_j = g_j: lhs = Var(sum g^2) = 2n, rhs = n + n.
pub struct IdentityFamily(pub usize);

impl SmoothFieldFamily for IdentityFamily {
    fn dimension(&self) -> usize {
        self.0
    }
    fn value(&self, g: &[f64], j: usize) -> f64 {
        g[j]
    }
    fn partial(&self, _g: &[f64], j: usize, k: usize) -> f64 {
        f64::from(j == k)
    }
}

/// h_j = g_{(j+1) mod n}: lhs = rhs = n for n >= 3.
pub struct ShiftFamily(pub usize);

impl SmoothFieldFamily for ShiftFamily {
    fn dimension(&self) -> usize {
        self.0
    }
    fn value(&self, g: &[f64], j: usize) -> f64 {
        g[(j + 1) % self.0]
    }
    fn partial(&self, _g: &[f64], j: usize, k: usize) -> f64 {
        f64::from(k == (j + 1) % self.0)
    }
}
