//! Exact Gibbs-measure quantities by enumeration of all 2^N configurations.
//!
//! Enumeration walks configurations in Gray-code order, so each step flips a
//! single spin and the interaction sum, magnetization and any linear
//! functionals of the spins update in O(N). Tables are immutable once built
//! and safe to share across threads.

use super::{DisorderMatrix, ModelParams, SpinConfig};
use crate::alias::AliasTable;
use crate::error::{Error, Result};
use crate::mixture::MixtureGaussianParams;
use crate::streams::{self, stream};

/// Hard cap on exact enumeration (2^24 probabilities ~ 1 GiB of f64 pairs).
pub const ENUMERATION_CAP: usize = 24;

/// One visited configuration during a Gray-code scan.
#[derive(Debug)]
pub struct ConfigView<'a> {
    /// Configuration index (bit i = (sigma_i + 1) / 2, little-endian).
    pub index: usize,
    /// sum_{i<j} g_ij sigma_i sigma_j.
    pub interaction: f64,
    /// sum_i sigma_i.
    pub magnetization: f64,
    /// Current spins (entries -1 / +1).
    pub spins: &'a [i8],
    /// dot(v_k, sigma) for each caller-supplied functional v_k.
    pub functionals: &'a [f64],
}

/// Visits all 2^N configurations of `disorder` in Gray-code order,
/// maintaining the interaction sum, magnetization and the dot product of the
/// spins with each functional in `functionals` (each of length N).
pub fn scan_configs<F: FnMut(&ConfigView<'_>)>(
    disorder: &DisorderMatrix,
    functionals: &[&[f64]],
    mut visit: F,
) {
    let n = disorder.n_sites();
    assert!(n <= ENUMERATION_CAP, "scan beyond the enumeration cap");
    for v in functionals {
        assert_eq!(v.len(), n, "functional length must equal n_sites");
    }
    let mut spins = vec![-1i8; n];
    // phi[i] = sum_{j != i} g_ij sigma_j
    let mut phi: Vec<f64> = (0..n)
        .map(|i| -(0..n).filter(|&j| j != i).map(|j| disorder.coupling(i, j)).sum::<f64>())
        .collect();
    let mut interaction: f64 = (0..n)
        .map(|i| ((i + 1)..n).map(|j| disorder.coupling(i, j)).sum::<f64>())
        .sum();
    let mut magnetization = -(n as f64);
    let mut fvals: Vec<f64> = functionals.iter().map(|v| -v.iter().sum::<f64>()).collect();

    visit(&ConfigView {
        index: 0,
        interaction,
        magnetization,
        spins: &spins,
        functionals: &fvals,
    });

    for step in 1usize..(1 << n) {
        let b = step.trailing_zeros() as usize;
        let old = f64::from(spins[b]);
        interaction -= 2.0 * old * phi[b];
        spins[b] = -spins[b];
        let new = -old;
        for j in 0..n {
            if j != b {
                phi[j] += 2.0 * new * disorder.coupling(j, b);
            }
        }
        magnetization += 2.0 * new;
        for (fv, v) in fvals.iter_mut().zip(functionals) {
            *fv += 2.0 * new * v[b];
        }
        visit(&ConfigView {
            index: step ^ (step >> 1),
            interaction,
            magnetization,
            spins: &spins,
            functionals: &fvals,
        });
    }
}

/// All 2^N log-weights, the log-partition function, and the normalized
/// probabilities of one disorder realization.
#[derive(Debug, Clone)]
pub struct ExactGibbsTable {
    params: ModelParams,
    log_weights: Vec<f64>,
    log_partition: f64,
    probabilities: Vec<f64>,
}

/// Builds the exact table. log Z is accumulated by streaming log-sum-exp
/// (running max with rescale), so beta sqrt(N) up to ~20 stays in range.
pub fn build_exact_gibbs(params: &ModelParams, disorder: &DisorderMatrix) -> Result<ExactGibbsTable> {
    let n = params.n_sites();
    if n != disorder.n_sites() {
        return Err(Error::invalid("params and disorder disagree on n_sites"));
    }
    if n > ENUMERATION_CAP {
        return Err(Error::CapacityExceeded {
            n_sites: n,
            cap: ENUMERATION_CAP,
        });
    }
    let scale = params.beta() / (n as f64).sqrt();
    let h = params.h();
    let mut log_weights = vec![0.0f64; 1 << n];
    let mut running_max = f64::NEG_INFINITY;
    let mut running_sum = 0.0f64;
    scan_configs(disorder, &[], |view| {
        let lw = scale * view.interaction + h * view.magnetization;
        log_weights[view.index] = lw;
        if lw <= running_max {
            running_sum += (lw - running_max).exp();
        } else {
            running_sum = running_sum * (running_max - lw).exp() + 1.0;
            running_max = lw;
        }
    });
    let log_partition = running_max + running_sum.ln();
    let probabilities = log_weights
        .iter()
        .map(|&lw| (lw - log_partition).exp())
        .collect();
    Ok(ExactGibbsTable {
        params: *params,
        log_weights,
        log_partition,
        probabilities,
    })
}

impl ExactGibbsTable {
    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn n_sites(&self) -> usize {
        self.params.n_sites()
    }

    pub fn n_configs(&self) -> usize {
        self.probabilities.len()
    }

    pub fn log_partition(&self) -> f64 {
        self.log_partition
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn prob(&self, index: usize) -> f64 {
        self.probabilities[index]
    }

    /// <sigma_i> for every site, in one pass.
    pub fn marginals(&self) -> Vec<f64> {
        let n = self.n_sites();
        let mut plus = vec![0.0f64; n];
        for (c, &p) in self.probabilities.iter().enumerate() {
            let mut bits = c;
            while bits != 0 {
                let i = bits.trailing_zeros() as usize;
                plus[i] += p;
                bits &= bits - 1;
            }
        }
        plus.into_iter().map(|p| 2.0 * p - 1.0).collect()
    }

    /// <sigma_i>, in [-1, 1].
    pub fn spin_marginal(&self, i: usize) -> Result<f64> {
        let n = self.n_sites();
        if i >= n {
            return Err(Error::invalid(format!("site index {i} out of range 0..{n}")));
        }
        let mut plus = 0.0;
        for (c, &p) in self.probabilities.iter().enumerate() {
            if c >> i & 1 == 1 {
                plus += p;
            }
        }
        Ok(2.0 * plus - 1.0)
    }

    /// <sigma_i sigma_j>; equals 1 when i = j.
    pub fn pair_correlation(&self, i: usize, j: usize) -> Result<f64> {
        let n = self.n_sites();
        if i >= n || j >= n {
            return Err(Error::invalid(format!(
                "site indices ({i}, {j}) out of range 0..{n}"
            )));
        }
        if i == j {
            return Ok(1.0);
        }
        let mut agree = 0.0;
        for (c, &p) in self.probabilities.iter().enumerate() {
            if (c >> i ^ c >> j) & 1 == 0 {
                agree += p;
            }
        }
        Ok(2.0 * agree - 1.0)
    }

    /// Exact k-replica product-measure expectation <f(sigma^1, ..., sigma^k)>.
    /// Supported exactly for k in {1, 2}; larger k goes through the sampled
    /// estimators in the MCMC module.
    pub fn quenched_average<F>(&self, replicas: usize, f: F) -> Result<f64>
    where
        F: Fn(&[&SpinConfig]) -> f64,
    {
        let n = self.n_sites();
        match replicas {
            1 => {
                let mut acc = 0.0;
                for (c, &p) in self.probabilities.iter().enumerate() {
                    let cfg = SpinConfig::from_index(n, c);
                    acc += p * f(&[&cfg]);
                }
                Ok(acc)
            }
            2 => {
                let configs: Vec<SpinConfig> =
                    (0..self.n_configs()).map(|c| SpinConfig::from_index(n, c)).collect();
                let mut acc = 0.0;
                for (c1, &p1) in self.probabilities.iter().enumerate() {
                    if p1 == 0.0 {
                        continue;
                    }
                    let mut inner = 0.0;
                    for (c2, &p2) in self.probabilities.iter().enumerate() {
                        inner += p2 * f(&[&configs[c1], &configs[c2]]);
                    }
                    acc += p1 * inner;
                }
                Ok(acc)
            }
            0 => Err(Error::invalid("replica count must be >= 1")),
            k => Err(Error::Unsupported(format!(
                "exact quenched averages support k <= 2 replicas (got {k}); \
                 use the MCMC sampled estimators for larger k"
            ))),
        }
    }

    /// Exact <(R_12 - q)^2> via pair correlations:
    /// (1/N^2) sum_{ij} <sigma_i sigma_j>^2 - 2q (1/N) sum_i <sigma_i>^2 + q^2.
    pub fn overlap_moment_exact2(&self, q: f64) -> f64 {
        let n = self.n_sites();
        let mut corr_sq = 0.0;
        for i in 0..n {
            for j in 0..n {
                let c = self.pair_correlation(i, j).expect("indices in range");
                corr_sq += c * c;
            }
        }
        let marg_sq: f64 = self.marginals().iter().map(|m| m * m).sum();
        corr_sq / (n * n) as f64 - 2.0 * q * marg_sq / n as f64 + q * q
    }

    /// Monte-Carlo <(R_12 - q)^4> from replica pairs drawn off an alias table
    /// (O(1) per draw after O(2^N) setup). Returns (estimate, standard error).
    pub fn overlap_moment_sampled4(
        &self,
        q: f64,
        samples: usize,
        seed: u64,
    ) -> Result<(f64, f64)> {
        if samples < 100 {
            return Err(Error::invalid(format!(
                "need at least 100 samples, got {samples}"
            )));
        }
        let n = self.n_sites();
        let alias = AliasTable::new(&self.probabilities)?;
        let mut rng = streams::rng(seed, stream::REPLICA);
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for _ in 0..samples {
            let c1 = alias.sample(&mut rng);
            let c2 = alias.sample(&mut rng);
            let disagree = (c1 ^ c2).count_ones() as f64;
            let overlap = (n as f64 - 2.0 * disagree) / n as f64;
            let x = (overlap - q).powi(4);
            sum += x;
            sumsq += x * x;
        }
        let m = samples as f64;
        let mean = sum / m;
        let var = (sumsq / m - mean * mean).max(0.0) / (m - 1.0) * m;
        Ok((mean, (var / m).sqrt()))
    }

    /// |<sigma_i> - <tanh(beta l_i + h)>|, both sides exact. This is an
    /// algebraic identity of the Gibbs measure, so the residual is rounding
    /// noise only.
    pub fn callen_identity_residual(&self, disorder: &DisorderMatrix, i: usize) -> Result<f64> {
        let n = self.n_sites();
        if disorder.n_sites() != n {
            return Err(Error::invalid("disorder size must match the table"));
        }
        if i >= n {
            return Err(Error::invalid(format!("site index {i} out of range 0..{n}")));
        }
        let sqrt_n = (n as f64).sqrt();
        let row: Vec<f64> = disorder.row(i).iter().map(|g| g / sqrt_n).collect();
        let beta = self.params.beta();
        let h = self.params.h();
        let mut lhs = 0.0;
        let mut rhs = 0.0;
        scan_configs(disorder, &[&row], |view| {
            let p = self.probabilities[view.index];
            lhs += p * f64::from(view.spins[i]);
            rhs += p * (beta * view.functionals[0] + h).tanh();
        });
        Ok((lhs - rhs).abs())
    }

    /// The centering value r_i = (1/sqrt N) sum_{j != i} g_ij <sigma_j>
    /// - beta (1 - q) <sigma_i> of the mixture law nu_i.
    pub fn r_value(&self, disorder: &DisorderMatrix, q: f64, i: usize) -> Result<f64> {
        if !(0.0..1.0).contains(&q) {
            return Err(Error::invalid(format!("q must be in [0, 1), got {q}")));
        }
        let n = self.n_sites();
        if disorder.n_sites() != n {
            return Err(Error::invalid("disorder size must match the table"));
        }
        if i >= n {
            return Err(Error::invalid(format!("site index {i} out of range 0..{n}")));
        }
        let marginals = self.marginals();
        Ok(r_value_from_marginals(
            &marginals,
            disorder,
            self.params.beta(),
            q,
            i,
        ))
    }
}

/// r_i computed from precomputed marginals (shared with the experiment
/// runners, which already hold the marginal vector).
pub fn r_value_from_marginals(
    marginals: &[f64],
    disorder: &DisorderMatrix,
    beta: f64,
    q: f64,
    i: usize,
) -> f64 {
    let n = disorder.n_sites();
    let mut field = 0.0;
    for j in 0..n {
        if j != i {
            field += disorder.coupling(i, j) * marginals[j];
        }
    }
    field / (n as f64).sqrt() - beta * (1.0 - q) * marginals[i]
}

/// The random mixture law nu_i = M(beta, h, r_i, 1 - q) of the local field.
pub fn nu_params(params: &ModelParams, r_i: f64, q: f64) -> Result<MixtureGaussianParams> {
    if q >= 1.0 {
        return Err(Error::invalid(format!(
            "q must be < 1 for a positive mixture variance, got {q}"
        )));
    }
    MixtureGaussianParams::new(params.beta(), params.h(), r_i, 1.0 - q)
}
