//! Glauber (heat-bath) dynamics for system sizes past the enumeration cap.
//!
//! Single-site updates use the exact conditional law of the Gibbs measure:
//! site i is set to +1 with probability (1 + tanh(beta l_i + h)) / 2, where
//! l_i is the local field. Sweeps visit sites in a fixed scan order for
//! reproducibility; the full-sweep kernel preserves the Gibbs measure (each
//! site kernel does), which the tests verify against an enumerated kernel.

use crate::error::{Error, Result};
use crate::sk::{DisorderMatrix, ModelParams, SpinConfig};
use crate::streams;
use rand::Rng;
use rand_chacha::ChaCha12Rng;

/// One heat-bath chain. Single-threaded by construction; run independent
/// chains (replicas, disorder seeds) on disjoint streams for parallelism.
#[derive(Debug, Clone)]
pub struct GlauberChain {
    params: ModelParams,
    disorder: DisorderMatrix,
    spins: Vec<i8>,
    /// phi[i] = sum_{j != i} g_ij sigma_j, maintained incrementally.
    fields: Vec<f64>,
    sweeps_done: u64,
    rng: ChaCha12Rng,
}

impl GlauberChain {
    /// A chain with a random initial state drawn from (seed, stream_id).
    pub fn new(
        params: &ModelParams,
        disorder: &DisorderMatrix,
        seed: u64,
        stream_id: u64,
    ) -> Result<Self> {
        if params.n_sites() != disorder.n_sites() {
            return Err(Error::invalid("params and disorder disagree on n_sites"));
        }
        let mut rng = streams::rng(seed, stream_id);
        let n = params.n_sites();
        let spins: Vec<i8> = (0..n)
            .map(|_| if rng.random::<bool>() { 1 } else { -1 })
            .collect();
        let fields = compute_fields(disorder, &spins);
        Ok(GlauberChain {
            params: *params,
            disorder: disorder.clone(),
            spins,
            fields,
            sweeps_done: 0,
            rng,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn state(&self) -> SpinConfig {
        SpinConfig::new(self.spins.iter().map(|&s| s).collect()).expect("spins are valid")
    }

    pub fn spins(&self) -> &[i8] {
        &self.spins
    }

    pub fn sweeps_done(&self) -> u64 {
        self.sweeps_done
    }

    /// N single-site heat-bath updates in scan order 0, 1, ..., N-1.
    pub fn sweep(&mut self) {
        let n = self.params.n_sites();
        let beta = self.params.beta();
        let h = self.params.h();
        let sqrt_n = (n as f64).sqrt();
        for i in 0..n {
            let ell = self.fields[i] / sqrt_n;
            let p_plus = 0.5 * (1.0 + (beta * ell + h).tanh());
            let new: i8 = if self.rng.random::<f64>() < p_plus { 1 } else { -1 };
            let old = self.spins[i];
            if new != old {
                self.spins[i] = new;
                let delta = 2.0 * f64::from(new);
                for j in 0..n {
                    if j != i {
                        self.fields[j] += delta * self.disorder.coupling(j, i);
                    }
                }
            }
        }
        self.sweeps_done += 1;
    }

    pub fn run_sweeps(&mut self, count: usize) {
        for _ in 0..count {
            self.sweep();
        }
    }
}

fn compute_fields(disorder: &DisorderMatrix, spins: &[i8]) -> Vec<f64> {
    let n = spins.len();
    (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| j != i)
                .map(|j| disorder.coupling(i, j) * f64::from(spins[j]))
                .sum()
        })
        .collect()
}

/// Heat-bath acceptance probability for sigma_i = +1 derived from the energy
/// difference of the two spin values (w+ / (w+ + w-)); used by tests to
/// confirm the tanh form is the exact conditional law.
pub fn heat_bath_from_energy(beta: f64, h: f64, local_field: f64) -> f64 {
    let up = (beta * local_field + h).exp();
    let down = (-(beta * local_field + h)).exp();
    up / (up + down)
}

fn batch_stderr(values: &[f64]) -> f64 {
    let m = values.len();
    let batches = (m as f64).sqrt().floor() as usize;
    if batches < 2 {
        return f64::NAN;
    }
    let size = m / batches;
    let means: Vec<f64> = (0..batches)
        .map(|b| values[b * size..(b + 1) * size].iter().sum::<f64>() / size as f64)
        .collect();
    let grand = means.iter().sum::<f64>() / batches as f64;
    let var = means.iter().map(|x| (x - grand).powi(2)).sum::<f64>() / (batches - 1) as f64;
    (var / batches as f64).sqrt()
}

/// Time-average marginals with batch-means standard errors.
pub fn estimate_marginals(
    chain: &mut GlauberChain,
    burnin: usize,
    thin: usize,
    draws: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if draws < 100 {
        return Err(Error::invalid(format!(
            "need at least 100 draws, got {draws}"
        )));
    }
    let thin = thin.max(1);
    let n = chain.params.n_sites();
    chain.run_sweeps(burnin);
    let mut series: Vec<Vec<f64>> = vec![Vec::with_capacity(draws); n];
    for _ in 0..draws {
        chain.run_sweeps(thin);
        for (i, s) in chain.spins.iter().enumerate() {
            series[i].push(f64::from(*s));
        }
    }
    let means = series
        .iter()
        .map(|v| v.iter().sum::<f64>() / draws as f64)
        .collect();
    let errs = series.iter().map(|v| batch_stderr(v)).collect();
    Ok((means, errs))
}

/// Overlap moments of (R_12 - q) from two independent chains on the same
/// disorder. Returns ((m2, m2_err), (m4, m4_err)).
#[allow(clippy::too_many_arguments)]
pub fn estimate_overlap_moments(
    params: &ModelParams,
    disorder: &DisorderMatrix,
    q: f64,
    burnin: usize,
    thin: usize,
    draws: usize,
    seed: u64,
) -> Result<((f64, f64), (f64, f64))> {
    if draws < 100 {
        return Err(Error::invalid(format!(
            "need at least 100 draws, got {draws}"
        )));
    }
    let thin = thin.max(1);
    let n = params.n_sites();
    let mut a = GlauberChain::new(params, disorder, seed, streams::stream::CHAIN_A)?;
    let mut b = GlauberChain::new(params, disorder, seed, streams::stream::CHAIN_B)?;
    a.run_sweeps(burnin);
    b.run_sweeps(burnin);
    let mut s2 = Vec::with_capacity(draws);
    let mut s4 = Vec::with_capacity(draws);
    for _ in 0..draws {
        a.run_sweeps(thin);
        b.run_sweeps(thin);
        let mut agree = 0i64;
        for (x, y) in a.spins.iter().zip(&b.spins) {
            agree += i64::from(x == y);
        }
        let overlap = (2 * agree - n as i64) as f64 / n as f64;
        let d = overlap - q;
        s2.push(d * d);
        s4.push(d * d * d * d);
    }
    let m2 = s2.iter().sum::<f64>() / draws as f64;
    let m4 = s4.iter().sum::<f64>() / draws as f64;
    Ok(((m2, batch_stderr(&s2)), (m4, batch_stderr(&s4))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sk::gibbs::build_exact_gibbs;
    use crate::sk::sample_disorder;
    use approx::assert_abs_diff_eq;

    #[test]
    fn update_probability_matches_energy_route() {
        let mut state = 0x123456789abcdefu64;
        let mut next = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 * 4.0 - 2.0
        };
        for _ in 0..100 {
            let (beta, h, ell) = (next().abs(), next(), next());
            let tanh_form = 0.5 * (1.0 + (beta * ell + h).tanh());
            assert_abs_diff_eq!(
                tanh_form,
                heat_bath_from_energy(beta, h, ell),
                epsilon = 1e-15
            );
        }
    }

    #[test]
    fn chains_are_deterministic() {
        let params = ModelParams::new(8, 0.25, 0.3).unwrap();
        let d = sample_disorder(8, 1).unwrap();
        let mut a = GlauberChain::new(&params, &d, 9, streams::stream::CHAIN_A).unwrap();
        let mut b = GlauberChain::new(&params, &d, 9, streams::stream::CHAIN_A).unwrap();
        a.run_sweeps(50);
        b.run_sweeps(50);
        assert_eq!(a.spins(), b.spins());
    }

    #[test]
    fn sweep_kernel_fixes_exact_gibbs_at_n3() {
        // Build the 8x8 one-sweep transition matrix explicitly and check that
        // the enumerated Gibbs vector is invariant under it.
        let params = ModelParams::new(3, 0.7, 0.25).unwrap();
        let d = sample_disorder(3, 42).unwrap();
        let table = build_exact_gibbs(&params, &d).unwrap();
        let n = 3usize;
        let sqrt_n = (n as f64).sqrt();

        // site-update kernel K_i as an 8x8 matrix
        let site_kernel = |i: usize| -> Vec<Vec<f64>> {
            let mut k = vec![vec![0.0; 8]; 8];
            for s in 0..8usize {
                let cfg = SpinConfig::from_index(n, s);
                let mut ell = 0.0;
                for j in 0..n {
                    if j != i {
                        ell += d.coupling(i, j) * cfg.spin(j);
                    }
                }
                ell /= sqrt_n;
                let p_plus = 0.5 * (1.0 + (params.beta() * ell + params.h()).tanh());
                let up = s | (1 << i);
                let down = s & !(1 << i);
                k[s][up] += p_plus;
                k[s][down] += 1.0 - p_plus;
            }
            k
        };
        let matmul = |a: &Vec<Vec<f64>>, b: &Vec<Vec<f64>>| -> Vec<Vec<f64>> {
            let mut c = vec![vec![0.0; 8]; 8];
            for r in 0..8 {
                for m in 0..8 {
                    if a[r][m] == 0.0 {
                        continue;
                    }
                    for t in 0..8 {
                        c[r][t] += a[r][m] * b[m][t];
                    }
                }
            }
            c
        };
        let k = matmul(&matmul(&site_kernel(0), &site_kernel(1)), &site_kernel(2));
        // pi K = pi
        for t in 0..8 {
            let mut acc = 0.0;
            for s in 0..8 {
                acc += table.prob(s) * k[s][t];
            }
            assert_abs_diff_eq!(acc, table.prob(t), epsilon = 1e-12);
        }
    }

    #[test]
    fn infinite_temperature_magnetization() {
        // beta = 0, h = 0: uniform refresh; site means ~ 0 over 1e4 sweeps.
        let params = ModelParams::new(10, 0.0, 0.0).unwrap();
        let d = sample_disorder(10, 4).unwrap();
        let mut chain = GlauberChain::new(&params, &d, 3, streams::stream::CHAIN_A).unwrap();
        let mut mean = 0.0;
        let sweeps = 10_000;
        for _ in 0..sweeps {
            chain.sweep();
            mean += chain.spins().iter().map(|&s| f64::from(s)).sum::<f64>() / 10.0;
        }
        mean /= sweeps as f64;
        assert!(mean.abs() < 4.0 / 100.0, "mean magnetization {mean}");
    }

    #[test]
    fn independent_spins_hit_tanh_h() {
        let params = ModelParams::new(8, 0.0, 0.7).unwrap();
        let d = sample_disorder(8, 4).unwrap();
        let mut chain = GlauberChain::new(&params, &d, 8, streams::stream::CHAIN_A).unwrap();
        let (means, errs) = estimate_marginals(&mut chain, 100, 1, 4000).unwrap();
        for (m, e) in means.iter().zip(&errs) {
            assert!(
                (m - 0.7f64.tanh()).abs() < 4.0 * e,
                "mean {m} vs tanh(0.7) (se {e})"
            );
        }
    }

    #[test]
    fn sampled_estimators_match_enumeration() {
        // 20-seed battery at N = 6: marginals and overlap m2 vs exact.
        let params = ModelParams::new(6, 0.25, 0.3).unwrap();
        let q = 0.088;
        for seed in 0..20u64 {
            let d = sample_disorder(6, 1000 + seed).unwrap();
            let table = build_exact_gibbs(&params, &d).unwrap();
            let mut chain =
                GlauberChain::new(&params, &d, seed, streams::stream::CHAIN_A).unwrap();
            let (means, errs) = estimate_marginals(&mut chain, 200, 2, 1500).unwrap();
            let exact = table.marginals();
            for i in 0..6 {
                assert!(
                    (means[i] - exact[i]).abs() < 4.0 * errs[i].max(1e-3),
                    "seed {seed} site {i}: {} vs {} (se {})",
                    means[i],
                    exact[i],
                    errs[i]
                );
            }
            let ((m2, m2e), _) =
                estimate_overlap_moments(&params, &d, q, 200, 2, 1500, seed).unwrap();
            let exact2 = table.overlap_moment_exact2(q);
            assert!(
                (m2 - exact2).abs() < 4.0 * m2e.max(1e-3),
                "seed {seed}: m2 {m2} vs exact {exact2} (se {m2e})"
            );
        }
    }

    #[test]
    fn overlap_moments_free_case() {
        let n = 10;
        let params = ModelParams::new(n, 0.0, 0.0).unwrap();
        let d = sample_disorder(n, 2).unwrap();
        let ((m2, m2e), (m4, m4e)) =
            estimate_overlap_moments(&params, &d, 0.0, 100, 1, 4000, 7).unwrap();
        let nf = n as f64;
        assert!((m2 - 1.0 / nf).abs() < 4.0 * m2e, "m2 {m2} (se {m2e})");
        let exact4 = (3.0 * nf - 2.0) / nf.powi(3);
        assert!((m4 - exact4).abs() < 4.0 * m4e, "m4 {m4} (se {m4e})");
    }

    #[test]
    fn estimators_reject_tiny_draw_counts() {
        let params = ModelParams::new(4, 0.1, 0.0).unwrap();
        let d = sample_disorder(4, 1).unwrap();
        let mut chain = GlauberChain::new(&params, &d, 1, streams::stream::CHAIN_A).unwrap();
        assert!(estimate_marginals(&mut chain, 0, 1, 99).is_err());
        assert!(estimate_overlap_moments(&params, &d, 0.0, 0, 1, 99, 1).is_err());
    }
}
