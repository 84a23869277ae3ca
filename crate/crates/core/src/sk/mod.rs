//! The Sherrington-Kirkpatrick model: domain types and per-configuration
//! quantities. Exact Gibbs-measure machinery lives in [`gibbs`].
//!
//! Conventions: sites are 0-based in code. A configuration index encodes
//! spins little-endian, bit i = (sigma_i + 1)/2.

pub mod gibbs;

use crate::error::{Error, Result};
use crate::streams::{self, stream};
use rand::Rng;
use rand_distr::StandardNormal;

/// (N, beta, h) for one model instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    n_sites: usize,
    beta: f64,
    h: f64,
}

impl ModelParams {
    /// beta = 0 is admitted deliberately: it anchors the analytic test cases.
    pub fn new(n_sites: usize, beta: f64, h: f64) -> Result<Self> {
        if n_sites < 2 {
            return Err(Error::invalid(format!(
                "n_sites must be >= 2, got {n_sites}"
            )));
        }
        if !(beta.is_finite() && beta >= 0.0) {
            return Err(Error::invalid(format!(
                "beta must be finite and >= 0, got {beta}"
            )));
        }
        if !h.is_finite() {
            return Err(Error::invalid("h must be finite"));
        }
        Ok(ModelParams { n_sites, beta, h })
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn h(&self) -> f64 {
        self.h
    }
}

/// One spin configuration, entries exactly -1 or +1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpinConfig {
    spins: Vec<i8>,
}

impl SpinConfig {
    pub fn new(spins: Vec<i8>) -> Result<Self> {
        if spins.iter().any(|&s| s != 1 && s != -1) {
            return Err(Error::invalid("spins must be exactly -1 or +1"));
        }
        Ok(SpinConfig { spins })
    }

    pub fn all_plus(n: usize) -> Self {
        SpinConfig { spins: vec![1; n] }
    }

    pub fn all_minus(n: usize) -> Self {
        SpinConfig { spins: vec![-1; n] }
    }

    /// Decodes a configuration index (bit i set means sigma_i = +1).
    pub fn from_index(n: usize, index: usize) -> Self {
        let spins = (0..n)
            .map(|i| if index >> i & 1 == 1 { 1 } else { -1 })
            .collect();
        SpinConfig { spins }
    }

    /// The inverse of [`SpinConfig::from_index`].
    pub fn index(&self) -> usize {
        self.spins
            .iter()
            .enumerate()
            .fold(0, |acc, (i, &s)| acc | (usize::from(s == 1) << i))
    }

    pub fn len(&self) -> usize {
        self.spins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spins.is_empty()
    }

    pub fn spin(&self, i: usize) -> f64 {
        f64::from(self.spins[i])
    }

    pub fn spins(&self) -> &[i8] {
        &self.spins
    }

    pub fn flip(&mut self, i: usize) {
        self.spins[i] = -self.spins[i];
    }

    pub fn flip_all(&mut self) {
        for s in &mut self.spins {
            *s = -*s;
        }
    }
}

/// The quenched couplings (g_ij)_{i<j}, upper triangular, with the seed they
/// were generated from. Regenerating from the same seed reproduces the
/// entries bit for bit.
#[derive(Debug, Clone, PartialEq)]
pub struct DisorderMatrix {
    n_sites: usize,
    seed: u64,
    /// Row-major upper triangle: (0,1), (0,2), ..., (0,n-1), (1,2), ...
    couplings: Vec<f64>,
}

/// Standard-normal couplings for `n_sites` spins, drawn from the disorder
/// stream of `seed`. Entries are generated in column-major pair order, so
/// the matrix for n sites is a restriction of the matrix for n' > n sites
/// from the same seed (shared couplings across system sizes).
pub fn sample_disorder(n_sites: usize, seed: u64) -> Result<DisorderMatrix> {
    if n_sites < 2 {
        return Err(Error::invalid(format!(
            "n_sites must be >= 2, got {n_sites}"
        )));
    }
    let mut couplings = vec![0.0; n_sites * (n_sites - 1) / 2];
    let mut rng = streams::rng(seed, stream::DISORDER);
    for j in 1..n_sites {
        for i in 0..j {
            couplings[ut_index(n_sites, i, j)] = rng.sample(StandardNormal);
        }
    }
    Ok(DisorderMatrix {
        n_sites,
        seed,
        couplings,
    })
}

/// Row-major upper-triangle index for 0 <= i < j < n.
fn ut_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < n);
    i * (2 * n - i - 1) / 2 + (j - i - 1)
}

impl DisorderMatrix {
    /// Wraps externally constructed couplings (row-major upper triangle).
    /// `seed` is carried as provenance only.
    pub fn from_parts(n_sites: usize, seed: u64, couplings: Vec<f64>) -> Result<Self> {
        if n_sites < 2 {
            return Err(Error::invalid("n_sites must be >= 2"));
        }
        if couplings.len() != n_sites * (n_sites - 1) / 2 {
            return Err(Error::invalid(format!(
                "expected {} couplings for {} sites, got {}",
                n_sites * (n_sites - 1) / 2,
                n_sites,
                couplings.len()
            )));
        }
        Ok(DisorderMatrix {
            n_sites,
            seed,
            couplings,
        })
    }

    pub fn zeros(n_sites: usize) -> Result<Self> {
        Self::from_parts(n_sites, 0, vec![0.0; n_sites * (n_sites - 1) / 2])
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// g_ij for i != j; access with i > j resolves to the (j, i) entry.
    pub fn coupling(&self, i: usize, j: usize) -> f64 {
        assert!(i != j, "no diagonal entries in the disorder matrix");
        let (i, j) = if i < j { (i, j) } else { (j, i) };
        self.couplings[ut_index(self.n_sites, i, j)]
    }

    /// The row-major upper-triangle entries (the flat serialization order).
    pub fn couplings(&self) -> &[f64] {
        &self.couplings
    }

    /// Couplings of row `i` against every other site, as a dense vector with
    /// a zero at position `i` (handy as a scan functional).
    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..self.n_sites)
            .map(|j| if j == i { 0.0 } else { self.coupling(i, j) })
            .collect()
    }

    /// Replaces row `i` (all couplings touching site `i`) with the given
    /// values, indexed by the other site. Used by the conditional
    /// approximation-lemma experiment, which redraws one row while holding
    /// the rest of the disorder fixed.
    pub fn with_row(&self, i: usize, values: &[f64]) -> Result<Self> {
        if values.len() != self.n_sites {
            return Err(Error::invalid("row length must equal n_sites"));
        }
        let mut out = self.clone();
        for j in 0..self.n_sites {
            if j == i {
                continue;
            }
            let (a, b) = if i < j { (i, j) } else { (j, i) };
            out.couplings[ut_index(self.n_sites, a, b)] = values[j];
        }
        Ok(out)
    }

    /// Applies a site relabeling: entry (i, j) of the result is
    /// g_{perm(i), perm(j)}.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n_sites {
            return Err(Error::invalid("permutation length must equal n_sites"));
        }
        let mut out = self.clone();
        for i in 0..self.n_sites {
            for j in (i + 1)..self.n_sites {
                out.couplings[ut_index(self.n_sites, i, j)] = self.coupling(perm[i], perm[j]);
            }
        }
        Ok(out)
    }

    /// Flat record for report reproducibility: n_sites, seed, then the
    /// row-major upper-triangle couplings.
    pub fn to_flat_record(&self) -> (usize, u64, Vec<f64>) {
        (self.n_sites, self.seed, self.couplings.clone())
    }
}

/// Fresh Gaussians g_1..g_N for the cavity field, independent of the
/// disorder (disjoint stream id under the same seed).
#[derive(Debug, Clone, PartialEq)]
pub struct AuxiliaryGaussians {
    seed: u64,
    values: Vec<f64>,
}

/// Draws `n` auxiliary standard Gaussians from the AUX stream of `seed`.
pub fn sample_aux(n: usize, seed: u64) -> AuxiliaryGaussians {
    let mut rng = streams::rng(seed, stream::AUX);
    let values = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    AuxiliaryGaussians { seed, values }
}

impl AuxiliaryGaussians {
    pub fn from_values(seed: u64, values: Vec<f64>) -> Self {
        AuxiliaryGaussians { seed, values }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn check_dims(params: &ModelParams, disorder: &DisorderMatrix, config: &SpinConfig) -> Result<()> {
    if params.n_sites() != disorder.n_sites() || params.n_sites() != config.len() {
        return Err(Error::invalid(format!(
            "dimension mismatch: params {} sites, disorder {}, config {}",
            params.n_sites(),
            disorder.n_sites(),
            config.len()
        )));
    }
    Ok(())
}

/// The exponent of the unnormalized Gibbs weight:
/// (beta / sqrt(N)) sum_{i<j} g_ij sigma_i sigma_j + h sum_i sigma_i.
pub fn energy_exponent(
    params: &ModelParams,
    disorder: &DisorderMatrix,
    config: &SpinConfig,
) -> Result<f64> {
    check_dims(params, disorder, config)?;
    let n = params.n_sites();
    let mut interaction = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            interaction += disorder.coupling(i, j) * config.spin(i) * config.spin(j);
        }
    }
    let magnetization: f64 = (0..n).map(|i| config.spin(i)).sum();
    Ok(params.beta() / (n as f64).sqrt() * interaction + params.h() * magnetization)
}

/// The local field at site i: (1/sqrt(N)) sum_{j != i} g_ij sigma_j.
/// Does not depend on sigma_i.
pub fn local_field(disorder: &DisorderMatrix, config: &SpinConfig, i: usize) -> Result<f64> {
    let n = disorder.n_sites();
    if config.len() != n {
        return Err(Error::invalid("config length must match disorder"));
    }
    if i >= n {
        return Err(Error::invalid(format!("site index {i} out of range 0..{n}")));
    }
    let mut acc = 0.0;
    for j in 0..n {
        if j != i {
            acc += disorder.coupling(i, j) * config.spin(j);
        }
    }
    Ok(acc / (n as f64).sqrt())
}

/// The cavity field (1/sqrt(N)) sum_i g_i sigma_i with fresh Gaussians g.
pub fn cavity_field(aux: &AuxiliaryGaussians, config: &SpinConfig) -> Result<f64> {
    if aux.len() != config.len() {
        return Err(Error::invalid(format!(
            "length mismatch: {} auxiliary values vs {} spins",
            aux.len(),
            config.len()
        )));
    }
    let dot: f64 = aux
        .values()
        .iter()
        .enumerate()
        .map(|(i, g)| g * config.spin(i))
        .sum();
    Ok(dot / (config.len() as f64).sqrt())
}

/// The centered Hamiltonian H = (1/N) sum_{i<j} g_ij sigma_i sigma_j
/// - sqrt(N) beta / 2.
pub fn hamiltonian_h(
    params: &ModelParams,
    disorder: &DisorderMatrix,
    config: &SpinConfig,
) -> Result<f64> {
    check_dims(params, disorder, config)?;
    let n = params.n_sites();
    let mut interaction = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            interaction += disorder.coupling(i, j) * config.spin(i) * config.spin(j);
        }
    }
    Ok(interaction / n as f64 - (n as f64).sqrt() * params.beta() / 2.0)
}
