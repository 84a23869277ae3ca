//! Desk-scale numerical laboratory for the Sherrington-Kirkpatrick model and
//! Stein's method for two-component Gaussian mixtures.
//!
//! The crate provides:
//! - exact Gibbs-measure computations by Gray-code enumeration ([`sk`]);
//! - the mixture family M(a, b, mu, sigma^2), its closed-form identities and
//!   its Stein characterizing operator with a constructive equation solver
//!   ([`mixture`], [`stein`]);
//! - Gauss-Hermite quadrature and a Monte-Carlo verifier for the Gaussian
//!   approximation lemma ([`quad`], [`approx_lemma`]);
//! - the q self-consistency equation and TAP fixed-point iteration ([`tap`]);
//! - Glauber dynamics for sizes past the enumeration cap ([`mcmc`]).
//!
//! Everything is deterministic given seeds: draws come from addressable
//! ChaCha streams ([`streams`]) with disjoint stream ids per consumer.

pub mod alias;
pub mod approx_lemma;
pub mod error;
pub mod mcmc;
pub mod mixture;
pub mod quad;
pub mod sk;
pub mod stein;
pub mod streams;
pub mod tap;
pub mod testfn;

pub use error::{Error, Result};
pub use mixture::{MixtureDecomposition, MixtureGaussianParams};
pub use sk::gibbs::{build_exact_gibbs, nu_params, ExactGibbsTable, ENUMERATION_CAP};
pub use sk::{
    cavity_field, energy_exponent, hamiltonian_h, local_field, sample_aux, sample_disorder,
    AuxiliaryGaussians, DisorderMatrix, ModelParams, SpinConfig,
};
pub use stein::{solve_stein, stein_discrepancy, SteinSolution};
pub use tap::{q_fixed_point, tap_iterate, tap_residual_exact, tap_vs_exact, QSolution, TapSolution};
pub use testfn::TestFunction;
