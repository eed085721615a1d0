//! qurlab is a desk-scale verification laboratory for a family of explicit
//! quantum-information constructions: mutually unbiased bases built from
//! binary field arithmetic, strong permutation extractors and condensers,
//! metric uncertainty relations, information-locking schemes, QC-extractors
//! with quantum side information, and a weak-string-erasure protocol in the
//! noisy-storage model.
//!
//! Every construction is paired with an exact numerical oracle at small
//! dimension: exhaustive bijectivity checks for permutation families, dense
//! overlap verification for basis ensembles, eigenvalue-based entropies and
//! trace distances for the decoupling and uncertainty bounds, and Monte-Carlo
//! experiments with explicit confidence intervals where a closed form is
//! being sampled.
//!
//! The modules mirror the construction layers:
//!
//! - [`gf`] - arithmetic in GF(2^t) and polynomial evaluation/interpolation
//! - [`quantum`] - dense states, density operators, channels, distances and
//!   entropies
//! - [`mub`] - exact and approximate mutually unbiased basis ensembles
//! - [`extractor`] - strong permutation condensers/extractors with
//!   brute-force verification
//! - [`mur`] - metric uncertainty relation ensembles and experiments
//! - [`locking`] - locking schemes, string commitment, hiding fingerprints,
//!   quantum identification
//! - [`qcext`] - QC-extractors and decoupling/uncertainty checks with
//!   quantum side information
//! - [`wse`] - weak string erasure simulation and noisy-storage parameter
//!   calculus

pub mod extractor;
pub mod gf;
pub mod locking;
pub mod mub;
pub mod mur;
pub mod qcext;
pub mod quantum;
pub mod wse;

/// Errors shared across the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix is not positive semidefinite (min eigenvalue {0:.3e})")]
    NotPositiveSemidefinite(f64),
    #[error("input is rank deficient (min singular value {0:.3e})")]
    RankDeficient(f64),
    #[error("infeasible parameters: {0}")]
    Infeasible(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub use quantum::{DensityOperator, Distribution, StateVector};
