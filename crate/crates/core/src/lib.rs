//! Weighted pluripotential theory on (ℙⁿ, O(1)) for n ∈ {1, 2}, computed on
//! finite point clouds.
//!
//! Weights on O(1) are handled as functions on ℂⁿ through the trivialization
//! given by the section Z₀, so a weight is just a real function `v` with
//! `v = log⁺|z| + O(1)` when it is plurisubharmonic with minimal
//! singularities. Degree-k sections are polynomials of total degree ≤ k.
//!
//! The crate is organized bottom-up:
//!
//! * [`domain`]: compact sets as point clouds, weights, discrete measures;
//! * [`polyspace`]: graded polynomial bases and weighted orthonormalization;
//! * [`gramvol`]: Gram determinants, ℒ_k differences, L² norms of
//!   determinant sections;
//! * [`fekete`]: greedy Leja extraction, D_k and Leja's transfinite diameter;
//! * [`envelope`]: equilibrium weights (Bergman estimator and closed forms);
//! * [`energy`]: Monge-Ampère measures, energy differences, Robin formulas;
//! * [`bergman`]: Bergman densities and measures, Bernstein-Markov checks;
//! * [`dynamics`]: lifted maps on ℙ¹, Green weights, resultants;
//! * [`verify`]: convergence harnesses that tie the above together.
//!
//! The guide under `book/` walks through the same material with runnable
//! snippets; those snippets are compiled and run as doc-tests of this crate.

use std::sync::atomic::{AtomicUsize, Ordering};

pub mod bergman;
pub mod dd;
pub mod domain;
pub mod dynamics;
pub mod energy;
pub mod envelope;
pub mod error;
pub mod extrapolate;
pub mod fekete;
pub mod gramvol;
pub mod linalg;
pub mod polyspace;
pub mod report;
pub mod verify;

pub use error::{Error, Result};
pub use num_complex::Complex64;

/// Crate version, embedded in every report.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

static PRECISION_ESCALATIONS: AtomicUsize = AtomicUsize::new(0);

pub(crate) fn note_precision_escalation() {
    PRECISION_ESCALATIONS.fetch_add(1, Ordering::Relaxed);
}

/// Number of times a factorization was redone in double-double precision
/// since the last [`reset_precision_escalations`].
pub fn precision_escalations() -> usize {
    PRECISION_ESCALATIONS.load(Ordering::Relaxed)
}

pub fn reset_precision_escalations() {
    PRECISION_ESCALATIONS.store(0, Ordering::Relaxed);
}

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/intro.md")]
    pub struct Intro;
    #[doc = include_str!("../../../book/src/sets_and_weights.md")]
    pub struct SetsAndWeights;
    #[doc = include_str!("../../../book/src/sections.md")]
    pub struct Sections;
    #[doc = include_str!("../../../book/src/ball_volumes.md")]
    pub struct BallVolumes;
    #[doc = include_str!("../../../book/src/transfinite.md")]
    pub struct Transfinite;
    #[doc = include_str!("../../../book/src/envelopes.md")]
    pub struct Envelopes;
    #[doc = include_str!("../../../book/src/energy.md")]
    pub struct Energy;
    #[doc = include_str!("../../../book/src/bergman.md")]
    pub struct Bergman;
    #[doc = include_str!("../../../book/src/dynamics.md")]
    pub struct Dynamics;
    #[doc = include_str!("../../../book/src/verification.md")]
    pub struct Verification;
}
