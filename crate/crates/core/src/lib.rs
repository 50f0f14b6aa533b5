//! Spectral-efficiency maximization for a beyond-diagonal RIS (BD-RIS)
//! assisted secondary link in an underlay cognitive radio network.
//!
//! The secondary transmitter (ST) reaches its user (SU) through a
//! transmissive RIS whose scattering matrix `Φ` is unitary. The ST shares
//! spectrum with a primary link and must keep the interference it causes at
//! the primary user (PU) below a threshold `I_th`. The crate provides:
//!
//! - [`channel`]: Rician channel draws with a Kronecker LoS steering vector
//!   and reproducible per-trial random streams.
//! - [`metrics`]: effective gains through the RIS, SINR, spectral
//!   efficiency and PU interference.
//! - [`power`]: the closed-form KKT water-filling power rule, the exact
//!   boundary maximizer and a brute-force oracle.
//! - [`phase`]: Riemannian gradient ascent on the unitary group with SVD
//!   retraction, plus the diagonal (D-RIS) co-phasing baseline.
//! - [`solver`]: the outer alternation between power and phase steps.
//! - [`experiment`]: seeded Monte Carlo sweeps, aggregation and CSV output.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod error;
pub mod experiment;
pub mod linalg;
pub mod metrics;
pub mod phase;
pub mod power;
pub mod solver;
pub mod units;

pub use error::{Error, Result};
pub use linalg::{CMatrix, CVector, C64};
