//! Simulation and statistical-estimation toolkit for a holographic,
//! quad-register spin-wave quantum memory storing polarization-entangled
//! photon pairs.
//!
//! The crate is organised bottom-up:
//!
//! * [`qstate`]: small dense complex matrices and two-qubit states.
//! * [`registers`]: spin-wave wave vectors, register crosstalk and capacity.
//! * [`eitline`]: Λ-system EIT transmission and slow-light delay.
//! * [`channel`]: source model and the storage/retrieval channel.
//! * [`measure`]: analyzer settings, correlations, CHSH, count sampling.
//! * [`tomo`]: linear inversion, maximum-likelihood tomography, Monte Carlo.
//! * [`fitkit`]: damped least-squares fits of the two decay models.
//! * [`scenario`]: configuration, seeding and the end-to-end report.
// `!(x > 0.0)` guards reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod consts;
pub mod eitline;
mod error;
pub mod fitkit;
pub mod io;
pub mod measure;
pub mod qstate;
pub mod registers;
pub mod scenario;
pub mod seeds;
pub mod tomo;

pub use error::{Error, Result};
