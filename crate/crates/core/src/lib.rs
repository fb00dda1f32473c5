//! Two collective spins coupled by an Ising term and subject to one-body
//! particle losses.
//!
//! The analytic core evaluates the closed-form characteristic functions of
//! every (z, r) off-diagonal block of the density matrix, and from them all
//! density-matrix elements, spin moments, the linear entropy and the EPR
//! steering parameter. [`oracle`] holds brute-force references (dense
//! Lindblad integration, exact unitary evolution) used by the test suites,
//! [`trajectories`] the quantum-jump unraveling and Husimi cuts, and [`bec`]
//! the Thomas-Fermi parameter layer for condensate experiments.
//!
//! Units: hbar = 1; rates and nonlinearities in 1/s (or any consistent
//! inverse time unit). Only [`bec`] deals with SI constants.

pub mod bec;
pub mod charfunc;
pub mod correlators;
pub mod epr;
mod error;
pub mod fock;
pub mod model;
pub mod numerics;
pub mod optimize;
pub mod oracle;
pub mod quadrature;
pub mod trajectories;
pub mod verify;

pub use error::{Error, Result};
pub use model::{BlockLabel, ComplexValue, ElementIndex, ModelParams};
