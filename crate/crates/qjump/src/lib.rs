// Copyright 2026 qjump Contributors
// SPDX-License-Identifier: Apache-2.0

//! Quantum jump trajectory simulator for GKSL (Lindblad) master equations.
//!
//! Instead of integrating the stochastic dynamics over small timesteps, the
//! engine precomputes no-jump propagators and waiting-time-distribution
//! kernels on a time grid, then samples each inter-jump waiting time and
//! jump channel directly (a quantum analogue of the classical Gillespie
//! stochastic simulation algorithm). A discretized Monte-Carlo-wavefunction
//! simulator and an exact master-equation integrator serve as validation
//! oracles.

pub mod error;
pub mod linalg;
pub mod model;
pub mod precompute;
pub mod gillespie;
pub mod filling;
pub mod mcw;

pub use error::{Error, Result};
