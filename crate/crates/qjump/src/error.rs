// Copyright 2026 qjump Contributors
// SPDX-License-Identifier: Apache-2.0

//! Crate-wide error type.

use thiserror::Error;

/// Errors produced anywhere in the simulator.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix must be square, got {rows}x{cols}")]
    NonSquare { rows: usize, cols: usize },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid time grid: {0}")]
    InvalidGrid(String),

    /// Waiting-time mass left beyond the tabulated horizon is too large,
    /// i.e. `t_max` is too small for this model (or a non-dark subspace
    /// drains slower than the grid covers).
    #[error("survival tail {tail:.3e} exceeds tolerance {tolerance:.3e} at t_max = {t_max}")]
    TailMassTooLarge { tail: f64, tolerance: f64, t_max: f64 },

    /// The waiting-time distribution carries no mass on the grid: the state
    /// is dark (no monitored jump can ever fire from it).
    #[error("waiting-time weights integrate to {mass:.3e}, below the floor: dark state")]
    AllZeroWeights { mass: f64 },

    #[error("state trace {trace:.3e} vanished during no-jump evolution")]
    VanishingTrace { trace: f64 },

    #[error("all monitored jump channels have zero probability")]
    ZeroJumpProbability,

    #[error("pure-state evolution requires every jump channel to be monitored")]
    PartialMonitoringUnsupported,

    #[error("gap {gap:.6} after the previous jump exceeds table extent t_max = {t_max:.6}")]
    GapExceedsTable { gap: f64, t_max: f64 },

    #[error("sample time {t:.6} lies outside [0, {horizon:.6}]")]
    SampleTimeOutOfRange { t: f64, horizon: f64 },

    #[error("Liouvillian null space is not unique (second singular value {sigma2:.3e})")]
    DegenerateSteadyState { sigma2: f64 },

    #[error("no unflagged jump events to histogram")]
    NoJumps,

    #[error("histogram bin edges do not match")]
    BinEdgesMismatch,

    #[error("MCW step too coarse: dt * max(|H_e|, |J|) = {0:.3e} > 0.05")]
    McwStepTooCoarse(f64),

    #[error("eigensolver failed to converge")]
    EigenNoConvergence,

    #[error("linear solve hit an exactly singular pivot")]
    SingularMatrix,

    #[error("config error: {0}")]
    Config(String),

    #[error("table cache: {0}")]
    Cache(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code class for the CLI: 2 config/parse, 3 model/state
    /// validation, 4 table construction, 5 runtime.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::InvalidModel(_) | Error::InvalidState(_) | Error::InvalidGrid(_) => 3,
            Error::TailMassTooLarge { .. } | Error::Cache(_) => 4,
            _ => 5,
        }
    }
}
