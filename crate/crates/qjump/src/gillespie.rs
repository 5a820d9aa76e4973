// Copyright 2026 qjump Contributors
// SPDX-License-Identifier: Apache-2.0

//! The core sampler: draw a waiting time from the tabulated WTD, propagate
//! under the no-jump evolution, draw a jump channel, apply the jump,
//! repeat until the time horizon.
//!
//! Waiting times are restricted to grid points and drawn proportionally to
//! the tabulated weights, with no interpolation; the bias is O(dt) and
//! controlled by the grid-density rule in the precompute stage. With
//! probability equal to the per-state survival at t_max a draw falls
//! beyond the table; it is resolved as the last grid index and the record
//! is flagged (its waiting time is right-censored).

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{trace_of_vectorized, unvectorize, vectorize, CVector};
use crate::model::{DensityState, LindbladModel, PureState};
use crate::precompute::{PrecomputedTables, PureTables};

/// Identifier of the generator backing [`RngStream`].
pub const RNG_ALGORITHM: &str = "chacha8-stream64";

/// A reproducible random stream: same (seed, stream) gives a bitwise
/// identical draw sequence, independent of thread scheduling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    pub fn rng(&self) -> StreamRng {
        let mut inner = ChaCha8Rng::seed_from_u64(self.seed);
        inner.set_stream(self.stream);
        StreamRng { inner }
    }
}

/// Counter-based random source with a pinned u64-to-unit-interval mapping,
/// so the draw sequence is part of the reproducibility contract.
pub struct StreamRng {
    inner: ChaCha8Rng,
}

impl StreamRng {
    /// Uniform in [0, 1) with 53 significant bits.
    #[inline]
    pub(crate) fn next_unit(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

/// Outcome of a waiting-time draw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaitDraw {
    /// Grid index of the drawn time.
    pub index: usize,
    /// Drawn waiting time, exactly index * dt.
    pub time: f64,
    /// True when the draw fell beyond t_max and was resolved to the last
    /// grid point.
    pub censored: bool,
}

/// One jump event: waiting time since the previous jump, absolute time,
/// 1-based channel index, and the post-jump state.
#[derive(Debug, Clone)]
pub struct JumpRecord {
    pub waiting_time: f64,
    pub absolute_time: f64,
    pub channel: usize,
    pub post_jump: StateRecord,
    /// Censored waiting time or absolute time beyond the horizon; such
    /// records are excluded from waiting-time pooling by default.
    pub flagged: bool,
}

/// Post-jump state storage: mixed trajectories store density matrices,
/// pure trajectories store amplitude vectors (rank-1, d instead of d^2).
#[derive(Debug, Clone)]
pub enum StateRecord {
    Density(DensityState),
    Pure(PureState),
}

impl StateRecord {
    pub fn as_density(&self) -> DensityState {
        match self {
            StateRecord::Density(rho) => rho.clone(),
            StateRecord::Pure(psi) => psi.density(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            StateRecord::Density(rho) => rho.dim(),
            StateRecord::Pure(psi) => psi.dim(),
        }
    }
}

/// An ordered jump trajectory over [0, horizon].
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub stream: RngStream,
    pub horizon: f64,
    pub initial_state: StateRecord,
    pub records: Vec<JumpRecord>,
    /// The trajectory reached a state with no remaining waiting-time mass
    /// (absorbing dark state) and stopped before the horizon.
    pub dark_terminated: bool,
}

impl Trajectory {
    /// Waiting times of unflagged jump records.
    pub fn unflagged_waits(&self) -> impl Iterator<Item = f64> + '_ {
        self.records.iter().filter(|r| !r.flagged).map(|r| r.waiting_time)
    }
}

/// Draw a waiting-time grid index from the tabulated distribution of the
/// given state.
pub fn sample_waiting_time(
    tables: &PrecomputedTables,
    rho: &DensityState,
    rng: &mut StreamRng,
) -> Result<WaitDraw> {
    let cum = tables.cumulative_wtd(rho.matrix());
    draw_wait(&cum.cum, cum.total, cum.survival, tables, rng)
}

fn draw_wait(
    cum: &[f64],
    total: f64,
    survival: f64,
    tables: &PrecomputedTables,
    rng: &mut StreamRng,
) -> Result<WaitDraw> {
    let grid = tables.grid();
    let mass = total * grid.dt();
    if mass < tables.options().weight_floor {
        return Err(Error::AllZeroWeights { mass });
    }
    let last = grid.n_points() - 1;
    let u = rng.next_unit();
    let s = survival.clamp(0.0, 1.0);
    if u < s || s >= 1.0 {
        return Ok(WaitDraw { index: last, time: grid.time(last), censored: true });
    }
    let target = (u - s) / (1.0 - s) * total;
    let index = cum.partition_point(|&c| c <= target).min(last);
    Ok(WaitDraw { index, time: grid.time(index), censored: false })
}

/// No-jump propagation of a state to grid index `index`, renormalized.
pub fn evolve_nojump(
    tables: &PrecomputedTables,
    rho: &DensityState,
    index: usize,
) -> Result<DensityState> {
    let v = vectorize(rho.matrix())?;
    let out = tables.apply_propagator(index, &v);
    let d = tables.dim();
    let trace = trace_of_vectorized(&out, d).re;
    if !trace.is_finite() || trace < 1e-14 {
        return Err(Error::VanishingTrace { trace });
    }
    let m = unvectorize(&out, d)?;
    DensityState::from_unnormalized(&m)
}

/// Draw a monitored channel with probability tr(L_k†L_k rho) / tr(J rho).
/// Returns the 1-based channel index.
pub fn sample_channel(
    model: &LindbladModel,
    rho: &DensityState,
    rng: &mut StreamRng,
) -> Result<usize> {
    let weights: Vec<f64> =
        model.monitored_ldl().iter().map(|ldl| rho.expectation(ldl).unwrap_or(0.0).max(0.0)).collect();
    draw_channel(&weights, rng)
}

fn draw_channel(weights: &[f64], rng: &mut StreamRng) -> Result<usize> {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::ZeroJumpProbability);
    }
    let target = rng.next_unit() * total;
    let mut acc = 0.0;
    for (k, w) in weights.iter().enumerate() {
        acc += w;
        if target < acc {
            return Ok(k + 1);
        }
    }
    Ok(weights.len())
}

/// Apply monitored jump channel `channel` (1-based) to a state.
pub fn apply_jump(model: &LindbladModel, rho: &DensityState, channel: usize) -> Result<DensityState> {
    let l = model
        .monitored_jumps()
        .get(channel - 1)
        .ok_or_else(|| Error::DimensionMismatch(format!("channel {channel} out of range")))?;
    let m = l.dot(rho.matrix()).dot(&crate::linalg::dag(l));
    let trace = crate::linalg::tr(&m).re;
    if !trace.is_finite() || trace < 1e-14 {
        return Err(Error::ZeroJumpProbability);
    }
    DensityState::from_unnormalized(&m)
}

/// Run one mixed-state jump trajectory to the horizon `t_f`.
///
/// The loop repeats waiting-time draw, no-jump propagation, channel draw
/// and jump update until the accumulated time passes `t_f`; the record
/// whose absolute time first exceeds the horizon is kept and flagged. A
/// state with no remaining waiting-time mass terminates the trajectory
/// cleanly with `dark_terminated` set.
pub fn run_trajectory(
    model: &LindbladModel,
    tables: &PrecomputedTables,
    rho0: &DensityState,
    t_f: f64,
    stream: RngStream,
) -> Result<Trajectory> {
    if rho0.dim() != model.dim() {
        return Err(Error::DimensionMismatch(format!(
            "initial state dim {} vs model dim {}",
            rho0.dim(),
            model.dim()
        )));
    }
    let mut rng = stream.rng();
    let mut rho = rho0.clone();
    let mut tau = 0.0f64;
    let mut records = Vec::new();
    let mut dark_terminated = false;

    while tau < t_f {
        let draw = match sample_waiting_time(tables, &rho, &mut rng) {
            Ok(draw) => draw,
            Err(Error::AllZeroWeights { .. }) => {
                dark_terminated = true;
                break;
            }
            Err(e) => return Err(e),
        };
        tau += draw.time;
        let evolved = evolve_nojump(tables, &rho, draw.index)?;
        let channel = sample_channel(model, &evolved, &mut rng)?;
        rho = apply_jump(model, &evolved, channel)?;
        let flagged = draw.censored || tau > t_f;
        records.push(JumpRecord {
            waiting_time: draw.time,
            absolute_time: tau,
            channel,
            post_jump: StateRecord::Density(rho.clone()),
            flagged,
        });
    }

    Ok(Trajectory {
        stream,
        horizon: t_f,
        initial_state: StateRecord::Density(rho0.clone()),
        records,
        dark_terminated,
    })
}

/// Run one pure-state jump trajectory (all channels must be monitored).
///
/// Consumes the random stream in exactly the same order as
/// [`run_trajectory`] (one draw per waiting time, one per channel), so a
/// shared stream yields the same jump sequence up to rounding.
pub fn run_trajectory_pure(
    model: &LindbladModel,
    tables: &PureTables,
    psi0: &PureState,
    t_f: f64,
    stream: RngStream,
) -> Result<Trajectory> {
    if !model.is_fully_monitored() {
        return Err(Error::PartialMonitoringUnsupported);
    }
    if psi0.dim() != model.dim() {
        return Err(Error::DimensionMismatch(format!(
            "initial state dim {} vs model dim {}",
            psi0.dim(),
            model.dim()
        )));
    }
    let grid = tables.grid();
    let mut rng = stream.rng();
    let mut psi = psi0.clone();
    let mut tau = 0.0f64;
    let mut records = Vec::new();
    let mut dark_terminated = false;

    while tau < t_f {
        let cum = tables.cumulative_wtd(psi.amplitudes());
        let mass = cum.total * grid.dt();
        if mass < tables.options().weight_floor {
            dark_terminated = true;
            break;
        }
        let last = grid.n_points() - 1;
        let u = rng.next_unit();
        let s = cum.survival.clamp(0.0, 1.0);
        let (index, censored) = if u < s || s >= 1.0 {
            (last, true)
        } else {
            let target = (u - s) / (1.0 - s) * cum.total;
            (cum.cum.partition_point(|&c| c <= target).min(last), false)
        };
        tau += grid.time(index);

        // |psi~> = U[T] |psi>, normalized
        let evolved_raw = tables.apply_propagator(index, psi.amplitudes());
        let evolved = PureState::normalized(&evolved_raw)
            .map_err(|_| Error::VanishingTrace { trace: 0.0 })?;

        // channel weights <psi~| L†L |psi~>
        let weights: Vec<f64> = model
            .monitored_ldl()
            .iter()
            .map(|ldl| {
                let lv = ldl.dot(evolved.amplitudes());
                evolved
                    .amplitudes()
                    .iter()
                    .zip(lv.iter())
                    .map(|(a, b)| (a.conj() * b).re)
                    .sum::<f64>()
                    .max(0.0)
            })
            .collect();
        let channel = draw_channel(&weights, &mut rng)?;

        // |psi> -> L_k |psi~>, normalized
        let jumped: CVector = model.monitored_jumps()[channel - 1].dot(evolved.amplitudes());
        psi = PureState::normalized(&jumped).map_err(|_| Error::ZeroJumpProbability)?;

        let flagged = censored || tau > t_f;
        records.push(JumpRecord {
            waiting_time: grid.time(index),
            absolute_time: tau,
            channel,
            post_jump: StateRecord::Pure(psi.clone()),
            flagged,
        });
    }

    Ok(Trajectory {
        stream,
        horizon: t_f,
        initial_state: StateRecord::Pure(psi0.clone()),
        records,
        dark_terminated,
    })
}

/// Run `n_traj` independent mixed-state trajectories in parallel.
/// Trajectory i uses stream (base_seed, i); the output is independent of
/// execution order and worker count.
pub fn run_ensemble(
    model: &LindbladModel,
    tables: &PrecomputedTables,
    rho0: &DensityState,
    t_f: f64,
    n_traj: usize,
    base_seed: u64,
) -> Result<Vec<Trajectory>> {
    (0..n_traj)
        .into_par_iter()
        .map(|i| run_trajectory(model, tables, rho0, t_f, RngStream::new(base_seed, i as u64)))
        .collect()
}

/// Pure-state counterpart of [`run_ensemble`].
pub fn run_ensemble_pure(
    model: &LindbladModel,
    tables: &PureTables,
    psi0: &PureState,
    t_f: f64,
    n_traj: usize,
    base_seed: u64,
) -> Result<Vec<Trajectory>> {
    (0..n_traj)
        .into_par_iter()
        .map(|i| run_trajectory_pure(model, tables, psi0, t_f, RngStream::new(base_seed, i as u64)))
        .collect()
}
