// Copyright 2026 qjump Contributors
// SPDX-License-Identifier: Apache-2.0

//! Reconstructing the conditional state at arbitrary fixed times between
//! jumps, using the precomputed no-jump propagators.
//!
//! Each requested time is served from the most recent post-jump state
//! propagated by the nearest tabulated time, never by chaining previously
//! filled states, so rounding does not accumulate across segments.

use crate::error::{Error, Result};
use crate::gillespie::Trajectory;
use crate::model::DensityState;
use crate::precompute::PrecomputedTables;

/// States of one trajectory at a list of sample times.
#[derive(Debug, Clone)]
pub struct FilledTrajectory {
    pub sample_times: Vec<f64>,
    pub states: Vec<DensityState>,
}

/// Reconstruct the conditional state at each `sample_times` entry.
///
/// Sample times must be ascending and lie within [0, horizon]. A time in
/// the segment [t_j, t_{j+1}) is served by the post-jump state of jump j
/// (or the initial state before the first jump) propagated by the grid
/// time nearest to the offset; a virtual final jump at infinity closes the
/// last segment.
pub fn fill_states(
    trajectory: &Trajectory,
    tables: &PrecomputedTables,
    sample_times: &[f64],
) -> Result<FilledTrajectory> {
    let grid = tables.grid();
    let dt = grid.dt();
    let t_max = grid.t_max();

    for pair in sample_times.windows(2) {
        if pair[1] < pair[0] {
            return Err(Error::Config(format!(
                "sample times must be ascending ({} after {})",
                pair[1], pair[0]
            )));
        }
    }

    // segment starts: (start time, state at start)
    let mut segments: Vec<(f64, DensityState)> =
        vec![(0.0, trajectory.initial_state.as_density())];
    for record in &trajectory.records {
        segments.push((record.absolute_time, record.post_jump.as_density()));
    }

    let mut states = Vec::with_capacity(sample_times.len());
    let mut seg = 0usize;
    for &t in sample_times {
        if !(0.0..=trajectory.horizon).contains(&t) {
            return Err(Error::SampleTimeOutOfRange { t, horizon: trajectory.horizon });
        }
        while seg + 1 < segments.len() && segments[seg + 1].0 <= t {
            seg += 1;
        }
        let (t_seg, rho_seg) = &segments[seg];
        let offset = t - t_seg;
        if offset > t_max + 0.5 * dt {
            return Err(Error::GapExceedsTable { gap: offset, t_max });
        }
        let index = grid.index_nearest(offset);
        states.push(crate::gillespie::evolve_nojump(tables, rho_seg, index)?);
    }
    Ok(FilledTrajectory { sample_times: sample_times.to_vec(), states })
}

/// Iterate a single fixed-step no-jump propagator, renormalizing at each
/// step. Returns n_steps + 1 states starting with the input.
pub fn coarse_propagate(
    rho: &DensityState,
    tables: &PrecomputedTables,
    step_index: usize,
    n_steps: usize,
) -> Result<Vec<DensityState>> {
    if step_index >= tables.grid().n_points() {
        return Err(Error::GapExceedsTable {
            gap: step_index as f64 * tables.grid().dt(),
            t_max: tables.grid().t_max(),
        });
    }
    let mut out = Vec::with_capacity(n_steps + 1);
    out.push(rho.clone());
    let mut current = rho.clone();
    for _ in 0..n_steps {
        current = crate::gillespie::evolve_nojump(tables, &current, step_index)?;
        out.push(current.clone());
    }
    Ok(out)
}
