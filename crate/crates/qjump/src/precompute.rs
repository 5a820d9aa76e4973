// Copyright 2026 qjump Contributors
// SPDX-License-Identifier: Apache-2.0

//! Precomputation stage: the vectorized no-jump generator, tabulated
//! no-jump propagators V[t] and waiting-time kernels Q[t] on a uniform
//! time grid.
//!
//! Precomputation dominates the cost of the whole method, so the tables
//! are built from a single step propagator E = exp(L0 dt): V entries by
//! repeated multiplication and the Q chain by matrix-vector products on
//! the adjoint step. When a dense V list would exceed the memory budget,
//! only power-of-two checkpoints E^(2^k) are stored and V[i] is applied
//! via the binary decomposition of i.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use ndarray::{Array1, Array2};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{
    dag, expm, hermitize, identity, kron, spectral_norm, trace_of_vectorized, unvectorize,
    vectorize, CMatrix, CVector, I,
};
use crate::model::{DensityState, LindbladModel};

/// Uniform time grid: times are exactly i * dt for i = 0..n_points-1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    dt: f64,
    n_points: usize,
}

impl TimeGrid {
    pub fn new(dt: f64, n_points: usize) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidGrid(format!("dt = {dt} must be positive and finite")));
        }
        if n_points == 0 {
            return Err(Error::InvalidGrid("n_points must be at least 1".into()));
        }
        Ok(Self { dt, n_points })
    }

    /// Grid covering [0, t_max] with spacing dt (t_max rounded up to a
    /// whole number of steps).
    pub fn from_extent(dt: f64, t_max: f64) -> Result<Self> {
        if !(t_max >= 0.0) || !t_max.is_finite() {
            return Err(Error::InvalidGrid(format!("t_max = {t_max} must be non-negative")));
        }
        let n = (t_max / dt).ceil() as usize + 1;
        Self::new(dt, n)
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn t_max(&self) -> f64 {
        self.dt * (self.n_points - 1) as f64
    }

    pub fn time(&self, index: usize) -> f64 {
        index as f64 * self.dt
    }

    /// Nearest grid index to `t`, clamped into range.
    pub fn index_nearest(&self, t: f64) -> usize {
        if t <= 0.0 {
            return 0;
        }
        let i = (t / self.dt).round() as usize;
        i.min(self.n_points - 1)
    }
}

/// Tuning knobs for table construction.
#[derive(Debug, Clone)]
pub struct TableOptions {
    /// Maximum waiting-time mass allowed beyond t_max.
    pub tail_tolerance: f64,
    /// Total WTD mass below which a state counts as dark.
    pub weight_floor: f64,
    /// Memory budget for a dense V table; above it only power-of-two
    /// checkpoints are stored.
    pub dense_budget_bytes: usize,
    /// Hard cap on grid points during auto-extension.
    pub max_points: usize,
    /// Maximum number of cached per-state cumulative WTDs.
    pub wtd_cache_capacity: usize,
}

impl Default for TableOptions {
    fn default() -> Self {
        Self {
            tail_tolerance: 1e-3,
            weight_floor: 1e-12,
            dense_budget_bytes: 256 << 20,
            max_points: 1 << 21,
            wtd_cache_capacity: 64,
        }
    }
}

/// No-jump propagator table: either every V[i] dense, or the power-of-two
/// checkpoints E^(2^k).
#[derive(Debug, Clone)]
pub enum Propagator {
    Dense(Vec<CMatrix>),
    Checkpoints(Vec<CMatrix>),
}

impl Propagator {
    /// Apply V[index] to a vector.
    pub fn apply(&self, index: usize, v: &CVector) -> CVector {
        match self {
            Propagator::Dense(table) => table[index].dot(v),
            Propagator::Checkpoints(ckpts) => {
                let mut x = v.clone();
                let mut i = index;
                let mut k = 0;
                while i != 0 {
                    if i & 1 == 1 {
                        x = ckpts[k].dot(&x);
                    }
                    i >>= 1;
                    k += 1;
                }
                x
            }
        }
    }

    /// Materialize V[index] as a matrix (test and diagnostic use).
    pub fn matrix(&self, index: usize, dim: usize) -> CMatrix {
        match self {
            Propagator::Dense(table) => table[index].clone(),
            Propagator::Checkpoints(ckpts) => {
                let mut m = identity(dim);
                let mut i = index;
                let mut k = 0;
                while i != 0 {
                    if i & 1 == 1 {
                        m = ckpts[k].dot(&m);
                    }
                    i >>= 1;
                    k += 1;
                }
                m
            }
        }
    }

    pub fn is_dense(&self) -> bool {
        matches!(self, Propagator::Dense(_))
    }
}

/// Cumulative waiting-time distribution for one state: cumulative clamped
/// weights over the grid plus the survival probability at t_max.
#[derive(Debug, Clone)]
pub struct CumulativeWtd {
    pub cum: Vec<f64>,
    pub total: f64,
    pub survival: f64,
}

impl CumulativeWtd {
    /// Integrated WTD mass on the grid (rectangle rule).
    pub fn mass(&self, dt: f64) -> f64 {
        self.total * dt
    }
}

type StateKey = Box<[u64]>;

/// Memoized per-state cumulative WTDs, keyed by the exact bit pattern of
/// the state. Renewal processes revisit the same post-jump states bit for
/// bit, which turns the per-jump weight scan into a table lookup.
#[derive(Debug, Default)]
struct WtdCache {
    map: RwLock<HashMap<StateKey, Arc<CumulativeWtd>>>,
    capacity: usize,
}

impl WtdCache {
    fn new(capacity: usize) -> Self {
        Self { map: RwLock::new(HashMap::new()), capacity }
    }

    fn get(&self, key: &[u64]) -> Option<Arc<CumulativeWtd>> {
        self.map.read().expect("wtd cache poisoned").get(key).cloned()
    }

    fn insert(&self, key: StateKey, value: Arc<CumulativeWtd>) {
        let mut map = self.map.write().expect("wtd cache poisoned");
        if map.len() < self.capacity {
            map.insert(key, value);
        }
    }
}

fn state_key(m: &CMatrix) -> StateKey {
    let mut key = Vec::with_capacity(2 * m.len());
    for z in m.iter() {
        key.push(z.re.to_bits());
        key.push(z.im.to_bits());
    }
    key.into_boxed_slice()
}

/// Precomputed no-jump propagators and WTD kernels for one model on one
/// grid. Immutable after construction; shared read-only by all trajectory
/// workers.
#[derive(Debug)]
pub struct PrecomputedTables {
    grid: TimeGrid,
    dim: usize,
    /// Row i holds vec(Q[i]^T), so `qmat . vec(rho)` lists tr(Q[i] rho).
    qmat: Arc<Array2<Complex64>>,
    propagator: Propagator,
    survival_tail: f64,
    options: TableOptions,
    cache: WtdCache,
}

impl PrecomputedTables {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn options(&self) -> &TableOptions {
        &self.options
    }

    /// Worst-case waiting-time mass beyond t_max over basis probes.
    pub fn survival_tail(&self) -> f64 {
        self.survival_tail
    }

    pub fn propagator(&self) -> &Propagator {
        &self.propagator
    }

    pub(crate) fn qmat(&self) -> &Arc<Array2<Complex64>> {
        &self.qmat
    }

    /// WTD kernel Q[i] as a matrix.
    pub fn q(&self, index: usize) -> CMatrix {
        let d = self.dim;
        let row = self.qmat.row(index);
        let mut q = Array2::zeros((d, d));
        for j in 0..d {
            for i in 0..d {
                // row holds vec(Q^T): entry (i + j d) is Q[j, i]
                q[[j, i]] = row[j * d + i];
            }
        }
        q
    }

    /// Apply the no-jump propagator V[index] to a vectorized state.
    pub fn apply_propagator(&self, index: usize, v: &CVector) -> CVector {
        self.propagator.apply(index, v)
    }

    /// Survival probability tr(unvec(V[index] vec(rho))), clamped to [0, 1].
    pub fn survival_at(&self, rho: &CMatrix, index: usize) -> f64 {
        let v = vectorize(rho).expect("state is square by construction");
        let out = self.propagator.apply(index, &v);
        trace_of_vectorized(&out, self.dim).re.clamp(0.0, 1.0)
    }

    /// Raw clamped WTD weights w_i = max(0, Re tr(Q[i] rho)).
    pub(crate) fn weights_of(&self, rho: &CMatrix) -> Vec<f64> {
        let v = vectorize(rho).expect("state is square by construction");
        let w = self.qmat.dot(&v);
        w.iter().map(|z| z.re.max(0.0)).collect()
    }

    /// Cumulative WTD for a state, memoized by exact bit pattern.
    pub(crate) fn cumulative_wtd(&self, rho: &CMatrix) -> Arc<CumulativeWtd> {
        let key = state_key(rho);
        if let Some(hit) = self.cache.get(&key) {
            return hit;
        }
        let weights = self.weights_of(rho);
        let mut cum = Vec::with_capacity(weights.len());
        let mut acc = 0.0;
        for w in &weights {
            acc += w;
            cum.push(acc);
        }
        let survival = self.survival_at(rho, self.grid.n_points - 1);
        let value = Arc::new(CumulativeWtd { cum, total: acc, survival });
        self.cache.insert(key, value.clone());
        value
    }
}

/// Vectorized no-jump generator and its adjoint.
///
/// Monitored channels contribute only their anticommutator (sink) parts;
/// unmonitored channels contribute full dissipators. The adjoint is the
/// conjugate transpose in the vectorized basis.
pub fn build_nojump_superoperator(model: &LindbladModel) -> (CMatrix, CMatrix) {
    let d = model.dim();
    let eye = identity(d);
    let h = model.hamiltonian();
    let ht = h.t().to_owned();

    let mut l0 = kron(&eye, h).mapv(|z| z * (-I)) + kron(&ht, &eye).mapv(|z| z * I);
    for s in model.unmonitored_jumps() {
        let s_conj = s.mapv(|z| z.conj());
        let sds = dag(s).dot(s);
        let sds_t = sds.t().to_owned();
        l0 = l0 + kron(&s_conj, s)
            - kron(&eye, &sds).mapv(|z| z * 0.5)
            - kron(&sds_t, &eye).mapv(|z| z * 0.5);
    }
    for ldl in model.monitored_ldl() {
        let ldl_t = ldl.t().to_owned();
        l0 = l0 - kron(&eye, ldl).mapv(|z| z * 0.5) - kron(&ldl_t, &eye).mapv(|z| z * 0.5);
    }
    let l0_dag = dag(&l0);
    (l0, l0_dag)
}

/// Jump superoperator of a single channel in the vectorized basis:
/// vec(L rho L†) = (L* ⊗ L) vec(rho).
pub fn jump_superoperator(l: &CMatrix) -> CMatrix {
    let l_conj = l.mapv(|z| z.conj());
    kron(&l_conj, l)
}

/// Per-probe tail metric: the waiting-time mass plausibly still in flight
/// beyond the grid. Small either when survival has been swept out or when
/// the probe has converged onto a dark component (survival flat and the
/// WTD decayed away from its peak).
fn tail_metric(s_half: f64, s_full: f64, w_last: f64, w_max: f64, t_max: f64) -> f64 {
    let swept = s_full;
    let drift = 2.0 * (s_half - s_full).max(0.0);
    let activity = w_last * t_max;
    let decayed_from_peak = w_last <= 1e-2 * w_max || w_max == 0.0;
    if decayed_from_peak {
        swept.min(drift.max(activity))
    } else {
        swept
    }
}

struct TableSkeleton {
    qmat: Array2<Complex64>,
    propagator: Propagator,
    tail: f64,
}

/// Builds tables of growing length without recomputing the step matrices.
struct TableBuilder<'m> {
    model: &'m LindbladModel,
    dim: usize,
    dt: f64,
    step: CMatrix,
    step_dag: CMatrix,
    options: TableOptions,
}

impl<'m> TableBuilder<'m> {
    fn new(model: &'m LindbladModel, dt: f64, options: TableOptions) -> Result<Self> {
        let (l0, _) = build_nojump_superoperator(model);
        let step = expm(&l0.mapv(|z| z * dt))?;
        let step_dag = dag(&step);
        Ok(Self { model, dim: model.dim(), dt, step, step_dag, options })
    }

    fn build(&self, n_points: usize) -> Result<TableSkeleton> {
        let d = self.dim;
        let d2 = d * d;

        // Q chain: q[i+1] = E† q[i], hermitized at each step.
        let j_op = self.model.jump_rate_operator();
        let mut qmat = Array2::zeros((n_points, d2));
        let mut q_vec = vectorize(&j_op)?;
        for i in 0..n_points {
            if i > 0 {
                q_vec = self.step_dag.dot(&q_vec);
                let q = hermitize(&unvectorize(&q_vec, d)?);
                q_vec = vectorize(&q)?;
            }
            let q = unvectorize(&q_vec, d)?;
            for jj in 0..d {
                for ii in 0..d {
                    // row holds vec(Q^T)
                    qmat[[i, ii + jj * d]] = q[[jj, ii]];
                }
            }
        }

        // propagator: dense when it fits the budget, checkpoints otherwise
        let dense_bytes = n_points.saturating_mul(d2 * d2).saturating_mul(16);
        let propagator = if dense_bytes <= self.options.dense_budget_bytes {
            let mut table = Vec::with_capacity(n_points);
            table.push(identity(d2));
            for i in 1..n_points {
                let next = self.step.dot(&table[i - 1]);
                table.push(next);
            }
            Propagator::Dense(table)
        } else {
            let mut ckpts = vec![self.step.clone()];
            let mut span = 1usize;
            while span < n_points - 1 {
                let last = ckpts.last().expect("nonempty");
                ckpts.push(last.dot(last));
                span <<= 1;
            }
            Propagator::Checkpoints(ckpts)
        };

        // tail check over computational-basis probes
        let last = n_points - 1;
        let half = last / 2;
        let t_max = self.dt * last as f64;
        let mut tail: f64 = 0.0;
        for p in 0..d {
            let probe = crate::model::operators::projector(d, p);
            let v = vectorize(&probe)?;
            let s_full = trace_of_vectorized(&propagator.apply(last, &v), d).re.clamp(0.0, 1.0);
            let s_half = trace_of_vectorized(&propagator.apply(half, &v), d).re.clamp(0.0, 1.0);
            // WTD of the probe along the grid: tr(Q[i] |p><p|) = Q[i][p, p]
            let mut w_last = 0.0f64;
            let mut w_max = 0.0f64;
            for i in 0..n_points {
                let w = qmat[[i, p + p * d]].re.max(0.0);
                w_max = w_max.max(w);
                if i == last {
                    w_last = w;
                }
            }
            tail = tail.max(tail_metric(s_half, s_full, w_last, w_max, t_max));
        }

        Ok(TableSkeleton { qmat, propagator, tail })
    }
}

/// Default grid spacing: resolve the fastest of the Hamiltonian and
/// monitored jump-rate scales with twenty points per unit action.
pub fn default_dt(model: &LindbladModel) -> Result<f64> {
    let h_norm = spectral_norm(model.hamiltonian())?;
    let j_norm = spectral_norm(&model.jump_rate_operator())?;
    let scale = h_norm.max(j_norm).max(1e-9);
    Ok(1.0 / (20.0 * scale))
}

/// Build tables on a fixed grid, failing if waiting-time mass is left
/// beyond t_max.
pub fn build_tables(
    model: &LindbladModel,
    grid: TimeGrid,
    options: TableOptions,
) -> Result<PrecomputedTables> {
    let builder = TableBuilder::new(model, grid.dt(), options.clone())?;
    let skeleton = builder.build(grid.n_points())?;
    finish_tables(model, grid, options, skeleton, true)
}

/// Build tables with automatic extent: double t_max until the tail check
/// passes or the point cap is hit. `dt = None` applies the density rule.
pub fn build_tables_auto(
    model: &LindbladModel,
    dt: Option<f64>,
    t_max: Option<f64>,
    options: TableOptions,
) -> Result<PrecomputedTables> {
    let dt = match dt {
        Some(dt) => dt,
        None => default_dt(model)?,
    };
    if let Some(t_max) = t_max {
        return build_tables(model, TimeGrid::from_extent(dt, t_max)?, options);
    }

    let builder = TableBuilder::new(model, dt, options.clone())?;
    let d2 = model.dim() * model.dim();
    // keep the Q table within the dense budget as well
    let q_cap = (options.dense_budget_bytes / (16 * d2)).max(512);
    let cap = options.max_points.min(q_cap);
    let mut n = 256usize.min(cap);
    loop {
        let skeleton = builder.build(n)?;
        if skeleton.tail <= options.tail_tolerance {
            let grid = TimeGrid::new(dt, n)?;
            return finish_tables(model, grid, options, skeleton, true);
        }
        if n >= cap {
            return Err(Error::TailMassTooLarge {
                tail: skeleton.tail,
                tolerance: options.tail_tolerance,
                t_max: dt * (n - 1) as f64,
            });
        }
        n = (n * 2).min(cap);
    }
}

fn finish_tables(
    model: &LindbladModel,
    grid: TimeGrid,
    options: TableOptions,
    skeleton: TableSkeleton,
    enforce_tail: bool,
) -> Result<PrecomputedTables> {
    if enforce_tail && skeleton.tail > options.tail_tolerance {
        return Err(Error::TailMassTooLarge {
            tail: skeleton.tail,
            tolerance: options.tail_tolerance,
            t_max: grid.t_max(),
        });
    }
    let cache = WtdCache::new(options.wtd_cache_capacity);
    Ok(PrecomputedTables {
        grid,
        dim: model.dim(),
        qmat: Arc::new(skeleton.qmat),
        propagator: skeleton.propagator,
        survival_tail: skeleton.tail,
        options,
        cache,
    })
}

/// Waiting-time density samples w_i = max(0, Re tr(Q[i] rho)).
///
/// Errors with [`Error::AllZeroWeights`] when the integrated mass is below
/// the weight floor (the state is dark on this grid).
pub fn wtd_weights(tables: &PrecomputedTables, rho: &DensityState) -> Result<Vec<f64>> {
    if rho.dim() != tables.dim() {
        return Err(Error::DimensionMismatch(format!(
            "state dim {} vs table dim {}",
            rho.dim(),
            tables.dim()
        )));
    }
    let weights = tables.weights_of(rho.matrix());
    let mass: f64 = weights.iter().sum::<f64>() * tables.grid().dt();
    if mass < tables.options().weight_floor {
        return Err(Error::AllZeroWeights { mass });
    }
    Ok(weights)
}

/// Tables for the pure-state fast path: d x d no-jump propagators
/// U[t] = exp(-i H_e t) and the same WTD kernels as the mixed tables.
pub struct PureTables {
    grid: TimeGrid,
    dim: usize,
    qmat: Arc<Array2<Complex64>>,
    u_prop: Propagator,
    options: TableOptions,
}

impl PureTables {
    /// Derive pure-state tables from mixed ones. Requires full monitoring.
    pub fn from_tables(model: &LindbladModel, tables: &PrecomputedTables) -> Result<Self> {
        if !model.is_fully_monitored() {
            return Err(Error::PartialMonitoringUnsupported);
        }
        let d = model.dim();
        let grid = *tables.grid();
        let h_e = model.effective_hamiltonian();
        let step = expm(&h_e.mapv(|z| z * (-I * grid.dt())))?;
        let n = grid.n_points();
        let dense_bytes = n.saturating_mul(d * d).saturating_mul(16);
        let u_prop = if dense_bytes <= tables.options().dense_budget_bytes {
            let mut table = Vec::with_capacity(n);
            table.push(identity(d));
            for i in 1..n {
                let next = step.dot(&table[i - 1]);
                table.push(next);
            }
            Propagator::Dense(table)
        } else {
            let mut ckpts = vec![step.clone()];
            let mut span = 1usize;
            while span < n - 1 {
                let last = ckpts.last().expect("nonempty");
                ckpts.push(last.dot(last));
                span <<= 1;
            }
            Propagator::Checkpoints(ckpts)
        };
        Ok(Self {
            grid,
            dim: d,
            qmat: tables.qmat().clone(),
            u_prop,
            options: tables.options().clone(),
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn options(&self) -> &TableOptions {
        &self.options
    }

    /// Apply U[index] to an amplitude vector (unnormalized output).
    pub fn apply_propagator(&self, index: usize, psi: &CVector) -> CVector {
        self.u_prop.apply(index, psi)
    }

    /// WTD weights <psi|Q[i]|psi>, clamped at zero.
    pub fn weights_of(&self, psi: &CVector) -> Vec<f64> {
        let d = self.dim;
        let mut outer = Array1::zeros(d * d);
        for j in 0..d {
            for i in 0..d {
                outer[j * d + i] = psi[i] * psi[j].conj();
            }
        }
        let w = self.qmat.dot(&outer);
        w.iter().map(|z| z.re.max(0.0)).collect()
    }

    /// Survival probability |U[last] psi|^2 clamped to [0, 1].
    pub fn survival(&self, psi: &CVector) -> f64 {
        let out = self.u_prop.apply(self.grid.n_points - 1, psi);
        out.iter().map(|z| z.norm_sqr()).sum::<f64>().clamp(0.0, 1.0)
    }

    pub(crate) fn cumulative_wtd(&self, psi: &CVector) -> CumulativeWtd {
        let weights = self.weights_of(psi);
        let mut cum = Vec::with_capacity(weights.len());
        let mut acc = 0.0;
        for w in &weights {
            acc += w;
            cum.push(acc);
        }
        let survival = self.survival(psi);
        CumulativeWtd { cum, total: acc, survival }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{frobenius_distance, is_hermitian, tr, zeros};
    use crate::model::operators;
    use approx::assert_relative_eq;
    use ndarray::array;
    use rand_chacha::rand_core::{RngCore, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_density(rng: &mut ChaCha8Rng, d: usize) -> CMatrix {
        let mut unit = || (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
        let a = Array2::from_shape_fn((d, d), |_| {
            Complex64::new(2.0 * unit() - 1.0, 2.0 * unit() - 1.0)
        });
        let g = a.dot(&dag(&a));
        let t = tr(&g).re;
        g.mapv(|z| z / t)
    }


    fn relaxed() -> TableOptions {
        TableOptions { tail_tolerance: f64::INFINITY, ..TableOptions::default() }
    }

    /// Direct operator-arithmetic Liouvillian action (test oracle,
    /// independent of the Kronecker construction).
    fn liouvillian_action(
        h: &CMatrix,
        full_dissipators: &[CMatrix],
        sink_only: &[CMatrix],
        rho: &CMatrix,
    ) -> CMatrix {
        let mut out = (h.dot(rho) - rho.dot(h)).mapv(|z| z * (-I));
        for l in full_dissipators {
            let ld = dag(l);
            let ldl = ld.dot(l);
            out = out + l.dot(rho).dot(&ld)
                - ldl.dot(rho).mapv(|z| z * 0.5)
                - rho.dot(&ldl).mapv(|z| z * 0.5);
        }
        for l in sink_only {
            let ldl = dag(l).dot(l);
            out = out - ldl.dot(rho).mapv(|z| z * 0.5) - rho.dot(&ldl).mapv(|z| z * 0.5);
        }
        out
    }

    #[test]
    fn nojump_superoperator_vanishes_for_trivial_model() {
        // H = 0, single all-zero channel
        let model =
            LindbladModel::new(zeros(2), vec![zeros(2)], vec![], vec![]).unwrap();
        let (l0, l0_dag) = build_nojump_superoperator(&model);
        assert_eq!(crate::linalg::frobenius_norm(&l0), 0.0);
        assert_eq!(crate::linalg::frobenius_norm(&l0_dag), 0.0);
    }

    #[test]
    fn nojump_superoperator_matches_effective_hamiltonian_form() {
        // full monitoring: unvec(L0 vec(rho)) = -i (H_e rho - rho H_e†)
        let model = LindbladModel::resonant_fluorescence(0.3, 0.5, 0.7).unwrap();
        let (l0, _) = build_nojump_superoperator(&model);
        let h_e = model.effective_hamiltonian();
        let h_e_dag = dag(&h_e);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..6 {
            let rho = random_density(&mut rng, 2);
            let lhs = unvectorize(&l0.dot(&vectorize(&rho).unwrap()), 2).unwrap();
            let rhs = (h_e.dot(&rho) - rho.dot(&h_e_dag)).mapv(|z| z * (-I));
            assert!(frobenius_distance(&lhs, &rhs) < 1e-12);
        }
    }

    #[test]
    fn nojump_superoperator_with_only_unmonitored_is_full_liouvillian() {
        // a monitored zero channel plus a real unmonitored channel: the
        // no-jump generator is the full Liouvillian of the unmonitored part
        let h = operators::sigma_z().mapv(|z| z * 0.4) + operators::sigma_x().mapv(|z| z * 0.9);
        let s = operators::sigma_minus().mapv(|z| z * 0.6f64.sqrt());
        let model =
            LindbladModel::new(h.clone(), vec![zeros(2)], vec![s.clone()], vec![]).unwrap();
        let (l0, _) = build_nojump_superoperator(&model);
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        for _ in 0..6 {
            let rho = random_density(&mut rng, 2);
            let lhs = unvectorize(&l0.dot(&vectorize(&rho).unwrap()), 2).unwrap();
            let rhs = liouvillian_action(&h, std::slice::from_ref(&s), &[], &rho);
            assert!(frobenius_distance(&lhs, &rhs) < 1e-12);
        }
    }

    #[test]
    fn nojump_superoperator_mixed_monitoring_oracle() {
        // one monitored decay + one unmonitored dephasing channel
        let h = operators::sigma_x().mapv(|z| z * 0.5);
        let l = operators::sigma_minus().mapv(|z| z * 0.8f64.sqrt());
        let s = operators::sigma_z().mapv(|z| z * 0.3f64.sqrt());
        let model =
            LindbladModel::new(h.clone(), vec![l.clone()], vec![s.clone()], vec![]).unwrap();
        let (l0, l0_dag) = build_nojump_superoperator(&model);
        let mut rng = ChaCha8Rng::seed_from_u64(55);
        for _ in 0..6 {
            let rho = random_density(&mut rng, 2);
            let lhs = unvectorize(&l0.dot(&vectorize(&rho).unwrap()), 2).unwrap();
            let rhs = liouvillian_action(
                &h,
                std::slice::from_ref(&s),
                std::slice::from_ref(&l),
                &rho,
            );
            assert!(frobenius_distance(&lhs, &rhs) < 1e-12);
        }
        // adjoint consistency: conjugate transpose equals the explicit
        // adjoint formula
        let eye = identity(2);
        let ht = h.t().to_owned();
        let s_t = s.t().to_owned();
        let s_dag = dag(&s);
        let sds = dag(&s).dot(&s);
        let sds_t = sds.t().to_owned();
        let ldl = dag(&l).dot(&l);
        let ldl_t = ldl.t().to_owned();
        let explicit = kron(&eye, &h).mapv(|z| z * I) + kron(&ht, &eye).mapv(|z| z * (-I))
            + kron(&s_t, &s_dag)
            - kron(&sds_t, &eye).mapv(|z| z * 0.5)
            - kron(&eye, &sds).mapv(|z| z * 0.5)
            - kron(&ldl_t, &eye).mapv(|z| z * 0.5)
            - kron(&eye, &ldl).mapv(|z| z * 0.5);
        assert!(frobenius_distance(&l0_dag, &explicit) < 1e-12);
    }

    #[test]
    fn single_point_grid_is_identity_and_j() {
        let model = LindbladModel::resonant_fluorescence(0.0, 0.5, 0.5).unwrap();
        let grid = TimeGrid::new(0.1, 1).unwrap();
        let tables = build_tables(&model, grid, relaxed()).unwrap();
        assert!(frobenius_distance(&tables.propagator().matrix(0, 4), &identity(4)) < 1e-12);
        assert!(frobenius_distance(&tables.q(0), &model.jump_rate_operator()) < 1e-12);
    }

    #[test]
    fn classical_decay_kernel_is_exponential() {
        let gamma = 1.0;
        let model = LindbladModel::classical_rate(&array![[0.0, gamma], [0.0, 0.0]]).unwrap();
        let grid = TimeGrid::from_extent(0.01, 20.0).unwrap();
        let tables = build_tables(&model, grid, TableOptions::default()).unwrap();
        let rho = DensityState::basis(2, 1).unwrap();
        let weights = wtd_weights(&tables, &rho).unwrap();
        for (i, w) in weights.iter().enumerate().step_by(50) {
            let t = grid.time(i);
            assert!(
                (w - gamma * (-gamma * t).exp()).abs() < 1e-8,
                "w({t}) = {w}, expected {}",
                gamma * (-gamma * t).exp()
            );
        }
    }

    #[test]
    fn dark_probe_passes_tail_check_and_errors_on_weights() {
        // absorbing two-state chain: probe |0> is dark but the build must
        // still succeed; sampling from |0> reports AllZeroWeights
        let model = LindbladModel::classical_rate(&array![[0.0, 1.0], [0.0, 0.0]]).unwrap();
        let grid = TimeGrid::from_extent(0.01, 20.0).unwrap();
        let tables = build_tables(&model, grid, TableOptions::default()).unwrap();
        assert!(tables.survival_tail() <= 1e-3);
        let dark = DensityState::basis(2, 0).unwrap();
        assert!(matches!(wtd_weights(&tables, &dark), Err(Error::AllZeroWeights { .. })));
        // zero weight at t = 0 for a state in the kernel of J
        let live = DensityState::basis(2, 1).unwrap();
        let w = wtd_weights(&tables, &live).unwrap();
        assert!(w[0] > 0.0);
    }

    #[test]
    fn truncated_grid_reports_tail_mass_too_large() {
        let model = LindbladModel::resonant_fluorescence(0.0, 0.5, 0.5).unwrap();
        let grid = TimeGrid::from_extent(0.05, 3.0).unwrap();
        let err = build_tables(&model, grid, TableOptions::default()).unwrap_err();
        assert!(matches!(err, Error::TailMassTooLarge { .. }), "{err}");
    }

    #[test]
    fn auto_extension_reaches_tail_tolerance() {
        let model = LindbladModel::resonant_fluorescence(0.0, 0.5, 0.5).unwrap();
        let tables = build_tables_auto(&model, None, None, TableOptions::default()).unwrap();
        assert!(tables.survival_tail() <= 1e-3);
        // normalization: trapezoid sum of weights + survival = 1 +- 1e-3
        let rho = DensityState::basis(2, 0).unwrap();
        let w = wtd_weights(&tables, &rho).unwrap();
        let dt = tables.grid().dt();
        let n = tables.grid().n_points();
        let trapezoid: f64 =
            (w.iter().sum::<f64>() - 0.5 * w[0] - 0.5 * w[n - 1]) * dt;
        let survival = tables.survival_at(rho.matrix(), n - 1);
        assert!(
            (trapezoid + survival - 1.0).abs() <= 1e-3,
            "normalization off: {}",
            trapezoid + survival
        );
    }

    #[test]
    fn q_kernels_are_hermitian_and_real_traced() {
        let model = LindbladModel::resonant_fluorescence(0.0, 0.5, 0.5).unwrap();
        let tables = build_tables_auto(&model, None, None, TableOptions::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rho = random_density(&mut rng, 2);
        let n = tables.grid().n_points();
        for i in (0..n).step_by(n / 7 + 1) {
            let q = tables.q(i);
            assert!(is_hermitian(&q, 1e-9), "Q[{i}] not Hermitian");
            let t = tr(&q.dot(&rho));
            assert!(t.im.abs() <= 1e-10, "tr(Q rho) imaginary residue {:.3e}", t.im);
        }
    }

    #[test]
    fn propagator_matches_direct_exponential() {
        let model = LindbladModel::resonant_fluorescence(0.2, 0.5, 0.5).unwrap();
        let grid = TimeGrid::new(0.05, 128).unwrap();
        let tables = build_tables(&model, grid, relaxed()).unwrap();
        let (l0, _) = build_nojump_superoperator(&model);
        for i in [1usize, 7, 37, 127] {
            let direct = expm(&l0.mapv(|z| z * (grid.time(i)))).unwrap();
            let from_table = tables.propagator().matrix(i, 4);
            assert!(
                frobenius_distance(&direct, &from_table) <= 1e-8,
                "V[{i}] deviates from exp(L0 t)"
            );
        }
    }

    #[test]
    fn checkpoint_mode_agrees_with_dense() {
        let model = LindbladModel::resonant_fluorescence(0.2, 0.5, 0.5).unwrap();
        let grid = TimeGrid::new(0.05, 100).unwrap();
        let dense = build_tables(&model, grid, relaxed()).unwrap();
        let tiny_budget = TableOptions { dense_budget_bytes: 0, ..relaxed() };
        let ckpt = build_tables(&model, grid, tiny_budget).unwrap();
        assert!(dense.propagator().is_dense());
        assert!(!ckpt.propagator().is_dense());
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let rho = random_density(&mut rng, 2);
        let v = vectorize(&rho).unwrap();
        for i in [0usize, 1, 13, 64, 99] {
            let a = dense.apply_propagator(i, &v);
            let b = ckpt.apply_propagator(i, &v);
            let err: f64 =
                a.iter().zip(b.iter()).map(|(p, q)| (p - q).norm_sqr()).sum::<f64>().sqrt();
            assert!(err < 1e-10, "dense/checkpoint mismatch {err:.3e} at {i}");
        }
    }

    #[test]
    fn survival_is_monotone_nonincreasing() {
        for model in [
            LindbladModel::resonant_fluorescence(0.0, 0.5, 0.5).unwrap(),
            LindbladModel::charge_qubit(1.0, 1.0, 1.0, 1.0, 1.0).unwrap(),
        ] {
            let tables = build_tables_auto(&model, None, None, TableOptions::default()).unwrap();
            let d = model.dim();
            for p in 0..d {
                let rho = DensityState::basis(d, p).unwrap();
                let n = tables.grid().n_points();
                let mut prev = f64::INFINITY;
                for i in (0..n).step_by(n / 23 + 1) {
                    let s = tables.survival_at(rho.matrix(), i);
                    assert!(s <= prev + 1e-10, "survival increased at index {i}");
                    prev = s;
                }
            }
        }
    }

    #[test]
    fn cumulative_wtd_is_cached_by_bit_pattern() {
        let model = LindbladModel::resonant_fluorescence(0.0, 0.5, 0.5).unwrap();
        let tables = build_tables_auto(&model, None, None, TableOptions::default()).unwrap();
        let rho = DensityState::basis(2, 0).unwrap();
        let a = tables.cumulative_wtd(rho.matrix());
        let b = tables.cumulative_wtd(rho.matrix());
        assert!(Arc::ptr_eq(&a, &b));
        assert_relative_eq!(a.total, b.total);
    }

    #[test]
    fn pure_tables_agree_with_mixed_on_weights_and_survival() {
        let model = LindbladModel::resonant_fluorescence(0.1, 0.5, 0.5).unwrap();
        let tables = build_tables_auto(&model, None, None, TableOptions::default()).unwrap();
        let pure = PureTables::from_tables(&model, &tables).unwrap();
        let psi = crate::model::PureState::normalized(&ndarray::arr1(&[
            Complex64::new(0.6, 0.0),
            Complex64::new(0.0, 0.8),
        ]))
        .unwrap();
        let rho = psi.density();
        let wm = tables.weights_of(rho.matrix());
        let wp = pure.weights_of(psi.amplitudes());
        for (a, b) in wm.iter().zip(wp.iter()) {
            assert!((a - b).abs() < 1e-10);
        }
        let n = tables.grid().n_points();
        let sm = tables.survival_at(rho.matrix(), n - 1);
        let sp = pure.survival(psi.amplitudes());
        assert!((sm - sp).abs() < 1e-10);
    }

    #[test]
    fn pure_tables_require_full_monitoring() {
        let h = operators::sigma_x().mapv(|z| z * 0.5);
        let l = operators::sigma_minus();
        let s = operators::sigma_z().mapv(|z| z * 0.2);
        let model = LindbladModel::new(h, vec![l], vec![s], vec![]).unwrap();
        let tables = build_tables_auto(&model, None, None, TableOptions::default()).unwrap();
        assert!(matches!(
            PureTables::from_tables(&model, &tables),
            Err(Error::PartialMonitoringUnsupported)
        ));
    }
}
