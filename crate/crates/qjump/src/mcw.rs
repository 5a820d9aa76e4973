// Copyright 2026 qjump Contributors
// SPDX-License-Identifier: Apache-2.0

//! Validation oracles: a small-timestep Monte-Carlo-wavefunction jump
//! simulator, an exact master-equation integrator, and steady-state
//! computation.
//!
//! The trajectory oracle deliberately uses the first-order no-jump Kraus
//! operator M0 = 1 - i dt H_e rather than the exact step exponential: it
//! reproduces the naive discretized scheme, O(dt) bias included, that the
//! Gillespie engine is validated against.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gillespie::{JumpRecord, RngStream, StateRecord, Trajectory};
use crate::linalg::{
    dag, eigh, expm, identity, spectral_norm, tr, unvectorize, vectorize, CMatrix, LuFactors, I,
};
use crate::model::{DensityState, LindbladModel};
use crate::precompute::{build_nojump_superoperator, jump_superoperator};

/// Configuration of the discretized trajectory oracle.
#[derive(Debug, Clone, Copy)]
pub struct McwConfig {
    /// Discretization step; must satisfy dt * max(|H_e|, |J|) <= 0.05.
    pub dt: f64,
    /// Time horizon.
    pub t_f: f64,
    /// Random stream for this trajectory.
    pub stream: RngStream,
}

/// Full vectorized Liouvillian, all channels contributing their complete
/// dissipators.
pub fn build_liouvillian(model: &LindbladModel) -> CMatrix {
    let (l0, _) = build_nojump_superoperator(model);
    let mut lt = l0;
    for l in model.monitored_jumps() {
        lt = lt + jump_superoperator(l);
    }
    lt
}

/// First-order validity guard for the MCW step.
fn check_step(model: &LindbladModel, dt: f64) -> Result<()> {
    let he_norm = spectral_norm(&model.effective_hamiltonian())?;
    let j_norm = spectral_norm(&model.jump_rate_operator())?;
    let product = dt * he_norm.max(j_norm);
    if product > 0.05 {
        return Err(Error::McwStepTooCoarse(product));
    }
    Ok(())
}

/// One discretized Monte-Carlo trajectory. All channels are treated as
/// monitored, so the model must not declare unmonitored channels.
pub fn mcw_trajectory(
    model: &LindbladModel,
    rho0: &DensityState,
    config: &McwConfig,
) -> Result<Trajectory> {
    if !model.is_fully_monitored() {
        return Err(Error::PartialMonitoringUnsupported);
    }
    check_step(model, config.dt)?;
    let dt = config.dt;
    let m0: CMatrix =
        identity(model.dim()) + model.effective_hamiltonian().mapv(|z| z * (-I * dt));
    let m0_dag = dag(&m0);

    let mut rng = config.stream.rng();
    let mut rho = rho0.matrix().clone();
    let mut t = 0.0f64;
    let mut t_last_jump = 0.0f64;
    let mut records = Vec::new();
    let n_channels = model.monitored_jumps().len();
    let mut probs = vec![0.0f64; n_channels + 1];

    while t < config.t_f {
        // p_0 = tr(M0 rho M0†), p_k = dt tr(L_k†L_k rho); renormalized to
        // sum to one (they sum to 1 + O(dt^2))
        let no_jump = m0.dot(&rho).dot(&m0_dag);
        probs[0] = tr(&no_jump).re.max(0.0);
        for (k, ldl) in model.monitored_ldl().iter().enumerate() {
            probs[k + 1] = dt * tr(&ldl.dot(&rho)).re.max(0.0);
        }
        let total: f64 = probs.iter().sum();
        if !(total > 0.0) {
            return Err(Error::ZeroJumpProbability);
        }
        let target = rng.next_unit() * total;
        let mut acc = 0.0;
        let mut selected = 0usize;
        for (k, p) in probs.iter().enumerate() {
            acc += p;
            if target < acc {
                selected = k;
                break;
            }
        }
        t += dt;
        if selected == 0 {
            rho = normalize(&no_jump)?;
        } else {
            let l = &model.monitored_jumps()[selected - 1];
            rho = normalize(&l.dot(&rho).dot(&dag(l)))?;
            let state = DensityState::new(rho.clone())
                .or_else(|_| DensityState::from_unnormalized(&rho))?;
            records.push(JumpRecord {
                waiting_time: t - t_last_jump,
                absolute_time: t,
                channel: selected,
                post_jump: StateRecord::Density(state),
                flagged: t > config.t_f,
            });
            t_last_jump = t;
        }
    }

    Ok(Trajectory {
        stream: config.stream,
        horizon: config.t_f,
        initial_state: StateRecord::Density(rho0.clone()),
        records,
        dark_terminated: false,
    })
}

fn normalize(m: &CMatrix) -> Result<CMatrix> {
    let h = crate::linalg::hermitize(m);
    let t = tr(&h).re;
    if !t.is_finite() || t < 1e-300 {
        return Err(Error::VanishingTrace { trace: t });
    }
    Ok(h.mapv(|z| z / t))
}

/// Ensemble of discretized trajectories with per-trajectory streams.
pub fn mcw_ensemble(
    model: &LindbladModel,
    rho0: &DensityState,
    dt: f64,
    t_f: f64,
    n_traj: usize,
    base_seed: u64,
) -> Result<Vec<Trajectory>> {
    (0..n_traj)
        .into_par_iter()
        .map(|i| {
            let config = McwConfig { dt, t_f, stream: RngStream::new(base_seed, i as u64) };
            mcw_trajectory(model, rho0, &config)
        })
        .collect()
}

/// Exact unconditional evolution: rho(t) = unvec(exp(L t) vec rho0) at each
/// requested time.
pub fn master_equation_evolve(
    model: &LindbladModel,
    rho0: &DensityState,
    times: &[f64],
) -> Result<Vec<DensityState>> {
    if rho0.dim() != model.dim() {
        return Err(Error::DimensionMismatch(format!(
            "state dim {} vs model dim {}",
            rho0.dim(),
            model.dim()
        )));
    }
    let lt = build_liouvillian(model);
    let v0 = vectorize(rho0.matrix())?;
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        if t < 0.0 || !t.is_finite() {
            return Err(Error::Config(format!("evolution time {t} must be non-negative")));
        }
        let propagator = expm(&lt.mapv(|z| z * t))?;
        let v = propagator.dot(&v0);
        let rho = unvectorize(&v, model.dim())?;
        out.push(DensityState::from_unnormalized(&rho)?);
    }
    Ok(out)
}

/// Steady state: the null vector of the Liouvillian, refined by inverse
/// iteration and checked for uniqueness through the second singular value.
pub fn steady_state(model: &LindbladModel) -> Result<DensityState> {
    let lt = build_liouvillian(model);
    let d = model.dim();

    // singular spectrum of L via the Hermitian eigenproblem of L†L
    let gram = dag(&lt).dot(&lt);
    let (vals, vecs) = eigh(&gram)?;
    let sigma2 = vals.get(1).copied().unwrap_or(0.0).max(0.0).sqrt();
    if sigma2 <= 1e-8 {
        return Err(Error::DegenerateSteadyState { sigma2 });
    }

    // refine the null vector by inverse iteration on L itself; the pivot
    // floor keeps the factorization of the (numerically singular) matrix
    // usable
    let scale = crate::linalg::frobenius_norm(&lt);
    let floor = (scale * 1e-14).max(1e-300);
    let lu = LuFactors::with_pivot_floor(lt.clone(), floor)?;
    let mut x = vecs[0].clone();
    for _ in 0..2 {
        x = lu.solve_vec(&x);
        let norm = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::DegenerateSteadyState { sigma2 });
        }
        x.mapv_inplace(|z| z / norm);
    }

    let raw = unvectorize(&x, d)?;
    let trace = tr(&raw);
    if trace.norm() < 1e-10 {
        return Err(Error::DegenerateSteadyState { sigma2 });
    }
    let normalized: CMatrix = raw.mapv(|z| z / trace);
    let rho = DensityState::from_unnormalized(&normalized)?;

    // residual check
    let residual_vec = lt.dot(&vectorize(rho.matrix())?);
    let residual = residual_vec.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if residual > 1e-8 {
        return Err(Error::DegenerateSteadyState { sigma2: residual });
    }
    Ok(rho)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::operators;
    use approx::assert_relative_eq;
    use ndarray::array;

    fn classical_decay(gamma: f64) -> LindbladModel {
        LindbladModel::classical_rate(&array![[0.0, gamma], [0.0, 0.0]]).unwrap()
    }

    #[test]
    fn step_guard_rejects_coarse_dt() {
        let model = LindbladModel::resonant_fluorescence(0.0, 0.5, 0.5).unwrap();
        let config = McwConfig { dt: 1.0, t_f: 10.0, stream: RngStream::new(1, 0) };
        let rho0 = DensityState::basis(2, 0).unwrap();
        assert!(matches!(
            mcw_trajectory(&model, &rho0, &config),
            Err(Error::McwStepTooCoarse(_))
        ));
    }

    #[test]
    fn classical_decay_jump_time_mean() {
        let model = classical_decay(1.0);
        let rho0 = DensityState::basis(2, 1).unwrap();
        let ens = mcw_ensemble(&model, &rho0, 1e-3, 15.0, 10_000, 42).unwrap();
        let mut waits = Vec::new();
        for traj in &ens {
            if let Some(first) = traj.records.first() {
                waits.push(first.waiting_time);
            }
        }
        assert!(waits.len() > 9_900, "nearly every trajectory should jump once");
        let mean: f64 = waits.iter().sum::<f64>() / waits.len() as f64;
        assert!((mean - 1.0).abs() < 0.03, "mean {mean}");
    }

    #[test]
    fn no_jump_steps_preserve_purity() {
        let model = LindbladModel::resonant_fluorescence(0.0, 0.5, 0.5).unwrap();
        let m0: CMatrix =
            identity(2) + model.effective_hamiltonian().mapv(|z| z * (-I * 1e-3));
        let psi = crate::model::PureState::basis(2, 0).unwrap();
        let mut rho = psi.density().matrix().clone();
        for _ in 0..500 {
            rho = normalize(&m0.dot(&rho).dot(&dag(&m0))).unwrap();
        }
        // rank-1 within 1e-9: second eigenvalue of the density matrix
        let vals = crate::linalg::hermitian_eigenvalues(&rho).unwrap();
        assert!(vals[0].abs() < 1e-9, "second eigenvalue {:.3e}", vals[0]);
        assert_relative_eq!(vals[1], 1.0, epsilon = 1e-9);
    }

    #[test]
    fn master_equation_initial_time_is_identity() {
        let model = LindbladModel::resonant_fluorescence(0.2, 0.5, 0.5).unwrap();
        let rho0 = DensityState::basis(2, 0).unwrap();
        let out = master_equation_evolve(&model, &rho0, &[0.0]).unwrap();
        assert!(crate::linalg::frobenius_distance(out[0].matrix(), rho0.matrix()) < 1e-13);
    }

    #[test]
    fn master_equation_classical_decay_is_exponential() {
        let gamma = 1.0;
        let model = classical_decay(gamma);
        let rho0 = DensityState::basis(2, 1).unwrap();
        let times = [0.0, 0.5, 1.0, 2.0, 5.0];
        let states = master_equation_evolve(&model, &rho0, &times).unwrap();
        let excited = operators::projector(2, 1);
        for (t, state) in times.iter().zip(states.iter()) {
            let p = state.expectation(&excited).unwrap();
            assert!(
                (p - (-gamma * t).exp()).abs() < 1e-9,
                "population {p} at t = {t}"
            );
        }
    }

    #[test]
    fn master_equation_preserves_trace_and_positivity() {
        let model = LindbladModel::charge_qubit(1.0, 1.0, 1.0, 1.0, 1.0).unwrap();
        let rho0 = DensityState::basis(4, 0).unwrap();
        let times = [0.1, 1.0, 3.0, 10.0];
        for state in master_equation_evolve(&model, &rho0, &times).unwrap() {
            assert!(state.audit().is_empty());
        }
    }

    #[test]
    fn steady_state_of_classical_decay_is_absorbing() {
        let model = classical_decay(1.0);
        let rho = steady_state(&model).unwrap();
        let ground = DensityState::basis(2, 0).unwrap();
        assert!(crate::linalg::frobenius_distance(rho.matrix(), ground.matrix()) < 1e-9);
    }

    #[test]
    fn steady_state_matches_analytic_resonant_fluorescence() {
        let (omega, gamma) = (0.5, 0.5);
        let model = LindbladModel::resonant_fluorescence(0.0, omega, gamma).unwrap();
        let rho = steady_state(&model).unwrap();
        let p_e = rho.expectation(&operators::qubit_number()).unwrap();
        let analytic = omega * omega / (2.0 * omega * omega + gamma * gamma / 4.0);
        assert_relative_eq!(p_e, analytic, epsilon = 1e-9);
        // long-time integration converges to the same state
        let rho0 = DensityState::basis(2, 0).unwrap();
        let long = master_equation_evolve(&model, &rho0, &[50.0 / gamma]).unwrap();
        assert!(rho.trace_distance(&long[0]).unwrap() < 1e-6);
    }

    #[test]
    fn steady_state_residual_is_small() {
        for model in [
            LindbladModel::resonant_fluorescence(0.3, 0.5, 0.5).unwrap(),
            LindbladModel::double_qubit(3.0, 0.3, 0.1).unwrap(),
            LindbladModel::charge_qubit(1.0, 1.0, 1.0, 1.0, 1.0).unwrap(),
        ] {
            let rho = steady_state(&model).unwrap();
            let lt = build_liouvillian(&model);
            let res = lt.dot(&vectorize(rho.matrix()).unwrap());
            let norm: f64 = res.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            assert!(norm <= 1e-8, "residual {norm:.3e}");
            assert!(rho.audit().is_empty());
        }
    }

    #[test]
    fn jump_count_tracks_steady_state_rate() {
        // long-horizon jump count approaches tr(J rho_ss) * t_f
        let model = LindbladModel::resonant_fluorescence(0.0, 0.5, 0.5).unwrap();
        let rho_ss = steady_state(&model).unwrap();
        let rate = rho_ss.expectation(&model.jump_rate_operator()).unwrap();
        let t_f = 400.0;
        let n_traj = 64;
        let ens = mcw_ensemble(&model, &DensityState::basis(2, 0).unwrap(), 2e-3, t_f, n_traj, 7)
            .unwrap();
        let total: usize = ens.iter().map(|t| t.records.len()).sum();
        let expected = rate * t_f * n_traj as f64;
        // Poisson-ish 3 sigma
        assert!(
            (total as f64 - expected).abs() < 3.5 * expected.sqrt() + 0.01 * expected,
            "jumps {total} vs {expected:.1}"
        );
    }

    #[test]
    fn mcw_requires_full_monitoring() {
        let h = operators::sigma_x().mapv(|z| z * 0.5);
        let l = operators::sigma_minus();
        let s = operators::sigma_z().mapv(|z| z * 0.2);
        let model = LindbladModel::new(h, vec![l], vec![s], vec![]).unwrap();
        let rho0 = DensityState::basis(2, 0).unwrap();
        let config = McwConfig { dt: 1e-3, t_f: 1.0, stream: RngStream::new(1, 0) };
        assert!(matches!(
            mcw_trajectory(&model, &rho0, &config),
            Err(Error::PartialMonitoringUnsupported)
        ));
    }
}
