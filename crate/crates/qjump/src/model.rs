// Copyright 2026 qjump Contributors
// SPDX-License-Identifier: Apache-2.0

//! GKSL (Lindblad) model definition and quantum states.
//!
//! A model is a Hamiltonian plus two ordered lists of jump operators:
//! monitored channels (each firing is a detector click) and unmonitored
//! channels (which only mix the no-jump evolution). Builders for the
//! standard example systems are provided.
//!
//! Basis conventions: qubit ground |g> = index 0, excited |e> = index 1;
//! two-qubit spaces are ordered qubit-1 ⊗ qubit-2; Fock spaces are indexed
//! by occupation number. hbar = 1 throughout.

use ndarray::{Array1, Array2};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{
    self, all_finite, dag, hermitian_eigenvalues, hermitize, is_hermitian, kron, tr, CMatrix,
    CVector,
};

const HERMITICITY_TOL: f64 = 1e-10;
const TRACE_TOL: f64 = 1e-10;
const NORM_TOL: f64 = 1e-10;
/// Density-matrix eigenvalues may dip this far below zero before a state is
/// considered unphysical.
pub const POSITIVITY_TOL: f64 = 1e-9;

/// Elementary operators used by the model builders and observables.
pub mod operators {
    use super::*;

    /// Pauli X.
    pub fn sigma_x() -> CMatrix {
        let z = Complex64::new(0.0, 0.0);
        let one = Complex64::new(1.0, 0.0);
        ndarray::array![[z, one], [one, z]]
    }

    /// Pauli Y.
    pub fn sigma_y() -> CMatrix {
        let z = Complex64::new(0.0, 0.0);
        let i = Complex64::new(0.0, 1.0);
        ndarray::array![[z, -i], [i, z]]
    }

    /// Pauli Z in the (|g>, |e>) ordering: diag(1, -1).
    pub fn sigma_z() -> CMatrix {
        let z = Complex64::new(0.0, 0.0);
        let one = Complex64::new(1.0, 0.0);
        ndarray::array![[one, z], [z, -one]]
    }

    /// Lowering operator |g><e|.
    pub fn sigma_minus() -> CMatrix {
        let z = Complex64::new(0.0, 0.0);
        let one = Complex64::new(1.0, 0.0);
        ndarray::array![[z, one], [z, z]]
    }

    /// Raising operator |e><g|.
    pub fn sigma_plus() -> CMatrix {
        let z = Complex64::new(0.0, 0.0);
        let one = Complex64::new(1.0, 0.0);
        ndarray::array![[z, z], [one, z]]
    }

    /// Qubit excitation-number operator |e><e|.
    pub fn qubit_number() -> CMatrix {
        sigma_plus().dot(&sigma_minus())
    }

    /// Truncated bosonic annihilation operator: a|n> = sqrt(n)|n-1>, on a
    /// Fock space of dimension `dim` (occupations 0..dim-1).
    pub fn annihilation(dim: usize) -> CMatrix {
        let mut a = Array2::zeros((dim, dim));
        for n in 1..dim {
            a[[n - 1, n]] = Complex64::new((n as f64).sqrt(), 0.0);
        }
        a
    }

    /// Truncated number operator a†a.
    pub fn number(dim: usize) -> CMatrix {
        let mut n_op = Array2::zeros((dim, dim));
        for n in 0..dim {
            n_op[[n, n]] = Complex64::new(n as f64, 0.0);
        }
        n_op
    }

    /// Place a single-qubit operator on qubit `k` (0 or 1) of a two-qubit
    /// space.
    pub fn on_qubit(op: &CMatrix, k: usize) -> CMatrix {
        let eye = linalg::identity(2);
        match k {
            0 => kron(op, &eye),
            1 => kron(&eye, op),
            _ => panic!("two-qubit helper: qubit index {k} out of range"),
        }
    }

    /// Projector |i><i| on a `dim`-dimensional space.
    pub fn projector(dim: usize, i: usize) -> CMatrix {
        let mut p = Array2::zeros((dim, dim));
        p[[i, i]] = Complex64::new(1.0, 0.0);
        p
    }
}

/// A GKSL master equation: Hamiltonian plus monitored/unmonitored jump
/// operator lists.
#[derive(Debug, Clone)]
pub struct LindbladModel {
    dim: usize,
    hamiltonian: CMatrix,
    monitored_jumps: Vec<CMatrix>,
    unmonitored_jumps: Vec<CMatrix>,
    labels: Vec<String>,
    /// Cached L†L per monitored channel, in channel order.
    monitored_ldl: Vec<CMatrix>,
}

impl LindbladModel {
    /// Build and validate a model. `labels` may be empty (names are then
    /// synthesized) or must match the monitored channel count.
    pub fn new(
        hamiltonian: CMatrix,
        monitored_jumps: Vec<CMatrix>,
        unmonitored_jumps: Vec<CMatrix>,
        labels: Vec<String>,
    ) -> Result<Self> {
        let dim = hamiltonian.nrows();
        let labels = if labels.is_empty() {
            (1..=monitored_jumps.len()).map(|k| format!("channel-{k}")).collect()
        } else {
            labels
        };
        let monitored_ldl = monitored_jumps.iter().map(|l| dag(l).dot(l)).collect();
        let model =
            Self { dim, hamiltonian, monitored_jumps, unmonitored_jumps, labels, monitored_ldl };
        let violations = model.validate();
        if violations.is_empty() {
            Ok(model)
        } else {
            Err(Error::InvalidModel(violations.join("; ")))
        }
    }

    /// Diagnostic validation: returns every violated constraint.
    pub fn validate(&self) -> Vec<String> {
        let mut violations = Vec::new();
        let d = self.dim;
        if d == 0 {
            violations.push("Hilbert-space dimension is zero".into());
            return violations;
        }
        if self.hamiltonian.nrows() != d || self.hamiltonian.ncols() != d {
            violations.push(format!(
                "Hamiltonian is {}x{}, expected {d}x{d}",
                self.hamiltonian.nrows(),
                self.hamiltonian.ncols()
            ));
        } else if !is_hermitian(&self.hamiltonian, HERMITICITY_TOL) {
            violations.push("non-Hermitian H".into());
        }
        if !all_finite(&self.hamiltonian) {
            violations.push("Hamiltonian has non-finite entries".into());
        }
        if self.monitored_jumps.is_empty() {
            violations.push("no monitored jump channel (waiting-time distribution undefined)".into());
        }
        for (k, l) in self.monitored_jumps.iter().enumerate() {
            if l.nrows() != d || l.ncols() != d {
                violations.push(format!(
                    "monitored jump {} is {}x{}, expected {d}x{d}",
                    k + 1,
                    l.nrows(),
                    l.ncols()
                ));
            } else if !all_finite(l) {
                violations.push(format!("monitored jump {} has non-finite entries", k + 1));
            }
        }
        for (k, s) in self.unmonitored_jumps.iter().enumerate() {
            if s.nrows() != d || s.ncols() != d {
                violations.push(format!(
                    "unmonitored jump {} is {}x{}, expected {d}x{d}",
                    k + 1,
                    s.nrows(),
                    s.ncols()
                ));
            } else if !all_finite(s) {
                violations.push(format!("unmonitored jump {} has non-finite entries", k + 1));
            }
        }
        if self.labels.len() != self.monitored_jumps.len() {
            violations.push(format!(
                "{} labels for {} monitored channels",
                self.labels.len(),
                self.monitored_jumps.len()
            ));
        }
        violations
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn hamiltonian(&self) -> &CMatrix {
        &self.hamiltonian
    }

    pub fn monitored_jumps(&self) -> &[CMatrix] {
        &self.monitored_jumps
    }

    pub fn unmonitored_jumps(&self) -> &[CMatrix] {
        &self.unmonitored_jumps
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Cached L†L for each monitored channel.
    pub fn monitored_ldl(&self) -> &[CMatrix] {
        &self.monitored_ldl
    }

    pub fn is_fully_monitored(&self) -> bool {
        self.unmonitored_jumps.is_empty()
    }

    /// Non-Hermitian effective Hamiltonian H_e = H - (i/2) Σ_k L_k†L_k over
    /// all channels, monitored and unmonitored.
    pub fn effective_hamiltonian(&self) -> CMatrix {
        let mut j = self.jump_rate_operator();
        for s in &self.unmonitored_jumps {
            j = j + dag(s).dot(s);
        }
        let half_i = Complex64::new(0.0, 0.5);
        &self.hamiltonian - &j.mapv(|z| z * half_i)
    }

    /// Total monitored jump-rate operator J = Σ_{k in M} L_k†L_k.
    pub fn jump_rate_operator(&self) -> CMatrix {
        let mut j: CMatrix = Array2::zeros((self.dim, self.dim));
        for ldl in &self.monitored_ldl {
            j = j + ldl;
        }
        j
    }

    /// Single qubit driven at Rabi frequency `omega` with detuning `delta`,
    /// photon emission at rate `gamma`: H = delta*sz + omega*sx, monitored
    /// L = sqrt(gamma) |g><e|.
    pub fn resonant_fluorescence(delta: f64, omega: f64, gamma: f64) -> Result<Self> {
        if gamma <= 0.0 {
            return Err(Error::InvalidModel(format!("decay rate gamma = {gamma} must be > 0")));
        }
        let h = operators::sigma_z().mapv(|z| z * delta) + operators::sigma_x().mapv(|z| z * omega);
        let l = operators::sigma_minus().mapv(|z| z * gamma.sqrt());
        Self::new(h, vec![l], vec![], vec!["emission".into()])
    }

    /// Two qubits with exchange coupling `g`; qubit 1 driven at `omega`,
    /// qubit 2 decaying at `gamma` through the single monitored channel.
    pub fn double_qubit(omega: f64, g: f64, gamma: f64) -> Result<Self> {
        if gamma <= 0.0 {
            return Err(Error::InvalidModel(format!("decay rate gamma = {gamma} must be > 0")));
        }
        let sx1 = operators::on_qubit(&operators::sigma_x(), 0);
        let sp1 = operators::on_qubit(&operators::sigma_plus(), 0);
        let sm1 = operators::on_qubit(&operators::sigma_minus(), 0);
        let sp2 = operators::on_qubit(&operators::sigma_plus(), 1);
        let sm2 = operators::on_qubit(&operators::sigma_minus(), 1);
        let h = sx1.mapv(|z| z * omega)
            + (sp1.dot(&sm2) + sm1.dot(&sp2)).mapv(|z| z * g);
        let l = sm2.mapv(|z| z * gamma.sqrt());
        Self::new(h, vec![l], vec![], vec!["qubit2-decay".into()])
    }

    /// Two coupled charge dots under continuous monitoring of the detector
    /// current: H = Σ_j omega_j n_j + coupling (s1+ s2- + s1- s2+),
    /// monitored L = tunneling * I + chi * n_1.
    pub fn charge_qubit(
        omega1: f64,
        omega2: f64,
        coupling: f64,
        tunneling: f64,
        chi: f64,
    ) -> Result<Self> {
        let n1 = operators::on_qubit(&operators::qubit_number(), 0);
        let n2 = operators::on_qubit(&operators::qubit_number(), 1);
        let sp1 = operators::on_qubit(&operators::sigma_plus(), 0);
        let sm1 = operators::on_qubit(&operators::sigma_minus(), 0);
        let sp2 = operators::on_qubit(&operators::sigma_plus(), 1);
        let sm2 = operators::on_qubit(&operators::sigma_minus(), 1);
        let h = n1.mapv(|z| z * omega1)
            + n2.mapv(|z| z * omega2)
            + (sp1.dot(&sm2) + sm1.dot(&sp2)).mapv(|z| z * coupling);
        let l = linalg::identity(4).mapv(|z| z * tunneling) + n1.mapv(|z| z * chi);
        Self::new(h, vec![l], vec![], vec!["detector".into()])
    }

    /// Driven Kerr cavity truncated at occupation `n_max`:
    /// H = delta a†a + (u/2) a†a†aa + f (a† + a), monitored L = sqrt(gamma) a.
    pub fn kerr(delta: f64, u: f64, f: f64, gamma: f64, n_max: usize) -> Result<Self> {
        if n_max < 2 {
            return Err(Error::InvalidModel(format!("Fock truncation n_max = {n_max} must be >= 2")));
        }
        if gamma <= 0.0 {
            return Err(Error::InvalidModel(format!("decay rate gamma = {gamma} must be > 0")));
        }
        let dim = n_max + 1;
        let a = operators::annihilation(dim);
        let ad = dag(&a);
        let n_op = operators::number(dim);
        let h = n_op.mapv(|z| z * delta)
            + ad.dot(&ad).dot(&a).dot(&a).mapv(|z| z * (0.5 * u))
            + (&ad + &a).mapv(|z| z * f);
        let l = a.mapv(|z| z * gamma.sqrt());
        Self::new(h, vec![l], vec![], vec!["photon-loss".into()])
    }

    /// Classical Pauli rate equation embedded as a quantum model: H = 0 and
    /// one monitored channel sqrt(W[i][j]) |i><j| per nonzero rate, where
    /// `rates[i][j]` is the transition rate from state j to state i.
    pub fn classical_rate(rates: &Array2<f64>) -> Result<Self> {
        let d = rates.nrows();
        if d != rates.ncols() {
            return Err(Error::InvalidModel(format!(
                "rate matrix is {}x{}, must be square",
                rates.nrows(),
                rates.ncols()
            )));
        }
        let mut jumps = Vec::new();
        let mut labels = Vec::new();
        for i in 0..d {
            for j in 0..d {
                let w = rates[[i, j]];
                if i == j {
                    if w != 0.0 {
                        return Err(Error::InvalidModel(format!(
                            "rate matrix diagonal [{i}][{i}] = {w} must be zero"
                        )));
                    }
                    continue;
                }
                if w < 0.0 {
                    return Err(Error::InvalidModel(format!("negative rate W[{i}][{j}] = {w}")));
                }
                if w > 0.0 {
                    let mut l: CMatrix = Array2::zeros((d, d));
                    l[[i, j]] = Complex64::new(w.sqrt(), 0.0);
                    jumps.push(l);
                    labels.push(format!("{j}->{i}"));
                }
            }
        }
        Self::new(Array2::zeros((d, d)), jumps, vec![], labels)
    }
}

/// A normalized mixed state (density matrix).
#[derive(Debug, Clone)]
pub struct DensityState {
    matrix: CMatrix,
}

impl DensityState {
    /// Wrap a matrix that already satisfies the state invariants
    /// (Hermitian to 1e-10, unit trace to 1e-10, finite entries).
    pub fn new(matrix: CMatrix) -> Result<Self> {
        let d = matrix.nrows();
        if d == 0 || matrix.ncols() != d {
            return Err(Error::InvalidState(format!(
                "density matrix is {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if !all_finite(&matrix) {
            return Err(Error::InvalidState("density matrix has non-finite entries".into()));
        }
        if !is_hermitian(&matrix, HERMITICITY_TOL) {
            return Err(Error::InvalidState("density matrix is not Hermitian".into()));
        }
        let t = tr(&matrix);
        if (t.re - 1.0).abs() > TRACE_TOL || t.im.abs() > TRACE_TOL {
            return Err(Error::InvalidState(format!("density matrix trace {t} is not 1")));
        }
        Ok(Self { matrix })
    }

    /// Hermitize and trace-normalize an unnormalized candidate.
    pub fn from_unnormalized(matrix: &CMatrix) -> Result<Self> {
        let h = hermitize(matrix);
        let t = tr(&h).re;
        if !t.is_finite() || t.abs() < 1e-14 {
            return Err(Error::VanishingTrace { trace: t });
        }
        let inv = 1.0 / t;
        Ok(Self { matrix: h.mapv(|z| z * inv) })
    }

    /// Computational-basis state |i><i|.
    pub fn basis(dim: usize, index: usize) -> Result<Self> {
        if index >= dim {
            return Err(Error::InvalidState(format!("basis index {index} >= dim {dim}")));
        }
        Ok(Self { matrix: operators::projector(dim, index) })
    }

    /// Outer product |psi><psi| of a pure state.
    pub fn from_pure(psi: &PureState) -> Self {
        let d = psi.dim();
        let amps = psi.amplitudes();
        let matrix = Array2::from_shape_fn((d, d), |(i, j)| amps[i] * amps[j].conj());
        Self { matrix }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Re tr(O rho).
    pub fn expectation(&self, observable: &CMatrix) -> Result<f64> {
        if observable.nrows() != self.dim() || observable.ncols() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "observable {}x{} on a dim-{} state",
                observable.nrows(),
                observable.ncols(),
                self.dim()
            )));
        }
        Ok(tr(&observable.dot(&self.matrix)).re)
    }

    /// Trace distance (1/2)||rho - sigma||_1.
    pub fn trace_distance(&self, other: &DensityState) -> Result<f64> {
        let diff = &self.matrix - &other.matrix;
        let vals = hermitian_eigenvalues(&diff)?;
        Ok(0.5 * vals.iter().map(|v| v.abs()).sum::<f64>())
    }

    /// Smallest eigenvalue (positivity witness).
    pub fn min_eigenvalue(&self) -> Result<f64> {
        let vals = hermitian_eigenvalues(&self.matrix)?;
        Ok(vals.first().copied().unwrap_or(0.0))
    }

    /// Full invariant audit: Hermiticity, unit trace, positivity.
    pub fn audit(&self) -> Vec<String> {
        let mut violations = Vec::new();
        if !is_hermitian(&self.matrix, HERMITICITY_TOL) {
            violations.push("not Hermitian".into());
        }
        let t = tr(&self.matrix);
        if (t.re - 1.0).abs() > TRACE_TOL || t.im.abs() > TRACE_TOL {
            violations.push(format!("trace {t}"));
        }
        match self.min_eigenvalue() {
            Ok(min) if min < -POSITIVITY_TOL => {
                violations.push(format!("negative eigenvalue {min:.3e}"));
            }
            Ok(_) => {}
            Err(e) => violations.push(format!("eigenvalue check failed: {e}")),
        }
        violations
    }
}

/// A normalized pure state |psi>.
#[derive(Debug, Clone)]
pub struct PureState {
    amplitudes: CVector,
}

impl PureState {
    /// Wrap amplitudes that are already normalized to 1e-10.
    pub fn new(amplitudes: CVector) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(Error::InvalidState("empty amplitude vector".into()));
        }
        let norm = amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if !norm.is_finite() || (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidState(format!("pure-state norm {norm} is not 1")));
        }
        Ok(Self { amplitudes })
    }

    /// Normalize a nonzero amplitude vector.
    pub fn normalized(amplitudes: &CVector) -> Result<Self> {
        let norm = amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if !norm.is_finite() || norm < 1e-14 {
            return Err(Error::InvalidState(format!("cannot normalize vector of norm {norm}")));
        }
        let inv = 1.0 / norm;
        Ok(Self { amplitudes: amplitudes.mapv(|z| z * inv) })
    }

    /// Basis vector |i>.
    pub fn basis(dim: usize, index: usize) -> Result<Self> {
        if index >= dim {
            return Err(Error::InvalidState(format!("basis index {index} >= dim {dim}")));
        }
        let mut v: CVector = Array1::zeros(dim);
        v[index] = Complex64::new(1.0, 0.0);
        Ok(Self { amplitudes: v })
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Outer product as a density state.
    pub fn density(&self) -> DensityState {
        DensityState::from_pure(self)
    }
}
