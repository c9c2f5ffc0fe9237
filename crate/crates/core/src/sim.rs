//! Brute-force statevector simulator.
//!
//! Every gate used here (Ry, CNOT, controlled-Ry) has a real matrix, so
//! amplitudes are stored as `f64` rather than complex numbers. Qubits are
//! numbered 1-based; qubit `i` maps to bit `i - 1` of the basis-state
//! index, with qubit 1 least significant.

use crate::error::{Error, Result};
use std::f64::consts::PI;

/// Largest register the simulator accepts.
pub const MAX_QUBITS: usize = 14;

/// Circuit families covered by the simulator.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CircuitKind {
    Qc1,
    Qc2,
    Qcpn,
    Reupload,
}

/// Real-amplitude state of an n-qubit register.
#[derive(Clone, Debug, PartialEq)]
pub struct Statevector {
    n_qubits: usize,
    amps: Vec<f64>,
}

impl Statevector {
    /// All-zeros computational basis state |0...0>.
    pub fn zero(n_qubits: usize) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(Error::Size(format!(
                "n_qubits must be in 1..={MAX_QUBITS}, got {n_qubits}"
            )));
        }
        let mut amps = vec![0.0; 1 << n_qubits];
        amps[0] = 1.0;
        Ok(Self { n_qubits, amps })
    }

    /// Build a state from raw amplitudes; the vector must be normalized.
    pub fn from_amps(n_qubits: usize, amps: Vec<f64>) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(Error::Size(format!(
                "n_qubits must be in 1..={MAX_QUBITS}, got {n_qubits}"
            )));
        }
        if amps.len() != 1 << n_qubits {
            return Err(Error::Size(format!(
                "expected {} amplitudes, got {}",
                1 << n_qubits,
                amps.len()
            )));
        }
        let norm_sq: f64 = amps.iter().map(|a| a * a).sum();
        if (norm_sq - 1.0).abs() > 1e-10 {
            return Err(Error::Argument(format!(
                "amplitudes not normalized: |amps|^2 = {norm_sq}"
            )));
        }
        Ok(Self { n_qubits, amps })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amps(&self) -> &[f64] {
        &self.amps
    }

    pub fn norm_sq(&self) -> f64 {
        self.amps.iter().map(|a| a * a).sum()
    }

    fn check_qubit(&self, qubit: usize) -> Result<usize> {
        if qubit == 0 || qubit > self.n_qubits {
            return Err(Error::Index(format!(
                "qubit {qubit} out of range 1..={}",
                self.n_qubits
            )));
        }
        Ok(qubit - 1)
    }

    /// Ry(angle) on one qubit: (a, b) -> (a cos(t/2) - b sin(t/2),
    /// a sin(t/2) + b cos(t/2)).
    pub fn apply_ry(&mut self, qubit: usize, angle: f64) -> Result<()> {
        let bit = self.check_qubit(qubit)?;
        let (c, s) = ((angle / 2.0).cos(), (angle / 2.0).sin());
        let step = 1 << bit;
        for base in 0..self.amps.len() {
            if base & step == 0 {
                let pair = base | step;
                let (a, b) = (self.amps[base], self.amps[pair]);
                self.amps[base] = a * c - b * s;
                self.amps[pair] = a * s + b * c;
            }
        }
        Ok(())
    }

    /// Pauli-X (bit flip) on one qubit.
    pub fn apply_x(&mut self, qubit: usize) -> Result<()> {
        let bit = self.check_qubit(qubit)?;
        let mask = 1usize << bit;
        for i in 0..self.amps.len() {
            if i & mask == 0 {
                self.amps.swap(i, i | mask);
            }
        }
        Ok(())
    }

    pub fn apply_cnot(&mut self, control: usize, target: usize) -> Result<()> {
        let (cb, tb) = (self.check_qubit(control)?, self.check_qubit(target)?);
        if cb == tb {
            return Err(Error::Argument(format!(
                "control and target coincide at qubit {control}"
            )));
        }
        let (cmask, tmask) = (1usize << cb, 1usize << tb);
        for i in 0..self.amps.len() {
            if i & cmask != 0 && i & tmask == 0 {
                self.amps.swap(i, i | tmask);
            }
        }
        Ok(())
    }

    /// Ry(angle) on the target, restricted to the control = 1 subspace.
    pub fn apply_cry(&mut self, control: usize, target: usize, angle: f64) -> Result<()> {
        let (cb, tb) = (self.check_qubit(control)?, self.check_qubit(target)?);
        if cb == tb {
            return Err(Error::Argument(format!(
                "control and target coincide at qubit {control}"
            )));
        }
        let (c, s) = ((angle / 2.0).cos(), (angle / 2.0).sin());
        let (cmask, tmask) = (1usize << cb, 1usize << tb);
        for base in 0..self.amps.len() {
            if base & cmask != 0 && base & tmask == 0 {
                let pair = base | tmask;
                let (a, b) = (self.amps[base], self.amps[pair]);
                self.amps[base] = a * c - b * s;
                self.amps[pair] = a * s + b * c;
            }
        }
        Ok(())
    }

    /// Expectation of the tensor product of Pauli-Z over the masked qubits.
    pub fn expect_z(&self, qubits: &[usize]) -> Result<f64> {
        if qubits.is_empty() {
            return Err(Error::Argument("empty measurement mask".into()));
        }
        let mut mask = 0usize;
        for &q in qubits {
            mask |= 1 << self.check_qubit(q)?;
        }
        let mut total = 0.0;
        for (i, a) in self.amps.iter().enumerate() {
            let parity = (i & mask).count_ones() & 1;
            let sign = 1.0 - 2.0 * parity as f64;
            total += sign * a * a;
        }
        Ok(total)
    }
}

/// All-qubit Z expectation mask helper.
fn all_qubits(n: usize) -> Vec<usize> {
    (1..=n).collect()
}

fn check_lengths(x: &[f64], theta: &[f64]) -> Result<usize> {
    if x.is_empty() || x.len() != theta.len() {
        return Err(Error::Argument(format!(
            "x and theta must be equal non-zero length, got {} and {}",
            x.len(),
            theta.len()
        )));
    }
    Ok(x.len())
}

/// QC 1: per-qubit Ry(pi x_i) encoding, Ry(theta_i) layer, then the CNOT
/// layer CX(1,2), CX(3,4), ... followed by CX(2,3), CX(4,5), ...
///
/// The measured observable is the negated all-qubit Z parity; the
/// negation is the sign convention under which the closed form
/// `o_qc1_closed` is stated (a plain Z parity of any CNOT network over a
/// product state is always a positive product of cosines).
pub fn run_qc1(x: &[f64], theta: &[f64]) -> Result<f64> {
    let n = check_lengths(x, theta)?;
    let mut state = Statevector::zero(n)?;
    for i in 0..n {
        state.apply_ry(i + 1, PI * x[i])?;
        state.apply_ry(i + 1, theta[i])?;
    }
    let mut c = 1;
    while c + 1 <= n {
        state.apply_cnot(c, c + 1)?;
        c += 2;
    }
    let mut c = 2;
    while c + 1 <= n {
        state.apply_cnot(c, c + 1)?;
        c += 2;
    }
    Ok(-state.expect_z(&all_qubits(n))?)
}

/// QC 2: same encoding and variational layers as QC 1, then the sequential
/// chain CX(1,2), CX(2,3), ..., CX(n-1,n); measures Z over all qubits.
pub fn run_qc2(x: &[f64], theta: &[f64]) -> Result<f64> {
    let n = check_lengths(x, theta)?;
    if n < 3 {
        return Err(Error::Argument(format!("QC2 needs n >= 3, got {n}")));
    }
    let mut state = Statevector::zero(n)?;
    for i in 0..n {
        state.apply_ry(i + 1, PI * x[i])?;
        state.apply_ry(i + 1, theta[i])?;
    }
    for c in 1..n {
        state.apply_cnot(c, c + 1)?;
    }
    state.expect_z(&all_qubits(n))
}

/// Number of angles [`run_qcpn_circuit`] expects for an `n`-qubit circuit:
/// (n - 1) layers of Ry rotations on the n - 1 working qubits.
pub fn qcpn_theta_len(n_qubits: usize) -> usize {
    (n_qubits - 1) * (n_qubits - 1)
}

/// Chebyshev-network circuit on n qubits. Qubit n is a rotation
/// accumulator: it carries every data-dependent rotation and nothing else.
/// The circuit runs (n - 2) blocks of [Ry layer on qubits 1..n-1;
/// (n - 1) controlled-Ry(2 arccos x) gates onto qubit n, with controls
/// alternating between qubits 1 and 2], then a final Ry layer, and
/// measures Z on qubits 1 and 2. Takes (n - 1)^2 angles.
///
/// Structure rationale: with the data angle entering only as full-angle
/// rotations Ry(2 xi) on an otherwise untouched target, conjugating the
/// target by Z flips xi -> -xi while fixing |0..0> and commuting with the
/// measurement, so the output is even in xi with integer harmonics, i.e.
/// an exact polynomial in x = cos(xi). Using only the measured qubits as
/// controls keeps cross-path interference alive (an unmeasured control
/// would cancel by unitarity), so the degree reaches the full gate count
/// (n - 1)(n - 2) generically.
pub fn run_qcpn_circuit(x: f64, theta: &[f64], n_qubits: usize) -> Result<f64> {
    if !(-1.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!("input {x} outside [-1, 1]")));
    }
    if n_qubits < 3 {
        return Err(Error::Argument(format!(
            "QCPN circuit needs n >= 3, got {n_qubits}"
        )));
    }
    let expected = qcpn_theta_len(n_qubits);
    if theta.len() != expected {
        return Err(Error::Argument(format!(
            "expected {expected} angles for {n_qubits} qubits, got {}",
            theta.len()
        )));
    }
    let xi = x.acos();
    let m = n_qubits - 1;
    let mut state = Statevector::zero(n_qubits)?;
    for block in 0..n_qubits - 2 {
        for q in 0..m {
            state.apply_ry(q + 1, theta[block * m + q])?;
        }
        for g in 0..m {
            state.apply_cry(1 + (g % 2), n_qubits, 2.0 * xi)?;
        }
    }
    for q in 0..m {
        state.apply_ry(q + 1, theta[(n_qubits - 2) * m + q])?;
    }
    state.expect_z(&[1, 2])
}

/// Single-qubit data re-uploading: alternates Ry(theta_l) and Ry(pi x)
/// for each layer, then measures Z.
pub fn run_reuploading(x: f64, theta: &[f64]) -> Result<f64> {
    if theta.is_empty() {
        return Err(Error::Argument("re-uploading needs at least one layer".into()));
    }
    let mut state = Statevector::zero(1)?;
    for &t in theta {
        state.apply_ry(1, t)?;
        state.apply_ry(1, PI * x)?;
    }
    state.expect_z(&[1])
}
