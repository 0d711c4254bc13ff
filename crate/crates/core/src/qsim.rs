//! Dense statevector simulation for small registers.
//!
//! Qubit 0 is the most significant bit of the basis-state index, so on a
//! 4-qubit register `|q0 q1 q2 q3>` has index `8*q0 + 4*q1 + 2*q2 + q3`.
//! Rotations follow `R_A(theta) = exp(-i theta A / 2)`; the controlled
//! rotations apply `R_A(theta)` to the target iff the control is `|1>`.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::circuits::CircuitTemplate;
use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

type Mat2 = [[Complex64; 2]; 2];

/// Pure state of an `n`-qubit register.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amplitudes: Vec<Complex64>,
    num_qubits: usize,
}

impl StateVector {
    /// `|0...0>` on `num_qubits` qubits.
    pub fn zero(num_qubits: usize) -> Self {
        Self::basis(num_qubits, 0).expect("index 0 is always valid")
    }

    /// Computational basis state `|index>`.
    pub fn basis(num_qubits: usize, index: usize) -> Result<Self> {
        if num_qubits == 0 {
            return Err(Error::Domain("register needs at least one qubit".into()));
        }
        let dim = 1usize << num_qubits;
        if index >= dim {
            return Err(Error::Domain(format!(
                "basis index {index} out of range for {num_qubits} qubits"
            )));
        }
        let mut amplitudes = vec![ZERO; dim];
        amplitudes[index] = ONE;
        Ok(Self {
            amplitudes,
            num_qubits,
        })
    }

    /// Wraps raw amplitudes. The length must be a power of two; the caller is
    /// responsible for normalization.
    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self> {
        let dim = amplitudes.len();
        if dim < 2 || !dim.is_power_of_two() {
            return Err(Error::Domain(format!(
                "amplitude count {dim} is not a power of two >= 2"
            )));
        }
        Ok(Self {
            num_qubits: dim.trailing_zeros() as usize,
            amplitudes,
        })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(Complex64::norm_sqr).sum()
    }

    /// Multiplies every amplitude by `e^{i alpha}`.
    pub fn with_global_phase(mut self, alpha: f64) -> Self {
        let phase = Complex64::from_polar(1.0, alpha);
        for a in &mut self.amplitudes {
            *a *= phase;
        }
        self
    }

    /// Bit mask of `qubit` inside a basis index.
    #[inline]
    pub fn qubit_mask(&self, qubit: usize) -> usize {
        1 << (self.num_qubits - 1 - qubit)
    }

    fn check_qubit(&self, qubit: usize) -> Result<()> {
        if qubit >= self.num_qubits {
            return Err(Error::InvalidQubit {
                index: qubit,
                num_qubits: self.num_qubits,
            });
        }
        Ok(())
    }

    /// Applies `m` to `target`, restricted to the subspace where `control`
    /// is set. With `annihilate_uncontrolled` the complementary subspace is
    /// zeroed, which is what the derivative of a controlled rotation needs.
    fn apply_mat2(
        &mut self,
        m: &Mat2,
        target: usize,
        control: Option<usize>,
        annihilate_uncontrolled: bool,
    ) {
        let tmask = self.qubit_mask(target);
        let cmask = control.map(|c| self.qubit_mask(c));
        for i in 0..self.amplitudes.len() {
            if i & tmask != 0 {
                continue;
            }
            let j = i | tmask;
            if let Some(c) = cmask {
                if i & c == 0 {
                    if annihilate_uncontrolled {
                        self.amplitudes[i] = ZERO;
                        self.amplitudes[j] = ZERO;
                    }
                    continue;
                }
            }
            let a0 = self.amplitudes[i];
            let a1 = self.amplitudes[j];
            self.amplitudes[i] = m[0][0] * a0 + m[0][1] * a1;
            self.amplitudes[j] = m[1][0] * a0 + m[1][1] * a1;
        }
    }

    fn apply_cz(&mut self, a: usize, b: usize) {
        let mask = self.qubit_mask(a) | self.qubit_mask(b);
        for (i, amp) in self.amplitudes.iter_mut().enumerate() {
            if i & mask == mask {
                *amp = -*amp;
            }
        }
    }
}

/// Gate alphabet of the benchmark circuits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum GateKind {
    Rx,
    Ry,
    Rz,
    H,
    Cnot,
    Cz,
    Crx,
    Crz,
}

impl GateKind {
    pub fn is_parametrized(self) -> bool {
        matches!(
            self,
            GateKind::Rx | GateKind::Ry | GateKind::Rz | GateKind::Crx | GateKind::Crz
        )
    }

    pub fn arity(self) -> usize {
        match self {
            GateKind::Rx | GateKind::Ry | GateKind::Rz | GateKind::H => 1,
            GateKind::Cnot | GateKind::Cz | GateKind::Crx | GateKind::Crz => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            GateKind::Rx => "RX",
            GateKind::Ry => "RY",
            GateKind::Rz => "RZ",
            GateKind::H => "H",
            GateKind::Cnot => "CNOT",
            GateKind::Cz => "CZ",
            GateKind::Crx => "CRX",
            GateKind::Crz => "CRZ",
        }
    }
}

/// Where a parametrized gate takes its angle from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Angle {
    /// Index into the parameter vector driving the circuit.
    Slot(usize),
    /// Constant angle in radians.
    Fixed(f64),
}

/// One gate of a circuit. For controlled gates `wires[0]` is the control.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateOp {
    pub kind: GateKind,
    pub wires: Vec<usize>,
    pub angle: Option<Angle>,
}

impl GateOp {
    pub fn single(kind: GateKind, wire: usize, angle: Option<Angle>) -> Self {
        Self {
            kind,
            wires: vec![wire],
            angle,
        }
    }

    pub fn pair(kind: GateKind, control: usize, target: usize, angle: Option<Angle>) -> Self {
        Self {
            kind,
            wires: vec![control, target],
            angle,
        }
    }

    pub fn param_slot(&self) -> Option<usize> {
        match self.angle {
            Some(Angle::Slot(s)) => Some(s),
            _ => None,
        }
    }

    /// Checks wire and angle consistency against a register size.
    pub fn validate(&self, num_qubits: usize) -> Result<()> {
        if self.wires.len() != self.kind.arity() {
            return Err(Error::InvalidCircuit(format!(
                "{} expects {} wire(s), got {:?}",
                self.kind.name(),
                self.kind.arity(),
                self.wires
            )));
        }
        if let Some(&w) = self.wires.iter().find(|&&w| w >= num_qubits) {
            return Err(Error::InvalidCircuit(format!(
                "{} wire {w} out of range for {num_qubits} qubits",
                self.kind.name()
            )));
        }
        if self.wires.len() == 2 && self.wires[0] == self.wires[1] {
            return Err(Error::InvalidCircuit(format!(
                "{} control and target coincide on wire {}",
                self.kind.name(),
                self.wires[0]
            )));
        }
        if self.kind.is_parametrized() != self.angle.is_some() {
            return Err(Error::InvalidCircuit(format!(
                "{} angle presence mismatch",
                self.kind.name()
            )));
        }
        Ok(())
    }

    fn resolve_angle(&self, params: &[f64]) -> Result<f64> {
        match self.angle {
            Some(Angle::Fixed(a)) => Ok(a),
            Some(Angle::Slot(s)) => params.get(s).copied().ok_or_else(|| {
                Error::InvalidCircuit(format!(
                    "parameter slot {s} out of range for {} parameters",
                    params.len()
                ))
            }),
            None => Ok(0.0),
        }
    }
}

fn rotation(kind: GateKind, theta: f64) -> Mat2 {
    let (s, c) = (theta / 2.0).sin_cos();
    let mis = Complex64::new(0.0, -s);
    match kind {
        GateKind::Rx | GateKind::Crx => [[c.into(), mis], [mis, c.into()]],
        GateKind::Ry => [[c.into(), (-s).into()], [s.into(), c.into()]],
        GateKind::Rz | GateKind::Crz => [
            [Complex64::new(c, -s), ZERO],
            [ZERO, Complex64::new(c, s)],
        ],
        _ => unreachable!("not a rotation"),
    }
}

/// `d R_A(theta) / d theta = -i/2 A R_A(theta)`.
fn rotation_derivative(kind: GateKind, theta: f64) -> Mat2 {
    let (s, c) = (theta / 2.0).sin_cos();
    let (hs, hc) = (0.5 * s, 0.5 * c);
    match kind {
        GateKind::Rx | GateKind::Crx => [
            [(-hs).into(), Complex64::new(0.0, -hc)],
            [Complex64::new(0.0, -hc), (-hs).into()],
        ],
        GateKind::Ry => [[(-hs).into(), (-hc).into()], [hc.into(), (-hs).into()]],
        GateKind::Rz | GateKind::Crz => [
            [Complex64::new(-hs, -hc), ZERO],
            [ZERO, Complex64::new(-hs, hc)],
        ],
        _ => unreachable!("not a rotation"),
    }
}

const HADAMARD: Mat2 = [
    [
        Complex64::new(FRAC_1_SQRT_2, 0.0),
        Complex64::new(FRAC_1_SQRT_2, 0.0),
    ],
    [
        Complex64::new(FRAC_1_SQRT_2, 0.0),
        Complex64::new(-FRAC_1_SQRT_2, 0.0),
    ],
];

const PAULI_X: Mat2 = [[ZERO, ONE], [ONE, ZERO]];

fn apply_resolved(state: &mut StateVector, gate: &GateOp, theta: f64) {
    let w = &gate.wires;
    match gate.kind {
        GateKind::Rx | GateKind::Ry | GateKind::Rz => {
            state.apply_mat2(&rotation(gate.kind, theta), w[0], None, false)
        }
        GateKind::H => state.apply_mat2(&HADAMARD, w[0], None, false),
        GateKind::Cnot => state.apply_mat2(&PAULI_X, w[1], Some(w[0]), false),
        GateKind::Cz => state.apply_cz(w[0], w[1]),
        GateKind::Crx | GateKind::Crz => {
            state.apply_mat2(&rotation(gate.kind, theta), w[1], Some(w[0]), false)
        }
    }
}

/// Applies `U^dagger` of the resolved gate.
fn apply_resolved_inverse(state: &mut StateVector, gate: &GateOp, theta: f64) {
    // Every non-rotation gate in the alphabet is self-inverse.
    apply_resolved(state, gate, -theta);
}

fn apply_resolved_derivative(state: &mut StateVector, gate: &GateOp, theta: f64) {
    let w = &gate.wires;
    let d = rotation_derivative(gate.kind, theta);
    match gate.kind {
        GateKind::Rx | GateKind::Ry | GateKind::Rz => state.apply_mat2(&d, w[0], None, false),
        GateKind::Crx | GateKind::Crz => state.apply_mat2(&d, w[1], Some(w[0]), true),
        _ => unreachable!("derivative of an unparametrized gate"),
    }
}

/// Applies one gate, reading its angle from `params` when it has a slot.
pub fn apply_gate(state: &StateVector, gate: &GateOp, params: &[f64]) -> Result<StateVector> {
    let mut out = state.clone();
    apply_gate_in_place(&mut out, gate, params)?;
    Ok(out)
}

pub fn apply_gate_in_place(state: &mut StateVector, gate: &GateOp, params: &[f64]) -> Result<()> {
    gate.validate(state.num_qubits)?;
    let theta = gate.resolve_angle(params)?;
    apply_resolved(state, gate, theta);
    Ok(())
}

fn check_template(template: &CircuitTemplate, params: &[f64], input: &StateVector) -> Result<()> {
    if params.len() != template.param_count {
        return Err(Error::InvalidCircuit(format!(
            "circuit {} takes {} parameters, got {}",
            template.id,
            template.param_count,
            params.len()
        )));
    }
    if input.num_qubits != template.num_qubits {
        return Err(Error::InvalidCircuit(format!(
            "circuit {} acts on {} qubits, input has {}",
            template.id, template.num_qubits, input.num_qubits
        )));
    }
    for gate in &template.gates {
        gate.validate(input.num_qubits)?;
    }
    Ok(())
}

/// Runs every gate of `template` in order on a copy of `input`.
pub fn run_circuit(
    template: &CircuitTemplate,
    params: &[f64],
    input: &StateVector,
) -> Result<StateVector> {
    check_template(template, params, input)?;
    let mut state = input.clone();
    for gate in &template.gates {
        let theta = gate.resolve_angle(params)?;
        apply_resolved(&mut state, gate, theta);
    }
    Ok(state)
}

/// `<Z_i>` for every qubit, computed exactly from the amplitudes.
pub fn z_expectations(state: &StateVector) -> Vec<f64> {
    let n = state.num_qubits;
    let mut z = vec![0.0; n];
    for (k, a) in state.amplitudes.iter().enumerate() {
        let p = a.norm_sqr();
        if p == 0.0 {
            continue;
        }
        for (q, zq) in z.iter_mut().enumerate() {
            if k & (1 << (n - 1 - q)) == 0 {
                *zq += p;
            } else {
                *zq -= p;
            }
        }
    }
    z
}

/// Inner product `<a|b>`.
pub fn inner(a: &StateVector, b: &StateVector) -> Result<Complex64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    Ok(a.amplitudes
        .iter()
        .zip(&b.amplitudes)
        .map(|(x, y)| x.conj() * y)
        .sum())
}

/// `|<a|b>|^2`.
pub fn fidelity(a: &StateVector, b: &StateVector) -> Result<f64> {
    Ok(inner(a, b)?.norm_sqr())
}

/// Exact gradient of `<sum_i w_i Z_i>` with respect to every parameter slot.
///
/// One forward sweep followed by a single backward sweep that un-computes the
/// state while propagating the co-state `lambda = U_{k+1}^dag ... O psi`.
pub fn circuit_gradient(
    template: &CircuitTemplate,
    params: &[f64],
    input: &StateVector,
    observable_weights: &[f64],
) -> Result<Vec<f64>> {
    let psi = run_circuit(template, params, input)?;
    if observable_weights.len() != psi.num_qubits {
        return Err(Error::DimensionMismatch {
            left: observable_weights.len(),
            right: psi.num_qubits,
        });
    }
    Ok(adjoint_sweep(template, params, psi, observable_weights))
}

fn adjoint_sweep(
    template: &CircuitTemplate,
    params: &[f64],
    mut psi: StateVector,
    weights: &[f64],
) -> Vec<f64> {
    let n = psi.num_qubits;
    let mut grad = vec![0.0; template.param_count];
    if weights.iter().all(|&w| w == 0.0) {
        return grad;
    }

    let mut lambda = psi.clone();
    for (k, a) in lambda.amplitudes.iter_mut().enumerate() {
        let eig: f64 = weights
            .iter()
            .enumerate()
            .map(|(q, w)| if k & (1 << (n - 1 - q)) == 0 { *w } else { -*w })
            .sum();
        *a *= eig;
    }

    let mut mu = psi.clone();
    for gate in template.gates.iter().rev() {
        // Angles were validated by the forward run.
        let theta = gate.resolve_angle(params).unwrap_or(0.0);
        apply_resolved_inverse(&mut psi, gate, theta);
        if let Some(slot) = gate.param_slot() {
            mu.amplitudes.copy_from_slice(&psi.amplitudes);
            apply_resolved_derivative(&mut mu, gate, theta);
            let overlap: Complex64 = lambda
                .amplitudes
                .iter()
                .zip(&mu.amplitudes)
                .map(|(l, m)| l.conj() * m)
                .sum();
            grad[slot] += 2.0 * overlap.re;
        }
        apply_resolved_inverse(&mut lambda, gate, theta);
    }
    grad
}

/// `Tr(rho_q^2)` of the single-qubit marginal of a pure state.
pub fn reduced_single_qubit_purity(state: &StateVector, qubit: usize) -> Result<f64> {
    state.check_qubit(qubit)?;
    let mask = state.qubit_mask(qubit);
    let (mut p0, mut p1, mut coh) = (0.0, 0.0, ZERO);
    for i in (0..state.dim()).filter(|i| i & mask == 0) {
        let a0 = state.amplitudes[i];
        let a1 = state.amplitudes[i | mask];
        p0 += a0.norm_sqr();
        p1 += a1.norm_sqr();
        coh += a0 * a1.conj();
    }
    Ok(p0 * p0 + p1 * p1 + 2.0 * coh.norm_sqr())
}
