//! Parameterized circuits over the statevector simulator.
//!
//! A [`Circuit`] is an ordered gate list whose rotation angles are read
//! from an external angle vector by index; several gates may share one
//! slot (the angle-encoding gates do). Gradients of the `<Z>` readouts
//! with respect to every angle come from a single reverse (adjoint) sweep
//! through the complex statevector arithmetic, which plugs into the
//! autodiff tape as one custom operation.

use std::rc::Rc;

use num_complex::Complex;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::num::Scalar;
use crate::quantum::state::{Axis, StateVector};
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

/// One gate of a parameterized circuit. `angle` indexes the external
/// angle vector supplied at simulation time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "gate", rename_all = "snake_case")]
pub enum Gate {
    Rot {
        axis: Axis,
        qubit: usize,
        angle: usize,
    },
    Cry {
        control: usize,
        target: usize,
        angle: usize,
    },
    Cnot {
        control: usize,
        target: usize,
    },
}

impl Gate {
    fn angle_slot(&self) -> Option<usize> {
        match self {
            Gate::Rot { angle, .. } | Gate::Cry { angle, .. } => Some(*angle),
            Gate::Cnot { .. } => None,
        }
    }
}

/// Ordered gate list acting on a fixed number of qubits, parameterized by
/// an angle vector of fixed length.
#[derive(Debug, Clone)]
pub struct Circuit {
    n_qubits: usize,
    n_angles: usize,
    gates: Vec<Gate>,
}

impl Circuit {
    pub fn new(n_qubits: usize, n_angles: usize) -> Result<Self> {
        if n_qubits == 0 {
            return Err(Error::Config("circuit needs at least one qubit".into()));
        }
        Ok(Self {
            n_qubits,
            n_angles,
            gates: Vec::new(),
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn n_angles(&self) -> usize {
        self.n_angles
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    fn check_qubit(&self, q: usize) -> Result<()> {
        if q >= self.n_qubits {
            return Err(Error::Index(format!("qubit {} of {}", q, self.n_qubits)));
        }
        Ok(())
    }

    fn check_angle(&self, a: usize) -> Result<()> {
        if a >= self.n_angles {
            return Err(Error::Index(format!(
                "angle slot {} of {}",
                a, self.n_angles
            )));
        }
        Ok(())
    }

    pub fn push_rotation(&mut self, axis: Axis, qubit: usize, angle: usize) -> Result<()> {
        self.check_qubit(qubit)?;
        self.check_angle(angle)?;
        self.gates.push(Gate::Rot { axis, qubit, angle });
        Ok(())
    }

    pub fn push_cry(&mut self, control: usize, target: usize, angle: usize) -> Result<()> {
        self.check_qubit(control)?;
        self.check_qubit(target)?;
        self.check_angle(angle)?;
        if control == target {
            return Err(Error::Index(format!("control and target both {control}")));
        }
        self.gates.push(Gate::Cry {
            control,
            target,
            angle,
        });
        Ok(())
    }

    pub fn push_cnot(&mut self, control: usize, target: usize) -> Result<()> {
        self.check_qubit(control)?;
        self.check_qubit(target)?;
        if control == target {
            return Err(Error::Index(format!("control and target both {control}")));
        }
        self.gates.push(Gate::Cnot { control, target });
        Ok(())
    }

    fn check_angles<T: Scalar>(&self, angles: &[T]) -> Result<()> {
        if angles.len() != self.n_angles {
            return Err(Error::Shape(format!(
                "circuit expects {} angles, got {}",
                self.n_angles,
                angles.len()
            )));
        }
        if let Some(bad) = angles.iter().position(|a| !a.is_finite()) {
            return Err(Error::Numeric(format!("non-finite angle in slot {bad}")));
        }
        Ok(())
    }

    fn apply_gate<T: Scalar>(
        &self,
        state: &mut StateVector<T>,
        gate: &Gate,
        angles: &[T],
    ) -> Result<()> {
        match *gate {
            Gate::Rot { axis, qubit, angle } => state.apply_rotation(axis, angles[angle], qubit),
            Gate::Cry {
                control,
                target,
                angle,
            } => state.apply_cry(angles[angle], control, target),
            Gate::Cnot { control, target } => state.apply_cnot(control, target),
        }
    }

    fn unapply_gate<T: Scalar>(
        &self,
        state: &mut StateVector<T>,
        gate: &Gate,
        angles: &[T],
    ) -> Result<()> {
        match *gate {
            Gate::Rot { axis, qubit, angle } => state.apply_rotation(axis, -angles[angle], qubit),
            Gate::Cry {
                control,
                target,
                angle,
            } => state.apply_cry(-angles[angle], control, target),
            Gate::Cnot { control, target } => state.apply_cnot(control, target),
        }
    }

    /// Run the circuit on `|0...0>` with the given angle vector.
    pub fn simulate<T: Scalar>(&self, angles: &[T]) -> Result<StateVector<T>> {
        self.check_angles(angles)?;
        let mut state = StateVector::zero_state(self.n_qubits)?;
        for gate in &self.gates {
            self.apply_gate(&mut state, gate, angles)?;
        }
        Ok(state)
    }

    /// Run the circuit recording the statevector norm after every gate.
    pub fn simulate_with_norms<T: Scalar>(&self, angles: &[T]) -> Result<(StateVector<T>, Vec<T>)> {
        self.check_angles(angles)?;
        let mut state = StateVector::zero_state(self.n_qubits)?;
        let mut norms = Vec::with_capacity(self.gates.len());
        for gate in &self.gates {
            self.apply_gate(&mut state, gate, angles)?;
            norms.push(state.norm());
        }
        Ok((state, norms))
    }

    /// `<Z_i>` readouts of the circuit output for the given angles.
    pub fn readout<T: Scalar>(&self, angles: &[T]) -> Result<Vec<T>> {
        Ok(self.simulate(angles)?.z_readout())
    }

    /// Gradients of `sum_i z_weights[i] * <Z_i>` with respect to every
    /// angle slot, by one adjoint sweep from the final state.
    ///
    /// The weighted sum of Pauli-Z expectations is itself the expectation
    /// of a diagonal observable `O`, so a single backward pass covers all
    /// readouts at once: with `|psi_k>` the state after gate k,
    /// `d<O>/d theta_k = 2 Re <lambda_k | dU_k/d theta | psi_{k-1}>` where
    /// `lambda` starts as `O |psi_N>` and is pulled back through each
    /// inverse gate. Slots shared by several gates accumulate.
    pub fn adjoint_gradients<T: Scalar>(
        &self,
        angles: &[T],
        final_state: &StateVector<T>,
        z_weights: &[T],
    ) -> Result<Vec<T>> {
        self.check_angles(angles)?;
        if z_weights.len() != self.n_qubits {
            return Err(Error::Shape(format!(
                "expected {} readout weights, got {}",
                self.n_qubits,
                z_weights.len()
            )));
        }
        // Diagonal observable value per basis state.
        let dim = 1usize << self.n_qubits;
        let mut diag = vec![T::zero(); dim];
        for (b, d) in diag.iter_mut().enumerate() {
            let mut v = T::zero();
            for (q, &w) in z_weights.iter().enumerate() {
                if b & (1 << q) == 0 {
                    v += w;
                } else {
                    v -= w;
                }
            }
            *d = v;
        }

        let mut psi = final_state.clone();
        let mut lambda = final_state.clone();
        scale_diag(&mut lambda, &diag);

        let mut grads = vec![T::zero(); self.n_angles];
        for gate in self.gates.iter().rev() {
            self.unapply_gate(&mut psi, gate, angles)?;
            if let Some(slot) = gate.angle_slot() {
                let mut dpsi = psi.clone();
                match *gate {
                    Gate::Rot { axis, qubit, angle } => {
                        dpsi.apply_rotation_deriv(axis, angles[angle], qubit);
                    }
                    Gate::Cry {
                        control,
                        target,
                        angle,
                    } => {
                        dpsi.apply_cry_deriv(angles[angle], control, target);
                    }
                    Gate::Cnot { .. } => unreachable!("CNOT has no angle"),
                }
                let overlap = lambda.inner(&dpsi);
                grads[slot] += overlap.re + overlap.re;
            }
            self.unapply_gate(&mut lambda, gate, angles)?;
        }
        Ok(grads)
    }

    /// Record the circuit readout on an autodiff tape.
    ///
    /// `angles` must be a 1-D variable of length `n_angles`; the output is
    /// the 1-D `<Z_i>` readout vector with exact adjoint gradients.
    pub fn tape_readout<T: Scalar>(self: &Rc<Self>, tape: &Tape<T>, angles: Var) -> Result<Var> {
        let av = tape.value(angles);
        if av.shape().len() != 1 {
            return Err(Error::Shape(format!(
                "angle vector must be 1-D, got {:?}",
                av.shape()
            )));
        }
        let angle_data = av.data().to_vec();
        let final_state = self.simulate(&angle_data)?;
        let readout = Tensor::from_slice(&final_state.z_readout());
        let circuit = Rc::clone(self);
        Ok(tape.custom_op(&[angles], readout, move |g| {
            let grads = circuit
                .adjoint_gradients(&angle_data, &final_state, g.data())
                .expect("angles validated in forward");
            vec![Tensor::from_slice(&grads)]
        }))
    }

    /// Ordered gate list with resolved angle values, for inspection.
    pub fn dump<T: Scalar>(&self, angles: &[T]) -> Result<serde_json::Value> {
        self.check_angles(angles)?;
        let gates: Vec<serde_json::Value> = self
            .gates
            .iter()
            .map(|gate| {
                let mut v = serde_json::to_value(gate).expect("gate serializes");
                if let Some(slot) = gate.angle_slot() {
                    v["value"] = serde_json::json!(angles[slot].to_f64());
                }
                v
            })
            .collect();
        Ok(serde_json::json!({
            "version": 1,
            "n_qubits": self.n_qubits,
            "n_angles": self.n_angles,
            "gates": gates,
        }))
    }
}

fn scale_diag<T: Scalar>(state: &mut StateVector<T>, diag: &[T]) {
    // In-place O |psi> for a diagonal observable.
    let amps: Vec<Complex<T>> = state
        .amplitudes()
        .iter()
        .zip(diag)
        .map(|(a, &d)| Complex::new(a.re * d, a.im * d))
        .collect();
    state.set_amplitudes(amps);
}

/// Lexicographically ordered unordered qubit pairs `(i, j)` with `i < j`.
pub fn qubit_pairs(n_qubits: usize) -> Vec<(usize, usize)> {
    let mut pairs = Vec::with_capacity(n_qubits * n_qubits.saturating_sub(1) / 2);
    for i in 0..n_qubits {
        for j in (i + 1)..n_qubits {
            pairs.push((i, j));
        }
    }
    pairs
}

/// Angle-vector layout shared by a circuit builder and its caller.
#[derive(Debug, Clone)]
pub struct AngleLayout {
    pub n_qubits: usize,
    pub layers: usize,
    /// Angle slots per layer beyond the encoding block.
    pub per_layer: usize,
    pub total: usize,
}

/// Graph-convolution circuit: angle encoding (`R_Z(x_i)` then `R_Y(x_i)`,
/// both reading slot `i`), then per layer a rotation block
/// (`R_Z`, `R_Y`, `R_X` per qubit, slots `(RX, RY, RZ)` in storage order)
/// followed by an entanglement block of `CRY` gates over all qubit pairs
/// in lexicographic order, controlled by the smaller index.
///
/// Layout: `[enc (n)] + layer l * [rot (3n), ent (n(n-1)/2)]`.
pub fn qgcn_circuit(n_qubits: usize, layers: usize) -> Result<(Circuit, AngleLayout)> {
    let pairs = qubit_pairs(n_qubits);
    let per_layer = 3 * n_qubits + pairs.len();
    let total = n_qubits + layers * per_layer;
    let mut c = Circuit::new(n_qubits, total)?;
    for q in 0..n_qubits {
        c.push_rotation(Axis::Z, q, q)?;
        c.push_rotation(Axis::Y, q, q)?;
    }
    for l in 0..layers {
        let rot_base = n_qubits + l * per_layer;
        for q in 0..n_qubits {
            // Product R_X R_Y R_Z applies right to left.
            c.push_rotation(Axis::Z, q, rot_base + 3 * q + 2)?;
            c.push_rotation(Axis::Y, q, rot_base + 3 * q + 1)?;
            c.push_rotation(Axis::X, q, rot_base + 3 * q)?;
        }
        let ent_base = rot_base + 3 * n_qubits;
        for (p, &(i, j)) in pairs.iter().enumerate() {
            c.push_cry(i, j, ent_base + p)?;
        }
    }
    Ok((
        c,
        AngleLayout {
            n_qubits,
            layers,
            per_layer,
            total,
        },
    ))
}

/// Pooling circuit: `R_Y(x_i)` encoding (slot `i`), then per layer a
/// `R_Z, R_Y, R_Z` block per qubit (slots stored in that order, applied
/// right to left) followed by the CNOT ring `CNOT(i, (i+1) mod n)`.
///
/// Layout: `[enc (n)] + layer l * [phi (3n)]`.
pub fn qpool_circuit(n_qubits: usize, layers: usize) -> Result<(Circuit, AngleLayout)> {
    let per_layer = 3 * n_qubits;
    let total = n_qubits + layers * per_layer;
    let mut c = Circuit::new(n_qubits, total)?;
    for q in 0..n_qubits {
        c.push_rotation(Axis::Y, q, q)?;
    }
    for l in 0..layers {
        let base = n_qubits + l * per_layer;
        for q in 0..n_qubits {
            c.push_rotation(Axis::Z, q, base + 3 * q + 2)?;
            c.push_rotation(Axis::Y, q, base + 3 * q + 1)?;
            c.push_rotation(Axis::Z, q, base + 3 * q)?;
        }
        if n_qubits >= 2 {
            for q in 0..n_qubits {
                c.push_cnot(q, (q + 1) % n_qubits)?;
            }
        }
    }
    Ok((
        c,
        AngleLayout {
            n_qubits,
            layers,
            per_layer,
            total,
        },
    ))
}
