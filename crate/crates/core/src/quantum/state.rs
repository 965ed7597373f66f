//! Exact statevector simulation of an n-qubit pure state.
//!
//! Amplitudes are indexed so that qubit `q` owns bit `q` of the basis
//! index (qubit 0 is the least significant bit). All gates follow the
//! rotation convention `R_A(theta) = exp(-i * theta * A / 2)`.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::num::{scalar, Scalar};

/// Rotation axis of a single-qubit gate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

/// Complex amplitude array of length `2^n_qubits` representing a pure state.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector<T> {
    n_qubits: usize,
    amps: Vec<Complex<T>>,
}

type Mat2<T> = [[Complex<T>; 2]; 2];

fn rotation_matrix<T: Scalar>(axis: Axis, theta: T) -> Mat2<T> {
    let half = theta * scalar::<T>(0.5);
    let (c, s) = (half.cos(), half.sin());
    let zero = Complex::new(T::zero(), T::zero());
    match axis {
        Axis::X => [
            [Complex::new(c, T::zero()), Complex::new(T::zero(), -s)],
            [Complex::new(T::zero(), -s), Complex::new(c, T::zero())],
        ],
        Axis::Y => [
            [Complex::new(c, T::zero()), Complex::new(-s, T::zero())],
            [Complex::new(s, T::zero()), Complex::new(c, T::zero())],
        ],
        Axis::Z => [[Complex::new(c, -s), zero], [zero, Complex::new(c, s)]],
    }
}

/// d/dtheta of the rotation matrix; used by the adjoint gradient sweep.
fn rotation_matrix_deriv<T: Scalar>(axis: Axis, theta: T) -> Mat2<T> {
    let half = theta * scalar::<T>(0.5);
    let hc = half.cos() * scalar::<T>(0.5);
    let hs = half.sin() * scalar::<T>(0.5);
    let zero = Complex::new(T::zero(), T::zero());
    match axis {
        Axis::X => [
            [Complex::new(-hs, T::zero()), Complex::new(T::zero(), -hc)],
            [Complex::new(T::zero(), -hc), Complex::new(-hs, T::zero())],
        ],
        Axis::Y => [
            [Complex::new(-hs, T::zero()), Complex::new(-hc, T::zero())],
            [Complex::new(hc, T::zero()), Complex::new(-hs, T::zero())],
        ],
        Axis::Z => [
            [Complex::new(-hs, -hc), zero],
            [zero, Complex::new(-hs, hc)],
        ],
    }
}

impl<T: Scalar> StateVector<T> {
    /// The all-zeros state `|0...0>` on `n_qubits >= 1` qubits.
    pub fn zero_state(n_qubits: usize) -> Result<Self> {
        if n_qubits == 0 {
            return Err(Error::Config("statevector needs at least one qubit".into()));
        }
        if n_qubits > 24 {
            return Err(Error::Config(format!(
                "{n_qubits} qubits exceed the simulator budget"
            )));
        }
        let mut amps = vec![Complex::new(T::zero(), T::zero()); 1 << n_qubits];
        amps[0] = Complex::new(T::one(), T::zero());
        Ok(Self { n_qubits, amps })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex<T>] {
        &self.amps
    }

    pub(crate) fn set_amplitudes(&mut self, amps: Vec<Complex<T>>) {
        debug_assert_eq!(amps.len(), self.amps.len());
        self.amps = amps;
    }

    /// L2 norm of the amplitude vector; 1 for any physical state.
    pub fn norm(&self) -> T {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<T>().sqrt()
    }

    fn check_qubit(&self, qubit: usize) -> Result<()> {
        if qubit >= self.n_qubits {
            return Err(Error::Index(format!(
                "qubit {} of {}",
                qubit, self.n_qubits
            )));
        }
        Ok(())
    }

    /// Apply a 2x2 matrix to `qubit`, optionally conditioned on a control
    /// qubit being `|1>`.
    ///
    /// `zero_uncontrolled` zeroes the amplitudes where the control is
    /// `|0>`; that turns the call into an application of the *derivative*
    /// of a controlled gate, whose control-0 block is zero.
    fn apply_mat2(
        &mut self,
        m: &Mat2<T>,
        qubit: usize,
        control: Option<usize>,
        zero_uncontrolled: bool,
    ) {
        let mask = 1usize << qubit;
        let cmask = control.map(|c| 1usize << c);
        for b in 0..self.amps.len() {
            if b & mask != 0 {
                continue; // visit each (b0, b1) pair once, from its 0 side
            }
            if let Some(cm) = cmask {
                if b & cm == 0 {
                    if zero_uncontrolled {
                        self.amps[b] = Complex::new(T::zero(), T::zero());
                        self.amps[b | mask] = Complex::new(T::zero(), T::zero());
                    }
                    continue;
                }
            }
            let a0 = self.amps[b];
            let a1 = self.amps[b | mask];
            self.amps[b] = m[0][0] * a0 + m[0][1] * a1;
            self.amps[b | mask] = m[1][0] * a0 + m[1][1] * a1;
        }
    }

    /// Single-qubit rotation `R_axis(theta)` on `qubit`.
    pub fn apply_rotation(&mut self, axis: Axis, theta: T, qubit: usize) -> Result<()> {
        self.check_qubit(qubit)?;
        self.apply_mat2(&rotation_matrix(axis, theta), qubit, None, false);
        Ok(())
    }

    /// Controlled-Y rotation: `R_Y(theta)` on `target` where `control` is `|1>`.
    pub fn apply_cry(&mut self, theta: T, control: usize, target: usize) -> Result<()> {
        self.check_qubit(control)?;
        self.check_qubit(target)?;
        if control == target {
            return Err(Error::Index(format!("control and target both {control}")));
        }
        self.apply_mat2(
            &rotation_matrix(Axis::Y, theta),
            target,
            Some(control),
            false,
        );
        Ok(())
    }

    /// CNOT: flip `target` where `control` is `|1>`.
    pub fn apply_cnot(&mut self, control: usize, target: usize) -> Result<()> {
        self.check_qubit(control)?;
        self.check_qubit(target)?;
        if control == target {
            return Err(Error::Index(format!("control and target both {control}")));
        }
        let zero = Complex::new(T::zero(), T::zero());
        let one = Complex::new(T::one(), T::zero());
        let x: Mat2<T> = [[zero, one], [one, zero]];
        self.apply_mat2(&x, target, Some(control), false);
        Ok(())
    }

    /// Derivative application used by the adjoint sweep: replaces the state
    /// by `(dU/dtheta) |psi>` for the given rotation gate.
    pub(crate) fn apply_rotation_deriv(&mut self, axis: Axis, theta: T, qubit: usize) {
        self.apply_mat2(&rotation_matrix_deriv(axis, theta), qubit, None, false);
    }

    pub(crate) fn apply_cry_deriv(&mut self, theta: T, control: usize, target: usize) {
        self.apply_mat2(
            &rotation_matrix_deriv(Axis::Y, theta),
            target,
            Some(control),
            true,
        );
    }

    /// Exact `<Z_qubit>` expectation: probability-weighted +/-1 readout.
    pub fn pauli_z_expectation(&self, qubit: usize) -> Result<T> {
        self.check_qubit(qubit)?;
        let mask = 1usize << qubit;
        let mut z = T::zero();
        for (b, amp) in self.amps.iter().enumerate() {
            let p = amp.norm_sqr();
            if b & mask == 0 {
                z += p;
            } else {
                z -= p;
            }
        }
        Ok(z)
    }

    /// All `<Z_i>` readouts in qubit order.
    pub fn z_readout(&self) -> Vec<T> {
        (0..self.n_qubits)
            .map(|q| self.pauli_z_expectation(q).expect("qubit in range"))
            .collect()
    }

    /// Inner product `<self|other>`.
    pub fn inner(&self, other: &Self) -> Complex<T> {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * *b)
            .fold(Complex::new(T::zero(), T::zero()), |acc, x| acc + x)
    }
}

/// Angle encoding of classical scalars (one per qubit): the product state
/// `prod_i R_Y(x_i) R_Z(x_i) |0>_i`, R_Z acting first. Each qubit then
/// reads out `<Z_i> = cos(x_i)`.
pub fn angle_encode<T: Scalar>(x: &[T]) -> Result<StateVector<T>> {
    let mut state = StateVector::zero_state(x.len())?;
    for (q, &angle) in x.iter().enumerate() {
        if !angle.is_finite() {
            return Err(Error::Numeric(format!(
                "non-finite encoding angle for qubit {q}"
            )));
        }
        state.apply_rotation(Axis::Z, angle, q)?;
        state.apply_rotation(Axis::Y, angle, q)?;
    }
    Ok(state)
}

#[cfg(test)]
pub(crate) fn basis_state<T: Scalar>(bits: &str) -> StateVector<T> {
    // Leftmost character of `bits` is qubit 0.
    let n = bits.len();
    let mut index = 0usize;
    for (q, ch) in bits.chars().enumerate() {
        if ch == '1' {
            index |= 1 << q;
        }
    }
    let mut state = StateVector::zero_state(n).unwrap();
    state.amps[0] = Complex::new(T::zero(), T::zero());
    state.amps[index] = Complex::new(T::one(), T::zero());
    state
}
