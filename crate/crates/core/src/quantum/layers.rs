//! Quantum graph-convolution and quantum pooling layers on the tape.
//!
//! These compose the classical projections (angle preparation, readout
//! mapping, residuals) with the circuit readout custom op, so gradients
//! flow end to end: through the readout into the rotation angles, through
//! the CRY couplings into the pooled adjacency, and through the encoding
//! angles into the pooled node features.

use std::rc::Rc;

use crate::error::{Error, Result};
use crate::num::Scalar;
use crate::quantum::circuit::{qubit_pairs, Circuit};
use crate::tape::{Tape, Var};

/// Trainable inputs of the quantum graph-convolution layer stack.
pub struct QgcnVars {
    /// Per-layer rotation angles, each `[n_qubits, 3]` as (RX, RY, RZ).
    pub rot: Vec<Var>,
    /// Per-layer pair couplings, each `[n_qubits * (n_qubits - 1) / 2]`.
    pub ent: Vec<Var>,
    /// Feature-to-angle projection `[d_hidden, 1]`.
    pub proj: Var,
    /// Shared readout map `[1, d_hidden]` applied to each scalar `<Z_i>`.
    pub out_w: Var,
}

/// Trainable inputs of the quantum pooling layer.
pub struct QpoolVars {
    /// Per-layer `[n_qubits, 3]` angles as (RZ, RY, RZ).
    pub phi: Vec<Var>,
    /// Mean-feature to qubit-angle map `[d_hidden, n_qubits]`.
    pub embed_w: Var,
    /// Mean-feature to global-vector map `[d_hidden, d_global]`.
    pub raw_w: Var,
    /// Readout MLP: `[n_qubits, d_mlp]` then `[d_mlp, d_global]`.
    pub mlp_w1: Var,
    pub out_w: Var,
}

/// Quantum graph convolution over pooled node features.
///
/// Per node, a learned projection squashed by `pi * tanh` yields the
/// encoding angle; the circuit entangles qubit pairs with CRY angles
/// `theta_ij * A_pooled[i][j]`; the `<Z_i>` readouts are mapped through
/// the shared `out_w` row and added back onto `x_pooled` under ReLU.
pub fn qgcn_forward<T: Scalar>(
    tape: &Tape<T>,
    x_pooled: Var,
    a_pooled: Var,
    vars: &QgcnVars,
    circuit: &Rc<Circuit>,
) -> Result<Var> {
    let n = circuit.n_qubits();
    let x_shape = tape.shape_of(x_pooled);
    if x_shape.len() != 2 || x_shape[0] != n {
        return Err(Error::Shape(format!(
            "pooled features must be [{n}, d_hidden], got {x_shape:?}"
        )));
    }
    if vars.rot.len() != vars.ent.len() {
        return Err(Error::Shape(
            "rotation and entanglement layer counts differ".into(),
        ));
    }

    // Encoding angles: pi * tanh(X_pooled . proj), one scalar per node.
    let raw = tape.matmul(x_pooled, vars.proj)?;
    let squashed = tape.tanh(tape.reshape(raw, &[n])?);
    let enc = tape.scale(squashed, T::PI());

    // CRY couplings modulated by the pooled adjacency.
    let pair_idx: Vec<usize> = qubit_pairs(n).iter().map(|&(i, j)| i * n + j).collect();
    let a_pairs = tape.gather(a_pooled, pair_idx)?;

    let mut parts = vec![enc];
    for (rot, ent) in vars.rot.iter().zip(&vars.ent) {
        parts.push(tape.reshape(*rot, &[3 * n])?);
        parts.push(tape.mul(*ent, a_pairs)?);
    }
    let angles = tape.concat(&parts)?;

    let z = circuit.tape_readout(tape, angles)?;
    let z_col = tape.reshape(z, &[n, 1])?;
    let mapped = tape.matmul(z_col, vars.out_w)?;
    Ok(tape.relu(tape.add(mapped, x_pooled)?))
}

/// Quantum pooling of the node features into one global vector.
///
/// Column means of the node features are projected both to the raw global
/// vector and to the qubit encoding angles; the strongly entangling
/// circuit mixes them; the `<Z_i>` readouts pass through a small MLP and
/// are added to the raw global vector.
pub fn qpool_forward<T: Scalar>(
    tape: &Tape<T>,
    x_qgcn: Var,
    vars: &QpoolVars,
    circuit: &Rc<Circuit>,
) -> Result<Var> {
    let n = circuit.n_qubits();
    let x_shape = tape.shape_of(x_qgcn);
    if x_shape.len() != 2 || x_shape[0] != n {
        return Err(Error::Shape(format!(
            "quantum features must be [{n}, d_hidden], got {x_shape:?}"
        )));
    }
    let d_hidden = x_shape[1];

    let x_mean = tape.mean_axis0(x_qgcn)?;
    let x_mean_row = tape.reshape(x_mean, &[1, d_hidden])?;
    let raw_global = tape.matmul(x_mean_row, vars.raw_w)?;

    let enc_row = tape.matmul(x_mean_row, vars.embed_w)?;
    let enc = tape.reshape(enc_row, &[n])?;

    let mut parts = vec![enc];
    for phi in &vars.phi {
        parts.push(tape.reshape(*phi, &[3 * n])?);
    }
    let angles = tape.concat(&parts)?;

    let z = circuit.tape_readout(tape, angles)?;
    let z_row = tape.reshape(z, &[1, n])?;
    let hidden = tape.relu(tape.matmul(z_row, vars.mlp_w1)?);
    let mlp_out = tape.matmul(hidden, vars.out_w)?;

    let v = tape.add(raw_global, mlp_out)?;
    let d_global = tape.shape_of(v)[1];
    tape.reshape(v, &[d_global])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::circuit::{qgcn_circuit, qpool_circuit};
    use crate::tensor::Tensor;

    type T64 = Tensor<f64>;

    fn qgcn_vars(tape: &Tape<f64>, n: usize, layers: usize, d: usize, zero: bool) -> QgcnVars {
        let p = n * (n - 1) / 2;
        let fill = |shape: &[usize]| {
            if zero {
                T64::zeros(shape)
            } else {
                T64::ones(shape).scale(0.1)
            }
        };
        QgcnVars {
            rot: (0..layers).map(|_| tape.leaf(fill(&[n, 3]))).collect(),
            ent: (0..layers).map(|_| tape.leaf(fill(&[p]))).collect(),
            proj: tape.leaf(fill(&[d, 1])),
            out_w: tape.leaf(fill(&[1, d])),
        }
    }

    #[test]
    fn zero_circuit_reduces_to_residual_relu() {
        // All rotation params 0, A_pooled = 0, W_out = 0 and proj = 0:
        // the circuit readout contributes nothing, so output = ReLU(X).
        let tape: Tape<f64> = Tape::new();
        let (circ, _) = qgcn_circuit(3, 2).unwrap();
        let circ = Rc::new(circ);
        let x =
            tape.leaf(T64::from_rows(&[vec![1.0, -2.0], vec![0.5, 0.0], vec![-1.0, 3.0]]).unwrap());
        let a = tape.constant(T64::zeros(&[3, 3]));
        let vars = qgcn_vars(&tape, 3, 2, 2, true);
        let out = qgcn_forward(&tape, x, a, &vars, &circ).unwrap();
        let got = tape.value(out);
        let want = tape.value(x).relu();
        assert_eq!(got, want);
    }

    #[test]
    fn zero_params_readout_is_plus_one() {
        // proj = 0 gives zero encoding angles, so every <Z_i> is +1 and
        // the output is ReLU(W_out * 1 + X).
        let tape: Tape<f64> = Tape::new();
        let (circ, _) = qgcn_circuit(2, 1).unwrap();
        let circ = Rc::new(circ);
        let x = tape.leaf(T64::from_rows(&[vec![0.2, -0.7], vec![0.0, 0.4]]).unwrap());
        let a = tape.constant(T64::zeros(&[2, 2]));
        let mut vars = qgcn_vars(&tape, 2, 1, 2, true);
        vars.out_w = tape.leaf(T64::from_rows(&[vec![0.5, -0.25]]).unwrap());
        let out = qgcn_forward(&tape, x, a, &vars, &circ).unwrap();
        let got = tape.value(out);
        let xv = tape.value(x);
        for i in 0..2 {
            for j in 0..2 {
                let want = (tape.value(vars.out_w).at(0, j) + xv.at(i, j)).max(0.0);
                assert!((got.at(i, j) - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn qpool_residual_identity_when_mlp_is_zero() {
        let tape: Tape<f64> = Tape::new();
        let (circ, _) = qpool_circuit(2, 1).unwrap();
        let circ = Rc::new(circ);
        let x = tape.leaf(T64::from_rows(&[vec![1.0, 2.0, 3.0], vec![3.0, 2.0, 1.0]]).unwrap());
        let vars = QpoolVars {
            phi: vec![tape.leaf(T64::zeros(&[2, 3]))],
            embed_w: tape.leaf(T64::zeros(&[3, 2])),
            raw_w: tape
                .leaf(T64::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap()),
            mlp_w1: tape.leaf(T64::ones(&[2, 4])),
            out_w: tape.leaf(T64::zeros(&[4, 2])),
        };
        let v = qpool_forward(&tape, x, &vars, &circ).unwrap();
        let got = tape.value(v);
        // x_mean = [2, 2, 2]; raw_w picks the first two coordinates.
        assert_eq!(got.shape(), &[2]);
        assert!((got.data()[0] - 2.0).abs() < 1e-12);
        assert!((got.data()[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn qpool_output_length_is_d_global() {
        let tape: Tape<f64> = Tape::new();
        let (circ, _) = qpool_circuit(3, 2).unwrap();
        let circ = Rc::new(circ);
        let x = tape.leaf(T64::ones(&[3, 5]));
        let vars = QpoolVars {
            phi: vec![
                tape.leaf(T64::ones(&[3, 3]).scale(0.2)),
                tape.leaf(T64::ones(&[3, 3]).scale(-0.1)),
            ],
            embed_w: tape.leaf(T64::ones(&[5, 3]).scale(0.3)),
            raw_w: tape.leaf(T64::ones(&[5, 7]).scale(0.1)),
            mlp_w1: tape.leaf(T64::ones(&[3, 4]).scale(0.2)),
            out_w: tape.leaf(T64::ones(&[4, 7]).scale(0.1)),
        };
        let v = qpool_forward(&tape, x, &vars, &circ).unwrap();
        assert_eq!(tape.shape_of(v), vec![7]);
    }

    #[test]
    fn zero_coupling_deactivates_pair_parameter() {
        // With A_pooled(i, j) = 0 the output must not depend on theta_ij.
        let tape: Tape<f64> = Tape::new();
        let (circ, _) = qgcn_circuit(2, 1).unwrap();
        let circ = Rc::new(circ);
        let x_val = T64::from_rows(&[vec![0.3, 0.9], vec![-0.2, 0.6]]).unwrap();
        let a_val = T64::zeros(&[2, 2]);

        let run = |ent_angle: f64| -> Tensor<f64> {
            let tape: Tape<f64> = Tape::new();
            let x = tape.leaf(x_val.clone());
            let a = tape.constant(a_val.clone());
            let vars = QgcnVars {
                rot: vec![tape.leaf(T64::ones(&[2, 3]).scale(0.2))],
                ent: vec![tape.leaf(T64::from_slice(&[ent_angle]))],
                proj: tape.leaf(T64::ones(&[2, 1]).scale(0.4)),
                out_w: tape.leaf(T64::ones(&[1, 2]).scale(0.5)),
            };
            let out = qgcn_forward(&tape, x, a, &vars, &circ).unwrap();
            tape.value(out)
        };
        drop(tape);
        assert_eq!(run(0.0), run(123.456));
    }
}
