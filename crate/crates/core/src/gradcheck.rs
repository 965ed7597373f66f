//! Independent gradient oracles: central finite differences for every
//! differentiable operation and the parameter-shift rule for circuit
//! angles. Both run forward-only evaluations, so they stay independent of
//! the reverse-mode path they verify. Used by the test suites and by the
//! `gradcheck` subcommand.

use std::f64::consts::FRAC_PI_2;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::Result;
use crate::geo::{build_adjacency, normalize_adjacency, GridId};
use crate::model::{EncodedSample, Model, ModelDims};
use crate::quantum::{qgcn_circuit, qpool_circuit, Circuit, Gate};
use crate::tape::Var;
use crate::{GeoPoint, Tape, Tensor};

/// Result of one component check.
#[derive(Debug, Clone)]
pub struct ComponentCheck {
    pub name: String,
    pub max_err: f64,
    pub tolerance: f64,
}

impl ComponentCheck {
    pub fn passed(&self) -> bool {
        self.max_err.is_finite() && self.max_err <= self.tolerance
    }
}

/// Central finite differences of a scalar function.
pub fn finite_diff(
    f: &mut dyn FnMut(&[f64]) -> Result<f64>,
    x: &[f64],
    h: f64,
) -> Result<Vec<f64>> {
    let mut grad = vec![0.0; x.len()];
    let mut xs = x.to_vec();
    for i in 0..x.len() {
        let orig = xs[i];
        xs[i] = orig + h;
        let fp = f(&xs)?;
        xs[i] = orig - h;
        let fm = f(&xs)?;
        xs[i] = orig;
        grad[i] = (fp - fm) / (2.0 * h);
    }
    Ok(grad)
}

/// Mixed absolute/relative deviation: `|a - b| / max(1, |a|, |b|)`.
pub fn mixed_rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / 1.0f64.max(a.abs()).max(b.abs())
}

fn max_mixed_err(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| mixed_rel_err(x, y))
        .fold(0.0, f64::max)
}

const CLASSICAL_TOL: f64 = 1e-4;
const SHIFT_TOL: f64 = 1e-8;
const FD_STEP: f64 = 1e-5;

type BuildFn = dyn Fn(&Tape, &[Var]) -> Result<Var>;

/// Compare reverse-mode gradients of `sum(weights * build(inputs))`
/// against finite differences over every input coordinate.
fn op_check(name: &str, inputs: &[Tensor], build: &BuildFn) -> Result<ComponentCheck> {
    let weight_for = |shape: &[usize]| {
        let mut rng = ChaCha20Rng::seed_from_u64(0xC0FFEE);
        Tensor::rand_uniform(&mut rng, shape, -1.0, 1.0)
    };

    let scalarize = |tape: &Tape, out: Var| -> Result<Var> {
        let out_shape = tape.shape_of(out);
        if out_shape.iter().product::<usize>() == 1 && out_shape.len() <= 1 {
            Ok(tape.sum(out))
        } else {
            let w = tape.constant(weight_for(&out_shape));
            Ok(tape.sum(tape.mul(out, w)?))
        }
    };

    // Analytic pass.
    let tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone())).collect();
    let out = build(&tape, &vars)?;
    let loss = scalarize(&tape, out)?;
    let grads = tape.backward(loss)?;
    let analytic: Vec<f64> = vars
        .iter()
        .flat_map(|&v| grads.get(v).expect("leaf gradient").data().to_vec())
        .collect();

    // Finite differences over the flattened inputs.
    let shapes: Vec<Vec<usize>> = inputs.iter().map(|t| t.shape().to_vec()).collect();
    let flat: Vec<f64> = inputs.iter().flat_map(|t| t.data().to_vec()).collect();
    let mut f = |x: &[f64]| -> Result<f64> {
        let mut tensors = Vec::with_capacity(shapes.len());
        let mut offset = 0;
        for shape in &shapes {
            let numel: usize = shape.iter().product();
            tensors.push(Tensor::new(
                shape.clone(),
                x[offset..offset + numel].to_vec(),
            )?);
            offset += numel;
        }
        let tape = Tape::new();
        let vars: Vec<Var> = tensors.iter().map(|t| tape.leaf(t.clone())).collect();
        let out = build(&tape, &vars)?;
        let loss = scalarize(&tape, out)?;
        tape.value(loss).item()
    };
    let fd = finite_diff(&mut f, &flat, FD_STEP)?;
    Ok(ComponentCheck {
        name: name.to_string(),
        max_err: max_mixed_err(&analytic, &fd),
        tolerance: CLASSICAL_TOL,
    })
}

/// Finite-difference checks for every classical differentiable operation.
pub fn check_classical_ops(seed: u64) -> Result<Vec<ComponentCheck>> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    // Inputs kept away from ReLU kinks so central differences are valid.
    let mut away_from_zero = |shape: &[usize]| {
        let t = Tensor::rand_uniform(&mut rng, shape, 0.2, 1.2);
        let signs = Tensor::rand_uniform(&mut rng, shape, -1.0, 1.0).map(f64::signum);
        t.mul(&signs).expect("same shape")
    };

    let mut checks = Vec::new();
    let a = away_from_zero(&[3, 4]);
    let b = away_from_zero(&[4, 2]);
    checks.push(op_check("matmul", &[a, b], &|t, v| t.matmul(v[0], v[1]))?);

    let x = away_from_zero(&[2, 5]);
    let y = away_from_zero(&[2, 5]);
    checks.push(op_check("add", &[x.clone(), y.clone()], &|t, v| {
        t.add(v[0], v[1])
    })?);
    checks.push(op_check("sub", &[x.clone(), y.clone()], &|t, v| {
        t.sub(v[0], v[1])
    })?);
    checks.push(op_check("mul", &[x.clone(), y], &|t, v| t.mul(v[0], v[1]))?);
    checks.push(op_check("scale", std::slice::from_ref(&x), &|t, v| {
        Ok(t.scale(v[0], -1.7))
    })?);
    checks.push(op_check("transpose", std::slice::from_ref(&x), &|t, v| {
        t.transpose(v[0])
    })?);
    checks.push(op_check("relu", std::slice::from_ref(&x), &|t, v| {
        Ok(t.relu(v[0]))
    })?);
    checks.push(op_check("tanh", std::slice::from_ref(&x), &|t, v| {
        Ok(t.tanh(v[0]))
    })?);
    checks.push(op_check(
        "softmax_rows",
        std::slice::from_ref(&x),
        &|t, v| t.softmax(v[0], 1),
    )?);
    checks.push(op_check(
        "softmax_cols",
        std::slice::from_ref(&x),
        &|t, v| t.softmax(v[0], 0),
    )?);
    checks.push(op_check("sum", std::slice::from_ref(&x), &|t, v| {
        Ok(t.sum(v[0]))
    })?);
    checks.push(op_check(
        "mean_axis0",
        std::slice::from_ref(&x),
        &|t, v| t.mean_axis0(v[0]),
    )?);
    checks.push(op_check("col_vec", std::slice::from_ref(&x), &|t, v| {
        t.col_vec(v[0], 2)
    })?);
    checks.push(op_check("reshape", std::slice::from_ref(&x), &|t, v| {
        t.reshape(v[0], &[5, 2])
    })?);

    let logits = away_from_zero(&[3, 5]);
    checks.push(op_check("cross_entropy", &[logits], &|t, v| {
        t.cross_entropy(v[0], &[4, 0, 2])
    })?);

    let p1 = away_from_zero(&[3]);
    let p2 = away_from_zero(&[2]);
    checks.push(op_check("concat", &[p1.clone(), p2.clone()], &|t, v| {
        t.concat(v)
    })?);
    let c1 = away_from_zero(&[4]);
    let c2 = away_from_zero(&[4]);
    checks.push(op_check(
        "stack_cols",
        &[c1.clone(), c2.clone()],
        &|t, v| t.stack_cols(v),
    )?);
    checks.push(op_check("stack_rows", &[c1, c2], &|t, v| t.stack_rows(v))?);

    let table = away_from_zero(&[5, 3]);
    checks.push(op_check("embed_row", &[table], &|t, v| {
        t.embed_row(v[0], 3)
    })?);
    let pool = away_from_zero(&[3, 3]);
    checks.push(op_check("gather", &[pool], &|t, v| {
        t.gather(v[0], vec![1, 3, 7, 3])
    })?);

    let signal = away_from_zero(&[2, 6]);
    let kernel = away_from_zero(&[3, 2, 3]);
    checks.push(op_check(
        "conv1d_d1",
        &[signal.clone(), kernel.clone()],
        &|t, v| t.conv1d_causal(v[0], v[1], 1),
    )?);
    checks.push(op_check(
        "conv1d_d2",
        &[signal.clone(), kernel],
        &|t, v| t.conv1d_causal(v[0], v[1], 2),
    )?);

    checks.push(op_check("dropout", &[signal], &|t, v| {
        // Fixed stream: the mask is identical on every rebuild, so finite
        // differences see a constant linear map.
        let mut rng = ChaCha20Rng::seed_from_u64(31);
        t.dropout(v[0], 0.4, true, &mut rng)
    })?);

    Ok(checks)
}

/// Re-index a circuit so every angled gate owns a private slot; returns
/// the expanded circuit and, per new slot, the original slot it reads.
pub fn expand_slots(circuit: &Circuit) -> Result<(Circuit, Vec<usize>)> {
    let angled = circuit
        .gates()
        .iter()
        .filter(|g| !matches!(g, Gate::Cnot { .. }))
        .count();
    let mut expanded = Circuit::new(circuit.n_qubits(), angled)?;
    let mut origin = Vec::with_capacity(angled);
    for gate in circuit.gates() {
        match *gate {
            Gate::Rot { axis, qubit, angle } => {
                expanded.push_rotation(axis, qubit, origin.len())?;
                origin.push(angle);
            }
            Gate::Cry {
                control,
                target,
                angle,
            } => {
                expanded.push_cry(control, target, origin.len())?;
                origin.push(angle);
            }
            Gate::Cnot { control, target } => expanded.push_cnot(control, target)?,
        }
    }
    Ok((expanded, origin))
}

/// Worst-case deviations of one circuit evaluation.
#[derive(Debug, Clone, Copy, Default)]
pub struct CircuitCheck {
    /// Max `|norm - 1|` over the state after every gate.
    pub norm_dev: f64,
    /// Max `|<Z>| - 1` overshoot of any readout (0 when all in range).
    pub z_excess: f64,
    /// Max |adjoint - parameter-shift| over every gate angle and readout.
    pub shift_err: f64,
    /// Max mixed relative error of adjoint vs finite differences over the
    /// original angle slots.
    pub fd_err: f64,
}

impl CircuitCheck {
    fn fold(&mut self, other: &CircuitCheck) {
        self.norm_dev = self.norm_dev.max(other.norm_dev);
        self.z_excess = self.z_excess.max(other.z_excess);
        self.shift_err = self.shift_err.max(other.shift_err);
        self.fd_err = self.fd_err.max(other.fd_err);
    }
}

/// Verify one circuit at one angle assignment: unit norms after every
/// gate, bounded readouts, adjoint gradients against the parameter-shift
/// rule per gate (two-term for rotations, four-term for controlled
/// rotations), and against central finite differences per angle slot.
pub fn check_circuit(circuit: &Circuit, angles: &[f64]) -> Result<CircuitCheck> {
    let (state, norms) = circuit.simulate_with_norms(angles)?;
    let norm_dev = norms.iter().map(|n| (n - 1.0).abs()).fold(0.0, f64::max);
    let readout = state.z_readout();
    let z_excess = readout
        .iter()
        .map(|z| (z.abs() - 1.0).max(0.0))
        .fold(0.0, f64::max);

    // Per-gate parameter shift on the slot-expanded circuit.
    let (expanded, origin) = expand_slots(circuit)?;
    let exp_angles: Vec<f64> = origin.iter().map(|&slot| angles[slot]).collect();
    let exp_state = expanded.simulate(&exp_angles)?;
    let n_qubits = circuit.n_qubits();
    let mut shift_err = 0.0f64;
    for q in 0..n_qubits {
        let mut weights = vec![0.0; n_qubits];
        weights[q] = 1.0;
        let adjoint = expanded.adjoint_gradients(&exp_angles, &exp_state, &weights)?;
        for (slot, gate) in expanded
            .gates()
            .iter()
            .filter(|g| !matches!(g, Gate::Cnot { .. }))
            .enumerate()
        {
            let eval = |delta: f64| -> Result<f64> {
                let mut shifted = exp_angles.clone();
                shifted[slot] += delta;
                Ok(expanded.readout(&shifted)?[q])
            };
            let shift = match gate {
                Gate::Rot { .. } => (eval(FRAC_PI_2)? - eval(-FRAC_PI_2)?) / 2.0,
                Gate::Cry { .. } => {
                    // Four-term rule for generators with spectrum {0, +-1/2}.
                    let d_plus = (2.0f64.sqrt() + 1.0) / (4.0 * 2.0f64.sqrt());
                    let d_minus = (2.0f64.sqrt() - 1.0) / (4.0 * 2.0f64.sqrt());
                    d_plus * (eval(FRAC_PI_2)? - eval(-FRAC_PI_2)?)
                        - d_minus * (eval(3.0 * FRAC_PI_2)? - eval(-3.0 * FRAC_PI_2)?)
                }
                Gate::Cnot { .. } => unreachable!("filtered"),
            };
            shift_err = shift_err.max((adjoint[slot] - shift).abs());
        }
    }

    // Finite differences on the original slots, against a weighted
    // readout sum.
    let mut weight_rng = ChaCha20Rng::seed_from_u64(0xD1CE);
    let weights: Vec<f64> = (0..n_qubits)
        .map(|_| weight_rng.gen_range(-1.0..1.0))
        .collect();
    let adjoint = circuit.adjoint_gradients(angles, &state, &weights)?;
    let mut f = |x: &[f64]| -> Result<f64> {
        let z = circuit.readout(x)?;
        Ok(z.iter().zip(&weights).map(|(zi, wi)| zi * wi).sum())
    };
    let fd = finite_diff(&mut f, angles, FD_STEP)?;
    let fd_err = max_mixed_err(&adjoint, &fd);

    Ok(CircuitCheck {
        norm_dev,
        z_excess,
        shift_err,
        fd_err,
    })
}

/// Run [`check_circuit`] over `draws` random angle assignments of the
/// standard graph-convolution and pooling circuits at one qubit count.
pub fn quantum_suite(
    n_qubits: usize,
    layers: usize,
    draws: usize,
    seed: u64,
) -> Result<CircuitCheck> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let (qgcn, qgcn_layout) = qgcn_circuit(n_qubits, layers)?;
    let (qpool, qpool_layout) = qpool_circuit(n_qubits, layers)?;
    let mut worst = CircuitCheck::default();
    for _ in 0..draws {
        let angles: Vec<f64> = (0..qgcn_layout.total)
            .map(|_| rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI))
            .collect();
        worst.fold(&check_circuit(&qgcn, &angles)?);
        let angles: Vec<f64> = (0..qpool_layout.total)
            .map(|_| rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI))
            .collect();
        worst.fold(&check_circuit(&qpool, &angles)?);
    }
    Ok(worst)
}

/// A fixed miniature model for end-to-end gradient verification:
/// 6 graph nodes, 3 qubits, hidden width 4, sequence length 2.
pub fn tiny_setup() -> Result<(Model, Tensor, Vec<EncodedSample>)> {
    let mut config = crate::config::ModelConfig::default();
    config.arch.d_in = 4;
    config.arch.d_hidden = 4;
    config.arch.gcn_layers = 2;
    config.arch.n_qubits = 3;
    config.arch.qgcn_layers = 2;
    config.arch.qpool_layers = 1;
    config.arch.d_global = 4;
    config.arch.d_mlp = 4;
    config.arch.d_grid_emb = 4;
    config.arch.d_fused = 4;
    config.arch.d_taxi_emb = 2;
    config.arch.d_hour_emb = 2;
    config.arch.d_weekday_emb = 2;
    config.arch.d_daytype_emb = 1;
    config.arch.d_tcn = 6;
    config.arch.tcn_kernel = 3;
    config.arch.tcn_dilations = vec![1, 2];
    config.arch.dropout = 0.0;
    config.data.seq_len = 2;
    config.data.k_poi = 3;
    config.train.seed = 1234;

    // A small real grid provides a genuine normalized adjacency.
    let bbox = crate::data::synthetic_bbox(2, 3);
    let grid = crate::geo::build_grid(bbox, crate::data::SYNTH_CELL_M)?;
    config.grid.bbox = bbox;
    let occupied: Vec<GridId> = (0..6).map(GridId).collect();
    let raw = build_adjacency(&grid, &occupied, config.grid.tau_km)?;
    let a_hat_adj = normalize_adjacency(&raw);
    let a_hat = Tensor::new(vec![6, 6], a_hat_adj.entries().to_vec())?;

    let model = Model::new(
        config,
        ModelDims {
            n_nodes: 6,
            n_taxis: 2,
        },
    )?;
    let samples = vec![
        EncodedSample {
            id: 0,
            taxi: 0,
            nodes: vec![0, 3],
            bocs: vec![vec![0.5, 0.5, 0.0], vec![0.0, 1.0, 0.0]],
            hours: vec![8, 9],
            weekdays: vec![0, 0],
            daytypes: vec![0, 0],
            target_node: 2,
            target_coords: GeoPoint {
                lon: 10.0,
                lat: 45.0,
            },
        },
        EncodedSample {
            id: 1,
            taxi: 1,
            nodes: vec![5, 1],
            bocs: vec![vec![0.0, 0.0, 1.0], vec![1.0, 0.0, 0.0]],
            hours: vec![22, 23],
            weekdays: vec![5, 6],
            daytypes: vec![1, 1],
            target_node: 4,
            target_coords: GeoPoint {
                lon: 10.01,
                lat: 45.01,
            },
        },
    ];
    Ok((model, a_hat, samples))
}

/// Finite-difference check of the whole model: every parameter of the
/// tiny setup against the batch loss.
pub fn check_end_to_end() -> Result<ComponentCheck> {
    let (model, a_hat, samples) = tiny_setup()?;
    let params = model.init_params();
    let refs: Vec<&EncodedSample> = samples.iter().collect();

    let tape = Tape::new();
    let bound = model.bind(&tape, &params);
    let (loss, _) = model.batch_forward(&tape, &bound, &a_hat, &refs, false, 0)?;
    let grads = tape.backward(loss)?;
    let analytic: Vec<f64> = bound
        .vars()
        .iter()
        .flat_map(|&v| grads.get(v).expect("leaf gradient").data().to_vec())
        .collect();

    let shapes = params.shapes();
    let flat: Vec<f64> = params.tensors().flat_map(|t| t.data().to_vec()).collect();
    let mut f = |x: &[f64]| -> Result<f64> {
        let mut tensors = Vec::with_capacity(shapes.len());
        let mut offset = 0;
        for shape in &shapes {
            let numel: usize = shape.iter().product();
            tensors.push(Tensor::new(
                shape.clone(),
                x[offset..offset + numel].to_vec(),
            )?);
            offset += numel;
        }
        let mut p = params.clone();
        p.set_all(tensors)?;
        let tape = Tape::new();
        let bound = model.bind(&tape, &p);
        let (loss, _) = model.batch_forward(&tape, &bound, &a_hat, &refs, false, 0)?;
        tape.value(loss).item()
    };
    let fd = finite_diff(&mut f, &flat, FD_STEP)?;
    Ok(ComponentCheck {
        name: "end_to_end_model".into(),
        max_err: max_mixed_err(&analytic, &fd),
        tolerance: CLASSICAL_TOL,
    })
}

/// Full gradient-check report: classical operations, both circuit
/// families at 3 qubits, and the end-to-end model. `break_gradient`
/// deliberately corrupts one result to prove the checker can fail.
pub fn run_all(seed: u64, draws: usize, break_gradient: bool) -> Result<Vec<ComponentCheck>> {
    let mut checks = check_classical_ops(seed)?;
    let quantum = quantum_suite(3, 2, draws.max(1), seed ^ 0xABCD)?;
    checks.push(ComponentCheck {
        name: "circuit_norms".into(),
        max_err: quantum.norm_dev,
        tolerance: 1e-10,
    });
    checks.push(ComponentCheck {
        name: "circuit_readout_range".into(),
        max_err: quantum.z_excess,
        tolerance: 1e-12,
    });
    checks.push(ComponentCheck {
        name: "circuit_parameter_shift".into(),
        max_err: quantum.shift_err,
        tolerance: SHIFT_TOL,
    });
    checks.push(ComponentCheck {
        name: "circuit_finite_diff".into(),
        max_err: quantum.fd_err,
        tolerance: CLASSICAL_TOL,
    });
    checks.push(check_end_to_end()?);
    if break_gradient {
        if let Some(first) = checks.first_mut() {
            first.max_err += 1.0;
        }
    }
    Ok(checks)
}
