//! The numeric core instantiates at `f32` as well as the default `f64`.

use qdest::geo::{haversine_distance, GeoPoint};
use qdest::quantum::{qgcn_circuit, Axis, StateVector};
use qdest::tape::Tape;
use qdest::tensor::Tensor;

#[test]
fn haversine_works_in_single_precision() {
    let a = GeoPoint::<f32> { lon: 0.0, lat: 0.0 };
    let b = GeoPoint::<f32> { lon: 1.0, lat: 0.0 };
    let d = haversine_distance(&a, &b);
    assert!((d - 111.195).abs() < 1e-2, "got {d}");
}

#[test]
fn tape_backward_works_in_single_precision() {
    let tape: Tape<f32> = Tape::new();
    let x = tape.leaf(Tensor::from_slice(&[1.0f32, -2.0, 3.0]));
    let loss = tape.sum(tape.relu(x));
    let grads = tape.backward(loss).unwrap();
    assert_eq!(grads.get(x).unwrap().data(), &[1.0f32, 0.0, 1.0]);
}

#[test]
fn statevector_and_circuits_work_in_single_precision() {
    let mut s: StateVector<f32> = StateVector::zero_state(2).unwrap();
    s.apply_rotation(Axis::Y, std::f32::consts::PI, 0).unwrap();
    assert!((s.pauli_z_expectation(0).unwrap() + 1.0).abs() < 1e-6);

    let (circuit, layout) = qgcn_circuit(2, 1).unwrap();
    let angles: Vec<f32> = (0..layout.total).map(|i| 0.1 * i as f32).collect();
    let (state, norms) = circuit.simulate_with_norms(&angles).unwrap();
    for n in norms {
        assert!((n - 1.0).abs() < 1e-5);
    }
    for z in state.z_readout() {
        assert!(z.abs() <= 1.0 + 1e-6);
    }
}
