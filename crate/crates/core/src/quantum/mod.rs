//! Deterministic statevector simulation of the parameterized circuits,
//! with exact gradients through the simulation.

mod circuit;
mod layers;
mod state;

pub use circuit::{qgcn_circuit, qpool_circuit, qubit_pairs, AngleLayout, Circuit, Gate};
pub use layers::{qgcn_forward, qpool_forward, QgcnVars, QpoolVars};
pub use state::{angle_encode, Axis, StateVector};
