//! Hybrid quantum-classical spatio-temporal network for taxi destination
//! prediction.
//!
//! The crate is organized around a spatial branch (classical graph
//! convolution, differentiable pooling, simulated parameterized quantum
//! circuits), a temporal branch (feature fusion and a dilated causal
//! TCN), and a classification-to-coordinate prediction head, together
//! with the data pipeline, training harness, and ablation runner that
//! drive them. All numeric kernels are generic over the scalar type via
//! [`num::Scalar`]; the aliases below pin the `f64` instantiation used by
//! the pipeline.

pub mod artifacts;
pub mod checkpoint;
pub mod config;
pub mod data;
pub mod error;
pub mod geo;
pub mod gradcheck;
pub mod graph;
pub mod model;
pub mod num;
pub mod optim;
pub mod prediction;
pub mod quantum;
pub mod tape;
pub mod temporal;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};

/// Default scalar type of the training pipeline.
pub type Scalar = f64;

pub type Tensor = tensor::Tensor<Scalar>;
pub type Tape = tape::Tape<Scalar>;
pub type Gradients = tape::Gradients<Scalar>;
pub type AdamState = optim::AdamState<Scalar>;
pub type StateVector = quantum::StateVector<Scalar>;
pub type GeoPoint = geo::GeoPoint<Scalar>;
pub type BBox = geo::BBox<Scalar>;
pub type GridSpec = geo::GridSpec<Scalar>;
pub type Adjacency = geo::Adjacency<Scalar>;
pub type PoiRecord = geo::PoiRecord<Scalar>;
pub type BocVector = geo::BocVector<Scalar>;
pub type PredictionOutput = prediction::PredictionOutput<Scalar>;
