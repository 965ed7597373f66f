//! The full network: named parameter set, tape binding, and the batch
//! forward pass from city graph to destination logits.
//!
//! The spatial branch runs once per batch (the city graph and its global
//! vector are shared by every sample); the temporal branch and the
//! prediction head run per sample on the same tape, so one backward pass
//! reaches every trainable tensor including the circuit angles.

use std::collections::HashMap;
use std::rc::Rc;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::config::ModelConfig;
use crate::error::{Error, Result};
use crate::graph::{diffpool_apply, diffpool_assign, gcn_stack, GcnLayerVars};
use crate::quantum::{
    qgcn_circuit, qgcn_forward, qpool_circuit, qpool_forward, Circuit, QgcnVars, QpoolVars,
};
use crate::tape::Var;
use crate::temporal::{
    fuse_features, sample_rng, tcn_forward, StepInputs, TcnBlockVars, TemporalVars,
};
use crate::{GeoPoint, Tape, Tensor};

/// Data-dependent sizes the architecture is instantiated for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    /// Graph nodes (occupied grid cells); also the number of output classes.
    pub n_nodes: usize,
    /// Taxi vocabulary size.
    pub n_taxis: usize,
}

/// One encoded training sample with vocabulary-level indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodedSample {
    /// Stable sample id; seeds the per-sample dropout stream.
    pub id: usize,
    pub taxi: usize,
    pub nodes: Vec<usize>,
    pub bocs: Vec<Vec<f64>>,
    pub hours: Vec<usize>,
    pub weekdays: Vec<usize>,
    pub daytypes: Vec<usize>,
    pub target_node: usize,
    pub target_coords: GeoPoint,
}

/// Ordered, named parameter tensors. The order is the canonical
/// checkpoint order and also the optimizer slot order.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSet {
    entries: Vec<(String, Tensor)>,
    by_name: HashMap<String, usize>,
}

impl ParamSet {
    fn new(entries: Vec<(String, Tensor)>) -> Self {
        let by_name = entries
            .iter()
            .enumerate()
            .map(|(i, (name, _))| (name.clone(), i))
            .collect();
        Self { entries, by_name }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(n, _)| n.as_str())
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.by_name.get(name).map(|&i| &self.entries[i].1)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.by_name
            .get(name)
            .copied()
            .map(move |i| &mut self.entries[i].1)
    }

    pub fn tensors(&self) -> impl Iterator<Item = &Tensor> {
        self.entries.iter().map(|(_, t)| t)
    }

    pub fn entries(&self) -> &[(String, Tensor)] {
        &self.entries
    }

    pub fn shapes(&self) -> Vec<Vec<usize>> {
        self.entries
            .iter()
            .map(|(_, t)| t.shape().to_vec())
            .collect()
    }

    pub fn tensors_cloned(&self) -> Vec<Tensor> {
        self.entries.iter().map(|(_, t)| t.clone()).collect()
    }

    pub fn set_all(&mut self, tensors: Vec<Tensor>) -> Result<()> {
        if tensors.len() != self.entries.len() {
            return Err(Error::Shape(format!(
                "{} tensors for {} parameters",
                tensors.len(),
                self.entries.len()
            )));
        }
        for ((_, slot), tensor) in self.entries.iter_mut().zip(tensors) {
            if slot.shape() != tensor.shape() {
                return Err(Error::Shape("parameter shape changed".into()));
            }
            *slot = tensor;
        }
        Ok(())
    }

    pub fn all_finite(&self) -> bool {
        self.entries.iter().all(|(_, t)| t.all_finite())
    }
}

/// Parameter variables registered on a tape, in `ParamSet` order.
pub struct BoundParams {
    vars: Vec<Var>,
    by_name: HashMap<String, usize>,
}

impl BoundParams {
    pub fn var(&self, name: &str) -> Result<Var> {
        self.by_name
            .get(name)
            .map(|&i| self.vars[i])
            .ok_or_else(|| Error::Contract(format!("unknown parameter {name}")))
    }

    pub fn vars(&self) -> &[Var] {
        &self.vars
    }
}

/// The network: configuration, instantiated circuit templates, and the
/// parameter naming scheme.
pub struct Model {
    pub config: ModelConfig,
    pub dims: ModelDims,
    qgcn: Rc<Circuit>,
    qpool: Rc<Circuit>,
}

impl Model {
    pub fn new(config: ModelConfig, dims: ModelDims) -> Result<Self> {
        config.validate()?;
        if dims.n_nodes == 0 || dims.n_taxis == 0 {
            return Err(Error::Config(
                "model needs at least one node and one taxi".into(),
            ));
        }
        let (qgcn, _) = qgcn_circuit(config.arch.n_qubits, config.arch.qgcn_layers)?;
        let (qpool, _) = qpool_circuit(config.arch.n_qubits, config.arch.qpool_layers)?;
        Ok(Self {
            config,
            dims,
            qgcn: Rc::new(qgcn),
            qpool: Rc::new(qpool),
        })
    }

    pub fn qgcn_circuit(&self) -> &Rc<Circuit> {
        &self.qgcn
    }

    pub fn qpool_circuit(&self) -> &Rc<Circuit> {
        &self.qpool
    }

    fn pair_count(&self) -> usize {
        let n = self.config.arch.n_qubits;
        n * (n - 1) / 2
    }

    /// Canonical parameter names and shapes, in checkpoint order.
    pub fn param_specs(&self) -> Vec<(String, Vec<usize>)> {
        let a = &self.config.arch;
        let n = self.dims.n_nodes;
        let mut specs: Vec<(String, Vec<usize>)> = Vec::new();
        specs.push(("gcn.node_emb".into(), vec![n, a.d_in]));
        for i in 0..a.gcn_layers {
            let d_in = if i == 0 { a.d_in } else { a.d_hidden };
            specs.push((format!("gcn.{i}.W"), vec![d_in, a.d_hidden]));
            if d_in != a.d_hidden {
                specs.push((format!("gcn.{i}.down"), vec![d_in, a.d_hidden]));
            }
        }
        specs.push(("pool.assign.W".into(), vec![a.d_hidden, a.n_qubits]));
        specs.push(("qgcn.proj".into(), vec![a.d_hidden, 1]));
        for l in 0..a.qgcn_layers {
            specs.push((format!("qgcn.{l}.rot"), vec![a.n_qubits, 3]));
            specs.push((format!("qgcn.{l}.ent"), vec![self.pair_count()]));
        }
        specs.push(("qgcn.out_W".into(), vec![1, a.d_hidden]));
        specs.push(("qpool.embed_W".into(), vec![a.d_hidden, a.n_qubits]));
        specs.push(("qpool.raw_W".into(), vec![a.d_hidden, a.d_global]));
        for l in 0..a.qpool_layers {
            specs.push((format!("qpool.{l}.phi"), vec![a.n_qubits, 3]));
        }
        specs.push(("qpool.mlp.W1".into(), vec![a.n_qubits, a.d_mlp]));
        specs.push(("qpool.out_W".into(), vec![a.d_mlp, a.d_global]));
        specs.push(("cls_pool.W".into(), vec![a.d_hidden, a.d_global]));
        specs.push(("emb.grid".into(), vec![n, a.d_grid_emb]));
        specs.push(("emb.taxi".into(), vec![self.dims.n_taxis, a.d_taxi_emb]));
        specs.push(("emb.hour".into(), vec![24, a.d_hour_emb]));
        specs.push(("emb.weekday".into(), vec![7, a.d_weekday_emb]));
        specs.push(("emb.daytype".into(), vec![2, a.d_daytype_emb]));
        specs.push(("fuse.W".into(), vec![a.d_grid_emb + a.d_global, a.d_fused]));
        let d_feature = self.feature_width();
        for (l, _) in a.tcn_dilations.iter().enumerate() {
            let c_in = if l == 0 { d_feature } else { a.d_tcn };
            specs.push((format!("tcn.{l}.conv1"), vec![a.d_tcn, c_in, a.tcn_kernel]));
            specs.push((
                format!("tcn.{l}.conv2"),
                vec![a.d_tcn, a.d_tcn, a.tcn_kernel],
            ));
            if c_in != a.d_tcn {
                specs.push((format!("tcn.{l}.down"), vec![a.d_tcn, c_in]));
            }
        }
        specs.push(("head.fc".into(), vec![a.d_tcn, n]));
        specs
    }

    pub fn feature_width(&self) -> usize {
        let a = &self.config.arch;
        crate::temporal::feature_width(
            a.d_fused,
            self.config.data.k_poi,
            a.d_taxi_emb,
            a.d_hour_emb,
            a.d_weekday_emb,
            a.d_daytype_emb,
        )
    }

    /// Seeded parameter initialization.
    ///
    /// Graph-convolution weights draw uniformly from
    /// `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`; quantum angles start near
    /// identity in `[-0.1, 0.1]`; temporal convolutions use He-uniform
    /// bounds and the remaining linear maps Glorot-uniform bounds, keeping
    /// feature magnitudes stable through the ReLU stack; embedding tables
    /// scale with their row width. The prediction head starts at zero so
    /// the untrained model predicts the uniform distribution (and thus the
    /// center-of-mass coordinates) rather than arbitrary noise.
    pub fn init_params(&self) -> ParamSet {
        let mut rng = ChaCha20Rng::seed_from_u64(self.config.train.seed);
        let entries = self
            .param_specs()
            .into_iter()
            .map(|(name, shape)| {
                let tensor = if name == "head.fc" {
                    Tensor::zeros(&shape)
                } else if name.starts_with("qgcn.")
                    && (name.ends_with(".rot") || name.ends_with(".ent"))
                    || name.starts_with("qpool.") && name.ends_with(".phi")
                {
                    Tensor::rand_uniform(&mut rng, &shape, -0.1, 0.1)
                } else {
                    let bound = match shape.len() {
                        // He-uniform for the ReLU conv stack.
                        3 => (6.0 / (shape[1] * shape[2]) as f64).sqrt(),
                        2 if name.starts_with("emb.") || name == "gcn.node_emb" => {
                            1.0 / (shape[1] as f64).sqrt()
                        }
                        // Spec-pinned scale for the graph-convolution maps.
                        2 if name.starts_with("gcn.") || name == "pool.assign.W" => {
                            1.0 / (shape[0] as f64).sqrt()
                        }
                        // Glorot-uniform elsewhere.
                        2 => (6.0 / (shape[0] + shape[1]) as f64).sqrt(),
                        _ => 1.0 / (shape[0] as f64).sqrt(),
                    };
                    Tensor::rand_uniform(&mut rng, &shape, -bound, bound)
                };
                (name, tensor)
            })
            .collect();
        ParamSet::new(entries)
    }

    /// Restore a parameter set from named tensors, validating names and
    /// shapes against this model's layout.
    pub fn params_from_named(&self, named: &[(String, Tensor)]) -> Result<ParamSet> {
        let specs = self.param_specs();
        if named.len() != specs.len() {
            return Err(Error::Version(format!(
                "checkpoint has {} parameters, model expects {}",
                named.len(),
                specs.len()
            )));
        }
        let by_name: HashMap<&str, &Tensor> = named.iter().map(|(n, t)| (n.as_str(), t)).collect();
        let mut entries = Vec::with_capacity(specs.len());
        for (name, shape) in specs {
            let tensor = by_name
                .get(name.as_str())
                .ok_or_else(|| Error::Version(format!("checkpoint is missing parameter {name}")))?;
            if tensor.shape() != shape.as_slice() {
                return Err(Error::Version(format!(
                    "parameter {name} has shape {:?}, model expects {:?}",
                    tensor.shape(),
                    shape
                )));
            }
            entries.push((name, (*tensor).clone()));
        }
        Ok(ParamSet::new(entries))
    }

    /// Register every parameter as a trainable leaf on the tape.
    pub fn bind(&self, tape: &Tape, params: &ParamSet) -> BoundParams {
        let vars: Vec<Var> = params.tensors().map(|t| tape.leaf(t.clone())).collect();
        let by_name = params
            .names()
            .enumerate()
            .map(|(i, n)| (n.to_string(), i))
            .collect();
        BoundParams { vars, by_name }
    }

    fn gcn_layer_vars(&self, bound: &BoundParams) -> Result<Vec<GcnLayerVars>> {
        (0..self.config.arch.gcn_layers)
            .map(|i| {
                let w = bound.var(&format!("gcn.{i}.W"))?;
                let down = bound.var(&format!("gcn.{i}.down")).ok();
                Ok(GcnLayerVars { w, down })
            })
            .collect()
    }

    /// Spatial branch: GCN stack, differentiable pooling, and either the
    /// quantum branch or its classical substitute, producing the global
    /// spatial vector shared by every sample.
    pub fn global_vector(&self, tape: &Tape, bound: &BoundParams, a_hat: &Tensor) -> Result<Var> {
        let n = self.dims.n_nodes;
        if a_hat.shape() != [n, n] {
            return Err(Error::Shape(format!(
                "normalized adjacency must be [{n}, {n}], got {:?}",
                a_hat.shape()
            )));
        }
        let a_hat = tape.constant(a_hat.clone());
        let x0 = bound.var("gcn.node_emb")?;
        let x_gcn = gcn_stack(tape, a_hat, x0, &self.gcn_layer_vars(bound)?)?;

        if !self.config.ablation.use_qgcn {
            // Classical substitute: mean-pool node features, map to the
            // global width.
            let mean = tape.mean_axis0(x_gcn)?;
            let row = tape.reshape(mean, &[1, self.config.arch.d_hidden])?;
            let v = tape.matmul(row, bound.var("cls_pool.W")?)?;
            return tape.reshape(v, &[self.config.arch.d_global]);
        }

        let s = diffpool_assign(tape, a_hat, x_gcn, bound.var("pool.assign.W")?)?;
        let (x_pooled, a_pooled) = diffpool_apply(tape, s, x_gcn, a_hat)?;

        let qgcn_vars = QgcnVars {
            rot: (0..self.config.arch.qgcn_layers)
                .map(|l| bound.var(&format!("qgcn.{l}.rot")))
                .collect::<Result<_>>()?,
            ent: (0..self.config.arch.qgcn_layers)
                .map(|l| bound.var(&format!("qgcn.{l}.ent")))
                .collect::<Result<_>>()?,
            proj: bound.var("qgcn.proj")?,
            out_w: bound.var("qgcn.out_W")?,
        };
        let x_qgcn = qgcn_forward(tape, x_pooled, a_pooled, &qgcn_vars, &self.qgcn)?;

        let qpool_vars = QpoolVars {
            phi: (0..self.config.arch.qpool_layers)
                .map(|l| bound.var(&format!("qpool.{l}.phi")))
                .collect::<Result<_>>()?,
            embed_w: bound.var("qpool.embed_W")?,
            raw_w: bound.var("qpool.raw_W")?,
            mlp_w1: bound.var("qpool.mlp.W1")?,
            out_w: bound.var("qpool.out_W")?,
        };
        qpool_forward(tape, x_qgcn, &qpool_vars, &self.qpool)
    }

    fn temporal_vars(&self, bound: &BoundParams) -> Result<TemporalVars> {
        Ok(TemporalVars {
            emb_grid: bound.var("emb.grid")?,
            emb_taxi: bound.var("emb.taxi")?,
            emb_hour: bound.var("emb.hour")?,
            emb_weekday: bound.var("emb.weekday")?,
            emb_daytype: bound.var("emb.daytype")?,
            fuse_w: bound.var("fuse.W")?,
        })
    }

    fn tcn_blocks(&self, bound: &BoundParams) -> Result<Vec<TcnBlockVars>> {
        self.config
            .arch
            .tcn_dilations
            .iter()
            .enumerate()
            .map(|(l, &dilation)| {
                Ok(TcnBlockVars {
                    conv1: bound.var(&format!("tcn.{l}.conv1"))?,
                    conv2: bound.var(&format!("tcn.{l}.conv2"))?,
                    down: bound.var(&format!("tcn.{l}.down")).ok(),
                    dilation,
                    dropout: self.config.arch.dropout,
                })
            })
            .collect()
    }

    /// Temporal branch for one sample: fused sequence features through the
    /// TCN to the last-step feature vector.
    pub fn sequence_feature(
        &self,
        tape: &Tape,
        bound: &BoundParams,
        v_global: Var,
        sample: &EncodedSample,
        training: bool,
        epoch: usize,
    ) -> Result<Var> {
        if sample.nodes.len() != self.config.data.seq_len {
            return Err(Error::Shape(format!(
                "sample {} has {} steps, config expects {}",
                sample.id,
                sample.nodes.len(),
                self.config.data.seq_len
            )));
        }
        let zero_boc;
        let bocs: &[Vec<f64>] = if self.config.ablation.use_boc {
            &sample.bocs
        } else {
            zero_boc = vec![vec![0.0; self.config.data.k_poi]; sample.bocs.len()];
            &zero_boc
        };
        let inputs = StepInputs {
            grid_nodes: &sample.nodes,
            bocs,
            taxi: sample.taxi,
            hours: &sample.hours,
            weekdays: &sample.weekdays,
            daytypes: &sample.daytypes,
        };
        let f_seq = fuse_features(tape, &inputs, &self.temporal_vars(bound)?, v_global)?;
        let mut rng = sample_rng(self.config.train.seed, epoch, sample.id);
        tcn_forward(tape, f_seq, &self.tcn_blocks(bound)?, training, &mut rng)
    }

    /// Full batch forward: returns the mean cross-entropy loss and the
    /// `[B, n_nodes]` logit matrix.
    pub fn batch_forward(
        &self,
        tape: &Tape,
        bound: &BoundParams,
        a_hat: &Tensor,
        samples: &[&EncodedSample],
        training: bool,
        epoch: usize,
    ) -> Result<(Var, Var)> {
        if samples.is_empty() {
            return Err(Error::Data("batch must contain at least one sample".into()));
        }
        let v_global = self.global_vector(tape, bound, a_hat)?;
        let mut rows = Vec::with_capacity(samples.len());
        let mut targets = Vec::with_capacity(samples.len());
        for sample in samples {
            rows.push(self.sequence_feature(tape, bound, v_global, sample, training, epoch)?);
            targets.push(sample.target_node);
        }
        let features = tape.stack_rows(&rows)?;
        let logits = tape.matmul(features, bound.var("head.fc")?)?;
        let loss = tape.cross_entropy(logits, &targets)?;
        Ok((loss, logits))
    }
}
