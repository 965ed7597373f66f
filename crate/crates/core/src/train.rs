//! Training loop, evaluation, and the four-row ablation harness.

use std::collections::HashMap;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::checkpoint::Checkpoint;
use crate::config::ModelConfig;
use crate::data::{DatasetSplit, TripSequence};
use crate::error::{Error, Result};
use crate::geo::{normalize_adjacency, GridId};
use crate::model::{EncodedSample, Model, ModelDims, ParamSet};
use crate::optim::AdamState;
use crate::prediction::{eds, probs_from_centers, rmse};
use crate::{Adjacency, GeoPoint, GridSpec, Tape, Tensor};

/// The city graph a model is trained against: occupied cells as nodes,
/// their centers, the normalized adjacency, and the taxi vocabulary.
#[derive(Debug, Clone)]
pub struct CityContext {
    pub grid: GridSpec,
    pub occupied: Vec<GridId>,
    pub centers: Vec<GeoPoint>,
    pub a_hat: Tensor,
    node_of_cell: HashMap<usize, usize>,
    taxi_of_id: HashMap<u64, usize>,
    pub taxi_ids: Vec<u64>,
}

impl CityContext {
    /// Build the context from preprocess artifacts. `taxi_ids` must cover
    /// every sequence that will be encoded (train, validation, and test).
    pub fn new(
        grid: GridSpec,
        occupied: Vec<GridId>,
        adjacency: &Adjacency,
        mut taxi_ids: Vec<u64>,
    ) -> Result<Self> {
        if occupied.is_empty() {
            return Err(Error::Config(
                "city context needs at least one occupied cell".into(),
            ));
        }
        if adjacency.n != occupied.len() {
            return Err(Error::Shape(format!(
                "adjacency over {} nodes but {} occupied cells",
                adjacency.n,
                occupied.len()
            )));
        }
        taxi_ids.sort_unstable();
        taxi_ids.dedup();
        if taxi_ids.is_empty() {
            return Err(Error::Config("city context needs at least one taxi".into()));
        }
        let centers = occupied
            .iter()
            .map(|&id| grid.center(id))
            .collect::<Result<Vec<_>>>()?;
        let a_hat_adj = normalize_adjacency(adjacency);
        let n = a_hat_adj.n;
        let a_hat = Tensor::new(vec![n, n], a_hat_adj.entries().to_vec())?;
        let node_of_cell = occupied
            .iter()
            .enumerate()
            .map(|(i, id)| (id.0, i))
            .collect();
        let taxi_of_id = taxi_ids.iter().enumerate().map(|(i, &t)| (t, i)).collect();
        Ok(Self {
            grid,
            occupied,
            centers,
            a_hat,
            node_of_cell,
            taxi_of_id,
            taxi_ids,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.occupied.len()
    }

    pub fn dims(&self) -> ModelDims {
        ModelDims {
            n_nodes: self.occupied.len(),
            n_taxis: self.taxi_ids.len(),
        }
    }

    pub fn node_of(&self, cell: GridId) -> Result<usize> {
        self.node_of_cell
            .get(&cell.0)
            .copied()
            .ok_or_else(|| Error::Index(format!("cell {} is not a graph node", cell.0)))
    }

    /// Encode sequences into vocabulary-level samples. Ids are assigned
    /// by `id_base + position`, so distinct datasets keep distinct
    /// dropout streams.
    pub fn encode(&self, sequences: &[TripSequence], id_base: usize) -> Result<Vec<EncodedSample>> {
        sequences
            .iter()
            .enumerate()
            .map(|(i, seq)| {
                let taxi = *self
                    .taxi_of_id
                    .get(&seq.taxi_id)
                    .ok_or_else(|| Error::Index(format!("unknown taxi id {}", seq.taxi_id)))?;
                Ok(EncodedSample {
                    id: id_base + i,
                    taxi,
                    nodes: seq
                        .history
                        .iter()
                        .map(|s| self.node_of(s.grid))
                        .collect::<Result<_>>()?,
                    bocs: seq.history.iter().map(|s| s.boc.clone()).collect(),
                    hours: seq.history.iter().map(|s| s.hour).collect(),
                    weekdays: seq.history.iter().map(|s| s.weekday).collect(),
                    daytypes: seq.history.iter().map(|s| s.daytype).collect(),
                    target_node: self.node_of(seq.target_grid)?,
                    target_coords: seq.target_coords,
                })
            })
            .collect()
    }
}

/// Evaluation metrics over one dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub eds_km: f64,
    pub rmse_km: f64,
    pub top1_accuracy: f64,
    pub mean_loss: f64,
}

/// One epoch row of the training report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_eds_km: f64,
    pub val_rmse_km: f64,
}

/// Full training record. The wall clock is informational only and is not
/// serialized, keeping report artifacts byte-identical across reruns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochStats>,
    pub best_epoch: Option<usize>,
    pub initial_val_eds_km: f64,
    pub initial_val_loss: f64,
    pub stopped_early: bool,
    #[serde(skip)]
    pub wall_clock_secs: f64,
}

impl TrainReport {
    /// Per-epoch curves as delimited text for plotting.
    pub fn curves_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,val_loss,val_eds_km,val_rmse_km\n");
        for row in &self.epochs {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                row.epoch, row.train_loss, row.val_loss, row.val_eds_km, row.val_rmse_km
            ));
        }
        out
    }
}

fn batch_refs<'a>(samples: &'a [EncodedSample], idx: &[usize]) -> Vec<&'a EncodedSample> {
    idx.iter().map(|&i| &samples[i]).collect()
}

/// Evaluate parameters on a dataset with dropout disabled.
pub fn evaluate_params(
    model: &Model,
    params: &ParamSet,
    ctx: &CityContext,
    samples: &[EncodedSample],
) -> Result<Metrics> {
    let (metrics, _) = evaluate_with_rows(model, params, ctx, samples)?;
    Ok(metrics)
}

/// Evaluate and also return per-sample prediction rows for dumping.
pub fn evaluate_with_rows(
    model: &Model,
    params: &ParamSet,
    ctx: &CityContext,
    samples: &[EncodedSample],
) -> Result<(Metrics, Vec<crate::artifacts::DumpRow>)> {
    if samples.is_empty() {
        return Err(Error::Data("evaluation needs at least one sample".into()));
    }
    let batch_size = model.config.train.batch_size.max(1);
    let mut preds = Vec::with_capacity(samples.len());
    let mut truths = Vec::with_capacity(samples.len());
    let mut rows = Vec::with_capacity(samples.len());
    let mut hits = 0usize;
    let mut loss_total = 0.0f64;
    for chunk in samples.chunks(batch_size) {
        let tape = Tape::new();
        let bound = model.bind(&tape, params);
        let refs: Vec<&EncodedSample> = chunk.iter().collect();
        let (loss, logits) = model.batch_forward(&tape, &bound, &ctx.a_hat, &refs, false, 0)?;
        loss_total += tape.value(loss).item()? * chunk.len() as f64;
        let logit_values = tape.value(logits);
        for (i, sample) in chunk.iter().enumerate() {
            let row = logit_values.row_vec(i)?;
            let probs = row.softmax(0)?;
            let output = probs_from_centers(probs.data(), &ctx.centers)?;
            if output.argmax_grid == sample.target_node {
                hits += 1;
            }
            preds.push(output.coords);
            truths.push(sample.target_coords);
            rows.push(crate::artifacts::DumpRow {
                sample_id: sample.id,
                argmax_grid: output.argmax_grid,
                pred: output.coords,
                truth: sample.target_coords,
            });
        }
    }
    let metrics = Metrics {
        eds_km: eds(&preds, &truths)?,
        rmse_km: rmse(&preds, &truths)?,
        top1_accuracy: hits as f64 / samples.len() as f64,
        mean_loss: loss_total / samples.len() as f64,
    };
    Ok((metrics, rows))
}

/// Mini-batch Adam training with per-epoch validation.
///
/// The returned checkpoint holds the parameters of the epoch with the
/// lowest validation EDS (ties keep the earlier epoch); with zero epochs
/// it holds the initial parameters. Fully deterministic for a fixed
/// configuration and seed.
pub fn train(
    config: &ModelConfig,
    split: &DatasetSplit,
    ctx: &CityContext,
) -> Result<(Checkpoint, TrainReport)> {
    if split.train.is_empty() || split.val.is_empty() {
        return Err(Error::Data(
            "training needs nonempty train and validation sets".into(),
        ));
    }
    let started = Instant::now();
    let model = Model::new(config.clone(), ctx.dims())?;
    let mut params = model.init_params();

    let train_set = ctx.encode(&split.train, 0)?;
    let val_set = ctx.encode(&split.val, split.train.len())?;

    let initial = evaluate_params(&model, &params, ctx, &val_set)?;
    let mut best_params = params.clone();
    let mut best_eds = initial.eds_km;
    let mut best_epoch: Option<usize> = None;
    let mut last_improvement: Option<usize> = None;
    let mut stopped_early = false;

    let mut adam = AdamState::new(config.train.learning_rate, &params.shapes());
    let mut shuffle_rng = ChaCha20Rng::seed_from_u64(config.train.seed ^ 0x5F37_59DF);
    let mut epochs = Vec::with_capacity(config.train.epochs);

    for epoch in 0..config.train.epochs {
        let mut order: Vec<usize> = (0..train_set.len()).collect();
        for i in (1..order.len()).rev() {
            let j = shuffle_rng.gen_range(0..=i);
            order.swap(i, j);
        }
        let mut train_loss_total = 0.0f64;
        for batch_idx in order.chunks(config.train.batch_size) {
            let refs = batch_refs(&train_set, batch_idx);
            let tape = Tape::new();
            let bound = model.bind(&tape, &params);
            let (loss, _) = model.batch_forward(&tape, &bound, &ctx.a_hat, &refs, true, epoch)?;
            let loss_value = tape.value(loss).item()?;
            if !loss_value.is_finite() {
                return Err(Error::Numeric(format!(
                    "training diverged: loss {loss_value} at epoch {epoch}"
                )));
            }
            train_loss_total += loss_value * refs.len() as f64;
            let grads = tape.backward(loss)?;
            let grad_tensors: Vec<Tensor> = bound
                .vars()
                .iter()
                .map(|&v| grads.get(v).cloned().expect("leaf gradient materialized"))
                .collect();
            let mut tensors = params.tensors_cloned();
            adam.step(&mut tensors, &grad_tensors)?;
            params.set_all(tensors)?;
            if !params.all_finite() {
                return Err(Error::Numeric(format!(
                    "training diverged: non-finite parameter at epoch {epoch}"
                )));
            }
        }
        let train_loss = train_loss_total / train_set.len() as f64;
        let val = evaluate_params(&model, &params, ctx, &val_set)?;
        epochs.push(EpochStats {
            epoch,
            train_loss,
            val_loss: val.mean_loss,
            val_eds_km: val.eds_km,
            val_rmse_km: val.rmse_km,
        });
        if val.eds_km < best_eds {
            best_eds = val.eds_km;
            best_params = params.clone();
            best_epoch = Some(epoch);
            last_improvement = Some(epoch);
        }
        if let Some(patience) = config.train.patience {
            let reference = last_improvement.map_or(epoch + 1, |e| epoch - e);
            if reference >= patience {
                stopped_early = true;
                break;
            }
        }
    }

    let report = TrainReport {
        epochs,
        best_epoch,
        initial_val_eds_km: initial.eds_km,
        initial_val_loss: initial.mean_loss,
        stopped_early,
        wall_clock_secs: started.elapsed().as_secs_f64(),
    };
    let checkpoint = Checkpoint::from_params(config, ctx.dims(), &best_params);
    Ok((checkpoint, report))
}

/// One row of the ablation table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub label: String,
    pub use_boc: bool,
    pub use_qgcn: bool,
    pub eds_km: f64,
    pub rmse_km: f64,
    pub top1_accuracy: f64,
    pub config: ModelConfig,
}

/// Ablation results over the four component configurations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationTable {
    pub rows: Vec<AblationRow>,
}

impl AblationTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("config,eds_km,rmse_km\n");
        for row in &self.rows {
            out.push_str(&format!("{},{},{}\n", row.label, row.eds_km, row.rmse_km));
        }
        out
    }
}

/// The four-configuration matrix: (use_boc, use_qgcn) over
/// A=(false,false), B=(true,false), C=(false,true), D=(true,true).
/// Each row trains from the same seed and is scored on the test set.
pub fn ablate(
    base_config: &ModelConfig,
    split: &DatasetSplit,
    ctx: &CityContext,
) -> Result<AblationTable> {
    if split.test.is_empty() {
        return Err(Error::Data("ablation needs a nonempty test set".into()));
    }
    let matrix = [
        ("A", false, false),
        ("B", true, false),
        ("C", false, true),
        ("D", true, true),
    ];
    let mut rows = Vec::with_capacity(matrix.len());
    for (label, use_boc, use_qgcn) in matrix {
        let mut config = base_config.clone();
        config.ablation.use_boc = use_boc;
        config.ablation.use_qgcn = use_qgcn;
        let (checkpoint, _) = train(&config, split, ctx)?;
        let (model, params) = checkpoint.restore()?;
        let test_set = ctx.encode(&split.test, split.train.len() + split.val.len())?;
        let metrics = evaluate_params(&model, &params, ctx, &test_set)?;
        rows.push(AblationRow {
            label: label.to_string(),
            use_boc,
            use_qgcn,
            eds_km: metrics.eds_km,
            rmse_km: metrics.rmse_km,
            top1_accuracy: metrics.top1_accuracy,
            config,
        });
    }
    Ok(AblationTable { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{
        build_sequences, generate_synthetic_city, occupied_cells, split_by_taxi, SyntheticSpec,
    };
    use crate::geo::{boc_table, build_adjacency};

    pub(crate) fn tiny_city() -> (ModelConfig, DatasetSplit, CityContext) {
        let spec = SyntheticSpec {
            n_rows: 3,
            n_cols: 3,
            n_taxis: 6,
            trips_per_taxi: 12,
            seed: 9,
            k_poi: 3,
        };
        let (grid, pois, trips) = generate_synthetic_city(&spec).unwrap();
        let mut config = crate::model::tests::tiny_config();
        config.grid.bbox = grid.bbox;
        config.grid.cell_size_m = grid.cell_size_m;
        config.data.k_poi = spec.k_poi;
        config.train.batch_size = 8;
        config.train.learning_rate = 1e-3;
        config.train.epochs = 2;

        let boc = boc_table(&pois, &grid, spec.k_poi).unwrap();
        let sequences = build_sequences(
            &trips,
            &grid,
            &boc,
            config.data.gap_hours,
            config.data.seq_len,
            false,
        )
        .unwrap();
        let split =
            split_by_taxi(&sequences, config.data.split_fractions, config.train.seed).unwrap();
        let occupied = occupied_cells(&trips, &grid);
        let adjacency = build_adjacency(&grid, &occupied, config.grid.tau_km).unwrap();
        let taxi_ids: Vec<u64> = sequences.iter().map(|s| s.taxi_id).collect();
        let ctx = CityContext::new(grid, occupied, &adjacency, taxi_ids).unwrap();
        (config, split, ctx)
    }

    #[test]
    fn zero_epochs_returns_initial_parameters() {
        let (mut config, split, ctx) = tiny_city();
        config.train.epochs = 0;
        let (checkpoint, report) = train(&config, &split, &ctx).unwrap();
        assert!(report.epochs.is_empty());
        assert_eq!(report.best_epoch, None);
        let model = Model::new(config, ctx.dims()).unwrap();
        let (_, params) = checkpoint.restore().unwrap();
        assert_eq!(params, model.init_params());
    }

    #[test]
    fn training_is_deterministic() {
        let (config, split, ctx) = tiny_city();
        let (ckpt_a, report_a) = train(&config, &split, &ctx).unwrap();
        let (ckpt_b, report_b) = train(&config, &split, &ctx).unwrap();
        assert_eq!(ckpt_a, ckpt_b);
        assert_eq!(report_a.epochs, report_b.epochs);
    }

    #[test]
    fn best_epoch_matches_curve_minimum() {
        let (config, split, ctx) = tiny_city();
        let (checkpoint, report) = train(&config, &split, &ctx).unwrap();
        let min_eds = report
            .epochs
            .iter()
            .map(|e| e.val_eds_km)
            .fold(f64::INFINITY, f64::min)
            .min(report.initial_val_eds_km);
        let (model, params) = checkpoint.restore().unwrap();
        let val_set = ctx.encode(&split.val, split.train.len()).unwrap();
        let metrics = evaluate_params(&model, &params, &ctx, &val_set).unwrap();
        assert!((metrics.eds_km - min_eds).abs() < 1e-12);
    }

    #[test]
    fn evaluate_rejects_empty_dataset() {
        let (config, split, ctx) = tiny_city();
        let model = Model::new(config, ctx.dims()).unwrap();
        let params = model.init_params();
        assert!(matches!(
            evaluate_params(&model, &params, &ctx, &[]),
            Err(Error::Data(_))
        ));
        drop(split);
    }

    #[test]
    fn evaluate_is_deterministic() {
        let (config, split, ctx) = tiny_city();
        let model = Model::new(config, ctx.dims()).unwrap();
        let params = model.init_params();
        let val = ctx.encode(&split.val, 0).unwrap();
        let a = evaluate_params(&model, &params, &ctx, &val).unwrap();
        let b = evaluate_params(&model, &params, &ctx, &val).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn ablation_emits_four_distinct_flag_rows() {
        let (mut config, split, ctx) = tiny_city();
        config.train.epochs = 1;
        let table = ablate(&config, &split, &ctx).unwrap();
        assert_eq!(table.rows.len(), 4);
        let labels: Vec<&str> = table.rows.iter().map(|r| r.label.as_str()).collect();
        assert_eq!(labels, vec!["A", "B", "C", "D"]);
        let flags: Vec<(bool, bool)> = table.rows.iter().map(|r| (r.use_boc, r.use_qgcn)).collect();
        assert_eq!(
            flags,
            vec![(false, false), (true, false), (false, true), (true, true)]
        );
        // Rows differ from the base config only in the two flags.
        for row in &table.rows {
            let mut expected = config.clone();
            expected.ablation.use_boc = row.use_boc;
            expected.ablation.use_qgcn = row.use_qgcn;
            assert_eq!(row.config, expected);
        }
        let csv = table.to_csv();
        assert!(csv.starts_with("config,eds_km,rmse_km\n"));
        assert_eq!(csv.lines().count(), 5);
    }
}
