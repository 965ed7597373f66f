//! Temporal fusion branch: per-step feature assembly plus a dilated
//! causal temporal convolutional network over the trip history.

use rand::Rng;

use crate::error::{Error, Result};
use crate::num::Scalar;
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

/// Embedding tables and the fusion map used by [`fuse_features`].
pub struct TemporalVars {
    /// Grid embedding `[n_nodes, d_grid]`.
    pub emb_grid: Var,
    /// Taxi embedding `[n_taxis, d_taxi]`.
    pub emb_taxi: Var,
    /// Hour embedding `[24, d_hour]`.
    pub emb_hour: Var,
    /// Weekday embedding `[7, d_weekday]`.
    pub emb_weekday: Var,
    /// Day-type embedding `[2, d_daytype]`.
    pub emb_daytype: Var,
    /// Fusion of `[E_grid || V_global]` into the graph-aware grid
    /// embedding: `[(d_grid + d_global), d_fused]`.
    pub fuse_w: Var,
}

/// Per-step inputs of one trip sequence. All index fields must be within
/// their vocabularies.
pub struct StepInputs<'a, T> {
    pub grid_nodes: &'a [usize],
    pub bocs: &'a [Vec<T>],
    pub taxi: usize,
    pub hours: &'a [usize],
    pub weekdays: &'a [usize],
    pub daytypes: &'a [usize],
}

impl<T> StepInputs<'_, T> {
    fn len(&self) -> Result<usize> {
        let l = self.grid_nodes.len();
        if self.bocs.len() != l
            || self.hours.len() != l
            || self.weekdays.len() != l
            || self.daytypes.len() != l
        {
            return Err(Error::Shape(
                "step input slices have unequal lengths".into(),
            ));
        }
        if l == 0 {
            return Err(Error::Shape("sequence must have at least one step".into()));
        }
        Ok(l)
    }
}

fn checked_embed<T: Scalar>(tape: &Tape<T>, table: Var, idx: usize, what: &str) -> Result<Var> {
    let rows = tape.shape_of(table)[0];
    if idx >= rows {
        return Err(Error::Index(format!("{what} index {idx} of {rows}")));
    }
    tape.embed_row(table, idx)
}

/// Assemble the `[d_feature, L]` sequence matrix: per step, the fused
/// grid embedding `Linear([E_grid || V_global])` concatenated with the
/// BOC vector and the taxi/hour/weekday/daytype embeddings. `V_global`
/// is the same for every step.
pub fn fuse_features<T: Scalar>(
    tape: &Tape<T>,
    inputs: &StepInputs<'_, T>,
    vars: &TemporalVars,
    v_global: Var,
) -> Result<Var> {
    let len = inputs.len()?;
    let fuse_shape = tape.shape_of(vars.fuse_w);
    let (fuse_in, d_fused) = (fuse_shape[0], fuse_shape[1]);
    let e_taxi = checked_embed(tape, vars.emb_taxi, inputs.taxi, "taxi")?;
    let mut cols = Vec::with_capacity(len);
    for step in 0..len {
        let e_grid = checked_embed(tape, vars.emb_grid, inputs.grid_nodes[step], "grid node")?;
        let stacked = tape.concat(&[e_grid, v_global])?;
        if tape.shape_of(stacked)[0] != fuse_in {
            return Err(Error::Shape(format!(
                "fusion expects {} inputs, got {}",
                fuse_in,
                tape.shape_of(stacked)[0]
            )));
        }
        let fused_row = tape.matmul(tape.reshape(stacked, &[1, fuse_in])?, vars.fuse_w)?;
        let fused = tape.reshape(fused_row, &[d_fused])?;
        let boc = tape.constant(Tensor::from_slice(&inputs.bocs[step]));
        let e_hour = checked_embed(tape, vars.emb_hour, inputs.hours[step], "hour")?;
        let e_weekday = checked_embed(tape, vars.emb_weekday, inputs.weekdays[step], "weekday")?;
        let e_daytype = checked_embed(tape, vars.emb_daytype, inputs.daytypes[step], "day type")?;
        cols.push(tape.concat(&[fused, boc, e_taxi, e_hour, e_weekday, e_daytype])?);
    }
    tape.stack_cols(&cols)
}

/// One TCN residual block: two dilated causal convolutions.
pub struct TcnBlockVars {
    /// `[c_out, c_in, k]`.
    pub conv1: Var,
    /// `[c_out, c_out, k]`.
    pub conv2: Var,
    /// Residual map `[c_out, c_in]`, present exactly when channels differ.
    pub down: Option<Var>,
    pub dilation: usize,
    pub dropout: f64,
}

/// Block forward: `conv -> ReLU -> dropout -> conv -> ReLU -> dropout`,
/// then the residual path (identity or `W_down H`), then ReLU on the sum.
pub fn tcn_block_forward<T: Scalar, R: Rng>(
    tape: &Tape<T>,
    h_prev: Var,
    block: &TcnBlockVars,
    training: bool,
    rng: &mut R,
) -> Result<Var> {
    let c_in = tape.shape_of(h_prev)[0];
    let c_out = tape.shape_of(block.conv1)[0];

    let mut h = tape.conv1d_causal(h_prev, block.conv1, block.dilation)?;
    h = tape.relu(h);
    h = tape.dropout(h, block.dropout, training, rng)?;
    h = tape.conv1d_causal(h, block.conv2, block.dilation)?;
    h = tape.relu(h);
    h = tape.dropout(h, block.dropout, training, rng)?;

    let residual = match (&block.down, c_in == c_out) {
        (None, true) => h_prev,
        (Some(down), false) => tape.matmul(*down, h_prev)?,
        (None, false) => {
            return Err(Error::Shape(format!(
                "channels {c_in} -> {c_out} differ but no downsample map is set"
            )))
        }
        (Some(_), true) => {
            return Err(Error::Shape(
                "downsample map set although channels match".into(),
            ))
        }
    };
    Ok(tape.relu(tape.add(h, residual)?))
}

/// Apply every block in order and return the final time-step column.
pub fn tcn_forward<T: Scalar, R: Rng>(
    tape: &Tape<T>,
    f_seq: Var,
    blocks: &[TcnBlockVars],
    training: bool,
    rng: &mut R,
) -> Result<Var> {
    let mut h = f_seq;
    for block in blocks {
        h = tcn_block_forward(tape, h, block, training, rng)?;
    }
    let len = tape.shape_of(h)[1];
    tape.col_vec(h, len - 1)
}

/// Receptive field of a causal TCN stack where each block applies two
/// convolutions of size `k` at its dilation.
pub fn receptive_field(kernel: usize, dilations: &[usize]) -> usize {
    1 + 2 * (kernel - 1) * dilations.iter().sum::<usize>()
}

/// Inverted-dropout mask stream seeded per sample for reproducibility.
pub fn sample_rng(seed: u64, epoch: usize, sample: usize) -> rand_chacha::ChaCha20Rng {
    use rand::SeedableRng;
    let mix = seed
        ^ (epoch as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ (sample as u64).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    rand_chacha::ChaCha20Rng::seed_from_u64(mix)
}

/// Stable per-step feature width for a given configuration.
pub fn feature_width(
    d_fused: usize,
    k_poi: usize,
    d_taxi: usize,
    d_hour: usize,
    d_weekday: usize,
    d_daytype: usize,
) -> usize {
    d_fused + k_poi + d_taxi + d_hour + d_weekday + d_daytype
}
