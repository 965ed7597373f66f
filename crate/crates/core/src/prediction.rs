//! Output prediction: grid probabilities, probability-weighted
//! coordinates, and the distance metrics.

use crate::error::{Error, Result};
use crate::geo::{haversine_distance, GeoPoint};
use crate::num::{scalar, Scalar};
use crate::tensor::Tensor;

/// Result of one destination prediction.
#[derive(Debug, Clone)]
pub struct PredictionOutput<T> {
    /// Softmax probabilities over grid nodes, summing to 1.
    pub probs: Vec<T>,
    /// Probability-weighted average of the node centers.
    pub coords: GeoPoint<T>,
    /// Index of the most probable node; ties go to the smaller index.
    pub argmax_grid: usize,
}

/// Map a sequence feature vector to grid probabilities and coordinates.
///
/// `fc` is `[d_tcn, n_grids]`; `centers` must list one center per grid
/// node. Coordinates are the probability-weighted mean of the center
/// longitudes and latitudes separately.
pub fn predict<T: Scalar>(
    v_seq: &Tensor<T>,
    fc: &Tensor<T>,
    centers: &[GeoPoint<T>],
) -> Result<PredictionOutput<T>> {
    if v_seq.shape().len() != 1 {
        return Err(Error::Shape(format!(
            "sequence feature must be 1-D, got {:?}",
            v_seq.shape()
        )));
    }
    let d = v_seq.numel();
    let row = v_seq.reshape(&[1, d])?;
    let logits = row.matmul(fc)?;
    let n = logits.numel();
    if centers.len() != n {
        return Err(Error::Shape(format!(
            "{n} logits but {} centers",
            centers.len()
        )));
    }
    let probs_t = logits.reshape(&[n])?.softmax(0)?;
    let probs = probs_t.data().to_vec();
    probs_from_centers(&probs, centers)
}

/// Build a [`PredictionOutput`] from an explicit probability vector.
pub fn probs_from_centers<T: Scalar>(
    probs: &[T],
    centers: &[GeoPoint<T>],
) -> Result<PredictionOutput<T>> {
    if probs.len() != centers.len() || probs.is_empty() {
        return Err(Error::Shape(format!(
            "{} probabilities against {} centers",
            probs.len(),
            centers.len()
        )));
    }
    let mut lon = T::zero();
    let mut lat = T::zero();
    let mut best = 0usize;
    for (i, (&p, c)) in probs.iter().zip(centers).enumerate() {
        lon += p * c.lon;
        lat += p * c.lat;
        if p > probs[best] {
            best = i;
        }
    }
    Ok(PredictionOutput {
        probs: probs.to_vec(),
        coords: GeoPoint { lon, lat },
        argmax_grid: best,
    })
}

/// Mean haversine distance in km between paired predictions and truths.
pub fn eds<T: Scalar>(predictions: &[GeoPoint<T>], truths: &[GeoPoint<T>]) -> Result<T> {
    check_pairs(predictions, truths)?;
    let total: T = predictions
        .iter()
        .zip(truths)
        .map(|(p, t)| haversine_distance(p, t))
        .sum();
    Ok(total / scalar(predictions.len() as f64))
}

/// Root of the mean squared per-pair haversine distance, in km.
pub fn rmse<T: Scalar>(predictions: &[GeoPoint<T>], truths: &[GeoPoint<T>]) -> Result<T> {
    check_pairs(predictions, truths)?;
    let total: T = predictions
        .iter()
        .zip(truths)
        .map(|(p, t)| {
            let d = haversine_distance(p, t);
            d * d
        })
        .sum();
    Ok((total / scalar(predictions.len() as f64)).sqrt())
}

fn check_pairs<T>(predictions: &[GeoPoint<T>], truths: &[GeoPoint<T>]) -> Result<()> {
    if predictions.len() != truths.len() {
        return Err(Error::Shape(format!(
            "{} predictions against {} truths",
            predictions.len(),
            truths.len()
        )));
    }
    if predictions.is_empty() {
        return Err(Error::Data("metrics need at least one sample".into()));
    }
    Ok(())
}
