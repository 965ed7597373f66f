//! Adam optimizer with bias correction.

use crate::error::{Error, Result};
use crate::num::{scalar, Scalar};
use crate::tensor::Tensor;

/// Adam state: first/second moment accumulators per parameter plus the
/// shared step counter and hyperparameters.
#[derive(Debug, Clone)]
pub struct AdamState<T> {
    pub learning_rate: T,
    pub beta1: T,
    pub beta2: T,
    pub epsilon: T,
    /// Steps taken so far; incremented once per [`AdamState::step`].
    pub t: u64,
    m: Vec<Tensor<T>>,
    v: Vec<Tensor<T>>,
}

impl<T: Scalar> AdamState<T> {
    /// Fresh state with canonical defaults (beta1 0.9, beta2 0.999, eps 1e-8)
    /// for parameters of the given shapes.
    pub fn new(learning_rate: T, shapes: &[Vec<usize>]) -> Self {
        Self {
            learning_rate,
            beta1: scalar(0.9),
            beta2: scalar(0.999),
            epsilon: scalar(1e-8),
            t: 0,
            m: shapes.iter().map(|s| Tensor::zeros(s)).collect(),
            v: shapes.iter().map(|s| Tensor::zeros(s)).collect(),
        }
    }

    /// One Adam update over all parameters, in place. Deterministic given
    /// identical inputs and state.
    pub fn step(&mut self, params: &mut [Tensor<T>], grads: &[Tensor<T>]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::Shape(format!(
                "adam expects {} parameter/gradient tensors, got {}/{}",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        self.t += 1;
        let t = scalar::<T>(self.t as f64);
        let bc1 = T::one() - self.beta1.powf(t);
        let bc2 = T::one() - self.beta2.powf(t);
        for ((param, grad), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            if param.shape() != grad.shape() {
                return Err(Error::Shape(format!(
                    "parameter shape {:?} does not match gradient shape {:?}",
                    param.shape(),
                    grad.shape()
                )));
            }
            let pd = param.data_mut();
            let md = m.data_mut();
            let vd = v.data_mut();
            let gd = grad.data();
            for i in 0..pd.len() {
                md[i] = self.beta1 * md[i] + (T::one() - self.beta1) * gd[i];
                vd[i] = self.beta2 * vd[i] + (T::one() - self.beta2) * gd[i] * gd[i];
                let m_hat = md[i] / bc1;
                let v_hat = vd[i] / bc2;
                pd[i] -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
            }
        }
        Ok(())
    }
}
