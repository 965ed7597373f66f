//! Reverse-mode automatic differentiation on a flat tape.
//!
//! A [`Tape`] records every differentiable operation in execution order,
//! which is already a topological order of the computation graph. Each
//! node stores its value, parent indices, and a vector-Jacobian closure.
//! [`Tape::backward`] walks the tape once in reverse, accumulating
//! gradients by summation, so a value used twice receives the sum of both
//! contributions.
//!
//! Tensors are immutable values; a tape is confined to a single training
//! worker. Independent tapes share no state and may run concurrently.

use std::cell::RefCell;

use rand::Rng;

use crate::error::{Error, Result};
use crate::num::{scalar, Scalar};
use crate::tensor::Tensor;

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

type VjpFn<T> = Box<dyn Fn(&Tensor<T>) -> Vec<Tensor<T>>>;

struct Node<T> {
    value: Tensor<T>,
    parents: Vec<usize>,
    vjp: Option<VjpFn<T>>,
    requires_grad: bool,
}

/// Ordered record of executed differentiable operations.
pub struct Tape<T: Scalar> {
    nodes: RefCell<Vec<Node<T>>>,
}

/// Gradients of a scalar loss with respect to tape variables.
///
/// Leaves created with `requires_grad` that the loss never touched hold
/// explicit zero tensors.
pub struct Gradients<T> {
    grads: Vec<Option<Tensor<T>>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn get(&self, v: Var) -> Option<&Tensor<T>> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Self {
            nodes: RefCell::new(Vec::new()),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.borrow().is_empty()
    }

    /// Register a trainable leaf.
    pub fn leaf(&self, value: Tensor<T>) -> Var {
        self.push(value, vec![], None, true)
    }

    /// Register a non-trainable input.
    pub fn constant(&self, value: Tensor<T>) -> Var {
        self.push(value, vec![], None, false)
    }

    /// Clone of the value held by `v`.
    pub fn value(&self, v: Var) -> Tensor<T> {
        self.nodes.borrow()[v.0].value.clone()
    }

    pub fn shape_of(&self, v: Var) -> Vec<usize> {
        self.nodes.borrow()[v.0].value.shape().to_vec()
    }

    fn push(
        &self,
        value: Tensor<T>,
        parents: Vec<usize>,
        vjp: Option<VjpFn<T>>,
        requires_grad: bool,
    ) -> Var {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            value,
            parents,
            vjp,
            requires_grad,
        });
        Var(nodes.len() - 1)
    }

    fn any_requires(&self, vars: &[Var]) -> bool {
        let nodes = self.nodes.borrow();
        vars.iter().any(|v| nodes[v.0].requires_grad)
    }

    /// Record an operation with an externally supplied adjoint.
    ///
    /// `vjp` receives the upstream gradient of the output and must return
    /// one gradient tensor per parent, in order.
    pub fn custom_op(
        &self,
        parents: &[Var],
        value: Tensor<T>,
        vjp: impl Fn(&Tensor<T>) -> Vec<Tensor<T>> + 'static,
    ) -> Var {
        let requires = self.any_requires(parents);
        let parent_ids = parents.iter().map(|v| v.0).collect();
        self.push(value, parent_ids, Some(Box::new(vjp)), requires)
    }

    pub fn add(&self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).add(&self.value(b))?;
        Ok(self.custom_op(&[a, b], out, |g| vec![g.clone(), g.clone()]))
    }

    pub fn sub(&self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).sub(&self.value(b))?;
        Ok(self.custom_op(&[a, b], out, |g| vec![g.clone(), g.scale(-T::one())]))
    }

    pub fn mul(&self, a: Var, b: Var) -> Result<Var> {
        let av = self.value(a);
        let bv = self.value(b);
        let out = av.mul(&bv)?;
        Ok(self.custom_op(&[a, b], out, move |g| {
            vec![
                g.mul(&bv).expect("shape checked"),
                g.mul(&av).expect("shape checked"),
            ]
        }))
    }

    pub fn scale(&self, a: Var, c: T) -> Var {
        let out = self.value(a).scale(c);
        self.custom_op(&[a], out, move |g| vec![g.scale(c)])
    }

    pub fn matmul(&self, a: Var, b: Var) -> Result<Var> {
        let av = self.value(a);
        let bv = self.value(b);
        let out = av.matmul(&bv)?;
        Ok(self.custom_op(&[a, b], out, move |g| {
            let ga = g
                .matmul(&bv.transpose().expect("2-D"))
                .expect("shape checked");
            let gb = av
                .transpose()
                .expect("2-D")
                .matmul(g)
                .expect("shape checked");
            vec![ga, gb]
        }))
    }

    pub fn transpose(&self, a: Var) -> Result<Var> {
        let out = self.value(a).transpose()?;
        Ok(self.custom_op(&[a], out, |g| vec![g.transpose().expect("2-D")]))
    }

    pub fn relu(&self, a: Var) -> Var {
        let av = self.value(a);
        let out = av.relu();
        self.custom_op(&[a], out, move |g| {
            let mask = av.map(|x| if x > T::zero() { T::one() } else { T::zero() });
            vec![g.mul(&mask).expect("same shape")]
        })
    }

    pub fn tanh(&self, a: Var) -> Var {
        let out = self.value(a).tanh_elem();
        let y = out.clone();
        self.custom_op(&[a], out, move |g| {
            let dy = y.map(|t| T::one() - t * t);
            vec![g.mul(&dy).expect("same shape")]
        })
    }

    pub fn softmax(&self, a: Var, axis: usize) -> Result<Var> {
        let out = self.value(a).softmax(axis)?;
        let y = out.clone();
        Ok(self.custom_op(&[a], out, move |g| vec![softmax_vjp(&y, g, axis)]))
    }

    /// Sum of all elements as a rank-0 tensor.
    pub fn sum(&self, a: Var) -> Var {
        let av = self.value(a);
        let shape = av.shape().to_vec();
        let out = Tensor::scalar_value(av.sum());
        self.custom_op(&[a], out, move |g| {
            let gs = g.data()[0];
            let mut t = Tensor::zeros(&shape);
            for x in t.data_mut() {
                *x = gs;
            }
            vec![t]
        })
    }

    /// Column means of a 2-D tensor.
    pub fn mean_axis0(&self, a: Var) -> Result<Var> {
        let av = self.value(a);
        let out = av.mean_axis0()?;
        let (m, n) = (av.shape()[0], av.shape()[1]);
        Ok(self.custom_op(&[a], out, move |g| {
            let inv = T::one() / scalar::<T>(m as f64);
            let mut t = Tensor::zeros(&[m, n]);
            for i in 0..m {
                for j in 0..n {
                    t.data_mut()[i * n + j] = g.data()[j] * inv;
                }
            }
            vec![t]
        }))
    }

    /// Column `j` of a 2-D tensor.
    pub fn col_vec(&self, a: Var, j: usize) -> Result<Var> {
        let av = self.value(a);
        let out = av.col_vec(j)?;
        let (m, n) = (av.shape()[0], av.shape()[1]);
        Ok(self.custom_op(&[a], out, move |g| {
            let mut t = Tensor::zeros(&[m, n]);
            for i in 0..m {
                t.data_mut()[i * n + j] = g.data()[i];
            }
            vec![t]
        }))
    }

    /// Concatenate 1-D tensors into one 1-D tensor.
    pub fn concat(&self, parts: &[Var]) -> Result<Var> {
        if parts.is_empty() {
            return Err(Error::Shape("concat of zero tensors".into()));
        }
        let values: Vec<Tensor<T>> = parts.iter().map(|&v| self.value(v)).collect();
        let mut lens = Vec::with_capacity(values.len());
        let mut data = Vec::new();
        for v in &values {
            if v.shape().len() != 1 {
                return Err(Error::Shape(format!(
                    "concat expects 1-D parts, got {:?}",
                    v.shape()
                )));
            }
            lens.push(v.numel());
            data.extend_from_slice(v.data());
        }
        let out = Tensor::new(vec![data.len()], data)?;
        Ok(self.custom_op(parts, out, move |g| {
            let mut grads = Vec::with_capacity(lens.len());
            let mut offset = 0;
            for &len in &lens {
                grads.push(Tensor::from_slice(&g.data()[offset..offset + len]));
                offset += len;
            }
            grads
        }))
    }

    /// Stack 1-D tensors of length `m` as the columns of an `[m, k]` tensor.
    pub fn stack_cols(&self, cols: &[Var]) -> Result<Var> {
        if cols.is_empty() {
            return Err(Error::Shape("stack_cols of zero tensors".into()));
        }
        let values: Vec<Tensor<T>> = cols.iter().map(|&v| self.value(v)).collect();
        let m = values[0].numel();
        if values
            .iter()
            .any(|v| v.shape().len() != 1 || v.numel() != m)
        {
            return Err(Error::Shape(
                "stack_cols expects equal-length 1-D tensors".into(),
            ));
        }
        let k = values.len();
        let mut out = Tensor::zeros(&[m, k]);
        for (j, v) in values.iter().enumerate() {
            for i in 0..m {
                out.data_mut()[i * k + j] = v.data()[i];
            }
        }
        Ok(self.custom_op(cols, out, move |g| {
            (0..k)
                .map(|j| {
                    let data: Vec<T> = (0..m).map(|i| g.data()[i * k + j]).collect();
                    Tensor::from_slice(&data)
                })
                .collect()
        }))
    }

    /// Stack 1-D tensors of length `n` as the rows of a `[k, n]` tensor.
    pub fn stack_rows(&self, rows: &[Var]) -> Result<Var> {
        if rows.is_empty() {
            return Err(Error::Shape("stack_rows of zero tensors".into()));
        }
        let values: Vec<Tensor<T>> = rows.iter().map(|&v| self.value(v)).collect();
        let n = values[0].numel();
        if values
            .iter()
            .any(|v| v.shape().len() != 1 || v.numel() != n)
        {
            return Err(Error::Shape(
                "stack_rows expects equal-length 1-D tensors".into(),
            ));
        }
        let k = values.len();
        let mut data = Vec::with_capacity(k * n);
        for v in &values {
            data.extend_from_slice(v.data());
        }
        let out = Tensor::new(vec![k, n], data)?;
        Ok(self.custom_op(rows, out, move |g| {
            (0..k)
                .map(|i| Tensor::from_slice(&g.data()[i * n..(i + 1) * n]))
                .collect()
        }))
    }

    /// Row lookup into an embedding table `[V, D]`.
    pub fn embed_row(&self, table: Var, idx: usize) -> Result<Var> {
        let tv = self.value(table);
        let out = tv.row_vec(idx)?;
        let (v, d) = (tv.shape()[0], tv.shape()[1]);
        Ok(self.custom_op(&[table], out, move |g| {
            let mut t = Tensor::zeros(&[v, d]);
            t.data_mut()[idx * d..(idx + 1) * d].copy_from_slice(g.data());
            vec![t]
        }))
    }

    /// Gather flat elements of `a` at `indices` into a 1-D tensor.
    pub fn gather(&self, a: Var, indices: Vec<usize>) -> Result<Var> {
        let av = self.value(a);
        let shape = av.shape().to_vec();
        let numel = av.numel();
        if let Some(&bad) = indices.iter().find(|&&i| i >= numel) {
            return Err(Error::Index(format!("gather index {bad} of {numel}")));
        }
        let data: Vec<T> = indices.iter().map(|&i| av.data()[i]).collect();
        let out = Tensor::from_slice(&data);
        Ok(self.custom_op(&[a], out, move |g| {
            let mut t = Tensor::zeros(&shape);
            for (slot, &i) in indices.iter().enumerate() {
                t.data_mut()[i] += g.data()[slot];
            }
            vec![t]
        }))
    }

    pub fn reshape(&self, a: Var, shape: &[usize]) -> Result<Var> {
        let av = self.value(a);
        let out = av.reshape(shape)?;
        let orig = av.shape().to_vec();
        Ok(self.custom_op(&[a], out, move |g| {
            vec![g.reshape(&orig).expect("same numel")]
        }))
    }

    /// Causal dilated 1-D convolution; see [`Tensor::conv1d_causal`].
    pub fn conv1d_causal(&self, x: Var, w: Var, dilation: usize) -> Result<Var> {
        let xv = self.value(x);
        let wv = self.value(w);
        let out = xv.conv1d_causal(&wv, dilation)?;
        Ok(self.custom_op(&[x, w], out, move |g| {
            let (c_in, len) = (xv.shape()[0], xv.shape()[1]);
            let (c_out, _, k) = (wv.shape()[0], wv.shape()[1], wv.shape()[2]);
            let mut gx = Tensor::zeros(&[c_in, len]);
            let mut gw = Tensor::zeros(&[c_out, c_in, k]);
            for co in 0..c_out {
                for t in 0..len {
                    let go = g.data()[co * len + t];
                    if go == T::zero() {
                        continue;
                    }
                    for ci in 0..c_in {
                        for tap in 0..k {
                            let offset = (k - 1 - tap) * dilation;
                            if offset > t {
                                continue;
                            }
                            let s = t - offset;
                            gw.data_mut()[(co * c_in + ci) * k + tap] +=
                                go * xv.data()[ci * len + s];
                            gx.data_mut()[ci * len + s] +=
                                go * wv.data()[(co * c_in + ci) * k + tap];
                        }
                    }
                }
            }
            vec![gx, gw]
        }))
    }

    /// Mean cross-entropy between `logits` `[B, N]` and integer targets.
    pub fn cross_entropy(&self, logits: Var, targets: &[usize]) -> Result<Var> {
        let lv = self.value(logits);
        if lv.shape().len() != 2 {
            return Err(Error::Shape(format!(
                "cross_entropy expects [B, N] logits, got {:?}",
                lv.shape()
            )));
        }
        let (b, n) = (lv.shape()[0], lv.shape()[1]);
        if targets.len() != b {
            return Err(Error::Shape(format!(
                "{} logit rows but {} targets",
                b,
                targets.len()
            )));
        }
        if let Some(&bad) = targets.iter().find(|&&t| t >= n) {
            return Err(Error::Index(format!("target class {bad} of {n}")));
        }
        let probs = lv.softmax(1)?;
        let mut loss = T::zero();
        for (i, &t) in targets.iter().enumerate() {
            // -log softmax via the stable log-sum-exp of the shifted row.
            let row = lv.data();
            let max = (0..n)
                .map(|j| row[i * n + j])
                .fold(T::neg_infinity(), T::max);
            let lse = (0..n).map(|j| (row[i * n + j] - max).exp()).sum::<T>().ln() + max;
            loss += lse - row[i * n + t];
        }
        loss /= scalar::<T>(b as f64);
        let targets = targets.to_vec();
        let out = Tensor::scalar_value(loss);
        Ok(self.custom_op(&[logits], out, move |g| {
            let gs = g.data()[0] / scalar::<T>(b as f64);
            let mut t = probs.clone();
            for (i, &tgt) in targets.iter().enumerate() {
                t.data_mut()[i * n + tgt] -= T::one();
            }
            vec![t.scale(gs)]
        }))
    }

    /// Inverted dropout with a caller-provided random stream.
    ///
    /// Identity when `training` is false or `rate` is zero; otherwise each
    /// element is kept with probability `1 - rate` and scaled by
    /// `1 / (1 - rate)`.
    pub fn dropout<R: Rng>(&self, a: Var, rate: f64, training: bool, rng: &mut R) -> Result<Var> {
        if !training || rate <= 0.0 {
            return Ok(a);
        }
        if rate >= 1.0 {
            return Err(Error::Config(format!("dropout rate {rate} must be < 1")));
        }
        let shape = self.shape_of(a);
        let keep = 1.0 - rate;
        let inv: T = scalar(1.0 / keep);
        let numel: usize = shape.iter().product();
        let data: Vec<T> = (0..numel)
            .map(|_| {
                if rng.gen::<f64>() < keep {
                    inv
                } else {
                    T::zero()
                }
            })
            .collect();
        let mask = self.constant(Tensor::new(shape, data)?);
        self.mul(a, mask)
    }

    /// Gradients of a scalar `loss` with respect to every `requires_grad`
    /// variable reachable on the tape. Untouched trainable leaves get
    /// explicit zeros.
    pub fn backward(&self, loss: Var) -> Result<Gradients<T>> {
        let nodes = self.nodes.borrow();
        let loss_node = &nodes[loss.0];
        if !loss_node.value.is_scalar() {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                loss_node.value.shape()
            )));
        }
        let mut grads: Vec<Option<Tensor<T>>> = vec![None; nodes.len()];
        let mut seed = Tensor::zeros(loss_node.value.shape());
        seed.data_mut()[0] = T::one();
        grads[loss.0] = Some(seed);

        for id in (0..=loss.0).rev() {
            let node = &nodes[id];
            if !node.requires_grad {
                grads[id] = None;
                continue;
            }
            let Some(grad) = grads[id].clone() else {
                continue;
            };
            let Some(vjp) = &node.vjp else { continue };
            let contributions = vjp(&grad);
            debug_assert_eq!(contributions.len(), node.parents.len());
            for (&parent, contrib) in node.parents.iter().zip(contributions) {
                if !nodes[parent].requires_grad {
                    continue;
                }
                match &mut grads[parent] {
                    Some(acc) => *acc = acc.add(&contrib).expect("gradient shapes match"),
                    slot => *slot = Some(contrib),
                }
            }
        }

        // Materialize zeros for trainable leaves the loss never reached.
        for (id, node) in nodes.iter().enumerate() {
            if node.requires_grad && node.vjp.is_none() && grads[id].is_none() {
                grads[id] = Some(Tensor::zeros(node.value.shape()));
            }
        }
        Ok(Gradients { grads })
    }
}

fn softmax_vjp<T: Scalar>(y: &Tensor<T>, g: &Tensor<T>, axis: usize) -> Tensor<T> {
    // dx = y * (g - sum(g * y)) along the reduced axis.
    let mut out = y.mul(g).expect("same shape");
    match y.shape().len() {
        1 => {
            let dot = out.sum();
            let data: Vec<T> = y
                .data()
                .iter()
                .zip(g.data())
                .map(|(&yi, &gi)| yi * (gi - dot))
                .collect();
            out = Tensor::from_slice(&data);
        }
        2 => {
            let (m, n) = (y.shape()[0], y.shape()[1]);
            let mut data = vec![T::zero(); m * n];
            match axis {
                1 => {
                    for i in 0..m {
                        let dot: T = (0..n).map(|j| out.data()[i * n + j]).sum();
                        for j in 0..n {
                            data[i * n + j] = y.data()[i * n + j] * (g.data()[i * n + j] - dot);
                        }
                    }
                }
                0 => {
                    for j in 0..n {
                        let dot: T = (0..m).map(|i| out.data()[i * n + j]).sum();
                        for i in 0..m {
                            data[i * n + j] = y.data()[i * n + j] * (g.data()[i * n + j] - dot);
                        }
                    }
                }
                _ => unreachable!("axis validated in forward"),
            }
            out = Tensor::new(vec![m, n], data).expect("same shape");
        }
        _ => unreachable!("rank validated in forward"),
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    type T64 = Tensor<f64>;

    #[test]
    fn linear_loss_gradient_is_input() {
        // loss = sum(W x) with x fixed => dL/dW = x^T broadcast over rows.
        let tape: Tape<f64> = Tape::new();
        let w = tape.leaf(T64::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap());
        let x = tape.constant(T64::new(vec![2, 1], vec![5.0, 7.0]).unwrap());
        let y = tape.matmul(w, x).unwrap();
        let loss = tape.sum(y);
        let grads = tape.backward(loss).unwrap();
        let gw = grads.get(w).unwrap();
        assert_eq!(gw.data(), &[5.0, 7.0, 5.0, 7.0]);
    }

    #[test]
    fn dead_relu_kills_gradient() {
        let tape: Tape<f64> = Tape::new();
        let x = tape.leaf(T64::from_slice(&[-5.0]));
        let loss = tape.sum(tape.relu(x));
        let grads = tape.backward(loss).unwrap();
        assert_eq!(grads.get(x).unwrap().data(), &[0.0]);
    }

    #[test]
    fn relu_gradient_mask_is_one_on_positives() {
        let tape: Tape<f64> = Tape::new();
        let x = tape.leaf(T64::from_slice(&[3.0]));
        let loss = tape.sum(tape.relu(x));
        let grads = tape.backward(loss).unwrap();
        assert_eq!(grads.get(x).unwrap().data(), &[1.0]);
    }

    #[test]
    fn reuse_accumulates_gradients() {
        // loss = sum(x * x) => dL/dx = 2x, via two uses of the same var.
        let tape: Tape<f64> = Tape::new();
        let x = tape.leaf(T64::from_slice(&[3.0, -2.0]));
        let y = tape.mul(x, x).unwrap();
        let loss = tape.sum(y);
        let grads = tape.backward(loss).unwrap();
        assert_eq!(grads.get(x).unwrap().data(), &[6.0, -4.0]);
    }

    #[test]
    fn unused_parameter_gets_zero_gradient() {
        let tape: Tape<f64> = Tape::new();
        let used = tape.leaf(T64::from_slice(&[1.0]));
        let unused = tape.leaf(T64::from_slice(&[1.0, 2.0]));
        let loss = tape.sum(used);
        let grads = tape.backward(loss).unwrap();
        assert_eq!(grads.get(unused).unwrap().data(), &[0.0, 0.0]);
    }

    #[test]
    fn non_scalar_loss_is_a_contract_error() {
        let tape: Tape<f64> = Tape::new();
        let x = tape.leaf(T64::from_slice(&[1.0, 2.0]));
        assert!(matches!(tape.backward(x), Err(Error::Contract(_))));
    }

    #[test]
    fn cross_entropy_uniform_logits() {
        let tape: Tape<f64> = Tape::new();
        let logits = tape.constant(T64::from_rows(&[vec![0.0; 4]]).unwrap());
        let loss = tape.cross_entropy(logits, &[2]).unwrap();
        let got = tape.value(loss).item().unwrap();
        assert!((got - 4.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn cross_entropy_large_margin_tends_to_zero() {
        let tape: Tape<f64> = Tape::new();
        let logits = tape.constant(T64::from_rows(&[vec![50.0, 0.0, 0.0]]).unwrap());
        let loss = tape.cross_entropy(logits, &[0]).unwrap();
        assert!(tape.value(loss).item().unwrap() < 1e-9);
    }

    #[test]
    fn cross_entropy_mean_over_identical_rows() {
        let tape: Tape<f64> = Tape::new();
        let row = vec![0.4, -1.0, 2.0];
        let one = tape.constant(T64::from_rows(std::slice::from_ref(&row)).unwrap());
        let two = tape.constant(T64::from_rows(&[row.clone(), row]).unwrap());
        let l1 = tape.cross_entropy(one, &[2]).unwrap();
        let l2 = tape.cross_entropy(two, &[2, 2]).unwrap();
        let a = tape.value(l1).item().unwrap();
        let b = tape.value(l2).item().unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn cross_entropy_rejects_bad_class() {
        let tape: Tape<f64> = Tape::new();
        let logits = tape.constant(T64::from_rows(&[vec![0.0, 0.0]]).unwrap());
        assert!(matches!(
            tape.cross_entropy(logits, &[2]),
            Err(Error::Index(_))
        ));
    }

    #[test]
    fn dropout_disabled_is_identity() {
        use rand::SeedableRng;
        let tape: Tape<f64> = Tape::new();
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(7);
        let x = tape.leaf(T64::from_slice(&[1.0, 2.0, 3.0]));
        let y = tape.dropout(x, 0.5, false, &mut rng).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn gather_and_scatter_roundtrip_gradient() {
        let tape: Tape<f64> = Tape::new();
        let x = tape.leaf(T64::from_slice(&[1.0, 2.0, 3.0, 4.0]));
        // Pick index 1 twice: its gradient must accumulate to 2.
        let picked = tape.gather(x, vec![1, 1, 3]).unwrap();
        let loss = tape.sum(picked);
        let grads = tape.backward(loss).unwrap();
        assert_eq!(grads.get(x).unwrap().data(), &[0.0, 2.0, 0.0, 1.0]);
    }
}
