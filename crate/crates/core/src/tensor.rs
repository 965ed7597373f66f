//! Dense row-major tensors.
//!
//! `Tensor` is a plain value type: shape plus data, no gradient state.
//! Reverse-mode differentiation lives in [`crate::tape`], which records
//! these pure kernels on a tape and replays their adjoints.

use rand::Rng;

use crate::error::{Error, Result};
use crate::num::{scalar, Scalar};

/// Dense n-dimensional array, row-major, double precision by default.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    shape: Vec<usize>,
    data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    /// Build a tensor from a shape and row-major data.
    pub fn new(shape: Vec<usize>, data: Vec<T>) -> Result<Self> {
        let numel: usize = shape.iter().product();
        if numel != data.len() {
            return Err(Error::Shape(format!(
                "shape {:?} implies {} elements, got {}",
                shape,
                numel,
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    /// Rank-0 tensor holding a single value.
    pub fn scalar_value(x: T) -> Self {
        Self {
            shape: vec![],
            data: vec![x],
        }
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let numel = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![T::zero(); numel],
        }
    }

    pub fn ones(shape: &[usize]) -> Self {
        let numel = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![T::one(); numel],
        }
    }

    /// Identity matrix of side `n`.
    pub fn eye(n: usize) -> Self {
        let mut t = Self::zeros(&[n, n]);
        for i in 0..n {
            t.data[i * n + i] = T::one();
        }
        t
    }

    /// 1-D tensor from a slice.
    pub fn from_slice(data: &[T]) -> Self {
        Self {
            shape: vec![data.len()],
            data: data.to_vec(),
        }
    }

    /// 2-D tensor from nested rows; rows must have equal length.
    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let m = rows.len();
        let n = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Shape("ragged rows".into()));
        }
        let data = rows.iter().flatten().copied().collect();
        Ok(Self {
            shape: vec![m, n],
            data,
        })
    }

    /// Uniform random tensor in `[lo, hi)` drawn from `rng`.
    ///
    /// Values are sampled as `f64` and converted, so the same seed yields
    /// the same sequence regardless of the scalar type.
    pub fn rand_uniform<R: Rng>(rng: &mut R, shape: &[usize], lo: f64, hi: f64) -> Self {
        let numel: usize = shape.iter().product();
        let data = (0..numel).map(|_| scalar(rng.gen_range(lo..hi))).collect();
        Self {
            shape: shape.to_vec(),
            data,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    /// True for rank-0 or single-element tensors.
    pub fn is_scalar(&self) -> bool {
        self.data.len() == 1
    }

    /// The single value of a scalar tensor.
    pub fn item(&self) -> Result<T> {
        if !self.is_scalar() {
            return Err(Error::Contract(format!(
                "item() on non-scalar shape {:?}",
                self.shape
            )));
        }
        Ok(self.data[0])
    }

    /// Element of a 2-D tensor.
    pub fn at(&self, i: usize, j: usize) -> T {
        debug_assert_eq!(self.shape.len(), 2);
        self.data[i * self.shape[1] + j]
    }

    pub fn rows(&self) -> usize {
        self.shape[0]
    }

    pub fn cols(&self) -> usize {
        self.shape[1]
    }

    /// Reinterpret the data under a new shape with the same element count.
    pub fn reshape(&self, shape: &[usize]) -> Result<Self> {
        let numel: usize = shape.iter().product();
        if numel != self.data.len() {
            return Err(Error::Shape(format!(
                "cannot reshape {:?} ({} elements) to {:?}",
                self.shape,
                self.data.len(),
                shape
            )));
        }
        Ok(Self {
            shape: shape.to_vec(),
            data: self.data.clone(),
        })
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Matrix product of two 2-D tensors.
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.shape.len() != 2 || other.shape.len() != 2 {
            return Err(Error::Shape(format!(
                "matmul needs 2-D operands, got {:?} and {:?}",
                self.shape, other.shape
            )));
        }
        let (m, k) = (self.shape[0], self.shape[1]);
        let (k2, n) = (other.shape[0], other.shape[1]);
        if k != k2 {
            return Err(Error::Shape(format!(
                "matmul inner dimensions disagree: {:?} x {:?}",
                self.shape, other.shape
            )));
        }
        let mut out = vec![T::zero(); m * n];
        for i in 0..m {
            for p in 0..k {
                let a = self.data[i * k + p];
                if a == T::zero() {
                    continue;
                }
                let row = &other.data[p * n..(p + 1) * n];
                let dst = &mut out[i * n..(i + 1) * n];
                for j in 0..n {
                    dst[j] += a * row[j];
                }
            }
        }
        Ok(Self {
            shape: vec![m, n],
            data: out,
        })
    }

    /// Transpose of a 2-D tensor.
    pub fn transpose(&self) -> Result<Self> {
        if self.shape.len() != 2 {
            return Err(Error::Shape(format!(
                "transpose needs a 2-D tensor, got {:?}",
                self.shape
            )));
        }
        let (m, n) = (self.shape[0], self.shape[1]);
        let mut out = vec![T::zero(); m * n];
        for i in 0..m {
            for j in 0..n {
                out[j * m + i] = self.data[i * n + j];
            }
        }
        Ok(Self {
            shape: vec![n, m],
            data: out,
        })
    }

    /// Elementwise sum; shapes must match exactly.
    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b, "add")
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b, "sub")
    }

    /// Hadamard (elementwise) product.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a * b, "mul")
    }

    fn zip_with(&self, other: &Self, f: impl Fn(T, T) -> T, what: &str) -> Result<Self> {
        if self.shape != other.shape {
            return Err(Error::Shape(format!(
                "{what} requires equal shapes, got {:?} and {:?}",
                self.shape, other.shape
            )));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Ok(Self {
            shape: self.shape.clone(),
            data,
        })
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn scale(&self, c: T) -> Self {
        self.map(|x| x * c)
    }

    /// Elementwise max(0, x). The subgradient at 0 is pinned to 0 by the tape.
    pub fn relu(&self) -> Self {
        self.map(|x| if x > T::zero() { x } else { T::zero() })
    }

    pub fn tanh_elem(&self) -> Self {
        self.map(|x| x.tanh())
    }

    pub fn sum(&self) -> T {
        self.data.iter().copied().sum()
    }

    /// Softmax along `axis` of a 1-D or 2-D tensor, max-shifted for stability.
    pub fn softmax(&self, axis: usize) -> Result<Self> {
        match self.shape.len() {
            1 => {
                if axis != 0 {
                    return Err(Error::Shape(format!(
                        "softmax axis {axis} invalid for 1-D tensor"
                    )));
                }
                let mut out = self.clone();
                softmax_slice(&mut out.data);
                Ok(out)
            }
            2 => {
                let (m, n) = (self.shape[0], self.shape[1]);
                let mut out = self.clone();
                match axis {
                    1 => {
                        for i in 0..m {
                            softmax_slice(&mut out.data[i * n..(i + 1) * n]);
                        }
                    }
                    0 => {
                        for j in 0..n {
                            let mut col: Vec<T> = (0..m).map(|i| self.data[i * n + j]).collect();
                            softmax_slice(&mut col);
                            for i in 0..m {
                                out.data[i * n + j] = col[i];
                            }
                        }
                    }
                    _ => {
                        return Err(Error::Shape(format!(
                            "softmax axis {axis} invalid for 2-D tensor"
                        )))
                    }
                }
                Ok(out)
            }
            _ => Err(Error::Shape(format!(
                "softmax supports rank 1 or 2, got {:?}",
                self.shape
            ))),
        }
    }

    /// Mean over axis 0 of a 2-D tensor, yielding a 1-D tensor of column means.
    pub fn mean_axis0(&self) -> Result<Self> {
        if self.shape.len() != 2 || self.shape[0] == 0 {
            return Err(Error::Shape(format!(
                "mean_axis0 needs a nonempty 2-D tensor, got {:?}",
                self.shape
            )));
        }
        let (m, n) = (self.shape[0], self.shape[1]);
        let inv = T::one() / scalar::<T>(m as f64);
        let mut out = vec![T::zero(); n];
        for i in 0..m {
            for j in 0..n {
                out[j] += self.data[i * n + j];
            }
        }
        for v in &mut out {
            *v *= inv;
        }
        Ok(Self {
            shape: vec![n],
            data: out,
        })
    }

    /// Column `j` of a 2-D tensor as a 1-D tensor.
    pub fn col_vec(&self, j: usize) -> Result<Self> {
        if self.shape.len() != 2 {
            return Err(Error::Shape(format!(
                "col_vec needs a 2-D tensor, got {:?}",
                self.shape
            )));
        }
        let (m, n) = (self.shape[0], self.shape[1]);
        if j >= n {
            return Err(Error::Index(format!("column {j} of {n}")));
        }
        let data = (0..m).map(|i| self.data[i * n + j]).collect();
        Ok(Self {
            shape: vec![m],
            data,
        })
    }

    /// Row `i` of a 2-D tensor as a 1-D tensor.
    pub fn row_vec(&self, i: usize) -> Result<Self> {
        if self.shape.len() != 2 {
            return Err(Error::Shape(format!(
                "row_vec needs a 2-D tensor, got {:?}",
                self.shape
            )));
        }
        let (m, n) = (self.shape[0], self.shape[1]);
        if i >= m {
            return Err(Error::Index(format!("row {i} of {m}")));
        }
        Ok(Self {
            shape: vec![n],
            data: self.data[i * n..(i + 1) * n].to_vec(),
        })
    }

    /// Causal dilated 1-D convolution.
    ///
    /// `self` is `[C_in, L]`, `weight` is `[C_out, C_in, k]`. The input is
    /// left-padded with `(k - 1) * dilation` zeros so the output keeps
    /// length `L` and position `t` depends only on inputs at `<= t`.
    pub fn conv1d_causal(&self, weight: &Self, dilation: usize) -> Result<Self> {
        if self.shape.len() != 2 || weight.shape.len() != 3 {
            return Err(Error::Shape(format!(
                "conv1d expects input [C_in, L] and weight [C_out, C_in, k], got {:?} and {:?}",
                self.shape, weight.shape
            )));
        }
        let (c_in, len) = (self.shape[0], self.shape[1]);
        let (c_out, w_cin, k) = (weight.shape[0], weight.shape[1], weight.shape[2]);
        if w_cin != c_in {
            return Err(Error::Shape(format!(
                "conv1d channel mismatch: input has {c_in}, weight expects {w_cin}"
            )));
        }
        if k == 0 || dilation == 0 {
            return Err(Error::Shape("conv1d needs k >= 1 and dilation >= 1".into()));
        }
        let mut out = vec![T::zero(); c_out * len];
        for co in 0..c_out {
            for t in 0..len {
                let mut acc = T::zero();
                for ci in 0..c_in {
                    for tap in 0..k {
                        // Tap k-1 reads the current step; earlier taps look back.
                        let offset = (k - 1 - tap) * dilation;
                        if offset > t {
                            continue;
                        }
                        let w = weight.data[(co * c_in + ci) * k + tap];
                        acc += w * self.data[ci * len + (t - offset)];
                    }
                }
                out[co * len + t] = acc;
            }
        }
        Ok(Self {
            shape: vec![c_out, len],
            data: out,
        })
    }
}

fn softmax_slice<T: Scalar>(xs: &mut [T]) {
    let max = xs.iter().copied().fold(T::neg_infinity(), T::max);
    let mut total = T::zero();
    for x in xs.iter_mut() {
        *x = (*x - max).exp();
        total += *x;
    }
    for x in xs.iter_mut() {
        *x /= total;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    type T64 = Tensor<f64>;

    #[test]
    fn matmul_identity_is_identity() {
        let i2 = T64::eye(2);
        let m = T64::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(i2.matmul(&m).unwrap(), m);
    }

    #[test]
    fn matmul_hand_dot_product() {
        let a = T64::new(vec![1, 2], vec![1.0, 2.0]).unwrap();
        let b = T64::new(vec![2, 1], vec![3.0, 4.0]).unwrap();
        let c = a.matmul(&b).unwrap();
        assert_eq!(c.shape(), &[1, 1]);
        assert_eq!(c.data()[0], 11.0);
    }

    #[test]
    fn matmul_zero_annihilates() {
        let z = T64::zeros(&[2, 3]);
        let m = T64::ones(&[3, 4]);
        assert_eq!(z.matmul(&m).unwrap(), T64::zeros(&[2, 4]));
    }

    #[test]
    fn matmul_shape_mismatch_errors() {
        let a = T64::zeros(&[2, 3]);
        let b = T64::zeros(&[4, 2]);
        assert!(matches!(a.matmul(&b), Err(Error::Shape(_))));
    }

    #[test]
    fn relu_clamps_negatives() {
        let x = T64::from_slice(&[-1.0, 0.0, 2.0]);
        assert_eq!(x.relu().data(), &[0.0, 0.0, 2.0]);
    }

    #[test]
    fn relu_identity_on_positives() {
        let x = T64::from_slice(&[0.5, 1.5, 9.0]);
        assert_eq!(x.relu(), x);
    }

    #[test]
    fn softmax_symmetry_and_shift_invariance() {
        let x = T64::from_slice(&[0.0, 0.0]);
        assert_eq!(x.softmax(0).unwrap().data(), &[0.5, 0.5]);
        // Large equal logits must not overflow.
        let big = T64::from_slice(&[1000.0, 1000.0]);
        assert_eq!(big.softmax(0).unwrap().data(), &[0.5, 0.5]);
    }

    #[test]
    fn softmax_log_ratio_case() {
        let x = T64::from_slice(&[1.0f64.ln(), 3.0f64.ln()]);
        let y = x.softmax(0).unwrap();
        assert!((y.data()[0] - 0.25).abs() < 1e-12);
        assert!((y.data()[1] - 0.75).abs() < 1e-12);
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let x = T64::from_rows(&[vec![0.3, -2.0, 5.0], vec![1.0, 1.0, 1.0]]).unwrap();
        let y = x.softmax(1).unwrap();
        for i in 0..2 {
            let s: f64 = (0..3).map(|j| y.at(i, j)).sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn conv1d_k1_identity() {
        let x = T64::new(vec![1, 3], vec![1.0, 2.0, 3.0]).unwrap();
        let w = T64::new(vec![1, 1, 1], vec![1.0]).unwrap();
        assert_eq!(x.conv1d_causal(&w, 1).unwrap(), x);
    }

    #[test]
    fn conv1d_current_tap_only() {
        // k=2 with weights [0, 1]: only the current step contributes.
        let x = T64::new(vec![1, 3], vec![5.0, 7.0, 9.0]).unwrap();
        let w = T64::new(vec![1, 1, 2], vec![0.0, 1.0]).unwrap();
        assert_eq!(x.conv1d_causal(&w, 1).unwrap(), x);
    }

    #[test]
    fn conv1d_impulse_is_causal() {
        let mut x = T64::zeros(&[1, 8]);
        x.data_mut()[3] = 1.0;
        let w = T64::new(vec![1, 1, 3], vec![0.25, 0.5, 1.0]).unwrap();
        let y = x.conv1d_causal(&w, 2).unwrap();
        for t in 0..3 {
            assert_eq!(y.data()[t], 0.0, "output before the impulse must stay zero");
        }
        assert_eq!(y.data()[3], 1.0);
        assert_eq!(y.data()[5], 0.5);
        assert_eq!(y.data()[7], 0.25);
    }

    #[test]
    fn mean_axis0_column_means() {
        let x = T64::from_rows(&[vec![1.0, 2.0], vec![3.0, 6.0]]).unwrap();
        assert_eq!(x.mean_axis0().unwrap().data(), &[2.0, 4.0]);
    }

    #[test]
    fn reshape_preserves_data() {
        let x = T64::from_slice(&[1.0, 2.0, 3.0, 4.0]);
        let y = x.reshape(&[2, 2]).unwrap();
        assert_eq!(y.at(1, 0), 3.0);
        assert!(x.reshape(&[3]).is_err());
    }
}
