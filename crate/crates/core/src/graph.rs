//! Classical GCN stack with residual connections and the differentiable
//! pooling stage that coarsens the city graph down to qubit count.

use crate::error::{Error, Result};
use crate::num::Scalar;
use crate::tape::{Tape, Var};

/// One graph-convolution layer: weight plus an optional downsampling map
/// for the residual path, present exactly when the widths differ.
pub struct GcnLayerVars {
    pub w: Var,
    pub down: Option<Var>,
}

/// `ReLU(A_hat H W + skip(H))` where `skip` is the identity when input and
/// output widths match, and `H . down` otherwise.
pub fn gcn_layer_forward<T: Scalar>(
    tape: &Tape<T>,
    a_hat: Var,
    h: Var,
    layer: &GcnLayerVars,
) -> Result<Var> {
    let propagated = tape.matmul(tape.matmul(a_hat, h)?, layer.w)?;
    let w_shape = tape.shape_of(layer.w);
    let (d_in, d_out) = (w_shape[0], w_shape[1]);
    let skip = match (&layer.down, d_in == d_out) {
        (None, true) => h,
        (Some(down), false) => tape.matmul(h, *down)?,
        (None, false) => {
            return Err(Error::Shape(format!(
                "widths {d_in} -> {d_out} differ but no downsample map is set"
            )))
        }
        (Some(_), true) => {
            return Err(Error::Shape(
                "downsample map set although widths match".into(),
            ))
        }
    };
    Ok(tape.relu(tape.add(propagated, skip)?))
}

/// Sequential residual GCN layers; an empty list is the identity.
pub fn gcn_stack<T: Scalar>(
    tape: &Tape<T>,
    a_hat: Var,
    x0: Var,
    layers: &[GcnLayerVars],
) -> Result<Var> {
    let mut h = x0;
    for layer in layers {
        h = gcn_layer_forward(tape, a_hat, h, layer)?;
    }
    Ok(h)
}

/// Cluster assignment `S = softmax(A_hat X W_assign)` row-wise.
///
/// The assignment layer feeds its raw pre-activation into the softmax:
/// no ReLU (which would zero negative logits) and no residual path.
pub fn diffpool_assign<T: Scalar>(
    tape: &Tape<T>,
    a_hat: Var,
    x_gcn: Var,
    w_assign: Var,
) -> Result<Var> {
    let logits = tape.matmul(tape.matmul(a_hat, x_gcn)?, w_assign)?;
    tape.softmax(logits, 1)
}

/// Pool features and structure: `X_pooled = S^T X`, `A_pooled = S^T A_hat S`.
pub fn diffpool_apply<T: Scalar>(
    tape: &Tape<T>,
    s: Var,
    x_gcn: Var,
    a_hat: Var,
) -> Result<(Var, Var)> {
    let st = tape.transpose(s)?;
    let x_pooled = tape.matmul(st, x_gcn)?;
    let a_pooled = tape.matmul(tape.matmul(st, a_hat)?, s)?;
    Ok((x_pooled, a_pooled))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;
    use proptest::prelude::*;

    type T64 = Tensor<f64>;

    #[test]
    fn identity_graph_identity_weight_doubles_features() {
        let tape: Tape<f64> = Tape::new();
        let a = tape.constant(T64::eye(2));
        let h = tape.leaf(T64::from_rows(&[vec![1.0, 2.0], vec![0.5, 3.0]]).unwrap());
        let layer = GcnLayerVars {
            w: tape.leaf(T64::eye(2)),
            down: None,
        };
        let out = gcn_layer_forward(&tape, a, h, &layer).unwrap();
        assert_eq!(tape.value(out), tape.value(h).scale(2.0));
    }

    #[test]
    fn single_node_scalar_case() {
        let tape: Tape<f64> = Tape::new();
        let a = tape.constant(T64::from_rows(&[vec![1.0]]).unwrap());
        let h = tape.leaf(T64::from_rows(&[vec![2.0]]).unwrap());
        let layer = GcnLayerVars {
            w: tape.leaf(T64::from_rows(&[vec![3.0]]).unwrap()),
            down: None,
        };
        let out = gcn_layer_forward(&tape, a, h, &layer).unwrap();
        assert_eq!(tape.value(out).at(0, 0), 8.0);
    }

    #[test]
    fn zero_features_stay_zero() {
        let tape: Tape<f64> = Tape::new();
        let a = tape.constant(T64::eye(3));
        let h = tape.leaf(T64::zeros(&[3, 4]));
        let layer = GcnLayerVars {
            w: tape.leaf(T64::ones(&[4, 4])),
            down: None,
        };
        let out = gcn_layer_forward(&tape, a, h, &layer).unwrap();
        assert_eq!(tape.value(out), T64::zeros(&[3, 4]));
    }

    #[test]
    fn missing_downsample_is_a_shape_error() {
        let tape: Tape<f64> = Tape::new();
        let a = tape.constant(T64::eye(2));
        let h = tape.leaf(T64::ones(&[2, 3]));
        let layer = GcnLayerVars {
            w: tape.leaf(T64::ones(&[3, 5])),
            down: None,
        };
        assert!(matches!(
            gcn_layer_forward(&tape, a, h, &layer),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn stack_of_one_equals_single_layer() {
        let tape: Tape<f64> = Tape::new();
        let a = tape.constant(T64::eye(2));
        let h = tape.leaf(T64::from_rows(&[vec![1.0, -1.0], vec![2.0, 0.3]]).unwrap());
        let w = tape.leaf(T64::from_rows(&[vec![0.5, 0.1], vec![-0.2, 0.7]]).unwrap());
        let layer = GcnLayerVars { w, down: None };
        let single = gcn_layer_forward(&tape, a, h, &layer).unwrap();
        let stacked = gcn_stack(&tape, a, h, std::slice::from_ref(&layer)).unwrap();
        assert_eq!(tape.value(single), tape.value(stacked));
    }

    #[test]
    fn empty_stack_is_identity() {
        let tape: Tape<f64> = Tape::new();
        let a = tape.constant(T64::eye(2));
        let h = tape.leaf(T64::ones(&[2, 3]));
        let out = gcn_stack(&tape, a, h, &[]).unwrap();
        assert_eq!(out, h);
    }

    #[test]
    fn three_identity_layers_compose_the_one_layer_rule() {
        // On A_hat = I with W = I the layer rule is h -> ReLU(2h) = 2h for
        // nonnegative h, so three layers give 8h.
        let tape: Tape<f64> = Tape::new();
        let a = tape.constant(T64::eye(2));
        let h = tape.leaf(T64::from_rows(&[vec![1.0, 0.25], vec![0.0, 2.0]]).unwrap());
        let layers: Vec<GcnLayerVars> = (0..3)
            .map(|_| GcnLayerVars {
                w: tape.leaf(T64::eye(2)),
                down: None,
            })
            .collect();
        let out = gcn_stack(&tape, a, h, &layers).unwrap();
        assert_eq!(tape.value(out), tape.value(h).scale(8.0));
    }

    #[test]
    fn assign_zero_preactivation_is_uniform() {
        let tape: Tape<f64> = Tape::new();
        let a = tape.constant(T64::eye(3));
        let x = tape.leaf(T64::ones(&[3, 2]));
        let w = tape.leaf(T64::zeros(&[2, 4]));
        let s = diffpool_assign(&tape, a, x, w).unwrap();
        let sv = tape.value(s);
        for i in 0..3 {
            for j in 0..4 {
                assert!((sv.at(i, j) - 0.25).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn assign_dominant_logit_is_near_one_hot() {
        let tape: Tape<f64> = Tape::new();
        let a = tape.constant(T64::eye(2));
        // Pre-activation +50 on entry (0, 1).
        let x = tape.leaf(T64::from_rows(&[vec![1.0], vec![0.0]]).unwrap());
        let w = tape.leaf(T64::from_rows(&[vec![0.0, 50.0, 0.0]]).unwrap());
        let s = diffpool_assign(&tape, a, x, w).unwrap();
        let sv = tape.value(s);
        assert!(sv.at(0, 1) > 1.0 - 1e-12);
        // The zero row stays uniform.
        assert!((sv.at(1, 0) - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn assign_scaled_identity_preactivation_is_identity() {
        let tape: Tape<f64> = Tape::new();
        let n = 3;
        let a = tape.constant(T64::eye(n));
        let x = tape.leaf(T64::eye(n));
        let w = tape.leaf(T64::eye(n).scale(50.0));
        let s = diffpool_assign(&tape, a, x, w).unwrap();
        let sv = tape.value(s);
        for i in 0..n {
            for j in 0..n {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((sv.at(i, j) - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn apply_identity_assignment_is_identity() {
        let tape: Tape<f64> = Tape::new();
        let s = tape.leaf(T64::eye(3));
        let x =
            tape.leaf(T64::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]).unwrap());
        let a = tape.constant(T64::eye(3));
        let (xp, ap) = diffpool_apply(&tape, s, x, a).unwrap();
        assert_eq!(tape.value(xp), tape.value(x));
        assert_eq!(tape.value(ap), tape.value(a));
    }

    #[test]
    fn apply_all_ones_column_sums_everything() {
        let tape: Tape<f64> = Tape::new();
        let s = tape.leaf(T64::ones(&[3, 1]));
        let x =
            tape.leaf(T64::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]).unwrap());
        let mut a_val = T64::eye(3);
        a_val.data_mut()[1] = 0.5; // (0, 1)
        a_val.data_mut()[3] = 0.5; // (1, 0)
        let a = tape.constant(a_val.clone());
        let (xp, ap) = diffpool_apply(&tape, s, x, a).unwrap();
        assert_eq!(tape.value(xp).data(), &[9.0, 12.0]);
        let total: f64 = a_val.data().iter().sum();
        assert!((tape.value(ap).at(0, 0) - total).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn assignment_rows_are_stochastic(
            seed in 0u64..500,
            n in 2usize..6,
            k in 1usize..4,
        ) {
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(seed);
            let tape: Tape<f64> = Tape::new();
            let a = tape.constant(T64::rand_uniform(&mut rng, &[n, n], 0.0, 1.0));
            let x = tape.leaf(T64::rand_uniform(&mut rng, &[n, 3], -2.0, 2.0));
            let w = tape.leaf(T64::rand_uniform(&mut rng, &[3, k], -2.0, 2.0));
            let s = diffpool_assign(&tape, a, x, w).unwrap();
            let sv = tape.value(s);
            for i in 0..n {
                let row_sum: f64 = (0..k).map(|j| sv.at(i, j)).sum();
                prop_assert!((row_sum - 1.0).abs() < 1e-9);
                for j in 0..k {
                    prop_assert!(sv.at(i, j) >= 0.0);
                }
            }
        }

        #[test]
        fn pooled_adjacency_inherits_symmetry_and_sign(
            seed in 0u64..500,
            n in 2usize..6,
            k in 1usize..4,
        ) {
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(seed);
            // Random symmetric nonnegative A_hat.
            let mut a_val = T64::zeros(&[n, n]);
            for i in 0..n {
                for j in i..n {
                    let v: f64 = rand::Rng::gen_range(&mut rng, 0.0..1.0);
                    a_val.data_mut()[i * n + j] = v;
                    a_val.data_mut()[j * n + i] = v;
                }
            }
            let tape: Tape<f64> = Tape::new();
            let a = tape.constant(a_val);
            let x = tape.leaf(T64::rand_uniform(&mut rng, &[n, 3], -1.0, 1.0));
            let w = tape.leaf(T64::rand_uniform(&mut rng, &[3, k], -1.0, 1.0));
            let s = diffpool_assign(&tape, a, x, w).unwrap();
            let (_, ap) = diffpool_apply(&tape, s, x, a).unwrap();
            let apv = tape.value(ap);
            for i in 0..k {
                for j in 0..k {
                    prop_assert!((apv.at(i, j) - apv.at(j, i)).abs() < 1e-12);
                    prop_assert!(apv.at(i, j) >= 0.0);
                }
            }
        }

        #[test]
        fn pooling_is_permutation_consistent(
            seed in 0u64..200,
        ) {
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(seed);
            let n = 4;
            let perm = [2usize, 0, 3, 1];
            // Symmetric A_hat and features.
            let mut a_val = T64::zeros(&[n, n]);
            for i in 0..n {
                for j in i..n {
                    let v: f64 = rand::Rng::gen_range(&mut rng, 0.0..1.0);
                    a_val.data_mut()[i * n + j] = v;
                    a_val.data_mut()[j * n + i] = v;
                }
            }
            let x_val = T64::rand_uniform(&mut rng, &[n, 3], -1.0, 1.0);
            let s_val = {
                let raw = T64::rand_uniform(&mut rng, &[n, 2], -1.0, 1.0);
                raw.softmax(1).unwrap()
            };

            // Permuted copies: row/col permutation of A, row permutation of X and S.
            let mut a_perm = T64::zeros(&[n, n]);
            let mut x_perm = T64::zeros(&[n, 3]);
            let mut s_perm = T64::zeros(&[n, 2]);
            for i in 0..n {
                for j in 0..n {
                    a_perm.data_mut()[i * n + j] = a_val.at(perm[i], perm[j]);
                }
                for j in 0..3 {
                    x_perm.data_mut()[i * 3 + j] = x_val.at(perm[i], j);
                }
                for j in 0..2 {
                    s_perm.data_mut()[i * 2 + j] = s_val.at(perm[i], j);
                }
            }

            let pool = |a_v: T64, x_v: T64, s_v: T64| {
                let tape: Tape<f64> = Tape::new();
                let a = tape.constant(a_v);
                let x = tape.leaf(x_v);
                let s = tape.leaf(s_v);
                let (xp, ap) = diffpool_apply(&tape, s, x, a).unwrap();
                (tape.value(xp), tape.value(ap))
            };
            let (xp, ap) = pool(a_val, x_val, s_val);
            let (xp2, ap2) = pool(a_perm, x_perm, s_perm);
            for (a, b) in xp.data().iter().zip(xp2.data()) {
                prop_assert!((a - b).abs() < 1e-10);
            }
            for (a, b) in ap.data().iter().zip(ap2.data()) {
                prop_assert!((a - b).abs() < 1e-10);
            }
        }
    }
}
