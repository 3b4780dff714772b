//! Finite-difference verification of reverse-mode gradients.

use super::tape::{Tape, TapeError, Value};
use super::tensor::Tensor;

pub const GRAD_CHECK_EPS: f64 = 1e-5;

/// Compare the reverse-mode gradient of a scalar function against central
/// finite differences, coordinate by coordinate.
///
/// Returns the maximum over coordinates of
/// `|g_ad - g_fd| / max(1, |g_ad|, |g_fd|)`.
///
/// The function is re-evaluated on a fresh tape for every probe, so it
/// must be a pure function of `x`. Inputs should sit away from relu
/// kinks and selection ties; at such points the two estimates legitimately
/// disagree.
pub fn grad_check<F>(f: F, x: &Tensor, eps: f64) -> Result<f64, TapeError>
where
    F: Fn(&mut Tape, Value) -> Result<Value, TapeError>,
{
    let eval = |probe: &Tensor| -> Result<f64, TapeError> {
        let mut tape = Tape::new();
        let v = tape.param(probe.clone());
        let out = f(&mut tape, v)?;
        let t = tape.value(out);
        if !t.is_scalar() {
            return Err(TapeError::NonScalarRoot(t.rows(), t.cols()));
        }
        let y = t.scalar_value();
        if !y.is_finite() {
            return Err(TapeError::NonFinite { op: "grad_check" });
        }
        Ok(y)
    };

    // Reverse-mode gradient.
    let g_ad = {
        let mut tape = Tape::new();
        let v = tape.param(x.clone());
        let out = f(&mut tape, v)?;
        let t = tape.value(out);
        if !t.is_scalar() {
            return Err(TapeError::NonScalarRoot(t.rows(), t.cols()));
        }
        if !t.all_finite() {
            return Err(TapeError::NonFinite { op: "grad_check" });
        }
        tape.backward(out)?.get(v)
    };

    let mut max_rel = 0.0f64;
    let mut probe = x.clone();
    for i in 0..x.len() {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + eps;
        let plus = eval(&probe)?;
        probe.data_mut()[i] = orig - eps;
        let minus = eval(&probe)?;
        probe.data_mut()[i] = orig;
        let fd = (plus - minus) / (2.0 * eps);
        let ad = g_ad.data()[i];
        let rel = (ad - fd).abs() / 1.0f64.max(ad.abs()).max(fd.abs());
        max_rel = max_rel.max(rel);
    }
    Ok(max_rel)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn square_function_matches() {
        // f(x) = x * x at 3: gradient 6 on both routes.
        let err = grad_check(
            |tape, x| tape.mul_scalar(x, x),
            &Tensor::scalar(3.0),
            GRAD_CHECK_EPS,
        )
        .unwrap();
        assert!(err < 1e-7, "rel err {err}");
    }

    #[test]
    fn two_layer_tanh_mlp_matches() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let w1 = Tensor::from_fn(5, 7, |_, _| rng.random_range(-0.8..0.8));
        let w2 = Tensor::from_fn(7, 1, |_, _| rng.random_range(-0.8..0.8));
        let x = Tensor::from_fn(1, 5, |_, _| rng.random_range(-1.0..1.0));

        // Gradient w.r.t. the input of scalar MLP output.
        let err = grad_check(
            |tape, x| {
                let w1 = tape.constant(w1.clone());
                let w2 = tape.constant(w2.clone());
                let h = tape.matmul(x, w1)?;
                let h = tape.tanh(h);
                tape.matmul(h, w2)
            },
            &x,
            GRAD_CHECK_EPS,
        )
        .unwrap();
        assert!(err < 1e-6, "rel err {err}");

        // Gradient w.r.t. the first weight matrix.
        let err = grad_check(
            |tape, w| {
                let xv = tape.constant(x.clone());
                let w2 = tape.constant(w2.clone());
                let h = tape.matmul(xv, w)?;
                let h = tape.tanh(h);
                tape.matmul(h, w2)
            },
            &w1,
            GRAD_CHECK_EPS,
        )
        .unwrap();
        assert!(err < 1e-6, "rel err {err}");
    }

    #[test]
    fn relu_away_from_kinks_matches() {
        // Preactivations are kept above 1e-3 in magnitude so the central
        // difference never straddles the kink.
        let x = Tensor::from_vec(1, 4, vec![0.5, -0.75, 1.25, -0.01]);
        let err = grad_check(
            |tape, x| {
                let h = tape.relu(x);
                let ones = tape.constant(Tensor::ones(4, 1));
                tape.matmul(h, ones)
            },
            &x,
            GRAD_CHECK_EPS,
        )
        .unwrap();
        assert!(err < 1e-5, "rel err {err}");
    }

    #[test]
    fn every_primitive_passes_grad_check() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let x = Tensor::from_fn(3, 4, |_, _| rng.random_range(-1.0..1.0) + 1.5);
        let to_scalar = |tape: &mut Tape, v: Value| -> Result<Value, TapeError> {
            let cols = tape.value(v).cols();
            let m = tape.mean_rows(v)?;
            let ones = tape.constant(Tensor::ones(cols, 1));
            tape.matmul(m, ones)
        };

        let other = Tensor::from_fn(3, 4, |_, _| rng.random_range(-1.0..1.0));
        let w = Tensor::from_fn(4, 2, |_, _| rng.random_range(-1.0..1.0));
        let bias = Tensor::from_fn(1, 4, |_, _| rng.random_range(-1.0..1.0));
        let coeffs = vec![0.3, -1.2, 2.0];
        let gather_idx = vec![2, 0, 0, 1];
        let scatter_idx = vec![1, 4, 1];
        let col_idx = vec![3, 1, 0, 2, 1, 1];

        type Build = Box<dyn Fn(&mut Tape, Value) -> Result<Value, TapeError>>;
        let cases: Vec<(&str, Build)> = vec![
            ("matmul", {
                let w = w.clone();
                Box::new(move |t, v| {
                    let wv = t.constant(w.clone());
                    t.matmul(v, wv)
                })
            }),
            ("add", {
                let o = other.clone();
                Box::new(move |t, v| {
                    let ov = t.constant(o.clone());
                    t.add(v, ov)
                })
            }),
            ("add_bias", {
                let b = bias.clone();
                Box::new(move |t, v| {
                    let bv = t.constant(b.clone());
                    t.add_bias(v, bv)
                })
            }),
            ("scale", Box::new(|t, v| Ok(t.scale(v, -2.5)))),
            ("row_scale", {
                let c = coeffs.clone();
                Box::new(move |t, v| t.row_scale(v, c.clone()))
            }),
            ("concat_cols", {
                let o = other.clone();
                Box::new(move |t, v| {
                    let ov = t.constant(o.clone());
                    t.concat_cols(v, ov)
                })
            }),
            ("concat_rows", {
                let o = other.clone();
                Box::new(move |t, v| {
                    let ov = t.constant(o.clone());
                    t.concat_rows(v, ov)
                })
            }),
            ("row_gather", {
                let ix = gather_idx.clone();
                Box::new(move |t, v| t.row_gather(v, ix.clone()))
            }),
            ("row_scatter_add", {
                let ix = scatter_idx.clone();
                Box::new(move |t, v| t.row_scatter_add(v, ix.clone(), 6))
            }),
            ("gather_cols", {
                let ix = col_idx.clone();
                Box::new(move |t, v| t.gather_cols(v, ix.clone(), 2))
            }),
            ("relu", Box::new(|t, v| Ok(t.relu(v)))),
            ("sigmoid", Box::new(|t, v| Ok(t.sigmoid(v)))),
            ("tanh", Box::new(|t, v| Ok(t.tanh(v)))),
            ("softmax_rows", Box::new(|t, v| t.softmax(v, crate::autodiff::Axis::Rows))),
            ("softmax_cols", Box::new(|t, v| t.softmax(v, crate::autodiff::Axis::Cols))),
            ("mean_rows", Box::new(|t, v| t.mean_rows(v))),
            ("sum_rows", Box::new(|t, v| t.sum_rows(v))),
            ("dropout", Box::new(|t, v| t.dropout(v, 0.4, 77))),
        ];

        for (name, build) in cases {
            // Reduce to a scalar through non-uniform column weights so
            // that functions like softmax (whose row sums are constant)
            // keep a nonzero gradient.
            let err = grad_check(
                |tape, v| {
                    let y = build(tape, v)?;
                    let cols = tape.value(y).cols();
                    let w = Tensor::from_fn(cols, 1, |r, _| 0.3 + 0.7 * (r as f64 + 1.0));
                    let wv = tape.constant(w);
                    let per_row = tape.matmul(y, wv)?;
                    tape.sum_rows(per_row)
                },
                &x,
                GRAD_CHECK_EPS,
            )
            .unwrap();
            assert!(err < 1e-4, "{name}: rel err {err}");
        }

        // cross_entropy_logits is scalar-valued already.
        let logits = Tensor::from_fn(3, 4, |_, _| rng.random_range(-2.0..2.0));
        let err = grad_check(
            |tape, v| tape.cross_entropy_logits(v, &[1, 3, 0]),
            &logits,
            GRAD_CHECK_EPS,
        )
        .unwrap();
        assert!(err < 1e-6, "cross_entropy rel err {err}");

        // mul_scalar, both arguments.
        let err = grad_check(
            |tape, v| {
                let s = tape.constant(Tensor::scalar(1.7));
                let y = tape.mul_scalar(v, s)?;
                to_scalar(tape, y)
            },
            &x,
            GRAD_CHECK_EPS,
        )
        .unwrap();
        assert!(err < 1e-6, "mul_scalar rel err {err}");
    }
}
