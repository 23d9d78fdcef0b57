//! Per-primitive finite-difference checks: every op's analytic gradient
//! must match central differences (h = 1e-5) to relative error <= 1e-6
//! at randomly sampled smooth points.

use hiact_tensor_core::{
    gradient_check, multi_head_attention, Axis, AttentionWeights, Tape64, TensorError, TensorId,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const H: f64 = 1e-5;
const TOL: f64 = 1e-6;

fn rand_leaf(t: &mut Tape64, shape: &[usize], rng: &mut ChaCha8Rng) -> TensorId {
    let n: usize = shape.iter().product();
    let data: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.5..1.5)).collect();
    t.leaf(data, shape, true).unwrap()
}

fn check_op<F>(name: &str, seed: u64, shapes: &[&[usize]], build: F)
where
    F: FnMut(&mut Tape64, &[TensorId]) -> hiact_tensor_core::Result<TensorId> + Copy,
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Tape64::new();
    let params: Vec<TensorId> = shapes.iter().map(|s| rand_leaf(&mut t, s, &mut rng)).collect();
    let mut build = build;
    let worst = gradient_check(
        &mut t,
        &params,
        |tape| build(tape, &params),
        H,
        32,
        &mut rng,
    )
    .unwrap();
    assert!(worst <= TOL, "{name}: max relative error {worst:.3e} > {TOL:.0e}");
}

#[test]
fn grad_matmul() {
    check_op("matmul", 100, &[&[3, 4], &[4, 2]], |t, p| {
        let c = t.matmul(p[0], p[1])?;
        Ok(t.mean_all(c))
    });
}

#[test]
fn grad_add_sub_mul() {
    check_op("add", 101, &[&[2, 3], &[2, 3]], |t, p| {
        let c = t.add(p[0], p[1])?;
        Ok(t.mean_all(c))
    });
    check_op("sub", 102, &[&[2, 3], &[2, 3]], |t, p| {
        let c = t.sub(p[0], p[1])?;
        let sq = t.mul(c, c)?;
        Ok(t.mean_all(sq))
    });
    check_op("mul", 103, &[&[2, 3], &[2, 3]], |t, p| {
        let c = t.mul(p[0], p[1])?;
        Ok(t.mean_all(c))
    });
}

#[test]
fn grad_row_bias() {
    check_op("add_row_bias", 104, &[&[3, 4], &[4]], |t, p| {
        let c = t.add_row_bias(p[0], p[1])?;
        let sq = t.mul(c, c)?;
        Ok(t.mean_all(sq))
    });
}

#[test]
fn grad_gelu_exp_scale_clamp() {
    check_op("gelu", 105, &[&[2, 5]], |t, p| {
        let g = t.gelu(p[0]);
        Ok(t.mean_all(g))
    });
    check_op("exp", 106, &[&[2, 3]], |t, p| {
        let e = t.exp(p[0]);
        Ok(t.mean_all(e))
    });
    check_op("scale", 107, &[&[4]], |t, p| {
        let s = t.scale(p[0], -2.5);
        let sq = t.mul(s, s)?;
        Ok(t.mean_all(sq))
    });
    // inputs in (-1.5, 1.5) stay away from the clamp kinks at +-3
    check_op("clamp", 108, &[&[6]], |t, p| {
        let c = t.clamp(p[0], -3.0, 3.0);
        let sq = t.mul(c, c)?;
        Ok(t.mean_all(sq))
    });
}

#[test]
fn grad_softmax_both_axes() {
    check_op("softmax_cols", 109, &[&[3, 4]], |t, p| {
        let y = t.softmax(p[0], Axis::Cols)?;
        let sq = t.mul(y, y)?;
        Ok(t.mean_all(sq))
    });
    check_op("softmax_rows", 110, &[&[3, 4]], |t, p| {
        let y = t.softmax(p[0], Axis::Rows)?;
        let sq = t.mul(y, y)?;
        Ok(t.mean_all(sq))
    });
}

#[test]
fn grad_layer_norm() {
    check_op("layer_norm", 111, &[&[3, 6], &[6], &[6]], |t, p| {
        let y = t.layer_norm(p[0], p[1], p[2], 1e-5)?;
        let sq = t.mul(y, y)?;
        Ok(t.mean_all(sq))
    });
}

#[test]
fn grad_shape_ops() {
    check_op("transpose", 112, &[&[3, 4]], |t, p| {
        let y = t.transpose(p[0])?;
        let sq = t.mul(y, y)?;
        Ok(t.mean_all(sq))
    });
    check_op("reshape", 113, &[&[3, 4]], |t, p| {
        let y = t.reshape(p[0], &[2, 6])?;
        let sq = t.mul(y, y)?;
        Ok(t.mean_all(sq))
    });
    check_op("slice_concat", 114, &[&[3, 6], &[3, 2]], |t, p| {
        let a = t.slice_cols(p[0], 1, 4)?;
        let c = t.concat_cols(&[a, p[1]])?;
        let rows = t.concat_rows(&[c, c])?;
        let top = t.slice_rows(rows, 1, 4)?;
        let sq = t.mul(top, top)?;
        Ok(t.mean_all(sq))
    });
}

#[test]
fn grad_kl_gaussian() {
    check_op("kl_gaussian", 115, &[&[8], &[8]], |t, p| {
        Ok(t.kl_gaussian(p[0], p[1])?)
    });
}

#[test]
fn grad_l1_away_from_kinks() {
    // probe away from |pred - target| = 0: targets offset by at least 0.5
    let mut rng = ChaCha8Rng::seed_from_u64(116);
    let mut t = Tape64::new();
    let pred = rand_leaf(&mut t, &[2, 4], &mut rng);
    let offset: Vec<f64> = t
        .data(pred)
        .iter()
        .map(|&v| v + if rng.gen_bool(0.5) { 0.5 } else { -0.5 } + rng.gen_range(0.0..0.3))
        .collect();
    let target = t.constant(offset, &[2, 4]).unwrap();
    let worst = gradient_check(
        &mut t,
        &[pred],
        |tape| tape.l1_loss(pred, target),
        H,
        16,
        &mut rng,
    )
    .unwrap();
    assert!(worst <= TOL, "l1: {worst:.3e}");
}

#[test]
fn grad_multi_head_attention() {
    let mut rng = ChaCha8Rng::seed_from_u64(117);
    let mut t = Tape64::new();
    let d = 6;
    let x = rand_leaf(&mut t, &[3, d], &mut rng);
    let mk = |t: &mut Tape64, rng: &mut ChaCha8Rng, r: usize, c: usize| {
        let data: Vec<f64> = (0..r * c).map(|_| rng.gen_range(-0.4..0.4)).collect();
        t.leaf(data, &[r, c], true).unwrap()
    };
    let w = AttentionWeights {
        wq: mk(&mut t, &mut rng, d, d),
        bq: mk(&mut t, &mut rng, 1, d),
        wk: mk(&mut t, &mut rng, d, d),
        wv: mk(&mut t, &mut rng, d, d),
        bv: mk(&mut t, &mut rng, 1, d),
        wo: mk(&mut t, &mut rng, d, d),
        bo: mk(&mut t, &mut rng, 1, d),
    };
    // biases recorded as [1,d] leaves; reshape to [d] vectors for the op
    let params = [x, w.wq, w.wk, w.wv, w.wo];
    let worst = gradient_check(
        &mut t,
        &params,
        |tape| {
            let bq = tape.reshape(w.bq, &[d])?;
            let bv = tape.reshape(w.bv, &[d])?;
            let bo = tape.reshape(w.bo, &[d])?;
            let w2 = AttentionWeights { wq: w.wq, bq, wk: w.wk, wv: w.wv, bv, wo: w.wo, bo };
            let out = multi_head_attention(tape, x, x, x, &w2, 2, None)?;
            let sq = tape.mul(out, out)?;
            Ok(tape.mean_all(sq))
        },
        H,
        48,
        &mut rng,
    )
    .unwrap();
    assert!(worst <= TOL, "attention: {worst:.3e}");
}

#[test]
fn gradient_check_linear_model_is_tight() {
    let mut rng = ChaCha8Rng::seed_from_u64(118);
    let mut t = Tape64::new();
    let w = rand_leaf(&mut t, &[4, 2], &mut rng);
    let x = t
        .constant((0..12).map(|_| rng.gen_range(-1.0..1.0)).collect(), &[3, 4])
        .unwrap();
    let target = t.constant(vec![10.0; 6], &[3, 2]).unwrap(); // far from any kink
    let worst = gradient_check(
        &mut t,
        &[w],
        |tape| {
            let pred = tape.matmul(x, w)?;
            tape.l1_loss(pred, target)
        },
        H,
        16,
        &mut rng,
    )
    .unwrap();
    assert!(worst <= 1e-6);
}

#[test]
fn gradient_check_excludes_frozen_params() {
    let mut rng = ChaCha8Rng::seed_from_u64(119);
    let mut t = Tape64::new();
    let frozen = t.constant(vec![1.0, 2.0], &[2]).unwrap();
    let live = t.leaf(vec![0.5, -0.5], &[2], true).unwrap();
    // both listed; only the trainable one may be probed
    let worst = gradient_check(
        &mut t,
        &[frozen, live],
        |tape| {
            let s = tape.mul(frozen, live)?;
            Ok(tape.sum_all(s))
        },
        H,
        64,
        &mut rng,
    )
    .unwrap();
    assert!(worst <= TOL);

    // all-frozen parameter lists are a contract error
    let err = gradient_check(&mut t, &[frozen], |tape| Ok(tape.sum_all(frozen)), H, 4, &mut rng);
    assert!(matches!(err, Err(TensorError::ContractViolation(_))));
}

#[test]
fn gradient_check_rejects_non_finite_loss() {
    let mut rng = ChaCha8Rng::seed_from_u64(120);
    let mut t = Tape64::new();
    let p = t.leaf(vec![800.0], &[1], true).unwrap();
    let err = gradient_check(
        &mut t,
        &[p],
        |tape| {
            let e = tape.exp(p); // overflows to +inf
            Ok(tape.sum_all(e))
        },
        H,
        4,
        &mut rng,
    );
    assert!(matches!(err, Err(TensorError::NonFinite(_))));
}
