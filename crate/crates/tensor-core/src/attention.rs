use crate::{Axis, Result, Scalar, Tape, TensorError, TensorId};

/// Projection weights of one attention block, recorded on the tape.
///
/// Keys carry no bias: a key bias adds the same offset to every score in
/// a softmax row, so it can never affect the output.
#[derive(Debug, Clone, Copy)]
pub struct AttentionWeights {
    pub wq: TensorId,
    pub bq: TensorId,
    pub wk: TensorId,
    pub wv: TensorId,
    pub bv: TensorId,
    pub wo: TensorId,
    pub bo: TensorId,
}

/// Multi-head scaled dot-product attention over token matrices.
///
/// `q`, `k`, `v` are `[tokens x d_model]`; each head attends with scale
/// `1/sqrt(d_head)`, heads are concatenated and passed through the output
/// projection. `mask`, when present, is `[q_tokens x k_tokens]` with
/// `true` marking attendable positions.
pub fn multi_head_attention<S: Scalar>(
    tape: &mut Tape<S>,
    q: TensorId,
    k: TensorId,
    v: TensorId,
    weights: &AttentionWeights,
    num_heads: usize,
    mask: Option<&[bool]>,
) -> Result<TensorId> {
    let d_model = tape.shape(q)[1];
    if num_heads == 0 || d_model % num_heads != 0 {
        return Err(TensorError::InvalidConfig(format!(
            "d_model {d_model} not divisible by num_heads {num_heads}"
        )));
    }
    let d_head = d_model / num_heads;
    let n_q = tape.shape(q)[0];
    let n_k = tape.shape(k)[0];

    let qp = tape.matmul(q, weights.wq)?;
    let qp = tape.add_row_bias(qp, weights.bq)?;
    let kp = tape.matmul(k, weights.wk)?;
    let vp = tape.matmul(v, weights.wv)?;
    let vp = tape.add_row_bias(vp, weights.bv)?;

    let mask_bias = match mask {
        Some(m) => {
            if m.len() != n_q * n_k {
                return Err(TensorError::ShapeMismatch {
                    op: "attention_mask",
                    left: vec![n_q, n_k],
                    right: vec![m.len()],
                });
            }
            let data: Vec<S> = m
                .iter()
                .map(|&allowed| if allowed { S::zero() } else { S::c(-1e30) })
                .collect();
            Some(tape.constant(data, &[n_q, n_k])?)
        }
        None => None,
    };

    let scale = 1.0 / (d_head as f64).sqrt();
    let mut head_outputs = Vec::with_capacity(num_heads);
    for h in 0..num_heads {
        let (lo, hi) = (h * d_head, (h + 1) * d_head);
        let qh = tape.slice_cols(qp, lo, hi)?;
        let kh = tape.slice_cols(kp, lo, hi)?;
        let vh = tape.slice_cols(vp, lo, hi)?;
        let kt = tape.transpose(kh)?;
        let scores = tape.matmul(qh, kt)?;
        let mut scores = tape.scale(scores, scale);
        if let Some(mb) = mask_bias {
            scores = tape.add(scores, mb)?;
        }
        let attn = tape.softmax(scores, Axis::Cols)?;
        head_outputs.push(tape.matmul(attn, vh)?);
    }
    let concat = tape.concat_cols(&head_outputs)?;
    let out = tape.matmul(concat, weights.wo)?;
    tape.add_row_bias(out, weights.bo)
}
