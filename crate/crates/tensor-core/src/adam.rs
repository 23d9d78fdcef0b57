use crate::{Result, Scalar, Tape, TensorError, TensorId};

/// Adam hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamParams {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        AdamParams { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// First/second moment accumulators for a fixed parameter list.
#[derive(Debug, Clone)]
pub struct AdamState<S> {
    pub hyper: AdamParams,
    pub step: u64,
    m: Vec<Vec<S>>,
    v: Vec<Vec<S>>,
}

impl<S: Scalar> AdamState<S> {
    pub fn new(hyper: AdamParams, param_sizes: &[usize]) -> Self {
        AdamState {
            hyper,
            step: 0,
            m: param_sizes.iter().map(|&n| vec![S::zero(); n]).collect(),
            v: param_sizes.iter().map(|&n| vec![S::zero(); n]).collect(),
        }
    }
}

/// Bias-corrected Adam update applied in place to tape leaves.
///
/// `params` must match the list the state was created with; gradients are
/// read from each leaf's accumulated grad (missing grad counts as zero).
pub fn adam_step<S: Scalar>(
    tape: &mut Tape<S>,
    params: &[TensorId],
    state: &mut AdamState<S>,
) -> Result<()> {
    if params.len() != state.m.len() {
        return Err(TensorError::ShapeMismatch {
            op: "adam_step",
            left: vec![params.len()],
            right: vec![state.m.len()],
        });
    }
    state.step += 1;
    let t = state.step as i32;
    let b1 = S::c(state.hyper.beta1);
    let b2 = S::c(state.hyper.beta2);
    let lr = S::c(state.hyper.lr);
    let eps = S::c(state.hyper.eps);
    let corr1 = S::one() - b1.powi(t);
    let corr2 = S::one() - b2.powi(t);

    for (idx, &p) in params.iter().enumerate() {
        let n = tape.data(p).len();
        if state.m[idx].len() != n {
            return Err(TensorError::ShapeMismatch {
                op: "adam_step",
                left: vec![n],
                right: vec![state.m[idx].len()],
            });
        }
        let grad: Vec<S> = match tape.grad(p) {
            Some(g) => g.to_vec(),
            None => vec![S::zero(); n],
        };
        let m = &mut state.m[idx];
        let v = &mut state.v[idx];
        let data = tape.data_mut(p);
        for j in 0..n {
            let g = grad[j];
            m[j] = b1 * m[j] + (S::one() - b1) * g;
            v[j] = b2 * v[j] + (S::one() - b2) * g * g;
            let m_hat = m[j] / corr1;
            let v_hat = v[j] / corr2;
            data[j] = data[j] - lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}
