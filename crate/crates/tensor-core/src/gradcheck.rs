use crate::{Result, Tape, TensorError, TensorId};
use rand::Rng;

/// Compare reverse-mode gradients against central finite differences.
///
/// `loss_fn` rebuilds the scalar loss from the current leaf values; it must
/// be deterministic (freeze any sampled noise outside the closure). For each
/// of `n_probes` randomly chosen scalar entries of the `requires_grad`
/// parameters, the analytic gradient is compared to
/// `(f(x+h) - f(x-h)) / 2h` and the worst relative error
/// `|g_ad - g_fd| / max(1e-12, |g_ad| + |g_fd|)` is returned.
pub fn gradient_check<F>(
    tape: &mut Tape<f64>,
    params: &[TensorId],
    mut loss_fn: F,
    h: f64,
    n_probes: usize,
    rng: &mut impl Rng,
) -> Result<f64>
where
    F: FnMut(&mut Tape<f64>) -> Result<TensorId>,
{
    if h <= 0.0 || n_probes == 0 {
        return Err(TensorError::ContractViolation(
            "gradient_check requires h > 0 and n_probes >= 1".into(),
        ));
    }
    // Frozen parameters are excluded from probing.
    let trainable: Vec<TensorId> = params
        .iter()
        .copied()
        .filter(|&p| tape.requires_grad(p))
        .collect();
    if trainable.is_empty() {
        return Err(TensorError::ContractViolation(
            "gradient_check: no trainable parameters".into(),
        ));
    }

    let base = tape.checkpoint();
    let eval = |tape: &mut Tape<f64>, loss_fn: &mut F| -> Result<f64> {
        let loss = loss_fn(tape)?;
        let value = tape.value(loss);
        tape.truncate(base);
        if !value.is_finite() {
            return Err(TensorError::NonFinite("gradient_check loss".into()));
        }
        Ok(value)
    };

    // One analytic sweep with clean grads.
    tape.zero_grad();
    let loss = loss_fn(tape)?;
    if !tape.value(loss).is_finite() {
        return Err(TensorError::NonFinite("gradient_check loss".into()));
    }
    tape.backward(loss)?;
    let analytic: Vec<Vec<f64>> = trainable
        .iter()
        .map(|&p| tape.grad(p).expect("trainable leaf has grad").to_vec())
        .collect();
    tape.truncate(base);

    let mut worst = 0.0f64;
    for _ in 0..n_probes {
        let pi = rng.gen_range(0..trainable.len());
        let p = trainable[pi];
        let ei = rng.gen_range(0..tape.data(p).len());
        let original = tape.data(p)[ei];

        tape.data_mut(p)[ei] = original + h;
        let plus = eval(tape, &mut loss_fn)?;
        tape.data_mut(p)[ei] = original - h;
        let minus = eval(tape, &mut loss_fn)?;
        tape.data_mut(p)[ei] = original;

        let g_fd = (plus - minus) / (2.0 * h);
        let g_ad = analytic[pi][ei];
        let rel = (g_ad - g_fd).abs() / (g_ad.abs() + g_fd.abs()).max(1e-12);
        if rel > worst {
            worst = rel;
        }
    }
    Ok(worst)
}
