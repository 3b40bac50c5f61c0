//! Central finite-difference checks for the analytic loss gradients.

use serde::{Deserialize, Serialize};

use super::{custom_loss, custom_loss_value, AttentionParams, Block, LossError, LstmParams, PairReduction};

/// Denominator floor for relative errors. Central differences at step 1e-5
/// carry roundoff near `eps * |loss| / step`, about 1e-10, so components
/// smaller than this floor are judged on absolute error instead.
pub const RELATIVE_FLOOR: f64 = 1e-6;

/// `|a - b| / max(|a|, |b|, RELATIVE_FLOOR)`
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(RELATIVE_FLOOR)
}

/// Central differences `(f(x + h e_i) - f(x - h e_i)) / 2h` for every i.
pub fn central_differences<F>(f: F, point: &[f64], step: f64) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64,
{
    let mut x = point.to_vec();
    (0..point.len())
        .map(|i| {
            x[i] = point[i] + step;
            let plus = f(&x);
            x[i] = point[i] - step;
            let minus = f(&x);
            x[i] = point[i];
            (plus - minus) / (2.0 * step)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_relative_error: f64,
    pub max_absolute_error: f64,
    /// Index into `[params..., logits...]` of the worst relative error.
    pub worst_index: usize,
}

impl GradCheckReport {
    pub fn passed(&self, tolerance: f64) -> bool {
        self.max_relative_error <= tolerance
    }
}

pub fn compare(analytic: &[f64], numeric: &[f64]) -> GradCheckReport {
    assert_eq!(analytic.len(), numeric.len());
    let mut report = GradCheckReport {
        checked: analytic.len(),
        max_relative_error: 0.0,
        max_absolute_error: 0.0,
        worst_index: 0,
    };
    for (i, (a, n)) in analytic.iter().zip(numeric).enumerate() {
        let rel = relative_error(*a, *n);
        if rel > report.max_relative_error {
            report.max_relative_error = rel;
            report.worst_index = i;
        }
        report.max_absolute_error = report.max_absolute_error.max((a - n).abs());
    }
    report
}

/// Checks d total / d (attention, LSTM, logits) of [`custom_loss`] against
/// central differences of [`custom_loss_value`].
pub fn check_custom_loss(
    block: &Block,
    attn: &AttentionParams,
    lstm: &LstmParams,
    reduction: PairReduction,
    step: f64,
) -> Result<GradCheckReport, LossError> {
    let analytic = custom_loss(block, attn, lstm, reduction)?;
    let n_attn = attn.len();
    let n_lstm = lstm.len();
    let vocab = block.logits.first().map_or(0, Vec::len);

    let mut point = attn.to_flat();
    point.extend(lstm.to_flat());
    point.extend(block.logits.iter().flatten());

    let eval = |x: &[f64]| {
        let a = attn.with_flat(&x[..n_attn]);
        let l = lstm.with_flat(&x[n_attn..n_attn + n_lstm]);
        let mut b = block.clone();
        for (r, row) in b.logits.iter_mut().enumerate() {
            let at = n_attn + n_lstm + r * vocab;
            row.copy_from_slice(&x[at..at + vocab]);
        }
        custom_loss_value(&b, &a, &l, reduction).expect("shapes validated")
    };
    let numeric = central_differences(eval, &point, step);

    let mut all = analytic.gradients;
    all.extend(analytic.logit_gradients);
    Ok(compare(&all, &numeric))
}
