//! Softmax cross-entropy, computed in f64.

use alloc::vec::Vec;

use crate::error::CoreError;
use crate::real::{exp, ln, Real};

/// Mean softmax cross-entropy over a batch of logits (b, classes), plus the
/// gradient w.r.t. the logits: `(softmax - onehot) / b`.
pub fn softmax_cross_entropy<R: Real>(
    logits: &[R],
    classes: usize,
    labels: &[u32],
) -> Result<(f64, Vec<f64>), CoreError> {
    let b = labels.len();
    debug_assert_eq!(logits.len(), b * classes);
    let mut loss = 0.0;
    let mut dlogits = alloc::vec![0.0f64; b * classes];
    for bi in 0..b {
        let label = labels[bi];
        if label as usize >= classes {
            return Err(CoreError::LabelOutOfRange {
                label,
                classes: classes as u32,
            });
        }
        let row = &logits[bi * classes..(bi + 1) * classes];
        let mut max = f64::NEG_INFINITY;
        for &l in row {
            max = max.max(l.to_f64());
        }
        let mut z = 0.0;
        for &l in row {
            z += exp(l.to_f64() - max);
        }
        let log_z = ln(z);
        loss += log_z - (row[label as usize].to_f64() - max);
        let inv_b = 1.0 / b as f64;
        for (c, &l) in row.iter().enumerate() {
            let p = exp(l.to_f64() - max - log_z);
            dlogits[bi * classes + c] =
                (p - if c == label as usize { 1.0 } else { 0.0 }) * inv_b;
        }
    }
    Ok((loss / b as f64, dlogits))
}
