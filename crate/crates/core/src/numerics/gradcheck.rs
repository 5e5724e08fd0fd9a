use crate::error::{Error, Result};

use super::Tensor1;

/// Central finite differences, `(f(x + h e_i) - f(x - h e_i)) / 2h` per coordinate.
pub fn finite_diff_grad<F>(mut f: F, x: &Tensor1, h: f64) -> Result<Tensor1>
where
    F: FnMut(&[f64]) -> f64,
{
    if !(h > 0.0) {
        return Err(Error::Domain(format!("step must be positive, got {h}")));
    }
    let mut probe = x.data().to_vec();
    let mut grad = Vec::with_capacity(probe.len());
    for i in 0..probe.len() {
        let orig = probe[i];
        probe[i] = orig + h;
        let plus = f(&probe);
        probe[i] = orig - h;
        let minus = f(&probe);
        probe[i] = orig;
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::Domain(format!(
                "objective is not finite around coordinate {i}"
            )));
        }
        grad.push((plus - minus) / (2.0 * h));
    }
    Tensor1::from_vec(grad)
}

/// Largest entrywise deviation, relative to the largest magnitude in
/// either gradient: `max_i |a_i - b_i| / max(max_i |a_i|, max_i |b_i|)`.
///
/// Returns 0 when both gradients are identically zero.
pub fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    let scale = analytic
        .iter()
        .chain(numeric)
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let diff = analytic
        .iter()
        .zip(numeric)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}
