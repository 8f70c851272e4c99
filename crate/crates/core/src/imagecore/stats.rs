use crate::error::{Error, Result};

/// Value of the `ceil(n * p)`-th smallest entry (1-based, clamped to `[1, n]`).
pub fn percentile_value(values: &[f64], p: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::input("percentile of an empty list"));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::param(format!(
            "percentile must lie in (0,1), got {p}"
        )));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let pos = n as f64 * p;
    // absorb representation error so that e.g. 100 * 0.92 selects entry 92
    let rank = (pos - 1e-9 * pos.max(1.0)).ceil() as usize;
    Ok(sorted[rank.clamp(1, n) - 1])
}
