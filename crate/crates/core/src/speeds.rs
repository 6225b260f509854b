//! Thresholds and mode counts tied to the transverse period L.

use crate::error::{Result, ZkError};

/// Onset speed of the first transverse instability, `4 / (5 L^2)`.
pub fn threshold(period: f64) -> f64 {
    4.0 / (5.0 * period * period)
}

/// Critical speed `4 n^2 / (5 L^2)` at which mode `n` joins the kernel.
pub fn critical_speed(n: usize, period: f64) -> f64 {
    4.0 * (n * n) as f64 / (5.0 * period * period)
}

/// Returns `n > 1` when `c = 4 n^2 / (5 L^2)` to relative tolerance 1e-9.
pub fn critical_index(c: f64, period: f64) -> Option<usize> {
    if !(c > 0.0) {
        return None;
    }
    let n = ((5.0 * c).sqrt() * period / 2.0).round();
    if n < 2.0 {
        return None;
    }
    let n = n as usize;
    let cn = critical_speed(n, period);
    ((c - cn).abs() <= 1e-9 * cn).then_some(n)
}

/// The integer `n0 >= 2` with `2(n0-1)/sqrt(5c) < L <= 2 n0/sqrt(5c)`.
/// Unstable transverse modes are `k = 1..n0-1`.
pub fn n0(c: f64, period: f64) -> Result<usize> {
    if !(period > 0.0) {
        return Err(ZkError::param("L", "must be positive"));
    }
    let th = threshold(period);
    if !(c > th) {
        return Err(ZkError::Subcritical { c, threshold: th });
    }
    // n0 = ceil(L sqrt(5c) / 2); exact critical speeds land on the upper bound
    let r = period * (5.0 * c).sqrt() / 2.0;
    let mut n = r.ceil();
    if let Some(k) = critical_index(c, period) {
        n = k as f64;
    }
    Ok((n as usize).max(2))
}

/// Codimension of the center-stable manifold, `2 (n0 - 1)`.
pub fn unstable_dimension(c: f64, period: f64) -> Result<usize> {
    Ok(2 * (n0(c, period)? - 1))
}
