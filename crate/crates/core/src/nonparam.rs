//! Model-free test for a jump in the volatility of a discretely observed
//! diffusion.
//!
//! Squared increments above `u_n = √(2 ln n / n)` are discarded as jumps of
//! the path. For each `i` the realized variance over the `k_n` increments
//! ending at `i` is compared with the `k_n` increments that follow:
//!
//! ```text
//! V* = max_{k_n ≤ i ≤ n−k_n} | past_i / future_i − 1 |
//! 𝒱ₙ = √(ln(m_n)·k_n/2)·V* − 2 ln m_n − ½ ln ln m_n − ln 3,   m_n = ⌊n/k_n⌋
//! ```
//!
//! `𝒱ₙ` is compared with the standard Gumbel quantile `−ln(−ln(1−α))`.

use serde::Serialize;

use crate::cpd::check_alpha;
use crate::error::{invalid, CpdError, Result};

/// Default block constant `C` in `k_n = ⌊C·√(ln n)·√n⌋`.
pub const DEFAULT_BLOCK_CONSTANT: f64 = 1.5;

/// `u_n = √(2 ln n)/√n`.
pub fn truncation_threshold(n: usize) -> Result<f64> {
    if n < 2 {
        return Err(invalid(format!("need n >= 2, got {n}")));
    }
    let nf = n as f64;
    Ok((2.0 * nf.ln()).sqrt() / nf.sqrt())
}

/// `k_n = ⌊C·√(ln n)·√n⌋`; must leave room for two blocks.
pub fn block_length(n: usize, c: f64) -> Result<usize> {
    if n < 2 {
        return Err(invalid(format!("need n >= 2, got {n}")));
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(invalid(format!("block constant must be positive, got {c}")));
    }
    let nf = n as f64;
    let k = (c * nf.ln().sqrt() * nf.sqrt()).floor() as usize;
    if k == 0 || 2 * k >= n {
        return Err(invalid(format!(
            "block length {k} does not fit twice into n={n}; lower C"
        )));
    }
    Ok(k)
}

/// `m_n = ⌊n/k_n⌋`.
pub fn m_of(n: usize, k_n: usize) -> Result<usize> {
    if k_n == 0 {
        return Err(invalid("block length must be positive"));
    }
    Ok(n / k_n)
}

/// Largest relative deviation between adjacent truncated realized
/// variances. Positions whose following block is empty after truncation
/// are skipped.
pub fn vstar(increments: &[f64], k_n: usize, u_n: f64) -> Result<f64> {
    let n = increments.len();
    if k_n == 0 || 2 * k_n > n {
        return Err(invalid(format!(
            "need 1 <= k_n <= n/2, got k_n={k_n}, n={n}"
        )));
    }
    if increments.iter().any(|v| !v.is_finite()) {
        return Err(invalid("increments must be finite"));
    }
    let mut q = Vec::with_capacity(n + 1);
    q.push(0.0);
    let mut acc = 0.0;
    for &x in increments {
        if x.abs() <= u_n {
            acc += x * x;
        }
        q.push(acc);
    }
    let mut best: Option<f64> = None;
    for i in k_n..=n - k_n {
        let past = q[i] - q[i - k_n];
        let future = q[i + k_n] - q[i];
        if future > 0.0 {
            let r = (past / future - 1.0).abs();
            best = Some(best.map_or(r, |b| b.max(r)));
        }
    }
    best.ok_or_else(|| CpdError::DegenerateSeries("every block is empty after truncation".into()))
}

/// `𝒱ₙ` from `V*`.
pub fn vn_normalized(vstar: f64, n: usize, k_n: usize) -> Result<f64> {
    let m = m_of(n, k_n)?;
    if m < 3 {
        return Err(invalid(format!("need m_n >= 3, got {m}")));
    }
    let lm = (m as f64).ln();
    Ok((lm * k_n as f64 / 2.0).sqrt() * vstar - 2.0 * lm - 0.5 * lm.ln() - 3f64.ln())
}

/// Standard Gumbel `(1−α)`-quantile.
pub fn nonparam_threshold(alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(-(-(1.0 - alpha).ln()).ln())
}

pub fn nonparam_decision(vn: f64, alpha: f64) -> Result<bool> {
    Ok(vn > nonparam_threshold(alpha)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NonparamReport {
    pub n: usize,
    pub vstar: f64,
    pub vn: f64,
    pub k_n: usize,
    pub u_n: f64,
    pub m_n: usize,
    pub alpha: f64,
    pub critical_value: f64,
    pub reject: bool,
}

/// Runs the volatility-jump test on a series of increments.
pub fn nonparam_detect(increments: &[f64], c: f64, alpha: f64) -> Result<NonparamReport> {
    let n = increments.len();
    let k_n = block_length(n, c)?;
    let u_n = truncation_threshold(n)?;
    let v = vstar(increments, k_n, u_n)?;
    let vn = vn_normalized(v, n, k_n)?;
    let critical_value = nonparam_threshold(alpha)?;
    Ok(NonparamReport {
        n,
        vstar: v,
        vn,
        k_n,
        u_n,
        m_n: m_of(n, k_n)?,
        alpha,
        critical_value,
        reject: vn > critical_value,
    })
}
