//! Maximally selected log-likelihood ratio for a single change point.
//!
//! With `Bₙ(k)` and `Bₙ*(k)` the averages of the sufficient statistic before
//! and after a split at `k`, the log-likelihood ratio is
//!
//! ```text
//! Sₙ(k) = k·H(Bₙ(k)) + (n−k)·H(Bₙ*(k)) − n·H(Bₙ(n))
//! ```
//!
//! and the test statistic is `𝒮ₙ = max_k 2·Sₙ(k)`. Splits are restricted to
//! `k_min ≤ k ≤ n − k_min` with `k_min = m + 1`, so every segment has enough
//! points for its maximum-likelihood estimate. Splits whose segment moment
//! point is degenerate are skipped.

use serde::{Serialize, Serializer};

use crate::asymptotics;
use crate::error::{invalid, CpdError, Result};
use crate::expfam::{quad_form, ExpFamilyModel, ModelKind};
use crate::mc::{EmpiricalDist, MonteCarloConfig};

/// Smallest admissible segment length for `model`.
pub fn k_min(model: &ExpFamilyModel) -> usize {
    model.m() + 1
}

/// Cumulative sums of the sufficient statistic.
#[derive(Debug, Clone)]
pub struct PrefixStats {
    n: usize,
    d: usize,
    k_min: usize,
    /// `(n + 1) × d`, row `k` holds `Σ_{i≤k} T(X_i − shift)`.
    cum: Vec<f64>,
    /// Location subtracted before accumulating. Non-zero only for the
    /// mean/variance model, whose statistic is location invariant and whose
    /// `y₂ − y₁²` loses precision far from the origin.
    shift: f64,
    model: ExpFamilyModel,
}

impl PrefixStats {
    /// Builds prefix sums from row-major observations (`n·m` values).
    pub fn new(model: &ExpFamilyModel, data: &[f64]) -> Result<Self> {
        let m = model.m();
        if data.len() % m != 0 {
            return Err(invalid(format!(
                "{} values do not form rows of dimension {m}",
                data.len()
            )));
        }
        if let Some(bad) = data.iter().position(|v| !v.is_finite()) {
            return Err(invalid(format!("observation {} is not finite", bad / m + 1)));
        }
        let n = data.len() / m;
        let k_min = k_min(model);
        if n == 0 {
            return Err(invalid("empty series"));
        }
        let d = model.d();
        let shift = match model.kind() {
            ModelKind::NormalMeanVar => data.iter().sum::<f64>() / n as f64,
            _ => 0.0,
        };
        let mut cum = vec![0.0; (n + 1) * d];
        let mut t = vec![0.0; d];
        let mut row = vec![0.0; m];
        for (k, x) in data.chunks_exact(m).enumerate() {
            for (r, v) in row.iter_mut().zip(x) {
                *r = v - shift;
            }
            model.suff_stat_into(&row, &mut t);
            let (prev, next) = cum.split_at_mut((k + 1) * d);
            let prev = &prev[k * d..];
            for j in 0..d {
                next[j] = prev[j] + t[j];
            }
        }
        Ok(Self {
            n,
            d,
            k_min,
            cum,
            shift,
            model: model.clone(),
        })
    }

    /// Builds prefix sums from one vector per observation.
    pub fn from_rows(model: &ExpFamilyModel, rows: &[Vec<f64>]) -> Result<Self> {
        let m = model.m();
        if let Some(i) = rows.iter().position(|r| r.len() != m) {
            return Err(invalid(format!(
                "row {} has {} values, expected {m}",
                i + 1,
                rows[i].len()
            )));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        Self::new(model, &flat)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn k_min(&self) -> usize {
        self.k_min
    }

    pub fn model(&self) -> &ExpFamilyModel {
        &self.model
    }

    /// `Σ_{i≤k} T(X_i)`.
    pub fn cum(&self, k: usize) -> Vec<f64> {
        let c = self.shifted_cum(k);
        if self.shift == 0.0 {
            return c.to_vec();
        }
        // Undo the centering: Σx = Σx' + k·s, Σx² = Σx'² + 2s·Σx' + k·s².
        let (s, kf) = (self.shift, k as f64);
        vec![c[0] + kf * s, c[1] + 2.0 * s * c[0] + kf * s * s]
    }

    fn shifted_cum(&self, k: usize) -> &[f64] {
        &self.cum[k * self.d..(k + 1) * self.d]
    }

    /// Moment point in the centered coordinates back to the data scale.
    fn unshift(&self, y: &mut [f64]) {
        if self.shift != 0.0 {
            let s = self.shift;
            y[1] += 2.0 * s * y[0] + s * s;
            y[0] += s;
        }
    }

    /// Admissible split range `k_min..=n−k_min`; empty for short series.
    pub fn split_range(&self) -> std::ops::RangeInclusive<usize> {
        self.k_min..=self.n.saturating_sub(self.k_min)
    }

    /// Fails unless the series admits at least one split.
    pub fn check_scannable(&self) -> Result<()> {
        if self.n < 2 * self.k_min {
            return Err(invalid(format!(
                "series of length {} is too short; need at least {}",
                self.n,
                2 * self.k_min
            )));
        }
        Ok(())
    }

    fn check_split(&self, k: usize) -> Result<()> {
        self.check_scannable()?;
        if !self.split_range().contains(&k) {
            return Err(invalid(format!(
                "split {k} outside [{}, {}]",
                self.k_min,
                self.n - self.k_min
            )));
        }
        Ok(())
    }

    /// `(Bₙ(k), Bₙ*(k))` for an admissible split.
    pub fn segment_means(&self, k: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check_split(k)?;
        let mut before = vec![0.0; self.d];
        let mut after = vec![0.0; self.d];
        self.segment_means_into(k, &mut before, &mut after);
        self.unshift(&mut before);
        self.unshift(&mut after);
        Ok((before, after))
    }

    fn segment_means_into(&self, k: usize, before: &mut [f64], after: &mut [f64]) {
        let (ck, cn) = (self.shifted_cum(k), self.shifted_cum(self.n));
        let (kf, rest) = (k as f64, (self.n - k) as f64);
        for j in 0..self.d {
            before[j] = ck[j] / kf;
            after[j] = (cn[j] - ck[j]) / rest;
        }
    }

    /// `Bₙ(n)`, the pooled mean of the sufficient statistic.
    pub fn pooled_mean(&self) -> Vec<f64> {
        let mut y = self.shifted_pooled_mean();
        self.unshift(&mut y);
        y
    }

    fn shifted_pooled_mean(&self) -> Vec<f64> {
        let nf = self.n as f64;
        self.shifted_cum(self.n).iter().map(|v| v / nf).collect()
    }

    fn pooled_h(&self) -> Result<f64> {
        self.model.h_unchecked(&self.shifted_pooled_mean()).map_err(|e| match e {
            CpdError::DegenerateMoment(msg) => {
                CpdError::DegenerateSeries(format!("pooled moment point: {msg}"))
            }
            other => other,
        })
    }

    /// `Sₙ(k)`. A degenerate segment surfaces as
    /// [`CpdError::DegenerateMoment`].
    pub fn sn_at(&self, k: usize) -> Result<f64> {
        self.check_split(k)?;
        let h_pool = self.pooled_h()?;
        let mut before = vec![0.0; self.d];
        let mut after = vec![0.0; self.d];
        self.sn_with(k, h_pool, &mut before, &mut after)
    }

    fn sn_with(&self, k: usize, h_pool: f64, before: &mut [f64], after: &mut [f64]) -> Result<f64> {
        self.segment_means_into(k, before, after);
        let hb = self.model.h_unchecked(before)?;
        let ha = self.model.h_unchecked(after)?;
        Ok(k as f64 * hb + (self.n - k) as f64 * ha - self.n as f64 * h_pool)
    }

    /// `Sₙ(k)` for every admissible split; `None` marks a skipped split.
    /// Entry `i` corresponds to `k = k_min + i`.
    pub fn sn_path(&self) -> Result<Vec<Option<f64>>> {
        self.check_scannable()?;
        let h_pool = self.pooled_h()?;
        let mut before = vec![0.0; self.d];
        let mut after = vec![0.0; self.d];
        Ok(self
            .split_range()
            .map(|k| self.sn_with(k, h_pool, &mut before, &mut after).ok())
            .collect())
    }
}

/// Result of the scan over all admissible splits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaxStatistic {
    /// `𝒮ₙ = max 2·Sₙ(k)`.
    pub stat: f64,
    /// Smallest maximizing split.
    pub k_hat: usize,
    /// Number of splits skipped as degenerate.
    pub skipped: usize,
}

/// Maximizes `2·Sₙ(k)` over admissible splits.
pub fn max_statistic(ps: &PrefixStats) -> Result<MaxStatistic> {
    ps.check_scannable()?;
    let h_pool = ps.pooled_h()?;
    let mut before = vec![0.0; ps.d];
    let mut after = vec![0.0; ps.d];
    let mut best: Option<(f64, usize)> = None;
    let mut skipped = 0;
    for k in ps.split_range() {
        match ps.sn_with(k, h_pool, &mut before, &mut after) {
            Ok(s) => {
                let v = 2.0 * s;
                if best.is_none_or(|(b, _)| v > b) {
                    best = Some((v, k));
                }
            }
            Err(CpdError::DegenerateMoment(_)) => skipped += 1,
            Err(e) => return Err(e),
        }
    }
    let (stat, k_hat) = best.ok_or_else(|| {
        CpdError::DegenerateSeries(format!("all {skipped} candidate splits are degenerate"))
    })?;
    Ok(MaxStatistic {
        stat,
        k_hat,
        skipped,
    })
}

/// Estimated size of the change,
/// `(Bₙ(k̂) − Bₙ*(k̂))ᵀ H''(Bₙ(n)) (Bₙ(k̂) − Bₙ*(k̂))`.
///
/// The quadratic form is invariant under affine maps of `T`, so it is
/// evaluated in the centered coordinates.
pub fn size_of_change(ps: &PrefixStats, k_hat: usize) -> Result<f64> {
    ps.check_split(k_hat)?;
    let mut before = vec![0.0; ps.d];
    let mut after = vec![0.0; ps.d];
    ps.segment_means_into(k_hat, &mut before, &mut after);
    let diff: Vec<f64> = before.iter().zip(&after).map(|(b, a)| b - a).collect();
    let hess = ps.model.h_hess(&ps.shifted_pooled_mean()).map_err(|e| match e {
        CpdError::DegenerateMoment(msg) => {
            CpdError::DegenerateSeries(format!("pooled moment point: {msg}"))
        }
        other => other,
    })?;
    Ok(quad_form(&hess, &diff, &diff).max(0.0))
}

/// Closed integer interval of candidate change locations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ConfidenceInterval {
    pub low: i64,
    pub high: i64,
}

impl ConfidenceInterval {
    pub fn contains(&self, k: i64) -> bool {
        self.low <= k && k <= self.high
    }

    pub fn width(&self) -> i64 {
        self.high - self.low
    }
}

/// Interval for the true change location from the limit law of
/// `Δ̂²(k̂ − k*)`.
///
/// `quantiles` are the lower and upper quantiles of `argmax Ŵ` at the chosen
/// level. The interval is rounded outward and clipped to `[1, n−1]`.
pub fn confidence_interval(
    k_hat: usize,
    delta_hat_sq: f64,
    quantiles: (f64, f64),
    n: usize,
) -> Result<ConfidenceInterval> {
    if !(delta_hat_sq.is_finite() && delta_hat_sq > 0.0) {
        return Err(invalid(format!(
            "size-of-change estimate must be positive, got {delta_hat_sq}"
        )));
    }
    let (q_low, q_high) = quantiles;
    if !(q_low <= q_high) {
        return Err(invalid(format!("quantiles ({q_low}, {q_high}) are not ordered")));
    }
    if n < 2 {
        return Err(invalid("need n >= 2"));
    }
    let k = k_hat as f64;
    let low = (k - q_high / delta_hat_sq).floor();
    let high = (k - q_low / delta_hat_sq).ceil();
    let clip = |v: f64| v.clamp(1.0, (n - 1) as f64) as i64;
    Ok(ConfidenceInterval {
        low: clip(low),
        high: clip(high),
    })
}

/// Lower and upper `α/2` quantiles of a sample of `argmax Ŵ`.
pub fn argmax_quantiles(dist: &EmpiricalDist, alpha: f64) -> Result<(f64, f64)> {
    check_alpha(alpha)?;
    Ok((dist.quantile(alpha / 2.0)?, dist.quantile(1.0 - alpha / 2.0)?))
}

/// Where the critical value `κ_α` comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum CriticalValueSource {
    /// Extreme-value (Gumbel) norming.
    Gumbel,
    /// Monte Carlo supremum of the weighted squared Brownian bridge.
    Bridge(MonteCarloConfig),
    /// A precomputed value on the `𝒮ₙ^{1/2}` scale.
    Fixed(f64),
}

impl CriticalValueSource {
    pub fn critical_value(&self, alpha: f64, d: usize, n: usize) -> Result<f64> {
        match self {
            Self::Gumbel => asymptotics::gumbel_critical_value(alpha, d, n),
            Self::Bridge(mc) => asymptotics::sup_bridge_critical_value(alpha, d, n, mc),
            Self::Fixed(v) => {
                check_alpha(alpha)?;
                Ok(*v)
            }
        }
    }
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid(format!("significance level must be in (0, 1), got {alpha}")));
    }
    Ok(())
}

/// Outcome of a single-change-point test on one series.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionReport {
    pub n: usize,
    pub stat: f64,
    pub stat_root: f64,
    pub k_hat: usize,
    pub lambda_hat: f64,
    pub delta_hat_sq: f64,
    pub reject: bool,
    pub alpha: f64,
    pub critical_value: f64,
    pub ci: Option<ConfidenceInterval>,
    pub skipped: usize,
}

impl Serialize for DetectionReport {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        let mut map = serializer.serialize_map(Some(10))?;
        map.serialize_entry("stat", &self.stat)?;
        map.serialize_entry("stat_root", &self.stat_root)?;
        map.serialize_entry("k_hat", &self.k_hat)?;
        map.serialize_entry("lambda_hat", &self.lambda_hat)?;
        map.serialize_entry("delta_hat_sq", &self.delta_hat_sq)?;
        map.serialize_entry("reject", &self.reject)?;
        map.serialize_entry("alpha", &self.alpha)?;
        map.serialize_entry("critical_value", &self.critical_value)?;
        map.serialize_entry("ci_low", &self.ci.map(|c| c.low))?;
        map.serialize_entry("ci_high", &self.ci.map(|c| c.high))?;
        map.end()
    }
}

/// Runs the test on row-major observations.
pub fn detect(
    data: &[f64],
    model: &ExpFamilyModel,
    alpha: f64,
    source: &CriticalValueSource,
) -> Result<DetectionReport> {
    check_alpha(alpha)?;
    let ps = PrefixStats::new(model, data)?;
    detect_prefix(&ps, alpha, source)
}

/// Runs the test on precomputed prefix sums.
pub fn detect_prefix(
    ps: &PrefixStats,
    alpha: f64,
    source: &CriticalValueSource,
) -> Result<DetectionReport> {
    check_alpha(alpha)?;
    let max = max_statistic(ps)?;
    let critical_value = source.critical_value(alpha, ps.d(), ps.n())?;
    let stat_root = max.stat.max(0.0).sqrt();
    let delta_hat_sq = size_of_change(ps, max.k_hat)?;
    Ok(DetectionReport {
        n: ps.n(),
        stat: max.stat,
        stat_root,
        k_hat: max.k_hat,
        lambda_hat: max.k_hat as f64 / ps.n() as f64,
        delta_hat_sq,
        reject: stat_root > critical_value,
        alpha,
        critical_value,
        ci: None,
        skipped: max.skipped,
    })
}

/// Adds a confidence interval for the change location to `report`, using a
/// sample of `argmax Ŵ` at level `ci_alpha`.
pub fn attach_confidence_interval(
    report: &mut DetectionReport,
    argmax: &EmpiricalDist,
    ci_alpha: f64,
) -> Result<()> {
    let q = argmax_quantiles(argmax, ci_alpha)?;
    report.ci = Some(confidence_interval(
        report.k_hat,
        report.delta_hat_sq,
        q,
        report.n,
    )?);
    Ok(())
}
