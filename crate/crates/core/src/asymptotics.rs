//! Critical values, the argmax law used for confidence intervals, and
//! closed-form limits that the simulation study is checked against.
//!
//! Null calibration comes in two flavours. The extreme-value norming
//!
//! ```text
//! a(n) = √(2 ln ln n)
//! b_d(n) = 2 ln ln n + (d/2) ln ln ln n − ln Γ(d/2)
//! P[a·𝒮ₙ^{1/2} ≤ t + b] → exp(−2e^{−t})
//! ```
//!
//! is cheap but conservative at realistic `n`. The alternative simulates the
//! supremum of `Σᵢ Bᵢ²(t) / (t(1−t))` for `d` independent Brownian bridges
//! on the grid `k/n`.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::cpd::{check_alpha, PrefixStats};
use crate::error::{invalid, Result};
use crate::expfam::{quad_form, ExpFamilyModel, MomentPoint};
use crate::mc::{par_replicates, EmpiricalDist, MonteCarloConfig};

/// Smallest sample size for which `ln ln n > 0` with some margin.
pub const MIN_GUMBEL_N: usize = 16;

/// Minimum replications accepted by the Monte Carlo samplers.
pub const MIN_MC_REPLICATIONS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GumbelNorming {
    pub a_val: f64,
    pub b_val: f64,
    pub d: usize,
    pub n: usize,
}

/// Norming constants at `x = ln n`.
pub fn gumbel_norming(d: usize, n: usize) -> Result<GumbelNorming> {
    if d == 0 {
        return Err(invalid("dimension must be at least 1"));
    }
    if n < MIN_GUMBEL_N {
        return Err(invalid(format!(
            "extreme-value norming needs n >= {MIN_GUMBEL_N}, got {n}"
        )));
    }
    let (a_val, b_val) = norming_at((n as f64).ln(), d);
    Ok(GumbelNorming { a_val, b_val, d, n })
}

/// `(a(x), b_d(x))` for `x > 1`.
fn norming_at(x: f64, d: usize) -> (f64, f64) {
    let lx = x.ln();
    let half_d = d as f64 / 2.0;
    ((2.0 * lx).sqrt(), 2.0 * lx + half_d * lx.ln() - ln_gamma(half_d))
}

/// Solves `exp(−2e^{−t}) = 1 − α`.
fn gumbel_level(alpha: f64) -> f64 {
    -(-0.5 * (1.0 - alpha).ln()).ln()
}

/// `κ_α` on the `𝒮ₙ^{1/2}` scale.
pub fn gumbel_critical_value(alpha: f64, d: usize, n: usize) -> Result<f64> {
    check_alpha(alpha)?;
    let g = gumbel_norming(d, n)?;
    Ok((gumbel_level(alpha) + g.b_val) / g.a_val)
}

/// Asymptotic p-value of an observed `𝒮ₙ^{1/2}`.
pub fn gumbel_pvalue(stat_root: f64, d: usize, n: usize) -> Result<f64> {
    if !(stat_root >= 0.0) {
        return Err(invalid(format!("statistic root must be >= 0, got {stat_root}")));
    }
    let g = gumbel_norming(d, n)?;
    let t = g.a_val * stat_root - g.b_val;
    Ok((-(-2.0 * (-t).exp()).exp_m1()).clamp(0.0, 1.0))
}

fn check_mc(mc: &MonteCarloConfig) -> Result<()> {
    mc.validate()?;
    if mc.replications < MIN_MC_REPLICATIONS {
        return Err(invalid(format!(
            "need at least {MIN_MC_REPLICATIONS} replications, got {}",
            mc.replications
        )));
    }
    Ok(())
}

/// Samples `max_{1≤k<n} Σᵢ Bᵢ²(k/n) / (t(1−t))` for `d` independent
/// random-walk bridges with standard normal steps.
pub fn sample_sup_bridge(d: usize, n: usize, mc: &MonteCarloConfig) -> Result<EmpiricalDist> {
    check_mc(mc)?;
    if d == 0 || n < 3 {
        return Err(invalid(format!("need d >= 1 and n >= 3, got d={d}, n={n}")));
    }
    let samples = par_replicates(mc, |_, rng| {
        let mut walks = vec![0.0; d * (n + 1)];
        for i in 0..d {
            let w = &mut walks[i * (n + 1)..(i + 1) * (n + 1)];
            for k in 1..=n {
                w[k] = w[k - 1] + rng.sample::<f64, _>(StandardNormal);
            }
        }
        let nf = n as f64;
        let mut best = 0.0f64;
        for k in 1..n {
            let t = k as f64 / nf;
            let mut s = 0.0;
            for i in 0..d {
                let w = &walks[i * (n + 1)..(i + 1) * (n + 1)];
                let b = (w[k] - t * w[n]) / nf.sqrt();
                s += b * b;
            }
            best = best.max(s / (t * (1.0 - t)));
        }
        best
    })?;
    EmpiricalDist::new(samples)
}

/// `κ_α` from the simulated bridge supremum, on the `𝒮ₙ^{1/2}` scale.
pub fn sup_bridge_critical_value(
    alpha: f64,
    d: usize,
    n: usize,
    mc: &MonteCarloConfig,
) -> Result<f64> {
    check_alpha(alpha)?;
    let dist = sample_sup_bridge(d, n, mc)?;
    Ok(dist.quantile(1.0 - alpha)?.sqrt())
}

/// Discretization of the two-sided drifted Brownian motion
/// `Ŵ(u) = W(|u|) − drift·|u|` (independent sides).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArgmaxConfig {
    /// Half-width `T` of the simulated window `[−T, T]`.
    pub horizon: f64,
    /// Grid step `h`.
    pub step: f64,
    /// Drift per unit time on each side (½ for the standard law).
    pub drift: f64,
    /// Abandon a side once it sits `early_stop / (2·drift)` below its running
    /// maximum. The chance that the maximum would still have moved is
    /// `e^{−early_stop}`. `None` always walks to the horizon.
    pub early_stop: Option<f64>,
}

impl Default for ArgmaxConfig {
    fn default() -> Self {
        Self {
            horizon: 200.0,
            step: 0.01,
            drift: 0.5,
            early_stop: Some(30.0),
        }
    }
}

impl ArgmaxConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0 && self.step > 0.0 && self.step <= self.horizon) {
            return Err(invalid(format!(
                "need 0 < step <= horizon, got step={} horizon={}",
                self.step, self.horizon
            )));
        }
        if !(self.drift > 0.0 && self.drift.is_finite()) {
            return Err(invalid(format!("drift must be positive, got {}", self.drift)));
        }
        if let Some(s) = self.early_stop {
            if !(s > 0.0) {
                return Err(invalid(format!("early stop must be positive, got {s}")));
            }
        }
        Ok(())
    }

    fn steps(&self) -> usize {
        (self.horizon / self.step).round() as usize
    }
}

/// Running maximum of one side: `(value, grid index)`; index 0 is `u = 0`.
fn argmax_side<R: Rng + ?Sized>(cfg: &ArgmaxConfig, steps: usize, rng: &mut R) -> (f64, usize) {
    let sd = cfg.step.sqrt();
    let pull = cfg.drift * cfg.step;
    let cutoff = cfg.early_stop.map(|s| s / (2.0 * cfg.drift));
    let (mut w, mut best, mut best_i) = (0.0f64, 0.0f64, 0usize);
    for i in 1..=steps {
        w += sd * rng.sample::<f64, _>(StandardNormal) - pull;
        if w > best {
            best = w;
            best_i = i;
        } else if cutoff.is_some_and(|c| best - w > c) {
            break;
        }
    }
    (best, best_i)
}

/// One draw of `argmax_u Ŵ(u)`; ties go to the smallest `|u|`.
pub fn draw_argmax_what<R: Rng + ?Sized>(cfg: &ArgmaxConfig, rng: &mut R) -> f64 {
    let steps = cfg.steps();
    let (left, li) = argmax_side(cfg, steps, rng);
    let (right, ri) = argmax_side(cfg, steps, rng);
    let h = cfg.step;
    if right > left || (right == left && ri < li) {
        ri as f64 * h
    } else if left > right || li < ri {
        -(li as f64) * h
    } else {
        ri as f64 * h
    }
}

/// Sample of `argmax Ŵ` under the default discretization.
pub fn sample_argmax_what(mc: &MonteCarloConfig) -> Result<EmpiricalDist> {
    sample_argmax_what_with(&ArgmaxConfig::default(), mc)
}

pub fn sample_argmax_what_with(cfg: &ArgmaxConfig, mc: &MonteCarloConfig) -> Result<EmpiricalDist> {
    check_mc(mc)?;
    cfg.validate()?;
    EmpiricalDist::new(par_replicates(mc, |_, rng| draw_argmax_what(cfg, rng))?)
}

/// Pre- and post-change parameters of a simulated alternative.
#[derive(Debug, Clone, PartialEq)]
pub struct AlternativeParams {
    pub tau1: MomentPoint,
    pub tau2: MomentPoint,
    /// Covariance of `T(X)` before the change.
    pub sigma1_mat: DMatrix<f64>,
    /// Covariance of `T(X)` after the change.
    pub sigma2_mat: DMatrix<f64>,
    /// `‖τ₁ − τ₂‖²`.
    pub delta_sq: f64,
    /// `‖θ₁ − θ₂‖²`.
    pub big_delta_sq: f64,
    /// Moment point at which the local curvature is evaluated; the midpoint
    /// of `τ₁` and `τ₂`.
    pub tau_a: MomentPoint,
    /// Rayleigh quotient of `H''(τ_A)` along `τ₁ − τ₂`; `None` if `δ² = 0`.
    pub sigma_a_sq: Option<f64>,
}

impl AlternativeParams {
    pub fn from_nat_params(model: &ExpFamilyModel, theta1: &[f64], theta2: &[f64]) -> Result<Self> {
        let tau1 = model.a_grad(theta1)?;
        let tau2 = model.a_grad(theta2)?;
        let delta_sq = tau1.iter().zip(tau2.iter()).map(|(a, b)| (a - b).powi(2)).sum();
        let big_delta_sq = theta1.iter().zip(theta2).map(|(a, b)| (a - b).powi(2)).sum();
        let tau_a = MomentPoint(tau1.iter().zip(tau2.iter()).map(|(a, b)| 0.5 * (a + b)).collect());
        let mut ap = Self {
            sigma1_mat: model.a_hess(theta1)?,
            sigma2_mat: model.a_hess(theta2)?,
            tau1,
            tau2,
            delta_sq,
            big_delta_sq,
            tau_a,
            sigma_a_sq: None,
        };
        if delta_sq > 0.0 {
            ap.sigma_a_sq = Some(sigma_a_sq(&ap, model)?);
        }
        Ok(ap)
    }

    /// Builds the parameters from pre/post means and (for the mean/variance
    /// model) variances.
    pub fn from_moments(
        model: &ExpFamilyModel,
        (mean1, var1): (&[f64], Option<f64>),
        (mean2, var2): (&[f64], Option<f64>),
    ) -> Result<Self> {
        let t1 = model.nat_param_from_moments(mean1, var1)?;
        let t2 = model.nat_param_from_moments(mean2, var2)?;
        Self::from_nat_params(model, &t1, &t2)
    }

    /// `xτ₁ + (1−x)τ₂`.
    pub fn mix(&self, x: f64) -> Vec<f64> {
        self.tau1
            .iter()
            .zip(self.tau2.iter())
            .map(|(a, b)| x * a + (1.0 - x) * b)
            .collect()
    }
}

/// `(τ₁−τ₂)ᵀ H''(τ_A) (τ₁−τ₂) / ‖τ₁−τ₂‖²`.
pub fn sigma_a_sq(ap: &AlternativeParams, model: &ExpFamilyModel) -> Result<f64> {
    if !(ap.delta_sq > 0.0) {
        return Err(invalid("no change: tau1 equals tau2"));
    }
    let v: Vec<f64> = ap.tau1.iter().zip(ap.tau2.iter()).map(|(a, b)| a - b).collect();
    let hess = model.h_hess(&ap.tau_a)?;
    Ok(quad_form(&hess, &v, &v) / ap.delta_sq)
}

/// Covariance of the limit of `(nδ²)^{-1/2} Zₙ` at `(t, λ)` and `(t', λ')`.
pub fn limit_covariance(t: f64, lambda: f64, t2: f64, lambda2: f64, sigma_a_sq: f64) -> f64 {
    let c = match (t <= lambda, t2 <= lambda2) {
        (true, true) => {
            let w = (1.0 - lambda) * (1.0 - lambda2);
            if w == 0.0 {
                0.0
            } else {
                w * (t / (1.0 - t)).min(t2 / (1.0 - t2))
            }
        }
        (true, false) => cross_term(t, lambda, t2, lambda2),
        (false, true) => cross_term(t2, lambda2, t, lambda),
        (false, false) => lambda * lambda2 * ((1.0 - t) / t).min((1.0 - t2) / t2),
    };
    sigma_a_sq * c
}

/// Mixed case with `t ≤ λ` and `t' > λ'`.
fn cross_term(t: f64, lambda: f64, t2: f64, lambda2: f64) -> f64 {
    let w = (1.0 - lambda) * lambda2;
    if w == 0.0 {
        return 0.0;
    }
    w * (t * (1.0 - t2) / ((1.0 - t) * t2)).min(1.0)
}

fn check_split_pair(k: usize, k_star: usize, n: usize) -> Result<()> {
    if !(1..n).contains(&k) || !(1..n).contains(&k_star) {
        return Err(invalid(format!(
            "need 1 <= k, k* <= n-1, got k={k}, k*={k_star}, n={n}"
        )));
    }
    Ok(())
}

/// Centering term of `Sₙ(k)` when the change sits at `k*`.
pub fn mu_n(
    k: usize,
    k_star: usize,
    n: usize,
    ap: &AlternativeParams,
    model: &ExpFamilyModel,
) -> Result<f64> {
    check_split_pair(k, k_star, n)?;
    let (kf, ksf, nf) = (k as f64, k_star as f64, n as f64);
    let pooled = nf * model.h_value(&ap.mix(ksf / nf))?;
    let split = if k <= k_star {
        kf * model.h_value(&ap.tau1)? + (nf - kf) * model.h_value(&ap.mix((ksf - kf) / (nf - kf)))?
    } else {
        kf * model.h_value(&ap.mix(ksf / kf))? + (nf - kf) * model.h_value(&ap.tau2)?
    };
    Ok(split - pooled)
}

/// Two coupled sequences, `X₁` following the pre-change law and `X₂` the
/// post-change law, with the observed series switching from one to the
/// other after `k*`.
///
/// Stores the centered prefix sums `Σ (T(X_{l,i}) − τ_l)` of both sequences
/// so that the linear part `Zₙ(k, k*)` of `Sₙ(k) − μₙ(k, k*)` can be
/// evaluated at any `k`.
#[derive(Debug, Clone)]
pub struct AlternativeSample {
    n: usize,
    d: usize,
    k_star: usize,
    c1: Vec<f64>,
    c2: Vec<f64>,
    observed: PrefixStats,
    model: ExpFamilyModel,
    ap: AlternativeParams,
}

impl AlternativeSample {
    /// `x1` and `x2` are row-major and of equal length `n·m`.
    pub fn new(
        model: &ExpFamilyModel,
        ap: &AlternativeParams,
        x1: &[f64],
        x2: &[f64],
        k_star: usize,
    ) -> Result<Self> {
        if x1.len() != x2.len() {
            return Err(invalid("both sequences must have the same length"));
        }
        let (m, d) = (model.m(), model.d());
        if ap.tau1.len() != d || ap.tau2.len() != d {
            return Err(invalid("alternative parameters do not match the model"));
        }
        let n = x1.len() / m;
        check_split_pair(1, k_star, n)?;
        let spliced: Vec<f64> = x1[..k_star * m].iter().chain(&x2[k_star * m..]).copied().collect();
        let observed = PrefixStats::new(model, &spliced)?;
        let centered = |x: &[f64], tau: &[f64]| {
            let mut cum = vec![0.0; (n + 1) * d];
            let mut t = vec![0.0; d];
            for (i, row) in x.chunks_exact(m).enumerate() {
                model.suff_stat_into(row, &mut t);
                for j in 0..d {
                    cum[(i + 1) * d + j] = cum[i * d + j] + t[j] - tau[j];
                }
            }
            cum
        };
        Ok(Self {
            n,
            d,
            k_star,
            c1: centered(x1, &ap.tau1),
            c2: centered(x2, &ap.tau2),
            observed,
            model: model.clone(),
            ap: ap.clone(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k_star(&self) -> usize {
        self.k_star
    }

    pub fn observed(&self) -> &PrefixStats {
        &self.observed
    }

    fn c1(&self, k: usize) -> &[f64] {
        &self.c1[k * self.d..(k + 1) * self.d]
    }

    fn c2(&self, k: usize) -> &[f64] {
        &self.c2[k * self.d..(k + 1) * self.d]
    }

    fn h_dot(&self, x: f64, v: &[f64]) -> Result<f64> {
        let g = self.model.h_grad(&self.ap.mix(x))?;
        Ok(g.iter().zip(v).map(|(a, b)| a * b).sum())
    }

    /// `Zₙ(k, k*)` for `1 ≤ k ≤ n`.
    pub fn zn(&self, k: usize) -> Result<f64> {
        let (n, ks) = (self.n, self.k_star);
        if !(1..=n).contains(&k) {
            return Err(invalid(format!("k={k} outside [1, {n}]")));
        }
        let (kf, ksf, nf) = (k as f64, ks as f64, n as f64);
        let d = self.d;
        let sum = |f: &dyn Fn(usize) -> f64| -> Vec<f64> { (0..d).map(f).collect() };
        let total = sum(&|j| self.c1(ks)[j] + self.c2(n)[j] - self.c2(ks)[j]);
        let pooled = self.h_dot(ksf / nf, &total)?;
        if k <= ks {
            let head = self.c1(k);
            let rest = sum(&|j| self.c1(ks)[j] - self.c1(k)[j] + self.c2(n)[j] - self.c2(ks)[j]);
            Ok(self.h_dot(1.0, head)? + self.h_dot((ksf - kf) / (nf - kf), &rest)? - pooled)
        } else {
            let head = sum(&|j| self.c1(ks)[j] + self.c2(k)[j] - self.c2(ks)[j]);
            let tail = sum(&|j| self.c2(n)[j] - self.c2(k)[j]);
            Ok(self.h_dot(ksf / kf, &head)? + self.h_dot(0.0, &tail)? - pooled)
        }
    }

    /// `μₙ(k, k*)`.
    pub fn mu(&self, k: usize) -> Result<f64> {
        mu_n(k, self.k_star, self.n, &self.ap, &self.model)
    }

    /// `Sₙ(k)` on the observed series.
    pub fn sn(&self, k: usize) -> Result<f64> {
        self.observed.sn_at(k)
    }

    /// `Rₙ(k, k*) = Sₙ(k) − μₙ(k, k*) − Zₙ(k, k*)`.
    pub fn remainder(&self, k: usize) -> Result<f64> {
        Ok(self.sn(k)? - self.mu(k)? - self.zn(k)?)
    }
}

/// Limit of `E[Π (W(βᵢ) − W(αᵢ))]` for a standard Brownian motion `W`:
/// the sum over the three pairings of products of interval overlaps.
pub fn mixed_fourth_moment(intervals: &[(f64, f64); 4]) -> Result<f64> {
    for &(a, b) in intervals {
        if !(0.0..=1.0).contains(&a) || !(0.0..=1.0).contains(&b) || a > b {
            return Err(invalid(format!("invalid interval [{a}, {b}]")));
        }
    }
    let overlap = |i: usize, j: usize| {
        let (ai, bi) = intervals[i];
        let (aj, bj) = intervals[j];
        (bi.min(bj) - ai.max(aj)).max(0.0)
    };
    Ok(overlap(0, 1) * overlap(2, 3) + overlap(0, 2) * overlap(1, 3) + overlap(0, 3) * overlap(1, 2))
}
