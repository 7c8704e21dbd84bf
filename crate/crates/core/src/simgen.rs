//! Synthetic series with a single change.
//!
//! Observations are `Y_k ~ N(n^{-1/2}μ₁, σ₁²)` up to the change and
//! `N(n^{-1/2}μ₂, σ₂²)` afterwards, read as scaled increments of the path
//! `X_k = n^{-1/2} Σ_{j≤k} Y_j`. The change location is either the first
//! time `X` dips below a barrier after a burn-in fraction `γ`, or drawn
//! independently of the data.
//!
//! [`gen_ito_path`] produces increments of a diffusion with seasonal
//! stochastic volatility and an additive jump in the volatility.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// How the change location is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "kebab-case")]
pub enum LocationLaw {
    /// First admissible time the partial-sum path is below `kappa`.
    StoppingTime { kappa: f64 },
    /// Uniform on the admissible integers.
    Uniform,
    /// Normal with mean ½ and standard deviation `1/6 − γ/3`, truncated to
    /// `[γ, 1−γ]`.
    TruncNormal,
}

impl Default for LocationLaw {
    fn default() -> Self {
        Self::StoppingTime { kappa: -1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n: usize,
    /// Pre-change mean on the path scale; observations have mean `μ₁/√n`.
    pub mu1: f64,
    pub mu2: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    pub gamma: f64,
    #[serde(default)]
    pub location_law: LocationLaw,
    /// Moving-average coefficient `a`; 0 leaves the series independent.
    #[serde(default)]
    pub ar_coeff: f64,
    #[serde(default)]
    pub seed: u64,
}

impl SimConfig {
    /// Jump in the volatility: `μ = −2`, `σ: 1 → 1.1`.
    pub fn volatility_jump(n: usize) -> Self {
        Self {
            n,
            mu1: -2.0,
            mu2: -2.0,
            sigma1: 1.0,
            sigma2: 1.1,
            gamma: 0.1,
            location_law: LocationLaw::default(),
            ar_coeff: 0.0,
            seed: 0,
        }
    }

    /// Jump in the mean: `μ: −2 → −12`, `σ = 1`.
    pub fn mean_jump(n: usize) -> Self {
        Self {
            mu2: -12.0,
            sigma2: 1.0,
            ..Self::volatility_jump(n)
        }
    }

    /// The same series without a change.
    pub fn null(self) -> Self {
        Self {
            mu2: self.mu1,
            sigma2: self.sigma1,
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(invalid(format!("need n >= 2, got {}", self.n)));
        }
        for (name, v) in [("sigma1", self.sigma1), ("sigma2", self.sigma2)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [("mu1", self.mu1), ("mu2", self.mu2)] {
            if !v.is_finite() {
                return Err(invalid(format!("{name} must be finite")));
            }
        }
        check_gamma(self.gamma)?;
        if !(self.ar_coeff.abs() < 1.0) {
            return Err(invalid(format!("need |a| < 1, got {}", self.ar_coeff)));
        }
        if let LocationLaw::StoppingTime { kappa } = self.location_law {
            if kappa.is_nan() {
                return Err(invalid("barrier must not be NaN"));
            }
        }
        location_bounds(self.gamma, self.n)?;
        Ok(())
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma > 0.0 && gamma < 0.5) {
        return Err(invalid(format!("gamma must be in (0, 0.5), got {gamma}")));
    }
    Ok(())
}

/// `[⌈γn⌉, ⌊(1−γ)n⌋]`, with a little slack against rounding in `γ·n`.
pub fn location_bounds(gamma: f64, n: usize) -> Result<(usize, usize)> {
    check_gamma(gamma)?;
    let nf = n as f64;
    let lo = ((gamma * nf) - 1e-9).ceil().max(1.0) as usize;
    let hi = (((1.0 - gamma) * nf) + 1e-9).floor() as usize;
    if lo > hi || hi >= n {
        return Err(invalid(format!("no admissible change location for n={n}, gamma={gamma}")));
    }
    Ok((lo, hi))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimOutput {
    pub data: Vec<f64>,
    /// Last pre-change index (1-based count of pre-change observations).
    pub k_star: usize,
    pub lambda_star: f64,
    /// `X_k = n^{-1/2} Σ_{j≤k} data[j]`, `k = 0..=n`.
    pub partial_sums: Vec<f64>,
}

/// `n^{-1/2}`-scaled running sums, starting at 0.
pub fn partial_sums(data: &[f64]) -> Vec<f64> {
    let scale = 1.0 / (data.len() as f64).sqrt();
    let mut out = Vec::with_capacity(data.len() + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for v in data {
        acc += v;
        out.push(acc * scale);
    }
    out
}

/// Smallest `k ≥ γn` with `partial_sums[k] < kappa`, capped at `⌊(1−γ)n⌋`.
pub fn stopping_time_location(partial_sums: &[f64], gamma: f64, kappa: f64) -> Result<usize> {
    if partial_sums.len() < 2 {
        return Err(invalid("partial-sum path needs at least one step"));
    }
    let n = partial_sums.len() - 1;
    let (lo, hi) = location_bounds(gamma, n)?;
    Ok((lo..=hi).find(|&k| partial_sums[k] < kappa).unwrap_or(hi))
}

/// Draws a change location from the truncated normal law.
pub fn truncnorm_location<R: Rng + ?Sized>(gamma: f64, n: usize, rng: &mut R) -> Result<usize> {
    let (lo, hi) = location_bounds(gamma, n)?;
    let law = Normal::new(0.5, truncnorm_scale(gamma)).map_err(|e| invalid(e.to_string()))?;
    let lambda = loop {
        let l = law.sample(rng);
        if (gamma..=1.0 - gamma).contains(&l) {
            break l;
        }
    };
    Ok(((n as f64 * lambda).round() as usize).clamp(lo, hi))
}

/// Standard deviation of the untruncated normal, `1/6 − γ/3`.
pub fn truncnorm_scale(gamma: f64) -> f64 {
    1.0 / 6.0 - gamma / 3.0
}

/// `Ỹ₁ = Y₁`, `Ỹ_k = a·Y_{k−1} + √(1−a²)·Y_k`.
pub fn ar_transform(data: &[f64], a: f64) -> Result<Vec<f64>> {
    if !(a.abs() < 1.0) {
        return Err(invalid(format!("need |a| < 1, got {a}")));
    }
    let b = (1.0 - a * a).sqrt();
    let mut out = Vec::with_capacity(data.len());
    for (k, &y) in data.iter().enumerate() {
        out.push(if k == 0 { y } else { a * data[k - 1] + b * y });
    }
    Ok(out)
}

fn fill_normal<R: Rng + ?Sized>(out: &mut [f64], mean: f64, sd: f64, rng: &mut R) {
    for v in out {
        *v = mean + sd * rng.sample::<f64, _>(StandardNormal);
    }
}

/// Series for `cfg`, seeded from `cfg.seed`.
pub fn gen_amoc_normal(cfg: &SimConfig) -> Result<SimOutput> {
    gen_amoc_normal_with(cfg, &mut ChaCha8Rng::seed_from_u64(cfg.seed))
}

/// Series for `cfg` drawn from `rng` (`cfg.seed` is ignored).
///
/// With the stopping-time law the whole series is first drawn from the
/// pre-change law, the location is read off its path (after the moving
/// average when `a ≠ 0`), and the observations after the change are redrawn
/// from the post-change law with fresh noise. Nothing before the change
/// depends on what comes after it.
pub fn gen_amoc_normal_with<R: Rng + ?Sized>(cfg: &SimConfig, rng: &mut R) -> Result<SimOutput> {
    cfg.validate()?;
    let n = cfg.n;
    let root_n = (n as f64).sqrt();
    let (m1, m2) = (cfg.mu1 / root_n, cfg.mu2 / root_n);
    let mut raw = vec![0.0; n];
    let k_star = match cfg.location_law {
        LocationLaw::StoppingTime { kappa } => {
            fill_normal(&mut raw, m1, cfg.sigma1, rng);
            let observed = if cfg.ar_coeff == 0.0 {
                partial_sums(&raw)
            } else {
                partial_sums(&ar_transform(&raw, cfg.ar_coeff)?)
            };
            stopping_time_location(&observed, cfg.gamma, kappa)?
        }
        LocationLaw::Uniform => {
            let (lo, hi) = location_bounds(cfg.gamma, n)?;
            let k = rng.random_range(lo..=hi);
            fill_normal(&mut raw[..k], m1, cfg.sigma1, rng);
            k
        }
        LocationLaw::TruncNormal => {
            let k = truncnorm_location(cfg.gamma, n, rng)?;
            fill_normal(&mut raw[..k], m1, cfg.sigma1, rng);
            k
        }
    };
    fill_normal(&mut raw[k_star..], m2, cfg.sigma2, rng);
    let data = if cfg.ar_coeff == 0.0 {
        raw
    } else {
        ar_transform(&raw, cfg.ar_coeff)?
    };
    let partial_sums = partial_sums(&data);
    Ok(SimOutput {
        data,
        k_star,
        lambda_star: k_star as f64 / n as f64,
        partial_sums,
    })
}

/// The same experiment at several resolutions, driven by one noise path.
///
/// `cfg.n` is the finest resolution. For each factor `r` (which must divide
/// `cfg.n`) the series has `cfg.n / r` observations, each the sum of `r`
/// consecutive standardized draws divided by `√r`. Its partial-sum path is
/// therefore the fine path read off every `r` steps. With the stopping-time
/// law every resolution locates its change on its own path; otherwise the
/// fine location is drawn once and divided by `r`.
pub fn gen_amoc_normal_nested<R: Rng + ?Sized>(
    cfg: &SimConfig,
    factors: &[usize],
    rng: &mut R,
) -> Result<Vec<SimOutput>> {
    cfg.validate()?;
    if cfg.ar_coeff != 0.0 {
        return Err(invalid("nested resolutions need independent observations"));
    }
    let fine = cfg.n;
    if let Some(&r) = factors.iter().find(|&&r| r == 0 || fine % r != 0) {
        return Err(invalid(format!("factor {r} does not divide n={fine}")));
    }
    let mut pre = vec![0.0; fine];
    let mut post = vec![0.0; fine];
    fill_normal(&mut pre, 0.0, 1.0, rng);
    fill_normal(&mut post, 0.0, 1.0, rng);
    let fine_k = match cfg.location_law {
        LocationLaw::StoppingTime { .. } => None,
        LocationLaw::Uniform => {
            let (lo, hi) = location_bounds(cfg.gamma, fine)?;
            Some(rng.random_range(lo..=hi))
        }
        LocationLaw::TruncNormal => Some(truncnorm_location(cfg.gamma, fine, rng)?),
    };
    factors
        .iter()
        .map(|&r| {
            let n = fine / r;
            let root_n = (n as f64).sqrt();
            let root_r = (r as f64).sqrt();
            let agg = |e: &[f64], mu: f64, sd: f64| -> Vec<f64> {
                e.chunks(r)
                    .map(|c| mu / root_n + sd * c.iter().sum::<f64>() / root_r)
                    .collect()
            };
            let y1 = agg(&pre, cfg.mu1, cfg.sigma1);
            let y2 = agg(&post, cfg.mu2, cfg.sigma2);
            let (lo, hi) = location_bounds(cfg.gamma, n)?;
            let k_star = match (cfg.location_law, fine_k) {
                (LocationLaw::StoppingTime { kappa }, _) => {
                    stopping_time_location(&partial_sums(&y1), cfg.gamma, kappa)?
                }
                (_, Some(k)) => ((k as f64 / r as f64).round() as usize).clamp(lo, hi),
                (_, None) => unreachable!("fine location drawn for independent laws"),
            };
            let mut data = y1;
            data[k_star..].copy_from_slice(&y2[k_star..]);
            let partial_sums = partial_sums(&data);
            Ok(SimOutput {
                data,
                k_star,
                lambda_star: k_star as f64 / n as f64,
                partial_sums,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ItoConfig {
    pub n: usize,
    pub drift: f64,
    /// Volatility of the volatility factor.
    pub c: f64,
    /// Correlation between the price and volatility noise.
    pub rho: f64,
    /// Added to the volatility after the change.
    pub jump_size: f64,
    pub gamma: f64,
    pub kappa: f64,
    #[serde(default)]
    pub seed: u64,
}

impl ItoConfig {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            drift: -2.0,
            c: 0.1,
            rho: 0.5,
            jump_size: 0.3,
            gamma: 0.1,
            kappa: -1.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(invalid(format!("need n >= 2, got {}", self.n)));
        }
        if !(self.rho.abs() <= 1.0) {
            return Err(invalid(format!("need |rho| <= 1, got {}", self.rho)));
        }
        for (name, v) in [("drift", self.drift), ("c", self.c), ("jump_size", self.jump_size)] {
            if !v.is_finite() {
                return Err(invalid(format!("{name} must be finite")));
            }
        }
        location_bounds(self.gamma, self.n)?;
        Ok(())
    }
}

/// Deterministic seasonality `v(t) = 1 − 0.2·sin(3πt/4)`.
pub fn seasonality(t: f64) -> f64 {
    1.0 - 0.2 * (0.75 * std::f64::consts::PI * t).sin()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ItoPath {
    /// `ΔX_k`, `k = 1..=n`.
    pub increments: Vec<f64>,
    /// `σ(t_k)`, `k = 0..=n`, including the jump.
    pub sigma_path: Vec<f64>,
    pub k_star: usize,
}

pub fn gen_ito_path(cfg: &ItoConfig) -> Result<ItoPath> {
    gen_ito_path_with(cfg, &mut ChaCha8Rng::seed_from_u64(cfg.seed))
}

/// Euler scheme on `t_k = k/n`.
///
/// The volatility factor starts at 1 and moves by `cρΔW + c√(1−ρ²)ΔW⊥`;
/// `σ(t_k)` is the factor times `v(t_k)`. Increments are
/// `drift/n + σ(t_{k−1})ΔW_k`. The change location is the stopping time of
/// the jump-free path; `jump_size` is then added to `σ(t_k)` for `k > k*`
/// and the increments are recomputed from the same noise.
pub fn gen_ito_path_with<R: Rng + ?Sized>(cfg: &ItoConfig, rng: &mut R) -> Result<ItoPath> {
    cfg.validate()?;
    let n = cfg.n;
    let dt = 1.0 / n as f64;
    let sd = dt.sqrt();
    let mut dw = vec![0.0; n];
    let mut sigma = vec![0.0; n + 1];
    let mut factor = 1.0;
    sigma[0] = seasonality(0.0);
    let perp = (1.0 - cfg.rho * cfg.rho).sqrt();
    for k in 1..=n {
        let w = sd * rng.sample::<f64, _>(StandardNormal);
        let w_perp = sd * rng.sample::<f64, _>(StandardNormal);
        dw[k - 1] = w;
        factor += cfg.c * cfg.rho * w + cfg.c * perp * w_perp;
        sigma[k] = factor * seasonality(k as f64 * dt);
    }
    let build = |sigma: &[f64]| -> Vec<f64> {
        (1..=n).map(|k| cfg.drift * dt + sigma[k - 1] * dw[k - 1]).collect()
    };
    let mut increments = build(&sigma);
    let mut path = Vec::with_capacity(n + 1);
    path.push(0.0);
    let mut acc = 0.0;
    for v in &increments {
        acc += v;
        path.push(acc);
    }
    let k_star = stopping_time_location(&path, cfg.gamma, cfg.kappa)?;
    if cfg.jump_size != 0.0 {
        for s in &mut sigma[k_star + 1..] {
            *s += cfg.jump_size;
        }
        increments = build(&sigma);
    }
    Ok(ItoPath {
        increments,
        sigma_path: sigma,
        k_star,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn nested_paths_agree_on_the_coarse_grid() {
        let cfg = SimConfig::mean_jump(1200);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let out = gen_amoc_normal_nested(&cfg, &[1, 4], &mut rng).unwrap();
        let (fine, coarse) = (&out[0], &out[1]);
        assert_eq!(coarse.data.len(), 300);
        let common = coarse.k_star.min(fine.k_star / 4);
        for k in 0..=common {
            assert_abs_diff_eq!(coarse.partial_sums[k], fine.partial_sums[4 * k], epsilon = 1e-12);
        }
        assert!((coarse.lambda_star - fine.lambda_star).abs() < 0.05);
        assert!(gen_amoc_normal_nested(&cfg, &[7], &mut rng).is_err());
        let uni = SimConfig { location_law: LocationLaw::Uniform, ..cfg };
        let out = gen_amoc_normal_nested(&uni, &[1, 3], &mut rng).unwrap();
        assert!((out[1].k_star as f64 - out[0].k_star as f64 / 3.0).abs() <= 0.5);
    }

    #[test]
    fn stopping_time_examples() {
        let never = vec![0.0; 101];
        assert_eq!(stopping_time_location(&never, 0.1, -1.0).unwrap(), 90);
        assert_eq!(stopping_time_location(&never, 0.1, 1e9).unwrap(), 10);
        let mut path = vec![0.0; 101];
        path[5] = -5.0;
        path[42] = -1.5;
        assert_eq!(stopping_time_location(&path, 0.1, -1.0).unwrap(), 42);
    }

    #[test]
    fn stopping_time_concentrates_early_on_drifting_paths() {
        let mut ks = Vec::new();
        for seed in 0..200 {
            let cfg = SimConfig { seed, ..SimConfig::volatility_jump(2000).null() };
            ks.push(gen_amoc_normal(&cfg).unwrap().lambda_star);
        }
        ks.sort_by(f64::total_cmp);
        let median = ks[100];
        assert!(median > 0.1 && median < 0.7, "median {median}");
        assert!(ks.iter().filter(|&&l| l >= 0.9 - 1e-12).count() < 40);
    }

    #[test]
    fn bounds_are_exact_for_round_fractions() {
        assert_eq!(location_bounds(0.1, 10_000).unwrap(), (1000, 9000));
        assert_eq!(location_bounds(0.3, 10).unwrap(), (3, 7));
        assert!(location_bounds(0.5, 10).is_err());
        assert!(location_bounds(0.45, 1).is_err());
        assert_eq!(location_bounds(0.45, 2).unwrap(), (1, 1));
    }

    #[test]
    fn truncnorm_examples() {
        assert_abs_diff_eq!(truncnorm_scale(0.1), 0.13333333333333333, epsilon = 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let draws: Vec<usize> = (0..100_000).map(|_| truncnorm_location(0.1, 1000, &mut rng).unwrap()).collect();
        assert!(draws.iter().all(|&k| (100..=900).contains(&k)));
        let lam: Vec<f64> = draws.iter().map(|&k| k as f64 / 1000.0).collect();
        let mean = lam.iter().sum::<f64>() / lam.len() as f64;
        let var = lam.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / lam.len() as f64;
        assert!((mean - 0.5).abs() < 4.0 * (var / lam.len() as f64).sqrt(), "mean {mean}");
    }

    #[test]
    fn ar_transform_examples() {
        let data = [1.0, -2.0, 3.5, 0.25];
        assert_eq!(ar_transform(&data, 0.0).unwrap(), data.to_vec());
        let a = 0.5f64;
        let out = ar_transform(&[2.0; 5], a).unwrap();
        assert_eq!(out[0], 2.0);
        for v in &out[1..] {
            assert_abs_diff_eq!(*v, 2.0 * (a + (1.0 - a * a).sqrt()), epsilon = 1e-14);
        }
        assert!(ar_transform(&data, 1.0).is_err());

        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let iid: Vec<f64> = (0..100_000).map(|_| rng.sample(StandardNormal)).collect();
        let y = ar_transform(&iid, a).unwrap();
        let m = y.iter().sum::<f64>() / y.len() as f64;
        let var = y.iter().map(|v| (v - m).powi(2)).sum::<f64>();
        let cov: f64 = y.windows(2).map(|w| (w[0] - m) * (w[1] - m)).sum();
        let rho = cov / var;
        let target = a * (1.0 - a * a).sqrt();
        assert!((rho - target).abs() < 4.0 / (y.len() as f64).sqrt(), "rho {rho}");
    }

    #[test]
    fn null_generator_moments() {
        let cfg = SimConfig { n: 100_000, seed: 4, ..SimConfig::volatility_jump(100_000).null() };
        let out = gen_amoc_normal(&cfg).unwrap();
        let n = out.data.len() as f64;
        let mean = out.data.iter().sum::<f64>() / n;
        let var = out.data.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((mean - cfg.mu1 / n.sqrt()).abs() < 4.0 * (var / n).sqrt());
        assert!((var - 1.0).abs() < 4.0 * (2.0 / n).sqrt());
    }

    #[test]
    fn generator_is_deterministic_and_respects_bounds() {
        for law in [LocationLaw::default(), LocationLaw::Uniform, LocationLaw::TruncNormal] {
            for ar in [0.0, 0.5] {
                let cfg = SimConfig { location_law: law, ar_coeff: ar, seed: 17, ..SimConfig::mean_jump(1000) };
                let a = gen_amoc_normal(&cfg).unwrap();
                assert_eq!(a, gen_amoc_normal(&cfg).unwrap());
                assert!((100..=900).contains(&a.k_star));
                assert_eq!(a.partial_sums.len(), 1001);
                assert_abs_diff_eq!(a.partial_sums[1000], a.data.iter().sum::<f64>() / 1000f64.sqrt(), epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn stopping_time_is_causal() {
        // Different post-change laws share the noise before the change, so the
        // location and the pre-change data coincide.
        for seed in 0..50 {
            let vol = SimConfig { seed, ..SimConfig::volatility_jump(2000) };
            let mean = SimConfig { seed, ..SimConfig::mean_jump(2000) };
            let a = gen_amoc_normal(&vol).unwrap();
            let b = gen_amoc_normal(&mean).unwrap();
            assert_eq!(a.k_star, b.k_star);
            assert_eq!(a.data[..a.k_star], b.data[..b.k_star]);
        }
    }

    #[test]
    fn volatility_scenario_is_detectable() {
        use crate::expfam::ExpFamilyModel;
        let model = ExpFamilyModel::normal_meanvar();
        let cfg = SimConfig::volatility_jump(10_000);
        let m = cfg.mu1 / 100.0;
        let t1 = model.nat_param_from_moments(&[m], Some(1.0)).unwrap();
        let t2 = model.nat_param_from_moments(&[m], Some(1.21)).unwrap();
        let big_delta_sq: f64 = t1.iter().zip(t2.iter()).map(|(a, b)| (a - b).powi(2)).sum();
        // Grows linearly in n: a fixed volatility jump is detectable.
        assert!(10_000.0 * big_delta_sq > 50.0, "{}", 10_000.0 * big_delta_sq);
    }

    #[test]
    fn ito_examples() {
        assert_eq!(seasonality(0.0), 1.0);
        assert_abs_diff_eq!(seasonality(2.0 / 3.0), 0.8, epsilon = 1e-15);
        let cfg = ItoConfig { seed: 3, jump_size: 0.0, ..ItoConfig::new(10_000) };
        let p = gen_ito_path(&cfg).unwrap();
        assert_eq!(p.sigma_path[0], 1.0);
        assert_eq!(p.increments.len(), 10_000);
        let k = p.k_star;
        let step = (p.sigma_path[k + 1] - p.sigma_path[k]).abs();
        assert!(step < 0.05, "{step}");

        let jumped = gen_ito_path(&ItoConfig { jump_size: 0.3, ..cfg }).unwrap();
        assert_eq!(jumped.k_star, k);
        assert_abs_diff_eq!(jumped.sigma_path[k + 1] - p.sigma_path[k + 1], 0.3, epsilon = 1e-12);
        assert_eq!(jumped.sigma_path[..=k], p.sigma_path[..=k]);
        assert_eq!(jumped.increments[..=k], p.increments[..=k]);
        assert!(ItoConfig { rho: 1.5, ..cfg }.validate().is_err());
    }

    proptest! {
        #[test]
        fn locations_stay_admissible(seed in any::<u64>(), n in 20usize..400, gamma in 0.05f64..0.45, law in 0u8..3) {
            let location_law = match law {
                0 => LocationLaw::StoppingTime { kappa: -1.0 },
                1 => LocationLaw::Uniform,
                _ => LocationLaw::TruncNormal,
            };
            let cfg = SimConfig { n, gamma, location_law, seed, ..SimConfig::volatility_jump(n) };
            prop_assume!(location_bounds(gamma, n).is_ok());
            let (lo, hi) = location_bounds(gamma, n).unwrap();
            let out = gen_amoc_normal(&cfg).unwrap();
            prop_assert!(lo <= out.k_star && out.k_star <= hi);
            prop_assert!(out.k_star as f64 >= gamma * n as f64 - 1e-9);
            prop_assert!(out.k_star as f64 <= (1.0 - gamma) * n as f64 + 1e-9);
        }
    }
}
