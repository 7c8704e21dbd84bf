//! Replicated simulation experiments.
//!
//! An [`ExperimentSpec`] pairs a data generator with a pipeline that turns
//! each simulated series into a handful of named metrics. Replicate `i`
//! always uses the stream `seed_stream(master_seed, i)`, so results do not
//! depend on the worker count. Replicates whose series is degenerate are
//! counted, never redrawn.
//!
//! Specs can be written as TOML:
//!
//! ```toml
//! replications = 500
//! master_seed = 7
//!
//! [generator]
//! kind = "amoc"
//! n = 10000
//! mu1 = -2.0
//! mu2 = -2.0
//! sigma1 = 1.0
//! sigma2 = 1.1
//! gamma = 0.1
//! location_law = { law = "stopping-time", kappa = -1.0 }
//!
//! [pipeline]
//! kind = "parametric-detect"
//! model = "normal-meanvar"
//! alpha = 0.01
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::asymptotics::{AlternativeParams, AlternativeSample};
use crate::cpd::{self, CriticalValueSource, PrefixStats};
use crate::error::{invalid, CpdError, Result};
use crate::expfam::ExpFamilyModel;
use crate::mc::{par_replicates, EmpiricalDist, MonteCarloConfig, SUMMARY_LEVELS};
use crate::nonparam;
use crate::simgen::{self, ItoConfig, SimConfig};

/// Version tag written into every JSON document.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Generator {
    Amoc(SimConfig),
    Ito(ItoConfig),
}

/// Univariate models available to the simulation pipelines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelChoice {
    /// Mean only, with the variance fixed at the pre-change value.
    NormalMean,
    #[default]
    NormalMeanvar,
}

impl ModelChoice {
    pub fn build(self, cfg: &SimConfig) -> Result<ExpFamilyModel> {
        match self {
            Self::NormalMean => ExpFamilyModel::normal_mean(cfg.sigma1 * cfg.sigma1),
            Self::NormalMeanvar => Ok(ExpFamilyModel::normal_meanvar()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum CriticalSpec {
    #[default]
    Gumbel,
    Bridge {
        replications: usize,
        seed: u64,
    },
    Fixed {
        value: f64,
    },
}

fn default_alpha() -> f64 {
    0.05
}

fn default_block_constant() -> f64 {
    nonparam::DEFAULT_BLOCK_CONSTANT
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Pipeline {
    /// Likelihood-ratio test. Metrics: `stat_root`, `reject`, `k_hat`,
    /// `k_star`, `lambda_error` (`|λ̂ − λ*|`) and `scaled_lambda_error`
    /// (`nδ²|λ̂ − λ*|`, alternatives only).
    ParametricDetect {
        #[serde(default)]
        model: ModelChoice,
        #[serde(default = "default_alpha")]
        alpha: f64,
        #[serde(default)]
        critical: CriticalSpec,
    },
    /// Volatility-jump test on increments. Metrics: `vn`, `vstar`,
    /// `reject`, `k_star`.
    NonparamDetect {
        #[serde(default = "default_block_constant")]
        c: f64,
        #[serde(default = "default_alpha")]
        alpha: f64,
    },
    /// `(nδ²)^{-1/2} Zₙ(⌊nt⌋, ⌊nλ⌋)` on a grid, one metric per point
    /// (named by [`zn_metric_name`]), plus `remainder_sup`, the largest
    /// `|Rₙ|/√(nδ²)` over grid points with an admissible split.
    ///
    /// Both regimes are driven by the same standardized noise.
    ZnGrid {
        #[serde(default)]
        model: ModelChoice,
        t_grid: Vec<f64>,
        lambda_grid: Vec<f64>,
    },
    /// Estimation error. Metrics: `deviation` (`σ_A²δ²(k̂ − k*)`),
    /// `deviation_hat` (`Δ̂²(k̂ − k*)`), `k_hat`, `k_star`.
    DeviationStat {
        #[serde(default)]
        model: ModelChoice,
    },
}

pub fn zn_metric_name(t: f64, lambda: f64) -> String {
    format!("zn_t{t}_l{lambda}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub generator: Generator,
    pub pipeline: Pipeline,
    /// Metrics to keep; empty keeps all.
    #[serde(default)]
    pub metrics: Vec<String>,
}

/// A spec together with its Monte Carlo settings, as stored on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentFile {
    pub replications: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub parallelism: Option<usize>,
    pub generator: Generator,
    pub pipeline: Pipeline,
    #[serde(default)]
    pub metrics: Vec<String>,
}

impl ExperimentFile {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CpdError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn split(self) -> (ExperimentSpec, MonteCarloConfig) {
        let mc = MonteCarloConfig {
            replications: self.replications,
            master_seed: self.master_seed,
            parallelism: self.parallelism,
        };
        let spec = ExperimentSpec {
            generator: self.generator,
            pipeline: self.pipeline,
            metrics: self.metrics,
        };
        (spec, mc)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    /// Sorted distribution of each metric.
    pub metrics: BTreeMap<String, EmpiricalDist>,
    /// The same values in replicate order, aligned across metrics.
    pub samples: BTreeMap<String, Vec<f64>>,
    pub replications: usize,
    pub skipped: usize,
    pub skip_reasons: BTreeMap<String, usize>,
}

impl ExperimentResult {
    pub fn dist(&self, name: &str) -> Result<&EmpiricalDist> {
        self.metrics
            .get(name)
            .ok_or_else(|| invalid(format!("no metric named {name}")))
    }

    pub fn summary_json(&self, mc: &MonteCarloConfig) -> serde_json::Value {
        let metrics: serde_json::Map<String, serde_json::Value> = self
            .metrics
            .iter()
            .map(|(name, d)| {
                let q: serde_json::Map<String, serde_json::Value> = d
                    .summary_quantiles()
                    .into_iter()
                    .map(|(p, v)| (p.to_string(), v.into()))
                    .collect();
                let entry = serde_json::json!({
                    "count": d.count(),
                    "mean": d.mean(),
                    "std_dev": d.std_dev(),
                    "min": d.min(),
                    "max": d.max(),
                    "quantiles": q,
                });
                (name.clone(), entry)
            })
            .collect();
        serde_json::json!({
            "schema_version": SCHEMA_VERSION,
            "replications": self.replications,
            "master_seed": mc.master_seed,
            "skipped": self.skipped,
            "skip_reasons": self.skip_reasons,
            "quantile_levels": SUMMARY_LEVELS,
            "metrics": metrics,
        })
    }

    /// Writes `<prefix><metric>.csv` (one value per line, replicate order)
    /// for each metric and `<prefix>summary.json`. Returns the paths.
    pub fn write(&self, dir: &Path, prefix: &str, mc: &MonteCarloConfig) -> Result<Vec<std::path::PathBuf>> {
        let io = |path: &Path, e: std::io::Error| CpdError::Io {
            path: path.display().to_string(),
            source: e,
        };
        std::fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
        let mut written = Vec::new();
        for (name, values) in &self.samples {
            let path = dir.join(format!("{prefix}{name}.csv"));
            let mut text = String::from("value\n");
            for v in values {
                text.push_str(&format!("{v}\n"));
            }
            std::fs::write(&path, text).map_err(|e| io(&path, e))?;
            written.push(path);
        }
        let path = dir.join(format!("{prefix}summary.json"));
        let text = serde_json::to_string_pretty(&self.summary_json(mc))?;
        std::fs::write(&path, text + "\n").map_err(|e| io(&path, e))?;
        written.push(path);
        Ok(written)
    }
}

/// Pre- and post-change `(mean, variance)` of the observations.
///
/// The moving average rescales the mean by `a + √(1−a²)` and keeps the
/// variance.
pub fn segment_moments(cfg: &SimConfig) -> ((f64, f64), (f64, f64)) {
    let a = cfg.ar_coeff;
    let gain = a + (1.0 - a * a).sqrt();
    let root_n = (cfg.n as f64).sqrt();
    (
        (gain * cfg.mu1 / root_n, cfg.sigma1 * cfg.sigma1),
        (gain * cfg.mu2 / root_n, cfg.sigma2 * cfg.sigma2),
    )
}

/// True parameters of the simulated alternative under `model`.
pub fn alternative_params(cfg: &SimConfig, model: &ExpFamilyModel) -> Result<AlternativeParams> {
    let ((m1, v1), (m2, v2)) = segment_moments(cfg);
    let var = |v: f64| match model.kind() {
        crate::expfam::ModelKind::NormalMeanVar => Some(v),
        _ => None,
    };
    AlternativeParams::from_moments(model, (&[m1], var(v1)), (&[m2], var(v2)))
}

type Row = Vec<(String, f64)>;

enum Prepared {
    Parametric {
        model: ExpFamilyModel,
        alpha: f64,
        critical: f64,
        cfg: SimConfig,
        ap: AlternativeParams,
    },
    Nonparam {
        c: f64,
        alpha: f64,
    },
    Zn {
        model: ExpFamilyModel,
        cfg: SimConfig,
        ap: AlternativeParams,
        points: Vec<(f64, f64)>,
    },
    Deviation {
        model: ExpFamilyModel,
        cfg: SimConfig,
        scale: f64,
    },
}

fn prepare(spec: &ExperimentSpec) -> Result<Prepared> {
    let amoc = |what: &str| match spec.generator {
        Generator::Amoc(cfg) => {
            cfg.validate()?;
            Ok(cfg)
        }
        Generator::Ito(_) => Err(invalid(format!(
            "the {what} pipeline needs the amoc generator"
        ))),
    };
    Ok(match &spec.pipeline {
        Pipeline::ParametricDetect { model, alpha, critical } => {
            let cfg = amoc("parametric-detect")?;
            let model_built = model.build(&cfg)?;
            let source = match *critical {
                CriticalSpec::Gumbel => CriticalValueSource::Gumbel,
                CriticalSpec::Bridge { replications, seed } => {
                    CriticalValueSource::Bridge(MonteCarloConfig::new(replications, seed))
                }
                CriticalSpec::Fixed { value } => CriticalValueSource::Fixed(value),
            };
            let critical = source.critical_value(*alpha, model_built.d(), cfg.n)?;
            let ap = alternative_params(&cfg, &model_built)?;
            Prepared::Parametric { model: model_built, alpha: *alpha, critical, cfg, ap }
        }
        Pipeline::NonparamDetect { c, alpha } => {
            let n = match spec.generator {
                Generator::Amoc(cfg) => {
                    cfg.validate()?;
                    cfg.n
                }
                Generator::Ito(cfg) => {
                    cfg.validate()?;
                    cfg.n
                }
            };
            nonparam::block_length(n, *c)?;
            nonparam::nonparam_threshold(*alpha)?;
            Prepared::Nonparam { c: *c, alpha: *alpha }
        }
        Pipeline::ZnGrid { model, t_grid, lambda_grid } => {
            let cfg = amoc("zn-grid")?;
            let model = model.build(&cfg)?;
            let ap = alternative_params(&cfg, &model)?;
            if ap.delta_sq == 0.0 {
                return Err(invalid("the zn-grid pipeline needs a change"));
            }
            if t_grid.is_empty() || lambda_grid.is_empty() {
                return Err(invalid("zn-grid needs non-empty t and lambda grids"));
            }
            let n = cfg.n;
            for &l in lambda_grid {
                let k = (n as f64 * l).floor() as usize;
                if !(1..n).contains(&k) {
                    return Err(invalid(format!("lambda {l} gives no change inside the series")));
                }
            }
            for &t in t_grid {
                let k = (n as f64 * t).floor() as usize;
                if !(1..=n).contains(&k) {
                    return Err(invalid(format!("t {t} lies outside (0, 1]")));
                }
            }
            let points = t_grid
                .iter()
                .flat_map(|&t| lambda_grid.iter().map(move |&l| (t, l)))
                .collect();
            Prepared::Zn { model, cfg, ap, points }
        }
        Pipeline::DeviationStat { model } => {
            let cfg = amoc("deviation-stat")?;
            let model = model.build(&cfg)?;
            let ap = alternative_params(&cfg, &model)?;
            let sigma_a_sq = ap
                .sigma_a_sq
                .ok_or_else(|| invalid("the deviation-stat pipeline needs a change"))?;
            Prepared::Deviation { model, cfg, scale: sigma_a_sq * ap.delta_sq }
        }
    })
}

fn replicate<R: Rng + ?Sized>(gen: &Generator, prep: &Prepared, rng: &mut R) -> Result<Row> {
    match prep {
        Prepared::Parametric { model, alpha, critical, cfg, ap } => {
            let sim = simgen::gen_amoc_normal_with(cfg, rng)?;
            let ps = PrefixStats::new(model, &sim.data)?;
            let r = cpd::detect_prefix(&ps, *alpha, &CriticalValueSource::Fixed(*critical))?;
            let err = (r.lambda_hat - sim.lambda_star).abs();
            let mut row = vec![
                ("stat_root".into(), r.stat_root),
                ("reject".into(), f64::from(u8::from(r.reject))),
                ("k_hat".into(), r.k_hat as f64),
                ("k_star".into(), sim.k_star as f64),
                ("lambda_error".into(), err),
            ];
            if ap.delta_sq > 0.0 {
                row.push(("scaled_lambda_error".into(), cfg.n as f64 * ap.delta_sq * err));
            }
            Ok(row)
        }
        Prepared::Nonparam { c, alpha } => {
            let (increments, k_star) = match gen {
                Generator::Ito(cfg) => {
                    let p = simgen::gen_ito_path_with(cfg, rng)?;
                    (p.increments, p.k_star)
                }
                Generator::Amoc(cfg) => {
                    let sim = simgen::gen_amoc_normal_with(cfg, rng)?;
                    let scale = 1.0 / (cfg.n as f64).sqrt();
                    (sim.data.iter().map(|y| y * scale).collect(), sim.k_star)
                }
            };
            let r = nonparam::nonparam_detect(&increments, *c, *alpha)?;
            Ok(vec![
                ("vn".into(), r.vn),
                ("vstar".into(), r.vstar),
                ("reject".into(), f64::from(u8::from(r.reject))),
                ("k_star".into(), k_star as f64),
            ])
        }
        Prepared::Zn { model, cfg, ap, points } => {
            let n = cfg.n;
            let ((m1, v1), (m2, v2)) = segment_moments(cfg);
            let (s1, s2) = (v1.sqrt(), v2.sqrt());
            let eps: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            let x1: Vec<f64> = eps.iter().map(|e| m1 + s1 * e).collect();
            let x2: Vec<f64> = eps.iter().map(|e| m2 + s2 * e).collect();
            let scale = 1.0 / (n as f64 * ap.delta_sq).sqrt();
            let mut row = Vec::with_capacity(points.len() + 1);
            let mut rem_sup = 0.0f64;
            let mut by_lambda: BTreeMap<usize, AlternativeSample> = BTreeMap::new();
            for &(t, l) in points {
                let ks = (n as f64 * l).floor() as usize;
                let k = (n as f64 * t).floor() as usize;
                if !by_lambda.contains_key(&ks) {
                    by_lambda.insert(ks, AlternativeSample::new(model, ap, &x1, &x2, ks)?);
                }
                let s = &by_lambda[&ks];
                row.push((zn_metric_name(t, l), scale * s.zn(k)?));
                if s.observed().split_range().contains(&k) {
                    rem_sup = rem_sup.max(scale * s.remainder(k)?.abs());
                }
            }
            row.push(("remainder_sup".into(), rem_sup));
            Ok(row)
        }
        Prepared::Deviation { model, cfg, scale } => {
            let sim = simgen::gen_amoc_normal_with(cfg, rng)?;
            let ps = PrefixStats::new(model, &sim.data)?;
            let max = cpd::max_statistic(&ps)?;
            let dhat = cpd::size_of_change(&ps, max.k_hat)?;
            let diff = max.k_hat as f64 - sim.k_star as f64;
            Ok(vec![
                ("deviation".into(), scale * diff),
                ("deviation_hat".into(), dhat * diff),
                ("k_hat".into(), max.k_hat as f64),
                ("k_star".into(), sim.k_star as f64),
            ])
        }
    }
}

fn skip_reason(e: &CpdError) -> Option<&'static str> {
    match e {
        CpdError::DegenerateSeries(_) => Some("degenerate-series"),
        CpdError::DegenerateMoment(_) => Some("degenerate-moment"),
        _ => None,
    }
}

/// Runs `spec` for `mc.replications` replicates.
pub fn run_experiment(spec: &ExperimentSpec, mc: &MonteCarloConfig) -> Result<ExperimentResult> {
    mc.validate()?;
    let prep = prepare(spec)?;
    let rows = par_replicates(mc, |_, rng| replicate(&spec.generator, &prep, rng))?;
    let mut samples: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut skip_reasons = BTreeMap::new();
    let mut skipped = 0;
    for row in rows {
        match row {
            Ok(row) => {
                for (name, v) in row {
                    if spec.metrics.is_empty() || spec.metrics.contains(&name) {
                        samples.entry(name).or_default().push(v);
                    }
                }
            }
            Err(e) => match skip_reason(&e) {
                Some(reason) => {
                    skipped += 1;
                    *skip_reasons.entry(reason.to_string()).or_insert(0) += 1;
                }
                None => return Err(e),
            },
        }
    }
    if let Some(missing) = spec.metrics.iter().find(|m| !samples.contains_key(*m)) {
        if skipped < mc.replications {
            return Err(invalid(format!("pipeline produces no metric named {missing}")));
        }
    }
    let metrics = samples
        .iter()
        .map(|(k, v)| Ok((k.clone(), EmpiricalDist::new(v.clone())?)))
        .collect::<Result<_>>()?;
    Ok(ExperimentResult {
        metrics,
        samples,
        replications: mc.replications,
        skipped,
        skip_reasons,
    })
}
