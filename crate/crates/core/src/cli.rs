//! Command-line front end.
//!
//! The `expfam-cpd` binary is a thin wrapper around [`main_with_args`], which
//! is also what the integration tests drive.
//!
//! CSV input has one observation per line, with the coordinates of a
//! multivariate observation separated by commas. There is no header unless
//! `--header` is given. Blank lines are ignored.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use serde_json::{json, Value};

use crate::asymptotics::{self, ArgmaxConfig};
use crate::cpd::{self, CriticalValueSource, DetectionReport};
use crate::error::{invalid, CpdError, Result};
use crate::expfam::ExpFamilyModel;
use crate::experiment::{
    self, CriticalSpec, ExperimentFile, ExperimentResult, ExperimentSpec, Generator, ModelChoice,
    Pipeline, SCHEMA_VERSION,
};
use crate::mc::{EmpiricalDist, MonteCarloConfig, SUMMARY_LEVELS};
use crate::nonparam;
use crate::simgen::{self, ItoConfig, LocationLaw, SimConfig};

const HIST_BINS: usize = 50;

#[derive(Debug, Parser)]
#[command(name = "expfam-cpd", version, about = "Change-point detection for exponential-family series")]
pub struct Cli {
    /// Worker threads for Monte Carlo work (default: EXPFAM_CPD_THREADS or all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Test a series for a single change point.
    Detect(DetectArgs),
    /// Write a simulated series and a JSON sidecar.
    Simulate(SimulateArgs),
    /// Table of critical values.
    Critvals(CritvalsArgs),
    /// Quantiles of the argmax of the two-sided drifted Brownian motion.
    ArgmaxDist(ArgmaxArgs),
    /// Replicated simulation producing histogram data and SVG plots.
    Replicate(ReplicateArgs),
    /// Confidence interval for the change location.
    Ci(CiArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelName {
    NormalMean,
    NormalMeanvar,
    MvnormalMean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Gumbel,
    Bridge,
    Nonparam,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CritMethod {
    Gumbel,
    Bridge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum Format {
    #[default]
    Json,
    Text,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LawName {
    StoppingTime,
    Uniform,
    TruncNormal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Scenario {
    VolJump,
    MeanJump,
    Null,
    Ito,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Figure {
    VolJump,
    MeanJump,
    Deviation,
    ArDependent,
    NonparamVol,
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// CSV file of observations.
    pub input: PathBuf,
    /// Skip the first line.
    #[arg(long)]
    pub header: bool,
    #[arg(long, value_enum, default_value = "normal-meanvar")]
    pub model: ModelName,
    /// Known variance for `normal-mean`.
    #[arg(long, default_value_t = 1.0)]
    pub sigma2: f64,
    /// CSV file with the known covariance matrix for `mvnormal-mean`.
    #[arg(long)]
    pub cov: Option<PathBuf>,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, value_enum, default_value = "gumbel")]
    pub method: Method,
    /// Block constant of the non-parametric test.
    #[arg(long = "C", default_value_t = nonparam::DEFAULT_BLOCK_CONSTANT)]
    pub block_constant: f64,
    /// Bridge replications for `--method bridge`.
    #[arg(long, default_value_t = 2000)]
    pub replications: usize,
    /// Also report a confidence interval for the change location.
    #[arg(long)]
    pub ci: bool,
    #[arg(long, default_value_t = 10_000)]
    pub argmax_samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct CiArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, default_value_t = 10_000)]
    pub argmax_samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum, default_value = "vol-jump")]
    pub scenario: Scenario,
    #[arg(long, default_value_t = 10_000)]
    pub n: usize,
    #[arg(long)]
    pub mu1: Option<f64>,
    #[arg(long)]
    pub mu2: Option<f64>,
    #[arg(long)]
    pub sigma1: Option<f64>,
    #[arg(long)]
    pub sigma2: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long, value_enum, default_value = "stopping-time")]
    pub law: LawName,
    #[arg(long, default_value_t = -1.0, allow_negative_numbers = true)]
    pub kappa: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub ar_coeff: f64,
    /// Volatility jump for the `ito` scenario.
    #[arg(long)]
    pub jump_size: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output CSV; the sidecar goes next to it with a `.json` extension.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CritvalsArgs {
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.05,0.01")]
    pub alpha: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "2")]
    pub d: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "10000")]
    pub n: Vec<usize>,
    #[arg(long, value_enum, default_value = "gumbel")]
    pub method: CritMethod,
    #[arg(long, default_value_t = 2000)]
    pub replications: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct ArgmaxArgs {
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 200.0)]
    pub horizon: f64,
    #[arg(long, default_value_t = 0.01)]
    pub step: f64,
    #[arg(long, value_delimiter = ',')]
    pub levels: Option<Vec<f64>>,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct ReplicateArgs {
    #[arg(long, value_enum, required_unless_present = "config")]
    pub figure: Option<Figure>,
    /// Run an experiment file instead of a built-in figure.
    #[arg(long, conflicts_with = "figure")]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 500)]
    pub replications: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 10_000)]
    pub n: usize,
    #[arg(long, value_enum, default_value = "stopping-time")]
    pub law: LawName,
    /// Draws of the argmax law for the deviation comparisons.
    #[arg(long, default_value_t = 2000)]
    pub argmax_samples: usize,
    #[arg(long)]
    pub out: PathBuf,
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code. Errors go to `stderr`, results to `stdout`.
pub fn main_with_args<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{text}");
                    0
                }
                _ => {
                    let _ = write!(stderr, "{text}");
                    1
                }
            };
        }
    };
    match run(&cli, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            1
        }
    }
}

pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    let threads = cli.threads.or_else(MonteCarloConfig::parallelism_from_env);
    let mc = |reps: usize, seed: u64| {
        let m = MonteCarloConfig::new(reps, seed);
        match threads {
            Some(t) => m.with_parallelism(t),
            None => m,
        }
    };
    let text = match &cli.command {
        Command::Detect(a) => cmd_detect(a, &mc)?,
        Command::Ci(a) => cmd_ci(a, &mc)?,
        Command::Simulate(a) => cmd_simulate(a)?,
        Command::Critvals(a) => cmd_critvals(a, &mc)?,
        Command::ArgmaxDist(a) => cmd_argmax(a, &mc)?,
        Command::Replicate(a) => cmd_replicate(a, &mc, threads)?,
    };
    out.write_all(text.as_bytes()).map_err(|source| CpdError::Io {
        path: "<stdout>".into(),
        source,
    })
}

/// Reads a numeric CSV: one row per non-blank line.
pub fn read_csv(path: &Path, header: bool) -> Result<Vec<Vec<f64>>> {
    let text = std::fs::read_to_string(path).map_err(|source| CpdError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if (header && i == 0) || line.trim().is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|f| f.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<f64>, _>>()
            .map_err(|e| CpdError::Parse {
                path: path.display().to_string(),
                line: i + 1,
                msg: format!("{e} in {line:?}"),
            })?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CpdError::Parse {
            path: path.display().to_string(),
            line: 0,
            msg: "no observations".into(),
        });
    }
    Ok(rows)
}

fn build_model(a: &InputArgs) -> Result<ExpFamilyModel> {
    match a.model {
        ModelName::NormalMean => ExpFamilyModel::normal_mean(a.sigma2),
        ModelName::NormalMeanvar => Ok(ExpFamilyModel::normal_meanvar()),
        ModelName::MvnormalMean => {
            let path = a
                .cov
                .as_ref()
                .ok_or_else(|| invalid("mvnormal-mean needs --cov FILE"))?;
            let rows = read_csv(path, false)?;
            let d = rows.len();
            if rows.iter().any(|r| r.len() != d) {
                return Err(invalid(format!("{}: covariance must be square", path.display())));
            }
            ExpFamilyModel::mvnormal_mean(DMatrix::from_fn(d, d, |i, j| rows[i][j]))
        }
    }
}

fn read_input(a: &InputArgs) -> Result<(ExpFamilyModel, Vec<f64>)> {
    let model = build_model(a)?;
    let rows = read_csv(&a.input, a.header)?;
    let m = model.m();
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != m) {
        return Err(invalid(format!(
            "{}: observation {} has {} fields, the model expects {m}",
            a.input.display(),
            i + 1,
            r.len()
        )));
    }
    Ok((model, rows.into_iter().flatten().collect()))
}

/// Detection report as written by `detect`.
pub fn report_json(report: &DetectionReport, model: &ExpFamilyModel, method: &str) -> Value {
    let mut v = serde_json::to_value(report).expect("report serializes");
    let map = v.as_object_mut().expect("report is an object");
    map.insert("schema_version".into(), SCHEMA_VERSION.into());
    map.insert("n".into(), report.n.into());
    map.insert("model".into(), model.name().into());
    map.insert("method".into(), method.into());
    v
}

/// `%g`-style rendering with six significant digits.
pub fn fmt_sig6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let e = x.abs().log10().floor() as i32;
    if (-4..6).contains(&e) {
        let s = format!("{:.*}", (5 - e).max(0) as usize, x);
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        format!("{x:.5e}")
    }
}

fn render_text(v: &Value) -> String {
    let mut s = String::new();
    if let Value::Object(map) = v {
        for (k, val) in map {
            let shown = match val {
                Value::Number(num) if num.is_f64() => fmt_sig6(num.as_f64().unwrap_or(f64::NAN)),
                other => other.to_string(),
            };
            let _ = writeln!(s, "{k}: {shown}");
        }
    }
    s
}

fn render(v: &Value, format: Format) -> Result<String> {
    match format {
        Format::Json => Ok(serde_json::to_string_pretty(v)? + "\n"),
        Format::Text => Ok(render_text(v)),
        Format::Csv => Err(invalid("csv output is only available for tables")),
    }
}

fn argmax_dist(samples: usize, seed: u64, mc: &dyn Fn(usize, u64) -> MonteCarloConfig) -> Result<EmpiricalDist> {
    asymptotics::sample_argmax_what(&mc(samples, seed))
}

fn cmd_detect(a: &DetectArgs, mc: &dyn Fn(usize, u64) -> MonteCarloConfig) -> Result<String> {
    let (model, data) = read_input(&a.input)?;
    if a.method == Method::Nonparam {
        if a.input.model != ModelName::NormalMeanvar && a.input.model != ModelName::NormalMean {
            return Err(invalid("the non-parametric test takes univariate increments"));
        }
        let r = nonparam::nonparam_detect(&data, a.block_constant, a.input.alpha)?;
        let mut v = serde_json::to_value(&r)?;
        let map = v.as_object_mut().expect("report is an object");
        map.insert("schema_version".into(), SCHEMA_VERSION.into());
        map.insert("method".into(), "nonparam".into());
        return render(&v, a.format);
    }
    let (source, name) = match a.method {
        Method::Bridge => (CriticalValueSource::Bridge(mc(a.replications, a.seed)), "bridge"),
        _ => (CriticalValueSource::Gumbel, "gumbel"),
    };
    let mut report = cpd::detect(&data, &model, a.input.alpha, &source)?;
    if a.ci {
        let dist = argmax_dist(a.argmax_samples, a.seed, mc)?;
        cpd::attach_confidence_interval(&mut report, &dist, a.input.alpha)?;
    }
    render(&report_json(&report, &model, name), a.format)
}

fn cmd_ci(a: &CiArgs, mc: &dyn Fn(usize, u64) -> MonteCarloConfig) -> Result<String> {
    let (model, data) = read_input(&a.input)?;
    let mut report = cpd::detect(&data, &model, a.input.alpha, &CriticalValueSource::Gumbel)?;
    if !(report.delta_hat_sq > 0.0) {
        return Err(invalid("estimated size of change is zero; there is no change to localize"));
    }
    let dist = argmax_dist(a.argmax_samples, a.seed, mc)?;
    let (q_low, q_high) = cpd::argmax_quantiles(&dist, a.input.alpha)?;
    cpd::attach_confidence_interval(&mut report, &dist, a.input.alpha)?;
    let ci = report.ci.expect("interval attached");
    let v = json!({
        "schema_version": SCHEMA_VERSION,
        "n": report.n,
        "k_hat": report.k_hat,
        "lambda_hat": report.lambda_hat,
        "delta_hat_sq": report.delta_hat_sq,
        "alpha": a.input.alpha,
        "argmax_q_low": q_low,
        "argmax_q_high": q_high,
        "ci_low": ci.low,
        "ci_high": ci.high,
    });
    render(&v, a.format)
}

fn law_of(name: LawName, kappa: f64) -> LocationLaw {
    match name {
        LawName::StoppingTime => LocationLaw::StoppingTime { kappa },
        LawName::Uniform => LocationLaw::Uniform,
        LawName::TruncNormal => LocationLaw::TruncNormal,
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|source| CpdError::Io {
            path: dir.display().to_string(),
            source,
        })?;
    }
    std::fs::write(path, text).map_err(|source| CpdError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn column_csv(values: &[f64]) -> String {
    let mut s = String::with_capacity(values.len() * 20);
    for v in values {
        let _ = writeln!(s, "{v}");
    }
    s
}

fn cmd_simulate(a: &SimulateArgs) -> Result<String> {
    let sidecar = a.out.with_extension("json");
    let (data, k_star, config) = if a.scenario == Scenario::Ito {
        let mut cfg = ItoConfig::new(a.n);
        cfg.kappa = a.kappa;
        cfg.seed = a.seed;
        if let Some(j) = a.jump_size {
            cfg.jump_size = j;
        }
        if let Some(g) = a.gamma {
            cfg.gamma = g;
        }
        let p = simgen::gen_ito_path(&cfg)?;
        (p.increments, p.k_star, serde_json::to_value(Generator::Ito(cfg))?)
    } else {
        let mut cfg = match a.scenario {
            Scenario::MeanJump => SimConfig::mean_jump(a.n),
            Scenario::Null => SimConfig::volatility_jump(a.n).null(),
            _ => SimConfig::volatility_jump(a.n),
        };
        cfg.mu1 = a.mu1.unwrap_or(cfg.mu1);
        cfg.mu2 = a.mu2.unwrap_or(cfg.mu2);
        cfg.sigma1 = a.sigma1.unwrap_or(cfg.sigma1);
        cfg.sigma2 = a.sigma2.unwrap_or(cfg.sigma2);
        cfg.gamma = a.gamma.unwrap_or(cfg.gamma);
        cfg.location_law = law_of(a.law, a.kappa);
        cfg.ar_coeff = a.ar_coeff;
        cfg.seed = a.seed;
        let sim = simgen::gen_amoc_normal(&cfg)?;
        (sim.data, sim.k_star, serde_json::to_value(Generator::Amoc(cfg))?)
    };
    write_file(&a.out, &column_csv(&data))?;
    let meta = json!({
        "schema_version": SCHEMA_VERSION,
        "n": data.len(),
        "k_star": k_star,
        "lambda_star": k_star as f64 / data.len() as f64,
        "config": config,
    });
    write_file(&sidecar, &(serde_json::to_string_pretty(&meta)? + "\n"))?;
    Ok(format!("{}\n{}\n", a.out.display(), sidecar.display()))
}

fn cmd_critvals(a: &CritvalsArgs, mc: &dyn Fn(usize, u64) -> MonteCarloConfig) -> Result<String> {
    let mut rows = Vec::new();
    for &d in &a.d {
        for &n in &a.n {
            // One bridge sample per (d, n) serves every level.
            let bridge = match a.method {
                CritMethod::Bridge => Some(asymptotics::sample_sup_bridge(d, n, &mc(a.replications, a.seed))?),
                CritMethod::Gumbel => None,
            };
            for &alpha in &a.alpha {
                let kappa = match &bridge {
                    Some(dist) => {
                        cpd::check_alpha(alpha)?;
                        dist.quantile(1.0 - alpha)?.sqrt()
                    }
                    None => asymptotics::gumbel_critical_value(alpha, d, n)?,
                };
                rows.push((alpha, d, n, kappa));
            }
        }
    }
    let method = match a.method {
        CritMethod::Gumbel => "gumbel",
        CritMethod::Bridge => "bridge",
    };
    match a.format {
        Format::Csv => {
            let mut s = String::from("alpha,d,n,method,kappa\n");
            for (alpha, d, n, k) in rows {
                let _ = writeln!(s, "{alpha},{d},{n},{method},{k}");
            }
            Ok(s)
        }
        Format::Text => {
            let mut s = String::new();
            for (alpha, d, n, k) in rows {
                let _ = writeln!(s, "alpha={alpha} d={d} n={n} {method}: {}", fmt_sig6(k));
            }
            Ok(s)
        }
        Format::Json => {
            let table: Vec<Value> = rows
                .into_iter()
                .map(|(alpha, d, n, k)| json!({"alpha": alpha, "d": d, "n": n, "method": method, "kappa": k}))
                .collect();
            let v = json!({"schema_version": SCHEMA_VERSION, "critical_values": table});
            Ok(serde_json::to_string_pretty(&v)? + "\n")
        }
    }
}

fn cmd_argmax(a: &ArgmaxArgs, mc: &dyn Fn(usize, u64) -> MonteCarloConfig) -> Result<String> {
    let cfg = ArgmaxConfig {
        horizon: a.horizon,
        step: a.step,
        ..ArgmaxConfig::default()
    };
    let dist = asymptotics::sample_argmax_what_with(&cfg, &mc(a.samples, a.seed))?;
    let levels = a.levels.clone().unwrap_or_else(|| SUMMARY_LEVELS.to_vec());
    let table = levels
        .iter()
        .map(|&p| Ok((p, dist.quantile(p)?)))
        .collect::<Result<Vec<_>>>()?;
    match a.format {
        Format::Csv => {
            let mut s = String::from("level,quantile\n");
            for (p, q) in table {
                let _ = writeln!(s, "{p},{q}");
            }
            Ok(s)
        }
        Format::Text => {
            let mut s = String::new();
            for (p, q) in table {
                let _ = writeln!(s, "{p}: {}", fmt_sig6(q));
            }
            Ok(s)
        }
        Format::Json => {
            let q: serde_json::Map<String, Value> =
                table.into_iter().map(|(p, q)| (p.to_string(), q.into())).collect();
            let v = json!({
                "schema_version": SCHEMA_VERSION,
                "samples": dist.count(),
                "mean": dist.mean(),
                "std_dev": dist.std_dev(),
                "quantiles": q,
            });
            Ok(serde_json::to_string_pretty(&v)? + "\n")
        }
    }
}

fn hist_csv(dist: &EmpiricalDist) -> String {
    let mut s = String::from("left,right,count\n");
    for (left, width, count) in dist.histogram(HIST_BINS) {
        let _ = writeln!(s, "{left},{},{count}", left + width);
    }
    s
}

fn svg_axes(title: &str, x0: f64, x1: f64, y_max: f64) -> String {
    format!(
        concat!(
            "<line x1=\"50\" y1=\"250\" x2=\"470\" y2=\"250\" stroke=\"black\"/>\n",
            "<line x1=\"50\" y1=\"20\" x2=\"50\" y2=\"250\" stroke=\"black\"/>\n",
            "<text x=\"260\" y=\"15\" text-anchor=\"middle\" font-size=\"12\">{}</text>\n",
            "<text x=\"50\" y=\"268\" font-size=\"10\">{}</text>\n",
            "<text x=\"470\" y=\"268\" text-anchor=\"end\" font-size=\"10\">{}</text>\n",
            "<text x=\"45\" y=\"25\" text-anchor=\"end\" font-size=\"10\">{}</text>\n",
            "<text x=\"45\" y=\"250\" text-anchor=\"end\" font-size=\"10\">0</text>\n",
        ),
        title,
        fmt_sig6(x0),
        fmt_sig6(x1),
        fmt_sig6(y_max)
    )
}

fn svg_doc(body: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"500\" height=\"280\" viewBox=\"0 0 500 280\">\n\
         <rect width=\"500\" height=\"280\" fill=\"white\"/>\n{body}</svg>\n"
    )
}

/// Bar chart of a histogram.
pub fn histogram_svg(title: &str, dist: &EmpiricalDist) -> String {
    let hist = dist.histogram(HIST_BINS);
    let top = hist.iter().map(|h| h.2).max().unwrap_or(1).max(1) as f64;
    let bar = 420.0 / hist.len() as f64;
    let mut body = String::new();
    for (i, (_, _, c)) in hist.iter().enumerate() {
        let h = 230.0 * *c as f64 / top;
        let _ = writeln!(
            body,
            "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"steelblue\"/>",
            50.0 + i as f64 * bar,
            250.0 - h,
            bar,
            h
        );
    }
    let x1 = hist.last().map_or(0.0, |h| h.0 + h.1);
    body.push_str(&svg_axes(title, dist.min(), x1, top));
    svg_doc(&body)
}

/// Polyline of a path.
pub fn path_svg(title: &str, ys: &[f64]) -> String {
    let lo = ys.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let stride = (ys.len() / 1000).max(1);
    let last = ys.len().saturating_sub(1).max(1) as f64;
    let mut pts = String::new();
    for (i, y) in ys.iter().enumerate().step_by(stride) {
        let _ = write!(pts, "{:.2},{:.2} ", 50.0 + 420.0 * i as f64 / last, 250.0 - 230.0 * (y - lo) / span);
    }
    let mut body = format!("<polyline points=\"{}\" fill=\"none\" stroke=\"steelblue\"/>\n", pts.trim_end());
    body.push_str(&svg_axes(title, 0.0, last, hi));
    let _ = writeln!(body, "<text x=\"45\" y=\"240\" text-anchor=\"end\" font-size=\"10\">{}</text>", fmt_sig6(lo));
    svg_doc(&body)
}

struct FigureWriter {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl FigureWriter {
    fn put(&mut self, name: &str, text: &str) -> Result<()> {
        let path = self.dir.join(name);
        write_file(&path, text)?;
        self.files.push(path);
        Ok(())
    }

    fn hist(&mut self, stem: &str, title: &str, dist: &EmpiricalDist) -> Result<()> {
        self.put(&format!("{stem}_hist.csv"), &hist_csv(dist))?;
        self.put(&format!("{stem}_hist.svg"), &histogram_svg(title, dist))
    }

    fn path(&mut self, title: &str, header: &str, rows: &[Vec<f64>]) -> Result<()> {
        let mut s = format!("{header}\n");
        for r in rows {
            let line: Vec<String> = r.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(s, "{}", line.join(","));
        }
        self.put("path.csv", &s)?;
        let ys: Vec<f64> = rows.iter().map(|r| r[1]).collect();
        self.put("path.svg", &path_svg(title, &ys))
    }

    fn experiment(&mut self, prefix: &str, r: &ExperimentResult, mc: &MonteCarloConfig) -> Result<()> {
        self.files.extend(r.write(&self.dir, prefix, mc)?);
        Ok(())
    }
}

fn amoc_path_rows(cfg: &SimConfig, seed: u64) -> Result<(Vec<Vec<f64>>, usize)> {
    let sim = simgen::gen_amoc_normal(&SimConfig { seed, ..*cfg })?;
    let rows = sim
        .partial_sums
        .iter()
        .enumerate()
        .map(|(k, x)| vec![k as f64, *x])
        .collect();
    Ok((rows, sim.k_star))
}

fn deviation_vs_argmax(
    w: &mut FigureWriter,
    cfg: SimConfig,
    a: &ReplicateArgs,
    mc: &dyn Fn(usize, u64) -> MonteCarloConfig,
) -> Result<Value> {
    let spec = ExperimentSpec {
        generator: Generator::Amoc(cfg),
        pipeline: Pipeline::DeviationStat { model: ModelChoice::NormalMeanvar },
        metrics: vec![],
    };
    let m = mc(a.replications, a.seed);
    let r = experiment::run_experiment(&spec, &m)?;
    w.experiment("dev_", &r, &m)?;
    let dev = r.dist("deviation")?;
    let arg = argmax_dist(a.argmax_samples, a.seed ^ 0x5eed, mc)?;
    w.hist("deviation", "scaled deviation of the estimated change", dev)?;
    w.hist("argmax", "argmax of the two-sided drifted Brownian motion", &arg)?;
    Ok(json!({
        "deviation_samples": dev.count(),
        "argmax_samples": arg.count(),
        "ks_distance": dev.ks_distance(&arg),
        "skipped": r.skipped,
    }))
}

fn cmd_replicate(
    a: &ReplicateArgs,
    mc: &dyn Fn(usize, u64) -> MonteCarloConfig,
    threads: Option<usize>,
) -> Result<String> {
    let mut w = FigureWriter { dir: a.out.clone(), files: Vec::new() };
    let mut extra = serde_json::Map::new();
    let figure_name;
    if let Some(path) = &a.config {
        let file = ExperimentFile::load(path)?;
        let (spec, mut m) = file.split();
        if m.parallelism.is_none() {
            m.parallelism = threads;
        }
        let r = experiment::run_experiment(&spec, &m)?;
        w.experiment("", &r, &m)?;
        for (name, dist) in &r.metrics {
            w.hist(name, name, dist)?;
        }
        figure_name = "config".to_string();
    } else {
        let figure = a.figure.expect("clap requires figure or config");
        figure_name = Figure::to_possible_value(&figure)
            .map(|v| v.get_name().to_string())
            .unwrap_or_default();
        let law = law_of(a.law, -1.0);
        let m = mc(a.replications, a.seed);
        match figure {
            Figure::VolJump | Figure::MeanJump | Figure::ArDependent => {
                let mut cfg = match figure {
                    Figure::MeanJump => SimConfig::mean_jump(a.n),
                    _ => SimConfig::volatility_jump(a.n),
                };
                cfg.location_law = law;
                if figure == Figure::ArDependent {
                    cfg.ar_coeff = 0.5;
                }
                let pipeline = Pipeline::ParametricDetect {
                    model: ModelChoice::NormalMeanvar,
                    alpha: 0.01,
                    critical: CriticalSpec::Gumbel,
                };
                for (stem, c) in [("null", cfg.null()), ("alt", cfg)] {
                    let spec = ExperimentSpec {
                        generator: Generator::Amoc(c),
                        pipeline: pipeline.clone(),
                        metrics: vec![],
                    };
                    let r = experiment::run_experiment(&spec, &m)?;
                    w.experiment(&format!("{stem}_"), &r, &m)?;
                    w.hist(stem, &format!("square-root statistic, {stem}"), r.dist("stat_root")?)?;
                    extra.insert(format!("{stem}_reject_rate"), r.dist("reject")?.mean().into());
                }
                let (rows, k_star) = amoc_path_rows(&cfg, a.seed)?;
                w.path("partial-sum path", "k,x", &rows)?;
                extra.insert("path_k_star".into(), k_star.into());
                if figure == Figure::ArDependent {
                    extra.insert("deviation".into(), deviation_vs_argmax(&mut w, cfg, a, mc)?);
                }
            }
            Figure::Deviation => {
                let cfg = SimConfig {
                    location_law: law,
                    ..SimConfig::mean_jump(a.n)
                };
                extra.insert("deviation".into(), deviation_vs_argmax(&mut w, cfg, a, mc)?);
                let (rows, k_star) = amoc_path_rows(&cfg, a.seed)?;
                w.path("partial-sum path", "k,x", &rows)?;
                extra.insert("path_k_star".into(), k_star.into());
            }
            Figure::NonparamVol => {
                let alt = ItoConfig::new(a.n);
                let null = ItoConfig { jump_size: 0.0, ..alt };
                let pipeline = Pipeline::NonparamDetect {
                    c: nonparam::DEFAULT_BLOCK_CONSTANT,
                    alpha: 0.05,
                };
                for (stem, c) in [("null", null), ("alt", alt)] {
                    let spec = ExperimentSpec {
                        generator: Generator::Ito(c),
                        pipeline: pipeline.clone(),
                        metrics: vec![],
                    };
                    let r = experiment::run_experiment(&spec, &m)?;
                    w.experiment(&format!("{stem}_"), &r, &m)?;
                    w.hist(stem, &format!("normalized volatility statistic, {stem}"), r.dist("vn")?)?;
                    extra.insert(format!("{stem}_reject_rate"), r.dist("reject")?.mean().into());
                }
                let p = simgen::gen_ito_path(&ItoConfig { seed: a.seed, ..alt })?;
                let mut x = 0.0;
                let mut rows = vec![vec![0.0, 0.0, p.sigma_path[0]]];
                for (k, dx) in p.increments.iter().enumerate() {
                    x += dx;
                    rows.push(vec![(k + 1) as f64, x, p.sigma_path[k + 1]]);
                }
                w.path("log-price path", "k,x,sigma", &rows)?;
                extra.insert("path_k_star".into(), p.k_star.into());
            }
        }
    }
    let mut manifest = json!({
        "schema_version": SCHEMA_VERSION,
        "figure": figure_name,
        "replications": a.replications,
        "seed": a.seed,
        "files": w.files.iter().map(|p| p.file_name().map(|f| f.to_string_lossy().into_owned())).collect::<Vec<_>>(),
    });
    manifest
        .as_object_mut()
        .expect("manifest is an object")
        .extend(extra);
    let text = serde_json::to_string_pretty(&manifest)? + "\n";
    write_file(&a.out.join("manifest.json"), &text)?;
    Ok(text)
}
