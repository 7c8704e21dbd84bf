//! Monte Carlo properties of the simulation pipelines.

use expfam_cpd::experiment::{run_experiment, ExperimentSpec, Generator, ModelChoice, Pipeline};
use expfam_cpd::mc::MonteCarloConfig;
use expfam_cpd::simgen::{ItoConfig, SimConfig};

fn remainder_q95(n: usize) -> f64 {
    let grid = vec![0.1, 0.3, 0.5, 0.7, 0.9];
    let spec = ExperimentSpec {
        generator: Generator::Amoc(SimConfig::volatility_jump(n)),
        pipeline: Pipeline::ZnGrid {
            model: ModelChoice::NormalMeanvar,
            t_grid: grid.clone(),
            lambda_grid: grid,
        },
        metrics: vec!["remainder_sup".into()],
    };
    let r = run_experiment(&spec, &MonteCarloConfig::new(400, 31)).unwrap();
    r.dist("remainder_sup").unwrap().quantile(0.95).unwrap()
}

#[test]
fn remainder_shrinks_with_n() {
    let q: Vec<f64> = [1000, 4000, 16_000].into_iter().map(remainder_q95).collect();
    eprintln!("remainder 95th percentiles {q:?}");
    assert!(q[1] < q[0] && q[2] < q[1], "{q:?}");
}

#[test]
fn nonparam_null_rejection_is_bounded() {
    let spec = ExperimentSpec {
        generator: Generator::Ito(ItoConfig { jump_size: 0.0, ..ItoConfig::new(10_000) }),
        pipeline: Pipeline::NonparamDetect { c: 1.5, alpha: 0.05 },
        metrics: vec!["reject".into()],
    };
    let rate = run_experiment(&spec, &MonteCarloConfig::new(500, 32)).unwrap().dist("reject").unwrap().mean();
    eprintln!("null rejection rate {rate}");
    assert!(rate <= 0.15, "{rate}");
}
