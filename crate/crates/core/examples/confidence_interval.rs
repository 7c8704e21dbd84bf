//! Locate a change and attach a confidence interval from the argmax law of
//! a two-sided drifted Brownian motion.
//!
//! cargo run --release --example confidence_interval

use expfam_cpd::asymptotics::sample_argmax_what;
use expfam_cpd::cpd::{attach_confidence_interval, detect, CriticalValueSource};
use expfam_cpd::expfam::ExpFamilyModel;
use expfam_cpd::mc::MonteCarloConfig;
use expfam_cpd::simgen::{gen_amoc_normal, LocationLaw, SimConfig};

fn main() -> expfam_cpd::error::Result<()> {
    let cfg = SimConfig {
        location_law: LocationLaw::Uniform,
        seed: 3,
        ..SimConfig::mean_jump(5000)
    };
    let sim = gen_amoc_normal(&cfg)?;
    let model = ExpFamilyModel::normal_meanvar();
    let argmax = sample_argmax_what(&MonteCarloConfig::new(5000, 11))?;

    for level in [0.05, 0.5] {
        let mut report = detect(&sim.data, &model, 0.05, &CriticalValueSource::Gumbel)?;
        attach_confidence_interval(&mut report, &argmax, level)?;
        let ci = report.ci.expect("attached");
        println!(
            "level {level}: k_hat {} in [{}, {}] (true {})",
            report.k_hat, ci.low, ci.high, sim.k_star
        );
    }
    Ok(())
}
