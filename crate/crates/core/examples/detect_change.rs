//! Simulate a series whose volatility jumps and test it for a change point.
//!
//! cargo run --release --example detect_change

use expfam_cpd::cpd::{detect, CriticalValueSource};
use expfam_cpd::expfam::ExpFamilyModel;
use expfam_cpd::simgen::{gen_amoc_normal, SimConfig};

fn main() -> expfam_cpd::error::Result<()> {
    let cfg = SimConfig { seed: 42, ..SimConfig::volatility_jump(10_000) };
    let sim = gen_amoc_normal(&cfg)?;
    let model = ExpFamilyModel::normal_meanvar();

    let report = detect(&sim.data, &model, 0.01, &CriticalValueSource::Gumbel)?;
    println!("true change after {} observations", sim.k_star);
    println!("estimated change after {} observations", report.k_hat);
    println!("sqrt statistic {:.4} vs critical value {:.4}", report.stat_root, report.critical_value);
    println!("{}", serde_json::to_string_pretty(&report)?);

    // Same series without the change.
    let null = gen_amoc_normal(&cfg.null())?;
    let r0 = detect(&null.data, &model, 0.01, &CriticalValueSource::Gumbel)?;
    println!("no-change series: reject = {}", r0.reject);
    Ok(())
}
