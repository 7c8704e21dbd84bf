//! The data generators: location laws, moving-average dependence and nested
//! resolutions.
//!
//! cargo run --release --example simulate_series

use expfam_cpd::simgen::{gen_amoc_normal, gen_amoc_normal_nested, LocationLaw, SimConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> expfam_cpd::error::Result<()> {
    let base = SimConfig::mean_jump(10_000);
    for law in [
        LocationLaw::StoppingTime { kappa: -1.0 },
        LocationLaw::Uniform,
        LocationLaw::TruncNormal,
    ] {
        let sim = gen_amoc_normal(&SimConfig { location_law: law, seed: 9, ..base })?;
        println!("{law:?}: change at {} (lambda {:.3}), X_n = {:.3}", sim.k_star, sim.lambda_star, sim.partial_sums[10_000]);
    }

    let dependent = gen_amoc_normal(&SimConfig { ar_coeff: 0.5, seed: 9, ..SimConfig::volatility_jump(10_000) })?;
    println!("dependent series: change at {}", dependent.k_star);

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for sim in gen_amoc_normal_nested(&SimConfig { n: 16_000, ..base }, &[16, 4, 1], &mut rng)? {
        println!("n = {:>5}: lambda* = {:.4}", sim.data.len(), sim.lambda_star);
    }
    Ok(())
}
