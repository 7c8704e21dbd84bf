//! Monte Carlo law of the argmax of the two-sided drifted Brownian motion.
//!
//! cargo run --release --example argmax_distribution

use expfam_cpd::asymptotics::{sample_argmax_what_with, ArgmaxConfig};
use expfam_cpd::mc::MonteCarloConfig;

fn main() -> expfam_cpd::error::Result<()> {
    let mc = MonteCarloConfig::new(20_000, 7);
    let dist = sample_argmax_what_with(&ArgmaxConfig::default(), &mc)?;
    println!("mean {:.3}, sd {:.3}", dist.mean(), dist.std_dev());
    for (p, q) in dist.summary_quantiles() {
        println!("q{p:<5} {q:>8.3}");
    }
    let coarse = ArgmaxConfig { step: 0.05, ..ArgmaxConfig::default() };
    let d2 = sample_argmax_what_with(&coarse, &mc)?;
    println!("KS distance to a coarser grid: {:.4}", dist.ks_distance(&d2));
    Ok(())
}
