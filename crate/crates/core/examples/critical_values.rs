//! Critical values from the extreme-value approximation and from simulated
//! Brownian-bridge suprema.
//!
//! cargo run --release --example critical_values

use expfam_cpd::asymptotics::{gumbel_critical_value, gumbel_norming, gumbel_pvalue, sup_bridge_critical_value};
use expfam_cpd::mc::MonteCarloConfig;

fn main() -> expfam_cpd::error::Result<()> {
    let (d, n) = (2, 10_000);
    let norm = gumbel_norming(d, n)?;
    println!("a(n) = {:.4}, b(n) = {:.4}", norm.a_val, norm.b_val);
    let mc = MonteCarloConfig::new(2000, 1);
    for alpha in [0.10, 0.05, 0.01] {
        let g = gumbel_critical_value(alpha, d, n)?;
        let b = sup_bridge_critical_value(alpha, d, n, &mc)?;
        println!("alpha {alpha:<5} gumbel {g:.4}  bridge {b:.4}");
    }
    println!("p-value of a sqrt statistic of 4.5: {:.4}", gumbel_pvalue(4.5, d, n)?);
    Ok(())
}
