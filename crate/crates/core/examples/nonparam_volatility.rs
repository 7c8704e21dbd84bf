//! Model-free test for a volatility jump in a diffusion with seasonal
//! stochastic volatility.
//!
//! cargo run --release --example nonparam_volatility

use expfam_cpd::nonparam::{nonparam_detect, DEFAULT_BLOCK_CONSTANT};
use expfam_cpd::simgen::{gen_ito_path, ItoConfig};

fn main() -> expfam_cpd::error::Result<()> {
    for jump in [0.0, 0.3] {
        let cfg = ItoConfig { jump_size: jump, seed: 5, ..ItoConfig::new(10_000) };
        let path = gen_ito_path(&cfg)?;
        let r = nonparam_detect(&path.increments, DEFAULT_BLOCK_CONSTANT, 0.05)?;
        println!(
            "jump {jump}: V* = {:.4}, normalized {:.3} vs {:.3}, reject = {} (k_n = {}, change at {})",
            r.vstar, r.vn, r.critical_value, r.reject, r.k_n, path.k_star
        );
    }
    Ok(())
}
