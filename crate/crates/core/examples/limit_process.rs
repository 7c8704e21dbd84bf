//! The centred statistic under the alternative and its limit covariance.
//!
//! cargo run --release --example limit_process

use expfam_cpd::asymptotics::{limit_covariance, AlternativeParams, AlternativeSample};
use expfam_cpd::expfam::ExpFamilyModel;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn main() -> expfam_cpd::error::Result<()> {
    let n = 5000;
    let model = ExpFamilyModel::normal_meanvar();
    let root = (n as f64).sqrt();
    let ap = AlternativeParams::from_moments(&model, (&[-2.0 / root], Some(1.0)), (&[-12.0 / root], Some(1.0)))?;
    let s = ap.sigma_a_sq.expect("a change");
    println!("delta^2 = {:.5}, sigma_A^2 = {:.4}", ap.delta_sq, s);

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let eps: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    let x1: Vec<f64> = eps.iter().map(|e| -2.0 / root + e).collect();
    let x2: Vec<f64> = eps.iter().map(|e| -12.0 / root + e).collect();
    let sample = AlternativeSample::new(&model, &ap, &x1, &x2, n / 2)?;
    for k in [n / 4, n / 2, 3 * n / 4] {
        println!(
            "k = {k}: S_n = {:.3}, mu_n = {:.3}, Z_n = {:.3}",
            sample.sn(k)?,
            sample.mu(k)?,
            sample.zn(k)?
        );
    }
    println!("limit covariance at (0.3, 0.5), (0.6, 0.5): {:.4}", limit_covariance(0.3, 0.5, 0.6, 0.5, s));
    Ok(())
}
