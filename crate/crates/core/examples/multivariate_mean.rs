//! Mean change in a bivariate normal series with known covariance.
//!
//! cargo run --release --example multivariate_mean

use expfam_cpd::cpd::{detect, CriticalValueSource, PrefixStats};
use expfam_cpd::expfam::ExpFamilyModel;
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn main() -> expfam_cpd::error::Result<()> {
    let cov = DMatrix::from_row_slice(2, 2, &[1.0, 0.6, 0.6, 2.0]);
    let chol = cov.clone().cholesky().expect("positive definite").l();
    let model = ExpFamilyModel::mvnormal_mean(cov)?;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (n, k_star) = (2000, 1300);
    let mut data = Vec::with_capacity(2 * n);
    for i in 0..n {
        let z = DVector::from_fn(2, |_, _| StandardNormal.sample(&mut rng));
        let shift = if i < k_star { 0.0 } else { 0.25 };
        let x = &chol * z;
        data.extend([x[0] + shift, x[1] - shift]);
    }
    let report = detect(&data, &model, 0.05, &CriticalValueSource::Gumbel)?;
    println!("k_hat {} (true {k_star}), reject {}", report.k_hat, report.reject);

    let ps = PrefixStats::new(&model, &data)?;
    let (before, after) = ps.segment_means(report.k_hat)?;
    println!("segment means: {before:.3?} then {after:.3?}");
    Ok(())
}
