//! The model layer: sufficient statistics, the dual function H and the
//! moment/natural parameter maps.
//!
//! cargo run --example exponential_family

use expfam_cpd::expfam::ExpFamilyModel;

fn main() -> expfam_cpd::error::Result<()> {
    let model = ExpFamilyModel::normal_meanvar();
    println!("{}: d = {}, m = {}", model.name(), model.d(), model.m());
    println!("T(1.5) = {:?}", model.suff_stat(&[1.5])?);

    let theta = model.nat_param_from_moments(&[0.5], Some(2.0))?;
    let tau = model.a_grad(&theta.0)?;
    println!("theta = {:?}, tau = A'(theta) = {:?}", theta.0, tau.0);
    println!("H(tau) = {:.6}", model.h_value(&tau.0)?);
    println!("H'(tau) = {:?} (recovers theta)", model.h_grad(&tau.0)?.0);
    println!("H''(tau) = {}", model.h_hess(&tau.0)?);

    let known = ExpFamilyModel::normal_mean(4.0)?;
    println!("{}: H(2) = {}", known.name(), known.h_value(&[2.0])?);
    Ok(())
}
