//! Exponential-family models in natural parametrization.
//!
//! A density is written `exp(θᵀT(x) + S(x) − A(θ))`. The change-point
//! statistic only needs the sufficient statistic `T`, the log-normalizer
//! derivatives `A'`, `A''`, and the convex dual
//! `H(y) = (A')⁻¹(y)ᵀ y − A((A')⁻¹(y))` together with its Hessian, which
//! satisfies `H''(y) = A''(H'(y))⁻¹`.
//!
//! Three models are supported:
//!
//! | model                     | `m` | `d` | `T(x)`        | `H(y)`                      |
//! |---------------------------|-----|-----|---------------|-----------------------------|
//! | normal, known variance σ² | 1   | 1   | `x/σ²`        | `σ² y² / 2`                 |
//! | normal, mean and variance | 1   | 2   | `(x, x²)`     | `−½ log(2π (y₂ − y₁²))`     |
//! | m-variate, known Σ        | m   | m   | `Σ⁻¹ x`       | `½ yᵀ Σ y`                  |
//!
//! The simultaneous mean/covariance family for `m > 1` (with `d = m + m²`)
//! is not implemented.

use std::f64::consts::PI;
use std::fmt;
use std::ops::Deref;

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, CpdError, Result};

/// Relative floor on `y₂ − y₁²` below which a mean/variance moment point is
/// treated as degenerate.
pub const DEGENERATE_VARIANCE_EPS: f64 = 1e-12;

/// Which of the supported families a model belongs to.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelKind {
    NormalMeanKnownVar { sigma2: f64 },
    NormalMeanVar,
    MultiNormalMeanKnownCov { cov: DMatrix<f64> },
}

/// A supported exponential-family model.
#[derive(Debug, Clone)]
pub struct ExpFamilyModel {
    kind: ModelKind,
    /// Σ⁻¹ for the multivariate model, obtained from the Cholesky factor.
    cov_inv: Option<DMatrix<f64>>,
}

/// Natural parameter θ ∈ Θ ⊂ ℝᵈ.
#[derive(Debug, Clone, PartialEq)]
pub struct NatParam(pub Vec<f64>);

/// A point in the range of `A'`, i.e. a mean of the sufficient statistic.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentPoint(pub Vec<f64>);

impl Deref for NatParam {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl Deref for MomentPoint {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl fmt::Display for ExpFamilyModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl ExpFamilyModel {
    /// Univariate normal with known variance `sigma2`; the mean may change.
    pub fn normal_mean(sigma2: f64) -> Result<Self> {
        if !(sigma2.is_finite() && sigma2 > 0.0) {
            return Err(invalid(format!("variance must be positive, got {sigma2}")));
        }
        Ok(Self {
            kind: ModelKind::NormalMeanKnownVar { sigma2 },
            cov_inv: None,
        })
    }

    /// Univariate normal where mean and variance may both change.
    pub fn normal_meanvar() -> Self {
        Self {
            kind: ModelKind::NormalMeanVar,
            cov_inv: None,
        }
    }

    /// `m`-variate normal with known covariance `cov`; the mean may change.
    pub fn mvnormal_mean(cov: DMatrix<f64>) -> Result<Self> {
        let m = cov.nrows();
        if m == 0 || cov.ncols() != m {
            return Err(invalid("covariance must be a non-empty square matrix"));
        }
        if cov.iter().any(|v| !v.is_finite()) {
            return Err(invalid("covariance has non-finite entries"));
        }
        let scale = cov.amax().max(1.0);
        for i in 0..m {
            for j in 0..i {
                if (cov[(i, j)] - cov[(j, i)]).abs() > 1e-12 * scale {
                    return Err(invalid("covariance is not symmetric"));
                }
            }
        }
        let chol = cov
            .clone()
            .cholesky()
            .ok_or_else(|| invalid("covariance is not positive definite"))?;
        let cov_inv = chol.inverse();
        Ok(Self {
            kind: ModelKind::MultiNormalMeanKnownCov { cov },
            cov_inv: Some(cov_inv),
        })
    }

    pub fn kind(&self) -> &ModelKind {
        &self.kind
    }

    /// Name used on the command line.
    pub fn name(&self) -> &'static str {
        match self.kind {
            ModelKind::NormalMeanKnownVar { .. } => "normal-mean",
            ModelKind::NormalMeanVar => "normal-meanvar",
            ModelKind::MultiNormalMeanKnownCov { .. } => "mvnormal-mean",
        }
    }

    /// Natural-parameter dimension `d`.
    pub fn d(&self) -> usize {
        match &self.kind {
            ModelKind::NormalMeanKnownVar { .. } => 1,
            ModelKind::NormalMeanVar => 2,
            ModelKind::MultiNormalMeanKnownCov { cov } => cov.nrows(),
        }
    }

    /// Observation dimension `m`.
    pub fn m(&self) -> usize {
        match &self.kind {
            ModelKind::MultiNormalMeanKnownCov { cov } => cov.nrows(),
            _ => 1,
        }
    }

    fn check_len(&self, what: &str, v: &[f64], want: usize) -> Result<()> {
        if v.len() != want {
            return Err(invalid(format!(
                "{what} has length {} but {} expects {want}",
                v.len(),
                self.name()
            )));
        }
        Ok(())
    }

    /// Sufficient statistic `T(x)`.
    pub fn suff_stat(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_len("observation", x, self.m())?;
        let mut out = vec![0.0; self.d()];
        self.suff_stat_into(x, &mut out);
        Ok(out)
    }

    /// Writes `T(x)` into `out`. Lengths are the caller's responsibility.
    pub(crate) fn suff_stat_into(&self, x: &[f64], out: &mut [f64]) {
        match &self.kind {
            ModelKind::NormalMeanKnownVar { sigma2 } => out[0] = x[0] / sigma2,
            ModelKind::NormalMeanVar => {
                out[0] = x[0];
                out[1] = x[0] * x[0];
            }
            ModelKind::MultiNormalMeanKnownCov { .. } => {
                let inv = self.cov_inv.as_ref().expect("multivariate model carries Σ⁻¹");
                let m = x.len();
                for (i, o) in out.iter_mut().enumerate().take(m) {
                    *o = (0..m).map(|j| inv[(i, j)] * x[j]).sum();
                }
            }
        }
    }

    /// `y₂ − y₁²` for the mean/variance model, or an error if it is not
    /// safely positive.
    fn meanvar_spread(y: &[f64]) -> Result<f64> {
        let v = y[1] - y[0] * y[0];
        if !v.is_finite() || v <= DEGENERATE_VARIANCE_EPS * y[1].max(1.0) {
            return Err(CpdError::DegenerateMoment(format!(
                "variance proxy y2 - y1^2 = {v:e} is not positive"
            )));
        }
        Ok(v)
    }

    /// Dual function `H(y)`.
    pub fn h_value(&self, y: &[f64]) -> Result<f64> {
        self.check_len("moment point", y, self.d())?;
        self.h_unchecked(y)
    }

    /// `H(y)` without the length check; used on the hot path of the
    /// likelihood-ratio scan.
    pub(crate) fn h_unchecked(&self, y: &[f64]) -> Result<f64> {
        match &self.kind {
            ModelKind::NormalMeanKnownVar { sigma2 } => Ok(0.5 * sigma2 * y[0] * y[0]),
            ModelKind::NormalMeanVar => {
                let v = Self::meanvar_spread(y)?;
                Ok(-0.5 * (2.0 * PI * v).ln())
            }
            ModelKind::MultiNormalMeanKnownCov { cov } => Ok(0.5 * quad_form(cov, y, y)),
        }
    }

    /// Gradient `H'(y) = (A')⁻¹(y)`, the natural parameter matching `y`.
    pub fn h_grad(&self, y: &[f64]) -> Result<NatParam> {
        self.check_len("moment point", y, self.d())?;
        let theta = match &self.kind {
            ModelKind::NormalMeanKnownVar { sigma2 } => vec![sigma2 * y[0]],
            ModelKind::NormalMeanVar => {
                let v = Self::meanvar_spread(y)?;
                vec![y[0] / v, -0.5 / v]
            }
            ModelKind::MultiNormalMeanKnownCov { cov } => {
                (cov * DVector::from_column_slice(y)).iter().copied().collect()
            }
        };
        Ok(NatParam(theta))
    }

    /// Hessian `H''(y)`; symmetric positive definite on the admissible region.
    pub fn h_hess(&self, y: &[f64]) -> Result<DMatrix<f64>> {
        self.check_len("moment point", y, self.d())?;
        match &self.kind {
            ModelKind::NormalMeanKnownVar { sigma2 } => Ok(DMatrix::from_element(1, 1, *sigma2)),
            ModelKind::NormalMeanVar => {
                let v = Self::meanvar_spread(y)?;
                let v2 = v * v;
                let (x1, x2) = (y[0], y[1]);
                Ok(DMatrix::from_row_slice(
                    2,
                    2,
                    &[(x1 * x1 + x2) / v2, -x1 / v2, -x1 / v2, 0.5 / v2],
                ))
            }
            ModelKind::MultiNormalMeanKnownCov { cov } => Ok(cov.clone()),
        }
    }

    fn check_theta(&self, theta: &[f64]) -> Result<()> {
        self.check_len("natural parameter", theta, self.d())?;
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(invalid("natural parameter has non-finite entries"));
        }
        if matches!(self.kind, ModelKind::NormalMeanVar) && theta[1] >= 0.0 {
            return Err(invalid(format!(
                "second natural parameter must be negative, got {}",
                theta[1]
            )));
        }
        Ok(())
    }

    /// Log-normalizer `A(θ)`.
    pub fn log_normalizer(&self, theta: &[f64]) -> Result<f64> {
        self.check_theta(theta)?;
        Ok(match &self.kind {
            ModelKind::NormalMeanKnownVar { sigma2 } => 0.5 * theta[0] * theta[0] / sigma2,
            ModelKind::NormalMeanVar => {
                let (t1, t2) = (theta[0], theta[1]);
                -0.25 * t1 * t1 / t2 + 0.5 * (-PI / t2).ln()
            }
            ModelKind::MultiNormalMeanKnownCov { .. } => {
                let inv = self.cov_inv.as_ref().expect("multivariate model carries Σ⁻¹");
                0.5 * quad_form(inv, theta, theta)
            }
        })
    }

    /// `A'(θ)`, the expectation of `T(X)` under θ.
    pub fn a_grad(&self, theta: &[f64]) -> Result<MomentPoint> {
        self.check_theta(theta)?;
        let tau = match &self.kind {
            ModelKind::NormalMeanKnownVar { sigma2 } => vec![theta[0] / sigma2],
            ModelKind::NormalMeanVar => {
                let (t1, t2) = (theta[0], theta[1]);
                vec![-t1 / (2.0 * t2), t1 * t1 / (4.0 * t2 * t2) - 1.0 / (2.0 * t2)]
            }
            ModelKind::MultiNormalMeanKnownCov { .. } => {
                let inv = self.cov_inv.as_ref().expect("multivariate model carries Σ⁻¹");
                (inv * DVector::from_column_slice(theta)).iter().copied().collect()
            }
        };
        Ok(MomentPoint(tau))
    }

    /// `A''(θ)`, the covariance of `T(X)` under θ.
    pub fn a_hess(&self, theta: &[f64]) -> Result<DMatrix<f64>> {
        self.check_theta(theta)?;
        Ok(match &self.kind {
            ModelKind::NormalMeanKnownVar { sigma2 } => DMatrix::from_element(1, 1, 1.0 / sigma2),
            ModelKind::NormalMeanVar => {
                let (t1, t2) = (theta[0], theta[1]);
                let off = t1 / (2.0 * t2 * t2);
                DMatrix::from_row_slice(
                    2,
                    2,
                    &[
                        -1.0 / (2.0 * t2),
                        off,
                        off,
                        -t1 * t1 / (2.0 * t2 * t2 * t2) + 1.0 / (2.0 * t2 * t2),
                    ],
                )
            }
            ModelKind::MultiNormalMeanKnownCov { .. } => {
                self.cov_inv.clone().expect("multivariate model carries Σ⁻¹")
            }
        })
    }

    /// Natural parameter for a given mean and variance.
    ///
    /// `variance` is required for the mean/variance model. For the
    /// known-variance models it may be omitted; if given it must agree with
    /// the model's variance (scalar case only).
    pub fn nat_param_from_moments(&self, mean: &[f64], variance: Option<f64>) -> Result<NatParam> {
        self.check_len("mean", mean, self.m())?;
        if mean.iter().any(|v| !v.is_finite()) {
            return Err(invalid("mean has non-finite entries"));
        }
        if let Some(v) = variance {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(format!("variance must be positive, got {v}")));
            }
        }
        match &self.kind {
            ModelKind::NormalMeanKnownVar { sigma2 } => {
                if let Some(v) = variance {
                    if (v - sigma2).abs() > 1e-12 * sigma2 {
                        return Err(invalid(format!(
                            "model variance is fixed at {sigma2}, got {v}"
                        )));
                    }
                }
                Ok(NatParam(vec![mean[0]]))
            }
            ModelKind::NormalMeanVar => {
                let v = variance
                    .ok_or_else(|| invalid("the mean/variance model needs a variance"))?;
                Ok(NatParam(vec![mean[0] / v, -0.5 / v]))
            }
            ModelKind::MultiNormalMeanKnownCov { .. } => {
                if variance.is_some() {
                    return Err(invalid("the multivariate model has a fixed covariance"));
                }
                Ok(NatParam(mean.to_vec()))
            }
        }
    }

    /// `E[T(X)]` for a given mean and variance; shorthand for
    /// `a_grad(nat_param_from_moments(..))`.
    pub fn moment_point(&self, mean: &[f64], variance: Option<f64>) -> Result<MomentPoint> {
        let theta = self.nat_param_from_moments(mean, variance)?;
        self.a_grad(&theta)
    }
}

/// `aᵀ M b` for a square matrix `M`.
pub(crate) fn quad_form(m: &DMatrix<f64>, a: &[f64], b: &[f64]) -> f64 {
    let n = a.len();
    let mut s = 0.0;
    for i in 0..n {
        let mut row = 0.0;
        for j in 0..n {
            row += m[(i, j)] * b[j];
        }
        s += a[i] * row;
    }
    s
}
