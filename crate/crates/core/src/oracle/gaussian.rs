use nalgebra::{Cholesky, DMatrix, DVector};

use super::tilt_scale;
use crate::calibration::{entropy_at, tilted_model};
use crate::error::{Error, Result};
use crate::market_model::MarketModel;
use crate::nominal::Portfolio;
use crate::robust::{AlternativeModel, Variant};

fn factor(sigma: &DMatrix<f64>) -> Result<Cholesky<f64, nalgebra::Dyn>> {
    Cholesky::new(sigma.clone()).ok_or(Error::NotPositiveDefinite { pivot: 0 })
}

fn log_det(chol: &Cholesky<f64, nalgebra::Dyn>) -> f64 {
    2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>()
}

/// `KL(N(μ₁, Σ₁) ‖ N(μ₀, Σ₀))`.
pub fn gaussian_kl(
    mu1: &DVector<f64>,
    sigma1: &DMatrix<f64>,
    mu0: &DVector<f64>,
    sigma0: &DMatrix<f64>,
) -> Result<f64> {
    let n = mu0.len();
    for got in [mu1.len(), sigma0.nrows(), sigma0.ncols(), sigma1.nrows(), sigma1.ncols()] {
        if got != n {
            return Err(Error::DimensionMismatch { expected: n, got });
        }
    }
    let c0 = factor(sigma0)?;
    let c1 = factor(sigma1)?;
    let trace = c0.solve(sigma1).trace();
    let d = mu0 - mu1;
    let maha = d.dot(&c0.solve(&d));
    Ok(0.5 * (trace + maha - n as f64 + log_det(&c0) - log_det(&c1)))
}

/// `Var(YᵀMY + bᵀY)` for `Y ~ N(m, V)` and symmetric `M`:
/// `2tr(MVMV) + 4mᵀMVMm + bᵀVb + 4bᵀVMm`.
pub fn quadratic_form_variance(m_mat: &DMatrix<f64>, b: &DVector<f64>, m: &DVector<f64>, v: &DMatrix<f64>) -> f64 {
    let mv = m_mat * v;
    let mm = m_mat * m;
    2.0 * (&mv * &mv).trace() + 4.0 * mm.dot(&(v * &mm)) + b.dot(&(v * b)) + 4.0 * b.dot(&(v * &mm))
}

/// Variance of the risk measure `V_a` under an alternative Gaussian law.
pub fn risk_variance_under(model: &MarketModel, variant: Variant, alt: &AlternativeModel) -> f64 {
    let a = &alt.base.weights;
    // V = k/2·(aᵀY)² − [aᵀY] + const with Y = X − μ.
    let m_mat = a * a.transpose() * (0.5 * tilt_scale(model, variant));
    let b = match variant {
        Variant::General => -a.clone(),
        _ => DVector::zeros(a.len()),
    };
    let shift = &alt.mu_tilde - model.mu();
    quadratic_form_variance(&m_mat, &b, &shift, &alt.sigma_tilde)
}

/// Central difference of `R(θ, a)` in θ against `θ·Var(V_a)` under the
/// tilted law. Returns `(fd, analytic)`.
pub fn entropy_derivative_check(
    model: &MarketModel,
    variant: Variant,
    theta: f64,
    a: &Portfolio,
    h: f64,
) -> Result<(f64, f64)> {
    if !(h > 0.0) {
        return Err(Error::InvalidParameter("step must be positive".into()));
    }
    let up = entropy_at(model, variant, theta + h, a).map_err(|_| Error::DomainViolation(theta + h))?;
    let dn = entropy_at(model, variant, theta - h, a).map_err(|_| Error::DomainViolation(theta - h))?;
    let alt = tilted_model(model, variant, theta, a).map_err(|_| Error::DomainViolation(theta))?;
    Ok(((up - dn) / (2.0 * h), theta * risk_variance_under(model, variant, &alt)))
}
