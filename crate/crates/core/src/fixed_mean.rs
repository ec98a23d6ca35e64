//! Fixed-mean variant, where the alternative law keeps the nominal mean and
//! `V^GX_a(X) = γ/2·(aᵀ(X − μ))² − aᵀμ`, and the minimum-variance measure
//! `½(aᵀ(X − μ))²`.
//!
//! Both tilt only the covariance, so `μ̃ = μ` and everything is closed form.

use nalgebra::DVector;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::market_model::MarketModel;
use crate::nominal::{min_variance_portfolio, two_fund_portfolio, Portfolio};
use crate::robust::{rank_one_tilt, AlternativeModel, THETA_EPS};

/// `θγ` must stay below `C` by this relative margin.
pub const ADMISSIBLE_MARGIN: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GXSolution {
    pub theta: f64,
    pub gamma_gx: f64,
    pub portfolio: Portfolio,
    pub entropy: f64,
    pub risk_value: f64,
}

/// `Γ^GX/γ − 1`, written so that it carries full relative precision near
/// `θ = 0`.
fn gx_excess(model: &MarketModel, theta: f64) -> Result<f64> {
    let k = model.constants();
    let gamma = model.gamma();
    let tau = theta * gamma;
    if tau >= k.c * (1.0 - ADMISSIBLE_MARGIN) {
        return Err(Error::ThetaOutOfDomain { theta, limit: k.c / gamma });
    }
    let room = k.c - tau;
    let q = 4.0 * tau * room * k.d / (gamma * gamma);
    let disc = k.c * k.c + q;
    if disc < 0.0 {
        return Err(Error::NegativeDiscriminant(disc * gamma * gamma));
    }
    // (√(C² + q) − C + 2τ) / (2(C − τ))
    Ok((q / (disc.sqrt() + k.c) + 2.0 * tau) / (2.0 * room))
}

/// `Γ^GX = (γC + √(γ²C² + 4θγ(C − θγ)D)) / (2(C − θγ))`.
pub fn gx_gamma(model: &MarketModel, theta: f64) -> Result<f64> {
    if theta.abs() < THETA_EPS {
        return Ok(model.gamma());
    }
    Ok(model.gamma() * (1.0 + gx_excess(model, theta)?))
}

pub fn gx_portfolio(model: &MarketModel, theta: f64) -> Result<Portfolio> {
    Ok(two_fund_portfolio(model, 1.0 / gx_gamma(model, theta)?))
}

/// `½(x − 1 − ln x)` with `x = 1 + e`.
fn half_kl_scale(e: f64) -> f64 {
    0.5 * (e - e.ln_1p())
}

/// `R(θ) = ½(x − 1 − ln x)` with `x = Γ^GX/γ`.
pub fn gx_entropy(model: &MarketModel, theta: f64) -> Result<f64> {
    if theta.abs() < THETA_EPS {
        return Ok(0.0);
    }
    Ok(half_kl_scale(gx_excess(model, theta)?))
}

/// `(Γ − D/Γ)/(2C) − A/C`.
pub fn gx_risk_value(model: &MarketModel, theta: f64) -> Result<f64> {
    let k = model.constants();
    let g = gx_gamma(model, theta)?;
    Ok((g - k.d / g) / (2.0 * k.c) - k.a / k.c)
}

pub fn gx_solve(model: &MarketModel, theta: f64) -> Result<GXSolution> {
    let gamma_gx = gx_gamma(model, theta)?;
    Ok(GXSolution {
        theta,
        gamma_gx,
        portfolio: two_fund_portfolio(model, 1.0 / gamma_gx),
        entropy: gx_entropy(model, theta)?,
        risk_value: gx_risk_value(model, theta)?,
    })
}

/// Covariance-only tilt `Σ̃ = Σ + θγ(Σa)(Σa)ᵀ/(1 − θγS)`, `μ̃ = μ`.
pub fn gx_alternative_model(model: &MarketModel, theta: f64, a: &Portfolio) -> Result<AlternativeModel> {
    tilt_covariance(model, theta, a, model.gamma())
}

/// Same tilt with γ replaced by 1.
pub fn min_variance_alternative_model(model: &MarketModel, theta: f64, a: &Portfolio) -> Result<AlternativeModel> {
    tilt_covariance(model, theta, a, 1.0)
}

fn tilt_covariance(model: &MarketModel, theta: f64, a: &Portfolio, k: f64) -> Result<AlternativeModel> {
    let sigma_tilde = if theta == 0.0 { model.sigma().clone() } else { rank_one_tilt(model, theta, a, k)?.0 };
    Ok(AlternativeModel { theta, mu_tilde: model.mu().clone(), sigma_tilde, base: a.clone() })
}

/// `θkS/(1 − θkS)`, the excess variance ratio of the tilted law.
fn variance_excess(theta: f64, k: f64, s: f64) -> Result<f64> {
    let u = 1.0 - theta * k * s;
    if !(u > 0.0) {
        return Err(Error::ThetaOutOfDomain { theta, limit: 1.0 / (k * s) });
    }
    Ok(theta * k * s / u)
}

/// Fixed-mean entropy at a given portfolio: `½(w − 1 − ln w)`, `w = 1/(1 − θγS)`.
pub fn gx_relative_entropy_at(model: &MarketModel, theta: f64, a: &Portfolio) -> Result<f64> {
    Ok(half_kl_scale(variance_excess(theta, model.gamma(), a.variance)?))
}

/// `γ/2·S/(1 − θγS) − aᵀμ`.
pub fn gx_alternative_risk_value(model: &MarketModel, theta: f64, a: &Portfolio) -> Result<f64> {
    let w = 1.0 + variance_excess(theta, model.gamma(), a.variance)?;
    Ok(0.5 * model.gamma() * a.variance * w - a.expected_return(model))
}

/// `½aᵀΣa`, the nominal value of the minimum-variance measure.
pub fn min_variance_nominal_value(a: &Portfolio) -> f64 {
    0.5 * a.variance
}

pub fn min_variance_relative_entropy_at(theta: f64, a: &Portfolio) -> Result<f64> {
    Ok(half_kl_scale(variance_excess(theta, 1.0, a.variance)?))
}

/// `½S/(1 − θS)`.
pub fn min_variance_alternative_value(theta: f64, a: &Portfolio) -> Result<f64> {
    let w = 1.0 + variance_excess(theta, 1.0, a.variance)?;
    Ok(0.5 * a.variance * w)
}

/// Robust minimum-variance portfolio. It is `Σ⁻¹1/C` for every admissible θ
/// (`θ < C`, with the risk aversion taken as 1).
pub fn min_variance_portfolio_robust(model: &MarketModel, theta: f64) -> Result<Portfolio> {
    let c = model.constants().c;
    if theta >= c * (1.0 - ADMISSIBLE_MARGIN) {
        return Err(Error::ThetaOutOfDomain { theta, limit: c });
    }
    Ok(min_variance_portfolio(model))
}

/// Entropy of the minimum-variance tilt at `a₀`: `S = 1/C`.
pub fn min_variance_entropy(model: &MarketModel, theta: f64) -> Result<f64> {
    let a0 = min_variance_portfolio_robust(model, theta)?;
    min_variance_relative_entropy_at(theta, &a0)
}

/// True iff `μ ∝ 1`, tested as `‖CΣ⁻¹μ − AΣ⁻¹1‖∞ < 1e-10·‖Σ⁻¹μ‖∞`.
/// In that case robust and nominal portfolios agree for every θ.
pub fn portfolios_coincide(model: &MarketModel) -> bool {
    let k = model.constants();
    let scale = model.inv_mu().amax();
    if scale == 0.0 {
        return true;
    }
    let diff: DVector<f64> = model.inv_mu() * k.c - model.inv_one() * k.a;
    diff.amax() < 1e-10 * scale
}
