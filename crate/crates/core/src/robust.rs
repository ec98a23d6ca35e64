//! General-variant robust solution: `V_a(X) = γ/2·(aᵀ(X − μ))² − aᵀX`.
//!
//! Worst case is `θ > 0`, best case `θ < 0`. For a fixed portfolio the
//! exponentially tilted law is again Gaussian, and the optimal portfolio is a
//! two-fund portfolio with effective risk aversion `Γ(S*; θ, γ)`, where `S*`
//! solves the scalar fixed point `S = (D/Γ(S)² + 1)/C`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market_model::MarketModel;
use crate::nominal::{nominal_portfolio, nominal_risk_value, two_fund_portfolio, Portfolio};
use crate::roots::bisect;

/// Below this `|θ|` every routine returns the nominal quantities.
pub const THETA_EPS: f64 = 1e-10;

/// Required `|S − rhs(S)|` at the fixed point.
pub const FIXED_POINT_TOL: f64 = 1e-12;

const S_MAX_ITER: usize = 200;
const BEST_SCAN_POINTS: usize = 4000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    General,
    FixedMean,
    MinVariance,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::General, Variant::FixedMean, Variant::MinVariance];

    pub fn name(self) -> &'static str {
        match self {
            Variant::General => "general",
            Variant::FixedMean => "fixed-mean",
            Variant::MinVariance => "min-variance",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    Worst,
    Best,
}

impl Direction {
    /// Sign of θ in this direction.
    pub fn sign(self) -> f64 {
        match self {
            Direction::Worst => 1.0,
            Direction::Best => -1.0,
        }
    }
}

/// The Gaussian law `N(μ̃, Σ̃)` obtained by tilting the nominal model with
/// `exp(θV_a)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlternativeModel {
    pub theta: f64,
    #[serde(serialize_with = "crate::serde_linalg::vector")]
    pub mu_tilde: DVector<f64>,
    #[serde(serialize_with = "crate::serde_linalg::matrix")]
    pub sigma_tilde: DMatrix<f64>,
    pub base: Portfolio,
}

/// Effective risk aversion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GammaValue {
    pub gamma_eff: f64,
}

/// `1/(γ·aᵀΣa)`.
pub fn theta_max(model: &MarketModel, a: &Portfolio) -> f64 {
    1.0 / (model.gamma() * a.variance)
}

/// `1 − θγS`, or the domain error.
fn slack(model: &MarketModel, theta: f64, a: &Portfolio) -> Result<f64> {
    let u = 1.0 - theta * model.gamma() * a.variance;
    if u > 0.0 {
        Ok(u)
    } else {
        Err(Error::ThetaOutOfDomain { theta, limit: theta_max(model, a) })
    }
}

/// Rank-one tilt `Σ̃ = Σ + (k/(1 − kS))·(Σa)(Σa)ᵀ` with `k = θ·tilt_gamma`,
/// plus `Σ̃a = Σa/(1 − kS)`. `tilt_gamma` is the coefficient of the
/// quadratic term in `V` (γ, or 1 for the minimum-variance measure).
pub(crate) fn rank_one_tilt(
    model: &MarketModel,
    theta: f64,
    a: &Portfolio,
    tilt_gamma: f64,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let k = theta * tilt_gamma;
    let u = 1.0 - k * a.variance;
    if !(u > 0.0) {
        return Err(Error::ThetaOutOfDomain { theta, limit: 1.0 / (tilt_gamma * a.variance) });
    }
    let sa = model.sigma() * &a.weights;
    let mut sigma_tilde = model.sigma().clone();
    sigma_tilde.ger(k / u, &sa, &sa, 1.0);
    // Restore exact symmetry lost to rounding in the update.
    let n = model.n();
    for i in 0..n {
        for j in (i + 1)..n {
            let m = 0.5 * (sigma_tilde[(i, j)] + sigma_tilde[(j, i)]);
            sigma_tilde[(i, j)] = m;
            sigma_tilde[(j, i)] = m;
        }
    }
    Ok((sigma_tilde, sa / u))
}

/// Alternative Gaussian for the general variant: `μ̃ = μ − θΣ̃a`.
pub fn alternative_model(model: &MarketModel, theta: f64, a: &Portfolio) -> Result<AlternativeModel> {
    if theta == 0.0 {
        return Ok(AlternativeModel {
            theta,
            mu_tilde: model.mu().clone(),
            sigma_tilde: model.sigma().clone(),
            base: a.clone(),
        });
    }
    let (sigma_tilde, sa_tilde) = rank_one_tilt(model, theta, a, model.gamma())?;
    let mu_tilde = model.mu() - sa_tilde * theta;
    Ok(AlternativeModel { theta, mu_tilde, sigma_tilde, base: a.clone() })
}

/// `ln E[exp(θV_a)] = −½ln(1 − θγS) − θaᵀμ + ½θ²S/(1 − θγS)`.
pub fn log_mgf(model: &MarketModel, theta: f64, a: &Portfolio) -> Result<f64> {
    let u = slack(model, theta, a)?;
    let s = a.variance;
    Ok(-0.5 * (-theta * model.gamma() * s).ln_1p() - theta * a.expected_return(model) + 0.5 * theta * theta * s / u)
}

/// `−(1/2θ)ln(1 − θγS) − aᵀμ + ½θS/(1 − θγS) + η/θ`.
pub fn lagrangian(model: &MarketModel, theta: f64, a: &Portfolio, eta: f64) -> Result<f64> {
    if theta == 0.0 {
        return Err(Error::ThetaZero);
    }
    let u = slack(model, theta, a)?;
    let s = a.variance;
    Ok(-(-theta * model.gamma() * s).ln_1p() / (2.0 * theta) - a.expected_return(model)
        + 0.5 * theta * s / u
        + eta / theta)
}

/// `Γ(S; θ, γ) = (γ(1 − θγS) + θ)/(1 − θγS)²`.
pub fn gamma_eff(s: f64, theta: f64, gamma: f64) -> Result<GammaValue> {
    let u = 1.0 - theta * gamma * s;
    if !(u > 0.0) {
        return Err(Error::DomainViolation(u));
    }
    Ok(GammaValue { gamma_eff: (gamma * u + theta) / (u * u) })
}

fn gamma_raw(s: f64, theta: f64, gamma: f64) -> f64 {
    let u = 1.0 - theta * gamma * s;
    (gamma * u + theta) / (u * u)
}

/// `S − (D/Γ(S)² + 1)/C`
fn fixed_point_residual(s: f64, theta: f64, model: &MarketModel) -> f64 {
    let k = model.constants();
    let g = gamma_raw(s, theta, model.gamma());
    s - (k.d / (g * g) + 1.0) / k.c
}

/// Variance `S*` of the optimal portfolio at `θ`.
///
/// Worst case: the unique root on `[1/C, 1/(θγ))`, which is non-empty iff
/// `θγ < C`. Best case: the first upward crossing of the residual in the
/// region `Γ > 0`, which is the local minimiser along the frontier. It stops
/// existing once `|θ|` is large enough that `Γ` and the frontier slope no
/// longer intersect.
pub fn solve_s_star(model: &MarketModel, theta: f64) -> Result<f64> {
    let k = model.constants();
    let gamma = model.gamma();
    if theta.abs() < THETA_EPS {
        return Ok((k.d / (gamma * gamma) + 1.0) / k.c);
    }
    let s_min = 1.0 / k.c;
    let s = if theta > 0.0 {
        if theta * gamma >= k.c {
            return Err(Error::ThetaOutOfDomain { theta, limit: k.c / gamma });
        }
        if k.d == 0.0 {
            return Ok(s_min);
        }
        let hi = (1.0 - 1e-12) / (theta * gamma);
        if hi <= s_min {
            return Err(Error::ThetaOutOfDomain { theta, limit: k.c / gamma });
        }
        bisect(|s| fixed_point_residual(s, theta, model), s_min, hi, 1e-14, S_MAX_ITER)?
    } else {
        solve_s_best(model, theta)?
    };
    let residual = fixed_point_residual(s, theta, model);
    if residual.abs() >= FIXED_POINT_TOL {
        return Err(Error::ToleranceNotReached { iterations: S_MAX_ITER, residual });
    }
    Ok(s)
}

fn solve_s_best(model: &MarketModel, theta: f64) -> Result<f64> {
    let k = model.constants();
    let gamma = model.gamma();
    let t = -theta;
    let s_min = 1.0 / k.c;
    // Γ(S) < 0 below s_zero and > 0 above it.
    let s_zero = if t > gamma { (t - gamma) / (t * gamma * gamma) } else { 0.0 };
    let out = Error::ThetaOutOfDomain { theta, limit: f64::NAN };
    if k.d == 0.0 {
        return if s_min > s_zero { Ok(s_min) } else { Err(out) };
    }
    let lo = s_min.max(s_zero);
    let f = |s: f64| fixed_point_residual(s, theta, model);
    let (e0, e1) = (-15.0f64, 8.0f64);
    let mut prev = lo;
    for i in 0..=BEST_SCAN_POINTS {
        let e = e0 + (e1 - e0) * i as f64 / BEST_SCAN_POINTS as f64;
        let s = lo + s_min * 10f64.powf(e);
        if f(s) > 0.0 {
            return bisect(f, prev, s, 1e-14 * s, S_MAX_ITER);
        }
        prev = s;
    }
    Err(out)
}

/// Optimal portfolio `a*(θ) = Σ⁻¹1/C + Σ⁻¹(μ − (A/C)1)/Γ*`.
pub fn worst_case_portfolio(model: &MarketModel, theta: f64) -> Result<Portfolio> {
    if theta.abs() < THETA_EPS {
        return Ok(nominal_portfolio(model));
    }
    let s = solve_s_star(model, theta)?;
    let g = gamma_eff(s, theta, model.gamma())?.gamma_eff;
    Ok(two_fund_portfolio(model, 1.0 / g))
}

/// KL divergence of the tilted law from the nominal one at fixed `a`:
/// `(θ/2)·S·Γ + ½ln(1 − θγS)`, evaluated as `½(e − ln(1 + e)) + ½θ²S/u²`
/// with `u = 1 − θγS`, `e = θγS/u` to keep precision at small θ.
pub fn relative_entropy_at(model: &MarketModel, theta: f64, a: &Portfolio) -> Result<f64> {
    let u = slack(model, theta, a)?;
    let s = a.variance;
    let e = theta * model.gamma() * s / u;
    Ok(0.5 * (e - e.ln_1p()) + 0.5 * theta * theta * s / (u * u))
}

/// `R(θ)` at the optimal portfolio.
pub fn entropy_of_theta(model: &MarketModel, theta: f64) -> Result<f64> {
    if theta.abs() < THETA_EPS {
        return Ok(0.0);
    }
    let a = worst_case_portfolio(model, theta)?;
    relative_entropy_at(model, theta, &a)
}

/// Expected risk measure of `a` under the alternative law at `θ`.
///
/// `V_a` is centred at the nominal μ, so besides `γ/2·aᵀΣ̃a − aᵀμ̃` there is
/// the squared mean shift: `γ/2·(S̃ + θ²S̃²) − aᵀμ + θS̃` with `S̃ = S/u`.
pub fn alternative_risk_value(model: &MarketModel, theta: f64, a: &Portfolio) -> Result<f64> {
    let u = slack(model, theta, a)?;
    let st = a.variance / u;
    Ok(0.5 * model.gamma() * (st + theta * theta * st * st) - a.expected_return(model) + theta * st)
}

/// Alternative-measure risk value at the optimal portfolio.
pub fn worst_case_risk_value(model: &MarketModel, theta: f64) -> Result<f64> {
    if theta.abs() < THETA_EPS {
        return Ok(nominal_risk_value(model, &nominal_portfolio(model)));
    }
    let a = worst_case_portfolio(model, theta)?;
    alternative_risk_value(model, theta, &a)
}
