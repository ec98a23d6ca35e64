//! Independent checks of the closed forms: numerical minimisation of the
//! tilted objective, Monte Carlo under the nominal law, Gaussian KL and
//! quadratic-form moments, and the gradient-descent demonstration.
//!
//! Nothing here calls the analytic solvers except to build comparison
//! targets in the demonstration code.

mod brute_force;
mod gaussian;
mod gd;
mod monte_carlo;
mod random;

pub use brute_force::{brute_force_portfolio, BruteForceOptions};
pub use gaussian::{entropy_derivative_check, gaussian_kl, quadratic_form_variance, risk_variance_under};
pub use gd::{gd_trace, Constraint, GDOptions, GDTrace};
pub use monte_carlo::{mc_risk_value, mc_worst_case_value, MCConfig, MCEstimate};
pub use random::{random_admissible_point, random_model, ModelFamily};

use nalgebra::DVector;

use crate::market_model::MarketModel;
use crate::nominal::Portfolio;
use crate::robust::{Variant, THETA_EPS};

/// `(1/θ)·ln E[exp(θV_a)]` as a function of `S = aᵀΣa`, with its first two
/// derivatives. The objective is `f(S) − c·aᵀμ` with `c = 1` unless the
/// measure has no mean term.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Shape {
    pub f: f64,
    pub df: f64,
    pub d2f: f64,
}

pub(crate) fn tilt_scale(model: &MarketModel, variant: Variant) -> f64 {
    match variant {
        Variant::MinVariance => 1.0,
        _ => model.gamma(),
    }
}

/// Largest θ for which the tilt of a fixed portfolio stays normalisable.
pub fn theta_limit(model: &MarketModel, variant: Variant, a: &Portfolio) -> f64 {
    1.0 / (tilt_scale(model, variant) * a.variance)
}

pub(crate) fn has_mean_term(variant: Variant) -> bool {
    !matches!(variant, Variant::MinVariance)
}

pub(crate) fn shape(model: &MarketModel, variant: Variant, theta: f64, s: f64) -> Option<Shape> {
    let k = tilt_scale(model, variant);
    if theta.abs() < THETA_EPS {
        return Some(Shape { f: 0.5 * k * s, df: 0.5 * k, d2f: 0.0 });
    }
    let x = theta * k * s;
    let u = 1.0 - x;
    if !(u > 0.0) {
        return None;
    }
    let log_term = -(-x).ln_1p() / (2.0 * theta);
    let base = Shape { f: log_term, df: k / (2.0 * u), d2f: theta * k * k / (2.0 * u * u) };
    Some(match variant {
        // Extra θ/2·S/u from the linear part of V.
        Variant::General => Shape {
            f: base.f + 0.5 * theta * s / u,
            df: base.df + 0.5 * theta / (u * u),
            d2f: base.d2f + theta * theta * k / (u * u * u),
        },
        _ => base,
    })
}

/// Objective value at weights `w` (not necessarily fully invested).
pub(crate) fn objective(model: &MarketModel, variant: Variant, theta: f64, w: &DVector<f64>) -> Option<f64> {
    let s = model.quad(w);
    let sh = shape(model, variant, theta, s)?;
    let lin = if has_mean_term(variant) { w.dot(model.mu()) } else { 0.0 };
    Some(sh.f - lin)
}

/// Gradient `2f'(S)Σw − μ`.
pub(crate) fn gradient(model: &MarketModel, variant: Variant, theta: f64, w: &DVector<f64>) -> Option<DVector<f64>> {
    let sw = model.sigma() * w;
    let sh = shape(model, variant, theta, w.dot(&sw))?;
    let mut g = sw * (2.0 * sh.df);
    if has_mean_term(variant) {
        g -= model.mu();
    }
    Some(g)
}

/// Subtracts the mean: projection onto `{δ : δᵀ1 = 0}`.
pub(crate) fn project(g: &DVector<f64>) -> DVector<f64> {
    let m = g.mean();
    g.map(|v| v - m)
}
