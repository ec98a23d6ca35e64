//! Classical Markowitz/Merton selection in the nominal measure.

use nalgebra::DVector;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::market_model::MarketModel;

/// Tolerance on `aᵀ1 = 1` for caller-supplied weights.
pub const BUDGET_TOL: f64 = 1e-10;

/// Fully-invested weights (shorts allowed) together with `S = aᵀΣa`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Portfolio {
    #[serde(serialize_with = "crate::serde_linalg::vector")]
    pub weights: DVector<f64>,
    pub variance: f64,
}

impl Portfolio {
    /// Wraps caller-supplied weights, checking dimension and budget.
    pub fn from_weights(model: &MarketModel, weights: DVector<f64>) -> Result<Self> {
        if weights.len() != model.n() {
            return Err(Error::DimensionMismatch { expected: model.n(), got: weights.len() });
        }
        let sum = weights.sum();
        if (sum - 1.0).abs() > BUDGET_TOL || !sum.is_finite() {
            return Err(Error::InvalidParameter(format!("weights sum to {sum}, expected 1")));
        }
        let variance = model.quad(&weights);
        Ok(Self { weights, variance })
    }

    pub fn equal_weights(model: &MarketModel) -> Self {
        let n = model.n();
        let weights = DVector::from_element(n, 1.0 / n as f64);
        let variance = model.quad(&weights);
        Self { weights, variance }
    }

    pub fn expected_return(&self, model: &MarketModel) -> f64 {
        self.weights.dot(model.mu())
    }
}

/// Two-fund portfolio `Σ⁻¹1/C + (1/Γ)·Σ⁻¹(μ − (A/C)1)`.
///
/// This is `(A/Γ)·Σ⁻¹μ/A + (1 − A/Γ)·Σ⁻¹1/C` rewritten so that `A = 0` needs
/// no special case. `inv_gamma = 0` gives the minimum-variance portfolio.
pub fn two_fund_portfolio(model: &MarketModel, inv_gamma: f64) -> Portfolio {
    let c = model.constants().c;
    let mut weights = model.inv_one() / c + model.excess_fund() * inv_gamma;
    let sum = weights.sum();
    if (sum - 1.0).abs() > 1e-14 {
        weights /= sum;
    }
    let variance = model.quad(&weights);
    Portfolio { weights, variance }
}

/// Optimal mean-variance portfolio for risk aversion `γ`.
pub fn nominal_portfolio(model: &MarketModel) -> Portfolio {
    two_fund_portfolio(model, 1.0 / model.gamma())
}

/// `Σ⁻¹1/C`, with variance `1/C`.
pub fn min_variance_portfolio(model: &MarketModel) -> Portfolio {
    two_fund_portfolio(model, 0.0)
}

/// `γ/2·aᵀΣa − aᵀμ`
pub fn nominal_risk_value(model: &MarketModel, portfolio: &Portfolio) -> f64 {
    0.5 * model.gamma() * portfolio.variance - portfolio.expected_return(model)
}
