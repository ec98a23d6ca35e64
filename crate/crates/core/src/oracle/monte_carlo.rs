use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use super::tilt_scale;
use crate::error::{Error, Result};
use crate::market_model::MarketModel;
use crate::nominal::Portfolio;
use crate::robust::Variant;

/// Jackknife groups; each group is one RNG stream.
const GROUPS: usize = 64;
const MAX_SHARE: f64 = 0.999;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MCConfig {
    pub n_samples: usize,
    pub seed: u64,
    pub antithetic: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MCEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub max_weight_share: f64,
}

/// Risk measure `V_a(x)` for the given variant.
fn risk(model: &MarketModel, variant: Variant, a: &DVector<f64>, x: &DVector<f64>) -> f64 {
    let y = a.dot(&(x - model.mu()));
    let k = tilt_scale(model, variant);
    match variant {
        Variant::General => 0.5 * k * y * y - a.dot(x),
        Variant::FixedMean => 0.5 * k * y * y - a.dot(model.mu()),
        Variant::MinVariance => 0.5 * y * y,
    }
}

fn group_samples(
    model: &MarketModel,
    variant: Variant,
    a: &DVector<f64>,
    cfg: &MCConfig,
    group: usize,
    count: usize,
) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(group as u64);
    let l = model.cholesky().l();
    let n = model.n();
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let z = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
        let lz = &l * z;
        out.push(risk(model, variant, a, &(model.mu() + &lz)));
        if cfg.antithetic && out.len() < count {
            out.push(risk(model, variant, a, &(model.mu() - &lz)));
        }
    }
    out
}

/// Self-normalised estimate of `E[m*V_a]` with `m* ∝ exp(θV_a)`, sampling
/// `X ~ N(μ, Σ)`. The standard error is a delete-a-group jackknife over the
/// RNG streams.
pub fn mc_risk_value(
    model: &MarketModel,
    variant: Variant,
    theta: f64,
    a: &Portfolio,
    cfg: MCConfig,
) -> Result<MCEstimate> {
    if cfg.n_samples < GROUPS {
        return Err(Error::InvalidParameter(format!("need at least {GROUPS} samples")));
    }
    let k = tilt_scale(model, variant);
    let x = theta * k * a.variance;
    if x >= 1.0 {
        return Err(Error::DomainViolation(1.0 - x));
    }
    if 2.0 * x >= 1.0 {
        return Err(Error::DegenerateWeights {
            max_share: f64::NAN,
            reason: "weights have infinite variance (2θ ≥ θ_max)",
        });
    }

    let per = cfg.n_samples / GROUPS;
    let extra = cfg.n_samples % GROUPS;
    let groups: Vec<Vec<f64>> = (0..GROUPS)
        .into_par_iter()
        .map(|g| group_samples(model, variant, &a.weights, &cfg, g, per + usize::from(g < extra)))
        .collect();

    let shift = groups.iter().flatten().map(|v| theta * v).fold(f64::NEG_INFINITY, f64::max);
    let sums: Vec<(f64, f64)> = groups
        .iter()
        .map(|vs| {
            vs.iter().fold((0.0, 0.0), |(w, wv), &v| {
                let e = (theta * v - shift).exp();
                (w + e, wv + e * v)
            })
        })
        .collect();
    let total_w: f64 = sums.iter().map(|s| s.0).sum();
    let total_wv: f64 = sums.iter().map(|s| s.1).sum();
    let estimate = total_wv / total_w;
    // exp(θV − shift) ≤ 1, so the largest share is at most 1/total.
    let max_weight_share = 1.0 / total_w;
    if max_weight_share > MAX_SHARE {
        return Err(Error::DegenerateWeights { max_share: max_weight_share, reason: "single sample dominates" });
    }

    let g = GROUPS as f64;
    let leave_out: Vec<f64> = sums.iter().map(|(w, wv)| (total_wv - wv) / (total_w - w)).collect();
    let mean = leave_out.iter().sum::<f64>() / g;
    let var = (g - 1.0) / g * leave_out.iter().map(|e| (e - mean).powi(2)).sum::<f64>();
    Ok(MCEstimate { estimate, std_error: var.sqrt(), max_weight_share })
}

/// General-variant estimate of the worst-case (or best-case) risk value.
pub fn mc_worst_case_value(model: &MarketModel, theta: f64, a: &Portfolio, cfg: MCConfig) -> Result<MCEstimate> {
    mc_risk_value(model, Variant::General, theta, a, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nominal::{nominal_portfolio, nominal_risk_value};
    use crate::robust::{alternative_risk_value, theta_max};
    use nalgebra::DMatrix;

    fn model() -> MarketModel {
        let sigma = DMatrix::from_row_slice(3, 3, &[0.09, 0.01, 0.0, 0.01, 0.04, 0.005, 0.0, 0.005, 0.16]);
        MarketModel::new(DVector::from_vec(vec![0.05, 0.08, 0.12]), sigma, 3.0).unwrap()
    }

    #[test]
    fn theta_zero_is_plain_mean() {
        let m = model();
        let a = nominal_portfolio(&m);
        let cfg = MCConfig { n_samples: 100_000, seed: 1, antithetic: false };
        let est = mc_worst_case_value(&m, 0.0, &a, cfg).unwrap();
        assert!((est.estimate - nominal_risk_value(&m, &a)).abs() < 4.0 * est.std_error);
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let m = model();
        let a = nominal_portfolio(&m);
        let cfg = MCConfig { n_samples: 20_000, seed: 42, antithetic: true };
        let x = mc_worst_case_value(&m, 1.0, &a, cfg).unwrap();
        let y = mc_worst_case_value(&m, 1.0, &a, cfg).unwrap();
        assert_eq!(x.estimate.to_bits(), y.estimate.to_bits());
        assert_eq!(x.std_error.to_bits(), y.std_error.to_bits());
    }

    #[test]
    fn matches_closed_form() {
        let m = model();
        let a = nominal_portfolio(&m);
        let theta = 0.2 * theta_max(&m, &a);
        let cfg = MCConfig { n_samples: 400_000, seed: 3, antithetic: true };
        let est = mc_worst_case_value(&m, theta, &a, cfg).unwrap();
        let exact = alternative_risk_value(&m, theta, &a).unwrap();
        assert!((est.estimate - exact).abs() < 4.0 * est.std_error, "{} vs {exact} ± {}", est.estimate, est.std_error);
    }

    #[test]
    fn near_boundary_is_degenerate() {
        let m = model();
        let a = nominal_portfolio(&m);
        let theta = 0.95 * theta_max(&m, &a);
        let cfg = MCConfig { n_samples: 10_000, seed: 3, antithetic: false };
        assert!(matches!(mc_worst_case_value(&m, theta, &a, cfg), Err(Error::DegenerateWeights { .. })));
    }
}
