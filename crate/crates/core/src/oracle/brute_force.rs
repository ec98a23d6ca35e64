use nalgebra::DVector;

use super::{gradient, objective, project};
use crate::error::{Error, Result};
use crate::market_model::MarketModel;
use crate::nominal::{min_variance_portfolio, Portfolio};
use crate::robust::Variant;

const ARMIJO: f64 = 1e-4;
const MAX_HALVINGS: usize = 80;

#[derive(Debug, Clone, Copy)]
pub struct BruteForceOptions {
    /// Stop when the projected gradient norm drops below this.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for BruteForceOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 200_000 }
    }
}

/// Minimises `(1/θ)·ln E[exp(θV_a)]` over `aᵀ1 = 1` by projected gradient
/// descent from equal weights (or from `Σ⁻¹1/C` when equal weights are
/// outside the domain). Steps are Barzilai–Borwein trial lengths cut
/// by Armijo halving; steps leaving the domain `θkS < 1` are rejected.
pub fn brute_force_portfolio(
    model: &MarketModel,
    theta: f64,
    variant: Variant,
    opts: BruteForceOptions,
) -> Result<Portfolio> {
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidParameter("tolerance must be positive".into()));
    }
    let n = model.n();
    let mut a = DVector::from_element(n, 1.0 / n as f64);
    if objective(model, variant, theta, &a).is_none() {
        // Equal weights can sit outside the domain for large θ; the
        // minimum-variance portfolio has the smallest S of all.
        a = min_variance_portfolio(model).weights;
    }
    let mut h = objective(model, variant, theta, &a).ok_or(Error::DomainViolation(f64::NAN))?;
    let mut g = project(&gradient(model, variant, theta, &a).expect("start is admissible"));
    let mut step = 1.0 / model.sigma().diagonal().max().max(1e-300);
    let mut prev: Option<(DVector<f64>, DVector<f64>)> = None;

    for iter in 0..opts.max_iter {
        let gnorm = g.norm();
        if gnorm < opts.tol {
            return Portfolio::from_weights(model, a);
        }
        if let Some((da, dg)) = prev.take() {
            let sy = da.dot(&dg);
            if sy > 0.0 {
                step = da.norm_squared() / sy;
            }
        }
        // Slack for rounding in h so the search does not stall at the floor.
        let slack = 8.0 * f64::EPSILON * (h.abs() + 1.0);
        let mut accepted = None;
        let mut t = step;
        for _ in 0..MAX_HALVINGS {
            let cand = &a - &g * t;
            if let Some(hc) = objective(model, variant, theta, &cand) {
                if hc <= h - ARMIJO * t * gnorm * gnorm + slack {
                    accepted = Some((cand, hc, t));
                    break;
                }
            }
            t *= 0.5;
        }
        let Some((cand, hc, t)) = accepted else {
            return Err(Error::MaxIterations { iterations: iter, grad_norm: gnorm });
        };
        let gc = project(&gradient(model, variant, theta, &cand).expect("accepted point is admissible"));
        prev = Some((&cand - &a, &gc - &g));
        step = t;
        a = cand;
        h = hc;
        g = gc;
    }
    Err(Error::MaxIterations { iterations: opts.max_iter, grad_norm: g.norm() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market_model::{expand_symmetric, SymmetricModelSpec};
    use crate::nominal::nominal_portfolio;
    use nalgebra::DMatrix;

    #[test]
    fn symmetric_model_gives_equal_weights() {
        let m = expand_symmetric(&SymmetricModelSpec::reference(), 1.0).unwrap();
        for variant in Variant::ALL {
            let a =
                brute_force_portfolio(&m, 2.0, variant, BruteForceOptions { tol: 1e-8, ..Default::default() }).unwrap();
            assert!(a.weights.iter().all(|w| (w - 0.1).abs() < 1e-8));
        }
    }

    #[test]
    fn tiny_theta_gives_nominal() {
        let sigma = DMatrix::from_row_slice(3, 3, &[0.09, 0.01, 0.0, 0.01, 0.04, 0.005, 0.0, 0.005, 0.16]);
        let m = MarketModel::new(DVector::from_vec(vec![0.05, 0.08, 0.12]), sigma, 3.0).unwrap();
        let a = brute_force_portfolio(&m, 1e-8, Variant::General, BruteForceOptions::default()).unwrap();
        assert!((a.weights - nominal_portfolio(&m).weights).amax() < 1e-5);
    }

    #[test]
    fn reports_iteration_cap() {
        let sigma = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 100.0]);
        let m = MarketModel::new(DVector::from_vec(vec![0.1, 0.3]), sigma, 1.0).unwrap();
        let err = brute_force_portfolio(&m, 0.0, Variant::General, BruteForceOptions { tol: 1e-14, max_iter: 1 });
        assert!(matches!(err, Err(Error::MaxIterations { .. })));
    }
}
