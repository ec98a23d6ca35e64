use nalgebra::{DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use super::{gradient, objective, project, shape};
use crate::calibration::optimal_portfolio;
use crate::error::{Error, Result};
use crate::market_model::MarketModel;
use crate::robust::Variant;

/// Errors below this are treated as converged when measuring rates.
const RATE_WINDOW: f64 = 1e-4;
const STOP_GRAD: f64 = 1e-15;

/// How the budget constraint enters the descent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Constraint {
    /// Project each gradient onto `{δ : δᵀ1 = 0}`. Iterates stay on the
    /// budget plane, so the error never has a component along `1`.
    Plane,
    /// Descend on `h(a) − α*(aᵀ1 − 1)` with the optimal multiplier `α*`
    /// fixed, from a start off the plane. Every eigendirection of the
    /// Hessian is then excited.
    FixedMultiplier,
}

#[derive(Debug, Clone)]
pub struct GDOptions {
    /// Defaults to `0.9/λ_max` of the Hessian at the optimum.
    pub step: Option<f64>,
    pub max_iter: usize,
    pub constraint: Constraint,
    pub seed: u64,
    /// Explicit start; otherwise the optimum plus Gaussian noise.
    pub start: Option<DVector<f64>>,
    pub start_scale: f64,
}

impl Default for GDOptions {
    fn default() -> Self {
        Self {
            step: None,
            max_iter: 200,
            constraint: Constraint::FixedMultiplier,
            seed: 0,
            start: None,
            start_scale: 0.1,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GDTrace {
    #[serde(serialize_with = "crate::serde_linalg::vectors")]
    pub iterates: Vec<DVector<f64>>,
    pub objective_values: Vec<f64>,
    pub step_size: f64,
    pub constraint: Constraint,
    #[serde(serialize_with = "crate::serde_linalg::vector")]
    pub target: DVector<f64>,
    /// `|v₁ᵀ(a − a*)|` with `v₁` the top eigenvector of Σ.
    pub err_lambda1: Vec<f64>,
    /// Norm of the remaining error component.
    pub err_lambda2: Vec<f64>,
}

impl GDTrace {
    /// Mean per-iteration `ln(e_k/e_{k+1})` over the leading stretch where the
    /// error is above `1e-4·e₀`. `None` if the component starts at zero.
    fn rate(errs: &[f64]) -> Option<f64> {
        let e0 = *errs.first()?;
        if !(e0 > 1e-14) || errs.len() < 2 {
            return None;
        }
        let last = errs.iter().rposition(|&e| e >= RATE_WINDOW * e0).unwrap_or(0).max(1);
        if !(errs[last] > 0.0) {
            return None;
        }
        Some((e0 / errs[last]).ln() / last as f64)
    }

    pub fn rate_lambda1(&self) -> Option<f64> {
        Self::rate(&self.err_lambda1)
    }

    pub fn rate_lambda2(&self) -> Option<f64> {
        Self::rate(&self.err_lambda2)
    }
}

/// Gradient descent on the tilted objective at θ, recording how the error to
/// the analytic optimum splits between the top eigenvector of Σ and the rest.
pub fn gd_trace(model: &MarketModel, theta: f64, variant: Variant, opts: &GDOptions) -> Result<GDTrace> {
    let n = model.n();
    let target = optimal_portfolio(model, variant, theta)?.weights;
    let sa = model.sigma() * &target;
    let sh = shape(model, variant, theta, target.dot(&sa)).ok_or(Error::DomainViolation(f64::NAN))?;
    let hessian = model.sigma() * (2.0 * sh.df) + &sa * sa.transpose() * (4.0 * sh.d2f);
    let h_max = SymmetricEigen::new(hessian).eigenvalues.max();
    let step = opts.step.unwrap_or(0.9 / h_max);
    if !(step > 0.0) {
        return Err(Error::InvalidParameter("step must be positive".into()));
    }

    let eig = SymmetricEigen::new(model.sigma().clone());
    let top = eig.eigenvalues.imax();
    let v1: DVector<f64> = eig.eigenvectors.column(top).into_owned();

    let g_star = gradient(model, variant, theta, &target).expect("optimum is admissible");
    let alpha = g_star.mean();

    let mut a = match &opts.start {
        Some(s) => {
            if s.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: s.len() });
            }
            s.clone()
        }
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            let noise = DVector::from_fn(n, |_, _| {
                let z: f64 = StandardNormal.sample(&mut rng);
                z * opts.start_scale / (n as f64).sqrt()
            });
            match opts.constraint {
                Constraint::Plane => &target + project(&noise),
                Constraint::FixedMultiplier => &target + noise,
            }
        }
    };

    let value = |a: &DVector<f64>| -> Option<f64> {
        let h = objective(model, variant, theta, a)?;
        Some(match opts.constraint {
            Constraint::Plane => h,
            Constraint::FixedMultiplier => h - alpha * (a.sum() - 1.0),
        })
    };

    let mut trace = GDTrace {
        iterates: Vec::new(),
        objective_values: Vec::new(),
        step_size: step,
        constraint: opts.constraint,
        target: target.clone(),
        err_lambda1: Vec::new(),
        err_lambda2: Vec::new(),
    };
    let Some(mut obj) = value(&a) else {
        return Err(Error::DomainViolation(f64::NAN));
    };
    for _ in 0..=opts.max_iter {
        let e = &a - &target;
        let along = v1.dot(&e);
        trace.err_lambda1.push(along.abs());
        trace.err_lambda2.push((&e - &v1 * along).norm());
        trace.objective_values.push(obj);
        trace.iterates.push(a.clone());
        if trace.iterates.len() > opts.max_iter {
            break;
        }
        let Some(g) = gradient(model, variant, theta, &a) else { break };
        let d = match opts.constraint {
            Constraint::Plane => project(&g),
            Constraint::FixedMultiplier => g.map(|v| v - alpha),
        };
        if d.norm() < STOP_GRAD {
            break;
        }
        let next = &a - d * step;
        match value(&next) {
            Some(v) => {
                a = next;
                obj = v;
            }
            None => break,
        }
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market_model::{expand_symmetric, SymmetricModelSpec};
    use nalgebra::DMatrix;

    #[test]
    fn diagonal_rates_are_exact() {
        let sigma = DMatrix::from_diagonal(&DVector::from_vec(vec![10.0, 1.0]));
        let m = MarketModel::new(DVector::zeros(2), sigma, 1.0).unwrap();
        let t = gd_trace(&m, 0.0, Variant::General, &GDOptions { seed: 3, ..Default::default() }).unwrap();
        assert!((t.step_size - 0.09).abs() < 1e-15);
        assert!((t.rate_lambda1().unwrap() - 10f64.ln()).abs() < 1e-10);
        assert!((t.rate_lambda2().unwrap() + 0.91f64.ln()).abs() < 1e-10);
    }

    #[test]
    fn symmetric_model_slow_in_lambda2() {
        let m = expand_symmetric(&SymmetricModelSpec::reference(), 1.0).unwrap();
        let t =
            gd_trace(&m, 0.0, Variant::General, &GDOptions { seed: 1, max_iter: 100, ..Default::default() }).unwrap();
        assert!(t.rate_lambda1().unwrap() > 2.0 * t.rate_lambda2().unwrap());
        assert!(t.err_lambda2.last().unwrap() > &(100.0 * t.err_lambda1.last().unwrap()));
    }

    #[test]
    fn plane_projection_has_no_lambda1_error_on_symmetric_model() {
        let m = expand_symmetric(&SymmetricModelSpec::reference(), 1.0).unwrap();
        let opts = GDOptions { constraint: Constraint::Plane, seed: 1, max_iter: 100, ..Default::default() };
        let t = gd_trace(&m, 0.0, Variant::General, &opts).unwrap();
        assert!(t.err_lambda1.iter().all(|&e| e < 1e-15));
        assert!(t.rate_lambda1().is_none());
        assert!(t.objective_values.windows(2).all(|w| w[1] <= w[0] + 1e-15));
    }

    #[test]
    fn start_at_optimum_is_single_row() {
        let m = expand_symmetric(&SymmetricModelSpec::reference(), 1.0).unwrap();
        let opts = GDOptions { start: Some(DVector::from_element(10, 0.1)), ..Default::default() };
        let t = gd_trace(&m, 0.0, Variant::General, &opts).unwrap();
        assert_eq!(t.iterates.len(), 1);
    }
}
