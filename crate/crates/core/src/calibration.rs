//! Outer problem: pick θ so the optimal alternative law sits on the surface
//! of the KL ball, `R(θ*) = η`, and build entropy/risk frontiers from it.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fixed_mean::{
    gx_alternative_model, gx_alternative_risk_value, gx_entropy, gx_portfolio, gx_relative_entropy_at, gx_risk_value,
    min_variance_alternative_model, min_variance_alternative_value, min_variance_nominal_value,
    min_variance_portfolio_robust, min_variance_relative_entropy_at,
};
use crate::market_model::{expand_symmetric, symmetric_eigenvalues, MarketModel, SymmetricModelSpec};
use crate::nominal::{nominal_portfolio, nominal_risk_value, Portfolio};
use crate::robust::{
    alternative_model, alternative_risk_value, entropy_of_theta, relative_entropy_at, worst_case_portfolio,
    AlternativeModel, Direction, Variant, THETA_EPS,
};

/// Accepted `|R(θ*) − η|`.
pub const ENTROPY_TOL: f64 = 1e-10;
const TARGET_TOL: f64 = 1e-13;
const MAX_BISECTIONS: usize = 400;
const MAX_EXPANSIONS: usize = 200;

#[derive(Debug, Clone)]
pub struct CalibrationRequest {
    pub model: MarketModel,
    pub eta: f64,
    pub variant: Variant,
    pub direction: Direction,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RobustSolution {
    pub variant: Variant,
    pub direction: Direction,
    pub theta_star: f64,
    pub portfolio: Portfolio,
    pub entropy: f64,
    pub risk_value_alternative: f64,
    pub risk_value_nominal_at_robust: f64,
    pub alternative: AlternativeModel,
}

// Per-variant dispatch. All of these are pure functions of (model, θ[, a]).

/// Optimal portfolio at θ.
pub fn optimal_portfolio(model: &MarketModel, variant: Variant, theta: f64) -> Result<Portfolio> {
    match variant {
        Variant::General => worst_case_portfolio(model, theta),
        Variant::FixedMean => gx_portfolio(model, theta),
        Variant::MinVariance => min_variance_portfolio_robust(model, theta),
    }
}

/// Entropy of the optimal alternative law at θ.
pub fn entropy(model: &MarketModel, variant: Variant, theta: f64) -> Result<f64> {
    match variant {
        Variant::General => entropy_of_theta(model, theta),
        Variant::FixedMean => gx_entropy(model, theta),
        Variant::MinVariance => {
            let a = min_variance_portfolio_robust(model, theta)?;
            min_variance_relative_entropy_at(theta, &a)
        }
    }
}

/// Entropy of the law tilted by `exp(θV_a)` at a fixed portfolio.
pub fn entropy_at(model: &MarketModel, variant: Variant, theta: f64, a: &Portfolio) -> Result<f64> {
    match variant {
        Variant::General => relative_entropy_at(model, theta, a),
        Variant::FixedMean => gx_relative_entropy_at(model, theta, a),
        Variant::MinVariance => min_variance_relative_entropy_at(theta, a),
    }
}

/// Expected risk measure of `a` under the law tilted by `exp(θV_a)`.
pub fn alternative_value(model: &MarketModel, variant: Variant, theta: f64, a: &Portfolio) -> Result<f64> {
    match variant {
        Variant::General => alternative_risk_value(model, theta, a),
        Variant::FixedMean => gx_alternative_risk_value(model, theta, a),
        Variant::MinVariance => min_variance_alternative_value(theta, a),
    }
}

/// Expected risk measure of `a` under the nominal law.
pub fn nominal_value(model: &MarketModel, variant: Variant, a: &Portfolio) -> f64 {
    match variant {
        Variant::General | Variant::FixedMean => nominal_risk_value(model, a),
        Variant::MinVariance => min_variance_nominal_value(a),
    }
}

/// Portfolio optimal under the nominal law.
pub fn nominal_optimum(model: &MarketModel, variant: Variant) -> Portfolio {
    match variant {
        Variant::General | Variant::FixedMean => nominal_portfolio(model),
        Variant::MinVariance => crate::nominal::min_variance_portfolio(model),
    }
}

pub fn tilted_model(model: &MarketModel, variant: Variant, theta: f64, a: &Portfolio) -> Result<AlternativeModel> {
    match variant {
        Variant::General => alternative_model(model, theta, a),
        Variant::FixedMean => gx_alternative_model(model, theta, a),
        Variant::MinVariance => min_variance_alternative_model(model, theta, a),
    }
}

/// Risk value at the optimal portfolio under the optimal alternative law.
pub fn optimal_value(model: &MarketModel, variant: Variant, theta: f64) -> Result<f64> {
    match variant {
        Variant::FixedMean => gx_risk_value(model, theta),
        _ => {
            let a = optimal_portfolio(model, variant, theta)?;
            alternative_value(model, variant, theta, &a)
        }
    }
}

/// Known upper end of the admissible worst-case θ range, if any.
pub fn worst_case_bound(model: &MarketModel, variant: Variant) -> f64 {
    let c = model.constants().c;
    match variant {
        Variant::General | Variant::FixedMean => c / model.gamma(),
        Variant::MinVariance => c,
    }
}

fn tilt_coefficient(model: &MarketModel, variant: Variant) -> f64 {
    match variant {
        Variant::MinVariance => 1.0,
        _ => model.gamma(),
    }
}

/// Finds `θ` with sign `direction.sign()` and `f(θ) = η`, where `f` is 0 at
/// θ = 0 and increasing in `|θ|` on a (possibly bounded) admissible interval.
/// `bound` is the magnitude of the interval end when known; otherwise it is
/// located by doubling and bisecting on solver failures.
pub fn calibrate_scalar<F>(f: F, eta: f64, direction: Direction, bound: Option<f64>) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    if !(eta >= 0.0 && eta.is_finite()) {
        return Err(Error::InvalidParameter(format!("eta must be finite and non-negative, got {eta}")));
    }
    if eta == 0.0 {
        return Ok(0.0);
    }
    let sign = direction.sign();
    let eval = |t: f64| -> Result<Option<f64>> {
        match f(sign * t) {
            Ok(r) if r.is_finite() => Ok(Some(r)),
            Ok(_) => Ok(None),
            Err(e) if e.is_domain() => Ok(None),
            Err(e) => Err(e),
        }
    };

    // Bracket: lo admissible with R(lo) < η, hi with R(hi) ≥ η.
    let (mut lo, mut r_lo) = (0.0, 0.0);
    let mut hi = None;
    let mut fail = None;
    for k in 1..=MAX_EXPANSIONS {
        let t = match bound {
            Some(b) => b * (1.0 - 0.5f64.powi(k as i32)),
            None => 2f64.powi(k as i32 - 20),
        };
        if t <= lo {
            break;
        }
        match eval(t)? {
            Some(r) if r >= eta => {
                hi = Some(t);
                break;
            }
            Some(r) => {
                lo = t;
                r_lo = r;
            }
            None => {
                fail = Some(t);
                break;
            }
        }
    }
    let hi = match (hi, fail) {
        (Some(h), _) => h,
        (None, Some(mut bad)) => {
            // The admissible set ends between lo and bad.
            loop {
                let mid = 0.5 * (lo + bad);
                if mid <= lo || mid >= bad {
                    return Err(Error::EtaUnreachable { eta, max_entropy: r_lo });
                }
                match eval(mid)? {
                    Some(r) if r >= eta => break mid,
                    Some(r) => {
                        lo = mid;
                        r_lo = r;
                    }
                    None => bad = mid,
                }
            }
        }
        (None, None) => return Err(Error::EtaUnreachable { eta, max_entropy: r_lo }),
    };

    let mut hi = hi;
    let mut best = (hi, eval(hi)?.unwrap_or(f64::INFINITY));
    if (r_lo - eta).abs() < (best.1 - eta).abs() {
        best = (lo, r_lo);
    }
    for _ in 0..MAX_BISECTIONS {
        if (best.1 - eta).abs() <= TARGET_TOL {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        match eval(mid)? {
            Some(r) => {
                if (r - eta).abs() < (best.1 - eta).abs() {
                    best = (mid, r);
                }
                if r < eta {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            None => hi = mid,
        }
    }
    let residual = best.1 - eta;
    if residual.abs() >= ENTROPY_TOL {
        return Err(Error::ToleranceNotReached { iterations: MAX_BISECTIONS, residual });
    }
    Ok(sign * best.0)
}

/// θ with `R(θ) = η` at the optimal portfolio.
pub fn calibrate_theta_only(model: &MarketModel, variant: Variant, eta: f64, direction: Direction) -> Result<f64> {
    let bound = match direction {
        Direction::Worst => Some(worst_case_bound(model, variant)),
        Direction::Best => None,
    };
    calibrate_scalar(|t| entropy(model, variant, t), eta, direction, bound)
}

/// θ with `R(θ, a) = η` for a fixed portfolio.
pub fn calibrate_theta_at(
    model: &MarketModel,
    variant: Variant,
    a: &Portfolio,
    eta: f64,
    direction: Direction,
) -> Result<f64> {
    let bound = match direction {
        Direction::Worst => Some(1.0 / (tilt_coefficient(model, variant) * a.variance)),
        Direction::Best => None,
    };
    calibrate_scalar(|t| entropy_at(model, variant, t, a), eta, direction, bound)
}

/// Robust solution on the surface of the ball of radius `req.eta`.
pub fn calibrate_theta(req: &CalibrationRequest) -> Result<RobustSolution> {
    let theta = calibrate_theta_only(&req.model, req.variant, req.eta, req.direction)?;
    solution_at(&req.model, req.variant, req.direction, theta)
}

/// Full solution record at a given θ.
pub fn solution_at(model: &MarketModel, variant: Variant, direction: Direction, theta: f64) -> Result<RobustSolution> {
    let theta = if theta.abs() < THETA_EPS { 0.0 } else { theta };
    let portfolio = optimal_portfolio(model, variant, theta)?;
    let entropy = entropy_at(model, variant, theta, &portfolio)?;
    let risk_value_alternative = match variant {
        _ if theta == 0.0 => nominal_value(model, variant, &portfolio),
        Variant::FixedMean => gx_risk_value(model, theta)?,
        _ => alternative_value(model, variant, theta, &portfolio)?,
    };
    Ok(RobustSolution {
        variant,
        direction,
        theta_star: theta,
        entropy,
        risk_value_alternative,
        risk_value_nominal_at_robust: nominal_value(model, variant, &portfolio),
        alternative: tilted_model(model, variant, theta, &portfolio)?,
        portfolio,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FrontierPoint {
    pub eta: f64,
    pub theta: f64,
    pub risk_worst: f64,
    pub risk_best: f64,
    pub risk_nominal: f64,
    pub risk_nominal_at_robust: f64,
    pub risk_alt_at_nominal_portfolio: f64,
}

fn unreachable_to_nan(r: Result<f64>) -> Result<f64> {
    match r {
        Err(Error::EtaUnreachable { .. }) => Ok(f64::NAN),
        other => other,
    }
}

/// Extreme value of the nominal optimum over the ball in `direction`.
fn value_of_nominal_over_ball(model: &MarketModel, variant: Variant, eta: f64, direction: Direction) -> Result<f64> {
    let a = nominal_optimum(model, variant);
    let theta = calibrate_theta_at(model, variant, &a, eta, direction)?;
    if theta == 0.0 {
        return Ok(nominal_value(model, variant, &a));
    }
    alternative_value(model, variant, theta, &a)
}

fn frontier_point(model: &MarketModel, variant: Variant, directions: &[Direction], eta: f64) -> Result<FrontierPoint> {
    let primary = if directions.contains(&Direction::Worst) { Direction::Worst } else { Direction::Best };
    let nominal = nominal_value(model, variant, &nominal_optimum(model, variant));
    let mut point = FrontierPoint {
        eta,
        theta: f64::NAN,
        risk_worst: f64::NAN,
        risk_best: f64::NAN,
        risk_nominal: nominal,
        risk_nominal_at_robust: f64::NAN,
        risk_alt_at_nominal_portfolio: f64::NAN,
    };
    for &dir in directions {
        let theta = match calibrate_theta_only(model, variant, eta, dir) {
            Err(Error::EtaUnreachable { .. }) if dir == Direction::Best => continue,
            other => other?,
        };
        let sol = solution_at(model, variant, dir, theta)?;
        match dir {
            Direction::Worst => point.risk_worst = sol.risk_value_alternative,
            Direction::Best => point.risk_best = sol.risk_value_alternative,
        }
        if dir == primary {
            point.theta = theta;
            point.risk_nominal_at_robust = sol.risk_value_nominal_at_robust;
        }
    }
    point.risk_alt_at_nominal_portfolio = unreachable_to_nan(value_of_nominal_over_ball(model, variant, eta, primary))?;
    Ok(point)
}

/// One point per η, calibrating θ for each requested direction. Best-case
/// values beyond the reachable entropy are NaN.
pub fn frontier(
    model: &MarketModel,
    eta_grid: &[f64],
    variant: Variant,
    directions: &[Direction],
) -> Result<Vec<FrontierPoint>> {
    if directions.is_empty() {
        return Err(Error::InvalidParameter("at least one direction is required".into()));
    }
    if eta_grid.iter().any(|e| !(*e >= 0.0 && e.is_finite())) {
        return Err(Error::InvalidParameter("eta grid entries must be finite and non-negative".into()));
    }
    if eta_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidParameter("eta grid must be sorted ascending".into()));
    }
    eta_grid.par_iter().map(|&eta| frontier_point(model, variant, directions, eta)).collect()
}

/// Frontier from a θ grid: each θ gives `(R(θ), value(θ))` directly, with
/// the sign of θ selecting the branch. Rows are sorted by η.
pub fn frontier_theta_scan(model: &MarketModel, theta_grid: &[f64], variant: Variant) -> Result<Vec<FrontierPoint>> {
    let nominal = nominal_value(model, variant, &nominal_optimum(model, variant));
    let mut points: Vec<FrontierPoint> = theta_grid
        .par_iter()
        .map(|&theta| {
            let dir = if theta < 0.0 { Direction::Best } else { Direction::Worst };
            let sol = solution_at(model, variant, dir, theta)?;
            let value = sol.risk_value_alternative;
            let (risk_worst, risk_best) = match dir {
                Direction::Worst => (value, f64::NAN),
                Direction::Best => (f64::NAN, value),
            };
            Ok(FrontierPoint {
                eta: sol.entropy,
                theta: sol.theta_star,
                risk_worst,
                risk_best,
                risk_nominal: nominal,
                risk_nominal_at_robust: sol.risk_value_nominal_at_robust,
                risk_alt_at_nominal_portfolio: unreachable_to_nan(value_of_nominal_over_ball(
                    model,
                    variant,
                    sol.entropy,
                    dir,
                ))?,
            })
        })
        .collect::<Result<_>>()?;
    points.sort_by(|a, b| a.eta.total_cmp(&b.eta));
    Ok(points)
}

/// Which single-model family a perturbation curve moves through.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Curve {
    RhoOnly,
    KOnly,
    Joint,
}

impl Curve {
    pub fn name(self) -> &'static str {
        match self {
            Curve::RhoOnly => "rho_only",
            Curve::KOnly => "k_only",
            Curve::Joint => "joint",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PerturbationPoint {
    pub curve: Curve,
    pub param_value: f64,
    pub entropy: f64,
    pub risk_value: f64,
}

/// Distance from a single-parameter curve endpoint to the analytic frontier
/// at the same entropy, measured toward the branch it moves along.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EndpointGap {
    pub curve: Curve,
    pub param_value: f64,
    pub entropy: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerturbationScan {
    pub points: Vec<PerturbationPoint>,
    /// Largest `|entropy|` or `|risk value|` difference between the joint
    /// curve and the analytic fixed-mean frontier.
    pub joint_max_gap: f64,
    pub endpoint_gaps: Vec<EndpointGap>,
}

/// Inclusive range `start, start + step, …` up to `stop`.
pub fn inclusive_range(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(stop >= start) || !start.is_finite() || !stop.is_finite() {
        return Err(Error::InvalidParameter(format!("bad range {start}:{stop}:{step}")));
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| start + i as f64 * step).collect())
}

/// Default ρ range for the perturbation scan.
pub fn default_rho_grid() -> Vec<f64> {
    inclusive_range(0.05, 0.45, 0.01).expect("static range")
}

/// Default variance-scale range for the perturbation scan.
pub fn default_k_grid() -> Vec<f64> {
    inclusive_range(0.72, 1.32, 0.02).expect("static range")
}

/// θ values reaching each η of the grid, worst then best branch.
pub fn joint_theta_grid(model: &MarketModel, eta_grid: &[f64]) -> Result<Vec<f64>> {
    let mut thetas = Vec::with_capacity(2 * eta_grid.len());
    for dir in [Direction::Best, Direction::Worst] {
        for &eta in eta_grid {
            thetas.push(calibrate_theta_only(model, Variant::FixedMean, eta, dir)?);
        }
    }
    thetas.sort_by(f64::total_cmp);
    thetas.dedup();
    Ok(thetas)
}

/// KL divergence between two equal-mean equicorrelated Gaussians, from the
/// ratios of their two eigenvalues.
fn symmetric_kl(n: usize, nominal: (f64, f64), perturbed: (f64, f64)) -> f64 {
    let h = |r: f64| (r - 1.0) - r.ln();
    let r1 = perturbed.0 / nominal.0;
    let r2 = perturbed.1 / nominal.1;
    0.5 * (h(r1) + (n as f64 - 1.0) * h(r2))
}

/// Nominal machinery at a perturbed symmetric model: the optimal portfolio
/// is `1/n` and its value `γλ₁/(2n) − μ`.
fn symmetric_value(gamma: f64, n: usize, lambda1: f64, mu: f64) -> f64 {
    gamma * lambda1 / (2.0 * n as f64) - mu
}

fn perturbed_eigenvalues(spec: &SymmetricModelSpec, k: f64, rho: f64) -> Result<(f64, f64)> {
    let lower = -1.0 / (spec.n as f64 - 1.0);
    if !(k > 0.0 && rho > lower && rho < 1.0 && k.is_finite()) {
        return Err(Error::PerturbedModelInvalid { k, rho });
    }
    let var = k * spec.sigma2;
    Ok(symmetric_eigenvalues(var, var * rho, spec.n))
}

/// Compares moving the symmetric model along ρ alone, along the variance
/// scale `k` alone, and along the `(k̃, ρ̃)` path implied by the fixed-mean
/// alternative covariance at each θ of `theta_grid`.
pub fn perturbation_scan(
    spec: &SymmetricModelSpec,
    gamma: f64,
    theta_grid: &[f64],
    rho_grid: &[f64],
    k_grid: &[f64],
) -> Result<PerturbationScan> {
    let model = expand_symmetric(spec, gamma)?;
    let n = spec.n;
    let nominal_eigs = spec.eigenvalues();
    let nominal = symmetric_value(gamma, n, nominal_eigs.0, spec.mu_scalar);
    let mut points = Vec::new();

    let mut single = |curve: Curve, param: f64, k: f64, rho: f64| -> Result<()> {
        let eigs = perturbed_eigenvalues(spec, k, rho)?;
        points.push(PerturbationPoint {
            curve,
            param_value: param,
            entropy: symmetric_kl(n, nominal_eigs, eigs),
            risk_value: symmetric_value(gamma, n, eigs.0, spec.mu_scalar),
        });
        Ok(())
    };
    for &rho in rho_grid {
        single(Curve::RhoOnly, rho, 1.0, rho)?;
    }
    for &k in k_grid {
        single(Curve::KOnly, k, k, spec.rho)?;
    }

    let equal = Portfolio::equal_weights(&model);
    let mut joint_max_gap = 0.0f64;
    for &theta in theta_grid {
        let alt = gx_alternative_model(&model, theta, &equal)?;
        let k = alt.sigma_tilde[(0, 0)] / spec.sigma2;
        let rho = alt.sigma_tilde[(0, 1)] / alt.sigma_tilde[(0, 0)];
        let eigs = perturbed_eigenvalues(spec, k, rho)?;
        let point = PerturbationPoint {
            curve: Curve::Joint,
            param_value: theta,
            entropy: symmetric_kl(n, nominal_eigs, eigs),
            risk_value: symmetric_value(gamma, n, eigs.0, spec.mu_scalar),
        };
        let analytic_entropy = gx_entropy(&model, theta)?;
        let analytic_value = gx_risk_value(&model, theta)?;
        joint_max_gap =
            joint_max_gap.max((point.entropy - analytic_entropy).abs()).max((point.risk_value - analytic_value).abs());
        points.push(point);
    }

    let mut endpoint_gaps = Vec::new();
    for (curve, grid) in [(Curve::RhoOnly, rho_grid), (Curve::KOnly, k_grid)] {
        let ends = [grid.first(), grid.last()];
        for &param in ends.into_iter().flatten() {
            let p = points
                .iter()
                .find(|p| p.curve == curve && p.param_value == param)
                .copied()
                .expect("endpoint was scanned");
            let dir = if p.risk_value >= nominal { Direction::Worst } else { Direction::Best };
            let theta = calibrate_theta_only(&model, Variant::FixedMean, p.entropy, dir)?;
            let frontier_value = gx_risk_value(&model, theta)?;
            let gap = match dir {
                Direction::Worst => frontier_value - p.risk_value,
                Direction::Best => p.risk_value - frontier_value,
            };
            endpoint_gaps.push(EndpointGap { curve, param_value: param, entropy: p.entropy, gap });
        }
    }
    Ok(PerturbationScan { points, joint_max_gap, endpoint_gaps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market_model::SymmetricModelSpec;
    use crate::roots::bisect;
    use approx::assert_relative_eq;
    use nalgebra::{DMatrix, DVector};

    fn reference() -> MarketModel {
        expand_symmetric(&SymmetricModelSpec::reference(), 1.0).unwrap()
    }

    fn skewed() -> MarketModel {
        let sigma = DMatrix::from_row_slice(3, 3, &[0.09, 0.01, 0.0, 0.01, 0.04, 0.005, 0.0, 0.005, 0.16]);
        MarketModel::new(DVector::from_vec(vec![0.06, 0.065, 0.07]), sigma, 3.0).unwrap()
    }

    fn x_roots() -> (f64, f64) {
        let f = |x: f64| x - x.ln() - 1.5;
        (bisect(f, 1.0, 10.0, 0.0, 300).unwrap(), bisect(f, 1e-6, 1.0, 0.0, 300).unwrap())
    }

    #[test]
    fn eta_zero_is_nominal() {
        for variant in Variant::ALL {
            let req = CalibrationRequest { model: skewed(), eta: 0.0, variant, direction: Direction::Worst };
            let sol = calibrate_theta(&req).unwrap();
            assert_eq!(sol.theta_star, 0.0);
            assert_eq!(sol.portfolio, nominal_optimum(&req.model, variant));
        }
    }

    #[test]
    fn fixed_mean_reference_roots() {
        let r = reference();
        let c = r.constants().c;
        let (x_hi, x_lo) = x_roots();
        let worst = calibrate_theta_only(&r, Variant::FixedMean, 0.25, Direction::Worst).unwrap();
        assert_relative_eq!(worst, c * (1.0 - 1.0 / x_hi), max_relative = 1e-9);
        assert!((worst - 5.906).abs() < 1e-3);
        let best = calibrate_theta_only(&r, Variant::FixedMean, 0.25, Direction::Best).unwrap();
        assert_relative_eq!(best, c * (1.0 - 1.0 / x_lo), max_relative = 1e-9);
        assert!((x_lo - 0.301710).abs() < 1e-6);
        assert!((best + 23.7379).abs() < 1e-3);
    }

    #[test]
    fn calibration_hits_the_ball_surface() {
        let m = skewed();
        for variant in Variant::ALL {
            for dir in [Direction::Worst, Direction::Best] {
                for eta in [1e-6, 0.01, 0.1, 0.25] {
                    let req = CalibrationRequest { model: m.clone(), eta, variant, direction: dir };
                    let sol = calibrate_theta(&req).unwrap();
                    assert!((sol.entropy - eta).abs() < ENTROPY_TOL, "{variant:?} {dir:?} {eta}");
                    assert_eq!(sol.theta_star > 0.0, dir == Direction::Worst);
                }
            }
        }
    }

    #[test]
    fn unreachable_best_case_is_reported() {
        let sigma = DMatrix::from_row_slice(2, 2, &[0.04, 0.0, 0.0, 0.09]);
        let m = MarketModel::new(DVector::from_vec(vec![0.02, 0.3]), sigma, 1.0).unwrap();
        for variant in [Variant::General, Variant::FixedMean] {
            let err = calibrate_theta_only(&m, variant, 0.25, Direction::Best).unwrap_err();
            match err {
                Error::EtaUnreachable { max_entropy, .. } => assert!(max_entropy < 0.25),
                e => panic!("unexpected {e:?}"),
            }
        }
    }

    #[test]
    fn frontier_single_zero_point() {
        let r = reference();
        let pts = frontier(&r, &[0.0], Variant::FixedMean, &[Direction::Worst, Direction::Best]).unwrap();
        assert_eq!(pts.len(), 1);
        assert_eq!(pts[0].risk_worst, pts[0].risk_nominal);
        assert_eq!(pts[0].risk_best, pts[0].risk_nominal);
    }

    #[test]
    fn frontier_orders_branches() {
        let m = skewed();
        let grid = inclusive_range(0.0, 0.25, 0.05).unwrap();
        for variant in Variant::ALL {
            let pts = frontier(&m, &grid, variant, &[Direction::Worst, Direction::Best]).unwrap();
            for w in pts.windows(2) {
                assert!(w[1].risk_worst > w[0].risk_worst);
                assert!(w[1].risk_best < w[0].risk_best);
            }
            for p in &pts {
                assert!(p.risk_best <= p.risk_nominal + 1e-12 && p.risk_nominal <= p.risk_worst + 1e-12);
                assert!(p.risk_worst <= p.risk_alt_at_nominal_portfolio + 1e-12);
            }
        }
    }

    #[test]
    fn theta_scan_matches_calibration() {
        let m = skewed();
        let bound = worst_case_bound(&m, Variant::General);
        let thetas: Vec<f64> = (0..=10).map(|i| -0.3 * bound + 0.09 * bound * i as f64).collect();
        let scan = frontier_theta_scan(&m, &thetas, Variant::General).unwrap();
        for p in &scan {
            let dir = if p.theta < 0.0 { Direction::Best } else { Direction::Worst };
            let theta = calibrate_theta_only(&m, Variant::General, p.eta, dir).unwrap();
            let v = optimal_value(&m, Variant::General, theta).unwrap();
            let scanned = if dir == Direction::Worst { p.risk_worst } else { p.risk_best };
            assert!((v - scanned).abs() < 1e-8);
        }
        assert!(scan.windows(2).all(|w| w[0].eta <= w[1].eta));
    }

    #[test]
    fn ranges() {
        assert_eq!(default_rho_grid().len(), 41);
        assert_eq!(default_k_grid().len(), 31);
        assert!((default_k_grid().last().unwrap() - 1.32).abs() < 1e-12);
        assert_eq!(inclusive_range(0.0, 0.25, 0.01).unwrap().len(), 26);
        assert!(inclusive_range(1.0, 0.0, 0.1).is_err());
    }

    #[test]
    fn perturbation_scan_reference() {
        let spec = SymmetricModelSpec::reference();
        let model = expand_symmetric(&spec, 1.0).unwrap();
        let etas = inclusive_range(0.0, 0.25, 0.01).unwrap();
        let thetas = joint_theta_grid(&model, &etas).unwrap();
        let scan = perturbation_scan(&spec, 1.0, &thetas, &default_rho_grid(), &default_k_grid()).unwrap();
        assert!(scan.joint_max_gap < 1e-10);
        assert_eq!(scan.endpoint_gaps.len(), 4);
        assert!(scan.endpoint_gaps.iter().all(|g| g.gap > 0.0));
        let at_zero = scan.points.iter().find(|p| p.curve == Curve::Joint && p.param_value == 0.0).unwrap();
        assert_eq!(at_zero.entropy, 0.0);
        assert_relative_eq!(at_zero.risk_value, -0.05125, epsilon = 1e-15);
    }

    #[test]
    fn perturbation_rejects_invalid_models() {
        let spec = SymmetricModelSpec::reference();
        let err = perturbation_scan(&spec, 1.0, &[], &[1.2], &[1.0]).unwrap_err();
        assert!(matches!(err, Error::PerturbedModelInvalid { .. }));
    }
}
