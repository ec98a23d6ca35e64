use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{project, tilt_scale};
use crate::market_model::MarketModel;
use crate::nominal::{nominal_portfolio, Portfolio};
use crate::robust::Variant;

/// Distribution of random test models: one-factor correlations, volatilities
/// and means in a realistic equity range, and `γ = √(2C)·U[γ_lo, γ_hi]`.
///
/// Scaling γ with `√C` keeps `D/γ²` moderate, which is what makes the
/// best-case branch reach entropies of 0.25 and beyond.
#[derive(Debug, Clone, Copy)]
pub struct ModelFamily {
    pub vol: (f64, f64),
    pub loading: (f64, f64),
    pub mean: f64,
    pub mean_sd: f64,
    pub gamma_factor: (f64, f64),
}

impl Default for ModelFamily {
    fn default() -> Self {
        Self { vol: (0.15, 0.35), loading: (0.0, 0.6), mean: 0.06, mean_sd: 0.01, gamma_factor: (1.0, 1.5) }
    }
}

pub fn random_model<R: Rng + ?Sized>(rng: &mut R, n: usize, family: &ModelFamily) -> MarketModel {
    let vol: Vec<f64> = (0..n).map(|_| rng.random_range(family.vol.0..family.vol.1)).collect();
    let load: Vec<f64> = (0..n).map(|_| rng.random_range(family.loading.0..family.loading.1)).collect();
    let sigma = DMatrix::from_fn(n, n, |i, j| {
        let corr = if i == j { 1.0 } else { load[i] * load[j] };
        corr * vol[i] * vol[j]
    });
    let mu = DVector::from_fn(n, |_, _| {
        let z: f64 = StandardNormal.sample(rng);
        family.mean + family.mean_sd * z
    });
    let unit = MarketModel::new(mu, sigma, 1.0).expect("one-factor covariance is positive definite");
    let gamma = (2.0 * unit.constants().c).sqrt() * rng.random_range(family.gamma_factor.0..family.gamma_factor.1);
    unit.with_gamma(gamma).expect("positive gamma")
}

/// A fully-invested portfolio near the nominal optimum and a θ with
/// `θ/θ_max(a) ∈ [lo, hi)`, where `θ_max` is the fixed-portfolio bound for the
/// variant.
pub fn random_admissible_point<R: Rng + ?Sized>(
    rng: &mut R,
    model: &MarketModel,
    variant: Variant,
    ratio: (f64, f64),
) -> (f64, Portfolio) {
    let n = model.n();
    let noise = DVector::from_fn(n, |_, _| {
        let z: f64 = StandardNormal.sample(rng);
        z
    });
    let mut weights = nominal_portfolio(model).weights + project(&noise) * (0.3 / (n as f64).sqrt());
    weights /= weights.sum();
    let a = Portfolio::from_weights(model, weights).expect("normalised weights");
    let limit = 1.0 / (tilt_scale(model, variant) * a.variance);
    (rng.random_range(ratio.0..ratio.1) * limit, a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn family_is_valid_and_seeded() {
        let mut r1 = ChaCha8Rng::seed_from_u64(5);
        let mut r2 = ChaCha8Rng::seed_from_u64(5);
        for n in [2, 5, 10] {
            let a = random_model(&mut r1, n, &ModelFamily::default());
            let b = random_model(&mut r2, n, &ModelFamily::default());
            assert_eq!(a.sigma(), b.sigma());
            assert_eq!(a.n(), n);
            assert!(a.gamma() >= (2.0 * a.constants().c).sqrt());
        }
    }

    #[test]
    fn admissible_points_are_inside() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let m = random_model(&mut rng, 5, &ModelFamily::default());
        for variant in Variant::ALL {
            let (theta, a) = random_admissible_point(&mut rng, &m, variant, (-1.0, 0.9));
            assert!(theta * tilt_scale(&m, variant) * a.variance < 0.9);
            assert!((a.weights.sum() - 1.0).abs() < 1e-12);
        }
    }
}
