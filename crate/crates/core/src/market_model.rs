//! Nominal Gaussian market `X ~ N(μ, Σ)` with risk aversion `γ`.
//!
//! A [`MarketModel`] is validated once on construction and then immutable:
//! the Cholesky factor of `Σ` and the vectors `Σ⁻¹1`, `Σ⁻¹μ` and the
//! zero-sum "excess" fund `Σ⁻¹(μ − (A/C)1)` are cached, so every closed form
//! downstream only needs dot products.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

/// Largest tolerated `|Σij − Σji|`. Inputs failing it are rejected rather
/// than symmetrised.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Merton's scalar summaries of the model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MertonConstants {
    /// `1ᵀΣ⁻¹μ`
    pub a: f64,
    /// `μᵀΣ⁻¹μ`
    pub b: f64,
    /// `1ᵀΣ⁻¹1`
    pub c: f64,
    /// `BC − A²`, clamped at zero.
    pub d: f64,
}

#[derive(Debug, Clone)]
pub struct MarketModel {
    mu: DVector<f64>,
    sigma: DMatrix<f64>,
    gamma: f64,
    chol: Cholesky<f64, Dyn>,
    constants: MertonConstants,
    inv_one: DVector<f64>,
    inv_mu: DVector<f64>,
    excess: DVector<f64>,
}

impl MarketModel {
    /// Validates `(μ, Σ, γ)` and caches the factorisation.
    pub fn new(mu: DVector<f64>, sigma: DMatrix<f64>, gamma: f64) -> Result<Self> {
        let n = sigma.nrows();
        if sigma.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, got: sigma.ncols() });
        }
        if mu.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: mu.len() });
        }
        if n < 2 {
            return Err(Error::TooFewAssets(n));
        }
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::NonPositiveGamma(gamma));
        }
        if mu.iter().chain(sigma.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite entry in μ or Σ".into()));
        }
        let mut max_asymmetry = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                max_asymmetry = max_asymmetry.max((sigma[(i, j)] - sigma[(j, i)]).abs());
            }
        }
        if max_asymmetry > SYMMETRY_TOL {
            return Err(Error::AsymmetricCovariance { max_asymmetry });
        }
        if let Some(index) = (0..n).find(|&i| sigma[(i, i)] <= 0.0) {
            return Err(Error::NonPositiveDiagonal { index });
        }
        let chol = match Cholesky::new(sigma.clone()) {
            Some(c) => c,
            None => {
                let pivot = first_nonpositive_pivot(&sigma).unwrap_or(0);
                return Err(Error::NotPositiveDefinite { pivot });
            }
        };

        let ones = DVector::from_element(n, 1.0);
        let inv_one = chol.solve(&ones);
        let inv_mu = chol.solve(&mu);
        let a = ones.dot(&inv_mu);
        let b = mu.dot(&inv_mu);
        let c = ones.dot(&inv_one);
        // D = C·(μ − m1)ᵀΣ⁻¹(μ − m1) with m = A/C; equal to BC − A² without
        // the cancellation.
        let centred = mu.map(|v| v - a / c);
        let excess = chol.solve(&centred);
        let d = (c * centred.dot(&excess)).max(0.0);

        Ok(Self { mu, sigma, gamma, chol, constants: MertonConstants { a, b, c, d }, inv_one, inv_mu, excess })
    }

    /// Builds a model from row-major data.
    pub fn from_rows(mu: &[f64], sigma: &[Vec<f64>], gamma: f64) -> Result<Self> {
        let n = mu.len();
        if sigma.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: sigma.len() });
        }
        if let Some(row) = sigma.iter().find(|r| r.len() != n) {
            return Err(Error::DimensionMismatch { expected: n, got: row.len() });
        }
        let sigma = DMatrix::from_fn(n, n, |i, j| sigma[i][j]);
        Self::new(DVector::from_column_slice(mu), sigma, gamma)
    }

    /// Same Σ and μ with a different risk aversion.
    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::NonPositiveGamma(gamma));
        }
        let mut m = self.clone();
        m.gamma = gamma;
        Ok(m)
    }

    pub fn n(&self) -> usize {
        self.mu.len()
    }

    pub fn mu(&self) -> &DVector<f64> {
        &self.mu
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn constants(&self) -> MertonConstants {
        self.constants
    }

    pub fn cholesky(&self) -> &Cholesky<f64, Dyn> {
        &self.chol
    }

    /// `Σ⁻¹ v` through the cached factor.
    pub fn solve(&self, v: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(v)
    }

    /// `Σ⁻¹1`
    pub fn inv_one(&self) -> &DVector<f64> {
        &self.inv_one
    }

    /// `Σ⁻¹μ`
    pub fn inv_mu(&self) -> &DVector<f64> {
        &self.inv_mu
    }

    /// Zero-sum fund `Σ⁻¹(μ − (A/C)1)`. Every two-fund portfolio is
    /// `Σ⁻¹1/C + excess/Γ`; its variance contribution is `D/(CΓ²)`.
    pub fn excess_fund(&self) -> &DVector<f64> {
        &self.excess
    }

    /// `aᵀΣa`
    pub fn quad(&self, a: &DVector<f64>) -> f64 {
        a.dot(&(&self.sigma * a))
    }
}

/// The Merton constants of a validated model.
pub fn merton_constants(model: &MarketModel) -> MertonConstants {
    model.constants()
}

fn first_nonpositive_pivot(m: &DMatrix<f64>) -> Option<usize> {
    let n = m.nrows();
    let mut l = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut diag = m[(j, j)];
        for k in 0..j {
            diag -= l[(j, k)] * l[(j, k)];
        }
        if diag <= 0.0 || !diag.is_finite() {
            return Some(j);
        }
        let ljj = diag.sqrt();
        l[(j, j)] = ljj;
        for i in (j + 1)..n {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    None
}

/// Equicorrelated model: `Σ = σ²[(1 − ρ)I + ρ11ᵀ]`, `μ = μ·1`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SymmetricModelSpec {
    pub n: usize,
    #[serde(rename = "mu")]
    pub mu_scalar: f64,
    pub sigma2: f64,
    pub rho: f64,
}

impl SymmetricModelSpec {
    /// Reference example: ten assets, `σ² = 0.3`, `ρ = 0.25`, `μ = 0.1`.
    pub fn reference() -> Self {
        Self { n: 10, mu_scalar: 0.1, sigma2: 0.3, rho: 0.25 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::TooFewAssets(self.n));
        }
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return Err(Error::InvalidParameter(format!("sigma2 must be positive, got {}", self.sigma2)));
        }
        if !self.mu_scalar.is_finite() {
            return Err(Error::InvalidParameter("mu must be finite".into()));
        }
        let lower = -1.0 / (self.n as f64 - 1.0);
        if !(self.rho > lower && self.rho < 1.0) {
            return Err(Error::RhoOutOfRange { rho: self.rho, lower, n: self.n });
        }
        Ok(())
    }

    /// `(λ₁, λ₂)` of the covariance; λ₁ has eigenvector `1`.
    pub fn eigenvalues(&self) -> (f64, f64) {
        symmetric_eigenvalues(self.sigma2, self.sigma2 * self.rho, self.n)
    }

    pub fn covariance(&self) -> DMatrix<f64> {
        let off = self.sigma2 * self.rho;
        DMatrix::from_fn(self.n, self.n, |i, j| if i == j { self.sigma2 } else { off })
    }
}

/// Dense model from a symmetric spec.
pub fn expand_symmetric(spec: &SymmetricModelSpec, gamma: f64) -> Result<MarketModel> {
    spec.validate()?;
    let mu = DVector::from_element(spec.n, spec.mu_scalar);
    MarketModel::new(mu, spec.covariance(), gamma)
}

/// Default seed for the non-symmetric example.
pub const DEFAULT_MEAN_NOISE_SEED: u64 = 7;

/// Symmetric covariance with means `μᵢ = μ(1 + xᵢ)`, `xᵢ ~ N(0, 1)` drawn from
/// a ChaCha8 stream seeded with `seed`.
pub fn noisy_symmetric_model(spec: &SymmetricModelSpec, gamma: f64, seed: u64) -> Result<MarketModel> {
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};
    spec.validate()?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mu = DVector::from_fn(spec.n, |_, _| {
        let x: f64 = StandardNormal.sample(&mut rng);
        spec.mu_scalar * (1.0 + x)
    });
    MarketModel::new(mu, spec.covariance(), gamma)
}

/// Eigenvalues of the n×n matrix with `c` on the diagonal and `d` elsewhere:
/// `λ₁ = c + (n − 1)d` (once, eigenvector `1`) and `λ₂ = c − d` (n − 1 times).
pub fn symmetric_eigenvalues(c: f64, d: f64, n: usize) -> (f64, f64) {
    debug_assert!(n >= 2);
    (d * (n as f64 - 1.0) + c, c - d)
}
