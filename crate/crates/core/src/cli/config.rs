use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::CliError;
use crate::calibration::inclusive_range;
use crate::market_model::{expand_symmetric, noisy_symmetric_model, MarketModel, SymmetricModelSpec};
use crate::robust::{Direction, Variant};

/// Either an explicit list or a `start:stop:step` string.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum GridSpec {
    List(Vec<f64>),
    Range(String),
}

impl GridSpec {
    pub fn resolve(&self, what: &str) -> Result<Vec<f64>, CliError> {
        let grid = match self {
            GridSpec::List(v) => v.clone(),
            GridSpec::Range(s) => parse_range(s).map_err(|e| CliError::Config(format!("{what}: {e}")))?,
        };
        if grid.is_empty() {
            return Err(CliError::Config(format!("{what} is empty")));
        }
        if grid.iter().any(|v| !v.is_finite()) {
            return Err(CliError::Config(format!("{what} has a non-finite entry")));
        }
        if let Some(w) = grid.windows(2).find(|w| w[1] <= w[0]) {
            return Err(CliError::Config(format!("{what} must be strictly increasing ({} then {})", w[0], w[1])));
        }
        Ok(grid)
    }
}

/// Parses `start:stop:step` into an inclusive grid.
pub fn parse_range(s: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(format!("expected start:stop:step, got '{s}'"));
    }
    let mut vals = [0.0; 3];
    for (v, p) in vals.iter_mut().zip(&parts) {
        *v = p.trim().parse().map_err(|_| format!("'{p}' is not a number"))?;
    }
    inclusive_range(vals[0], vals[1], vals[2]).map_err(|e| e.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum DirectionChoice {
    Worst,
    Best,
    Both,
}

impl DirectionChoice {
    pub fn directions(self) -> Vec<Direction> {
        match self {
            DirectionChoice::Worst => vec![Direction::Worst],
            DirectionChoice::Best => vec![Direction::Best],
            DirectionChoice::Both => vec![Direction::Worst, Direction::Best],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SymmetricSource {
    pub n: usize,
    pub sigma2: f64,
    pub rho: f64,
    pub mu: f64,
    /// When set, means become `μ(1 + xᵢ)` with standard normal `xᵢ`.
    #[serde(default)]
    pub mean_noise_seed: Option<u64>,
}

impl SymmetricSource {
    pub fn spec(&self) -> SymmetricModelSpec {
        SymmetricModelSpec { n: self.n, mu_scalar: self.mu, sigma2: self.sigma2, rho: self.rho }
    }
}

/// A single JSON run configuration. Fields left out fall back to the
/// subcommand defaults; command-line flags override what is set here.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub gamma: Option<f64>,
    pub mu: Option<Vec<f64>>,
    pub sigma: Option<Vec<Vec<f64>>>,
    pub symmetric: Option<SymmetricSource>,
    pub mu_csv: Option<PathBuf>,
    pub sigma_csv: Option<PathBuf>,
    pub eta: Option<f64>,
    pub eta_grid: Option<GridSpec>,
    pub theta_grid: Option<GridSpec>,
    pub rho_grid: Option<GridSpec>,
    pub k_grid: Option<GridSpec>,
    pub variant: Option<Variant>,
    pub direction: Option<DirectionChoice>,
    pub seed: Option<u64>,
    pub mc_samples: Option<usize>,
    pub mc_theta_ratios: Option<Vec<f64>>,
    pub verify_models: Option<usize>,
    pub gd_iterations: Option<usize>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

pub enum ModelSource<'a> {
    Dense { mu: &'a [f64], sigma: &'a [Vec<f64>] },
    Symmetric(SymmetricSource),
    Csv { mu: PathBuf, sigma: PathBuf },
}

impl RunConfig {
    /// Ten-asset equicorrelated model with `γ = 1`, used when no config is given.
    pub fn reference() -> Self {
        let spec = SymmetricModelSpec::reference();
        Self {
            gamma: Some(1.0),
            symmetric: Some(SymmetricSource {
                n: spec.n,
                sigma2: spec.sigma2,
                rho: spec.rho,
                mu: spec.mu_scalar,
                mean_noise_seed: None,
            }),
            ..Default::default()
        }
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: RunConfig =
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("config {}: {e}", path.display())))?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn model_source(&self) -> Result<ModelSource<'_>, CliError> {
        let dense = self.mu.is_some() || self.sigma.is_some();
        let csv = self.mu_csv.is_some() || self.sigma_csv.is_some();
        let count = usize::from(dense) + usize::from(csv) + usize::from(self.symmetric.is_some());
        if count != 1 {
            return Err(CliError::Config(format!(
                "exactly one model source is required (mu+sigma, symmetric, or mu_csv+sigma_csv); found {count}"
            )));
        }
        if let Some(s) = self.symmetric {
            return Ok(ModelSource::Symmetric(s));
        }
        if dense {
            return match (&self.mu, &self.sigma) {
                (Some(mu), Some(sigma)) => Ok(ModelSource::Dense { mu, sigma }),
                _ => Err(CliError::Config("dense model needs both mu and sigma".into())),
            };
        }
        match (&self.mu_csv, &self.sigma_csv) {
            (Some(mu), Some(sigma)) => {
                Ok(ModelSource::Csv { mu: self.base_dir.join(mu), sigma: self.base_dir.join(sigma) })
            }
            _ => Err(CliError::Config("CSV model needs both mu_csv and sigma_csv".into())),
        }
    }

    pub fn gamma(&self) -> Result<f64, CliError> {
        self.gamma.ok_or_else(|| CliError::Config("gamma is required".into()))
    }

    pub fn build_model(&self) -> Result<MarketModel, CliError> {
        let gamma = self.gamma()?;
        let model = match self.model_source()? {
            ModelSource::Dense { mu, sigma } => MarketModel::from_rows(mu, sigma, gamma),
            ModelSource::Symmetric(s) => match s.mean_noise_seed {
                Some(seed) => noisy_symmetric_model(&s.spec(), gamma, seed),
                None => expand_symmetric(&s.spec(), gamma),
            },
            ModelSource::Csv { mu, sigma } => {
                let mu = read_vector_csv(&mu)?;
                let sigma = read_matrix_csv(&sigma)?;
                MarketModel::from_rows(&mu, &sigma, gamma)
            }
        };
        model.map_err(|e| CliError::Config(format!("invalid model: {e}")))
    }
}

fn read_rows(path: &Path) -> Result<Vec<Vec<f64>>, CliError> {
    let name = path.display();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Io(format!("cannot read {name}: {e}")))?;
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| CliError::Config(format!("{name} row {row}: {e}")))?;
        let values = record
            .iter()
            .enumerate()
            .map(|(j, field)| {
                field.parse::<f64>().map_err(|_| {
                    CliError::Config(format!("{name} row {row}, column {}: '{field}' is not a number", j + 1))
                })
            })
            .collect::<Result<Vec<f64>, _>>()?;
        rows.push(values);
    }
    if rows.is_empty() {
        return Err(CliError::Config(format!("{name} is empty")));
    }
    Ok(rows)
}

/// A column of values or a single row.
pub fn read_vector_csv(path: &Path) -> Result<Vec<f64>, CliError> {
    let rows = read_rows(path)?;
    if rows.len() == 1 {
        return Ok(rows.into_iter().next().unwrap_or_default());
    }
    match rows.iter().position(|r| r.len() != 1) {
        Some(i) => Err(CliError::Config(format!(
            "{} row {}: expected one value per row, found {}",
            path.display(),
            i + 1,
            rows[i].len()
        ))),
        None => Ok(rows.into_iter().map(|r| r[0]).collect()),
    }
}

/// A square matrix, one row per line.
pub fn read_matrix_csv(path: &Path) -> Result<Vec<Vec<f64>>, CliError> {
    let rows = read_rows(path)?;
    let n = rows.len();
    if let Some(i) = rows.iter().position(|r| r.len() != n) {
        return Err(CliError::Config(format!(
            "{} row {}: expected {n} values, found {}",
            path.display(),
            i + 1,
            rows[i].len()
        )));
    }
    Ok(rows)
}

/// Dense model document; a valid config on its own.
#[derive(Debug, Clone, Serialize)]
pub struct ModelDocument {
    pub gamma: f64,
    pub mu: Vec<f64>,
    pub sigma: Vec<Vec<f64>>,
}

impl ModelDocument {
    pub fn from_model(model: &MarketModel) -> Self {
        let n = model.n();
        Self {
            gamma: model.gamma(),
            mu: model.mu().iter().copied().collect(),
            sigma: (0..n).map(|i| (0..n).map(|j| model.sigma()[(i, j)]).collect()).collect(),
        }
    }
}
