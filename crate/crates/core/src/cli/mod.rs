//! Command-line front end: JSON config in, CSV or JSON out.

mod config;
mod output;
mod verify;

pub use config::{parse_range, DirectionChoice, GridSpec, ModelDocument, RunConfig, SymmetricSource};
pub use output::sig12;
pub use verify::{render_table, run_suite, CheckRow, VerifySettings};

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::calibration::{
    calibrate_theta_only, default_k_grid, default_rho_grid, frontier, frontier_theta_scan, joint_theta_grid,
    perturbation_scan, solution_at, RobustSolution,
};
use crate::error::Error;
use crate::market_model::MarketModel;
use crate::oracle::{gd_trace, Constraint, GDOptions};
use crate::robust::{Direction, Variant};

const EXIT_CODES: &str = "Exit codes:
  0  success
  1  configuration or usage error (bad JSON, invalid model, malformed CSV)
  2  domain error (θ or η outside the admissible region)
  3  I/O error
  4  verification failure";

const DEFAULT_ETA_GRID: &str = "0:0.25:0.01";
const DEFAULT_MC_SAMPLES: usize = 200_000;
const DEFAULT_VERIFY_MODELS: usize = 9;
const DEFAULT_MC_RATIOS: [f64; 2] = [0.05, 0.25];

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Domain(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Verification(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Domain(_) => 2,
            CliError::Io(_) => 3,
            CliError::Verification(_) => 4,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        if e.is_domain() {
            CliError::Domain(e.to_string())
        } else {
            CliError::Config(e.to_string())
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "robust-mv",
    version,
    about = "Robust mean-variance portfolios under Kullback-Leibler model risk",
    after_help = EXIT_CODES
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// JSON run configuration; defaults to the 10-asset equicorrelated model with γ = 1.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output file; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Target relative entropy.
    #[arg(long)]
    pub eta: Option<f64>,
    /// Entropy grid as start:stop:step.
    #[arg(long, value_parser = parse_grid, allow_hyphen_values = true)]
    pub eta_grid: Option<Grid>,
    #[arg(long, value_parser = parse_variant)]
    pub variant: Option<Variant>,
    #[arg(long, value_enum)]
    pub direction: Option<DirectionChoice>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Calibrate θ for one η and print the robust solution as JSON.
    Solve(Common),
    /// Worst, best and nominal risk values along an η (or θ) grid, as CSV.
    Frontier {
        #[command(flatten)]
        common: Common,
        /// θ grid as start:stop:step; replaces the η grid.
        #[arg(long, value_parser = parse_grid, allow_hyphen_values = true)]
        theta_grid: Option<Grid>,
    },
    /// Single-parameter and joint perturbations of a symmetric model, as CSV.
    Perturb {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_parser = parse_grid, allow_hyphen_values = true)]
        rho_grid: Option<Grid>,
        #[arg(long, value_parser = parse_grid, allow_hyphen_values = true)]
        k_grid: Option<Grid>,
    },
    /// Check the closed forms against the numerical oracles.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Monte Carlo samples per case.
        #[arg(long)]
        mc_samples: Option<usize>,
        /// Number of random models besides the configured one.
        #[arg(long)]
        models: Option<usize>,
    },
    /// Gradient-descent trajectory split by eigendirection, as CSV.
    GdDemo {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        iterations: Option<usize>,
        /// Keep iterates on the budget plane instead of fixing the multiplier.
        #[arg(long)]
        plane: bool,
    },
    /// Write the configured model as a dense JSON config.
    ExportModel(Common),
}

/// A `start:stop:step` flag value.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid(pub Vec<f64>);

fn parse_grid(s: &str) -> Result<Grid, String> {
    parse_range(s).map(Grid)
}

fn parse_variant(s: &str) -> Result<Variant, String> {
    Variant::ALL
        .into_iter()
        .find(|v| v.name() == s)
        .ok_or_else(|| format!("expected one of general, fixed-mean, min-variance; got '{s}'"))
}

/// Config file merged with command-line overrides.
struct Resolved {
    cfg: RunConfig,
    out: Option<PathBuf>,
}

impl Resolved {
    fn new(common: &Common) -> Result<Self, CliError> {
        let mut cfg = match &common.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::reference(),
        };
        if let Some(v) = common.seed {
            cfg.seed = Some(v);
        }
        if let Some(v) = common.eta {
            cfg.eta = Some(v);
        }
        if let Some(v) = &common.eta_grid {
            cfg.eta_grid = Some(GridSpec::List(v.0.clone()));
        }
        if let Some(v) = common.variant {
            cfg.variant = Some(v);
        }
        if let Some(v) = common.direction {
            cfg.direction = Some(v);
        }
        Ok(Self { cfg, out: common.out.clone() })
    }

    fn model(&self) -> Result<MarketModel, CliError> {
        self.cfg.build_model()
    }

    fn eta(&self) -> Result<f64, CliError> {
        let eta = self.cfg.eta.unwrap_or(0.0);
        if !(eta >= 0.0 && eta.is_finite()) {
            return Err(CliError::Config(format!("eta must be finite and non-negative, got {eta}")));
        }
        Ok(eta)
    }

    fn eta_grid(&self) -> Result<Vec<f64>, CliError> {
        let grid = match &self.cfg.eta_grid {
            Some(g) => g.resolve("eta_grid")?,
            None => GridSpec::Range(DEFAULT_ETA_GRID.into()).resolve("eta_grid")?,
        };
        if grid[0] < 0.0 {
            return Err(CliError::Config("eta_grid entries must be non-negative".into()));
        }
        Ok(grid)
    }

    fn variant(&self, default: Variant) -> Variant {
        self.cfg.variant.unwrap_or(default)
    }

    fn directions(&self, default: DirectionChoice) -> Vec<Direction> {
        self.cfg.direction.unwrap_or(default).directions()
    }

    fn seed(&self) -> u64 {
        self.cfg.seed.unwrap_or(0)
    }

    fn emit(&self, bytes: &[u8]) -> Result<(), CliError> {
        output::emit(self.out.as_deref(), bytes)
    }
}

fn json_bytes<T: serde::Serialize>(value: &T) -> Result<Vec<u8>, CliError> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn cmd_solve(common: &Common) -> Result<(), CliError> {
    let r = Resolved::new(common)?;
    let model = r.model()?;
    let eta = r.eta()?;
    let variant = r.variant(Variant::General);
    let solutions = r
        .directions(DirectionChoice::Worst)
        .into_iter()
        .map(|dir| {
            let theta = calibrate_theta_only(&model, variant, eta, dir)?;
            solution_at(&model, variant, dir, theta)
        })
        .collect::<Result<Vec<RobustSolution>, Error>>()?;
    let bytes = match solutions.as_slice() {
        [one] => json_bytes(one)?,
        many => json_bytes(&many)?,
    };
    r.emit(&bytes)
}

fn cmd_frontier(common: &Common, theta_grid: Option<Grid>) -> Result<(), CliError> {
    let r = Resolved::new(common)?;
    let model = r.model()?;
    let variant = r.variant(Variant::FixedMean);
    let theta_grid = match theta_grid {
        Some(g) => Some(g.0),
        None => r.cfg.theta_grid.as_ref().map(|g| g.resolve("theta_grid")).transpose()?,
    };
    let points = match theta_grid {
        Some(grid) => frontier_theta_scan(&model, &grid, variant)?,
        None => frontier(&model, &r.eta_grid()?, variant, &r.directions(DirectionChoice::Both))?,
    };
    let rows: Vec<Vec<String>> = points
        .iter()
        .map(|p| {
            [
                p.eta,
                p.theta,
                p.risk_worst,
                p.risk_best,
                p.risk_nominal,
                p.risk_nominal_at_robust,
                p.risk_alt_at_nominal_portfolio,
            ]
            .into_iter()
            .map(sig12)
            .collect()
        })
        .collect();
    let header =
        ["eta", "theta", "risk_worst", "risk_best", "risk_nominal", "risk_nominal_at_robust", "risk_alt_at_nominal"];
    r.emit(&output::csv_bytes(&header, &rows)?)
}

fn cmd_perturb(common: &Common, rho_grid: Option<Grid>, k_grid: Option<Grid>) -> Result<(), CliError> {
    let r = Resolved::new(common)?;
    let source = match r.cfg.model_source()? {
        config::ModelSource::Symmetric(s) if s.mean_noise_seed.is_none() => s,
        _ => return Err(CliError::Config("perturb needs a symmetric model source without mean noise".into())),
    };
    let gamma = r.cfg.gamma()?;
    let spec = source.spec();
    let model = r.model()?;
    let grid_or = |flag: Option<Grid>, cfg: &Option<GridSpec>, name: &str, default: fn() -> Vec<f64>| match (flag, cfg)
    {
        (Some(g), _) => Ok(g.0),
        (None, Some(g)) => g.resolve(name),
        (None, None) => Ok(default()),
    };
    let rho = grid_or(rho_grid, &r.cfg.rho_grid, "rho_grid", default_rho_grid)?;
    let k = grid_or(k_grid, &r.cfg.k_grid, "k_grid", default_k_grid)?;
    let thetas = joint_theta_grid(&model, &r.eta_grid()?)?;
    let scan = perturbation_scan(&spec, gamma, &thetas, &rho, &k)?;
    eprintln!("joint curve max gap to analytic frontier: {:.3e}", scan.joint_max_gap);
    for g in &scan.endpoint_gaps {
        eprintln!("{} endpoint {} (entropy {:.6}): gap {:.3e}", g.curve.name(), sig12(g.param_value), g.entropy, g.gap);
    }
    let rows: Vec<Vec<String>> = scan
        .points
        .iter()
        .map(|p| vec![p.curve.name().to_string(), sig12(p.param_value), sig12(p.entropy), sig12(p.risk_value)])
        .collect();
    r.emit(&output::csv_bytes(&["curve", "param_value", "entropy", "risk_value"], &rows)?)
}

fn cmd_verify(common: &Common, mc_samples: Option<usize>, models: Option<usize>) -> Result<(), CliError> {
    let r = Resolved::new(common)?;
    let model = r.model()?;
    let settings = VerifySettings {
        seed: r.seed(),
        random_models: models.or(r.cfg.verify_models).unwrap_or(DEFAULT_VERIFY_MODELS),
        mc_samples: mc_samples.or(r.cfg.mc_samples).unwrap_or(DEFAULT_MC_SAMPLES),
        mc_theta_ratios: r.cfg.mc_theta_ratios.clone().unwrap_or_else(|| DEFAULT_MC_RATIOS.to_vec()),
        eta: r.cfg.eta.unwrap_or(0.1),
    };
    if settings.mc_samples < 64 {
        return Err(CliError::Config("mc_samples must be at least 64".into()));
    }
    if settings.mc_theta_ratios.iter().any(|x| !(x.abs() < 1.0)) {
        return Err(CliError::Config("mc_theta_ratios entries must lie in (-1, 1)".into()));
    }
    let rows = run_suite(&model, &settings);
    let table = render_table(&rows);
    r.emit(table.as_bytes())?;
    let failed = rows.iter().filter(|row| !row.passed()).count();
    if failed > 0 {
        return Err(CliError::Verification(format!("{failed} check(s) failed")));
    }
    Ok(())
}

fn cmd_gd_demo(common: &Common, iterations: Option<usize>, plane: bool) -> Result<(), CliError> {
    let r = Resolved::new(common)?;
    let model = r.model()?;
    let variant = r.variant(Variant::General);
    let dir = r.directions(DirectionChoice::Worst)[0];
    let theta = calibrate_theta_only(&model, variant, r.eta()?, dir)?;
    let opts = GDOptions {
        max_iter: iterations.or(r.cfg.gd_iterations).unwrap_or(GDOptions::default().max_iter),
        constraint: if plane { Constraint::Plane } else { Constraint::FixedMultiplier },
        seed: r.seed(),
        ..Default::default()
    };
    let trace = gd_trace(&model, theta, variant, &opts)?;
    let fmt_rate = |x: Option<f64>| x.map_or("n/a".to_string(), |v| format!("{v:.4}"));
    eprintln!(
        "θ = {theta}, step = {:.4e}, per-iteration log-rate λ₁: {}, λ₂: {}",
        trace.step_size,
        fmt_rate(trace.rate_lambda1()),
        fmt_rate(trace.rate_lambda2())
    );
    let rows: Vec<Vec<String>> = (0..trace.iterates.len())
        .map(|i| {
            vec![
                i.to_string(),
                sig12(trace.objective_values[i]),
                sig12(trace.err_lambda1[i]),
                sig12(trace.err_lambda2[i]),
            ]
        })
        .collect();
    r.emit(&output::csv_bytes(&["iter", "objective", "err_lambda1_subspace", "err_lambda2_subspace"], &rows)?)
}

fn cmd_export_model(common: &Common) -> Result<(), CliError> {
    let r = Resolved::new(common)?;
    let model = r.model()?;
    r.emit(&json_bytes(&ModelDocument::from_model(&model))?)
}

/// Parses `args` and runs the subcommand, returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let result = match &cli.command {
        Command::Solve(c) => cmd_solve(c),
        Command::Frontier { common, theta_grid } => cmd_frontier(common, theta_grid.clone()),
        Command::Perturb { common, rho_grid, k_grid } => cmd_perturb(common, rho_grid.clone(), k_grid.clone()),
        Command::Verify { common, mc_samples, models } => cmd_verify(common, *mc_samples, *models),
        Command::GdDemo { common, iterations, plane } => cmd_gd_demo(common, *iterations, *plane),
        Command::ExportModel(c) => cmd_export_model(c),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn library_errors_map_to_exit_codes() {
        assert_eq!(CliError::from(Error::EtaUnreachable { eta: 1.0, max_entropy: 0.5 }).exit_code(), 2);
        assert_eq!(CliError::from(Error::AsymmetricCovariance { max_asymmetry: 1.0 }).exit_code(), 1);
    }

    #[test]
    fn help_and_usage_codes() {
        assert_eq!(run(["robust-mv", "--help"]), 0);
        assert_eq!(run(["robust-mv", "--version"]), 0);
        assert_eq!(run(["robust-mv", "solve", "--variant", "bogus"]), 1);
        assert_eq!(run(["robust-mv", "frontier", "--eta-grid", "0:1"]), 1);
        assert_eq!(run(["robust-mv"]), 1);
    }

    #[test]
    fn help_lists_exit_codes() {
        use clap::CommandFactory;
        let help = Cli::command().render_long_help().to_string();
        assert!(help.contains("4  verification failure"));
    }
}
