//! Command-line driver: classification, simulation, experiments and fitting.

pub mod config;
pub mod error;
pub mod io;
pub mod manifest;

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use smoothconf_core::experiments::{run_spatial_experiment, run_timeseries_experiment};
use smoothconf_core::{
    classify_limit, fit_ml, run_application_pipeline, simulate_gp, standardize_per_replicate, BivariateData,
    EstimationResult, ExperimentTable, FitConfig, FreeParams, Locations, MaternParams, ObservationMode,
    RegressionDataset, Replicate,
};

use crate::config::{load_config, Family, LoadedConfig};
use crate::error::{CliError, CliResult};
use crate::io::{field_to_csv, read_locations, read_long_data, write_atomic, write_table};
use crate::manifest::{unix_now, RunManifest};

/// Environment variable holding the worker thread count.
pub const THREADS_ENV: &str = "SMOOTHCONF_THREADS";

#[derive(Debug, Parser)]
#[command(name = "smoothconf", version, about = "Regression under smoothed spatial covariates")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Classify the limit of the estimated coefficient.
    Classify {
        /// Sobolev index of the covariate.
        #[arg(long)]
        p: f64,
        /// Covariance decay exponent.
        #[arg(long)]
        alpha: f64,
        /// Smoothing exponent (negative means smoothing).
        #[arg(long, allow_hyphen_values = true)]
        gamma: f64,
        #[arg(long, value_enum, default_value = "point")]
        obs: Obs,
    },
    /// Draw one realization of a Matérn field.
    Simulate(SimulateArgs),
    /// Run a Monte Carlo experiment or the data pipeline.
    #[command(subcommand)]
    Experiment(ExperimentCommand),
    /// Maximum likelihood regression of one variable on others.
    Fit(FitArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Obs {
    Point,
    Eigen,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// CSV of site_id,x,y.
    #[arg(long, conflicts_with = "grid")]
    locations: Option<PathBuf>,
    /// Number of equispaced points on [0, 1].
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    kappa: f64,
    #[arg(long)]
    sigma: f64,
    #[arg(long)]
    nu: f64,
    #[arg(long, default_value_t = 0.0)]
    nugget: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides `base_seed` from the config.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Debug, Subcommand)]
enum ExperimentCommand {
    Timeseries(RunArgs),
    Spatial {
        #[command(flatten)]
        run: RunArgs,
        /// Site coordinates; synthetic sites when absent.
        #[arg(long)]
        locations: Option<PathBuf>,
    },
    Application {
        #[command(flatten)]
        run: RunArgs,
        /// Long-format data; synthetic data when absent.
        #[arg(long)]
        data: Option<PathBuf>,
        /// The two variables to use, in order.
        #[arg(long, value_delimiter = ',', num_args = 2)]
        variables: Option<Vec<String>>,
    },
}

#[derive(Debug, Args)]
struct FitArgs {
    /// Long-format data: site_id,x,y,replicate_id,variable,value.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    response: String,
    #[arg(long)]
    covariate: Vec<String>,
    #[arg(long)]
    no_intercept: bool,
    /// Standardize each variable within each replicate first.
    #[arg(long)]
    standardize: bool,
    /// Estimate a nugget as well.
    #[arg(long)]
    nugget: bool,
}

#[derive(Debug, Serialize)]
struct FitReport {
    response: String,
    terms: Vec<String>,
    #[serde(flatten)]
    result: EstimationResult,
}

/// Sizes the global thread pool from [`THREADS_ENV`], if set.
pub fn configure_threads() -> CliResult<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else { return Ok(()) };
    let threads: usize = raw
        .trim()
        .parse()
        .map_err(|_| CliError::Usage(format!("{THREADS_ENV} must be a positive integer, got {raw:?}")))?;
    if threads == 0 {
        return Err(CliError::Usage(format!("{THREADS_ENV} must be positive")));
    }
    // A pool built earlier in the process wins; that is harmless.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    Ok(())
}

/// Runs a parsed command, writing human output to `out`.
pub fn run(cli: Cli, out: &mut dyn Write) -> CliResult<()> {
    match cli.command {
        Command::Classify { p, alpha, gamma, obs } => {
            let mode = match obs {
                Obs::Point => ObservationMode::PointObservations,
                Obs::Eigen => ObservationMode::EigenbasisObservations,
            };
            let regime = classify_limit(p, alpha, gamma, mode)?;
            writeln!(out, "{regime}").map_err(io_err)
        }
        Command::Simulate(args) => simulate(args, out),
        Command::Experiment(cmd) => experiment(cmd, out),
        Command::Fit(args) => fit(args, out),
    }
}

fn io_err(e: std::io::Error) -> CliError {
    CliError::Data(e.to_string())
}

fn simulate(args: SimulateArgs, out: &mut dyn Write) -> CliResult<()> {
    let (ids, locs) = match (&args.locations, args.grid) {
        (Some(path), _) => read_locations(path)?,
        (None, Some(n)) if n >= 1 => {
            let locs = Locations::regular_grid_1d(n, 0.0, 1.0);
            ((0..n).map(|i| i.to_string()).collect(), locs)
        }
        _ => return Err(CliError::Usage("give --locations FILE or --grid N (N >= 1)".into())),
    };
    let params = MaternParams::with_nugget(args.kappa, args.sigma, args.nu, args.nugget)?;
    let values = simulate_gp(&locs, &params, args.seed)?;
    let csv = field_to_csv(&ids, &locs, &values)?;
    match args.out {
        Some(path) => write_atomic(&path, &csv),
        None => out.write_all(&csv).map_err(io_err),
    }
}

fn experiment(cmd: ExperimentCommand, out: &mut dyn Write) -> CliResult<()> {
    let started = unix_now();
    let (run, tables, loaded) = match cmd {
        ExperimentCommand::Timeseries(run) => {
            let loaded = load_config(&run.config, Family::Timeseries, run.seed)?;
            let table = run_timeseries_experiment(&loaded.config)?;
            (run, vec![table], loaded)
        }
        ExperimentCommand::Spatial { run, locations } => {
            let mut loaded = load_config(&run.config, Family::Spatial, run.seed)?;
            if let Some(path) = &locations {
                let (_, locs) = read_locations(path)?;
                loaded.config.spatial.n_sites = locs.len();
                loaded.config.spatial.locations = Some(locs);
            }
            let table = run_spatial_experiment(&loaded.config)?;
            (run, vec![table], loaded)
        }
        ExperimentCommand::Application { run, data, variables } => {
            let loaded = load_config(&run.config, Family::Application, run.seed)?;
            let data = match &data {
                Some(path) => load_bivariate(path, variables.as_deref())?,
                None => {
                    let app = &loaded.config.application;
                    smoothconf_core::experiments::synthetic_application_data(&app.synthetic, loaded.config.base_seed)?
                }
            };
            let output = run_application_pipeline(&data, &loaded.config)?;
            writeln!(
                out,
                "smoothing parameters: {} {:?}, {} {:?}",
                data.names[0], output.smoothing_params[0], data.names[1], output.smoothing_params[1]
            )
            .map_err(io_err)?;
            (run, vec![output.unsmoothed, output.smoothed], loaded)
        }
    };
    write_outputs(&run.out, &tables, &loaded, started, out)
}

fn write_outputs(
    dir: &Path,
    tables: &[ExperimentTable],
    loaded: &LoadedConfig,
    started: u64,
    out: &mut dyn Write,
) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Data(format!("cannot create {}: {e}", dir.display())))?;
    let mut outputs = Vec::new();
    for table in tables {
        let name = format!("{}.csv", table.name);
        write_table(&dir.join(&name), table)?;
        writeln!(out, "wrote {} ({} rows, {} failures)", dir.join(&name).display(), table.rows.len(), table.total_failures())
            .map_err(io_err)?;
        outputs.push(name);
    }
    let manifest = RunManifest {
        config_digest: loaded.digest.clone(),
        base_seed: loaded.config.base_seed,
        artifact_version: env!("CARGO_PKG_VERSION").to_string(),
        started_at: started,
        finished_at: unix_now(),
        outputs,
    };
    manifest.write(&dir.join("manifest.json"))
}

fn load_bivariate(path: &Path, variables: Option<&[String]>) -> CliResult<BivariateData> {
    let data = read_long_data(path)?;
    let names: Vec<String> = match variables {
        Some(v) => v.to_vec(),
        None if data.variables.len() == 2 => data.variables.iter().map(|(n, _)| n.clone()).collect(),
        None => {
            return Err(CliError::Usage(format!(
                "data has {} variables; choose two with --variables A,B",
                data.variables.len()
            )))
        }
    };
    let a = data.variable(&names[0])?.clone();
    let b = data.variable(&names[1])?.clone();
    Ok(BivariateData::new(data.locations, [names[0].clone(), names[1].clone()], [a, b])?)
}

fn fit(args: FitArgs, out: &mut dyn Write) -> CliResult<()> {
    let data = read_long_data(&args.data)?;
    let mut terms = Vec::new();
    if !args.no_intercept {
        terms.push("intercept".to_string());
    }
    terms.extend(args.covariate.iter().cloned());
    if terms.is_empty() {
        return Err(CliError::Usage("no regression terms: add --covariate or drop --no-intercept".into()));
    }

    let prepare = |name: &str| -> CliResult<Vec<Vec<f64>>> {
        let values = data.variable(name)?.clone();
        if !args.standardize {
            return Ok(values);
        }
        let n = data.locations.len();
        let mat = faer_columns(&values, n);
        let std = standardize_per_replicate(&mat)?;
        Ok((0..values.len()).map(|r| (0..n).map(|i| std[(i, r)]).collect()).collect())
    };
    let response = prepare(&args.response)?;
    let covariates: Vec<Vec<Vec<f64>>> = args.covariate.iter().map(|c| prepare(c)).collect::<CliResult<_>>()?;

    let n = data.locations.len();
    let ones = vec![1.0; n];
    let replicates = (0..response.len())
        .map(|r| {
            let mut cols: Vec<&[f64]> = Vec::new();
            if !args.no_intercept {
                cols.push(&ones);
            }
            cols.extend(covariates.iter().map(|c| c[r].as_slice()));
            Replicate::from_columns(&cols, response[r].clone())
        })
        .collect();
    let dataset = RegressionDataset::new(data.locations.clone(), replicates)?;
    let free = if args.nugget { FreeParams::ALL } else { FreeParams::MATERN };
    let result = fit_ml(&dataset, &FitConfig::with_free(free))?;
    let report = FitReport { response: args.response, terms, result };
    let json = serde_json::to_string_pretty(&report).map_err(|e| CliError::Data(e.to_string()))?;
    writeln!(out, "{json}").map_err(io_err)
}

/// `values[replicate][site]` as a sites-by-replicates matrix.
fn faer_columns(values: &[Vec<f64>], n: usize) -> smoothconf_core::Mat<f64> {
    smoothconf_core::Mat::from_fn(n, values.len(), |i, r| values[r][i])
}

/// Parses `argv`, runs the command and returns the process exit status.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("smoothconf: {e}");
        return e.exit_code();
    }
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    match run(cli, &mut lock) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("smoothconf: {e}");
            e.exit_code()
        }
    }
}
