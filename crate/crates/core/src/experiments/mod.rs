//! Reproducible Monte Carlo runners: regularly spaced time series, spatial
//! smoothness regimes, and a two-variable application pipeline.

mod application;
mod data;
mod spatial;
mod table;
mod timeseries;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::covkernel::{build_cov_matrix, CovMatrix, Locations, MaternParams};
use crate::error::{Error, Result};
use crate::optim::NelderMeadConfig;
use crate::regression::FreeParams;
use crate::smoothing::LowessConfig;

pub use application::{run_application_pipeline, synthetic_application_data, ApplicationOutput, BivariateData};
pub use data::{standardize_columns, standardize_per_replicate, synthetic_sites};
pub use spatial::{nu_key, run_spatial_experiment, spatial_regime};
pub use table::{ExperimentTable, TableRow};
pub use timeseries::run_timeseries_experiment;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    /// Known noise covariance.
    Timeseries1,
    /// Matérn parameters fitted jointly with `beta`.
    Timeseries2,
    /// As `Timeseries2` with a nugget in the data and the fitted model.
    Timeseries3,
    Spatial,
    Application,
}

/// How the smoothness of the smoothed covariate relates to the noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NuSxMode {
    EqualNu,
    NuMinusHalf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimeseriesModel {
    pub domain: (f64, f64),
    pub covariate: MaternParams,
    pub noise: MaternParams,
    /// Measurement-error standard deviation added for `Timeseries3`.
    pub nugget_sd: f64,
    pub beta: f64,
    /// Smoother that produces the covariate entering the response.
    pub truth_smoother: LowessConfig,
    /// Smoother applied by the analyst.
    pub fitted_smoother: LowessConfig,
}

impl Default for TimeseriesModel {
    fn default() -> Self {
        Self {
            domain: (0.0, 10.0),
            covariate: MaternParams { kappa: 1.0, sigma: 0.4, nu: 1.0, nugget_var: 0.0 },
            noise: MaternParams { kappa: 1.0, sigma: 0.1, nu: 1.0, nugget_var: 0.0 },
            nugget_sd: 0.01,
            beta: 1.0,
            truth_smoother: LowessConfig { span: 0.1, iterations: 3 },
            fitted_smoother: LowessConfig { span: 0.2, iterations: 3 },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpatialModel {
    /// Noise covariance; `kappa` and `sigma` are shared by both covariates.
    pub noise: MaternParams,
    pub beta: f64,
    pub nu_x_grid: Vec<f64>,
    pub nu_sx_mode: NuSxMode,
    /// Size of the synthetic site set used when no locations are supplied.
    pub n_sites: usize,
    #[serde(skip)]
    pub locations: Option<Locations>,
}

impl Default for SpatialModel {
    fn default() -> Self {
        Self {
            noise: MaternParams { kappa: 0.4, sigma: 1.3, nu: 2.0, nugget_var: 0.0 },
            beta: 1.0,
            nu_x_grid: vec![0.5, 1.0, 1.5, 2.0, 2.5, 3.0],
            nu_sx_mode: NuSxMode::EqualNu,
            n_sites: 620,
            locations: None,
        }
    }
}

/// Generator for a synthetic two-variable, multi-replicate data set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticApplication {
    pub n_sites: usize,
    pub replicates: usize,
    pub kappa: f64,
    pub sigma: f64,
    /// Smoothness of the rough variable.
    pub nu_rough: f64,
    /// Smoothness of the smoothed rough variable and of the noise.
    pub nu_smooth: f64,
    /// Coefficient of the smoothed rough variable in the smooth variable.
    pub beta: f64,
}

impl Default for SyntheticApplication {
    fn default() -> Self {
        Self { n_sites: 620, replicates: 24, kappa: 0.4, sigma: 1.3, nu_rough: 1.0, nu_smooth: 2.0, beta: -0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ApplicationModel {
    /// Sites predicted from all others when computing RMSE.
    pub holdout: usize,
    /// Covariance power applied to each variable when it is smoothed, in
    /// variable order.
    pub powers: [f64; 2],
    pub free: FreeParams,
    pub standardize: bool,
    pub rescale_smoothed: bool,
    pub synthetic: SyntheticApplication,
}

impl Default for ApplicationModel {
    fn default() -> Self {
        Self {
            holdout: 36,
            powers: [0.5, 3.0],
            free: FreeParams::MATERN,
            standardize: true,
            rescale_smoothed: true,
            synthetic: SyntheticApplication::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub n_grid: Vec<usize>,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default)]
    pub timeseries: TimeseriesModel,
    #[serde(default)]
    pub spatial: SpatialModel,
    #[serde(default)]
    pub application: ApplicationModel,
    #[serde(default = "experiment_optimizer")]
    pub optimizer: NelderMeadConfig,
}

fn default_replications() -> usize {
    10
}

/// Optimizer settings used by the runners: looser than the library default
/// because likelihoods at `n ~ 10^3` are large in absolute value.
pub fn experiment_optimizer() -> NelderMeadConfig {
    NelderMeadConfig { max_evals: 1500, f_tol: 1e-6, x_tol: 1e-4, initial_step: 0.5, restarts: 1 }
}

impl ExperimentConfig {
    /// Defaults for `kind`: `n in {128, 256, 512, 1024}` with 10 replications
    /// for the time series, `{50, 150, 300, 620}` with 100 for the spatial
    /// runner, and `{15, 50, 100, 250, 620}` for the application.
    pub fn new(kind: ExperimentKind) -> Self {
        let (n_grid, replications) = match kind {
            ExperimentKind::Timeseries1 | ExperimentKind::Timeseries2 | ExperimentKind::Timeseries3 => {
                (vec![128, 256, 512, 1024], 10)
            }
            ExperimentKind::Spatial => (vec![50, 150, 300, 620], 100),
            ExperimentKind::Application => (vec![15, 50, 100, 250, 620], 1),
        };
        Self {
            kind,
            n_grid,
            replications,
            base_seed: 0,
            timeseries: TimeseriesModel::default(),
            spatial: SpatialModel::default(),
            application: ApplicationModel::default(),
            optimizer: experiment_optimizer(),
        }
    }

    pub fn with_n_grid(mut self, n_grid: Vec<usize>) -> Self {
        self.n_grid = n_grid;
        self
    }

    pub fn with_replications(mut self, replications: usize) -> Self {
        self.replications = replications;
        self
    }

    pub fn with_seed(mut self, base_seed: u64) -> Self {
        self.base_seed = base_seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::Config("replications must be at least 1".into()));
        }
        if self.n_grid.is_empty() {
            return Err(Error::Config("n_grid must not be empty".into()));
        }
        if self.n_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("n_grid must be strictly increasing".into()));
        }
        if self.n_grid[0] < 2 {
            return Err(Error::Config("sample sizes must be at least 2".into()));
        }
        Ok(())
    }
}

/// Generator for one independent stream of a run. Streams are addressed by
/// `(tag, n, replicate)` so every cell can be reproduced on its own.
pub fn cell_rng(base_seed: u64, tag: u16, n: usize, replicate: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
    rng.set_stream(((tag as u64) << 48) | ((n as u64 & 0xFF_FFFF) << 24) | (replicate as u64 & 0xFF_FFFF));
    rng
}

pub(crate) fn normals(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

/// One draw `L z` of a zero-mean Gaussian field, `L` the Cholesky factor of
/// the Matérn covariance at `locations`.
pub fn simulate_gp(locations: &Locations, params: &MaternParams, seed: u64) -> Result<Vec<f64>> {
    let sigma = build_cov_matrix(locations, params)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    simulate_with(&sigma, &mut rng)
}

/// [`simulate_gp`] with a prebuilt covariance and caller-owned generator.
pub fn simulate_with(sigma: &CovMatrix, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    let z = normals(rng, sigma.n());
    sigma.correlate(&z)
}
