//! Gaussian-process regression with Matérn covariances, spectral limit
//! computations for misspecified covariate smoothness, and simulation
//! runners.

pub mod bessel;
pub mod covkernel;
pub mod error;
pub mod experiments;
pub mod optim;
pub mod regression;
pub mod smoothing;
pub mod spectral;

pub use covkernel::{
    build_cov_matrix, build_cov_matrix_unfactorized, cross_cov_matrix, matern_cov, matrix_power, CovMatrix,
    Locations, MaternKernel, MaternParams,
};
pub use error::{Error, Result};
pub use faer::Mat;
pub use optim::{nelder_mead, Minimum, NelderMeadConfig};
pub use regression::{
    fit_ml, gls_estimate, krig_predict, neg_loglik, EstimationResult, FitConfig, FreeParams, GlsFit,
    RegressionDataset, Replicate,
};
pub use smoothing::{cov_power_smooth, lowess, CovPowerSmoother, LowessConfig};
pub use spectral::{
    an_bn_terms, beta_infinity_expectation, classify_limit, eigenbasis_beta_hat, LimitRegime, ObservationMode,
    RegimeKind, Sequence, SpectralModel,
};
pub use experiments::{
    run_application_pipeline, run_spatial_experiment, run_timeseries_experiment, simulate_gp,
    standardize_per_replicate, BivariateData, ExperimentConfig, ExperimentKind, ExperimentTable, NuSxMode, TableRow,
};
