use rayon::prelude::*;

use super::{cell_rng, normals, ExperimentConfig, ExperimentKind, ExperimentTable, TableRow};
use crate::covkernel::{build_cov_matrix, CovMatrix, Locations};
use crate::error::{Error, Result};
use crate::regression::{design_column, fit_ml, gls_estimate, FitConfig, FreeParams, RegressionDataset, Replicate};
use crate::smoothing::lowess;

const TAG: u16 = 1;

pub const MODEL_ROUGH: &str = "model1";
pub const MODEL_SMOOTHED: &str = "model2";

/// Regression on a regularly spaced grid of a response built from a lowess-
/// smoothed covariate.
///
/// Per replicate: `X` is a Matérn draw, `SX = lowess(X)` with the truth
/// smoother, `Y = beta SX + Z` with Matérn noise `Z` (plus white noise for
/// `Timeseries3`). `model1` regresses `Y` on `X`; `model2` on `X` smoothed with
/// the analyst's smoother. Both models have no intercept.
pub fn run_timeseries_experiment(config: &ExperimentConfig) -> Result<ExperimentTable> {
    config.validate()?;
    let m = &config.timeseries;
    let (known, free) = match config.kind {
        ExperimentKind::Timeseries1 => (true, FreeParams::NONE),
        ExperimentKind::Timeseries2 => (false, FreeParams::MATERN),
        ExperimentKind::Timeseries3 => (false, FreeParams::ALL),
        other => return Err(Error::Config(format!("{other:?} is not a time-series experiment"))),
    };
    let nugget_sd = if config.kind == ExperimentKind::Timeseries3 { m.nugget_sd } else { 0.0 };
    m.covariate.validate()?;
    m.noise.validate()?;
    m.truth_smoother.validate()?;
    m.fitted_smoother.validate()?;

    let mut table = ExperimentTable::new(format!("{:?}", config.kind).to_lowercase());
    for &n in &config.n_grid {
        let locs = Locations::regular_grid_1d(n, m.domain.0, m.domain.1);
        let xs: Vec<f64> = locs.iter().map(|p| p[0]).collect();
        let cov_x = build_cov_matrix(&locs, &m.covariate)?;
        let cov_z = build_cov_matrix(&locs, &m.noise)?;

        let outcomes: Vec<[Result<f64>; 2]> = (0..config.replications)
            .into_par_iter()
            .map(|rep| {
                let mut rng = cell_rng(config.base_seed, TAG, n, rep);
                let mut draw = || -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
                    let x = cov_x.correlate(&normals(&mut rng, n))?;
                    let mut z = cov_z.correlate(&normals(&mut rng, n))?;
                    if nugget_sd > 0.0 {
                        for (zi, e) in z.iter_mut().zip(normals(&mut rng, n)) {
                            *zi += nugget_sd * e;
                        }
                    }
                    let sx = lowess(&xs, &x, &m.truth_smoother)?;
                    let sx_hat = lowess(&xs, &x, &m.fitted_smoother)?;
                    let y = sx.iter().zip(&z).map(|(s, e)| m.beta * s + e).collect();
                    Ok((x, sx_hat, y))
                };
                match draw() {
                    Ok((x, sx_hat, y)) => [
                        estimate(&locs, &x, &y, known, &cov_z, free, config),
                        estimate(&locs, &sx_hat, &y, known, &cov_z, free, config),
                    ],
                    Err(e) => [Err(e.clone()), Err(e)],
                }
            })
            .collect();

        for (slot, key) in [MODEL_ROUGH, MODEL_SMOOTHED].into_iter().enumerate() {
            let values: Vec<f64> = outcomes.iter().filter_map(|o| o[slot].as_ref().ok().copied()).collect();
            let failures = config.replications - values.len();
            table.push(TableRow::summarize(n, key, values, failures));
        }
    }
    Ok(table)
}

fn estimate(
    locs: &Locations,
    covariate: &[f64],
    y: &[f64],
    known: bool,
    cov: &CovMatrix,
    free: FreeParams,
    config: &ExperimentConfig,
) -> Result<f64> {
    let x = design_column(covariate);
    if known {
        return Ok(gls_estimate(&x, cov, y)?.beta_hat[0]);
    }
    let dataset = RegressionDataset::new(locs.clone(), vec![Replicate::new(x, y.to_vec())])?;
    let fit = FitConfig { free, optimizer: config.optimizer, ..FitConfig::default() };
    let beta = fit_ml(&dataset, &fit)?.beta_hat[0];
    if beta.is_finite() {
        Ok(beta)
    } else {
        Err(Error::DegenerateDesign("non-finite estimate".into()))
    }
}
