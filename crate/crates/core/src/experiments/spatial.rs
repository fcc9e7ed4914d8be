use rand::seq::index::sample;
use rayon::prelude::*;

use super::{cell_rng, normals, synthetic_sites, ExperimentConfig, ExperimentKind, ExperimentTable, NuSxMode, TableRow};
use crate::covkernel::{build_cov_matrix, build_cov_matrix_unfactorized, CovMatrix, MaternParams};
use crate::error::{Error, Result};
use crate::regression::{design_column, gls_estimate};
use crate::spectral::{classify_limit, LimitRegime, ObservationMode};

const TAG_FIELD: u16 = 2;
const TAG_SUBSAMPLE: u16 = 3;

/// Key of a spatial table row.
pub fn nu_key(nu_x: f64) -> String {
    format!("nu_x={nu_x}")
}

/// Regime predicted for a spatial cell under the mapping `alpha = nu + 1`,
/// `p = nu_x`, `gamma = (nu_x - nu_sx) / 2`, for point observations.
pub fn spatial_regime(nu: f64, nu_x: f64, nu_sx: f64) -> Result<LimitRegime> {
    classify_limit(nu_x, nu + 1.0, (nu_x - nu_sx) / 2.0, ObservationMode::PointObservations)
}

/// Monte Carlo study of the GLS coefficient when the covariate is rougher or
/// smoother than the signal that enters the response.
///
/// With a shared standard normal vector `z`, `X = Sigma_X^{1/2} z` and
/// `SX = Sigma_SX^{1/2} z` (symmetric square roots), `Y = beta SX + eps`. For
/// each `n` a uniform random subset of sites is drawn and `beta` is estimated
/// by GLS with the true noise covariance. Rows are keyed by `nu_x`.
pub fn run_spatial_experiment(config: &ExperimentConfig) -> Result<ExperimentTable> {
    config.validate()?;
    if config.kind != ExperimentKind::Spatial {
        return Err(Error::Config(format!("{:?} is not a spatial experiment", config.kind)));
    }
    let m = &config.spatial;
    m.noise.validate()?;
    if m.nu_x_grid.is_empty() {
        return Err(Error::Config("nu_x_grid must not be empty".into()));
    }
    let locs = match &m.locations {
        Some(l) => l.clone(),
        None => synthetic_sites(m.n_sites, config.base_seed),
    };
    let total = locs.len();
    if let Some(&n) = config.n_grid.iter().find(|&&n| n > total) {
        return Err(Error::Config(format!("sample size {n} exceeds the {total} available sites")));
    }

    let nu_sx = match m.nu_sx_mode {
        NuSxMode::EqualNu => m.noise.nu,
        NuSxMode::NuMinusHalf => m.noise.nu - 0.5,
    };
    let shape = |nu: f64| MaternParams::new(m.noise.kappa, m.noise.sigma, nu);
    let root = |nu: f64| -> Result<CovMatrix> {
        build_cov_matrix_unfactorized(&locs, &shape(nu)?)?.power_with_jitter(0.5)
    };
    let root_sx = root(nu_sx)?;
    let roots_x = m
        .nu_x_grid
        .iter()
        .map(|&nu_x| if nu_x == nu_sx { Ok(root_sx.clone()) } else { root(nu_x) })
        .collect::<Result<Vec<_>>>()?;
    let noise = build_cov_matrix(&locs, &m.noise)?;

    // outcomes[rep][n_idx][nu_idx]
    let outcomes: Vec<Vec<Vec<Result<f64>>>> = (0..config.replications)
        .into_par_iter()
        .map(|rep| {
            let mut rng = cell_rng(config.base_seed, TAG_FIELD, 0, rep);
            let z_cov = normals(&mut rng, total);
            let z_eps = normals(&mut rng, total);
            let fields = (|| -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
                let sx = root_sx.mul_vec(&z_cov)?;
                let eps = noise.correlate(&z_eps)?;
                let y = sx.iter().zip(&eps).map(|(s, e)| m.beta * s + e).collect();
                let xs = roots_x.iter().map(|r| r.mul_vec(&z_cov)).collect::<Result<Vec<_>>>()?;
                Ok((y, xs))
            })();
            config
                .n_grid
                .iter()
                .map(|&n| {
                    let (y, xs) = match &fields {
                        Ok(f) => f,
                        Err(e) => return vec![Err(e.clone()); roots_x.len()],
                    };
                    let idx: Vec<usize> = if n == total {
                        (0..total).collect()
                    } else {
                        let mut idx = sample(&mut cell_rng(config.base_seed, TAG_SUBSAMPLE, n, rep), total, n).into_vec();
                        idx.sort_unstable();
                        idx
                    };
                    let sub = if n == total { Ok(noise.clone()) } else { noise.submatrix(&idx).factorized() };
                    let sub = match sub {
                        Ok(s) => s,
                        Err(e) => return vec![Err(e); roots_x.len()],
                    };
                    let ys: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
                    xs.iter()
                        .map(|x| {
                            let xsub: Vec<f64> = idx.iter().map(|&i| x[i]).collect();
                            gls_estimate(&design_column(&xsub), &sub, &ys).map(|f| f.beta_hat[0])
                        })
                        .collect()
                })
                .collect()
        })
        .collect();

    let mut table = ExperimentTable::new(match m.nu_sx_mode {
        NuSxMode::EqualNu => "spatial_equal_nu",
        NuSxMode::NuMinusHalf => "spatial_nu_minus_half",
    });
    for (ni, &n) in config.n_grid.iter().enumerate() {
        for (vi, &nu_x) in m.nu_x_grid.iter().enumerate() {
            let values: Vec<f64> = outcomes.iter().filter_map(|o| o[ni][vi].as_ref().ok().copied()).collect();
            let failures = config.replications - values.len();
            table.push(TableRow::summarize(n, nu_key(nu_x), values, failures));
        }
    }
    Ok(table)
}
