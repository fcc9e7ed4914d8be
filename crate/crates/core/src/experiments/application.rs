use faer::Mat;
use rand::seq::index::sample;
use rayon::prelude::*;

use super::{cell_rng, normals, standardize_columns, synthetic_sites, ExperimentConfig, ExperimentTable, SyntheticApplication, TableRow};
use crate::covkernel::{build_cov_matrix, build_cov_matrix_unfactorized, Locations, MaternParams};
use crate::error::{Error, Result};
use crate::regression::{fit_ml, krig_predict, rmse, EstimationResult, FitConfig, RegressionDataset, Replicate};
use crate::smoothing::CovPowerSmoother;

const TAG_SYNTHETIC: u16 = 4;
const TAG_ORDER: u16 = 5;
const TAG_HOLDOUT: u16 = 6;

/// Two variables observed at shared sites over several replicates (years).
#[derive(Debug, Clone, PartialEq)]
pub struct BivariateData {
    pub locations: Locations,
    pub names: [String; 2],
    /// `values[variable][replicate][site]`.
    pub values: [Vec<Vec<f64>>; 2],
}

impl BivariateData {
    pub fn new(locations: Locations, names: [String; 2], values: [Vec<Vec<f64>>; 2]) -> Result<Self> {
        let n = locations.len();
        let r = values[0].len();
        if r == 0 || values[1].len() != r {
            return Err(Error::Dimension("both variables need the same, nonzero number of replicates".into()));
        }
        for (v, reps) in values.iter().enumerate() {
            for (ri, col) in reps.iter().enumerate() {
                if col.len() != n {
                    return Err(Error::Dimension(format!(
                        "variable {} replicate {ri} has {} values for {n} sites",
                        names[v],
                        col.len()
                    )));
                }
                if col.iter().any(|x| !x.is_finite()) {
                    return Err(Error::ParameterDomain(format!("variable {} replicate {ri} is not finite", names[v])));
                }
            }
        }
        if names[0] == names[1] {
            return Err(Error::Dimension("variable names must differ".into()));
        }
        Ok(Self { locations, names, values })
    }

    pub fn n_sites(&self) -> usize {
        self.locations.len()
    }

    pub fn n_replicates(&self) -> usize {
        self.values[0].len()
    }
}

/// Synthetic stand-in: variable 0 (`T`) is smooth and variable 1 (`P`) rough.
/// With a shared normal vector `z` per replicate, `P = Sigma_rough^{1/2} z`,
/// `SP = Sigma_smooth^{1/2} z` and `T = beta SP + eps`, `eps` Matérn with the
/// smooth covariance.
pub fn synthetic_application_data(settings: &SyntheticApplication, seed: u64) -> Result<BivariateData> {
    let locs = synthetic_sites(settings.n_sites, seed);
    let n = locs.len();
    let params = |nu: f64| MaternParams::new(settings.kappa, settings.sigma, nu);
    let root_rough = build_cov_matrix_unfactorized(&locs, &params(settings.nu_rough)?)?.power_with_jitter(0.5)?;
    let root_smooth = build_cov_matrix_unfactorized(&locs, &params(settings.nu_smooth)?)?.power_with_jitter(0.5)?;
    let noise = build_cov_matrix(&locs, &params(settings.nu_smooth)?)?;
    let mut t = Vec::with_capacity(settings.replicates);
    let mut p = Vec::with_capacity(settings.replicates);
    for r in 0..settings.replicates {
        let mut rng = cell_rng(seed, TAG_SYNTHETIC, 0, r);
        let z = normals(&mut rng, n);
        let e = normals(&mut rng, n);
        let sp = root_smooth.mul_vec(&z)?;
        let eps = noise.correlate(&e)?;
        t.push(sp.iter().zip(&eps).map(|(s, e)| settings.beta * s + e).collect());
        p.push(root_rough.mul_vec(&z)?);
    }
    BivariateData::new(locs, ["T".into(), "P".into()], [t, p])
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApplicationOutput {
    /// Rows keyed `"resp~cov"`; `mean_beta` is the covariate coefficient and
    /// the band its 95% Wald interval.
    pub unsmoothed: ExperimentTable,
    /// Same with covariance-power-smoothed covariates.
    pub smoothed: ExperimentTable,
    /// Intercept-only fits used to build the smoothing matrices.
    pub smoothing_params: [MaternParams; 2],
}

/// Regression of each variable on the other with an intercept and a fitted
/// Matérn error, on nested random subsets of sites, followed by the same with
/// each covariate replaced by `Sigma_v^q v` (per replicate, `Sigma_v` from an
/// intercept-only fit of that variable on all sites).
///
/// Prediction RMSE is measured on a fixed random set of `holdout` sites
/// kriged from all other sites with the subset-fitted parameters.
pub fn run_application_pipeline(data: &BivariateData, config: &ExperimentConfig) -> Result<ApplicationOutput> {
    config.validate()?;
    let a = &config.application;
    let total = data.n_sites();
    if a.holdout == 0 || a.holdout + 2 >= total {
        return Err(Error::Config(format!("holdout of {} leaves too few of the {total} sites", a.holdout)));
    }
    if let Some(&n) = config.n_grid.iter().find(|&&n| n > total) {
        return Err(Error::Config(format!("sample size {n} exceeds the {total} available sites")));
    }
    if config.n_grid[0] < 4 {
        return Err(Error::Config("sample sizes must be at least 4".into()));
    }

    let mut values = data.values.clone();
    if a.standardize {
        for v in values.iter_mut() {
            standardize_columns(v)?;
        }
    }

    let order = sample(&mut cell_rng(config.base_seed, TAG_ORDER, total, 0), total, total).into_vec();
    let mut holdout = sample(&mut cell_rng(config.base_seed, TAG_HOLDOUT, total, 0), total, a.holdout).into_vec();
    holdout.sort_unstable();
    let train: Vec<usize> = (0..total).filter(|i| holdout.binary_search(i).is_err()).collect();

    let fit_config = FitConfig { free: a.free, optimizer: config.optimizer, ..FitConfig::default() };
    let ctx = Context { data, order: &order, holdout: &holdout, train: &train, fit: &fit_config };

    let unsmoothed = ctx.table("unsmoothed", &values, &values, &config.n_grid);

    let smoothing_params = [0, 1]
        .into_par_iter()
        .map(|v| fixed_params(&data.locations, &values[v], &fit_config))
        .collect::<Result<Vec<_>>>()?;
    let smoothed_values = [0, 1]
        .into_par_iter()
        .map(|v| {
            let s = CovPowerSmoother::new(&smoothing_params[v], &data.locations, a.powers[v])?
                .with_rescale(a.rescale_smoothed);
            values[v].iter().map(|col| s.apply(col)).collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let smoothed_values: [Vec<Vec<f64>>; 2] = [smoothed_values[0].clone(), smoothed_values[1].clone()];
    let smoothed = ctx.table("smoothed", &values, &smoothed_values, &config.n_grid);

    Ok(ApplicationOutput { unsmoothed, smoothed, smoothing_params: [smoothing_params[0], smoothing_params[1]] })
}

/// Matérn parameters of an intercept-only model.
fn fixed_params(locations: &Locations, columns: &[Vec<f64>], fit: &FitConfig) -> Result<MaternParams> {
    let n = locations.len();
    let reps = columns.iter().map(|c| Replicate::new(Mat::from_fn(n, 1, |_, _| 1.0), c.clone())).collect();
    let ds = RegressionDataset::new(locations.clone(), reps)?;
    Ok(fit_ml(&ds, fit)?.cov_params)
}

struct Context<'a> {
    data: &'a BivariateData,
    order: &'a [usize],
    holdout: &'a [usize],
    train: &'a [usize],
    fit: &'a FitConfig,
}

impl Context<'_> {
    fn table(
        &self,
        name: &str,
        responses: &[Vec<Vec<f64>>; 2],
        covariates: &[Vec<Vec<f64>>; 2],
        n_grid: &[usize],
    ) -> ExperimentTable {
        let cells: Vec<(usize, usize)> = n_grid.iter().flat_map(|&n| [(n, 0), (n, 1)]).collect();
        let rows: Vec<TableRow> = cells
            .par_iter()
            .map(|&(n, resp)| {
                let cov = 1 - resp;
                let key = format!("{}~{}", self.data.names[resp], self.data.names[cov]);
                match self.cell(n, &responses[resp], &covariates[cov]) {
                    Ok((fit, err)) => TableRow {
                        n,
                        key,
                        mean_beta: fit.beta_hat[1],
                        band_lo: fit.ci95[1].0,
                        band_hi: fit.ci95[1].1,
                        rmse: Some(err),
                        failures: 0,
                    },
                    Err(_) => TableRow { rmse: None, ..TableRow::summarize(n, key, Vec::new(), 1) },
                }
            })
            .collect();
        let mut table = ExperimentTable::new(name);
        rows.into_iter().for_each(|r| table.push(r));
        table
    }

    fn cell(&self, n: usize, response: &[Vec<f64>], covariate: &[Vec<f64>]) -> Result<(EstimationResult, f64)> {
        let mut idx = self.order[..n].to_vec();
        idx.sort_unstable();
        let fitted = fit_ml(&self.dataset(&idx, response, covariate)?, self.fit)?;

        let train = self.dataset(self.train, response, covariate)?;
        let designs: Vec<Mat<f64>> = covariate
            .iter()
            .map(|c| Mat::from_fn(self.holdout.len(), 2, |i, k| if k == 0 { 1.0 } else { c[self.holdout[i]] }))
            .collect();
        let pred = krig_predict(&fitted, &train, &self.data.locations.subset(self.holdout), &designs)?;
        let truth: Vec<Vec<f64>> = response.iter().map(|c| self.holdout.iter().map(|&i| c[i]).collect()).collect();
        let err = rmse(&pred, &truth)?;
        Ok((fitted, err))
    }

    fn dataset(&self, idx: &[usize], response: &[Vec<f64>], covariate: &[Vec<f64>]) -> Result<RegressionDataset> {
        let reps = response
            .iter()
            .zip(covariate)
            .map(|(y, x)| {
                Replicate::new(
                    Mat::from_fn(idx.len(), 2, |i, k| if k == 0 { 1.0 } else { x[idx[i]] }),
                    idx.iter().map(|&i| y[i]).collect(),
                )
            })
            .collect();
        RegressionDataset::new(self.data.locations.subset(idx), reps)
    }
}
