//! Generalized least squares, Gaussian likelihood, maximum-likelihood
//! fitting of Matérn covariance parameters, and kriging.

use faer::linalg::solvers::{DenseSolveCore, Solve};
use faer::{Mat, Side};
use serde::{Deserialize, Serialize};

use crate::covkernel::{build_cov_matrix, column, cross_cov_matrix, CovMatrix, Locations, MaternParams};
use crate::error::{Error, Result};
use crate::optim::{nelder_mead, NelderMeadConfig};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Two-sided 95% normal quantile used for Wald intervals.
pub const Z_95: f64 = 1.96;

/// One realization of the response with its covariates at shared locations.
#[derive(Debug, Clone)]
pub struct Replicate {
    /// `n x K` design matrix.
    pub covariates: Mat<f64>,
    pub response: Vec<f64>,
}

impl Replicate {
    pub fn new(covariates: Mat<f64>, response: Vec<f64>) -> Self {
        Self { covariates, response }
    }

    /// Single-covariate replicate from column slices.
    pub fn from_columns(columns: &[&[f64]], response: Vec<f64>) -> Self {
        let n = response.len();
        let covariates = Mat::from_fn(n, columns.len(), |i, k| columns[k][i]);
        Self { covariates, response }
    }
}

/// Responses and covariates at `n` locations, possibly over several
/// replicates (for instance years) that share locations, covariance and
/// regression coefficients.
#[derive(Debug, Clone)]
pub struct RegressionDataset {
    pub locations: Locations,
    pub replicates: Vec<Replicate>,
}

impl RegressionDataset {
    pub fn new(locations: Locations, replicates: Vec<Replicate>) -> Result<Self> {
        let n = locations.len();
        let first = replicates
            .first()
            .ok_or_else(|| Error::Dimension("dataset needs at least one replicate".into()))?;
        let k = first.covariates.ncols();
        if k == 0 {
            return Err(Error::Dimension("need at least one covariate".into()));
        }
        if n <= k {
            return Err(Error::Dimension(format!("need more locations ({n}) than covariates ({k})")));
        }
        for (r, rep) in replicates.iter().enumerate() {
            if rep.response.len() != n || rep.covariates.nrows() != n || rep.covariates.ncols() != k {
                return Err(Error::Dimension(format!(
                    "replicate {r}: expected {n} rows and {k} covariates"
                )));
            }
            let finite = rep.response.iter().all(|v| v.is_finite())
                && (0..k).all(|c| rep.covariates.col(c).iter().all(|v| v.is_finite()));
            if !finite {
                return Err(Error::ParameterDomain(format!("replicate {r} has non-finite values")));
            }
        }
        Ok(Self { locations, replicates })
    }

    pub fn n(&self) -> usize {
        self.locations.len()
    }

    pub fn n_covariates(&self) -> usize {
        self.replicates[0].covariates.ncols()
    }

    pub fn n_replicates(&self) -> usize {
        self.replicates.len()
    }

    /// Restriction to the locations in `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let locations = self.locations.subset(indices);
        let replicates = self
            .replicates
            .iter()
            .map(|rep| Replicate {
                covariates: Mat::from_fn(indices.len(), rep.covariates.ncols(), |i, k| {
                    rep.covariates[(indices[i], k)]
                }),
                response: indices.iter().map(|&i| rep.response[i]).collect(),
            })
            .collect();
        Self::new(locations, replicates)
    }
}

/// GLS coefficients with standard errors from `(X^T Sigma^{-1} X)^{-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct GlsFit {
    pub beta_hat: Vec<f64>,
    pub se: Vec<f64>,
    /// `sum_r (y_r - X_r beta)^T Sigma^{-1} (y_r - X_r beta)` at `beta_hat`.
    pub quad_form: f64,
}

/// `beta_hat = (X^T Sigma^{-1} X)^{-1} X^T Sigma^{-1} y` for one replicate.
/// `sigma` must be factorized; `Sigma^{-1}` is never formed.
pub fn gls_estimate(x: &Mat<f64>, sigma: &CovMatrix, y: &[f64]) -> Result<GlsFit> {
    gls_estimate_replicates(std::slice::from_ref(&Replicate::new(x.clone(), y.to_vec())), sigma)
}

/// Pooled GLS over replicates sharing `sigma` and `beta`.
pub fn gls_estimate_replicates(replicates: &[Replicate], sigma: &CovMatrix) -> Result<GlsFit> {
    let whitened = whiten_replicates(replicates, sigma)?;
    gls_from_whitened(&whitened)
}

/// `(L^{-1} X_r, L^{-1} y_r)` for each replicate.
fn whiten_replicates(replicates: &[Replicate], sigma: &CovMatrix) -> Result<Vec<(Mat<f64>, Vec<f64>)>> {
    let n = sigma.n();
    let first = replicates.first().ok_or_else(|| Error::Dimension("no replicates".into()))?;
    let k = first.covariates.ncols();
    if k == 0 {
        return Err(Error::Dimension("need at least one covariate".into()));
    }
    // Whiten all replicates with one multi-column triangular solve.
    let r = replicates.len();
    let mut stacked = Mat::<f64>::zeros(n, r * (k + 1));
    for (ri, rep) in replicates.iter().enumerate() {
        if rep.covariates.nrows() != n || rep.response.len() != n || rep.covariates.ncols() != k {
            return Err(Error::Dimension(format!("replicate {ri} does not match an {n}x{n} covariance")));
        }
        let base = ri * (k + 1);
        for c in 0..k {
            for i in 0..n {
                stacked[(i, base + c)] = rep.covariates[(i, c)];
            }
        }
        for i in 0..n {
            stacked[(i, base + k)] = rep.response[i];
        }
    }
    sigma.whiten_in_place(&mut stacked)?;
    Ok((0..r)
        .map(|ri| {
            let base = ri * (k + 1);
            let xw = Mat::from_fn(n, k, |i, c| stacked[(i, base + c)]);
            let yw = stacked.col_as_slice(base + k).to_vec();
            (xw, yw)
        })
        .collect())
}

fn gls_from_whitened(whitened: &[(Mat<f64>, Vec<f64>)]) -> Result<GlsFit> {
    let k = whitened[0].0.ncols();
    let mut info = Mat::<f64>::zeros(k, k);
    let mut rhs = Mat::<f64>::zeros(k, 1);
    for (xw, yw) in whitened {
        for a in 0..k {
            let ca = xw.col_as_slice(a);
            rhs[(a, 0)] += dot(ca, yw);
            for b in 0..=a {
                let v = dot(ca, xw.col_as_slice(b));
                info[(a, b)] += v;
                if a != b {
                    info[(b, a)] += v;
                }
            }
        }
    }
    let llt = info.llt(Side::Lower).map_err(|_| Error::RankDeficient)?;
    let l = llt.L();
    let max_diag = (0..k).map(|i| info[(i, i)]).fold(0.0, f64::max);
    let min_pivot = (0..k).map(|i| l[(i, i)] * l[(i, i)]).fold(f64::INFINITY, f64::min);
    if !(max_diag > 0.0) || min_pivot < 1e-13 * max_diag {
        return Err(Error::RankDeficient);
    }
    let beta = llt.solve(&rhs);
    let inv = llt.inverse();
    let beta_hat: Vec<f64> = (0..k).map(|i| beta[(i, 0)]).collect();
    let se = (0..k).map(|i| inv[(i, i)].max(0.0).sqrt()).collect();
    let quad_form = whitened
        .iter()
        .map(|(xw, yw)| {
            yw.iter()
                .enumerate()
                .map(|(i, &y)| {
                    let fit: f64 = (0..k).map(|c| xw[(i, c)] * beta_hat[c]).sum();
                    (y - fit) * (y - fit)
                })
                .sum::<f64>()
        })
        .sum();
    Ok(GlsFit { beta_hat, se, quad_form })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Gaussian negative log-likelihood
/// `1/2 sum_r [log det Sigma + r_r^T Sigma^{-1} r_r + n log 2 pi]`, `r_r = y_r - X_r beta`.
pub fn neg_loglik(dataset: &RegressionDataset, beta: &[f64], params: &MaternParams) -> Result<f64> {
    let sigma = build_cov_matrix(&dataset.locations, params)?;
    neg_loglik_with(dataset, beta, &sigma)
}

/// [`neg_loglik`] with a prebuilt, factorized covariance.
pub fn neg_loglik_with(dataset: &RegressionDataset, beta: &[f64], sigma: &CovMatrix) -> Result<f64> {
    let k = dataset.n_covariates();
    if beta.len() != k {
        return Err(Error::Dimension(format!("beta has {} entries, expected {k}", beta.len())));
    }
    let n = dataset.n();
    let r = dataset.n_replicates();
    let mut resid = Mat::<f64>::zeros(n, r);
    for (ri, rep) in dataset.replicates.iter().enumerate() {
        for i in 0..n {
            let fit: f64 = (0..k).map(|c| rep.covariates[(i, c)] * beta[c]).sum();
            resid[(i, ri)] = rep.response[i] - fit;
        }
    }
    sigma.whiten_in_place(&mut resid)?;
    let quad: f64 = (0..r).map(|c| resid.col_as_slice(c).iter().map(|v| v * v).sum::<f64>()).sum();
    Ok(0.5 * (r as f64 * (sigma.log_det()? + n as f64 * LN_2PI) + quad))
}

/// Negative log-likelihood with `beta` profiled out by GLS.
pub fn profile_neg_loglik(dataset: &RegressionDataset, params: &MaternParams) -> Result<(f64, GlsFit)> {
    let sigma = build_cov_matrix(&dataset.locations, params)?;
    profile_neg_loglik_with(dataset, &sigma)
}

fn profile_neg_loglik_with(dataset: &RegressionDataset, sigma: &CovMatrix) -> Result<(f64, GlsFit)> {
    let whitened = whiten_replicates(&dataset.replicates, sigma)?;
    let fit = gls_from_whitened(&whitened)?;
    let r = dataset.n_replicates() as f64;
    let value = 0.5 * (r * (sigma.log_det()? + dataset.n() as f64 * LN_2PI) + fit.quad_form);
    Ok((value, fit))
}

/// Which covariance parameters the likelihood search may move.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FreeParams {
    pub kappa: bool,
    pub sigma: bool,
    pub nu: bool,
    pub nugget: bool,
}

impl FreeParams {
    pub const NONE: Self = Self { kappa: false, sigma: false, nu: false, nugget: false };
    pub const MATERN: Self = Self { kappa: true, sigma: true, nu: true, nugget: false };
    pub const ALL: Self = Self { kappa: true, sigma: true, nu: true, nugget: true };

    fn count(&self) -> usize {
        [self.kappa, self.sigma, self.nu, self.nugget].iter().filter(|&&b| b).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    pub free: FreeParams,
    /// Starting values; fixed parameters keep these values. `None` uses
    /// `nu = 1`, `kappa = 2 / median distance`, `sigma` = residual standard
    /// deviation of an OLS fit, and a nugget standard deviation of
    /// `0.01 sigma` when the nugget is free (zero otherwise).
    pub start: Option<MaternParams>,
    pub nu_bounds: (f64, f64),
    pub optimizer: NelderMeadConfig,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            free: FreeParams::MATERN,
            start: None,
            nu_bounds: (0.1, 10.0),
            optimizer: NelderMeadConfig::default(),
        }
    }
}

impl FitConfig {
    pub fn fixed(params: MaternParams) -> Self {
        Self { free: FreeParams::NONE, start: Some(params), ..Self::default() }
    }

    pub fn with_free(free: FreeParams) -> Self {
        Self { free, ..Self::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimationResult {
    pub beta_hat: Vec<f64>,
    pub se: Vec<f64>,
    /// Wald intervals `beta_hat -+ 1.96 se`.
    pub ci95: Vec<(f64, f64)>,
    pub cov_params: MaternParams,
    pub loglik: f64,
    /// Number of locations.
    pub n_used: usize,
    pub replicates: usize,
    pub evaluations: usize,
}

/// Heuristic starting values for the covariance search.
pub fn initial_params(dataset: &RegressionDataset, free: &FreeParams) -> Result<MaternParams> {
    let median = dataset.locations.median_pairwise_distance();
    let kappa = if median > 0.0 { 2.0 / median } else { 1.0 };
    // OLS residual spread, pooled over replicates.
    let eye = CovMatrix::from_dense(Mat::<f64>::identity(dataset.n(), dataset.n()))?.factorized()?;
    let ols = gls_estimate_replicates(&dataset.replicates, &eye)?;
    let dof = (dataset.n() * dataset.n_replicates()).saturating_sub(dataset.n_covariates()).max(1);
    let mut sigma = (ols.quad_form / dof as f64).sqrt();
    if !(sigma > 0.0) {
        sigma = 1.0;
    }
    let nugget_var = if free.nugget { (0.01 * sigma).powi(2) } else { 0.0 };
    MaternParams::with_nugget(kappa, sigma, 1.0, nugget_var)
}

/// Maximum-likelihood fit of `beta` and the free Matérn parameters.
///
/// The search runs over the logarithms of the free parameters with `beta`
/// profiled out in closed form; `nu` is clipped to `config.nu_bounds`. With no
/// free parameter the likelihood is evaluated once at the start values.
pub fn fit_ml(dataset: &RegressionDataset, config: &FitConfig) -> Result<EstimationResult> {
    let start = match config.start {
        Some(p) => {
            p.validate()?;
            p
        }
        None => initial_params(dataset, &config.free)?,
    };
    let free = config.free;
    let (nu_lo, nu_hi) = config.nu_bounds;
    if !(nu_lo > 0.0 && nu_lo <= nu_hi) {
        return Err(Error::ParameterDomain("invalid nu bounds".into()));
    }
    let clip_nu = |nu: f64| nu.clamp(nu_lo, nu_hi);

    let unpack = |theta: &[f64]| -> MaternParams {
        let mut it = theta.iter().map(|t| t.exp());
        let mut p = start;
        if free.kappa {
            p.kappa = it.next().unwrap();
        }
        if free.sigma {
            p.sigma = it.next().unwrap();
        }
        if free.nu {
            p.nu = clip_nu(it.next().unwrap());
        }
        if free.nugget {
            let sd = it.next().unwrap();
            p.nugget_var = sd * sd;
        }
        p
    };
    let mut theta0 = Vec::with_capacity(free.count());
    if free.kappa {
        theta0.push(start.kappa.ln());
    }
    if free.sigma {
        theta0.push(start.sigma.ln());
    }
    if free.nu {
        theta0.push(clip_nu(start.nu).ln());
    }
    if free.nugget {
        let sd = start.nugget_var.sqrt();
        theta0.push(if sd > 0.0 { sd.ln() } else { (1e-3 * start.sigma).ln() });
    }

    let objective = |theta: &[f64]| -> f64 {
        let p = unpack(theta);
        match profile_neg_loglik(dataset, &p) {
            Ok((v, _)) => v,
            Err(_) => f64::INFINITY,
        }
    };
    let (params, evaluations) = if theta0.is_empty() {
        (start, 0)
    } else {
        let min = nelder_mead(objective, &theta0, &config.optimizer)?;
        if !min.value.is_finite() {
            return Err(Error::NotPositiveDefinite("no feasible covariance parameters found".into()));
        }
        (unpack(&min.point), min.evaluations)
    };

    let (value, fit) = profile_neg_loglik(dataset, &params)?;
    let ci95 = fit
        .beta_hat
        .iter()
        .zip(&fit.se)
        .map(|(b, s)| (b - Z_95 * s, b + Z_95 * s))
        .collect();
    Ok(EstimationResult {
        beta_hat: fit.beta_hat,
        se: fit.se,
        ci95,
        cov_params: params,
        loglik: -value,
        n_used: dataset.n(),
        replicates: dataset.n_replicates(),
        evaluations: evaluations + 1,
    })
}

/// Kriging predictor `X_p beta_hat + Sigma_po Sigma_oo^{-1} (y - X_o beta_hat)`
/// for every replicate of `obs`. `pred_covariates[r]` is the design at the
/// prediction locations for replicate `r`.
pub fn krig_predict(
    fitted: &EstimationResult,
    obs: &RegressionDataset,
    pred_locations: &Locations,
    pred_covariates: &[Mat<f64>],
) -> Result<Vec<Vec<f64>>> {
    let k = obs.n_covariates();
    let m = pred_locations.len();
    if pred_covariates.len() != obs.n_replicates() {
        return Err(Error::Dimension("one prediction design per replicate is required".into()));
    }
    if fitted.beta_hat.len() != k {
        return Err(Error::Dimension("fitted coefficients do not match the dataset".into()));
    }
    let sigma_oo = build_cov_matrix(&obs.locations, &fitted.cov_params)?;
    let sigma_po = cross_cov_matrix(pred_locations, &obs.locations, &fitted.cov_params)?;
    let n = obs.n();
    let mut resid = Mat::<f64>::zeros(n, obs.n_replicates());
    for (ri, rep) in obs.replicates.iter().enumerate() {
        for i in 0..n {
            let fit: f64 = (0..k).map(|c| rep.covariates[(i, c)] * fitted.beta_hat[c]).sum();
            resid[(i, ri)] = rep.response[i] - fit;
        }
    }
    let weights = sigma_oo.solve(&resid)?;
    let correction = &sigma_po * &weights;
    pred_covariates
        .iter()
        .enumerate()
        .map(|(ri, xp)| {
            if xp.nrows() != m || xp.ncols() != k {
                return Err(Error::Dimension(format!("prediction design {ri} must be {m}x{k}")));
            }
            Ok((0..m)
                .map(|i| {
                    let mean: f64 = (0..k).map(|c| xp[(i, c)] * fitted.beta_hat[c]).sum();
                    mean + correction[(i, ri)]
                })
                .collect())
        })
        .collect()
}

/// Root mean squared error pooled over replicates and prediction points.
pub fn rmse(predictions: &[Vec<f64>], actual: &[Vec<f64>]) -> Result<f64> {
    if predictions.len() != actual.len() {
        return Err(Error::Dimension("prediction and truth differ in replicates".into()));
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for (p, a) in predictions.iter().zip(actual) {
        if p.len() != a.len() {
            return Err(Error::Dimension("prediction and truth differ in length".into()));
        }
        sum += p.iter().zip(a).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
        count += p.len();
    }
    if count == 0 {
        return Err(Error::Dimension("nothing to compare".into()));
    }
    Ok((sum / count as f64).sqrt())
}

/// Single-column design from a slice.
pub fn design_column(values: &[f64]) -> Mat<f64> {
    column(values)
}
