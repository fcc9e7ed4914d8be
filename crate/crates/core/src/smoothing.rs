//! Lowess and covariance-power smoothing.

use serde::{Deserialize, Serialize};

use crate::covkernel::{build_cov_matrix_unfactorized, CovMatrix, Locations, MaternParams};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LowessConfig {
    /// Fraction of points in each local neighbourhood, in `(0, 1]`.
    pub span: f64,
    /// Bisquare robustness passes after the initial fit.
    #[serde(default = "default_iterations")]
    pub iterations: usize,
}

fn default_iterations() -> usize {
    3
}

impl LowessConfig {
    pub fn new(span: f64) -> Result<Self> {
        let c = Self { span, iterations: default_iterations() };
        c.validate()?;
        Ok(c)
    }

    pub fn with_iterations(mut self, iterations: usize) -> Self {
        self.iterations = iterations;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.span > 0.0 && self.span <= 1.0) {
            return Err(Error::ParameterDomain(format!("lowess span must lie in (0, 1], got {}", self.span)));
        }
        Ok(())
    }
}

/// Cleveland's locally weighted linear regression.
///
/// Each point is fitted by weighted least squares over its `ceil(span n)`
/// nearest neighbours with tricube weights, then refitted `iterations` times
/// with bisquare robustness weights based on six times the median absolute
/// residual.
pub fn lowess(xs: &[f64], ys: &[f64], config: &LowessConfig) -> Result<Vec<f64>> {
    config.validate()?;
    let n = xs.len();
    if n != ys.len() {
        return Err(Error::Dimension(format!("xs has {n} entries, ys has {}", ys.len())));
    }
    if n < 2 {
        return Err(Error::Dimension("lowess needs at least two points".into()));
    }
    if let Some(i) = (1..n).find(|&i| !(xs[i] > xs[i - 1])) {
        return Err(Error::InputOrder(format!("xs must be strictly increasing (index {i})")));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::ParameterDomain("lowess input must be finite".into()));
    }

    let k = ((config.span * n as f64).ceil() as usize).clamp(2, n);
    let mut robustness = vec![1.0; n];
    let mut fitted = vec![0.0; n];
    for pass in 0..=config.iterations {
        // Sliding window [lo, lo + k) of nearest neighbours; xs sorted so it
        // only ever moves right.
        let mut lo = 0usize;
        for i in 0..n {
            let x = xs[i];
            while lo + k < n && x - xs[lo] > xs[lo + k] - x {
                lo += 1;
            }
            let hi = lo + k;
            let h = (x - xs[lo]).max(xs[hi - 1] - x);
            fitted[i] = local_linear(&xs[lo..hi], &ys[lo..hi], &robustness[lo..hi], x, h, ys[i]);
        }
        if pass == config.iterations {
            break;
        }
        let mut abs_res: Vec<f64> = ys.iter().zip(&fitted).map(|(y, f)| (y - f).abs()).collect();
        let mid = abs_res.len() / 2;
        abs_res.select_nth_unstable_by(mid, f64::total_cmp);
        let median = if n % 2 == 1 {
            abs_res[mid]
        } else {
            let upper = abs_res[mid];
            let lower = abs_res[..mid].iter().copied().fold(f64::NEG_INFINITY, f64::max);
            0.5 * (lower + upper)
        };
        let scale = 6.0 * median;
        // Residuals at rounding level carry no outlier information.
        let y_scale = ys.iter().map(|y| y.abs()).sum::<f64>() / n as f64;
        if !(scale > 1e-7 * y_scale) {
            break;
        }
        for i in 0..n {
            let u = (ys[i] - fitted[i]).abs() / scale;
            robustness[i] = if u < 1.0 { (1.0 - u * u).powi(2) } else { 0.0 };
        }
    }
    Ok(fitted)
}

fn local_linear(xs: &[f64], ys: &[f64], robustness: &[f64], x0: f64, h: f64, fallback: f64) -> f64 {
    // Sums are taken relative to the first point so constant data stays exact.
    let (x_ref, y_ref) = (xs[0], ys[0]);
    let mut sw = 0.0;
    let mut sx = 0.0;
    let mut sy = 0.0;
    let weights: Vec<f64> = xs
        .iter()
        .zip(robustness)
        .map(|(&x, &r)| {
            let u = if h > 0.0 { (x - x0).abs() / h } else { 0.0 };
            // Points at exactly distance h would get zero weight; nudge the
            // bandwidth so the farthest neighbour still counts a little.
            let u = u / 1.000_001;
            let t = 1.0 - u * u * u;
            r * t * t * t
        })
        .collect();
    for ((&x, &y), &w) in xs.iter().zip(ys).zip(&weights) {
        sw += w;
        sx += w * (x - x_ref);
        sy += w * (y - y_ref);
    }
    if !(sw > 0.0) {
        return fallback;
    }
    let xbar = x_ref + sx / sw;
    let ybar = y_ref + sy / sw;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for ((&x, &y), &w) in xs.iter().zip(ys).zip(&weights) {
        sxx += w * (x - xbar) * (x - xbar);
        sxy += w * (x - xbar) * (y - ybar);
    }
    let range = xs[xs.len() - 1] - xs[0];
    if sxx <= 1e-12 * sw * range * range {
        return ybar;
    }
    ybar + sxy / sxx * (x0 - xbar)
}

/// Rescales `values` to unit sample variance (divisor `n - 1`) without
/// centering. Constant or single-element input is returned unchanged.
pub fn rescale_unit_variance(values: &mut [f64]) {
    let n = values.len();
    if n < 2 {
        return;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    if var > 0.0 {
        let s = var.sqrt();
        values.iter_mut().for_each(|v| *v /= s);
    }
}

/// `Sigma^q values`, rescaled to unit sample variance.
pub fn cov_power_smooth(values: &[f64], params: &MaternParams, locations: &Locations, q: f64) -> Result<Vec<f64>> {
    CovPowerSmoother::new(params, locations, q)?.apply(values)
}

/// A precomputed `Sigma^q` applied to many vectors.
#[derive(Debug, Clone)]
pub struct CovPowerSmoother {
    power: CovMatrix,
    rescale: bool,
}

impl CovPowerSmoother {
    pub fn new(params: &MaternParams, locations: &Locations, q: f64) -> Result<Self> {
        if !q.is_finite() {
            return Err(Error::ParameterDomain(format!("power must be finite, got {q}")));
        }
        let sigma = build_cov_matrix_unfactorized(locations, params)?;
        let power = if q == 0.0 {
            CovMatrix::from_dense(faer::Mat::identity(sigma.n(), sigma.n()))?
        } else {
            sigma.power_with_jitter(q)?
        };
        Ok(Self { power, rescale: true })
    }

    /// Turns the unit-variance rescale on or off.
    pub fn with_rescale(mut self, rescale: bool) -> Self {
        self.rescale = rescale;
        self
    }

    pub fn matrix(&self) -> &CovMatrix {
        &self.power
    }

    pub fn apply(&self, values: &[f64]) -> Result<Vec<f64>> {
        let mut out = self.power.mul_vec(values)?;
        if self.rescale {
            rescale_unit_variance(&mut out);
        }
        Ok(out)
    }
}
