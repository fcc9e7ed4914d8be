//! Matérn covariance, covariance-matrix assembly and functions of symmetric
//! positive definite matrices.

use faer::linalg::triangular_solve::{solve_lower_triangular_in_place, solve_upper_triangular_in_place};
use faer::{Mat, MatRef, Par, Side};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Locations closer than this (in coordinate units) count as coincident.
pub const DUPLICATE_TOLERANCE: f64 = 1e-10;

const JITTER_START: f64 = 1e-10;
const JITTER_GROWTH: f64 = 10.0;
const JITTER_RETRIES: usize = 3;

/// Hyperparameters of a Matérn covariance plus an optional nugget.
///
/// `r(h) = sigma^2 2^(1-nu) / Gamma(nu) (kappa h)^nu K_nu(kappa h)`, with
/// `kappa` an inverse range, `sigma` the marginal standard deviation and `nu`
/// the smoothness. `nugget_var` is added on the diagonal of assembled
/// matrices only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaternParams {
    pub kappa: f64,
    pub sigma: f64,
    pub nu: f64,
    #[serde(default)]
    pub nugget_var: f64,
}

impl MaternParams {
    pub fn new(kappa: f64, sigma: f64, nu: f64) -> Result<Self> {
        Self::with_nugget(kappa, sigma, nu, 0.0)
    }

    pub fn with_nugget(kappa: f64, sigma: f64, nu: f64, nugget_var: f64) -> Result<Self> {
        let params = Self { kappa, sigma, nu, nugget_var };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::ParameterDomain(format!("{name} must be positive and finite, got {v}")))
            }
        };
        positive("kappa", self.kappa)?;
        positive("sigma", self.sigma)?;
        positive("nu", self.nu)?;
        if !(self.nugget_var.is_finite() && self.nugget_var >= 0.0) {
            return Err(Error::ParameterDomain(format!(
                "nugget_var must be nonnegative, got {}",
                self.nugget_var
            )));
        }
        Ok(())
    }

    pub fn variance(&self) -> f64 {
        self.sigma * self.sigma
    }

    /// Same parameters with the marginal standard deviation replaced.
    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.sigma = sigma;
        self
    }
}

/// Pre-normalized Matérn evaluator for inner loops. Construct through
/// [`MaternKernel::new`], which validates the parameters once.
#[derive(Debug, Clone, Copy)]
pub struct MaternKernel {
    params: MaternParams,
    norm: f64,
    small_arg: f64,
}

impl MaternKernel {
    pub fn new(params: &MaternParams) -> Result<Self> {
        params.validate()?;
        let nu = params.nu;
        let norm = 2f64.powf(1.0 - nu) / statrs::function::gamma::gamma(nu);
        // Below this argument 1 - r(h)/sigma^2 ~ (kappa h)^(2 min(nu, 1)) is
        // under double precision.
        let small_arg = 1e-17f64.powf(1.0 / (2.0 * nu.min(1.0)));
        Ok(Self { params: *params, norm, small_arg })
    }

    pub fn params(&self) -> &MaternParams {
        &self.params
    }

    /// Covariance at distance `h >= 0`, without nugget.
    #[inline]
    pub fn eval(&self, h: f64) -> f64 {
        let var = self.params.variance();
        let x = self.params.kappa * h;
        if x <= self.small_arg {
            return var;
        }
        let k = crate::bessel::bessel_k(self.params.nu, x);
        if k == 0.0 {
            return 0.0;
        }
        var * self.norm * x.powf(self.params.nu) * k
    }
}

/// Matérn covariance at distance `h`. The nugget is not included.
pub fn matern_cov(h: f64, params: &MaternParams) -> Result<f64> {
    if !(h >= 0.0) || !h.is_finite() {
        return Err(Error::ParameterDomain(format!("distance must be nonnegative, got {h}")));
    }
    Ok(MaternKernel::new(params)?.eval(h))
}

/// A set of points in `R^d`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Locations {
    dim: usize,
    coords: Vec<f64>,
}

impl Locations {
    pub fn new(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 || coords.len() % dim != 0 {
            return Err(Error::Dimension(format!(
                "{} coordinates do not split into points of dimension {dim}",
                coords.len()
            )));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::ParameterDomain("non-finite coordinate".into()));
        }
        Ok(Self { dim, coords })
    }

    pub fn from_points(points: &[Vec<f64>]) -> Result<Self> {
        let dim = points.first().map_or(1, Vec::len);
        if points.iter().any(|p| p.len() != dim) {
            return Err(Error::Dimension("points have mixed dimensions".into()));
        }
        Self::new(dim, points.concat())
    }

    /// `n` equally spaced points on `[lo, hi]`.
    pub fn regular_grid_1d(n: usize, lo: f64, hi: f64) -> Self {
        let coords = if n == 1 {
            vec![lo]
        } else {
            let step = (hi - lo) / (n - 1) as f64;
            (0..n).map(|i| lo + step * i as f64).collect()
        };
        Self { dim: 1, coords }
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        euclidean(self.point(i), self.point(j))
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        let mut coords = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            coords.extend_from_slice(self.point(i));
        }
        Self { dim: self.dim, coords }
    }

    /// Median of all pairwise distances; zero for fewer than two points.
    pub fn median_pairwise_distance(&self) -> f64 {
        let n = self.len();
        let mut d = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for i in 0..n {
            for j in (i + 1)..n {
                d.push(self.distance(i, j));
            }
        }
        if d.is_empty() {
            return 0.0;
        }
        d.sort_by(f64::total_cmp);
        let m = d.len();
        if m % 2 == 1 {
            d[m / 2]
        } else {
            0.5 * (d[m / 2 - 1] + d[m / 2])
        }
    }

    /// Spacing of a one-dimensional, increasing, equally spaced point set.
    fn regular_spacing(&self) -> Option<f64> {
        if self.dim != 1 || self.len() < 3 {
            return None;
        }
        let step = self.coords[1] - self.coords[0];
        if step <= 0.0 {
            return None;
        }
        let tol = 1e-12 * step.max(self.coords[0].abs());
        self.coords
            .windows(2)
            .all(|w| ((w[1] - w[0]) - step).abs() <= tol)
            .then_some(step)
    }
}

pub(crate) fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Symmetric positive definite matrix with an optional lower Cholesky factor.
#[derive(Debug, Clone)]
pub struct CovMatrix {
    entries: Mat<f64>,
    factor: Option<Mat<f64>>,
    jitter: f64,
}

impl CovMatrix {
    /// Wraps a dense matrix after checking symmetry and a positive diagonal.
    /// No factorization is attempted.
    pub fn from_dense(entries: Mat<f64>) -> Result<Self> {
        let n = entries.nrows();
        if n == 0 || entries.ncols() != n {
            return Err(Error::Dimension(format!(
                "covariance must be square and nonempty, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        for i in 0..n {
            let d = entries[(i, i)];
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::NotPositiveDefinite(format!("diagonal entry {i} is {d}")));
            }
            for j in 0..i {
                let (a, b) = (entries[(i, j)], entries[(j, i)]);
                let scale = a.abs().max(b.abs()).max(f64::MIN_POSITIVE);
                if (a - b).abs() > 1e-12 * scale {
                    return Err(Error::Dimension(format!("matrix not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(Self { entries, factor: None, jitter: 0.0 })
    }

    /// Builds from a row-major slice of `n * n` values.
    pub fn from_row_major(n: usize, values: &[f64]) -> Result<Self> {
        if values.len() != n * n {
            return Err(Error::Dimension(format!("expected {} values, got {}", n * n, values.len())));
        }
        Self::from_dense(Mat::from_fn(n, n, |i, j| values[i * n + j]))
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> MatRef<'_, f64> {
        self.entries.as_ref()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    /// Lower Cholesky factor, when computed.
    pub fn factor(&self) -> Option<MatRef<'_, f64>> {
        self.factor.as_ref().map(Mat::as_ref)
    }

    /// Diagonal jitter added to obtain the factorization (zero if none).
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn is_factorized(&self) -> bool {
        self.factor.is_some()
    }

    /// Computes the Cholesky factor. On failure `1e-10 * scale` is added to the
    /// diagonal and the attempt repeated up to three times, growing the jitter
    /// tenfold each time; `scale` is the mean diagonal. Any jitter used stays in
    /// the stored entries.
    pub fn factorize(&mut self) -> Result<()> {
        if self.factor.is_some() {
            return Ok(());
        }
        if let Ok(llt) = self.entries.llt(Side::Lower) {
            self.factor = Some(llt.L().to_owned());
            return Ok(());
        }
        let n = self.n();
        let scale = (0..n).map(|i| self.entries[(i, i)]).sum::<f64>() / n as f64;
        let mut jitter = JITTER_START * scale;
        for _ in 0..JITTER_RETRIES {
            let mut trial = self.entries.clone();
            for i in 0..n {
                trial[(i, i)] += jitter;
            }
            if let Ok(llt) = trial.llt(Side::Lower) {
                self.factor = Some(llt.L().to_owned());
                self.entries = trial;
                self.jitter = jitter;
                return Ok(());
            }
            jitter *= JITTER_GROWTH;
        }
        Err(Error::NotPositiveDefinite(format!(
            "Cholesky failed for n={n} after {JITTER_RETRIES} jitter retries"
        )))
    }

    /// Consumes self and returns the factorized matrix.
    pub fn factorized(mut self) -> Result<Self> {
        self.factorize()?;
        Ok(self)
    }

    fn factor_or_err(&self) -> Result<MatRef<'_, f64>> {
        self.factor()
            .ok_or_else(|| Error::NotPositiveDefinite("matrix has not been factorized".into()))
    }

    /// `L^{-1} B` in place, with `B` having `n` rows.
    pub fn whiten_in_place(&self, rhs: &mut Mat<f64>) -> Result<()> {
        let l = self.factor_or_err()?;
        check_rows(self.n(), rhs.nrows())?;
        solve_lower_triangular_in_place(l, rhs.as_mut(), Par::Seq);
        Ok(())
    }

    /// `Sigma^{-1} B` via two triangular solves.
    pub fn solve(&self, rhs: &Mat<f64>) -> Result<Mat<f64>> {
        let l = self.factor_or_err()?;
        check_rows(self.n(), rhs.nrows())?;
        let mut out = rhs.clone();
        solve_lower_triangular_in_place(l, out.as_mut(), Par::Seq);
        solve_upper_triangular_in_place(l.transpose(), out.as_mut(), Par::Seq);
        Ok(out)
    }

    pub fn solve_vec(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let out = self.solve(&column(rhs))?;
        Ok(out.col_as_slice(0).to_vec())
    }

    /// `log det Sigma` from the factor.
    pub fn log_det(&self) -> Result<f64> {
        let l = self.factor_or_err()?;
        Ok(2.0 * (0..self.n()).map(|i| l[(i, i)].ln()).sum::<f64>())
    }

    /// `L z`: maps standard normal draws to a draw with this covariance.
    pub fn correlate(&self, z: &[f64]) -> Result<Vec<f64>> {
        let l = self.factor_or_err()?;
        check_rows(self.n(), z.len())?;
        let n = self.n();
        let mut out = vec![0.0; n];
        for j in 0..n {
            let zj = z[j];
            if zj == 0.0 {
                continue;
            }
            let col = l.col(j);
            for i in j..n {
                out[i] += col[i] * zj;
            }
        }
        Ok(out)
    }

    /// Principal submatrix on `indices`, unfactorized.
    pub fn submatrix(&self, indices: &[usize]) -> Self {
        let entries = Mat::from_fn(indices.len(), indices.len(), |i, j| {
            self.entries[(indices[i], indices[j])]
        });
        Self { entries, factor: None, jitter: 0.0 }
    }

    /// `Sigma v`.
    pub fn mul_vec(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_rows(self.n(), v.len())?;
        Ok(mat_vec(self.entries.as_ref(), v))
    }

    /// `Sigma^q` through the symmetric eigendecomposition.
    pub fn power(&self, q: f64) -> Result<Self> {
        matrix_power(self, q)
    }

    /// Like [`CovMatrix::power`], but on an eigenvalue `<= 0` retries with the
    /// same diagonal jitter schedule used by [`CovMatrix::factorize`]. Intended
    /// for simulation, where numerically semidefinite matrices are routine.
    pub fn power_with_jitter(&self, q: f64) -> Result<Self> {
        match matrix_power(self, q) {
            Err(Error::NotPositiveDefinite(_)) => {}
            other => return other,
        }
        let n = self.n();
        let scale = (0..n).map(|i| self.entries[(i, i)]).sum::<f64>() / n as f64;
        let mut jitter = JITTER_START * scale;
        for _ in 0..JITTER_RETRIES {
            let mut trial = self.clone();
            trial.factor = None;
            for i in 0..n {
                trial.entries[(i, i)] += jitter;
            }
            if let Ok(p) = matrix_power(&trial, q) {
                return Ok(p);
            }
            jitter *= JITTER_GROWTH;
        }
        Err(Error::NotPositiveDefinite(format!(
            "matrix power failed for n={n} after {JITTER_RETRIES} jitter retries"
        )))
    }
}

fn check_rows(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension(format!("expected {expected} rows, got {got}")))
    }
}

pub(crate) fn column(v: &[f64]) -> Mat<f64> {
    Mat::from_fn(v.len(), 1, |i, _| v[i])
}

pub(crate) fn mat_vec(m: MatRef<'_, f64>, v: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; m.nrows()];
    for (j, &vj) in v.iter().enumerate() {
        if vj == 0.0 {
            continue;
        }
        let col = m.col(j);
        for (i, o) in out.iter_mut().enumerate() {
            *o += col[i] * vj;
        }
    }
    out
}

/// Dense covariance matrix `r(|s_i - s_j|) + nugget 1(i = j)`, factorized.
pub fn build_cov_matrix(locations: &Locations, params: &MaternParams) -> Result<CovMatrix> {
    build_cov_matrix_unfactorized(locations, params)?.factorized()
}

/// As [`build_cov_matrix`] but skips the Cholesky factorization.
pub fn build_cov_matrix_unfactorized(locations: &Locations, params: &MaternParams) -> Result<CovMatrix> {
    let kernel = MaternKernel::new(params)?;
    let n = locations.len();
    if n == 0 {
        return Err(Error::Dimension("no locations".into()));
    }
    let mut entries = Mat::<f64>::zeros(n, n);
    let diag = kernel.eval(0.0) + params.nugget_var;
    if let Some(step) = locations.regular_spacing() {
        // Toeplitz: one kernel evaluation per lag.
        let lags: Vec<f64> = (0..n).map(|k| kernel.eval(step * k as f64)).collect();
        for j in 0..n {
            for i in j..n {
                let v = lags[i - j];
                entries[(i, j)] = v;
                entries[(j, i)] = v;
            }
            entries[(j, j)] = diag;
        }
    } else {
        for j in 0..n {
            entries[(j, j)] = diag;
            let pj = locations.point(j);
            for i in (j + 1)..n {
                let h = euclidean(locations.point(i), pj);
                if h < DUPLICATE_TOLERANCE && params.nugget_var == 0.0 {
                    return Err(Error::DuplicateLocation(j, i));
                }
                let v = kernel.eval(h);
                entries[(i, j)] = v;
                entries[(j, i)] = v;
            }
        }
    }
    Ok(CovMatrix { entries, factor: None, jitter: 0.0 })
}

/// Cross-covariance `r(|a_i - b_j|)` between two point sets, without nugget.
pub fn cross_cov_matrix(a: &Locations, b: &Locations, params: &MaternParams) -> Result<Mat<f64>> {
    if a.dim() != b.dim() {
        return Err(Error::Dimension("location sets differ in dimension".into()));
    }
    let kernel = MaternKernel::new(params)?;
    Ok(Mat::from_fn(a.len(), b.len(), |i, j| kernel.eval(euclidean(a.point(i), b.point(j)))))
}

/// `V diag(d_i^q) V^T` for the symmetric eigendecomposition `m = V diag(d) V^T`.
/// Any `q` is allowed, including negative and fractional powers.
pub fn matrix_power(m: &CovMatrix, q: f64) -> Result<CovMatrix> {
    if !q.is_finite() {
        return Err(Error::ParameterDomain(format!("power must be finite, got {q}")));
    }
    let n = m.n();
    let evd = m
        .entries
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::NotPositiveDefinite(format!("eigendecomposition failed: {e:?}")))?;
    let vals = evd.S().column_vector();
    let vecs = evd.U();
    let mut scaled = vecs.to_owned();
    for k in 0..n {
        let d = vals[k];
        if !(d > 0.0) {
            return Err(Error::NotPositiveDefinite(format!("eigenvalue {d} at index {k}")));
        }
        let w = d.powf(q);
        for i in 0..n {
            scaled[(i, k)] *= w;
        }
    }
    let product = &scaled * vecs.transpose();
    let entries = Mat::from_fn(n, n, |i, j| 0.5 * (product[(i, j)] + product[(j, i)]));
    Ok(CovMatrix { entries, factor: None, jitter: 0.0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
    }

    fn random_locations(n: usize, dim: usize, extent: f64, seed: u64) -> Locations {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Locations::new(dim, (0..n * dim).map(|_| rng.random::<f64>() * extent).collect()).unwrap()
    }

    fn max_rel_diff(a: MatRef<'_, f64>, b: MatRef<'_, f64>) -> f64 {
        let scale = (0..a.nrows())
            .flat_map(|i| (0..a.ncols()).map(move |j| (i, j)))
            .map(|(i, j)| b[(i, j)].abs())
            .fold(0.0, f64::max);
        (0..a.nrows())
            .flat_map(|i| (0..a.ncols()).map(move |j| (i, j)))
            .map(|(i, j)| (a[(i, j)] - b[(i, j)]).abs() / scale)
            .fold(0.0, f64::max)
    }

    #[test]
    fn matern_examples() {
        let p = MaternParams::new(1.0, 0.1, 1.0).unwrap();
        assert!(rel(matern_cov(0.0, &p).unwrap(), 0.01) < 1e-15);

        let p = MaternParams::new(1.0, 1.0, 0.5).unwrap();
        assert!(rel(matern_cov(1.0, &p).unwrap(), (-1.0f64).exp()) < 1e-10);
        assert!((matern_cov(1.0, &p).unwrap() - 0.367_879_4).abs() < 1e-7);

        let p = MaternParams::new(1.0, 1.0, 1.5).unwrap();
        assert!(rel(matern_cov(1.0, &p).unwrap(), 2.0 * (-1.0f64).exp()) < 1e-10);
        assert!((matern_cov(1.0, &p).unwrap() - 0.735_758_9).abs() < 1e-7);
    }

    #[test]
    fn matern_closed_forms_on_grid() {
        for &kappa in &[0.4, 1.0, 3.0] {
            for k in 1..200 {
                let h = 0.05 * k as f64;
                let x = kappa * h;
                let e = (-x).exp();
                let p12 = MaternParams::new(kappa, 1.3, 0.5).unwrap();
                let p32 = MaternParams::new(kappa, 1.3, 1.5).unwrap();
                let p52 = MaternParams::new(kappa, 1.3, 2.5).unwrap();
                let s2 = 1.69;
                assert!(rel(matern_cov(h, &p12).unwrap(), s2 * e) < 1e-10);
                assert!(rel(matern_cov(h, &p32).unwrap(), s2 * (1.0 + x) * e) < 1e-10);
                assert!(rel(matern_cov(h, &p52).unwrap(), s2 * (1.0 + x + x * x / 3.0) * e) < 1e-10);
            }
        }
    }

    #[test]
    fn matern_rejects_bad_input() {
        assert!(matches!(MaternParams::new(0.0, 1.0, 1.0), Err(Error::ParameterDomain(_))));
        assert!(matches!(MaternParams::new(1.0, -1.0, 1.0), Err(Error::ParameterDomain(_))));
        assert!(matches!(MaternParams::with_nugget(1.0, 1.0, 1.0, -1e-3), Err(Error::ParameterDomain(_))));
        let bad = MaternParams { kappa: 1.0, sigma: 1.0, nu: 0.0, nugget_var: 0.0 };
        assert!(matern_cov(1.0, &bad).is_err());
        assert!(matern_cov(-1.0, &MaternParams::new(1.0, 1.0, 1.0).unwrap()).is_err());
    }

    #[test]
    fn matern_nonincreasing_and_scale_equivariant() {
        for &nu in &[0.3, 0.5, 1.0, 2.0, 2.7, 6.0] {
            let base = MaternParams::new(1.0, 1.0, nu).unwrap();
            let mut prev = f64::INFINITY;
            for k in 0..=1000 {
                let h = 0.01 * k as f64;
                let v = matern_cov(h, &base).unwrap();
                assert!(v <= prev * (1.0 + 1e-13), "nu={nu} h={h}");
                prev = v;
                for &sigma in &[0.1, 1.0, 1.3] {
                    let p = base.with_sigma(sigma);
                    let ratio = matern_cov(h, &p).unwrap() / (sigma * sigma);
                    assert!((ratio - v).abs() <= 1e-14 * v.max(1e-300) + 1e-300);
                }
            }
        }
    }

    #[test]
    fn single_location_matrix() {
        let locs = Locations::from_points(&[vec![3.0, 4.0]]).unwrap();
        let p = MaternParams::with_nugget(0.4, 1.3, 2.0, 0.25).unwrap();
        let m = build_cov_matrix(&locs, &p).unwrap();
        assert_eq!(m.n(), 1);
        assert!(rel(m.get(0, 0), 1.69 + 0.25) < 1e-15);
    }

    #[test]
    fn duplicate_locations_rejected() {
        let locs = Locations::from_points(&[vec![1.0, 1.0], vec![1.0, 1.0 + 1e-13], vec![2.0, 0.0]]).unwrap();
        let p = MaternParams::new(1.0, 1.0, 1.0).unwrap();
        assert!(matches!(build_cov_matrix(&locs, &p), Err(Error::DuplicateLocation(0, 1))));
    }

    #[test]
    fn matrix_matches_double_loop() {
        let p = MaternParams::new(1.0, 0.4, 1.0).unwrap();
        for (dim, seed) in [(1, 1), (2, 2)] {
            let locs = random_locations(10, dim, 10.0, seed);
            let m = build_cov_matrix(&locs, &p).unwrap();
            for i in 0..10 {
                for j in 0..10 {
                    let h = euclidean(locs.point(i), locs.point(j));
                    let want = matern_cov(h, &p).unwrap();
                    assert!((m.get(i, j) - want).abs() <= 1e-12 * want.abs());
                }
            }
        }
        // Regular 1-D grids take the Toeplitz path.
        let grid = Locations::regular_grid_1d(50, 0.0, 10.0);
        let m = build_cov_matrix(&grid, &p).unwrap();
        for i in 0..50 {
            for j in 0..50 {
                let want = matern_cov(grid.distance(i, j), &p).unwrap();
                assert!((m.get(i, j) - want).abs() <= 1e-12 * want.abs());
            }
        }
    }

    #[test]
    fn factor_reproduces_entries() {
        let p = MaternParams::with_nugget(0.4, 1.3, 2.0, 1e-8).unwrap();
        let locs = random_locations(80, 2, 25.0, 7);
        let m = build_cov_matrix(&locs, &p).unwrap();
        let l = m.factor().unwrap();
        let llt = l * l.transpose();
        assert!(max_rel_diff(llt.as_ref(), m.entries()) < 1e-8);
    }

    #[test]
    fn cholesky_succeeds_for_random_configurations() {
        for seed in 0..20u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
            let nu = 0.3 + rng.random::<f64>() * 2.5;
            let kappa = 0.2 + rng.random::<f64>() * 3.0;
            let p = MaternParams::with_nugget(kappa, 1.0, nu, 1e-8).unwrap();
            let locs = random_locations(60, 1 + (seed as usize % 2), 10.0, seed);
            assert!(build_cov_matrix(&locs, &p).is_ok(), "seed {seed}");
        }
    }

    fn test_matrix() -> CovMatrix {
        let p = MaternParams::with_nugget(1.0, 1.0, 1.0, 0.05).unwrap();
        build_cov_matrix(&random_locations(25, 2, 5.0, 3), &p).unwrap()
    }

    #[test]
    fn power_identities() {
        let m = test_matrix();
        let one = matrix_power(&m, 1.0).unwrap();
        assert!(max_rel_diff(one.entries(), m.entries()) < 1e-10);

        let zero = matrix_power(&m, 0.0).unwrap();
        let eye = Mat::<f64>::identity(m.n(), m.n());
        assert!(max_rel_diff(zero.entries(), eye.as_ref()) < 1e-10);

        let half = matrix_power(&m, 0.5).unwrap();
        let sq = half.entries() * half.entries();
        assert!(max_rel_diff(sq.as_ref(), m.entries()) < 1e-8);
    }

    #[test]
    fn power_semigroup() {
        let m = test_matrix();
        let qs = [-0.5, 0.5, 1.0, 3.0];
        for &a in &qs {
            for &b in &qs {
                let lhs = matrix_power(&m, a + b).unwrap();
                let rhs = matrix_power(&m, a).unwrap().entries() * matrix_power(&m, b).unwrap().entries();
                assert!(max_rel_diff(rhs.as_ref(), lhs.entries()) < 1e-8, "q1={a} q2={b}");
            }
        }
    }

    #[test]
    fn power_rejects_indefinite() {
        let m = CovMatrix::from_row_major(2, &[1.0, 2.0, 2.0, 1.0]).unwrap();
        assert!(matches!(matrix_power(&m, 0.5), Err(Error::NotPositiveDefinite(_))));
        let mut m = m;
        assert!(matches!(m.factorize(), Err(Error::NotPositiveDefinite(_))));
    }

    #[test]
    fn solve_and_log_det() {
        let m = test_matrix();
        let b: Vec<f64> = (0..m.n()).map(|i| (i as f64).sin()).collect();
        let x = m.solve_vec(&b).unwrap();
        let back = m.mul_vec(&x).unwrap();
        for (u, v) in back.iter().zip(&b) {
            assert!((u - v).abs() < 1e-10);
        }
        let evals = m.entries().self_adjoint_eigenvalues(Side::Lower).unwrap();
        let want: f64 = evals.iter().map(|d| d.ln()).sum();
        assert!((m.log_det().unwrap() - want).abs() < 1e-9);
    }
}
