//! Eigenbasis (diagonal) models of fractional covariance operators.
//!
//! Everything here lives in the coordinates of an orthonormal eigenbasis
//! `{e_j}` of a positive operator `A` with eigenvalues `lambda_j ~ j^eta`. The
//! covariance is `A^{-alpha}`, the smoothing operator is `A_S^gamma` with
//! eigenvalues `lambda_{S,j}`, and the covariate is given by its coefficients
//! `X_j = (X, e_j)`. Indices are 1-based throughout, matching `j`.

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Offset that keeps canonical covariates strictly outside `H^{p + eps/eta}`.
pub const SOBOLEV_OFFSET: f64 = 0.01;

/// Default truncation for norms and expectations.
pub const DEFAULT_TERMS: usize = 10_000;

/// A real sequence indexed by `j = 1, 2, ...`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Sequence {
    /// `coef * j^exponent`.
    Power { coef: f64, exponent: f64 },
    /// Explicit values for `j = 1..=len`; undefined beyond.
    Values(Vec<f64>),
    Zero,
}

impl Sequence {
    pub fn power(coef: f64, exponent: f64) -> Self {
        Sequence::Power { coef, exponent }
    }

    /// Value at the 1-based index `j`. Panics if an explicit sequence is too
    /// short; callers check [`Sequence::covers`] first.
    #[inline]
    pub fn at(&self, j: usize) -> f64 {
        debug_assert!(j >= 1);
        match self {
            Sequence::Power { coef, exponent } => coef * (j as f64).powf(*exponent),
            Sequence::Values(v) => v[j - 1],
            Sequence::Zero => 0.0,
        }
    }

    pub fn covers(&self, n: usize) -> bool {
        match self {
            Sequence::Values(v) => v.len() >= n,
            _ => true,
        }
    }

    pub fn take(&self, n: usize) -> Vec<f64> {
        (1..=n).map(|j| self.at(j)).collect()
    }

    fn is_zero(&self) -> bool {
        match self {
            Sequence::Zero => true,
            Sequence::Power { coef, .. } => *coef == 0.0,
            Sequence::Values(v) => v.iter().all(|&x| x == 0.0),
        }
    }
}

/// The diagonal model: eigenvalues, covariate coefficients and exponents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralModel {
    /// Growth exponent of both eigenvalue sequences.
    pub eta: f64,
    pub lambda: Sequence,
    pub lambda_s: Sequence,
    pub x_coeff: Sequence,
    /// Covariance exponent, `C = A^{-alpha}`.
    pub alpha: f64,
    /// Smoothing exponent, `S = A_S^gamma`.
    pub gamma: f64,
    pub beta_true: f64,
    /// Baseline mean coefficients `m_j`.
    pub m_coeff: Sequence,
    /// Sobolev index `p` of the covariate, when known exactly.
    pub covariate_index: Option<f64>,
}

impl SpectralModel {
    /// `lambda_j = lambda_{S,j} = j^eta` with the canonical covariate of index `p`.
    pub fn canonical(eta: f64, p: f64, alpha: f64, gamma: f64, beta: f64) -> Result<Self> {
        let model = Self {
            eta,
            lambda: Sequence::power(1.0, eta),
            lambda_s: Sequence::power(1.0, eta),
            x_coeff: canonical_coefficients(p, eta)?,
            alpha,
            gamma,
            beta_true: beta,
            m_coeff: Sequence::Zero,
            covariate_index: Some(p),
        };
        model.validate(1)?;
        Ok(model)
    }

    /// Checks the exponents, that every sequence covers `n` terms, that the
    /// eigenvalues are positive and nondecreasing, and that the covariate is
    /// not identically zero.
    pub fn validate(&self, n: usize) -> Result<()> {
        if !(self.eta > 0.0) {
            return Err(Error::ParameterDomain(format!("eta must be positive, got {}", self.eta)));
        }
        if !(self.alpha > 0.0) {
            return Err(Error::ParameterDomain(format!("alpha must be positive, got {}", self.alpha)));
        }
        if !self.gamma.is_finite() || !self.beta_true.is_finite() {
            return Err(Error::ParameterDomain("gamma and beta must be finite".into()));
        }
        for (name, seq) in [
            ("lambda", &self.lambda),
            ("lambda_s", &self.lambda_s),
            ("x_coeff", &self.x_coeff),
            ("m_coeff", &self.m_coeff),
        ] {
            if !seq.covers(n) {
                return Err(Error::Dimension(format!("{name} has fewer than {n} terms")));
            }
        }
        let mut prev = 0.0;
        for j in 1..=n {
            let l = self.lambda.at(j);
            if !(l > 0.0) || l < prev {
                return Err(Error::ParameterDomain(format!(
                    "lambda must be positive and nondecreasing; lambda_{j} = {l}"
                )));
            }
            prev = l;
            if !(self.lambda_s.at(j) > 0.0) {
                return Err(Error::ParameterDomain(format!("lambda_s_{j} must be positive")));
            }
        }
        if self.x_coeff.is_zero() {
            return Err(Error::DegenerateDesign("covariate is identically zero".into()));
        }
        Ok(())
    }

    /// `lambda_j^alpha X_j^2` summed over `j <= n`: the truncated squared
    /// Cameron–Martin norm of the covariate.
    fn cm_norm_sq(&self, n: usize) -> f64 {
        (1..=n)
            .map(|j| {
                let x = self.x_coeff.at(j);
                self.lambda.at(j).powf(self.alpha) * x * x
            })
            .sum()
    }

    fn check_design(&self, n: usize) -> Result<f64> {
        if n == 0 {
            return Err(Error::ParameterDomain("need at least one term".into()));
        }
        self.validate(n)?;
        let denom = self.cm_norm_sq(n);
        if !(denom > 0.0) {
            return Err(Error::DegenerateDesign(format!("X_j = 0 for all j <= {n}")));
        }
        Ok(denom)
    }

    /// Regime of this model under the given observation scheme, with the
    /// expected limit filled in where it exists.
    pub fn limit_regime(&self, obs: ObservationMode, n_terms: usize) -> Result<LimitRegime> {
        let p = match self.covariate_index {
            Some(p) => p,
            None => estimate_sobolev_index(self, n_terms)?,
        };
        let mut regime = classify_limit(p, self.alpha, self.gamma, obs)?;
        regime.expected_limit = match regime.kind {
            RegimeKind::ConvergesToTrueBeta => Some(self.beta_true),
            RegimeKind::ConvergesToZero => Some(0.0),
            RegimeKind::RandomFiniteLimit => Some(limit_mean(self, n_terms)?),
            RegimeKind::DivergesSigned | RegimeKind::Unspecified => None,
        };
        Ok(regime)
    }
}

/// Canonical covariate of Sobolev index `p` for `lambda_j = j^eta`:
/// `X_j = j^{-(eta p + 1 + eps)/2}` with `eps = 0.01`. Then
/// `sum lambda_j^s X_j^2` converges for `s <= p` and diverges once
/// `s >= p + eps / eta`.
pub fn canonical_coefficients(p: f64, eta: f64) -> Result<Sequence> {
    if !(p > 0.0) || !(eta > 0.0) {
        return Err(Error::ParameterDomain(format!("p and eta must be positive, got p={p}, eta={eta}")));
    }
    Ok(Sequence::power(1.0, -(eta * p + 1.0 + SOBOLEV_OFFSET) / 2.0))
}

/// Partial sum `sum_{j <= n_terms} lambda_j^s X_j^2`.
pub fn sobolev_norm_sq(model: &SpectralModel, s: f64, n_terms: usize) -> Result<f64> {
    if n_terms == 0 {
        return Err(Error::ParameterDomain("n_terms must be at least 1".into()));
    }
    model.validate(n_terms)?;
    Ok((1..=n_terms)
        .map(|j| {
            let x = model.x_coeff.at(j);
            model.lambda.at(j).powf(s) * x * x
        })
        .sum())
}

/// Empirical constants `(c, C)` with `c j^eta <= seq_j <= C j^eta` on `j <= n`.
pub fn growth_constants(seq: &Sequence, eta: f64, n: usize) -> Result<(f64, f64)> {
    if n == 0 || !seq.covers(n) {
        return Err(Error::Dimension(format!("sequence does not cover {n} terms")));
    }
    Ok((1..=n).fold((f64::INFINITY, 0.0f64), |(lo, hi), j| {
        let r = seq.at(j) / (j as f64).powf(eta);
        (lo.min(r), hi.max(r))
    }))
}

/// How the process is observed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ObservationMode {
    /// Point evaluations `Y(s_i)` at a dense sequence of locations.
    PointObservations,
    /// Spectral coefficients `(Y, e_i)`, `i = 1..n`.
    EigenbasisObservations,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RegimeKind {
    ConvergesToTrueBeta,
    ConvergesToZero,
    DivergesSigned,
    RandomFiniteLimit,
    Unspecified,
}

impl fmt::Display for RegimeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            RegimeKind::ConvergesToTrueBeta => "ConvergesToTrueBeta",
            RegimeKind::ConvergesToZero => "ConvergesToZero",
            RegimeKind::DivergesSigned => "DivergesSigned",
            RegimeKind::RandomFiniteLimit => "RandomFiniteLimit",
            RegimeKind::Unspecified => "Unspecified",
        };
        f.write_str(s)
    }
}

/// Asymptotic behaviour of the estimated coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitRegime {
    pub kind: RegimeKind,
    /// `beta`, `0` or `E beta_inf` when known. Always `None` for divergence.
    pub expected_limit: Option<f64>,
}

impl LimitRegime {
    fn new(kind: RegimeKind) -> Self {
        let expected_limit = (kind == RegimeKind::ConvergesToZero).then_some(0.0);
        Self { kind, expected_limit }
    }
}

impl fmt::Display for LimitRegime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.expected_limit {
            Some(v) if self.kind != RegimeKind::ConvergesToZero => write!(f, "{} (limit {v})", self.kind),
            _ => write!(f, "{}", self.kind),
        }
    }
}

/// Limit of the GLS/ML coefficient when the covariate has Sobolev index
/// exactly `p`, the covariance is `A^{-alpha}` and the data were smoothed by
/// `A_S^gamma`.
///
/// Eigenbasis observations are classified completely. Point observations only
/// in the three cases where the limit is known; everything else is
/// `Unspecified`.
pub fn classify_limit(p: f64, alpha: f64, gamma: f64, obs: ObservationMode) -> Result<LimitRegime> {
    if !(p > 0.0) || p.is_nan() {
        return Err(Error::ParameterDomain(format!("p must be positive, got {p}")));
    }
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::ParameterDomain(format!("alpha must be positive, got {alpha}")));
    }
    if gamma.is_nan() {
        return Err(Error::ParameterDomain("gamma is NaN".into()));
    }
    use RegimeKind::*;
    let kind = match obs {
        ObservationMode::EigenbasisObservations => {
            if p < alpha {
                if gamma == 0.0 {
                    ConvergesToTrueBeta
                } else if gamma < 0.0 {
                    ConvergesToZero
                } else {
                    DivergesSigned
                }
            } else if gamma > p - alpha {
                DivergesSigned
            } else {
                RandomFiniteLimit
            }
        }
        ObservationMode::PointObservations => {
            if p < alpha && gamma == 0.0 {
                ConvergesToTrueBeta
            } else if p < alpha && 2.0 * gamma <= p - alpha {
                ConvergesToZero
            } else if p >= 2.0 * alpha && gamma < 0.0 {
                RandomFiniteLimit
            } else {
                Unspecified
            }
        }
    };
    Ok(LimitRegime::new(kind))
}

/// `(A_n, B_n)`: the bias factor `E beta_hat_n = beta A_n` (for `m = 0`) and the
/// variance `Var beta_hat_n = B_n`.
pub fn an_bn_terms(model: &SpectralModel, n: usize) -> Result<(f64, f64)> {
    let denom = model.check_design(n)?;
    let numer: f64 = (1..=n)
        .map(|j| {
            let x = model.x_coeff.at(j);
            model.lambda.at(j).powf(model.alpha) * model.lambda_s.at(j).powf(model.gamma) * x * x
        })
        .sum();
    Ok((numer / denom, denom / (denom * denom)))
}

/// Closed-form ML estimate from the first `n` eigenbasis observations
/// `Y_i = lambda_{S,i}^gamma X_i beta + m_i + lambda_i^{-alpha/2} xi_i`, with the
/// `xi_i` drawn from a generator seeded by `seed`.
pub fn eigenbasis_beta_hat(model: &SpectralModel, n: usize, seed: u64) -> Result<f64> {
    Ok(eigenbasis_beta_path(model, &[n], seed)?[0])
}

/// Estimates at every `n` in `ns` from one realization: the noise draws are
/// shared, so the estimate at `n` uses the first `n` observations of the same
/// sequence. Each entry equals `eigenbasis_beta_hat(model, n, seed)`.
pub fn eigenbasis_beta_path(model: &SpectralModel, ns: &[usize], seed: u64) -> Result<Vec<f64>> {
    let n_max = ns.iter().copied().max().unwrap_or(0);
    if ns.iter().any(|&n| n == 0) || n_max == 0 {
        return Err(Error::ParameterDomain("n must be at least 1".into()));
    }
    model.validate(n_max)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut numer = 0.0;
    let mut denom = 0.0;
    let mut sums = Vec::with_capacity(n_max);
    for j in 1..=n_max {
        let x = model.x_coeff.at(j);
        let lambda = model.lambda.at(j);
        let xi: f64 = StandardNormal.sample(&mut rng);
        let y = model.lambda_s.at(j).powf(model.gamma) * x * model.beta_true
            + model.m_coeff.at(j)
            + lambda.powf(-model.alpha / 2.0) * xi;
        let w = lambda.powf(model.alpha);
        numer += w * y * x;
        denom += w * x * x;
        sums.push((numer, denom));
    }
    ns.iter()
        .map(|&n| {
            let (num, den) = sums[n - 1];
            if den > 0.0 {
                Ok(num / den)
            } else {
                Err(Error::DegenerateDesign(format!("X_j = 0 for all j <= {n}")))
            }
        })
        .collect()
}

/// `E beta_inf = (m + beta S X, X)_C / ||X||_C^2`, truncated at `n_terms`.
///
/// Fails with [`Error::Regime`] unless the model is in the random-finite-limit
/// regime under eigenbasis observations.
pub fn beta_infinity_expectation(model: &SpectralModel, n_terms: usize) -> Result<f64> {
    let p = match model.covariate_index {
        Some(p) => p,
        None => estimate_sobolev_index(model, n_terms)?,
    };
    let regime = classify_limit(p, model.alpha, model.gamma, ObservationMode::EigenbasisObservations)?;
    if regime.kind != RegimeKind::RandomFiniteLimit {
        return Err(Error::Regime(regime.kind.to_string()));
    }
    limit_mean(model, n_terms)
}

fn limit_mean(model: &SpectralModel, n_terms: usize) -> Result<f64> {
    let denom = model.check_design(n_terms)?;
    let numer: f64 = (1..=n_terms)
        .map(|j| {
            let x = model.x_coeff.at(j);
            let sx = model.lambda_s.at(j).powf(model.gamma) * x;
            model.lambda.at(j).powf(model.alpha) * (model.m_coeff.at(j) + model.beta_true * sx) * x
        })
        .sum();
    Ok(numer / denom)
}

/// Sobolev index read off the tail decay of the coefficients: with
/// `|X_j| ~ j^{-a}` and `lambda_j ~ j^{eta'}` on `j in [n/10, n]`, the index is
/// `(2a - 1) / eta'`. A covariate that vanishes on the tail lies in every
/// space and gets `+inf`.
pub fn estimate_sobolev_index(model: &SpectralModel, n_terms: usize) -> Result<f64> {
    if n_terms < 20 {
        return Err(Error::ParameterDomain("need at least 20 terms to estimate the index".into()));
    }
    model.validate(n_terms)?;
    let lo = n_terms / 10;
    let tail: Vec<usize> = (lo.max(1)..=n_terms).collect();
    if tail.iter().all(|&j| model.x_coeff.at(j) == 0.0) {
        return Ok(f64::INFINITY);
    }
    let pts: Vec<(f64, f64, f64)> = tail
        .iter()
        .filter(|&&j| model.x_coeff.at(j) != 0.0)
        .map(|&j| {
            let lj = (j as f64).ln();
            (lj, model.x_coeff.at(j).abs().ln(), model.lambda.at(j).ln())
        })
        .collect();
    let slope = |f: &dyn Fn(&(f64, f64, f64)) -> f64| {
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(f).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (f(p) - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        sxy / sxx
    };
    let decay = -slope(&|p| p.1);
    let growth = slope(&|p| p.2);
    if !(growth > 0.0) {
        return Err(Error::ParameterDomain("eigenvalues do not grow on the tail".into()));
    }
    let p = (2.0 * decay - 1.0) / growth;
    if p > 0.0 {
        Ok(p)
    } else {
        Err(Error::ParameterDomain(format!("covariate is not in L2 (estimated index {p})")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ObservationMode::*;
    use RegimeKind::*;

    fn kind(p: f64, a: f64, g: f64, obs: ObservationMode) -> RegimeKind {
        classify_limit(p, a, g, obs).unwrap().kind
    }

    #[test]
    fn sobolev_norm_examples() {
        let mut m = SpectralModel::canonical(2.0, 1.0, 2.0, 0.0, 1.0).unwrap();
        m.x_coeff = Sequence::Values(vec![1.0, 0.0, 0.0, 0.0]);
        m.lambda = Sequence::Values(vec![1.0, 4.0, 9.0, 16.0]);
        for s in [-1.0, 0.0, 0.7, 3.0] {
            assert_eq!(sobolev_norm_sq(&m, s, 4).unwrap(), 1.0);
        }

        m.lambda = Sequence::power(1.0, 2.0);
        m.x_coeff = Sequence::power(1.0, -2.0);
        let got = sobolev_norm_sq(&m, 1.0, 3).unwrap();
        assert!((got - (1.0 + 0.25 + 1.0 / 9.0)).abs() < 1e-15);
        assert!((got - 1.361_111_111).abs() < 1e-9);

        let energy: f64 = (1..=50).map(|j| (j as f64).powi(-4)).sum();
        assert!((sobolev_norm_sq(&m, 0.0, 50).unwrap() - energy).abs() < 1e-15);
        assert!(sobolev_norm_sq(&m, 1.0, 0).is_err());
    }

    #[test]
    fn sobolev_norm_monotone() {
        let m = SpectralModel::canonical(2.0, 1.0, 2.0, 0.0, 1.0).unwrap();
        let mut prev = 0.0;
        for n in [1, 2, 5, 10, 100, 1000] {
            let v = sobolev_norm_sq(&m, 1.0, n).unwrap();
            assert!(v >= prev);
            prev = v;
        }
        let mut prev = 0.0;
        for s in [0.0, 0.25, 0.5, 1.0, 1.5] {
            let v = sobolev_norm_sq(&m, s, 200).unwrap();
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn classifier_examples() {
        assert_eq!(kind(1.0, 2.0, 0.0, EigenbasisObservations), ConvergesToTrueBeta);
        assert_eq!(kind(1.0, 2.0, 0.5, EigenbasisObservations), DivergesSigned);
        assert_eq!(kind(1.0, 2.0, 0.25, PointObservations), Unspecified);
        assert_eq!(kind(4.0, 2.0, 1.0, EigenbasisObservations), RandomFiniteLimit);
        assert!(classify_limit(0.0, 1.0, 0.0, PointObservations).is_err());
        assert!(classify_limit(1.0, -1.0, 0.0, EigenbasisObservations).is_err());
        assert_eq!(classify_limit(1.0, 2.0, -1.0, EigenbasisObservations).unwrap().expected_limit, Some(0.0));
        assert_eq!(classify_limit(1.0, 2.0, 1.0, EigenbasisObservations).unwrap().expected_limit, None);
    }

    #[test]
    fn an_bn_examples() {
        let mut m = SpectralModel::canonical(2.0, 1.0, 2.0, 0.0, 1.0).unwrap();
        for n in [1, 7, 300] {
            assert_eq!(an_bn_terms(&m, n).unwrap().0, 1.0);
        }
        let (_, b1) = an_bn_terms(&m, 1).unwrap();
        assert!((b1 - 1.0 / (m.lambda.at(1).powf(2.0) * m.x_coeff.at(1).powi(2))).abs() < 1e-15);

        m.lambda = Sequence::Values(vec![1.0, 4.0]);
        m.lambda_s = Sequence::Values(vec![1.0, 4.0]);
        m.x_coeff = Sequence::Values(vec![1.0, 1.0]);
        m.alpha = 1.0;
        m.gamma = 1.0;
        let (a2, b2) = an_bn_terms(&m, 2).unwrap();
        assert!((a2 - 3.4).abs() < 1e-15);
        assert!((b2 - 0.2).abs() < 1e-15);
    }

    #[test]
    fn degenerate_design_rejected() {
        let mut m = SpectralModel::canonical(2.0, 1.0, 2.0, 0.0, 1.0).unwrap();
        m.x_coeff = Sequence::Values(vec![0.0, 0.0, 1.0]);
        assert!(matches!(eigenbasis_beta_hat(&m, 2, 0), Err(Error::DegenerateDesign(_))));
        assert!(matches!(an_bn_terms(&m, 2), Err(Error::DegenerateDesign(_))));
        assert!(eigenbasis_beta_hat(&m, 3, 0).is_ok());
        m.x_coeff = Sequence::Zero;
        assert!(matches!(m.validate(3), Err(Error::DegenerateDesign(_))));
    }

    #[test]
    fn single_term_estimate_is_ratio() {
        let m = SpectralModel::canonical(2.0, 1.0, 2.0, 0.3, 1.7).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let xi: f64 = StandardNormal.sample(&mut rng);
        let x1 = m.x_coeff.at(1);
        let y1 = m.lambda_s.at(1).powf(m.gamma) * x1 * m.beta_true + m.lambda.at(1).powf(-1.0) * xi;
        assert!((eigenbasis_beta_hat(&m, 1, 42).unwrap() - y1 / x1).abs() < 1e-15);
    }

    #[test]
    fn path_matches_pointwise() {
        let m = SpectralModel::canonical(2.0, 1.0, 2.0, -0.5, 1.0).unwrap();
        let ns = [1, 10, 50, 400];
        let path = eigenbasis_beta_path(&m, &ns, 9).unwrap();
        for (&n, &b) in ns.iter().zip(&path) {
            assert_eq!(eigenbasis_beta_hat(&m, n, 9).unwrap(), b);
        }
    }

    #[test]
    fn mean_is_beta_when_unsmoothed() {
        let m = SpectralModel::canonical(2.0, 1.0, 2.0, 0.0, 1.3).unwrap();
        let n = 50;
        let seeds = 100_000u64;
        let draws: Vec<f64> = (0..seeds).map(|s| eigenbasis_beta_hat(&m, n, s).unwrap()).collect();
        let mean = draws.iter().sum::<f64>() / seeds as f64;
        let var = draws.iter().map(|b| (b - mean).powi(2)).sum::<f64>() / (seeds - 1) as f64;
        let se = (var / seeds as f64).sqrt();
        assert!((mean - 1.3).abs() < 3.0 * se, "mean {mean} se {se}");
    }

    #[test]
    fn smoothing_drives_estimate_to_zero() {
        // lambda_j = j^2, alpha = 1, gamma = -1, X_j = 1/j.
        let m = SpectralModel {
            eta: 2.0,
            lambda: Sequence::power(1.0, 2.0),
            lambda_s: Sequence::power(1.0, 2.0),
            x_coeff: Sequence::power(1.0, -1.0),
            alpha: 1.0,
            gamma: -1.0,
            beta_true: 1.0,
            m_coeff: Sequence::Zero,
            covariate_index: None,
        };
        let seeds = 1000u64;
        let smaller = (0..seeds)
            .filter(|&s| {
                let path = eigenbasis_beta_path(&m, &[100, 10_000], s).unwrap();
                path[1].abs() < path[0].abs()
            })
            .count() as f64
            / seeds as f64;

        // Oracle: with unit weights the estimator is A_n + (sum_{j<=n} xi_j) / n,
        // so the pair is a shifted bivariate normal sharing the first 100 draws.
        let a = |n: usize| (1..=n).map(|j| (j as f64).powi(-2)).sum::<f64>() / n as f64;
        let (a100, a10k) = (a(100), a(10_000));
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let trials = 200_000;
        let hits = (0..trials)
            .filter(|_| {
                let head: f64 = StandardNormal.sample(&mut rng);
                let tail: f64 = StandardNormal.sample(&mut rng);
                let s100 = 10.0 * head;
                let s10k = s100 + 9900f64.sqrt() * tail;
                (a10k + s10k / 1e4).abs() < (a100 + s100 / 100.0).abs()
            })
            .count() as f64
            / trials as f64;
        let sd = (hits * (1.0 - hits) / seeds as f64).sqrt();
        assert!((smaller - hits).abs() < 4.0 * sd, "{smaller} vs {hits}");
        assert!(smaller > 0.9);
    }

    #[test]
    fn beta_infinity_examples() {
        // gamma = 0 with p >= alpha: the limit is centred at beta.
        let m = SpectralModel::canonical(2.0, 3.0, 2.0, 0.0, 0.8).unwrap();
        assert!((beta_infinity_expectation(&m, 1000).unwrap() - 0.8).abs() < 1e-14);

        // lambda = j^2, alpha = 2, gamma = -1, X_j = j^-3, beta = 1.
        let m = SpectralModel {
            eta: 2.0,
            lambda: Sequence::power(1.0, 2.0),
            lambda_s: Sequence::power(1.0, 2.0),
            x_coeff: Sequence::power(1.0, -3.0),
            alpha: 2.0,
            gamma: -1.0,
            beta_true: 1.0,
            m_coeff: Sequence::Zero,
            covariate_index: None,
        };
        let direct = |n: usize| {
            let num: f64 = (1..=n).map(|j| (j as f64).powi(-4)).sum();
            let den: f64 = (1..=n).map(|j| (j as f64).powi(-2)).sum();
            num / den
        };
        let e3 = beta_infinity_expectation(&m, 1000).unwrap();
        let e4 = beta_infinity_expectation(&m, 10_000).unwrap();
        assert!((e4 - direct(10_000)).abs() < 1e-14);
        assert!((e3 - direct(1000)).abs() < 1e-14);
        // Full sums are zeta(4) / zeta(2) = pi^2 / 15; the truncation error is
        // dominated by the 1/n tail of the denominator.
        let limit = std::f64::consts::PI.powi(2) / 15.0;
        assert!(e3 > e4 && e4 > limit);
        assert!(e4 - limit < 1e-4 * limit);

        // Baseline mean only.
        let mut m = SpectralModel::canonical(2.0, 3.0, 2.0, 0.0, 0.0).unwrap();
        let n = 5000;
        let ms: Vec<f64> = (1..=n).map(|j| m.x_coeff.at(j) * m.lambda.at(j).powf(-2.0)).collect();
        m.m_coeff = Sequence::Values(ms);
        let got = beta_infinity_expectation(&m, n).unwrap();
        let num: f64 = (1..=n).map(|j| m.x_coeff.at(j).powi(2)).sum();
        let den: f64 = (1..=n).map(|j| (j as f64).powi(4) * m.x_coeff.at(j).powi(2)).sum();
        assert!((got - num / den).abs() < 1e-14);
    }

    #[test]
    fn beta_infinity_regime_mismatch() {
        let m = SpectralModel::canonical(2.0, 1.0, 2.0, 0.0, 1.0).unwrap();
        assert!(matches!(beta_infinity_expectation(&m, 100), Err(Error::Regime(_))));
    }

    #[test]
    fn canonical_coefficient_properties() {
        let seq = canonical_coefficients(1.0, 2.0).unwrap();
        assert_eq!(seq.at(1), 1.0);
        assert!(canonical_coefficients(0.0, 2.0).is_err());

        // Partial sums of j^(2s) X_j^2 sampled at decades up to 10^6.
        let partial = |s: f64| {
            let mut out = Vec::new();
            let mut sum = 0.0;
            for j in 1..=1_000_000usize {
                sum += (j as f64).powf(2.0 * s) * seq.at(j).powi(2);
                if j >= 10_000 && (j as f64).log10().fract() == 0.0 {
                    out.push(sum);
                }
            }
            out
        };
        // At s = p the terms are j^{-1-eps}: bounded by 1 + 1/eps, with decade
        // increments shrinking by 10^{-eps}.
        let conv = partial(1.0);
        let bound = 1.0 + 1.0 / SOBOLEV_OFFSET;
        assert!(conv.iter().all(|&v| v < bound));
        let incs: Vec<f64> = conv.windows(2).map(|w| w[1] - w[0]).collect();
        for w in incs.windows(2) {
            let ratio = w[1] / w[0];
            assert!((ratio - 10f64.powf(-SOBOLEV_OFFSET)).abs() < 1e-3, "{ratio}");
        }
        // At s = 1.5 the partial sums blow through that bound and keep growing
        // roughly tenfold per decade.
        let div = partial(1.5);
        assert!(div[0] > bound);
        for w in div.windows(2) {
            assert!(w[1] / w[0] > 5.0, "{w:?}");
        }
    }

    #[test]
    fn growth_constants_of_power_law() {
        let (c, cap) = growth_constants(&Sequence::power(2.5, 2.0), 2.0, 10_000).unwrap();
        assert!((c - 2.5).abs() < 1e-12 && (cap - 2.5).abs() < 1e-12);
        let wobble = Sequence::Values((1..=10_000).map(|j| (j as f64).powi(2) * (1.5 + (j as f64).sin())).collect());
        let (c, cap) = growth_constants(&wobble, 2.0, 10_000).unwrap();
        assert!(c > 0.5 - 1e-9 && cap < 2.5 + 1e-9);
    }

    #[test]
    fn sobolev_index_estimate() {
        let mut m = SpectralModel::canonical(2.0, 1.7, 2.0, 0.0, 1.0).unwrap();
        m.covariate_index = None;
        let p = estimate_sobolev_index(&m, 10_000).unwrap();
        assert!((p - (1.7 + SOBOLEV_OFFSET / 2.0)).abs() < 1e-9);
    }

    #[test]
    fn limit_regime_fills_expectation() {
        let m = SpectralModel::canonical(2.0, 4.0, 2.0, 1.0, 1.0).unwrap();
        let r = m.limit_regime(EigenbasisObservations, 10_000).unwrap();
        assert_eq!(r.kind, RandomFiniteLimit);
        assert!((r.expected_limit.unwrap() - beta_infinity_expectation(&m, 10_000).unwrap()).abs() < 1e-15);
        let m = SpectralModel::canonical(2.0, 1.0, 2.0, 0.5, 1.0).unwrap();
        assert_eq!(m.limit_regime(EigenbasisObservations, 100).unwrap().expected_limit, None);
    }
}
