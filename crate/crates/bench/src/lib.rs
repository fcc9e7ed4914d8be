//! Benchmark fixtures.

use smoothconf_core::experiments::synthetic_sites;
use smoothconf_core::{Locations, Mat, MaternParams};

pub fn sites(n: usize) -> Locations {
    synthetic_sites(n, 1)
}

pub fn params() -> MaternParams {
    MaternParams::new(0.4, 1.3, 1.5).expect("valid parameters")
}

/// Intercept and a smooth trend.
pub fn design(locations: &Locations) -> Mat<f64> {
    Mat::from_fn(locations.len(), 2, |i, j| if j == 0 { 1.0 } else { locations.point(i)[0].sin() })
}
