use faer::Mat;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::covkernel::Locations;
use crate::error::{Error, Result};

/// Centers each column and scales it to unit sample variance (divisor
/// `n - 1`).
pub fn standardize_per_replicate(values: &Mat<f64>) -> Result<Mat<f64>> {
    let mut cols: Vec<Vec<f64>> = (0..values.ncols()).map(|c| values.col(c).iter().copied().collect()).collect();
    standardize_columns(&mut cols)?;
    Ok(Mat::from_fn(values.nrows(), values.ncols(), |i, c| cols[c][i]))
}

/// In-place version of [`standardize_per_replicate`] on column vectors.
pub fn standardize_columns(columns: &mut [Vec<f64>]) -> Result<()> {
    for (c, col) in columns.iter_mut().enumerate() {
        let n = col.len();
        if n < 2 {
            return Err(Error::DegenerateColumn(c));
        }
        let mean = col.iter().sum::<f64>() / n as f64;
        let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
        if !(var > 0.0) || !var.is_finite() {
            return Err(Error::DegenerateColumn(c));
        }
        let sd = var.sqrt();
        col.iter_mut().for_each(|v| *v = (*v - mean) / sd);
    }
    Ok(())
}

/// Quasi-uniform planar sites: one point per unit cell of a square grid just
/// large enough for `n`, jittered by up to a quarter cell, with surplus cells
/// dropped at random.
pub fn synthetic_sites(n: usize, seed: u64) -> Locations {
    let side = (n as f64).sqrt().ceil() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cells = side * side;
    let mut keep: Vec<usize> = sample(&mut rng, cells, n).into_vec();
    keep.sort_unstable();
    let mut coords = Vec::with_capacity(2 * n);
    for cell in keep {
        let (i, j) = (cell % side, cell / side);
        coords.push(i as f64 + 0.5 + rng.random_range(-0.25..0.25));
        coords.push(j as f64 + 0.5 + rng.random_range(-0.25..0.25));
    }
    Locations::new(2, coords).expect("grid coordinates are finite")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_point_column() {
        let m = Mat::from_fn(2, 1, |i, _| 2.0 * i as f64);
        let s = standardize_per_replicate(&m).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((s[(0, 0)] + h).abs() < 1e-15 && (s[(1, 0)] - h).abs() < 1e-15);
    }

    #[test]
    fn idempotent_and_degenerate() {
        let m = Mat::from_fn(7, 3, |i, c| ((i * 5 + c * 3) % 7) as f64 * (c + 1) as f64);
        let once = standardize_per_replicate(&m).unwrap();
        let twice = standardize_per_replicate(&once).unwrap();
        for c in 0..3 {
            let col: Vec<f64> = once.col(c).iter().copied().collect();
            let mean = col.iter().sum::<f64>() / 7.0;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 6.0;
            assert!(mean.abs() < 1e-15 && (var - 1.0).abs() < 1e-14);
            for i in 0..7 {
                assert!((once[(i, c)] - twice[(i, c)]).abs() < 1e-12);
            }
        }
        let constant = Mat::from_fn(4, 2, |i, c| if c == 0 { i as f64 } else { 3.0 });
        assert_eq!(standardize_per_replicate(&constant), Err(Error::DegenerateColumn(1)));
    }

    #[test]
    fn sites_are_distinct_and_in_domain() {
        let s = synthetic_sites(620, 3);
        assert_eq!(s.len(), 620);
        for p in s.iter() {
            assert!(p.iter().all(|&c| (0.25..=24.75).contains(&c)));
        }
        for i in 0..620 {
            for j in (i + 1)..620 {
                assert!(s.distance(i, j) >= 0.5 - 1e-12);
            }
        }
        assert_eq!(s, synthetic_sites(620, 3));
        assert_ne!(s, synthetic_sites(620, 4));
    }
}
