//! Derivative-free simplex minimization (Nelder–Mead).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NelderMeadConfig {
    /// Budget of objective evaluations across all restarts.
    pub max_evals: usize,
    /// Stop when the spread of objective values over the simplex is below this.
    pub f_tol: f64,
    /// ... and every vertex lies within this distance of the best one.
    pub x_tol: f64,
    /// Edge length of the initial axis-aligned simplex.
    pub initial_step: f64,
    /// Fresh simplices built around the incumbent after convergence.
    pub restarts: usize,
}

impl Default for NelderMeadConfig {
    fn default() -> Self {
        Self { max_evals: 2000, f_tol: 1e-8, x_tol: 1e-5, initial_step: 0.5, restarts: 1 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub point: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
}

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

/// Minimizes `f` starting from `x0`. Non-finite objective values are treated
/// as `+inf`, so the objective may signal infeasible points that way.
///
/// Returns [`Error::Convergence`] carrying the best point found when the
/// evaluation budget runs out first.
pub fn nelder_mead<F>(mut f: F, x0: &[f64], config: &NelderMeadConfig) -> Result<Minimum>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };

    let dim = x0.len();
    if dim == 0 {
        let value = eval(x0, &mut evals);
        return Ok(Minimum { point: Vec::new(), value, evaluations: evals });
    }

    let mut best = x0.to_vec();
    let mut best_value = eval(&best, &mut evals);
    let mut converged = false;

    for _round in 0..=config.restarts {
        let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
        simplex.push((best.clone(), best_value));
        for i in 0..dim {
            let mut v = best.clone();
            v[i] += config.initial_step;
            let fv = eval(&v, &mut evals);
            simplex.push((v, fv));
        }

        converged = false;
        while evals < config.max_evals {
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            let (f_lo, f_hi) = (simplex[0].1, simplex[dim].1);
            let spread = if f_hi.is_finite() { f_hi - f_lo } else { f64::INFINITY };
            let diameter = simplex[1..]
                .iter()
                .map(|(v, _)| v.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
                .fold(0.0, f64::max);
            if spread <= config.f_tol && diameter <= config.x_tol {
                converged = true;
                break;
            }

            let centroid: Vec<f64> = (0..dim)
                .map(|k| simplex[..dim].iter().map(|(v, _)| v[k]).sum::<f64>() / dim as f64)
                .collect();
            let worst = simplex[dim].0.clone();
            let along = |t: f64| -> Vec<f64> {
                centroid.iter().zip(&worst).map(|(c, w)| c + t * (c - w)).collect()
            };

            let reflected = along(REFLECT);
            let f_r = eval(&reflected, &mut evals);
            if f_r < simplex[0].1 {
                let expanded = along(EXPAND);
                let f_e = eval(&expanded, &mut evals);
                simplex[dim] = if f_e < f_r { (expanded, f_e) } else { (reflected, f_r) };
            } else if f_r < simplex[dim - 1].1 {
                simplex[dim] = (reflected, f_r);
            } else {
                let (contracted, f_c) = if f_r < simplex[dim].1 {
                    let c = along(CONTRACT);
                    let fc = eval(&c, &mut evals);
                    (c, fc)
                } else {
                    let c = along(-CONTRACT);
                    let fc = eval(&c, &mut evals);
                    (c, fc)
                };
                if f_c < f_r.min(simplex[dim].1) {
                    simplex[dim] = (contracted, f_c);
                } else {
                    let anchor = simplex[0].0.clone();
                    for vertex in simplex.iter_mut().skip(1) {
                        let v: Vec<f64> =
                            anchor.iter().zip(&vertex.0).map(|(a, x)| a + SHRINK * (x - a)).collect();
                        let fv = eval(&v, &mut evals);
                        *vertex = (v, fv);
                    }
                }
            }
        }
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        if simplex[0].1 <= best_value {
            best_value = simplex[0].1;
            best = simplex[0].0.clone();
        }
        if !converged {
            break;
        }
    }

    if converged {
        Ok(Minimum { point: best, value: best_value, evaluations: evals })
    } else {
        Err(Error::Convergence { iterations: evals, best_value, best_point: best })
    }
}
