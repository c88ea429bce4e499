//! Gaussian mixtures with diagonal covariances, fitted by EM.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::seed;
use crate::spectral::kmeans::lloyd;

/// How many mixture components to keep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComponentSelection {
    /// Always fit `max_components`.
    Fixed,
    /// Minimum BIC over `1..=max_components`.
    Bic,
}

#[derive(Debug, Clone, Copy)]
pub struct EmOptions {
    /// Variance floor, relative to each feature's overall variance.
    pub regularizer: f64,
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl Default for EmOptions {
    fn default() -> Self {
        Self {
            regularizer: 1e-4,
            max_iterations: 200,
            tolerance: 1e-9,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GmmFit {
    /// Hard assignment of each point to its most responsible component.
    pub labels: Vec<usize>,
    /// Components left after dropping the ones that emptied out.
    pub components: usize,
    pub log_likelihood: f64,
    pub bic: f64,
    pub converged: bool,
}

struct Params {
    log_weights: Vec<f64>,
    means: Vec<f64>,
    variances: Vec<f64>,
}

fn feature_floor(data: &[f64], n: usize, d: usize, regularizer: f64) -> Vec<f64> {
    (0..d)
        .map(|j| {
            let mean = (0..n).map(|i| data[i * d + j]).sum::<f64>() / n as f64;
            let var = (0..n)
                .map(|i| (data[i * d + j] - mean).powi(2))
                .sum::<f64>()
                / n as f64;
            regularizer * var.max(1e-12)
        })
        .collect()
}

fn m_step(
    data: &[f64],
    n: usize,
    d: usize,
    resp: &[f64],
    c: usize,
    floor: &[f64],
) -> (Params, Vec<usize>) {
    let mut mass = vec![0.0; c];
    for i in 0..n {
        for k in 0..c {
            mass[k] += resp[i * c + k];
        }
    }
    let kept: Vec<usize> = (0..c).filter(|&k| mass[k] > 1e-8).collect();
    let m = kept.len();
    let mut means = vec![0.0; m * d];
    let mut variances = vec![0.0; m * d];
    for (slot, &k) in kept.iter().enumerate() {
        for i in 0..n {
            let r = resp[i * c + k];
            if r == 0.0 {
                continue;
            }
            for j in 0..d {
                means[slot * d + j] += r * data[i * d + j];
            }
        }
        for j in 0..d {
            means[slot * d + j] /= mass[k];
        }
        for i in 0..n {
            let r = resp[i * c + k];
            if r == 0.0 {
                continue;
            }
            for j in 0..d {
                let dev = data[i * d + j] - means[slot * d + j];
                variances[slot * d + j] += r * dev * dev;
            }
        }
        for j in 0..d {
            variances[slot * d + j] = variances[slot * d + j] / mass[k] + floor[j];
        }
    }
    let total: f64 = kept.iter().map(|&k| mass[k]).sum();
    let log_weights = kept.iter().map(|&k| (mass[k] / total).ln()).collect();
    (
        Params {
            log_weights,
            means,
            variances,
        },
        kept,
    )
}

/// Returns the log-likelihood and fills `resp` (n × components).
fn e_step(data: &[f64], n: usize, d: usize, p: &Params, resp: &mut Vec<f64>) -> f64 {
    let c = p.log_weights.len();
    resp.resize(n * c, 0.0);
    let norms: Vec<f64> = (0..c)
        .map(|k| {
            -0.5 * (0..d)
                .map(|j| (2.0 * PI * p.variances[k * d + j]).ln())
                .sum::<f64>()
        })
        .collect();
    let mut ll = 0.0;
    for i in 0..n {
        let x = &data[i * d..(i + 1) * d];
        let row = &mut resp[i * c..(i + 1) * c];
        let mut top = f64::NEG_INFINITY;
        for k in 0..c {
            let mut q = 0.0;
            for j in 0..d {
                let dev = x[j] - p.means[k * d + j];
                q += dev * dev / p.variances[k * d + j];
            }
            row[k] = p.log_weights[k] + norms[k] - 0.5 * q;
            top = top.max(row[k]);
        }
        let mut sum = 0.0;
        for r in row.iter_mut() {
            *r = (*r - top).exp();
            sum += *r;
        }
        for r in row.iter_mut() {
            *r /= sum;
        }
        ll += top + sum.ln();
    }
    ll
}

fn fit_once(
    data: &[f64],
    n: usize,
    d: usize,
    components: usize,
    opts: &EmOptions,
    floor: &[f64],
    seed: u64,
) -> GmmFit {
    let init = lloyd(data, n, d, components, &mut seed::rng(seed));
    let mut resp = vec![0.0; n * components];
    for (i, &l) in init.labels.iter().enumerate() {
        resp[i * components + l] = 1.0;
    }
    let mut c = components;
    let (mut params, _) = m_step(data, n, d, &resp, c, floor);
    let mut ll = f64::NEG_INFINITY;
    let mut converged = false;
    for _ in 0..opts.max_iterations {
        let next = e_step(data, n, d, &params, &mut resp);
        c = params.log_weights.len();
        let done = (next - ll).abs() <= opts.tolerance * (1.0 + next.abs());
        ll = next;
        if done {
            converged = true;
            break;
        }
        let (p, kept) = m_step(data, n, d, &resp, c, floor);
        if kept.len() < c {
            log::debug!("dropping {} empty mixture components", c - kept.len());
        }
        params = p;
    }
    ll = e_step(data, n, d, &params, &mut resp);
    c = params.log_weights.len();
    let labels = (0..n)
        .map(|i| {
            let row = &resp[i * c..(i + 1) * c];
            (0..c).fold(0, |best, k| if row[k] > row[best] { k } else { best })
        })
        .collect();
    let parameters = (c * 2 * d + c - 1) as f64;
    GmmFit {
        labels,
        components: c,
        log_likelihood: ll,
        bic: -2.0 * ll + parameters * (n as f64).ln(),
        converged,
    }
}

/// Best of `restarts` EM runs (highest log-likelihood, earliest on ties).
/// `data` is row-major `n × d`.
pub fn fit(
    data: &[f64],
    n: usize,
    d: usize,
    components: usize,
    restarts: usize,
    opts: &EmOptions,
    seed: u64,
) -> GmmFit {
    let floor = feature_floor(data, n, d, opts.regularizer);
    fit_with_floor(data, n, d, components, restarts, opts, &floor, seed)
}

#[allow(clippy::too_many_arguments)]
fn fit_with_floor(
    data: &[f64],
    n: usize,
    d: usize,
    components: usize,
    restarts: usize,
    opts: &EmOptions,
    floor: &[f64],
    seed: u64,
) -> GmmFit {
    let components = components.clamp(1, n);
    (0..restarts.max(1))
        .map(|r| {
            fit_once(
                data,
                n,
                d,
                components,
                opts,
                floor,
                seed::derive(seed, &[r as u64]),
            )
        })
        .reduce(|best, next| {
            if next.log_likelihood > best.log_likelihood {
                next
            } else {
                best
            }
        })
        .expect("at least one restart")
}

/// Fits with the component count chosen by `selection`.
#[allow(clippy::too_many_arguments)]
pub fn fit_selected(
    data: &[f64],
    n: usize,
    d: usize,
    max_components: usize,
    selection: ComponentSelection,
    restarts: usize,
    opts: &EmOptions,
    seed: u64,
) -> GmmFit {
    let floor = feature_floor(data, n, d, opts.regularizer);
    let max_components = max_components.clamp(1, n);
    match selection {
        ComponentSelection::Fixed => {
            fit_with_floor(data, n, d, max_components, restarts, opts, &floor, seed)
        }
        ComponentSelection::Bic => (1..=max_components)
            .map(|c| {
                fit_with_floor(
                    data,
                    n,
                    d,
                    c,
                    restarts,
                    opts,
                    &floor,
                    seed::derive(seed, &[c as u64]),
                )
            })
            .reduce(|best, next| if next.bic < best.bic { next } else { best })
            .expect("at least one candidate"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng as _;
    use rand_distr::StandardNormal;

    fn blobs(centres: &[(f64, f64)], per: usize, spread: f64, seed: u64) -> (Vec<f64>, Vec<usize>) {
        let mut rng = seed::rng(seed);
        let mut data = Vec::new();
        let mut truth = Vec::new();
        for (c, &(x, y)) in centres.iter().enumerate() {
            for _ in 0..per {
                data.push(x + spread * rng.sample::<f64, _>(StandardNormal));
                data.push(y + spread * rng.sample::<f64, _>(StandardNormal));
                truth.push(c);
            }
        }
        (data, truth)
    }

    #[test]
    fn bic_finds_three_blobs() {
        let (data, truth) = blobs(&[(0.0, 0.0), (10.0, 0.0), (0.0, 10.0)], 40, 1.0, 3);
        let fit = fit_selected(
            &data,
            120,
            2,
            6,
            ComponentSelection::Bic,
            3,
            &EmOptions::default(),
            5,
        );
        assert_eq!(fit.components, 3);
        assert_eq!(
            crate::Partition::from_labels(&fit.labels),
            crate::Partition::from_labels(&truth)
        );
    }

    #[test]
    fn identical_points_do_not_overfit() {
        let data = vec![1.0, 1.0, 1.0, 2.0, 2.0, 2.0];
        let fit = fit_selected(
            &data,
            6,
            1,
            4,
            ComponentSelection::Bic,
            2,
            &EmOptions::default(),
            0,
        );
        assert_eq!(
            crate::Partition::from_labels(&fit.labels).assignment(),
            &[0, 0, 0, 1, 1, 1]
        );
    }

    #[test]
    fn fixed_selection_uses_requested_count() {
        let (data, _) = blobs(&[(0.0, 0.0), (8.0, 8.0)], 30, 1.0, 1);
        let fit = fit_selected(
            &data,
            60,
            2,
            2,
            ComponentSelection::Fixed,
            2,
            &EmOptions::default(),
            2,
        );
        assert_eq!(fit.components, 2);
        assert!(fit.log_likelihood.is_finite());
    }

    #[test]
    fn deterministic_under_seed() {
        let (data, _) = blobs(&[(0.0, 0.0), (3.0, 0.0)], 25, 1.0, 7);
        let a = fit_selected(
            &data,
            50,
            2,
            4,
            ComponentSelection::Bic,
            3,
            &EmOptions::default(),
            11,
        );
        let b = fit_selected(
            &data,
            50,
            2,
            4,
            ComponentSelection::Bic,
            3,
            &EmOptions::default(),
            11,
        );
        assert_eq!(a.labels, b.labels);
        assert_eq!(a.log_likelihood.to_bits(), b.log_likelihood.to_bits());
    }
}
