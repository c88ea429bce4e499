use serde::Serialize;

use super::median;
use super::sweep::{prepare_trial, ExperimentConfig};
use crate::signal::{covariance_of, exact_covariance, outputs, SignalModel};
use crate::spectral::{effective_rank, spectral_norm, symmetric_eig};
use crate::{Error, Result};

/// Medians over trials at one sample size.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConcentrationPoint {
    pub s: usize,
    /// Median of `‖Σ̂ − Σ‖₂`.
    pub median_error: f64,
    /// Median of the population gap `γ_k − γ_{k+1}`.
    pub median_population_gap: f64,
    /// Median of the mixed gap `γ_k − γ̂_{k+1}`.
    pub median_mixed_gap: f64,
    /// Fraction of trials whose mixed gap is positive.
    pub gap_condition_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConcentrationReport {
    pub alpha: f64,
    pub trials: usize,
    pub failed_trials: usize,
    pub points: Vec<ConcentrationPoint>,
    /// Least-squares slope of `log median_error` against `log s`.
    pub slope: f64,
    /// Median effective rank of `Σ` over trials.
    pub effective_rank: f64,
    /// True when some sample size leaves no positive mixed gap in any trial.
    pub gap_condition_fails: bool,
}

fn log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let num: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    num / den
}

struct TrialStats {
    errors: Vec<f64>,
    population_gap: f64,
    mixed_gaps: Vec<f64>,
    effective_rank: f64,
}

fn trial_stats(cfg: &ExperimentConfig, alpha: f64, trial: usize) -> Option<TrialStats> {
    let max_s = *cfg.s_grid.iter().max()?;
    let t = prepare_trial(cfg, trial, max_s).ok()?;
    let (x, z) = (&t.x, &t.z);
    let model = SignalModel::new(
        t.graph.clone(),
        t.planted.clone(),
        alpha,
        cfg.filter.clone(),
    )
    .ok()?;
    let sigma = exact_covariance(&model);
    let population = symmetric_eig(&sigma).ok()?;
    let k = cfg.k;
    let gamma_k = population.eigenvalues[k - 1];
    let population_gap = population.gap_after(k).unwrap_or(f64::INFINITY);
    let mut errors = Vec::new();
    let mut mixed_gaps = Vec::new();
    for &s in &cfg.s_grid {
        let y = outputs(
            &model,
            &x.columns(0, s).into_owned(),
            &z.columns(0, s).into_owned(),
        );
        let sample = covariance_of(&y);
        errors.push(spectral_norm(&(&sample - &sigma)).ok()?);
        let hat = symmetric_eig(&sample).ok()?;
        mixed_gaps.push(
            hat.eigenvalues
                .get(k)
                .map_or(f64::INFINITY, |g| gamma_k - g),
        );
    }
    Some(TrialStats {
        errors,
        population_gap,
        mixed_gaps,
        effective_rank: effective_rank(&sigma).ok()?,
    })
}

/// Decay of the sample covariance error with `s`, one report per `alpha` in
/// the grid. Needs at least three sample sizes spanning two decades.
pub fn concentration_diagnostic(cfg: &ExperimentConfig) -> Result<Vec<ConcentrationReport>> {
    cfg.validate()?;
    let mut grid = cfg.s_grid.clone();
    grid.sort_unstable();
    grid.dedup();
    if grid.len() < 3 || (grid[grid.len() - 1] as f64) < 100.0 * grid[0] as f64 {
        return Err(Error::InvalidConfig(
            "s_grid needs at least three sizes spanning two decades".into(),
        ));
    }
    let cfg = ExperimentConfig {
        s_grid: grid.clone(),
        ..cfg.clone()
    };
    cfg.alpha_grid
        .iter()
        .map(|&alpha| {
            #[cfg(feature = "parallel")]
            let stats: Vec<Option<TrialStats>> = {
                use rayon::prelude::*;
                (0..cfg.trials)
                    .into_par_iter()
                    .map(|t| trial_stats(&cfg, alpha, t))
                    .collect()
            };
            #[cfg(not(feature = "parallel"))]
            let stats: Vec<Option<TrialStats>> = (0..cfg.trials)
                .map(|t| trial_stats(&cfg, alpha, t))
                .collect();
            let ok: Vec<TrialStats> = stats.into_iter().flatten().collect();
            if ok.is_empty() {
                return Err(Error::InvalidConfig(
                    "every trial failed to produce a graph".into(),
                ));
            }
            let mut population: Vec<f64> = ok.iter().map(|t| t.population_gap).collect();
            let median_population_gap = median(&mut population).expect("non-empty");
            let points: Vec<ConcentrationPoint> = grid
                .iter()
                .enumerate()
                .map(|(i, &s)| {
                    let mut errors: Vec<f64> = ok.iter().map(|t| t.errors[i]).collect();
                    let mut mixed: Vec<f64> = ok.iter().map(|t| t.mixed_gaps[i]).collect();
                    let positive = mixed.iter().filter(|g| **g > 0.0).count();
                    ConcentrationPoint {
                        s,
                        median_error: median(&mut errors).expect("non-empty"),
                        median_population_gap,
                        median_mixed_gap: median(&mut mixed).expect("non-empty"),
                        gap_condition_rate: positive as f64 / ok.len() as f64,
                    }
                })
                .collect();
            let xs: Vec<f64> = points.iter().map(|p| p.s as f64).collect();
            let ys: Vec<f64> = points.iter().map(|p| p.median_error).collect();
            let mut ranks: Vec<f64> = ok.iter().map(|t| t.effective_rank).collect();
            Ok(ConcentrationReport {
                alpha,
                trials: cfg.trials,
                failed_trials: cfg.trials - ok.len(),
                gap_condition_fails: points.iter().any(|p| p.gap_condition_rate == 0.0),
                slope: log_slope(&xs, &ys),
                effective_rank: median(&mut ranks).expect("non-empty"),
                points,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config_model::GenConfig;
    use crate::signal::FilterSpec;
    use crate::wl::RobustConfig;

    fn cfg(alpha: f64, s_grid: Vec<usize>) -> ExperimentConfig {
        ExperimentConfig {
            n: 30,
            k: 3,
            alpha_grid: vec![alpha],
            s_grid,
            trials: 6,
            master_seed: 4,
            filter: FilterSpec::adjacency(),
            algorithms: vec![crate::eval::Algorithm::Spectral],
            kmeans_restarts: 3,
            robust: RobustConfig::default(),
            max_deg: 4,
            generator: GenConfig::default(),
            max_redraws: 20,
        }
    }

    #[test]
    fn slope_of_exact_power_law() {
        let xs = [10.0, 100.0, 1000.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powf(-0.5)).collect();
        assert!((log_slope(&xs, &ys) + 0.5).abs() < 1e-12);
    }

    #[test]
    fn pure_noise_decays_like_root_s() {
        let report = &concentration_diagnostic(&cfg(0.0, vec![100, 1000, 10000])).unwrap()[0];
        assert!((-0.65..=-0.35).contains(&report.slope), "{report:?}");
        assert!((report.effective_rank - 30.0).abs() < 1e-9);
        assert!(report
            .points
            .windows(2)
            .all(|w| w[0].median_error > w[1].median_error));
    }

    #[test]
    fn grid_precondition() {
        assert!(concentration_diagnostic(&cfg(0.7, vec![100])).is_err());
        assert!(concentration_diagnostic(&cfg(0.7, vec![100, 200, 500])).is_err());
    }

    #[test]
    fn gaps_are_reported() {
        let report = &concentration_diagnostic(&cfg(0.9, vec![10, 100, 1000])).unwrap()[0];
        assert!(report.points.iter().all(|p| p.median_population_gap > 0.0));
        assert!(report.points.last().unwrap().gap_condition_rate > 0.5);
        assert!(report.effective_rank > 1.0 && report.effective_rank < 30.0);
    }
}
