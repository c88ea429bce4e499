use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{graph_accuracy, median, structural_eigenvectors};
use crate::config_model::{sample_graph, sample_quotient_degrees, GenConfig};
use crate::graph::Partition;
use crate::signal::{
    covariance_of, draw_excitations, filter_compatibility, outputs, FilterSpec, SignalModel,
};
use crate::spectral::{f_cost, spectral_extract_detailed};
use crate::wl::{robust_blind_wl, wl_refine, MatrixOracle, RobustConfig};
use crate::{seed, Error, Graph, Matrix, Result};

pub const CSV_HEADER: &str = "trial,seed,alpha,s,algorithm,accuracy,node_cost,runtime_ms,flags";

const TRIAL_KEY: u64 = 0x74_7269_616c;
const SPEC_KEY: u64 = 1;
const GRAPH_KEY: u64 = 2;
const SAMPLE_KEY: u64 = 3;
const ALGORITHM_KEY: u64 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Spectral,
    RobustBlindWl,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Spectral => "spectral",
            Algorithm::RobustBlindWl => "robust_blind_wl",
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spectral" => Ok(Algorithm::Spectral),
            "robust_blind_wl" => Ok(Algorithm::RobustBlindWl),
            other => Err(Error::InvalidConfig(format!("unknown algorithm {other:?}"))),
        }
    }
}

fn default_max_deg() -> usize {
    4
}

fn default_restarts() -> usize {
    crate::spectral::DEFAULT_RESTARTS
}

fn default_redraws() -> usize {
    20
}

fn default_algorithms() -> Vec<Algorithm> {
    vec![Algorithm::Spectral, Algorithm::RobustBlindWl]
}

/// A grid of `(alpha, s)` cells, each evaluated on `trials` planted graphs
/// with `k` equal classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n: usize,
    pub k: usize,
    pub alpha_grid: Vec<f64>,
    pub s_grid: Vec<usize>,
    pub trials: usize,
    pub master_seed: u64,
    #[serde(default = "FilterSpec::adjacency")]
    pub filter: FilterSpec,
    #[serde(default = "default_algorithms")]
    pub algorithms: Vec<Algorithm>,
    #[serde(default = "default_restarts")]
    pub kmeans_restarts: usize,
    #[serde(default)]
    pub robust: RobustConfig,
    /// Quotient degrees are drawn from `0..=max_deg`.
    #[serde(default = "default_max_deg")]
    pub max_deg: usize,
    #[serde(default)]
    pub generator: GenConfig,
    /// Fresh graph draws allowed per trial before it is marked failed.
    #[serde(default = "default_redraws")]
    pub max_redraws: usize,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::InvalidConfig(m));
        if self.k == 0 || self.n == 0 || !self.n.is_multiple_of(self.k) {
            return fail(format!(
                "n = {} must be a positive multiple of k = {}",
                self.n, self.k
            ));
        }
        if self.alpha_grid.is_empty() || self.s_grid.is_empty() {
            return fail("alpha_grid and s_grid must be non-empty".into());
        }
        if let Some(a) = self.alpha_grid.iter().find(|a| !(0.0..=1.0).contains(*a)) {
            return fail(format!("alpha {a} outside [0, 1]"));
        }
        if self.s_grid.contains(&0) {
            return fail("sample sizes must be positive".into());
        }
        if self.trials == 0 {
            return fail("trials must be at least 1".into());
        }
        if self.algorithms.is_empty() {
            return fail("no algorithms selected".into());
        }
        if self.kmeans_restarts == 0 || self.max_redraws == 0 {
            return fail("kmeans_restarts and max_redraws must be at least 1".into());
        }
        self.robust.validate()?;
        self.generator.validate()
    }

    pub fn sizes(&self) -> Vec<usize> {
        vec![self.n / self.k; self.k]
    }

    pub fn trial_seed(&self, trial: usize) -> u64 {
        seed::derive(self.master_seed, &[TRIAL_KEY, trial as u64])
    }
}

/// One algorithm run on one `(alpha, s, trial)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub trial: usize,
    /// Seed of the trial; together with the config it regenerates the row.
    pub seed: u64,
    pub alpha: f64,
    pub s: usize,
    pub algorithm: Algorithm,
    pub accuracy: u8,
    /// Absent when the trial or the algorithm failed.
    pub node_cost: Option<f64>,
    pub runtime_ms: f64,
    pub flags: Vec<String>,
}

impl MetricRow {
    pub fn failed(&self) -> bool {
        self.node_cost.is_none()
    }

    /// CSV line; `with_runtime = false` blanks the runtime column.
    pub fn to_csv(&self, with_runtime: bool) -> String {
        let cost = self.node_cost.map(|c| format!("{c:e}")).unwrap_or_default();
        let runtime = if with_runtime {
            format!("{:.3}", self.runtime_ms)
        } else {
            String::new()
        };
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.trial,
            self.seed,
            self.alpha,
            self.s,
            self.algorithm.name(),
            self.accuracy,
            cost,
            runtime,
            self.flags.join(";")
        )
    }
}

pub fn rows_to_csv(rows: &[MetricRow], with_runtime: bool) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        writeln!(out, "{}", r.to_csv(with_runtime)).expect("writing to a string");
    }
    out
}

/// A planted graph accepted for scoring, plus its excitations.
#[derive(Debug, Clone)]
pub struct Trial {
    pub index: usize,
    pub seed: u64,
    pub graph: Graph,
    pub planted: Partition,
    /// Columns of `f(A)` eigenvectors that are block-constant on `planted`.
    pub structural: Matrix,
    /// Rejected draws before this one was accepted.
    pub redraws: usize,
    pub(crate) x: Matrix,
    pub(crate) z: Matrix,
}

impl Trial {
    /// Outputs for the first `s` stored excitations at noise level `alpha`.
    pub fn outputs(&self, cfg: &ExperimentConfig, alpha: f64, s: usize) -> Result<Matrix> {
        let model = SignalModel::new(
            self.graph.clone(),
            self.planted.clone(),
            alpha,
            cfg.filter.clone(),
        )?;
        let x = self.x.columns(0, s).into_owned();
        let z = self.z.columns(0, s).into_owned();
        Ok(outputs(&model, &x, &z))
    }
}

fn sanitize(msg: impl std::fmt::Display) -> String {
    msg.to_string().replace([',', ';', '\n'], " ")
}

/// Draws the planted graph of `trial`, redrawing while its cEP is coarser than
/// the planted partition or the filter breaks it. The rejected draws are
/// returned as flags on failure.
pub fn prepare_trial(
    cfg: &ExperimentConfig,
    trial: usize,
    max_s: usize,
) -> std::result::Result<Trial, Vec<String>> {
    let tseed = cfg.trial_seed(trial);
    let sizes = cfg.sizes();
    let mut flags = Vec::new();
    for attempt in 0..cfg.max_redraws {
        let a = attempt as u64;
        let drawn = sample_quotient_degrees(
            cfg.k,
            cfg.max_deg,
            &sizes,
            seed::derive(tseed, &[SPEC_KEY, a]),
        )
        .and_then(|spec| sample_graph(&spec, &cfg.generator, seed::derive(tseed, &[GRAPH_KEY, a])));
        let (graph, planted) = match drawn {
            Ok(d) => d,
            Err(e) => {
                flags.push(format!("generator_error:{}", sanitize(e)));
                continue;
            }
        };
        let accepted = wl_refine(&graph, &Partition::uniform(cfg.n))
            .map(|cep| cep == planted)
            .and_then(|ok| {
                Ok(ok && filter_compatibility(&graph, &planted, &cfg.filter)?.is_compatible())
            });
        match accepted {
            Ok(true) => {}
            Ok(false) => {
                flags.push("rejected_coarser_cep".into());
                continue;
            }
            Err(e) => {
                flags.push(format!("check_error:{}", sanitize(e)));
                continue;
            }
        }
        let structural = match structural_eigenvectors(&graph, &cfg.filter, &planted) {
            Ok(v) => v,
            Err(e) => {
                flags.push(format!("structural_error:{}", sanitize(e)));
                continue;
            }
        };
        let (x, z) = draw_excitations(cfg.n, cfg.k, max_s, seed::derive(tseed, &[SAMPLE_KEY]));
        return Ok(Trial {
            index: trial,
            seed: tseed,
            graph,
            planted,
            structural,
            redraws: attempt,
            x,
            z,
        });
    }
    flags.push("trial_failed".into());
    Err(flags)
}

fn algorithm_seed(trial_seed: u64, alpha: f64, s: usize, algorithm: Algorithm) -> u64 {
    seed::derive(
        trial_seed,
        &[ALGORITHM_KEY, alpha.to_bits(), s as u64, algorithm as u64],
    )
}

fn elapsed_ms<T>(f: impl FnOnce() -> T) -> (T, f64) {
    #[cfg(not(target_arch = "wasm32"))]
    {
        let start = std::time::Instant::now();
        let out = f();
        (out, start.elapsed().as_secs_f64() * 1e3)
    }
    #[cfg(target_arch = "wasm32")]
    {
        (f(), 0.0)
    }
}

fn evaluate_cell(cfg: &ExperimentConfig, trial: &Trial, alpha: f64, s: usize) -> Vec<MetricRow> {
    let base_flags: Vec<String> = if trial.redraws > 0 {
        vec![format!("redraws={}", trial.redraws)]
    } else {
        Vec::new()
    };
    let sigma = trial.outputs(cfg, alpha, s).map(|y| covariance_of(&y));
    cfg.algorithms
        .iter()
        .map(|&algorithm| {
            let mut flags = base_flags.clone();
            let aseed = algorithm_seed(trial.seed, alpha, s, algorithm);
            let (found, runtime_ms) = elapsed_ms(|| -> Result<Partition> {
                let sigma = sigma
                    .as_ref()
                    .map_err(|e| Error::InvalidConfig(e.to_string()))?;
                match algorithm {
                    Algorithm::Spectral => {
                        let e =
                            spectral_extract_detailed(sigma, cfg.k, cfg.kmeans_restarts, aseed)?;
                        if e.eigengap.is_some_and(|g| g < 1e-10) {
                            flags.push("small_eigengap".into());
                        }
                        Ok(e.partition)
                    }
                    Algorithm::RobustBlindWl => {
                        let oracle = MatrixOracle::approximate(sigma.clone());
                        let out = robust_blind_wl(&oracle, cfg.n, &cfg.robust, aseed)?;
                        if !out.converged {
                            flags.push("not_converged".into());
                        }
                        Ok(out.partition)
                    }
                }
            });
            let (accuracy, node_cost) = match found.and_then(|p| {
                let cost = f_cost(&p, &trial.structural)?;
                Ok((graph_accuracy(&p, &trial.planted), cost))
            }) {
                Ok((a, c)) => (a, Some(c)),
                Err(e) => {
                    flags.push(format!("error:{}", sanitize(e)));
                    (0, None)
                }
            };
            MetricRow {
                trial: trial.index,
                seed: trial.seed,
                alpha,
                s,
                algorithm,
                accuracy,
                node_cost,
                runtime_ms,
                flags,
            }
        })
        .collect()
}

fn failed_rows(
    cfg: &ExperimentConfig,
    trial: usize,
    alpha: f64,
    s: usize,
    flags: &[String],
) -> Vec<MetricRow> {
    cfg.algorithms
        .iter()
        .map(|&algorithm| MetricRow {
            trial,
            seed: cfg.trial_seed(trial),
            alpha,
            s,
            algorithm,
            accuracy: 0,
            node_cost: None,
            runtime_ms: 0.0,
            flags: flags.to_vec(),
        })
        .collect()
}

fn trial_rows(cfg: &ExperimentConfig, trial: usize, cells: &[(f64, usize)]) -> Vec<MetricRow> {
    let max_s = cells.iter().map(|c| c.1).max().unwrap_or(1);
    match prepare_trial(cfg, trial, max_s) {
        Ok(t) => cells
            .iter()
            .flat_map(|&(a, s)| evaluate_cell(cfg, &t, a, s))
            .collect(),
        Err(flags) => cells
            .iter()
            .flat_map(|&(a, s)| failed_rows(cfg, trial, a, s, &flags))
            .collect(),
    }
}

fn sort_rows(rows: &mut [MetricRow]) {
    rows.sort_by(|a, b| {
        a.alpha
            .total_cmp(&b.alpha)
            .then(a.s.cmp(&b.s))
            .then(a.trial.cmp(&b.trial))
            .then(a.algorithm.cmp(&b.algorithm))
    });
}

/// Every `(alpha, s, trial, algorithm)` combination, sorted in that order.
///
/// A trial's graph and excitations depend only on the master seed and the
/// trial index, so all cells of a trial share one graph and smaller `s` use a
/// prefix of the samples of larger `s`.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<Vec<MetricRow>> {
    cfg.validate()?;
    let cells: Vec<(f64, usize)> = cfg
        .alpha_grid
        .iter()
        .flat_map(|&a| cfg.s_grid.iter().map(move |&s| (a, s)))
        .collect();
    #[cfg(feature = "parallel")]
    let mut rows: Vec<MetricRow> = {
        use rayon::prelude::*;
        (0..cfg.trials)
            .into_par_iter()
            .flat_map_iter(|t| trial_rows(cfg, t, &cells))
            .collect()
    };
    #[cfg(not(feature = "parallel"))]
    let mut rows: Vec<MetricRow> = (0..cfg.trials)
        .flat_map(|t| trial_rows(cfg, t, &cells))
        .collect();
    sort_rows(&mut rows);
    Ok(rows)
}

/// Recomputes the rows of a single cell; identical (apart from runtime) to
/// the corresponding rows of [`run_sweep`].
pub fn run_cell(
    cfg: &ExperimentConfig,
    alpha: f64,
    s: usize,
    trial: usize,
) -> Result<Vec<MetricRow>> {
    cfg.validate()?;
    let mut rows = trial_rows(cfg, trial, &[(alpha, s)]);
    sort_rows(&mut rows);
    Ok(rows)
}

/// Aggregate over the trials of one `(alpha, s, algorithm)` cell; failed
/// rows are counted but not scored.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellSummary {
    pub alpha: f64,
    pub s: usize,
    pub algorithm: Algorithm,
    pub scored: usize,
    pub failed: usize,
    pub mean_accuracy: f64,
    pub median_node_cost: Option<f64>,
    pub redrawn_trials: usize,
}

pub fn summarize(rows: &[MetricRow]) -> Vec<CellSummary> {
    let mut keys: Vec<(f64, usize, Algorithm)> =
        rows.iter().map(|r| (r.alpha, r.s, r.algorithm)).collect();
    keys.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    keys.dedup();
    keys.into_iter()
        .map(|(alpha, s, algorithm)| {
            let cell: Vec<&MetricRow> = rows
                .iter()
                .filter(|r| r.alpha == alpha && r.s == s && r.algorithm == algorithm)
                .collect();
            let scored: Vec<&&MetricRow> = cell.iter().filter(|r| !r.failed()).collect();
            let mut costs: Vec<f64> = scored.iter().filter_map(|r| r.node_cost).collect();
            let mean_accuracy = if scored.is_empty() {
                0.0
            } else {
                scored.iter().map(|r| r.accuracy as f64).sum::<f64>() / scored.len() as f64
            };
            CellSummary {
                alpha,
                s,
                algorithm,
                scored: scored.len(),
                failed: cell.len() - scored.len(),
                mean_accuracy,
                median_node_cost: median(&mut costs),
                redrawn_trials: cell
                    .iter()
                    .filter(|r| r.flags.iter().any(|f| f.starts_with("redraws=")))
                    .count(),
            }
        })
        .collect()
}
