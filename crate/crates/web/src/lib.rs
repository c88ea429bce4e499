//! Browser bindings for the demo page in `www/`.
//!
//! Every export takes a JSON request and returns a JSON response; failures
//! come back as a thrown string. The `*_json` functions hold the logic so
//! native tests can call them without a JS host.

use blind_ep::config_model::{sample_graph, sample_quotient_degrees, GenConfig};
use blind_ep::eval::{
    concentration_diagnostic, graph_accuracy, prepare_trial, Algorithm, ConcentrationReport,
    ExperimentConfig,
};
use blind_ep::signal::{covariance_of, exact_covariance, FilterSpec, SignalModel};
use blind_ep::spectral::{f_cost, spectral_extract, symmetric_eig, DEFAULT_RESTARTS};
use blind_ep::wl::{robust_blind_wl, wl_refine_trace, MatrixOracle, RobustConfig};
use blind_ep::{seed, Partition};
use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

/// Demo sizes are capped so a single call stays interactive.
const MAX_NODES: usize = 240;
const MAX_SAMPLES: usize = 20_000;

fn default_max_deg() -> usize {
    3
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantRequest {
    pub k: usize,
    pub class_size: usize,
    #[serde(default = "default_max_deg")]
    pub max_deg: usize,
    pub seed: u64,
}

#[derive(Debug, Serialize)]
pub struct PlantResponse {
    pub n: usize,
    pub edges: Vec<(usize, usize)>,
    pub planted: Partition,
    /// Colour classes after each refinement round, starting from one colour.
    pub rounds: Vec<Partition>,
    pub quotient: Vec<Vec<usize>>,
    pub cep_matches_planted: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecoverRequest {
    pub k: usize,
    pub class_size: usize,
    #[serde(default = "default_max_deg")]
    pub max_deg: usize,
    pub seed: u64,
    pub alpha: f64,
    pub s: usize,
}

#[derive(Debug, Serialize)]
pub struct Recovered {
    pub algorithm: &'static str,
    pub partition: Partition,
    pub accuracy: u8,
    pub node_cost: f64,
}

#[derive(Debug, Serialize)]
pub struct RecoverResponse {
    pub n: usize,
    pub planted: Partition,
    pub redraws: usize,
    /// Eigenvalues of the exact covariance, descending.
    pub population_spectrum: Vec<f64>,
    /// Eigenvalues of the sample covariance, descending.
    pub sample_spectrum: Vec<f64>,
    pub results: Vec<Recovered>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConcentrationRequest {
    pub k: usize,
    pub class_size: usize,
    #[serde(default = "default_max_deg")]
    pub max_deg: usize,
    pub seed: u64,
    pub alpha: f64,
    pub s_grid: Vec<usize>,
    pub trials: usize,
}

fn check_size(k: usize, class_size: usize) -> Result<usize, String> {
    let n = k * class_size;
    if n == 0 || n > MAX_NODES {
        return Err(format!("k * class_size = {n} must be in 1..={MAX_NODES}"));
    }
    Ok(n)
}

fn parse<'a, T: Deserialize<'a>>(request: &'a str) -> Result<T, String> {
    serde_json::from_str(request).map_err(|e| format!("bad request: {e}"))
}

fn to_json<T: Serialize>(value: &T) -> Result<String, String> {
    serde_json::to_string(value).map_err(|e| e.to_string())
}

fn experiment(
    k: usize,
    n: usize,
    max_deg: usize,
    seed: u64,
    alpha: f64,
    s_grid: Vec<usize>,
    trials: usize,
) -> ExperimentConfig {
    ExperimentConfig {
        n,
        k,
        alpha_grid: vec![alpha],
        s_grid,
        trials,
        master_seed: seed,
        filter: FilterSpec::adjacency(),
        algorithms: vec![Algorithm::Spectral, Algorithm::RobustBlindWl],
        kmeans_restarts: DEFAULT_RESTARTS,
        robust: RobustConfig::default(),
        max_deg,
        generator: GenConfig::default(),
        max_redraws: 20,
    }
}

/// Draws one planted graph and records colour refinement on it.
pub fn plant_json(request: &str) -> Result<String, String> {
    let req: PlantRequest = parse(request)?;
    let n = check_size(req.k, req.class_size)?;
    let sizes = vec![req.class_size; req.k];
    let spec = sample_quotient_degrees(req.k, req.max_deg, &sizes, seed::derive(req.seed, &[0]))
        .map_err(|e| e.to_string())?;
    let (graph, planted) = sample_graph(&spec, &GenConfig::default(), seed::derive(req.seed, &[1]))
        .map_err(|e| e.to_string())?;
    let rounds: Vec<Partition> = wl_refine_trace(&graph, &Partition::uniform(n))
        .map_err(|e| e.to_string())?
        .into_iter()
        .map(|c| c.partition)
        .collect();
    let cep_matches_planted = rounds.last() == Some(&planted);
    to_json(&PlantResponse {
        n,
        edges: graph.edges().into_iter().map(|(u, v, _)| (u, v)).collect(),
        planted,
        rounds,
        quotient: spec.degrees().to_vec(),
        cep_matches_planted,
    })
}

/// Samples a planted model at `(alpha, s)` and runs both recovery algorithms
/// on the sample covariance.
pub fn recover_json(request: &str) -> Result<String, String> {
    let req: RecoverRequest = parse(request)?;
    let n = check_size(req.k, req.class_size)?;
    if req.s == 0 || req.s > MAX_SAMPLES {
        return Err(format!("s must be in 1..={MAX_SAMPLES}"));
    }
    let cfg = experiment(req.k, n, req.max_deg, req.seed, req.alpha, vec![req.s], 1);
    cfg.validate().map_err(|e| e.to_string())?;
    let trial = prepare_trial(&cfg, 0, req.s).map_err(|flags| flags.join(";"))?;
    let sigma = covariance_of(
        &trial
            .outputs(&cfg, req.alpha, req.s)
            .map_err(|e| e.to_string())?,
    );
    let model = SignalModel::new(
        trial.graph.clone(),
        trial.planted.clone(),
        req.alpha,
        cfg.filter.clone(),
    )
    .map_err(|e| e.to_string())?;
    let population = symmetric_eig(&exact_covariance(&model)).map_err(|e| e.to_string())?;
    let sample = symmetric_eig(&sigma).map_err(|e| e.to_string())?;

    let score = |algorithm: &'static str, partition: Partition| -> Result<Recovered, String> {
        Ok(Recovered {
            algorithm,
            accuracy: graph_accuracy(&partition, &trial.planted),
            node_cost: f_cost(&partition, &trial.structural).map_err(|e| e.to_string())?,
            partition,
        })
    };
    let spectral = spectral_extract(
        &sigma,
        req.k,
        DEFAULT_RESTARTS,
        seed::derive(req.seed, &[2]),
    )
    .map_err(|e| e.to_string())?;
    let robust = robust_blind_wl(
        &MatrixOracle::approximate(sigma.clone()),
        n,
        &cfg.robust,
        seed::derive(req.seed, &[3]),
    )
    .map_err(|e| e.to_string())?;
    let results = vec![
        score("spectral", spectral)?,
        score("robust_blind_wl", robust.partition)?,
    ];
    to_json(&RecoverResponse {
        n,
        planted: trial.planted.clone(),
        redraws: trial.redraws,
        population_spectrum: population.eigenvalues,
        sample_spectrum: sample.eigenvalues,
        results,
    })
}

/// Median covariance error against `s` for one noise level.
pub fn concentration_json(request: &str) -> Result<String, String> {
    let req: ConcentrationRequest = parse(request)?;
    let n = check_size(req.k, req.class_size)?;
    if req.s_grid.iter().any(|&s| s == 0 || s > MAX_SAMPLES) {
        return Err(format!("every s must be in 1..={MAX_SAMPLES}"));
    }
    if req.trials == 0 || req.trials > 50 {
        return Err("trials must be in 1..=50".into());
    }
    let cfg = experiment(
        req.k,
        n,
        req.max_deg,
        req.seed,
        req.alpha,
        req.s_grid,
        req.trials,
    );
    let reports: Vec<ConcentrationReport> =
        concentration_diagnostic(&cfg).map_err(|e| e.to_string())?;
    to_json(&reports[0])
}

#[wasm_bindgen]
pub fn plant(request: &str) -> Result<String, JsValue> {
    plant_json(request).map_err(JsValue::from)
}

#[wasm_bindgen]
pub fn recover(request: &str) -> Result<String, JsValue> {
    recover_json(request).map_err(JsValue::from)
}

#[wasm_bindgen]
pub fn concentration(request: &str) -> Result<String, JsValue> {
    concentration_json(request).map_err(JsValue::from)
}
