use serde::{Deserialize, Serialize};

use super::blind::Oracle;
use super::gmm::{self, ComponentSelection, EmOptions};
use crate::graph::Partition;
use crate::spectral::kmeans::rows_of;
use crate::{seed, Error, Matrix, Result};

/// Knobs of the clustering step that replaces exact row equality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RobustConfig {
    /// Upper bound on mixture components per round.
    pub max_components: usize,
    /// Variance floor relative to each feature's overall variance.
    pub covariance_regularizer: f64,
    pub em_restarts: usize,
    pub component_selection: ComponentSelection,
    pub max_em_iterations: usize,
}

impl Default for RobustConfig {
    fn default() -> Self {
        Self {
            max_components: 6,
            covariance_regularizer: 1e-4,
            em_restarts: 3,
            component_selection: ComponentSelection::Bic,
            max_em_iterations: 200,
        }
    }
}

impl RobustConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_components == 0 {
            return Err(Error::InvalidConfig(
                "max_components must be at least 1".into(),
            ));
        }
        if !(self.covariance_regularizer > 0.0) {
            return Err(Error::InvalidConfig(
                "covariance_regularizer must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobustOutcome {
    pub partition: Partition,
    pub rounds: usize,
    /// False when the rounds cycled or hit the cap of `n` without the
    /// partition repeating; `partition` is then the last one produced.
    pub converged: bool,
}

/// BlindWL for noisy oracles. Each round clusters the rows of `[O(B) | B]`
/// with a diagonal Gaussian mixture and uses the cluster indicators as the
/// next `B`. Carrying `B` inside the features keeps nodes that were already
/// separated apart, the clustering analogue of requiring equal `B` rows.
pub fn robust_blind_wl(
    oracle: &dyn Oracle,
    n: usize,
    cfg: &RobustConfig,
    seed: u64,
) -> Result<RobustOutcome> {
    cfg.validate()?;
    if oracle.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: oracle.dim(),
        });
    }
    let opts = EmOptions {
        regularizer: cfg.covariance_regularizer,
        max_iterations: cfg.max_em_iterations,
        ..EmOptions::default()
    };
    let mut current = Partition::uniform(n);
    let mut history = vec![current.clone()];
    for round in 1..=n.max(1) {
        let b = current.indicator_matrix();
        let y = oracle.apply(&b)?;
        let features = Matrix::from_fn(n, y.ncols() + b.ncols(), |i, j| {
            if j < y.ncols() {
                y[(i, j)]
            } else {
                b[(i, j - y.ncols())]
            }
        });
        let fit = gmm::fit_selected(
            &rows_of(&features),
            n,
            features.ncols(),
            cfg.max_components,
            cfg.component_selection,
            cfg.em_restarts,
            &opts,
            seed::derive(seed, &[round as u64]),
        );
        let next = Partition::from_labels(&fit.labels);
        if next == current {
            return Ok(RobustOutcome {
                partition: next,
                rounds: round,
                converged: true,
            });
        }
        if history.contains(&next) {
            log::warn!("robust BlindWL cycled after {round} rounds");
            return Ok(RobustOutcome {
                partition: next,
                rounds: round,
                converged: false,
            });
        }
        history.push(next.clone());
        current = next;
    }
    log::warn!("robust BlindWL reached the round cap of {n}");
    Ok(RobustOutcome {
        partition: current,
        rounds: n,
        converged: false,
    })
}
