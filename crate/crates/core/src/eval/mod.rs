//! Scoring, parameter sweeps, the covariance concentration diagnostic and the
//! small counterexample fixtures.

mod diagnostic;
pub mod fixtures;
mod sweep;

pub use diagnostic::{concentration_diagnostic, ConcentrationPoint, ConcentrationReport};
pub use sweep::{
    prepare_trial, rows_to_csv, run_cell, run_sweep, summarize, Algorithm, CellSummary,
    ExperimentConfig, MetricRow, Trial, CSV_HEADER,
};

use crate::graph::Partition;
use crate::signal::FilterSpec;
use crate::spectral::{f_cost, structural_basis, symmetric_eig};
use crate::{Error, Graph, Matrix, Result};

/// Tolerance for deciding which eigenvectors of `f(A)` are block-constant.
const STRUCTURAL_TOLERANCE: f64 = 1e-6;

/// 1 when the partitions agree up to class relabelling, else 0.
pub fn graph_accuracy(found: &Partition, planted: &Partition) -> u8 {
    u8::from(found == planted)
}

/// The structural eigenvectors `V_EP` of `f(A)` for `planted`, as columns.
pub fn structural_eigenvectors(g: &Graph, f: &FilterSpec, planted: &Partition) -> Result<Matrix> {
    let d = symmetric_eig(&f.evaluate(g.adjacency()))?;
    let basis = structural_basis(&d, planted, STRUCTURAL_TOLERANCE)?;
    if basis.ncols() != planted.k() {
        return Err(Error::InvalidPartition(format!(
            "found {} structural eigenvectors for {} classes",
            basis.ncols(),
            planted.k()
        )));
    }
    Ok(basis)
}

/// k-means cost of `found` on the structural eigenvectors of `f(A)`.
pub fn node_cost(found: &Partition, g: &Graph, f: &FilterSpec, planted: &Partition) -> Result<f64> {
    f_cost(found, &structural_eigenvectors(g, f, planted)?)
}

/// Spearman rank correlation with average ranks for ties; `None` if either
/// input is constant or the lengths differ.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let mean = (x.len() as f64 + 1.0) / 2.0;
    let (mut num, mut dx, mut dy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        num += (a - mean) * (b - mean);
        dx += (a - mean) * (a - mean);
        dy += (b - mean) * (b - mean);
    }
    (dx > 0.0 && dy > 0.0).then(|| num / (dx * dy).sqrt())
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut out = vec![0.0; v.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && v[order[j + 1]] == v[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            out[o] = rank;
        }
        i = j + 1;
    }
    out
}

pub(crate) fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let m = values.len() / 2;
    Some(if values.len() % 2 == 1 {
        values[m]
    } else {
        (values[m - 1] + values[m]) / 2.0
    })
}
