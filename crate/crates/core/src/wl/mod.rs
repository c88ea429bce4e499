//! Colour refinement and its oracle-driven ("blind") counterparts.

mod blind;
pub mod gmm;
mod robust;

use std::collections::HashMap;

pub(crate) use blind::block_constant;
pub use blind::{
    blind_wl, blind_wl_trace, exact_oracle, span_membership, FnOracle, MatrixOracle, Oracle,
};
pub use gmm::ComponentSelection;
pub use robust::{robust_blind_wl, RobustConfig, RobustOutcome};

use crate::graph::Partition;
use crate::{Error, Graph, Matrix, Result};

/// A partition produced after `round` refinement steps.
#[derive(Debug, Clone, PartialEq)]
pub struct Coloring {
    pub round: usize,
    pub partition: Partition,
}

/// Equality key for real values: exact bits (with `-0.0 == 0.0`) when
/// `resolution == 0`, otherwise the index of the `resolution`-wide bin.
pub(crate) fn value_key(x: f64, resolution: f64) -> u64 {
    if resolution > 0.0 {
        (x / resolution).round() as i64 as u64
    } else if x == 0.0 {
        0
    } else {
        x.to_bits()
    }
}

/// Colour refinement on the graph's (weighted) adjacency starting from `init`.
/// Returns the coarsest equitable partition refining `init`.
pub fn wl_refine(g: &Graph, init: &Partition) -> Result<Partition> {
    let trace = wl_refine_trace(g, init)?;
    Ok(trace
        .last()
        .expect("trace is never empty")
        .partition
        .clone())
}

/// Every distinct colouring visited, starting with `init` itself.
pub fn wl_refine_trace(g: &Graph, init: &Partition) -> Result<Vec<Coloring>> {
    wl_refine_matrix(g.adjacency(), init, 0.0)
}

/// Colour refinement driven by an arbitrary symmetric real matrix.
///
/// The refined colour of node `v` is looked up in a dictionary keyed by its
/// current colour and the sorted list of `(class, weight sent into class)`
/// pairs; fresh keys receive the next unused id. Weight sums (rather than a
/// multiset of individual edge weights) are what equitability constrains, so
/// the fixed point is the coarsest equitable partition even for weighted
/// matrices. `resolution > 0` bins the sums, for matrices built in floating
/// point.
pub fn wl_refine_matrix(m: &Matrix, init: &Partition, resolution: f64) -> Result<Vec<Coloring>> {
    let n = m.nrows();
    if init.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: init.n(),
        });
    }
    let mut current = init.clone();
    let mut trace = vec![Coloring {
        round: 0,
        partition: current.clone(),
    }];
    for round in 1..=n.max(1) {
        let next = refine_once(m, &current, resolution);
        if next.k() == current.k() {
            return Ok(trace);
        }
        trace.push(Coloring {
            round,
            partition: next.clone(),
        });
        current = next;
    }
    Ok(trace)
}

type Signature = (usize, Vec<(usize, u64)>);

fn refine_once(m: &Matrix, colors: &Partition, resolution: f64) -> Partition {
    let n = m.nrows();
    let mut dictionary: HashMap<Signature, usize> = HashMap::new();
    let mut sums = vec![0.0; colors.k()];
    let mut labels = Vec::with_capacity(n);
    for v in 0..n {
        sums.iter_mut().for_each(|s| *s = 0.0);
        for u in 0..n {
            let w = m[(v, u)];
            if w != 0.0 {
                sums[colors.class_of(u)] += w;
            }
        }
        let profile: Vec<(usize, u64)> = sums
            .iter()
            .enumerate()
            .filter(|(_, &s)| value_key(s, resolution) != 0)
            .map(|(c, &s)| (c, value_key(s, resolution)))
            .collect();
        let next = dictionary.len();
        labels.push(
            *dictionary
                .entry((colors.class_of(v), profile))
                .or_insert(next),
        );
    }
    Partition::from_labels(&labels)
}
