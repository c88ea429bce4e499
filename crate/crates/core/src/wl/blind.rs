use std::collections::HashMap;

use super::value_key;
use crate::graph::Partition;
use crate::{Error, Graph, Matrix, Result};

/// Black-box access to an unknown linear operator on `R^n`, applied column by
/// column. Implementations must be safe to call from several threads.
pub trait Oracle: Sync {
    fn dim(&self) -> usize;

    fn apply(&self, inputs: &Matrix) -> Result<Matrix>;

    /// Whether outputs are exact enough for bitwise row comparison.
    fn is_exact(&self) -> bool;
}

/// An oracle backed by an explicit matrix: the adjacency matrix itself
/// (exact) or a covariance estimate (approximate).
#[derive(Debug, Clone)]
pub struct MatrixOracle {
    operator: Matrix,
    exact: bool,
}

impl MatrixOracle {
    pub fn exact(operator: Matrix) -> Self {
        Self {
            operator,
            exact: true,
        }
    }

    pub fn approximate(operator: Matrix) -> Self {
        Self {
            operator,
            exact: false,
        }
    }

    pub fn operator(&self) -> &Matrix {
        &self.operator
    }
}

impl Oracle for MatrixOracle {
    fn dim(&self) -> usize {
        self.operator.nrows()
    }

    fn apply(&self, inputs: &Matrix) -> Result<Matrix> {
        if inputs.nrows() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: inputs.nrows(),
            });
        }
        Ok(&self.operator * inputs)
    }

    fn is_exact(&self) -> bool {
        self.exact
    }
}

/// Oracle that returns `A·B` for the graph's adjacency matrix.
pub fn exact_oracle(g: &Graph) -> MatrixOracle {
    MatrixOracle::exact(g.adjacency().clone())
}

/// Oracle defined by a closure; used to probe the algorithms with operators
/// that are not given as matrices.
pub struct FnOracle<F> {
    n: usize,
    exact: bool,
    f: F,
}

impl<F> FnOracle<F>
where
    F: Fn(&Matrix) -> Matrix + Sync,
{
    pub fn new(n: usize, exact: bool, f: F) -> Self {
        Self { n, exact, f }
    }
}

impl<F> Oracle for FnOracle<F>
where
    F: Fn(&Matrix) -> Matrix + Sync,
{
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, inputs: &Matrix) -> Result<Matrix> {
        if inputs.nrows() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: inputs.nrows(),
            });
        }
        let out = (self.f)(inputs);
        if out.shape() != inputs.shape() {
            return Err(Error::DimensionMismatch {
                expected: inputs.ncols(),
                got: out.ncols(),
            });
        }
        Ok(out)
    }

    fn is_exact(&self) -> bool {
        self.exact
    }
}

/// True iff every column of `y` is constant (within `tol`) on each class of
/// the indicator matrix `b`, i.e. `y ∈ span(b)`.
pub fn span_membership(y: &Matrix, b: &Matrix, tol: f64) -> Result<bool> {
    if y.nrows() != b.nrows() {
        return Err(Error::DimensionMismatch {
            expected: b.nrows(),
            got: y.nrows(),
        });
    }
    let p = Partition::from_indicator(b)?;
    Ok(block_constant(y, &p, tol))
}

pub(crate) fn block_constant(y: &Matrix, p: &Partition, tol: f64) -> bool {
    let mut first: Vec<Option<usize>> = vec![None; p.k()];
    for v in 0..y.nrows() {
        let c = p.class_of(v);
        match first[c] {
            None => first[c] = Some(v),
            Some(r) => {
                for j in 0..y.ncols() {
                    let (a, b) = (y[(v, j)], y[(r, j)]);
                    let same = if tol == 0.0 {
                        value_key(a, 0.0) == value_key(b, 0.0)
                    } else {
                        (a - b).abs() <= tol
                    };
                    if !same {
                        return false;
                    }
                }
            }
        }
    }
    true
}

/// BlindWL: recovers the coarsest equitable partition (refining `init`)
/// through an exact oracle alone.
///
/// `init` defaults to the all-ones column. Each round groups nodes whose rows
/// agree in both `O(B)` and `B`; the indicator of the grouping becomes the
/// next `B` (one column per class, so duplicate columns never survive).
pub fn blind_wl(oracle: &dyn Oracle, n: usize, init: Option<&Matrix>) -> Result<Partition> {
    let trace = blind_wl_trace(oracle, n, init)?;
    Ok(trace.last().expect("trace is never empty").clone())
}

/// Partitions after every round of [`blind_wl`], starting with the initial
/// one.
pub fn blind_wl_trace(
    oracle: &dyn Oracle,
    n: usize,
    init: Option<&Matrix>,
) -> Result<Vec<Partition>> {
    if !oracle.is_exact() {
        return Err(Error::InexactOracle);
    }
    if oracle.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: oracle.dim(),
        });
    }
    let mut current = match init {
        None => Partition::uniform(n),
        Some(b) => {
            if b.nrows() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: b.nrows(),
                });
            }
            Partition::from_indicator(b)?
        }
    };
    let mut trace = vec![current.clone()];
    for _ in 0..=n {
        let b = current.indicator_matrix();
        let y = oracle.apply(&b)?;
        if block_constant(&y, &current, 0.0) {
            return Ok(trace);
        }
        current = group_rows(&y, &current);
        trace.push(current.clone());
    }
    Err(Error::NonConvergence(n + 1))
}

fn group_rows(y: &Matrix, current: &Partition) -> Partition {
    let mut dictionary: HashMap<(usize, Vec<u64>), usize> = HashMap::new();
    let labels: Vec<usize> = (0..y.nrows())
        .map(|v| {
            let row: Vec<u64> = y.row(v).iter().map(|&x| value_key(x, 0.0)).collect();
            let next = dictionary.len();
            *dictionary.entry((current.class_of(v), row)).or_insert(next)
        })
        .collect();
    Partition::from_labels(&labels)
}
