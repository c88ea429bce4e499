//! Filtered low-rank graph signals `y = α f(A) H̃ x + (1 − α) z` and their
//! covariance.

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::graph::{Graph, Partition};
use crate::wl::wl_refine_matrix;
use crate::{seed, Error, Matrix, Result};

/// Polynomial graph filter `f(A) = Σ_k h_k A^k`, coefficients from `h_0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct FilterSpec {
    coefficients: Vec<f64>,
}

impl FilterSpec {
    pub fn new(coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.iter().any(|h| !h.is_finite()) {
            return Err(Error::InvalidConfig(
                "filter coefficients must be finite".into(),
            ));
        }
        if coefficients.iter().all(|&h| h == 0.0) {
            return Err(Error::InvalidConfig(
                "filter needs a nonzero coefficient".into(),
            ));
        }
        Ok(Self { coefficients })
    }

    /// `f(A) = I`.
    pub fn identity() -> Self {
        Self {
            coefficients: vec![1.0],
        }
    }

    /// `f(A) = A`.
    pub fn adjacency() -> Self {
        Self {
            coefficients: vec![0.0, 1.0],
        }
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn degree(&self) -> usize {
        self.coefficients.len() - 1
    }

    /// `f(M)` for a small square matrix, e.g. a quotient.
    pub fn evaluate(&self, m: &Matrix) -> Matrix {
        let n = m.nrows();
        let identity = Matrix::identity(n, n);
        let mut acc = Matrix::zeros(n, n);
        for &h in self.coefficients.iter().rev() {
            acc = m * acc + &identity * h;
        }
        acc
    }
}

impl TryFrom<Vec<f64>> for FilterSpec {
    type Error = Error;

    fn try_from(coefficients: Vec<f64>) -> Result<Self> {
        Self::new(coefficients)
    }
}

impl From<FilterSpec> for Vec<f64> {
    fn from(f: FilterSpec) -> Self {
        f.coefficients
    }
}

/// `Σ_k h_k A^k X` by Horner's rule, without ever forming `A^k`.
pub fn apply_filter(g: &Graph, f: &FilterSpec, x: &Matrix) -> Result<Matrix> {
    if x.nrows() != g.n() {
        return Err(Error::DimensionMismatch {
            expected: g.n(),
            got: x.nrows(),
        });
    }
    let a = g.adjacency();
    let mut coefficients = f.coefficients().iter().rev();
    let mut acc = x * *coefficients.next().expect("nonempty filter");
    for &h in coefficients {
        acc = a * acc + x * h;
    }
    Ok(acc)
}

/// `H̃ = H diag(1/√|C_i|)`, the indicator with unit-norm columns.
pub fn normalized_indicator(p: &Partition) -> Matrix {
    let mut h = p.indicator_matrix();
    for (c, &size) in p.class_sizes().iter().enumerate() {
        h.column_mut(c).scale_mut(1.0 / (size as f64).sqrt());
    }
    h
}

#[derive(Debug, Clone)]
pub struct SignalModel {
    graph: Graph,
    planted: Partition,
    alpha: f64,
    filter: FilterSpec,
    /// `f(A) H̃`, the excitation basis.
    basis: Matrix,
}

impl SignalModel {
    pub fn new(graph: Graph, planted: Partition, alpha: f64, filter: FilterSpec) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::InvalidConfig(format!(
                "alpha = {alpha} outside [0, 1]"
            )));
        }
        if planted.n() != graph.n() {
            return Err(Error::DimensionMismatch {
                expected: graph.n(),
                got: planted.n(),
            });
        }
        let basis = apply_filter(&graph, &filter, &normalized_indicator(&planted))?;
        Ok(Self {
            graph,
            planted,
            alpha,
            filter,
            basis,
        })
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn planted(&self) -> &Partition {
        &self.planted
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn filter(&self) -> &FilterSpec {
        &self.filter
    }

    pub fn n(&self) -> usize {
        self.graph.n()
    }

    /// The same graph and filter with a different noise mix.
    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::InvalidConfig(format!(
                "alpha = {alpha} outside [0, 1]"
            )));
        }
        Ok(Self {
            alpha,
            ..self.clone()
        })
    }
}

/// Sampled outputs, one column per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub samples: Matrix,
    pub seed: u64,
    pub alpha: f64,
    pub filter: FilterSpec,
}

impl SampleSet {
    pub fn n(&self) -> usize {
        self.samples.nrows()
    }

    pub fn s(&self) -> usize {
        self.samples.ncols()
    }
}

/// Standard-normal excitations `(x, z)` for samples `0..s`. Sample `i` draws
/// `k` values for `x` and then `n` for `z` from substream `i` of `seed`, so
/// any prefix of a longer draw is identical to a shorter draw.
pub fn draw_excitations(n: usize, k: usize, s: usize, seed: u64) -> (Matrix, Matrix) {
    let draw = |i: usize| {
        let mut rng = seed::substream(seed, i as u64);
        let x: Vec<f64> = (0..k).map(|_| rng.sample(StandardNormal)).collect();
        let z: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        (x, z)
    };
    #[cfg(feature = "parallel")]
    let columns: Vec<_> = {
        use rayon::prelude::*;
        (0..s).into_par_iter().map(draw).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let columns: Vec<_> = (0..s).map(draw).collect();
    let mut x = Matrix::zeros(k, s);
    let mut z = Matrix::zeros(n, s);
    for (i, (xi, zi)) in columns.into_iter().enumerate() {
        x.column_mut(i).copy_from_slice(&xi);
        z.column_mut(i).copy_from_slice(&zi);
    }
    (x, z)
}

/// Combines excitations into outputs for a model.
pub fn outputs(m: &SignalModel, x: &Matrix, z: &Matrix) -> Matrix {
    &m.basis * x * m.alpha + z * (1.0 - m.alpha)
}

pub fn generate_samples(m: &SignalModel, s: usize, seed: u64) -> Result<SampleSet> {
    if s == 0 {
        return Err(Error::InvalidConfig("need at least one sample".into()));
    }
    let (x, z) = draw_excitations(m.n(), m.planted.k(), s, seed);
    Ok(SampleSet {
        samples: outputs(m, &x, &z),
        seed,
        alpha: m.alpha,
        filter: m.filter.clone(),
    })
}

/// Uncentred second moment `(1/s) Σ y_i y_iᵀ`.
pub fn sample_covariance(ss: &SampleSet) -> Matrix {
    covariance_of(&ss.samples)
}

pub fn covariance_of(samples: &Matrix) -> Matrix {
    let s = samples.ncols() as f64;
    let mut sigma = samples * samples.transpose() / s;
    symmetrize(&mut sigma);
    sigma
}

fn symmetrize(m: &mut Matrix) {
    let n = m.nrows();
    for i in 0..n {
        for j in i + 1..n {
            let v = m[(i, j)];
            m[(j, i)] = v;
        }
    }
}

/// `Σ = α² f(A) H̃ H̃ᵀ f(A)ᵀ + (1 − α)² I`.
pub fn exact_covariance(m: &SignalModel) -> Matrix {
    let n = m.n();
    let mut sigma = &m.basis * m.basis.transpose() * (m.alpha * m.alpha)
        + Matrix::identity(n, n) * (1.0 - m.alpha).powi(2);
    symmetrize(&mut sigma);
    sigma
}

/// Outcome of checking that `f(A)` and `f(A)²` have the planted partition as
/// their coarsest equitable partition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FilterCompatibility {
    pub filter_matches: bool,
    pub squared_matches: bool,
}

impl FilterCompatibility {
    pub fn is_compatible(&self) -> bool {
        self.filter_matches && self.squared_matches
    }
}

fn refinement_resolution(m: &Matrix) -> f64 {
    if m.iter().all(|x| x.fract() == 0.0) {
        0.0
    } else {
        1e-9 * m.amax().max(1.0)
    }
}

pub fn filter_compatibility(
    g: &Graph,
    planted: &Partition,
    f: &FilterSpec,
) -> Result<FilterCompatibility> {
    let n = g.n();
    let filtered = apply_filter(g, f, &Matrix::identity(n, n))?;
    let squared = &filtered * &filtered;
    let cep = |m: &Matrix| -> Result<Partition> {
        let trace = wl_refine_matrix(m, &Partition::uniform(n), refinement_resolution(m))?;
        Ok(trace.last().expect("nonempty trace").partition.clone())
    };
    let report = FilterCompatibility {
        filter_matches: &cep(&filtered)? == planted,
        squared_matches: &cep(&squared)? == planted,
    };
    if !report.is_compatible() {
        log::warn!("filter does not preserve the planted partition: {report:?}");
    }
    Ok(report)
}
