//! Weighted undirected graphs, node partitions and the quotient algebra
//! `AH = H Aπ`.

use std::collections::HashMap;
use std::hash::Hash;

use nalgebra::{DVector, SymmetricEigen};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::{Error, Matrix, Result};

/// Weighted undirected graph stored as a dense symmetric adjacency matrix.
///
/// A self-loop of weight `w` contributes `w` to the diagonal entry.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    adjacency: Matrix,
    simple: bool,
}

impl Graph {
    /// Builds a graph from `(u, v, weight)` triples. `u == v` adds a loop.
    pub fn from_edge_list(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let mut adjacency = Matrix::zeros(n, n);
        for &(u, v, weight) in edges {
            for node in [u, v] {
                if node >= n {
                    return Err(Error::NodeOutOfRange { node, n });
                }
            }
            if !(weight > 0.0) || !weight.is_finite() {
                return Err(Error::InvalidWeight { u, v, weight });
            }
            if adjacency[(u, v)] != 0.0 {
                return Err(Error::DuplicateEdge(u.min(v), u.max(v)));
            }
            adjacency[(u, v)] = weight;
            adjacency[(v, u)] = weight;
        }
        Ok(Self::from_checked(adjacency))
    }

    /// Unit-weight edges, no loops expected (but allowed).
    pub fn from_unweighted_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let weighted: Vec<_> = edges.iter().map(|&(u, v)| (u, v, 1.0)).collect();
        Self::from_edge_list(n, &weighted)
    }

    /// Wraps an existing adjacency matrix after checking that it is square,
    /// exactly symmetric, finite and nonnegative.
    pub fn from_adjacency(adjacency: Matrix) -> Result<Self> {
        let n = adjacency.nrows();
        if adjacency.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: adjacency.ncols(),
            });
        }
        for u in 0..n {
            for v in u..n {
                let w = adjacency[(u, v)];
                if w.to_bits() != adjacency[(v, u)].to_bits() {
                    return Err(Error::NotSymmetric(u, v));
                }
                if !(w >= 0.0) || !w.is_finite() {
                    return Err(Error::InvalidWeight { u, v, weight: w });
                }
            }
        }
        Ok(Self::from_checked(adjacency))
    }

    fn from_checked(adjacency: Matrix) -> Self {
        let n = adjacency.nrows();
        let simple = (0..n).all(|u| adjacency[(u, u)] == 0.0)
            && adjacency.iter().all(|&w| w == 0.0 || w == 1.0);
        Self { adjacency, simple }
    }

    pub fn n(&self) -> usize {
        self.adjacency.nrows()
    }

    pub fn adjacency(&self) -> &Matrix {
        &self.adjacency
    }

    pub fn weight(&self, u: usize, v: usize) -> f64 {
        self.adjacency[(u, v)]
    }

    /// Unweighted, loop-free, 0/1 entries.
    pub fn is_simple(&self) -> bool {
        self.simple
    }

    pub fn is_integer_weighted(&self) -> bool {
        self.adjacency.iter().all(|w| w.fract() == 0.0)
    }

    /// Edges `(u, v, w)` with `u <= v`, in row-major order.
    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        let n = self.n();
        let mut out = Vec::new();
        for u in 0..n {
            for v in u..n {
                let w = self.adjacency[(u, v)];
                if w != 0.0 {
                    out.push((u, v, w));
                }
            }
        }
        out
    }

    pub fn neighbors(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.n()).filter(move |&u| u != v && self.adjacency[(v, u)] != 0.0)
    }

    /// Tolerance used by [`is_equitable`] when the caller has no better
    /// choice: exact for integer weights, `1e-9·max|A|` otherwise.
    pub fn default_tolerance(&self) -> f64 {
        if self.is_integer_weighted() {
            0.0
        } else {
            1e-9 * self.adjacency.amax()
        }
    }
}

/// Assignment of nodes to classes with canonical class ids: classes are
/// numbered in order of their lowest-index node, so two equal partitions have
/// identical assignment vectors.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Partition {
    assignment: Vec<usize>,
    sizes: Vec<usize>,
}

impl Partition {
    /// Canonicalises an arbitrary labelling.
    pub fn from_labels<T: Eq + Hash>(labels: &[T]) -> Self {
        let mut ids: HashMap<&T, usize> = HashMap::new();
        let mut sizes = Vec::new();
        let assignment = labels
            .iter()
            .map(|label| {
                let next = ids.len();
                let id = *ids.entry(label).or_insert(next);
                if id == sizes.len() {
                    sizes.push(0);
                }
                sizes[id] += 1;
                id
            })
            .collect();
        Self { assignment, sizes }
    }

    /// Builds a partition from explicit classes, which must cover `0..n`
    /// exactly once.
    pub fn from_classes(n: usize, classes: &[Vec<usize>]) -> Result<Self> {
        let mut labels = vec![usize::MAX; n];
        for (c, class) in classes.iter().enumerate() {
            for &v in class {
                if v >= n {
                    return Err(Error::NodeOutOfRange { node: v, n });
                }
                if labels[v] != usize::MAX {
                    return Err(Error::InvalidPartition(format!("node {v} appears twice")));
                }
                labels[v] = c;
            }
        }
        if let Some(v) = labels.iter().position(|&l| l == usize::MAX) {
            return Err(Error::InvalidPartition(format!("node {v} is unassigned")));
        }
        Ok(Self::from_labels(&labels))
    }

    /// All nodes in one class.
    pub fn uniform(n: usize) -> Self {
        Self::from_labels(&vec![0usize; n])
    }

    pub fn singletons(n: usize) -> Self {
        Self::from_labels(&(0..n).collect::<Vec<_>>())
    }

    pub fn n(&self) -> usize {
        self.assignment.len()
    }

    pub fn k(&self) -> usize {
        self.sizes.len()
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn class_of(&self, v: usize) -> usize {
        self.assignment[v]
    }

    pub fn class_sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn classes(&self) -> Vec<Vec<usize>> {
        let mut classes = vec![Vec::new(); self.k()];
        for (v, &c) in self.assignment.iter().enumerate() {
            classes[c].push(v);
        }
        classes
    }

    /// `H` with `H[i][j] = 1` iff node `i` lies in class `j`.
    pub fn indicator_matrix(&self) -> Matrix {
        let mut h = Matrix::zeros(self.n(), self.k());
        for (v, &c) in self.assignment.iter().enumerate() {
            h[(v, c)] = 1.0;
        }
        h
    }

    /// Reads a partition back from a 0/1 indicator matrix with exactly one
    /// nonzero per row. Empty and duplicate columns are tolerated.
    pub fn from_indicator(h: &Matrix) -> Result<Self> {
        let mut labels = Vec::with_capacity(h.nrows());
        for i in 0..h.nrows() {
            let mut found = None;
            for j in 0..h.ncols() {
                match h[(i, j)] {
                    0.0 => {}
                    1.0 if found.is_none() => found = Some(j),
                    _ => {
                        return Err(Error::InvalidIndicator(format!(
                            "row {i} is not a unit indicator"
                        )))
                    }
                }
            }
            match found {
                Some(j) => labels.push(j),
                None => {
                    return Err(Error::InvalidIndicator(format!("row {i} has no class")));
                }
            }
        }
        Ok(Self::from_labels(&labels))
    }

    /// True iff every class of `self` lies inside some class of `other`.
    pub fn refines(&self, other: &Partition) -> bool {
        if self.n() != other.n() {
            return false;
        }
        let mut image = vec![usize::MAX; self.k()];
        for (v, &c) in self.assignment.iter().enumerate() {
            let target = other.assignment[v];
            if image[c] == usize::MAX {
                image[c] = target;
            } else if image[c] != target {
                return false;
            }
        }
        true
    }

    /// Common refinement of two partitions on the same node set.
    pub fn meet(&self, other: &Partition) -> Partition {
        let pairs: Vec<_> = self
            .assignment
            .iter()
            .zip(&other.assignment)
            .map(|(&a, &b)| (a, b))
            .collect();
        Partition::from_labels(&pairs)
    }
}

impl Serialize for Partition {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.assignment.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Partition {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let labels = Vec::<usize>::deserialize(deserializer)?;
        Ok(Partition::from_labels(&labels))
    }
}

/// The `k × k` matrix `Aπ = (HᵀH)⁻¹HᵀAH`. For an equitable partition entry
/// `(i, j)` is the weight every class-`i` node sends into class `j`; for other
/// partitions it is the class mean of that weight.
#[derive(Debug, Clone, PartialEq)]
pub struct QuotientMatrix(pub Matrix);

impl QuotientMatrix {
    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    /// Eigenpairs `(λ, v)` of `Aπ`, sorted by descending eigenvalue.
    ///
    /// `Aπ` is not symmetric for unequal class sizes, but `S^{1/2} Aπ S^{-1/2}`
    /// is (with `S = diag(sizes)`), so the pairs are obtained from that
    /// symmetric matrix and mapped back with `v = S^{-1/2} w`.
    pub fn eigenpairs(&self, sizes: &[usize]) -> Vec<(f64, DVector<f64>)> {
        let k = self.0.nrows();
        let root: Vec<f64> = sizes.iter().map(|&s| (s as f64).sqrt()).collect();
        let mut sym = Matrix::from_fn(k, k, |i, j| self.0[(i, j)] * root[i] / root[j]);
        sym = (&sym + sym.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym);
        let mut pairs: Vec<(f64, DVector<f64>)> = (0..k)
            .map(|c| {
                let w = eig.eigenvectors.column(c);
                let v = DVector::from_fn(k, |i, _| w[i] / root[i]);
                (eig.eigenvalues[c], v)
            })
            .collect();
        pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
        pairs
    }
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}

/// `MH`: row `u`, column `c` holds the weight node `u` sends into class `c`.
pub fn class_sums(m: &Matrix, p: &Partition) -> Matrix {
    let n = m.nrows();
    let mut out = Matrix::zeros(n, p.k());
    for v in 0..n {
        let c = p.class_of(v);
        for u in 0..n {
            out[(u, c)] += m[(u, v)];
        }
    }
    out
}

/// Quotient of an arbitrary square matrix by a partition.
pub fn quotient_of_matrix(m: &Matrix, p: &Partition) -> Result<QuotientMatrix> {
    check_len(m.nrows(), p.n())?;
    let sums = class_sums(m, p);
    let mut q = Matrix::zeros(p.k(), p.k());
    for u in 0..p.n() {
        let i = p.class_of(u);
        for j in 0..p.k() {
            q[(i, j)] += sums[(u, j)];
        }
    }
    for (i, &size) in p.class_sizes().iter().enumerate() {
        for j in 0..p.k() {
            q[(i, j)] /= size as f64;
        }
    }
    Ok(QuotientMatrix(q))
}

pub fn quotient(g: &Graph, p: &Partition) -> Result<QuotientMatrix> {
    quotient_of_matrix(g.adjacency(), p)
}

/// `max |MH − H·quotient(M, p)| ≤ tol`.
pub fn is_equitable_matrix(m: &Matrix, p: &Partition, tol: f64) -> Result<bool> {
    let q = quotient_of_matrix(m, p)?;
    let sums = class_sums(m, p);
    for u in 0..p.n() {
        let i = p.class_of(u);
        for j in 0..p.k() {
            if (sums[(u, j)] - q.0[(i, j)]).abs() > tol {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

pub fn is_equitable(g: &Graph, p: &Partition, tol: f64) -> Result<bool> {
    is_equitable_matrix(g.adjacency(), p, tol)
}

/// Exhaustive search for the coarsest equitable partition. Enumerates every
/// set partition (restricted growth strings) so it is limited to `n <= 10`.
///
/// Every equitable partition found must refine the minimal one; otherwise
/// [`Error::CepNotUnique`] is returned.
pub fn brute_force_cep(g: &Graph) -> Result<Partition> {
    let n = g.n();
    if n > 10 {
        return Err(Error::TooLarge(n));
    }
    if n == 0 {
        return Ok(Partition::from_labels::<usize>(&[]));
    }
    let tol = g.default_tolerance();
    let mut equitable = Vec::new();
    let mut labels = vec![0usize; n];
    let mut maxima = vec![0usize; n];
    loop {
        let p = Partition::from_labels(&labels);
        if is_equitable(g, &p, tol)? {
            equitable.push(p);
        }
        // next restricted growth string
        let mut i = n - 1;
        loop {
            if i == 0 {
                return select_coarsest(equitable);
            }
            if labels[i] <= maxima[i - 1] {
                labels[i] += 1;
                maxima[i] = maxima[i - 1].max(labels[i]);
                for j in i + 1..n {
                    labels[j] = 0;
                    maxima[j] = maxima[i];
                }
                break;
            }
            i -= 1;
        }
    }
}

fn select_coarsest(equitable: Vec<Partition>) -> Result<Partition> {
    let coarsest = equitable
        .iter()
        .min_by_key(|p| p.k())
        .cloned()
        .ok_or(Error::CepNotUnique)?;
    if equitable.iter().all(|p| p.refines(&coarsest)) {
        Ok(coarsest)
    } else {
        Err(Error::CepNotUnique)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn path(n: usize) -> Graph {
        let edges: Vec<_> = (0..n - 1).map(|i| (i, i + 1)).collect();
        Graph::from_unweighted_edges(n, &edges).unwrap()
    }

    fn cycle(n: usize) -> Graph {
        let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        Graph::from_unweighted_edges(n, &edges).unwrap()
    }

    fn star(leaves: usize) -> Graph {
        let edges: Vec<_> = (1..=leaves).map(|i| (0, i)).collect();
        Graph::from_unweighted_edges(leaves + 1, &edges).unwrap()
    }

    fn p(classes: &[&[usize]]) -> Partition {
        let n = classes.iter().map(|c| c.len()).sum();
        let owned: Vec<Vec<usize>> = classes.iter().map(|c| c.to_vec()).collect();
        Partition::from_classes(n, &owned).unwrap()
    }

    #[test]
    fn edge_list_construction() {
        let g = Graph::from_edge_list(2, &[(0, 1, 1.0)]).unwrap();
        assert_eq!(
            g.adjacency(),
            &Matrix::from_row_slice(2, 2, &[0., 1., 1., 0.])
        );
        assert!(g.is_simple());
        let loop_graph = Graph::from_edge_list(1, &[(0, 0, 4.0)]).unwrap();
        assert_eq!(loop_graph.weight(0, 0), 4.0);
        assert!(!loop_graph.is_simple());
    }

    #[test]
    fn edge_list_errors() {
        assert!(matches!(
            Graph::from_edge_list(2, &[(0, 2, 1.0)]),
            Err(Error::NodeOutOfRange { node: 2, n: 2 })
        ));
        assert!(matches!(
            Graph::from_edge_list(3, &[(0, 1, 1.0), (1, 0, 2.0)]),
            Err(Error::DuplicateEdge(0, 1))
        ));
        assert!(matches!(
            Graph::from_edge_list(3, &[(0, 1, 0.0)]),
            Err(Error::InvalidWeight { .. })
        ));
        assert!(Graph::from_edge_list(3, &[(0, 1, -1.0)]).is_err());
    }

    #[test]
    fn from_adjacency_rejects_asymmetry() {
        let m = Matrix::from_row_slice(2, 2, &[0., 1., 0.5, 0.]);
        assert!(matches!(
            Graph::from_adjacency(m),
            Err(Error::NotSymmetric(0, 1))
        ));
    }

    #[test]
    fn canonical_labels() {
        let a = Partition::from_labels(&[7, 3, 7, 9]);
        let b = Partition::from_labels(&["x", "y", "x", "z"]);
        assert_eq!(a.assignment(), &[0, 1, 0, 2]);
        assert_eq!(a, b);
        assert_eq!(a.class_sizes(), &[2, 1, 1]);
    }

    #[test]
    fn indicator_examples() {
        assert_eq!(
            Partition::from_labels(&[0, 0]).indicator_matrix(),
            Matrix::from_row_slice(2, 1, &[1., 1.])
        );
        assert_eq!(
            Partition::from_labels(&[0, 1, 0]).indicator_matrix(),
            Matrix::from_row_slice(3, 2, &[1., 0., 0., 1., 1., 0.])
        );
        assert_eq!(
            Partition::singletons(3).indicator_matrix(),
            Matrix::identity(3, 3)
        );
    }

    #[test]
    fn indicator_roundtrip_and_rejection() {
        let p = Partition::from_labels(&[0, 1, 1, 2]);
        assert_eq!(Partition::from_indicator(&p.indicator_matrix()).unwrap(), p);
        let bad = Matrix::from_row_slice(2, 2, &[1., 1., 0., 1.]);
        assert!(Partition::from_indicator(&bad).is_err());
    }

    #[test]
    fn quotient_examples() {
        let q = quotient(&path(3), &p(&[&[0, 2], &[1]])).unwrap();
        assert_eq!(q.0, Matrix::from_row_slice(2, 2, &[0., 1., 2., 0.]));
        let q = quotient(&star(3), &p(&[&[0], &[1, 2, 3]])).unwrap();
        assert_eq!(q.0, Matrix::from_row_slice(2, 2, &[0., 3., 1., 0.]));
        let q = quotient(&cycle(4), &Partition::uniform(4)).unwrap();
        assert_eq!(q.0, Matrix::from_row_slice(1, 1, &[2.]));
    }

    #[test]
    fn equitable_examples() {
        assert!(is_equitable(&path(3), &p(&[&[0, 2], &[1]]), 0.0).unwrap());
        assert!(!is_equitable(&path(3), &Partition::uniform(3), 0.0).unwrap());
    }

    #[test]
    fn refinement_examples() {
        let s = Partition::singletons(3);
        let a = p(&[&[0, 1], &[2]]);
        let b = p(&[&[0], &[1, 2]]);
        assert!(s.refines(&a));
        assert!(a.refines(&a));
        assert!(!a.refines(&b));
        assert!(a.refines(&Partition::uniform(3)));
    }

    #[test]
    fn brute_force_small_graphs() {
        assert_eq!(brute_force_cep(&cycle(4)).unwrap().k(), 1);
        assert_eq!(brute_force_cep(&path(4)).unwrap(), p(&[&[0, 3], &[1, 2]]));
        assert_eq!(brute_force_cep(&star(3)).unwrap(), p(&[&[0], &[1, 2, 3]]));
        assert!(matches!(
            brute_force_cep(&path(11)),
            Err(Error::TooLarge(11))
        ));
    }

    #[test]
    fn quotient_eigenpairs_lift() {
        let g = star(3);
        let part = p(&[&[0], &[1, 2, 3]]);
        let q = quotient(&g, &part).unwrap();
        let h = part.indicator_matrix();
        for (lambda, v) in q.eigenpairs(part.class_sizes()) {
            let lifted = &h * &v;
            let residual = g.adjacency() * &lifted - &lifted * lambda;
            assert!(residual.amax() <= 1e-9 * lifted.amax());
        }
    }

    #[test]
    fn partition_serde_is_assignment_vector() {
        let p = Partition::from_labels(&[2, 2, 5]);
        assert_eq!(serde_json::to_string(&p).unwrap(), "[0,0,1]");
        let back: Partition = serde_json::from_str("[4,1,4]").unwrap();
        assert_eq!(back.assignment(), &[0, 1, 0]);
    }
}
