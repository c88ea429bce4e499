//! Spectral routes to the cEP: eigendecomposition, k-means on the top
//! eigenvectors, structural eigenvectors and the Perron-vector partition.

mod eigen;
pub mod kmeans;

pub use eigen::{spectral_norm, symmetric_eig, top_k_eigvecs, EigenDecomposition};
pub use kmeans::kmeans;

use serde::{Deserialize, Serialize};

use crate::graph::Partition;
use crate::signal::normalized_indicator;
use crate::{Error, Graph, Matrix, Result};

/// Restart count used when callers have no preference.
pub const DEFAULT_RESTARTS: usize = 10;

/// Default relative tolerance for [`perron_partition`].
pub const DEFAULT_PERRON_TOLERANCE: f64 = 1e-8;

/// Eigenvalues closer than this (relative to `max(1, ‖M‖₂)`) share an
/// eigenspace.
const DEGENERACY: f64 = 1e-10;

/// k-means cost: squared deviations of the rows of `v` from their class means.
pub fn f_cost(p: &Partition, v: &Matrix) -> Result<f64> {
    if p.n() != v.nrows() {
        return Err(Error::DimensionMismatch {
            expected: p.n(),
            got: v.nrows(),
        });
    }
    let data = kmeans::rows_of(v);
    Ok(kmeans::within_cost(&data, v.ncols(), p.assignment(), p.k()))
}

/// Result of [`spectral_extract_detailed`].
#[derive(Debug, Clone)]
pub struct SpectralExtraction {
    pub partition: Partition,
    /// `γ_k − γ_{k+1}` of the input, if `k < n`.
    pub eigengap: Option<f64>,
}

/// Top-`k` eigenvectors of `sigma`, clustered into `k` classes.
pub fn spectral_extract(sigma: &Matrix, k: usize, restarts: usize, seed: u64) -> Result<Partition> {
    spectral_extract_detailed(sigma, k, restarts, seed).map(|e| e.partition)
}

pub fn spectral_extract_detailed(
    sigma: &Matrix,
    k: usize,
    restarts: usize,
    seed: u64,
) -> Result<SpectralExtraction> {
    let d = symmetric_eig(sigma)?;
    let v = top_k_eigvecs(&d, k)?;
    let partition = kmeans(&v, k, restarts, seed)?;
    Ok(SpectralExtraction {
        partition,
        eigengap: d.gap_after(k),
    })
}

/// Groups nodes by their entries in the dominant eigenvector of `A`.
///
/// Entries are sorted and split wherever consecutive values differ by more
/// than `tol·‖v₁‖_∞`. The cEP always refines the result.
pub fn perron_partition(g: &Graph, tol: f64) -> Result<Partition> {
    let d = symmetric_eig(g.adjacency())?;
    let n = g.n();
    if let Some(gap) = d.gap_after(1) {
        if gap <= DEGENERACY {
            return Err(Error::DegenerateDominant(gap));
        }
    }
    let v: Vec<f64> = d.eigenvectors.column(0).iter().copied().collect();
    let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]).then(a.cmp(&b)));
    let mut labels = vec![0usize; n];
    let mut class = 0;
    for w in 1..n {
        if v[order[w]] - v[order[w - 1]] > tol * scale {
            class += 1;
        }
        labels[order[w]] = class;
    }
    Ok(Partition::from_labels(&labels))
}

/// Indices of the eigenvectors in `d` that belong to the span of `p`'s
/// indicator.
///
/// Eigenvalues agreeing to within `1e-10·max(1, ‖M‖₂)` are treated as one
/// eigenspace `Q`. Its part inside `span(H̃)` has dimension equal to the
/// number of singular values of `Q⊤H̃` above one half; when that subspace is
/// block-constant within `tol`, the first that-many indices of the group are
/// reported. A true EP therefore yields exactly `k` indices.
pub fn structural_eigvec_indices(
    d: &EigenDecomposition,
    p: &Partition,
    tol: f64,
) -> Result<Vec<usize>> {
    Ok(structural_groups(d, p, tol)?
        .into_iter()
        .flat_map(|(start, lifted)| start..start + lifted.ncols())
        .collect())
}

/// Orthonormal columns spanning the structural eigenvectors found by
/// [`structural_eigvec_indices`]. Inside a repeated eigenvalue these are the
/// block-constant combinations of the eigenvectors rather than the
/// eigenvectors themselves, which need not be block-constant.
pub fn structural_basis(d: &EigenDecomposition, p: &Partition, tol: f64) -> Result<Matrix> {
    let groups = structural_groups(d, p, tol)?;
    let columns: Vec<_> = groups
        .iter()
        .flat_map(|(_, lifted)| lifted.column_iter())
        .collect();
    Ok(if columns.is_empty() {
        Matrix::zeros(d.n(), 0)
    } else {
        Matrix::from_columns(&columns)
    })
}

/// Start index and block-constant basis of every eigenvalue group that
/// meets `span(H̃)`.
fn structural_groups(
    d: &EigenDecomposition,
    p: &Partition,
    tol: f64,
) -> Result<Vec<(usize, Matrix)>> {
    if p.n() != d.n() {
        return Err(Error::DimensionMismatch {
            expected: d.n(),
            got: p.n(),
        });
    }
    let h = normalized_indicator(p);
    let threshold = DEGENERACY * d.spectral_norm().max(1.0);
    let mut groups = Vec::new();
    let mut start = 0;
    while start < d.n() {
        let mut end = start + 1;
        while end < d.n() && d.eigenvalues[end - 1] - d.eigenvalues[end] <= threshold {
            end += 1;
        }
        let q = d.eigenvectors.columns(start, end - start);
        let overlap = q.transpose() * &h;
        let svd = overlap.svd(true, false);
        let mut ranked: Vec<usize> = (0..svd.singular_values.len()).collect();
        ranked.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
        let rank = ranked
            .iter()
            .filter(|&&i| svd.singular_values[i] > 0.5)
            .count();
        if rank > 0 {
            let u = svd.u.as_ref().expect("left singular vectors requested");
            let mut basis = Matrix::zeros(end - start, rank);
            for (c, &i) in ranked.iter().take(rank).enumerate() {
                basis.set_column(c, &u.column(i));
            }
            let lifted = q * basis;
            if crate::wl::block_constant(&lifted, p, tol) {
                groups.push((start, lifted));
            }
        }
        start = end;
    }
    Ok(groups)
}

/// `Tr(Σ)/‖Σ‖₂`.
pub fn effective_rank(sigma: &Matrix) -> Result<f64> {
    let norm = spectral_norm(sigma)?;
    if norm == 0.0 {
        return Err(Error::ZeroMatrix);
    }
    Ok(sigma.trace() / norm)
}

/// Inputs to the finite-sample misclassification bound. `big_k` bounds the
/// whitened sample norm and `theta` is the unknown absolute constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundParams {
    pub sigma_norm: f64,
    pub r: f64,
    pub n: usize,
    pub s: usize,
    pub k: usize,
    pub delta: f64,
    pub big_k: f64,
    pub theta: f64,
    pub c: f64,
}

impl BoundParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.sigma_norm, self.r, self.delta, self.big_k, self.theta]
            .iter()
            .all(|x| x.is_finite() && *x > 0.0);
        if !positive || self.n == 0 || self.s == 0 || self.k == 0 {
            return Err(Error::InvalidConfig(
                "bound parameters must be positive".into(),
            ));
        }
        if !(self.c > 0.0 && self.c < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "failure probability {} outside (0,1)",
                self.c
            )));
        }
        Ok(())
    }
}

/// `√(8k)·‖Σ‖₂·Θ·(√t + t)/δ` with `t = K²·r·log(n/c)/s`. Only its shape in
/// `s` and `δ` is meaningful since `Θ` is not known.
pub fn misclassification_bound(b: &BoundParams) -> Result<f64> {
    b.validate()?;
    let t = b.big_k * b.big_k * b.r * (b.n as f64 / b.c).ln() / b.s as f64;
    Ok((8.0 * b.k as f64).sqrt() * b.sigma_norm * b.theta * (t.sqrt() + t) / b.delta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::fixtures::{perron_counterexample, singular_counterexample};
    use crate::graph::brute_force_cep;
    use crate::signal::{exact_covariance, FilterSpec, SignalModel};
    use proptest::prelude::*;

    fn star(leaves: usize) -> Graph {
        let edges: Vec<_> = (1..=leaves).map(|i| (0, i)).collect();
        Graph::from_unweighted_edges(leaves + 1, &edges).unwrap()
    }

    fn cycle(n: usize) -> Graph {
        let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        Graph::from_unweighted_edges(n, &edges).unwrap()
    }

    #[test]
    fn weighted_loops_dominant_pair() {
        let d = symmetric_eig(perron_counterexample().adjacency()).unwrap();
        assert!((d.eigenvalues[0] - 8.0).abs() < 1e-10);
        let v = d.eigenvectors.column(0);
        for (i, w) in [1., 1., 1., 1., 2., 2.].iter().enumerate() {
            assert!((v[i] / v[0] - w).abs() < 1e-10);
        }
    }

    #[test]
    fn f_cost_examples() {
        let p = Partition::uniform(2);
        assert_eq!(
            f_cost(&p, &Matrix::from_row_slice(2, 1, &[0., 1.])).unwrap(),
            0.5
        );
        let v = Matrix::from_fn(5, 3, |i, j| (i * 3 + j) as f64 * 0.37);
        assert_eq!(f_cost(&Partition::singletons(5), &v).unwrap(), 0.0);
        let p = Partition::from_labels(&[0, 1, 0, 1]);
        let v = Matrix::from_row_slice(4, 2, &[1., 2., -3., 0.5, 1., 2., -3., 0.5]);
        assert_eq!(f_cost(&p, &v).unwrap(), 0.0);
    }

    #[test]
    fn perron_examples() {
        assert_eq!(
            perron_partition(&perron_counterexample(), 1e-8)
                .unwrap()
                .assignment(),
            &[0, 0, 0, 0, 1, 1]
        );
        assert_ne!(brute_force_cep(&perron_counterexample()).unwrap().k(), 2);
        assert_eq!(perron_partition(&cycle(4), 1e-8).unwrap().k(), 1);
        let s = star(3);
        assert_eq!(
            perron_partition(&s, 1e-8).unwrap().assignment(),
            &[0, 1, 1, 1]
        );
        let v = symmetric_eig(s.adjacency())
            .unwrap()
            .eigenvectors
            .column(0)
            .into_owned();
        assert!((v[0] / v[1] - 3f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn perron_needs_simple_dominant() {
        let two = Graph::from_unweighted_edges(4, &[(0, 1), (2, 3)]).unwrap();
        assert!(matches!(
            perron_partition(&two, 1e-8),
            Err(Error::DegenerateDominant(_))
        ));
    }

    #[test]
    fn singular_zero_eigenvector_is_structural() {
        let g = singular_counterexample();
        let cep = brute_force_cep(&g).unwrap();
        assert_eq!(cep, Partition::singletons(4));
        let d = symmetric_eig(g.adjacency()).unwrap();
        let idx = structural_eigvec_indices(&d, &cep, 1e-8).unwrap();
        assert!(idx.iter().any(|&i| d.eigenvalues[i].abs() < 1e-10));
    }

    #[test]
    fn structural_counts() {
        let p3 = Graph::from_unweighted_edges(3, &[(0, 1), (1, 2)]).unwrap();
        let d = symmetric_eig(p3.adjacency()).unwrap();
        let cep = Partition::from_labels(&[0, 1, 0]);
        assert_eq!(
            structural_eigvec_indices(&d, &cep, 1e-8).unwrap(),
            vec![0, 2]
        );
        assert_eq!(
            structural_eigvec_indices(&d, &Partition::singletons(3), 1e-8).unwrap(),
            vec![0, 1, 2]
        );
        // star: eigenvalue 0 has multiplicity leaves − 1 and no structural part
        let s = star(4);
        let d = symmetric_eig(s.adjacency()).unwrap();
        let cep = Partition::from_labels(&[0, 1, 1, 1, 1]);
        assert_eq!(
            structural_eigvec_indices(&d, &cep, 1e-8).unwrap(),
            vec![0, 4]
        );
        // C4 has a double eigenvalue 0; only the Perron vector is structural
        let d = symmetric_eig(cycle(4).adjacency()).unwrap();
        assert_eq!(
            structural_eigvec_indices(&d, &Partition::uniform(4), 1e-8).unwrap(),
            vec![0]
        );
    }

    #[test]
    fn structural_basis_inside_repeated_eigenvalue() {
        // every eigenvalue of I repeats, so the returned eigenvectors are
        // generic and only their combinations are block-constant
        let d = symmetric_eig(&Matrix::identity(4, 4)).unwrap();
        let p = Partition::from_labels(&[0, 0, 1, 1]);
        assert_eq!(structural_eigvec_indices(&d, &p, 1e-9).unwrap(), vec![0, 1]);
        let basis = structural_basis(&d, &p, 1e-9).unwrap();
        assert_eq!(basis.ncols(), 2);
        assert!(f_cost(&p, &basis).unwrap() < 1e-24);
        assert!((basis.transpose() * &basis - Matrix::identity(2, 2)).amax() < 1e-12);
        let star_d = symmetric_eig(star(4).adjacency()).unwrap();
        let cep = Partition::from_labels(&[0, 1, 1, 1, 1]);
        let star_basis = structural_basis(&star_d, &cep, 1e-9).unwrap();
        assert!(f_cost(&cep, &star_basis).unwrap() < 1e-24);
    }

    #[test]
    fn noise_free_extraction_recovers_planted() {
        let g = Graph::from_unweighted_edges(4, &[(0, 1), (1, 2), (2, 3)]).unwrap();
        let planted = Partition::from_labels(&[0, 1, 1, 0]);
        let m = SignalModel::new(g, planted.clone(), 0.9, FilterSpec::adjacency()).unwrap();
        let sigma = exact_covariance(&m);
        let top = top_k_eigvecs(&symmetric_eig(&sigma).unwrap(), 2).unwrap();
        assert!(crate::wl::span_membership(&top, &planted.indicator_matrix(), 1e-8).unwrap());
        assert_eq!(
            spectral_extract(&sigma, 2, DEFAULT_RESTARTS, 3).unwrap(),
            planted
        );
    }

    #[test]
    fn pure_noise_gives_k_classes() {
        let p = spectral_extract(&Matrix::identity(6, 6), 3, 4, 1).unwrap();
        assert_eq!(p.k(), 3);
    }

    #[test]
    fn effective_rank_examples() {
        assert!((effective_rank(&Matrix::identity(5, 5)).unwrap() - 5.0).abs() < 1e-12);
        let u = nalgebra::DVector::from_vec(vec![0.6, 0.8, 0.0]);
        assert!((effective_rank(&(&u * u.transpose())).unwrap() - 1.0).abs() < 1e-12);
        assert!(matches!(
            effective_rank(&Matrix::zeros(3, 3)),
            Err(Error::ZeroMatrix)
        ));
    }

    #[test]
    fn bound_shape() {
        let base = BoundParams {
            sigma_norm: 2.0,
            r: 5.0,
            n: 100,
            s: 1_000_000,
            k: 4,
            delta: 0.5,
            big_k: 1.0,
            theta: 1.0,
            c: 0.05,
        };
        let a = misclassification_bound(&base).unwrap();
        let b = misclassification_bound(&BoundParams {
            s: 2_000_000,
            ..base
        })
        .unwrap();
        assert!((b / a - 0.5f64.sqrt()).abs() < 1e-2);
        let tiny = misclassification_bound(&BoundParams {
            delta: 1e-300,
            ..base
        })
        .unwrap();
        assert!(tiny > 1e290);
        assert!(misclassification_bound(&BoundParams { c: 1.0, ..base }).is_err());
        assert!(misclassification_bound(&BoundParams { delta: 0.0, ..base }).is_err());
    }

    fn block_matrix() -> impl Strategy<Value = (Vec<usize>, Matrix)> {
        (2usize..12, 1usize..4).prop_flat_map(|(n, m)| {
            (
                proptest::collection::vec(0usize..3, n),
                proptest::collection::vec(-3.0f64..3.0, 3 * m),
            )
                .prop_map(move |(labels, values)| {
                    let v = Matrix::from_fn(n, m, |i, j| values[labels[i] * m + j]);
                    (labels, v)
                })
        })
    }

    proptest! {
        #[test]
        fn zero_cost_iff_block_constant((labels, v) in block_matrix(), bump in 0.01f64..1.0, at in 0usize..100) {
            let p = Partition::from_labels(&labels);
            prop_assert_eq!(f_cost(&p, &v).unwrap(), 0.0);
            let mut w = v.clone();
            let row = at % w.nrows();
            w[(row, 0)] += bump;
            let alone = p.class_sizes()[p.class_of(row)] == 1;
            prop_assert_eq!(f_cost(&p, &w).unwrap() == 0.0, alone);
            prop_assert_eq!(crate::wl::block_constant(&w, &p, 0.0), alone);
        }

        #[test]
        fn separated_kmeans_matches_brute_force(
            labels in proptest::collection::vec(0usize..3, 3..12),
            jitter in proptest::collection::vec(-1.0f64..1.0, 24),
            seed in any::<u64>(),
        ) {
            let p = Partition::from_labels(&labels);
            let k = p.k();
            let n = labels.len();
            let spread = 0.01;
            let v = Matrix::from_fn(n, 2, |i, j| {
                let c = p.class_of(i);
                10.0 * (c as f64) * (1.0 + j as f64) + spread * jitter[i * 2 + j]
            });
            let best = brute_force_kmeans(&v, k);
            let got = kmeans(&v, k, DEFAULT_RESTARTS, seed).unwrap();
            prop_assert_eq!(&got, &best);
            prop_assert_eq!(got, p);
        }
    }

    fn brute_force_kmeans(v: &Matrix, k: usize) -> Partition {
        let n = v.nrows();
        let mut best: Option<(f64, Partition)> = None;
        let mut labels = vec![0usize; n];
        fn walk(
            i: usize,
            used: usize,
            k: usize,
            labels: &mut [usize],
            v: &Matrix,
            best: &mut Option<(f64, Partition)>,
        ) {
            if i == labels.len() {
                if used == k {
                    let p = Partition::from_labels(labels);
                    let cost = f_cost(&p, v).unwrap();
                    if best.as_ref().is_none_or(|(c, _)| cost < *c) {
                        *best = Some((cost, p));
                    }
                }
                return;
            }
            if labels.len() - i < k - used {
                return;
            }
            for l in 0..(used + 1).min(k) {
                labels[i] = l;
                walk(i + 1, used.max(l + 1), k, labels, v, best);
            }
        }
        walk(0, 0, k, &mut labels, v, &mut best);
        best.unwrap().1
    }
}
