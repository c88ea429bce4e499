use nalgebra::SymmetricEigen;

use crate::{Error, Matrix, Result};

const MAX_SWEEPS: usize = 10_000;

/// Eigenpairs of a symmetric matrix, sorted by descending eigenvalue. In each
/// eigenvector the first entry of magnitude above `1e-12` is positive.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Matrix,
}

impl EigenDecomposition {
    pub fn n(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `γ_k − γ_{k+1}`; `None` when `k` is `0` or `n`.
    pub fn gap_after(&self, k: usize) -> Option<f64> {
        (k > 0 && k < self.n()).then(|| self.eigenvalues[k - 1] - self.eigenvalues[k])
    }

    /// Largest eigenvalue magnitude.
    pub fn spectral_norm(&self) -> f64 {
        self.eigenvalues.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

pub(crate) fn fix_sign(column: &mut [f64]) {
    if let Some(&lead) = column.iter().find(|x| x.abs() > 1e-12) {
        if lead < 0.0 {
            column.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

/// Full decomposition via Householder tridiagonalisation and implicit QR.
pub fn symmetric_eig(m: &Matrix) -> Result<EigenDecomposition> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: m.ncols(),
        });
    }
    let scale = m.amax().max(f64::MIN_POSITIVE);
    for i in 0..n {
        for j in i + 1..n {
            if (m[(i, j)] - m[(j, i)]).abs() > 1e-10 * scale {
                return Err(Error::NotSymmetric(i, j));
            }
        }
    }
    let eig =
        SymmetricEigen::try_new(m.clone(), f64::EPSILON, MAX_SWEEPS).ok_or(Error::EigenFailure)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .total_cmp(&eig.eigenvalues[a])
            .then(a.cmp(&b))
    });
    let eigenvalues = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut eigenvectors = Matrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut column: Vec<f64> = eig.eigenvectors.column(src).iter().copied().collect();
        fix_sign(&mut column);
        eigenvectors.column_mut(dst).copy_from_slice(&column);
    }
    Ok(EigenDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

/// Largest-magnitude eigenvalue of a symmetric matrix.
pub fn spectral_norm(m: &Matrix) -> Result<f64> {
    let eig =
        SymmetricEigen::try_new(m.clone(), f64::EPSILON, MAX_SWEEPS).ok_or(Error::EigenFailure)?;
    Ok(eig
        .eigenvalues
        .iter()
        .fold(0.0, |acc: f64, v| acc.max(v.abs())))
}

/// The eigenvectors of the `k` largest eigenvalues.
pub fn top_k_eigvecs(d: &EigenDecomposition, k: usize) -> Result<Matrix> {
    if k == 0 || k > d.n() {
        return Err(Error::InvalidConfig(format!(
            "k = {k} must lie in 1..={}",
            d.n()
        )));
    }
    if let Some(gap) = d.gap_after(k) {
        if gap < 1e-10 {
            log::warn!("eigengap after {k} is {gap:e}; the top-{k} subspace is ambiguous");
        }
    }
    Ok(d.eigenvectors.columns(0, k).into_owned())
}
