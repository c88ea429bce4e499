//! Two small graphs on which structural eigenvectors behave unexpectedly.
//!
//! * [`perron_counterexample`]: the dominant eigenvector `∝ [1,1,1,1,2,2]`
//!   only separates two groups although the cEP is discrete.
//! * [`singular_counterexample`]: a singular adjacency matrix whose zero
//!   eigenspace meets the span of the cEP indicator.

use std::fmt;

use serde::Serialize;

use crate::graph::{brute_force_cep, Partition};
use crate::spectral::{
    perron_partition, structural_eigvec_indices, symmetric_eig, DEFAULT_PERRON_TOLERANCE,
};
use crate::wl::wl_refine;
use crate::{Graph, Matrix, Result};

/// Weighted six-node graph with self-loops; eigenvalue 8 on `[1,1,1,1,2,2]`.
pub fn perron_counterexample() -> Graph {
    Graph::from_edge_list(
        6,
        &[
            (0, 4, 2.),
            (4, 5, 4.),
            (5, 1, 2.),
            (1, 2, 4.),
            (2, 3, 4.),
            (0, 0, 4.),
            (3, 3, 4.),
            (4, 4, 3.),
            (5, 5, 3.),
        ],
    )
    .expect("valid fixture")
}

/// Four-node graph with a self-loop of weight 2 on nodes 2 and 3.
pub fn singular_counterexample() -> Graph {
    Graph::from_adjacency(Matrix::from_row_slice(
        4,
        4,
        &[
            0., 1., 1., 0., 1., 0., 1., 1., 1., 1., 2., 1., 0., 1., 1., 2.,
        ],
    ))
    .expect("valid fixture")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixtureCheck {
    pub name: &'static str,
    pub expected: String,
    pub observed: String,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixtureReport {
    pub checks: Vec<FixtureCheck>,
}

impl FixtureReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

impl fmt::Display for FixtureReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            let mark = if c.pass { "ok  " } else { "FAIL" };
            writeln!(
                f,
                "{mark} {}: expected {}, observed {}",
                c.name, c.expected, c.observed
            )?;
        }
        Ok(())
    }
}

fn integer_matrix(g: &Graph) -> Vec<Vec<i64>> {
    let a = g.adjacency();
    (0..g.n())
        .map(|i| (0..g.n()).map(|j| a[(i, j)] as i64).collect())
        .collect()
}

/// Exact determinant by fraction-free (Bareiss) elimination.
pub fn integer_determinant(m: &[Vec<i64>]) -> i128 {
    let n = m.len();
    let mut a: Vec<Vec<i128>> = m
        .iter()
        .map(|r| r.iter().map(|&x| x as i128).collect())
        .collect();
    let mut sign = 1;
    let mut prev = 1i128;
    for k in 0..n {
        if a[k][k] == 0 {
            match (k + 1..n).find(|&r| a[r][k] != 0) {
                Some(r) => {
                    a.swap(k, r);
                    sign = -sign;
                }
                None => return 0,
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) / prev;
            }
        }
        prev = a[k][k];
    }
    sign * a[n - 1][n - 1]
}

fn check(
    name: &'static str,
    expected: impl fmt::Display,
    observed: impl fmt::Display,
    pass: bool,
) -> FixtureCheck {
    FixtureCheck {
        name,
        expected: expected.to_string(),
        observed: observed.to_string(),
        pass,
    }
}

/// Recomputes every recorded property of both fixtures.
pub fn fixtures_report() -> Result<FixtureReport> {
    let mut checks = Vec::new();

    let g = perron_counterexample();
    let a = integer_matrix(&g);
    let v = [1i64, 1, 1, 1, 2, 2];
    let av: Vec<i64> = a
        .iter()
        .map(|r| r.iter().zip(&v).map(|(x, y)| x * y).sum())
        .collect();
    let eight_v: Vec<i64> = v.iter().map(|x| 8 * x).collect();
    checks.push(check(
        "perron: A·v = 8·v",
        format!("{eight_v:?}"),
        format!("{av:?}"),
        av == eight_v,
    ));
    let d = symmetric_eig(g.adjacency())?;
    let top = d.eigenvectors.column(0);
    let ratio_err = (0..6)
        .map(|i| (top[i] / top[0] - v[i] as f64).abs())
        .fold(0.0, f64::max);
    checks.push(check(
        "perron: dominant eigenvalue",
        8,
        format!("{:.12}", d.eigenvalues[0]),
        (d.eigenvalues[0] - 8.0).abs() < 1e-9 && ratio_err < 1e-9,
    ));
    let perron = perron_partition(&g, DEFAULT_PERRON_TOLERANCE)?;
    checks.push(check(
        "perron: perron_partition classes",
        2,
        perron.k(),
        perron.k() == 2,
    ));
    let wl = wl_refine(&g, &Partition::uniform(6))?;
    checks.push(check("perron: wl_refine classes", 6, wl.k(), wl.k() == 6));
    let brute = brute_force_cep(&g)?;
    checks.push(check(
        "perron: brute-force cEP classes",
        6,
        brute.k(),
        brute == wl,
    ));
    checks.push(check(
        "perron: cEP refines perron partition",
        true,
        wl.refines(&perron),
        wl.refines(&perron),
    ));

    let g = singular_counterexample();
    let det = integer_determinant(&integer_matrix(&g));
    checks.push(check("singular: det(A)", 0, det, det == 0));
    let cep = brute_force_cep(&g)?;
    let wl = wl_refine(&g, &Partition::uniform(4))?;
    checks.push(check(
        "singular: cEP classes",
        4,
        cep.k(),
        cep.k() == 4 && wl == cep,
    ));
    let d = symmetric_eig(g.adjacency())?;
    let structural = structural_eigvec_indices(&d, &cep, 1e-9)?;
    let zero = structural
        .iter()
        .copied()
        .find(|&i| d.eigenvalues[i].abs() < 1e-9);
    checks.push(check(
        "singular: zero eigenspace meets span(H)",
        "a structural eigenvalue 0",
        match zero {
            Some(i) => format!("eigenvalue {:.3e} at index {i}", d.eigenvalues[i]),
            None => "none".to_string(),
        },
        zero.is_some(),
    ));

    Ok(FixtureReport { checks })
}
