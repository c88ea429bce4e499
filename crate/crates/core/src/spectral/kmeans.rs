use rand::Rng as _;

use crate::graph::Partition;
use crate::seed::{self, Rng};
use crate::{Error, Matrix, Result};

const MAX_LLOYD_ITERATIONS: usize = 300;

/// Row-major copy of the rows of `m`.
pub(crate) fn rows_of(m: &Matrix) -> Vec<f64> {
    let (n, d) = m.shape();
    let mut out = Vec::with_capacity(n * d);
    for i in 0..n {
        out.extend(m.row(i).iter());
    }
    out
}

#[derive(Debug, Clone)]
pub(crate) struct Clustering {
    pub labels: Vec<usize>,
    pub cost: f64,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn seed_centroids(data: &[f64], n: usize, d: usize, k: usize, rng: &mut Rng) -> Vec<f64> {
    let mut centroids = Vec::with_capacity(k * d);
    let mut chosen = vec![false; n];
    let first = rng.random_range(0..n);
    chosen[first] = true;
    centroids.extend_from_slice(&data[first * d..(first + 1) * d]);
    let mut nearest: Vec<f64> = (0..n)
        .map(|i| sq_dist(&data[i * d..(i + 1) * d], &centroids[..d]))
        .collect();
    while centroids.len() < k * d {
        let total: f64 = nearest.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &w) in nearest.iter().enumerate() {
                if target < w {
                    pick = i;
                    break;
                }
                target -= w;
            }
            pick
        } else {
            let free: Vec<usize> = (0..n).filter(|&i| !chosen[i]).collect();
            free[rng.random_range(0..free.len())]
        };
        chosen[pick] = true;
        let start = centroids.len();
        centroids.extend_from_slice(&data[pick * d..(pick + 1) * d]);
        for i in 0..n {
            let dist = sq_dist(&data[i * d..(i + 1) * d], &centroids[start..start + d]);
            if dist < nearest[i] {
                nearest[i] = dist;
            }
        }
    }
    centroids
}

/// One k-means++ seeded run of Lloyd's algorithm. Every label in `0..k` is
/// used: an emptied cluster takes over the point farthest from its centroid
/// (among clusters with more than one point).
pub(crate) fn lloyd(data: &[f64], n: usize, d: usize, k: usize, rng: &mut Rng) -> Clustering {
    let mut centroids = seed_centroids(data, n, d, k, rng);
    let mut labels = vec![usize::MAX; n];
    for _ in 0..MAX_LLOYD_ITERATIONS {
        let mut changed = false;
        let mut dist = vec![0.0; n];
        for i in 0..n {
            let point = &data[i * d..(i + 1) * d];
            let (mut best, mut best_dist) = (0, f64::INFINITY);
            for c in 0..k {
                let dd = sq_dist(point, &centroids[c * d..(c + 1) * d]);
                if dd < best_dist {
                    best = c;
                    best_dist = dd;
                }
            }
            dist[i] = best_dist;
            if labels[i] != best {
                labels[i] = best;
                changed = true;
            }
        }
        changed |= fill_empty(&mut labels, &mut dist, k);
        if !changed {
            break;
        }
        centroids = means(data, d, &labels, k);
    }
    let cost = within_cost(data, d, &labels, k);
    Clustering { labels, cost }
}

fn fill_empty(labels: &mut [usize], dist: &mut [f64], k: usize) -> bool {
    let mut changed = false;
    loop {
        let mut counts = vec![0usize; k];
        for &l in labels.iter() {
            counts[l] += 1;
        }
        let Some(empty) = counts.iter().position(|&c| c == 0) else {
            return changed;
        };
        let mut far = None;
        for i in 0..labels.len() {
            if counts[labels[i]] > 1 && far.is_none_or(|f: usize| dist[i] > dist[f]) {
                far = Some(i);
            }
        }
        let Some(i) = far else {
            return changed;
        };
        labels[i] = empty;
        dist[i] = 0.0;
        changed = true;
    }
}

/// Class means, accumulated as offsets from each class's first point so that
/// classes of identical points get exactly that point.
fn means(data: &[f64], d: usize, labels: &[usize], k: usize) -> Vec<f64> {
    let mut first = vec![usize::MAX; k];
    let mut sums = vec![0.0; k * d];
    let mut counts = vec![0usize; k];
    for (i, &l) in labels.iter().enumerate() {
        if first[l] == usize::MAX {
            first[l] = i;
        }
        counts[l] += 1;
        let f = first[l];
        for j in 0..d {
            sums[l * d + j] += data[i * d + j] - data[f * d + j];
        }
    }
    for c in 0..k {
        if counts[c] > 0 {
            let f = first[c];
            for j in 0..d {
                sums[c * d + j] = data[f * d + j] + sums[c * d + j] / counts[c] as f64;
            }
        }
    }
    sums
}

pub(crate) fn within_cost(data: &[f64], d: usize, labels: &[usize], k: usize) -> f64 {
    let centroids = means(data, d, labels, k);
    labels
        .iter()
        .enumerate()
        .map(|(i, &l)| sq_dist(&data[i * d..(i + 1) * d], &centroids[l * d..(l + 1) * d]))
        .sum()
}

/// Best of `restarts` k-means++/Lloyd runs by within-class sum of squares.
/// Restart `r` draws from substream `r` of `seed`; ties keep the earliest.
pub fn kmeans(rows: &Matrix, k: usize, restarts: usize, seed: u64) -> Result<Partition> {
    let n = rows.nrows();
    if k == 0 || k > n {
        return Err(Error::InvalidConfig(format!("k = {k} must lie in 1..={n}")));
    }
    if restarts == 0 {
        return Err(Error::InvalidConfig("restarts must be at least 1".into()));
    }
    let data = rows_of(rows);
    let d = rows.ncols();
    let best = (0..restarts)
        .map(|r| lloyd(&data, n, d, k, &mut seed::substream(seed, r as u64)))
        .reduce(|best, next| if next.cost < best.cost { next } else { best })
        .expect("at least one restart");
    Ok(Partition::from_labels(&best.labels))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::f_cost;

    #[test]
    fn recovers_exact_blocks() {
        let rows = Matrix::from_row_slice(6, 2, &[0., 0., 5., 5., 0., 0., 9., 1., 5., 5., 9., 1.]);
        let p = kmeans(&rows, 3, 5, 1).unwrap();
        assert_eq!(p.assignment(), &[0, 1, 0, 2, 1, 2]);
        assert_eq!(f_cost(&p, &rows).unwrap(), 0.0);
    }

    #[test]
    fn one_and_n_clusters() {
        let rows = Matrix::from_row_slice(4, 1, &[0., 1., 2., 3.]);
        let one = kmeans(&rows, 1, 3, 0).unwrap();
        assert_eq!(one.k(), 1);
        assert!((f_cost(&one, &rows).unwrap() - 5.0).abs() < 1e-12);
        let all = kmeans(&rows, 4, 3, 0).unwrap();
        assert_eq!(all, Partition::singletons(4));
    }

    #[test]
    fn duplicate_points_still_fill_k_clusters() {
        let rows = Matrix::from_row_slice(4, 1, &[1., 1., 1., 2.]);
        let p = kmeans(&rows, 3, 2, 4).unwrap();
        assert_eq!(p.k(), 3);
    }

    #[test]
    fn seeded_runs_repeat() {
        let rows = Matrix::from_fn(40, 3, |i, j| ((i * 7 + j * 3) % 11) as f64);
        assert_eq!(
            kmeans(&rows, 4, 3, 9).unwrap(),
            kmeans(&rows, 4, 3, 9).unwrap()
        );
    }

    #[test]
    fn argument_errors() {
        let rows = Matrix::zeros(3, 1);
        assert!(kmeans(&rows, 0, 1, 0).is_err());
        assert!(kmeans(&rows, 4, 1, 0).is_err());
        assert!(kmeans(&rows, 2, 0, 0).is_err());
    }
}
