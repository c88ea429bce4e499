//! Locally coloured configuration model: simple graphs in which every node of
//! class `i` has exactly `D[i][j]` neighbours in class `j`.

use std::collections::{HashMap, HashSet};

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::graph::Partition;
use crate::seed::{self, Rng};
use crate::{Error, Graph, Matrix, Result};

const MAX_REPAIR_SWAPS: usize = 100;
const MAX_QUOTIENT_DRAWS: usize = 100_000;

/// Class sizes and the quotient degree matrix `D`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawSpec", into = "RawSpec")]
pub struct PlantedSpec {
    sizes: Vec<usize>,
    degrees: Vec<Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
struct RawSpec {
    sizes: Vec<usize>,
    #[serde(rename = "D")]
    d: Vec<Vec<usize>>,
}

impl TryFrom<RawSpec> for PlantedSpec {
    type Error = Error;

    fn try_from(raw: RawSpec) -> Result<Self> {
        PlantedSpec::new(raw.sizes, raw.d)
    }
}

impl From<PlantedSpec> for RawSpec {
    fn from(s: PlantedSpec) -> Self {
        RawSpec {
            sizes: s.sizes,
            d: s.degrees,
        }
    }
}

impl PlantedSpec {
    pub fn new(sizes: Vec<usize>, degrees: Vec<Vec<usize>>) -> Result<Self> {
        let spec = Self { sizes, degrees };
        spec.check()?;
        Ok(spec)
    }

    fn check(&self) -> Result<()> {
        let k = self.sizes.len();
        if k == 0 {
            return Err(Error::InvalidSpec("at least one class is required".into()));
        }
        if self.sizes.contains(&0) {
            return Err(Error::InvalidSpec("class sizes must be positive".into()));
        }
        if self.degrees.len() != k || self.degrees.iter().any(|r| r.len() != k) {
            return Err(Error::InvalidSpec(format!("D must be {k}×{k}")));
        }
        let (s, d) = (&self.sizes, &self.degrees);
        for i in 0..k {
            if s[i] * d[i][i] % 2 != 0 {
                return Err(Error::InvalidSpec(format!(
                    "class {i}: size {} times within-class degree {} is odd",
                    s[i], d[i][i]
                )));
            }
            if d[i][i] + 1 > s[i] {
                return Err(Error::InvalidSpec(format!(
                    "class {i}: within-class degree {} needs more than {} nodes",
                    d[i][i], s[i]
                )));
            }
            for j in 0..k {
                if i == j {
                    continue;
                }
                if s[i] * d[i][j] != s[j] * d[j][i] {
                    return Err(Error::InvalidSpec(format!(
                        "classes {i},{j}: {}·{} ≠ {}·{}",
                        s[i], d[i][j], s[j], d[j][i]
                    )));
                }
                if d[i][j] > s[j] {
                    return Err(Error::InvalidSpec(format!(
                        "class {i} needs {} neighbours in class {j} of size {}",
                        d[i][j], s[j]
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn k(&self) -> usize {
        self.sizes.len()
    }

    pub fn n(&self) -> usize {
        self.sizes.iter().sum()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn degrees(&self) -> &[Vec<usize>] {
        &self.degrees
    }

    /// `D` as a real matrix; this is the quotient `A^π` of any sampled graph.
    pub fn quotient_matrix(&self) -> Matrix {
        let k = self.k();
        Matrix::from_fn(k, k, |i, j| self.degrees[i][j] as f64)
    }

    fn has_identical_rows(&self) -> bool {
        let k = self.k();
        (0..k).any(|i| (i + 1..k).any(|j| self.degrees[i] == self.degrees[j]))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenConfig {
    /// Attempts per block before a global restart.
    pub max_retries: usize,
    pub global_restarts: usize,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            max_retries: 50,
            global_restarts: 5,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_retries == 0 || self.global_restarts == 0 {
            return Err(Error::InvalidConfig(
                "max_retries and global_restarts must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Random symmetric `D` with entries uniform on `0..=max_deg`, redrawn until
/// it is a valid [`PlantedSpec`] for `sizes` with pairwise distinct rows.
pub fn sample_quotient_degrees(
    k: usize,
    max_deg: usize,
    sizes: &[usize],
    seed: u64,
) -> Result<PlantedSpec> {
    if k == 0 || sizes.len() != k {
        return Err(Error::InvalidSpec(format!(
            "{} sizes given for k = {k}",
            sizes.len()
        )));
    }
    let mut rng = seed::rng(seed);
    for _ in 0..MAX_QUOTIENT_DRAWS {
        let mut d = vec![vec![0usize; k]; k];
        for i in 0..k {
            for j in i..k {
                let v = rng.random_range(0..=max_deg);
                d[i][j] = v;
                d[j][i] = v;
            }
        }
        if let Ok(spec) = PlantedSpec::new(sizes.to_vec(), d) {
            if !spec.has_identical_rows() {
                return Ok(spec);
            }
        }
    }
    Err(Error::GeneratorExhausted(format!(
        "no valid quotient after {MAX_QUOTIENT_DRAWS} draws"
    )))
}

/// Edge list of one block with local endpoints; `bipartite` blocks have left
/// ids in `0..a` and right ids in `0..b`.
struct Block {
    edges: Vec<(usize, usize)>,
}

fn key(u: usize, v: usize, bipartite: bool) -> (usize, usize) {
    if bipartite || u <= v {
        (u, v)
    } else {
        (v, u)
    }
}

/// Degree-preserving double-edge swaps that remove loops and repeated pairs.
fn repair(edges: &mut [(usize, usize)], bipartite: bool, rng: &mut Rng) -> bool {
    let mut counts: HashMap<(usize, usize), usize> = HashMap::new();
    for &(u, v) in edges.iter() {
        *counts.entry(key(u, v, bipartite)).or_default() += 1;
    }
    let is_bad = |counts: &HashMap<(usize, usize), usize>, (u, v): (usize, usize)| {
        (!bipartite && u == v) || counts[&key(u, v, bipartite)] > 1
    };
    let m = edges.len();
    for _ in 0..MAX_REPAIR_SWAPS {
        let Some(bad) = (0..m).find(|&e| is_bad(&counts, edges[e])) else {
            return true;
        };
        if m < 2 {
            return false;
        }
        let other = loop {
            let o = rng.random_range(0..m);
            if o != bad {
                break o;
            }
        };
        let (u, v) = edges[bad];
        let (mut x, mut y) = edges[other];
        if !bipartite && rng.random::<bool>() {
            std::mem::swap(&mut x, &mut y);
        }
        let (e1, e2) = ((u, y), (x, v));
        if !bipartite && (e1.0 == e1.1 || e2.0 == e2.1) {
            continue;
        }
        let (k1, k2) = (key(e1.0, e1.1, bipartite), key(e2.0, e2.1, bipartite));
        if k1 == k2
            || counts.get(&k1).copied().unwrap_or(0) > 0
            || counts.get(&k2).copied().unwrap_or(0) > 0
        {
            continue;
        }
        for old in [edges[bad], edges[other]] {
            *counts
                .get_mut(&key(old.0, old.1, bipartite))
                .expect("counted") -= 1;
        }
        *counts.entry(k1).or_default() += 1;
        *counts.entry(k2).or_default() += 1;
        edges[bad] = e1;
        edges[other] = e2;
    }
    (0..m).all(|e| !is_bad(&counts, edges[e]))
}

/// Shuffle-and-match of `a` nodes with `p` stubs against `b` nodes with `q`
/// stubs (`a·p = b·q`).
fn bipartite_block(a: usize, b: usize, p: usize, q: usize, rng: &mut Rng) -> Option<Block> {
    if 2 * p > b {
        let inverse = bipartite_block(a, b, b - p, a - q, rng)?;
        let present: HashSet<_> = inverse.edges.into_iter().collect();
        let edges = (0..a)
            .flat_map(|u| (0..b).map(move |v| (u, v)))
            .filter(|e| !present.contains(e))
            .collect();
        return Some(Block { edges });
    }
    let left: Vec<usize> = (0..a).flat_map(|u| std::iter::repeat_n(u, p)).collect();
    let mut right: Vec<usize> = (0..b).flat_map(|v| std::iter::repeat_n(v, q)).collect();
    right.shuffle(rng);
    let mut edges: Vec<_> = left.into_iter().zip(right).collect();
    repair(&mut edges, true, rng).then_some(Block { edges })
}

/// Shuffle-and-match for a `d`-regular simple graph on `a` nodes.
fn regular_block(a: usize, d: usize, rng: &mut Rng) -> Option<Block> {
    if 2 * d > a - 1 {
        let inverse = regular_block(a, a - 1 - d, rng)?;
        let present: HashSet<_> = inverse
            .edges
            .into_iter()
            .map(|(u, v)| key(u, v, false))
            .collect();
        let edges = (0..a)
            .flat_map(|u| (u + 1..a).map(move |v| (u, v)))
            .filter(|e| !present.contains(e))
            .collect();
        return Some(Block { edges });
    }
    let mut stubs: Vec<usize> = (0..a).flat_map(|u| std::iter::repeat_n(u, d)).collect();
    stubs.shuffle(rng);
    let mut edges: Vec<_> = stubs.chunks_exact(2).map(|c| (c[0], c[1])).collect();
    repair(&mut edges, false, rng).then_some(Block { edges })
}

/// Samples a simple graph whose planted partition is exactly equitable with
/// quotient `D`. Node labels are shuffled, so classes are not contiguous.
pub fn sample_graph(spec: &PlantedSpec, cfg: &GenConfig, seed: u64) -> Result<(Graph, Partition)> {
    let (g, labels) = sample_labeled(spec, cfg, seed)?;
    Ok((g, Partition::from_labels(&labels)))
}

/// As [`sample_graph`], with each node labelled by its row of `D`.
pub fn sample_labeled(
    spec: &PlantedSpec,
    cfg: &GenConfig,
    seed: u64,
) -> Result<(Graph, Vec<usize>)> {
    spec.check()?;
    cfg.validate()?;
    let k = spec.k();
    let n = spec.n();
    let mut rng = seed::rng(seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut members: Vec<Vec<usize>> = Vec::with_capacity(k);
    let mut next = 0;
    for &size in &spec.sizes {
        members.push(order[next..next + size].to_vec());
        next += size;
    }
    'restart: for restart in 0..cfg.global_restarts {
        let mut adjacency = Matrix::zeros(n, n);
        for i in 0..k {
            for j in i..k {
                let d = spec.degrees[i][j];
                if d == 0 {
                    continue;
                }
                let mut block_rng =
                    seed::rng(seed::derive(seed, &[restart as u64, i as u64, j as u64]));
                let block = (0..cfg.max_retries).find_map(|_| {
                    if i == j {
                        regular_block(spec.sizes[i], d, &mut block_rng)
                    } else {
                        bipartite_block(
                            spec.sizes[i],
                            spec.sizes[j],
                            d,
                            spec.degrees[j][i],
                            &mut block_rng,
                        )
                    }
                });
                let Some(block) = block else {
                    log::debug!("block ({i},{j}) failed after {} attempts", cfg.max_retries);
                    continue 'restart;
                };
                for (u, v) in block.edges {
                    let (gu, gv) = (members[i][u], members[j][v]);
                    adjacency[(gu, gv)] = 1.0;
                    adjacency[(gv, gu)] = 1.0;
                }
            }
        }
        let labels: Vec<usize> = {
            let mut l = vec![0; n];
            for (c, m) in members.iter().enumerate() {
                for &v in m {
                    l[v] = c;
                }
            }
            l
        };
        return Ok((Graph::from_adjacency(adjacency)?, labels));
    }
    Err(Error::GeneratorExhausted(format!(
        "{} global restarts of {} block attempts each",
        cfg.global_restarts, cfg.max_retries
    )))
}
