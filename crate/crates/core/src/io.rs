//! File formats: graphs (JSON and text edge lists), partitions, sample sets
//! (binary and CSV), dense matrices (CSV) and eigendecompositions (JSON).

use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config_model::{GenConfig, PlantedSpec};
use crate::signal::{FilterSpec, SampleSet};
use crate::spectral::EigenDecomposition;
use crate::{Error, Graph, Matrix, Partition, Result};

const SAMPLE_MAGIC: &[u8; 8] = b"BEPSAMP1";

#[derive(Serialize, Deserialize)]
struct GraphFile {
    n: usize,
    edges: Vec<(usize, usize, f64)>,
}

pub fn graph_to_json(g: &Graph) -> String {
    serde_json::to_string(&GraphFile {
        n: g.n(),
        edges: g.edges(),
    })
    .expect("graph serialises")
}

pub fn graph_from_json(text: &str) -> Result<Graph> {
    let file: GraphFile = serde_json::from_str(text)?;
    Graph::from_edge_list(file.n, &file.edges)
}

/// `n=<int>` header, then one `u v w` line per edge.
pub fn graph_to_text(g: &Graph) -> String {
    let mut out = format!("n={}\n", g.n());
    for (u, v, w) in g.edges() {
        writeln!(out, "{u} {v} {w}").expect("writing to a string");
    }
    out
}

/// Blank lines and lines starting with `#` are skipped. A missing weight
/// column means weight 1.
pub fn graph_from_text(text: &str) -> Result<Graph> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::Format("empty graph file".into()))?;
    let n = header
        .strip_prefix("n=")
        .and_then(|v| v.trim().parse::<usize>().ok())
        .ok_or_else(|| Error::Format(format!("expected header n=<int>, found {header:?}")))?;
    let mut edges = Vec::new();
    for (line, l) in lines {
        let fields: Vec<&str> = l.split_whitespace().collect();
        let bad = || Error::Format(format!("line {line}: expected `u v w`, found {l:?}"));
        if fields.len() < 2 || fields.len() > 3 {
            return Err(bad());
        }
        let u = fields[0].parse().map_err(|_| bad())?;
        let v = fields[1].parse().map_err(|_| bad())?;
        let w = match fields.get(2) {
            Some(w) => w.parse().map_err(|_| bad())?,
            None => 1.0,
        };
        edges.push((u, v, w));
    }
    Graph::from_edge_list(n, &edges)
}

/// Reads either format, chosen by the `.json` extension.
pub fn load_graph(path: &Path) -> Result<Graph> {
    let text = std::fs::read_to_string(path)?;
    if path.extension().is_some_and(|e| e == "json") {
        graph_from_json(&text)
    } else {
        graph_from_text(&text)
    }
}

pub fn partition_to_json(p: &Partition) -> String {
    serde_json::to_string(p).expect("partition serialises")
}

pub fn partition_from_json(text: &str) -> Result<Partition> {
    Ok(serde_json::from_str(text)?)
}

/// Provenance written next to a generated graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphSidecar {
    pub spec: PlantedSpec,
    pub seed: u64,
    pub generator: GenConfig,
    pub planted: Partition,
}

/// Header (magic, `n`, `s`, seed, α, filter degree, coefficients) followed by
/// the samples in column-major order; all fields little-endian.
pub fn write_samples<W: Write>(ss: &SampleSet, mut w: W) -> Result<()> {
    w.write_all(SAMPLE_MAGIC)?;
    w.write_all(&(ss.n() as u64).to_le_bytes())?;
    w.write_all(&(ss.s() as u64).to_le_bytes())?;
    w.write_all(&ss.seed.to_le_bytes())?;
    w.write_all(&ss.alpha.to_le_bytes())?;
    w.write_all(&(ss.filter.degree() as u64).to_le_bytes())?;
    for h in ss.filter.coefficients() {
        w.write_all(&h.to_le_bytes())?;
    }
    for x in ss.samples.as_slice() {
        w.write_all(&x.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    read_u64(r).map(f64::from_bits)
}

pub fn read_samples<R: Read>(mut r: R) -> Result<SampleSet> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != SAMPLE_MAGIC {
        return Err(Error::Format("not a sample file".into()));
    }
    let (n, s) = (read_u64(&mut r)?, read_u64(&mut r)?);
    let seed = read_u64(&mut r)?;
    let alpha = read_f64(&mut r)?;
    let degree = read_u64(&mut r)?;
    let bytes = n.checked_mul(s).and_then(|len| len.checked_mul(8));
    if degree > 1 << 16 || bytes.is_none_or(|b| b > 1 << 37 || usize::try_from(b).is_err()) {
        return Err(Error::Format("implausible sample file header".into()));
    }
    let (n, s, degree) = (n as usize, s as usize, degree as usize);
    let coefficients = (0..=degree)
        .map(|_| read_f64(&mut r))
        .collect::<Result<Vec<_>>>()?;
    let filter = FilterSpec::new(coefficients)?;
    let mut data = vec![0u8; n * s * 8];
    r.read_exact(&mut data)?;
    let values = data
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    Ok(SampleSet {
        samples: Matrix::from_vec(n, s, values),
        seed,
        alpha,
        filter,
    })
}

fn float(x: f64) -> String {
    format!("{x:.16e}")
}

/// One sample per line, `n` comma-separated values.
pub fn samples_to_csv(ss: &SampleSet) -> String {
    let mut out = String::new();
    for col in ss.samples.column_iter() {
        let line: Vec<String> = col.iter().map(|&x| float(x)).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

/// Row-per-line CSV of a dense matrix.
pub fn matrix_to_csv(m: &Matrix) -> String {
    let mut out = String::new();
    for row in m.row_iter() {
        let line: Vec<String> = row.iter().map(|&x| float(x)).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

pub fn matrix_from_csv(text: &str) -> Result<Matrix> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|f| {
                f.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Format(format!("line {}: bad number {f:?}", i + 1)))
            })
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::Format(format!("line {}: ragged row", i + 1)));
            }
        }
        rows.push(row);
    }
    let cols = rows.first().map_or(0, Vec::len);
    Ok(Matrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

/// `{"eigenvalues": [...], "eigenvectors": [[row], ...]}` with 17
/// significant digits, enough to round-trip every value exactly.
pub fn eigen_to_json(d: &EigenDecomposition) -> String {
    let values: Vec<String> = d.eigenvalues.iter().map(|&x| float(x)).collect();
    let rows: Vec<String> = d
        .eigenvectors
        .row_iter()
        .map(|r| {
            format!(
                "[{}]",
                r.iter().map(|&x| float(x)).collect::<Vec<_>>().join(",")
            )
        })
        .collect();
    format!(
        "{{\"eigenvalues\":[{}],\"eigenvectors\":[{}]}}",
        values.join(","),
        rows.join(",")
    )
}

pub fn eigen_from_json(text: &str) -> Result<EigenDecomposition> {
    #[derive(Deserialize)]
    struct Raw {
        eigenvalues: Vec<f64>,
        eigenvectors: Vec<Vec<f64>>,
    }
    let raw: Raw = serde_json::from_str(text)?;
    let n = raw.eigenvalues.len();
    if raw.eigenvectors.len() != n || raw.eigenvectors.iter().any(|r| r.len() != n) {
        return Err(Error::Format(format!("eigenvector matrix must be {n}×{n}")));
    }
    Ok(EigenDecomposition {
        eigenvalues: raw.eigenvalues,
        eigenvectors: Matrix::from_fn(n, n, |i, j| raw.eigenvectors[i][j]),
    })
}
