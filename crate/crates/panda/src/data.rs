//! Dataset records, JSONL I/O and deterministic splits.
//!
//! A dataset is a JSON-lines file; each line holds one labelled graph:
//!
//! ```json
//! {"num_nodes": 2, "edges": [[0, 1]], "node_feat": [[1.0], [0.0]], "label": 0}
//! ```
//!
//! Graphs are symmetrised, de-duplicated and stripped of self-loops at
//! load time. Feature width must be uniform across the file.

use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{Graph, GraphError};

/// Train/val/test fractions used by [`split_dataset`].
pub const SPLIT_FRACTIONS: (f64, f64, f64) = (0.8, 0.1, 0.1);

/// Minimum dataset size accepted by [`split_dataset`].
pub const MIN_SPLIT_SAMPLES: usize = 10;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: malformed record: {source}")]
    Parse { line: usize, source: serde_json::Error },
    #[error("line {line}: {source}")]
    Graph { line: usize, source: GraphError },
    #[error("line {line}: feature width {found} differs from dataset width {expected}")]
    FeatureWidth { line: usize, expected: usize, found: usize },
    #[error("line {line}: {found} feature rows for {expected} nodes")]
    FeatureRows { line: usize, expected: usize, found: usize },
    #[error("line {line}: non-finite feature value")]
    NonFinite { line: usize },
    #[error("dataset has {n} samples, need at least {min} to split")]
    TooFewSamples { n: usize, min: usize },
}

/// Dense row-major node feature matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "feature matrix size mismatch");
        Self { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }
}

/// One labelled graph-classification record.
#[derive(Debug, Clone)]
pub struct GraphSample {
    pub graph: Graph,
    pub features: FeatureMatrix,
    pub label: usize,
}

/// An in-memory dataset with uniform feature width.
#[derive(Debug, Clone, Default)]
pub struct Dataset {
    pub samples: Vec<GraphSample>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn feature_width(&self) -> usize {
        self.samples.first().map_or(0, |s| s.features.cols())
    }

    /// `max(label) + 1`.
    pub fn num_classes(&self) -> usize {
        self.samples.iter().map(|s| s.label + 1).max().unwrap_or(0)
    }
}

#[derive(Serialize, Deserialize)]
struct RawSample {
    num_nodes: usize,
    edges: Vec<[usize; 2]>,
    node_feat: Vec<Vec<f64>>,
    label: usize,
}

/// Load a JSONL dataset. Graphs come back symmetrised, de-duplicated and
/// self-loop free; feature width must match across lines.
pub fn load_dataset(path: &Path) -> Result<Dataset, DataError> {
    let file = std::fs::File::open(path)?;
    let reader = std::io::BufReader::new(file);
    let mut samples = Vec::new();
    let mut width: Option<usize> = None;
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawSample =
            serde_json::from_str(&line).map_err(|source| DataError::Parse { line: line_no, source })?;
        samples.push(parse_sample(raw, line_no, &mut width)?);
    }
    Ok(Dataset { samples })
}

fn parse_sample(
    raw: RawSample,
    line: usize,
    width: &mut Option<usize>,
) -> Result<GraphSample, DataError> {
    let edges: Vec<(usize, usize)> = raw.edges.iter().map(|e| (e[0], e[1])).collect();
    let graph = Graph::from_edges(raw.num_nodes, &edges)
        .map_err(|source| DataError::Graph { line, source })?;
    if raw.node_feat.len() != raw.num_nodes {
        return Err(DataError::FeatureRows { line, expected: raw.num_nodes, found: raw.node_feat.len() });
    }
    let cols = raw.node_feat.first().map_or(0, |r| r.len());
    if let Some(w) = *width {
        if cols != w {
            return Err(DataError::FeatureWidth { line, expected: w, found: cols });
        }
    } else {
        *width = Some(cols);
    }
    let mut data = Vec::with_capacity(raw.num_nodes * cols);
    for row in &raw.node_feat {
        if row.len() != cols {
            return Err(DataError::FeatureWidth { line, expected: cols, found: row.len() });
        }
        for &v in row {
            if !v.is_finite() {
                return Err(DataError::NonFinite { line });
            }
            data.push(v);
        }
    }
    Ok(GraphSample { graph, features: FeatureMatrix::new(raw.num_nodes, cols, data), label: raw.label })
}

/// Write a dataset in canonical JSONL form (edges `u < v`, sorted).
pub fn save_dataset(path: &Path, dataset: &Dataset) -> Result<(), DataError> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for s in &dataset.samples {
        let raw = RawSample {
            num_nodes: s.graph.num_nodes(),
            edges: s.graph.edges().into_iter().map(|(u, v)| [u, v]).collect(),
            node_feat: (0..s.features.rows()).map(|r| s.features.row(r).to_vec()).collect(),
            label: s.label,
        };
        serde_json::to_writer(&mut out, &raw).map_err(std::io::Error::other)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Sample indices of one train/val/test split.
///
/// Test indices are read through an accessor that counts accesses, so
/// tests can assert the test set is consulted exactly once per trial.
#[derive(Debug)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    test: Vec<usize>,
    test_accesses: AtomicUsize,
}

impl SplitIndices {
    pub fn test(&self) -> &[usize] {
        self.test_accesses.fetch_add(1, Ordering::Relaxed);
        &self.test
    }

    pub fn test_access_count(&self) -> usize {
        self.test_accesses.load(Ordering::Relaxed)
    }
}

/// Deterministic 80/10/10 split. Val and test sizes are floored; the
/// remainder goes to train.
pub fn split_dataset(n_samples: usize, seed: u64) -> Result<SplitIndices, DataError> {
    if n_samples < MIN_SPLIT_SAMPLES {
        return Err(DataError::TooFewSamples { n: n_samples, min: MIN_SPLIT_SAMPLES });
    }
    let n_val = ((n_samples as f64) * SPLIT_FRACTIONS.1).floor() as usize;
    let n_test = ((n_samples as f64) * SPLIT_FRACTIONS.2).floor() as usize;
    let n_train = n_samples - n_val - n_test;

    let mut order: Vec<usize> = (0..n_samples).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);

    let train = order[..n_train].to_vec();
    let val = order[n_train..n_train + n_val].to_vec();
    let test = order[n_train + n_val..].to_vec();
    Ok(SplitIndices { train, val, test, test_accesses: AtomicUsize::new(0) })
}

/// Write a split manifest: three lines of space-separated sample indices
/// (train, val, test).
pub fn write_split_manifest(path: &Path, split: &SplitIndices) -> Result<(), DataError> {
    let fmt = |ix: &[usize]| ix.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(" ");
    let test_line = {
        // Direct field access: manifest writing is bookkeeping, not a
        // test-set consultation.
        fmt(&split.test)
    };
    let body = format!("{}\n{}\n{}\n", fmt(&split.train), fmt(&split.val), test_line);
    std::fs::write(path, body)?;
    Ok(())
}
