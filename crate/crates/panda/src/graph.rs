//! Immutable sparse graphs in CSR form.
//!
//! Graphs are undirected, simple (no duplicate edges, no self-loops) and
//! frozen after construction. Self-interaction is modelled by the layer
//! updates themselves (residual / epsilon terms), so self-loops are never
//! stored; normalisation re-introduces them where a degree convention
//! needs them.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("edge ({u}, {v}) out of range for a graph with {num_nodes} nodes")]
    EdgeOutOfRange { u: usize, v: usize, num_nodes: usize },
    #[error("node {node} out of range for a graph with {num_nodes} nodes")]
    NodeOutOfRange { node: usize, num_nodes: usize },
}

/// Undirected simple graph stored as CSR adjacency.
///
/// Invariants held after construction:
/// - neighbour lists are sorted ascending and duplicate-free,
/// - the adjacency is symmetric: `(u, v)` is stored iff `(v, u)` is,
/// - no self-loops.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    num_nodes: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
}

impl Graph {
    /// Build a graph from an undirected edge list.
    ///
    /// The input may contain duplicates, both orientations of the same
    /// edge, and self-loops; duplicates and self-loops are dropped and
    /// the result is symmetrised.
    pub fn from_edges(num_nodes: usize, edges: &[(usize, usize)]) -> Result<Self, GraphError> {
        let mut directed: Vec<(usize, usize)> = Vec::with_capacity(edges.len() * 2);
        for &(u, v) in edges {
            if u >= num_nodes || v >= num_nodes {
                return Err(GraphError::EdgeOutOfRange { u, v, num_nodes });
            }
            if u == v {
                continue;
            }
            directed.push((u, v));
            directed.push((v, u));
        }
        directed.sort_unstable();
        directed.dedup();

        let mut row_offsets = vec![0usize; num_nodes + 1];
        for &(u, _) in &directed {
            row_offsets[u + 1] += 1;
        }
        for i in 0..num_nodes {
            row_offsets[i + 1] += row_offsets[i];
        }
        let col_indices = directed.into_iter().map(|(_, v)| v).collect();

        Ok(Self { num_nodes, row_offsets, col_indices })
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    /// Number of undirected edges.
    pub fn num_edges(&self) -> usize {
        self.col_indices.len() / 2
    }

    /// Sorted neighbours of `v`.
    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.col_indices[self.row_offsets[v]..self.row_offsets[v + 1]]
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    /// Undirected edges as `(u, v)` pairs with `u < v`, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.num_edges());
        for u in 0..self.num_nodes {
            for &v in self.neighbors(u) {
                if u < v {
                    out.push((u, v));
                }
            }
        }
        out
    }

    /// All directed edges `(u, v)`: each undirected edge appears twice.
    pub fn directed_edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.num_nodes).flat_map(move |u| self.neighbors(u).iter().map(move |&v| (u, v)))
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.neighbors(u).binary_search(&v).is_ok()
    }

    /// Node degrees; with `with_self_loops` every entry is incremented by
    /// one (the `A + I` convention used by normalisation).
    pub fn degrees(&self, with_self_loops: bool) -> Vec<usize> {
        let extra = usize::from(with_self_loops);
        (0..self.num_nodes)
            .map(|v| self.row_offsets[v + 1] - self.row_offsets[v] + extra)
            .collect()
    }

    /// BFS hop distances from `source`; `None` marks unreachable nodes.
    pub fn shortest_path_lengths(&self, source: usize) -> Result<Vec<Option<usize>>, GraphError> {
        if source >= self.num_nodes {
            return Err(GraphError::NodeOutOfRange { node: source, num_nodes: self.num_nodes });
        }
        let mut dist = vec![None; self.num_nodes];
        dist[source] = Some(0);
        let mut queue = std::collections::VecDeque::new();
        queue.push_back(source);
        while let Some(u) = queue.pop_front() {
            let du = dist[u].expect("queued nodes have distances");
            for &w in self.neighbors(u) {
                if dist[w].is_none() {
                    dist[w] = Some(du + 1);
                    queue.push_back(w);
                }
            }
        }
        Ok(dist)
    }

    pub fn is_connected(&self) -> bool {
        if self.num_nodes == 0 {
            return true;
        }
        self.shortest_path_lengths(0)
            .expect("node 0 exists")
            .iter()
            .all(|d| d.is_some())
    }
}

/// Sparse shift matrix aligned with a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShiftKind {
    /// Plain adjacency: `S[u][v] = 1` iff `(u, v)` is an edge.
    Adjacency,
    /// `D^{-1/2} (A + I) D^{-1/2}` with degrees counted on `A + I`.
    /// Isolated nodes get degree 1 through the `+I` term, so the
    /// normalisation never divides by zero.
    SymNormalized,
}

/// CSR matrix over graph topology (plus the diagonal for the normalised
/// kind). Rows are sorted by column index.
#[derive(Debug, Clone)]
pub struct ShiftMatrix {
    kind: ShiftKind,
    num_nodes: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl ShiftMatrix {
    pub fn new(graph: &Graph, kind: ShiftKind) -> Self {
        let n = graph.num_nodes();
        let mut row_offsets = Vec::with_capacity(n + 1);
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        row_offsets.push(0);
        match kind {
            ShiftKind::Adjacency => {
                for u in 0..n {
                    for &v in graph.neighbors(u) {
                        col_indices.push(v);
                        values.push(1.0);
                    }
                    row_offsets.push(col_indices.len());
                }
            }
            ShiftKind::SymNormalized => {
                let deg = graph.degrees(true);
                for u in 0..n {
                    let mut placed_diag = false;
                    for &v in graph.neighbors(u) {
                        if !placed_diag && v > u {
                            col_indices.push(u);
                            values.push(1.0 / deg[u] as f64);
                            placed_diag = true;
                        }
                        col_indices.push(v);
                        values.push(1.0 / ((deg[u] as f64) * (deg[v] as f64)).sqrt());
                    }
                    if !placed_diag {
                        col_indices.push(u);
                        values.push(1.0 / deg[u] as f64);
                    }
                    row_offsets.push(col_indices.len());
                }
            }
        }
        Self { kind, num_nodes: n, row_offsets, col_indices, values }
    }

    pub fn kind(&self) -> ShiftKind {
        self.kind
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    /// `y = S x`.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.num_nodes, "matvec length mismatch");
        let mut y = vec![0.0; self.num_nodes];
        for u in 0..self.num_nodes {
            let mut acc = 0.0;
            for i in self.row_offsets[u]..self.row_offsets[u + 1] {
                acc += self.values[i] * x[self.col_indices[i]];
            }
            y[u] = acc;
        }
        y
    }

    /// `(S^ell)[v][u]` by repeated sparse application to the `u`-th basis
    /// vector. `ell = 0` gives the identity entry.
    pub fn power_entry(&self, ell: usize, v: usize, u: usize) -> f64 {
        let mut x = vec![0.0; self.num_nodes];
        x[u] = 1.0;
        for _ in 0..ell {
            x = self.matvec(&x);
        }
        x[v]
    }

    pub fn row_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.num_nodes];
        for u in 0..self.num_nodes {
            sums[u] = self.values[self.row_offsets[u]..self.row_offsets[u + 1]].iter().sum();
        }
        sums
    }

    pub fn entry(&self, u: usize, v: usize) -> f64 {
        for i in self.row_offsets[u]..self.row_offsets[u + 1] {
            if self.col_indices[i] == v {
                return self.values[i];
            }
        }
        0.0
    }
}
