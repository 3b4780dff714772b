//! Width-expanded message passing for graph classification.
//!
//! Standard message passing squeezes an exponentially growing receptive
//! field into fixed-width node vectors, which starves long-range signal
//! ("over-squashing"). This crate implements an alternative to graph
//! rewiring: the top-k nodes by a centrality measure keep a wider hidden
//! state, and messages crossing the width boundary go through learned
//! adapters (a linear up-projection and a score-based dimension selector).
//!
//! The crate is organised as:
//!
//! - [`graph`]: immutable CSR graphs, BFS, degrees, shift matrices
//! - [`data`]: JSONL datasets, feature matrices, deterministic splits
//! - [`centrality`]: degree / betweenness / closeness / PageRank / load
//!   centrality and the top-k expansion mask
//! - [`autodiff`]: a dense f64 tape engine with reverse-mode gradients
//! - [`model`]: GCN / GIN backbones and their width-expanded variants
//! - [`diagnostics`]: effective resistance, Dirichlet energy, Jacobian
//!   sensitivity and signal-propagation instruments
//! - [`train`]: training loop, trial aggregation and grid search
//! - [`synth`]: synthetic bottleneck benchmarks (barbell, tree, ring)

pub mod autodiff;
pub mod centrality;
pub mod data;
pub mod graph;
