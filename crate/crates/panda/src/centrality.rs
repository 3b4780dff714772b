//! Node centrality measures and the top-k expansion mask.
//!
//! Five measures are supported: degree, betweenness, closeness, PageRank
//! and load. Betweenness and load use the standard undirected conventions
//! (endpoints excluded, normalisation `1/((n-1)(n-2))` over directed
//! pair-dependencies); only the induced ranking feeds the mask, so any
//! positive rescaling would select the same nodes.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::Graph;

pub const PAGERANK_DAMPING: f64 = 0.85;
pub const PAGERANK_TOL: f64 = 1e-9;
pub const PAGERANK_MAX_ITER: usize = 1000;

#[derive(Debug, Error)]
pub enum CentralityError {
    #[error("degree centrality needs at least 2 nodes, got {n}")]
    GraphTooSmall { n: usize },
    #[error("pagerank did not converge after {max_iter} iterations (residual {residual:.3e})")]
    NoConvergence { max_iter: usize, residual: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CentralityKind {
    Degree,
    Betweenness,
    Closeness,
    Pagerank,
    Load,
}

impl CentralityKind {
    pub const ALL: [CentralityKind; 5] = [
        CentralityKind::Degree,
        CentralityKind::Betweenness,
        CentralityKind::Closeness,
        CentralityKind::Pagerank,
        CentralityKind::Load,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            CentralityKind::Degree => "degree",
            CentralityKind::Betweenness => "betweenness",
            CentralityKind::Closeness => "closeness",
            CentralityKind::Pagerank => "pagerank",
            CentralityKind::Load => "load",
        }
    }
}

impl std::str::FromStr for CentralityKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "degree" => Ok(CentralityKind::Degree),
            "betweenness" => Ok(CentralityKind::Betweenness),
            "closeness" => Ok(CentralityKind::Closeness),
            "pagerank" => Ok(CentralityKind::Pagerank),
            "load" => Ok(CentralityKind::Load),
            other => Err(format!("unknown centrality kind: {other}")),
        }
    }
}

/// Per-node centrality values (finite, non-negative).
#[derive(Debug, Clone)]
pub struct CentralityVector {
    pub kind: CentralityKind,
    pub values: Vec<f64>,
}

/// Compute a centrality with default parameters.
pub fn compute(graph: &Graph, kind: CentralityKind) -> Result<CentralityVector, CentralityError> {
    match kind {
        CentralityKind::Degree => degree_centrality(graph),
        CentralityKind::Betweenness => Ok(betweenness_centrality(graph)),
        CentralityKind::Closeness => Ok(closeness_centrality(graph)),
        CentralityKind::Pagerank => {
            pagerank_centrality(graph, PAGERANK_DAMPING, PAGERANK_TOL, PAGERANK_MAX_ITER)
        }
        CentralityKind::Load => Ok(load_centrality(graph)),
    }
}

/// Fraction of other nodes adjacent to each node: `degree / (n - 1)`.
pub fn degree_centrality(graph: &Graph) -> Result<CentralityVector, CentralityError> {
    let n = graph.num_nodes();
    if n < 2 {
        return Err(CentralityError::GraphTooSmall { n });
    }
    let values = graph.degrees(false).iter().map(|&d| d as f64 / (n - 1) as f64).collect();
    Ok(CentralityVector { kind: CentralityKind::Degree, values })
}

struct BfsDag {
    dist: Vec<i64>,
    sigma: Vec<f64>,
    preds: Vec<Vec<usize>>,
    /// Nodes in non-decreasing BFS distance (the visit order).
    order: Vec<usize>,
}

fn bfs_dag(graph: &Graph, source: usize) -> BfsDag {
    let n = graph.num_nodes();
    let mut dist = vec![-1i64; n];
    let mut sigma = vec![0.0; n];
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut order = Vec::with_capacity(n);
    dist[source] = 0;
    sigma[source] = 1.0;
    let mut queue = VecDeque::new();
    queue.push_back(source);
    while let Some(u) = queue.pop_front() {
        order.push(u);
        for &w in graph.neighbors(u) {
            if dist[w] < 0 {
                dist[w] = dist[u] + 1;
                queue.push_back(w);
            }
            if dist[w] == dist[u] + 1 {
                sigma[w] += sigma[u];
                preds[w].push(u);
            }
        }
    }
    BfsDag { dist, sigma, preds, order }
}

fn pair_norm(n: usize) -> f64 {
    // Directed pair-dependencies are accumulated (each unordered pair
    // contributes from both endpoints), so one factor of (n-1)(n-2)
    // yields the fraction-of-pairs convention.
    1.0 / (((n - 1) * (n - 2)) as f64)
}

/// Brandes betweenness, endpoints excluded, normalised for undirected
/// graphs (zero vector for `n <= 2`).
pub fn betweenness_centrality(graph: &Graph) -> CentralityVector {
    let n = graph.num_nodes();
    let mut values = vec![0.0; n];
    if n > 2 {
        for s in 0..n {
            let dag = bfs_dag(graph, s);
            let mut delta = vec![0.0; n];
            for &w in dag.order.iter().rev() {
                for &v in &dag.preds[w] {
                    delta[v] += (dag.sigma[v] / dag.sigma[w]) * (1.0 + delta[w]);
                }
                if w != s {
                    values[w] += delta[w];
                }
            }
        }
        let scale = pair_norm(n);
        for v in &mut values {
            *v *= scale;
        }
    }
    CentralityVector { kind: CentralityKind::Betweenness, values }
}

/// Component-scaled closeness: for a node with `r` reachable peers at
/// total distance `D`, the value is `(r / (n-1)) * (r / D)`. Isolated
/// nodes score zero.
pub fn closeness_centrality(graph: &Graph) -> CentralityVector {
    let n = graph.num_nodes();
    let mut values = vec![0.0; n];
    if n >= 2 {
        for v in 0..n {
            let dist = graph.shortest_path_lengths(v).expect("node in range");
            let mut reachable = 0usize;
            let mut total = 0usize;
            for (u, d) in dist.iter().enumerate() {
                if u == v {
                    continue;
                }
                if let Some(d) = d {
                    reachable += 1;
                    total += d;
                }
            }
            if reachable > 0 && total > 0 {
                let r = reachable as f64;
                values[v] = (r / (n - 1) as f64) * (r / total as f64);
            }
        }
    }
    CentralityVector { kind: CentralityKind::Closeness, values }
}

/// Power iteration with uniform teleport; dangling mass is redistributed
/// uniformly. Stops when the L1 change drops below `tol`.
pub fn pagerank_centrality(
    graph: &Graph,
    damping: f64,
    tol: f64,
    max_iter: usize,
) -> Result<CentralityVector, CentralityError> {
    let n = graph.num_nodes();
    if n == 0 {
        return Ok(CentralityVector { kind: CentralityKind::Pagerank, values: Vec::new() });
    }
    let deg = graph.degrees(false);
    let uniform = 1.0 / n as f64;
    let mut rank = vec![uniform; n];
    for _ in 0..max_iter {
        let dangling: f64 =
            (0..n).filter(|&v| deg[v] == 0).map(|v| rank[v]).sum::<f64>() * uniform;
        let mut next = vec![(1.0 - damping) * uniform + damping * dangling; n];
        for u in 0..n {
            if deg[u] > 0 {
                let share = damping * rank[u] / deg[u] as f64;
                for &v in graph.neighbors(u) {
                    next[v] += share;
                }
            }
        }
        let residual: f64 = rank.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        rank = next;
        if residual < tol {
            return Ok(CentralityVector { kind: CentralityKind::Pagerank, values: rank });
        }
    }
    let last = graph_pagerank_residual(graph, &rank, damping, &deg);
    Err(CentralityError::NoConvergence { max_iter, residual: last })
}

fn graph_pagerank_residual(graph: &Graph, rank: &[f64], damping: f64, deg: &[usize]) -> f64 {
    let n = graph.num_nodes();
    let uniform = 1.0 / n as f64;
    let dangling: f64 = (0..n).filter(|&v| deg[v] == 0).map(|v| rank[v]).sum::<f64>() * uniform;
    let mut next = vec![(1.0 - damping) * uniform + damping * dangling; n];
    for u in 0..n {
        if deg[u] > 0 {
            let share = damping * rank[u] / deg[u] as f64;
            for &v in graph.neighbors(u) {
                next[v] += share;
            }
        }
    }
    rank.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum()
}

/// Load centrality: a unit packet from every source reaches every target
/// and flows back along shortest-path DAGs, split equally among the
/// predecessors at each hop. Endpoints excluded, same normalisation as
/// betweenness.
pub fn load_centrality(graph: &Graph) -> CentralityVector {
    let n = graph.num_nodes();
    let mut values = vec![0.0; n];
    if n > 2 {
        for s in 0..n {
            let dag = bfs_dag(graph, s);
            let mut amount: Vec<f64> = dag.dist.iter().map(|&d| if d >= 0 { 1.0 } else { 0.0 }).collect();
            for &w in dag.order.iter().rev() {
                if dag.preds[w].is_empty() {
                    continue;
                }
                let share = amount[w] / dag.preds[w].len() as f64;
                for &v in &dag.preds[w] {
                    if v != s {
                        amount[v] += share;
                    }
                }
            }
            for v in 0..n {
                if v != s && dag.dist[v] >= 0 {
                    values[v] += amount[v] - 1.0;
                }
            }
        }
        let scale = pair_norm(n);
        for v in &mut values {
            *v *= scale;
        }
    }
    CentralityVector { kind: CentralityKind::Load, values }
}

/// Which nodes get the expanded width.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpansionMask {
    pub bits: Vec<bool>,
    pub k: usize,
    /// Sorted ids of the expanded nodes; `len == min(k, n)`.
    pub expanded_ids: Vec<usize>,
}

impl ExpansionMask {
    pub fn num_nodes(&self) -> usize {
        self.bits.len()
    }

    pub fn all_low(n: usize) -> Self {
        ExpansionMask { bits: vec![false; n], k: 0, expanded_ids: Vec::new() }
    }
}

/// Select the `k` nodes with the largest centrality; ties break toward
/// the lower node index. `k >= n` selects everything.
pub fn build_mask(c: &CentralityVector, k: usize) -> ExpansionMask {
    let n = c.values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        c.values[b].partial_cmp(&c.values[a]).expect("centrality values are finite").then(a.cmp(&b))
    });
    let take = k.min(n);
    let mut expanded_ids: Vec<usize> = order[..take].to_vec();
    expanded_ids.sort_unstable();
    let mut bits = vec![false; n];
    for &v in &expanded_ids {
        bits[v] = true;
    }
    ExpansionMask { bits, k, expanded_ids }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn path3() -> Graph {
        Graph::from_edges(3, &[(0, 1), (1, 2)]).unwrap()
    }

    fn star4() -> Graph {
        Graph::from_edges(4, &[(0, 1), (0, 2), (0, 3)]).unwrap()
    }

    fn complete4() -> Graph {
        Graph::from_edges(4, &[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]).unwrap()
    }

    #[test]
    fn degree_centrality_values() {
        let c = degree_centrality(&star4()).unwrap();
        assert_eq!(c.values[0], 1.0);
        for leaf in 1..4 {
            assert!((c.values[leaf] - 1.0 / 3.0).abs() < 1e-15);
        }
        let c = degree_centrality(&path3()).unwrap();
        assert_eq!(c.values, vec![0.5, 1.0, 0.5]);
        let c = degree_centrality(&complete4()).unwrap();
        assert!(c.values.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn degree_centrality_rejects_single_node() {
        let g = Graph::from_edges(1, &[]).unwrap();
        assert!(matches!(degree_centrality(&g), Err(CentralityError::GraphTooSmall { n: 1 })));
    }

    #[test]
    fn betweenness_path_inner_vertex_is_one() {
        let c = betweenness_centrality(&path3());
        assert!((c.values[1] - 1.0).abs() < 1e-12);
        assert_eq!(c.values[0], 0.0);
        assert_eq!(c.values[2], 0.0);
    }

    #[test]
    fn betweenness_complete_graph_is_zero() {
        let c = betweenness_centrality(&complete4());
        assert!(c.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn betweenness_barbell_bridge_endpoints_maximal() {
        // Two triangles joined by a bridge 2-3.
        let g = Graph::from_edges(
            6,
            &[(0, 1), (0, 2), (1, 2), (3, 4), (3, 5), (4, 5), (2, 3)],
        )
        .unwrap();
        let c = betweenness_centrality(&g);
        let max = c.values.iter().cloned().fold(f64::MIN, f64::max);
        assert!((c.values[2] - max).abs() < 1e-12);
        assert!((c.values[3] - max).abs() < 1e-12);
        assert!(c.values[0] < max && c.values[4] < max);
    }

    #[test]
    fn closeness_values_on_path() {
        let c = closeness_centrality(&path3());
        assert!((c.values[1] - 1.0).abs() < 1e-15);
        assert!((c.values[0] - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn closeness_isolated_node_is_zero() {
        let g = Graph::from_edges(3, &[(0, 1)]).unwrap();
        let c = closeness_centrality(&g);
        assert_eq!(c.values[2], 0.0);
        // Component scaling keeps the connected pair finite.
        assert!((c.values[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn pagerank_uniform_on_vertex_transitive_graph() {
        let c5 = Graph::from_edges(5, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 0)]).unwrap();
        let c = compute(&c5, CentralityKind::Pagerank).unwrap();
        for v in c.values {
            assert!((v - 0.2).abs() < 1e-9);
        }
    }

    #[test]
    fn pagerank_star_matches_analytic_fixed_point() {
        // Two-variable fixed point: c = 0.0375 + 2.55 l, l = 0.0375 + 0.85 c / 3,
        // solved by hand: c = 0.133125 / 0.2775.
        let expect_center = 0.133125 / 0.2775;
        let expect_leaf = (1.0 - expect_center) / 3.0;
        let c = compute(&star4(), CentralityKind::Pagerank).unwrap();
        assert!((c.values[0] - expect_center).abs() < 1e-7);
        assert!((c.values[1] - expect_leaf).abs() < 1e-7);
        assert!(c.values[0] > c.values[1]);
        let sum: f64 = c.values.iter().sum();
        assert!((sum - 1.0).abs() < 1e-9);
    }

    #[test]
    fn pagerank_single_node_is_one() {
        let g = Graph::from_edges(1, &[]).unwrap();
        let c = compute(&g, CentralityKind::Pagerank).unwrap();
        assert!((c.values[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn load_equals_betweenness_on_unique_path_graphs() {
        let b = betweenness_centrality(&path3());
        let l = load_centrality(&path3());
        assert_eq!(b.values, l.values);
        let l = load_centrality(&complete4());
        assert!(l.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn load_differs_from_betweenness_under_unequal_branching() {
        // Diamond (0-1-3, 0-2-3) plus a single-path branch 0-4-5, both
        // feeding node 6: preds of 6 carry unequal path counts, so the
        // equal packet split disagrees with the proportional dependency
        // split.
        let g = Graph::from_edges(
            7,
            &[(0, 1), (0, 2), (1, 3), (2, 3), (0, 4), (4, 5), (3, 6), (5, 6)],
        )
        .unwrap();
        let b = betweenness_centrality(&g);
        let l = load_centrality(&g);
        let differs = b.values.iter().zip(&l.values).any(|(x, y)| (x - y).abs() > 1e-9);
        assert!(differs, "betweenness {:?} vs load {:?}", b.values, l.values);
    }

    fn random_tree(n: usize, rng: &mut ChaCha8Rng) -> Graph {
        let edges: Vec<(usize, usize)> =
            (1..n).map(|v| (rng.random_range(0..v), v)).collect();
        Graph::from_edges(n, &edges).unwrap()
    }

    #[test]
    fn load_equals_betweenness_on_random_trees() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..40 {
            let n = rng.random_range(3..20);
            let g = random_tree(n, &mut rng);
            let b = betweenness_centrality(&g);
            let l = load_centrality(&g);
            for (x, y) in b.values.iter().zip(&l.values) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn centralities_are_permutation_equivariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10 {
            let n = rng.random_range(4..12);
            let mut edges = Vec::new();
            for u in 0..n {
                for v in (u + 1)..n {
                    if rng.random_range(0..100) < 35 {
                        edges.push((u, v));
                    }
                }
            }
            let g = Graph::from_edges(n, &edges).unwrap();
            let mut perm: Vec<usize> = (0..n).collect();
            use rand::seq::SliceRandom;
            perm.shuffle(&mut rng);
            let permuted_edges: Vec<(usize, usize)> =
                edges.iter().map(|&(u, v)| (perm[u], perm[v])).collect();
            let gp = Graph::from_edges(n, &permuted_edges).unwrap();
            for kind in [CentralityKind::Betweenness, CentralityKind::Closeness, CentralityKind::Load]
            {
                let a = compute(&g, kind).unwrap();
                let b = compute(&gp, kind).unwrap();
                for v in 0..n {
                    assert!(
                        (a.values[v] - b.values[perm[v]]).abs() < 1e-9,
                        "{kind:?} not equivariant"
                    );
                }
            }
        }
    }

    #[test]
    fn build_mask_selects_top_k_with_index_ties() {
        let c = CentralityVector { kind: CentralityKind::Degree, values: vec![0.3, 0.9, 0.3] };
        let m = build_mask(&c, 1);
        assert_eq!(m.bits, vec![false, true, false]);
        assert_eq!(m.expanded_ids, vec![1]);

        let c = CentralityVector { kind: CentralityKind::Degree, values: vec![0.5, 0.5, 0.1] };
        let m = build_mask(&c, 1);
        assert_eq!(m.bits, vec![true, false, false]);

        let m = build_mask(&c, 5);
        assert!(m.bits.iter().all(|&b| b));
        assert_eq!(m.expanded_ids.len(), 3);

        let m = build_mask(&c, 0);
        assert!(m.bits.iter().all(|&b| !b));
    }

    #[test]
    fn build_mask_is_scale_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let n = rng.random_range(2..15);
            let values: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
            let scaled: Vec<f64> = values.iter().map(|v| v * 37.5).collect();
            let k = rng.random_range(0..=n);
            let a = build_mask(
                &CentralityVector { kind: CentralityKind::Degree, values },
                k,
            );
            let b = build_mask(
                &CentralityVector { kind: CentralityKind::Degree, values: scaled },
                k,
            );
            assert_eq!(a.bits, b.bits);
        }
    }
}
