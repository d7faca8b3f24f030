//! Graph generators (Erdős–Rényi, Watts–Strogatz, Barabási–Albert, ring
//! lattice) and topology analytics: degree histogram, clustering
//! coefficient, average connected distance, diameter.
//!
//! All-pairs BFS is the expensive part of [`metrics`]; it fans out across
//! sources through [`crate::par`].

use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};
use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::NodeId;
use crate::par;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TopologyError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("graph has no nodes")]
    EmptyGraph,
    #[error("degenerate power-law fit: {0}")]
    DegenerateFit(String),
    #[error("k={k} is below m={m}")]
    DomainError { m: u32, k: u32 },
    #[error("invalid edge: {0}")]
    InvalidEdge(String),
    #[error("edge list line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

/// Undirected simple graph over a set of node ids.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TopologySnapshot {
    nodes: Vec<NodeId>,
    /// Normalized `(low, high)` pairs, sorted, no duplicates.
    edges: Vec<(NodeId, NodeId)>,
}

impl TopologySnapshot {
    pub fn new(
        nodes: impl IntoIterator<Item = NodeId>,
        edges: impl IntoIterator<Item = (NodeId, NodeId)>,
    ) -> Result<Self, TopologyError> {
        let node_set: BTreeSet<NodeId> = nodes.into_iter().collect();
        let mut edge_set = BTreeSet::new();
        for (a, b) in edges {
            if a == b {
                return Err(TopologyError::InvalidEdge(format!("self-loop at {a}")));
            }
            if !node_set.contains(&a) || !node_set.contains(&b) {
                return Err(TopologyError::InvalidEdge(format!("{a}-{b} references unknown node")));
            }
            edge_set.insert((a.min(b), a.max(b)));
        }
        Ok(Self { nodes: node_set.into_iter().collect(), edges: edge_set.into_iter().collect() })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn edges(&self) -> &[(NodeId, NodeId)] {
        &self.edges
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Dense adjacency lists indexed by position in `nodes()`; each list sorted.
    pub fn adjacency(&self) -> Vec<Vec<u32>> {
        let index: BTreeMap<NodeId, u32> =
            self.nodes.iter().enumerate().map(|(i, &n)| (n, i as u32)).collect();
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for (a, b) in &self.edges {
            let (ia, ib) = (index[a], index[b]);
            adj[ia as usize].push(ib);
            adj[ib as usize].push(ia);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        adj
    }

    pub fn neighbors_map(&self) -> BTreeMap<NodeId, Vec<NodeId>> {
        let mut map: BTreeMap<NodeId, Vec<NodeId>> = self.nodes.iter().map(|&n| (n, Vec::new())).collect();
        for &(a, b) in &self.edges {
            map.get_mut(&a).expect("node").push(b);
            map.get_mut(&b).expect("node").push(a);
        }
        map
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.adjacency().iter().map(Vec::len).collect()
    }

    pub fn mean_degree(&self) -> f64 {
        if self.nodes.is_empty() {
            return 0.0;
        }
        2.0 * self.edges.len() as f64 / self.nodes.len() as f64
    }

    /// Edge-list text: one `u v` pair per line.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        for (a, b) in &self.edges {
            let _ = writeln!(out, "{} {}", a.0, b.0);
        }
        out
    }

    /// Parses edge-list text. Nodes are the edge endpoints plus `extra_nodes`.
    pub fn from_edge_list(text: &str, extra_nodes: &[NodeId]) -> Result<Self, TopologyError> {
        let mut nodes: BTreeSet<NodeId> = extra_nodes.iter().copied().collect();
        let mut edges = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split_whitespace();
            let mut next = || -> Result<NodeId, TopologyError> {
                parts
                    .next()
                    .ok_or_else(|| TopologyError::Parse { line: i + 1, reason: "expected two ids".into() })?
                    .parse::<u64>()
                    .map(NodeId)
                    .map_err(|e| TopologyError::Parse { line: i + 1, reason: e.to_string() })
            };
            let (a, b) = (next()?, next()?);
            nodes.insert(a);
            nodes.insert(b);
            edges.push((a, b));
        }
        Self::new(nodes, edges)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopologyMetrics {
    pub degree_histogram: BTreeMap<usize, usize>,
    pub clustering_coefficient: f64,
    pub avg_connected_distance: f64,
    pub diameter: u32,
    pub component_count: usize,
    pub node_count: usize,
    pub edge_count: usize,
}

impl TopologyMetrics {
    pub fn mean_degree(&self) -> f64 {
        if self.node_count == 0 {
            0.0
        } else {
            2.0 * self.edge_count as f64 / self.node_count as f64
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErParams {
    pub n: usize,
    /// Mean degree.
    pub alpha: f64,
}

impl ErParams {
    pub fn p(&self) -> f64 {
        if self.n <= 1 {
            0.0
        } else {
            self.alpha / (self.n as f64 - 1.0)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WsParams {
    pub n: usize,
    /// Lattice degree K (even): K/2 neighbours on each side.
    pub k_ring: usize,
    pub p_rewire: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaParams {
    pub n: usize,
    pub m_attach: usize,
    /// Size of the initial complete graph.
    pub n0: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLawFit {
    pub tau: f64,
    pub c: f64,
    pub fit_range: (usize, usize),
}

fn ids(n: usize) -> impl Iterator<Item = NodeId> {
    (0..n as u64).map(NodeId)
}

pub fn generate_er<R: Rng + ?Sized>(params: ErParams, rng: &mut R) -> Result<TopologySnapshot, TopologyError> {
    let p = params.p();
    if !(0.0..=1.0).contains(&p) || p.is_nan() {
        return Err(TopologyError::InvalidParams(format!("edge probability {p} outside [0,1]")));
    }
    let n = params.n;
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.gen_bool(p) {
                edges.push((NodeId(i as u64), NodeId(j as u64)));
            }
        }
    }
    TopologySnapshot::new(ids(n), edges)
}

/// Ring lattice with each node linked to `k_ring / 2` neighbours per side.
pub fn ring_lattice(n: usize, k_ring: usize) -> Result<TopologySnapshot, TopologyError> {
    if k_ring % 2 != 0 || k_ring >= n {
        return Err(TopologyError::InvalidParams(format!("need even K < n, got K={k_ring}, n={n}")));
    }
    let edges = (0..n).flat_map(|i| {
        (1..=k_ring / 2).map(move |off| (NodeId(i as u64), NodeId(((i + off) % n) as u64)))
    });
    TopologySnapshot::new(ids(n), edges)
}

pub fn generate_ws<R: Rng + ?Sized>(params: WsParams, rng: &mut R) -> Result<TopologySnapshot, TopologyError> {
    let WsParams { n, k_ring, p_rewire } = params;
    if k_ring % 2 != 0 || k_ring >= n {
        return Err(TopologyError::InvalidParams(format!("need even K < n, got K={k_ring}, n={n}")));
    }
    if !(0.0..=1.0).contains(&p_rewire) {
        return Err(TopologyError::InvalidParams(format!("rewiring probability {p_rewire} outside [0,1]")));
    }
    let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    let mut lattice = Vec::with_capacity(n * k_ring / 2);
    for i in 0..n {
        for off in 1..=k_ring / 2 {
            let j = (i + off) % n;
            adj[i].insert(j);
            adj[j].insert(i);
            lattice.push((i, j));
        }
    }
    // Scan in (node, offset) order; move the far endpoint.
    for (i, j) in lattice {
        if !rng.gen_bool(p_rewire) {
            continue;
        }
        if !adj[i].contains(&j) || adj[i].len() >= n - 1 {
            continue;
        }
        let target = loop {
            let t = rng.gen_range(0..n);
            if t != i && !adj[i].contains(&t) {
                break t;
            }
        };
        adj[i].remove(&j);
        adj[j].remove(&i);
        adj[i].insert(target);
        adj[target].insert(i);
    }
    let edges = adj
        .iter()
        .enumerate()
        .flat_map(|(i, set)| set.iter().filter(move |&&j| j > i).map(move |&j| (NodeId(i as u64), NodeId(j as u64))));
    TopologySnapshot::new(ids(n), edges)
}

pub fn generate_ba<R: Rng + ?Sized>(params: BaParams, rng: &mut R) -> Result<TopologySnapshot, TopologyError> {
    let BaParams { n, m_attach: m, n0 } = params;
    if !(1 <= m && m <= n0 && n0 < n) {
        return Err(TopologyError::InvalidParams(format!("need 1 <= m <= n0 < n, got m={m}, n0={n0}, n={n}")));
    }
    let mut edges: Vec<(usize, usize)> = Vec::with_capacity(n0 * (n0 - 1) / 2 + m * (n - n0));
    // every edge endpoint appears once; uniform draws are degree-proportional
    let mut endpoints: Vec<usize> = Vec::with_capacity(2 * edges.capacity());
    for i in 0..n0 {
        for j in (i + 1)..n0 {
            edges.push((i, j));
            endpoints.push(i);
            endpoints.push(j);
        }
    }
    let mut targets: Vec<usize> = Vec::with_capacity(m);
    for new in n0..n {
        targets.clear();
        while targets.len() < m {
            let t = if endpoints.is_empty() {
                rng.gen_range(0..new)
            } else {
                endpoints[rng.gen_range(0..endpoints.len())]
            };
            if !targets.contains(&t) {
                targets.push(t);
            }
        }
        for &t in &targets {
            edges.push((t, new));
            endpoints.push(t);
            endpoints.push(new);
        }
    }
    TopologySnapshot::new(ids(n), edges.into_iter().map(|(a, b)| (NodeId(a as u64), NodeId(b as u64))))
}

/// BFS hop distances from `src`; `u32::MAX` marks unreachable nodes.
pub fn bfs_distances(adj: &[Vec<u32>], src: usize) -> Vec<u32> {
    let mut dist = vec![u32::MAX; adj.len()];
    let mut queue = VecDeque::new();
    dist[src] = 0;
    queue.push_back(src as u32);
    while let Some(u) = queue.pop_front() {
        let du = dist[u as usize];
        for &v in &adj[u as usize] {
            if dist[v as usize] == u32::MAX {
                dist[v as usize] = du + 1;
                queue.push_back(v);
            }
        }
    }
    dist
}

fn components(adj: &[Vec<u32>]) -> Vec<usize> {
    let mut label = vec![usize::MAX; adj.len()];
    let mut next = 0;
    for s in 0..adj.len() {
        if label[s] != usize::MAX {
            continue;
        }
        let mut queue = VecDeque::from([s]);
        label[s] = next;
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if label[v as usize] == usize::MAX {
                    label[v as usize] = next;
                    queue.push_back(v as usize);
                }
            }
        }
        next += 1;
    }
    label
}

fn sorted_intersection_len(a: &[u32], b: &[u32]) -> usize {
    let (mut i, mut j, mut count) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                count += 1;
                i += 1;
                j += 1;
            }
        }
    }
    count
}

/// Local clustering coefficient; 0 for nodes of degree < 2.
pub fn local_clustering(adj: &[Vec<u32>], i: usize) -> f64 {
    let k = adj[i].len();
    if k < 2 {
        return 0.0;
    }
    let twice_links: usize = adj[i].iter().map(|&j| sorted_intersection_len(&adj[i], &adj[j as usize])).sum();
    let links = twice_links as f64 / 2.0;
    links / (k as f64 * (k as f64 - 1.0) / 2.0)
}

#[derive(Clone, Copy, Default)]
struct SourceStats {
    dist_sum: u64,
    reached: u64,
    eccentricity: u32,
    clustering: f64,
}

fn source_stats(adj: &[Vec<u32>], s: usize) -> SourceStats {
    let dist = bfs_distances(adj, s);
    let mut stats = SourceStats { clustering: local_clustering(adj, s), ..Default::default() };
    for (v, &d) in dist.iter().enumerate() {
        if v != s && d != u32::MAX {
            stats.dist_sum += d as u64;
            stats.reached += 1;
            stats.eccentricity = stats.eccentricity.max(d);
        }
    }
    stats
}

fn metrics_with(t: &TopologySnapshot, parallel: bool) -> Result<TopologyMetrics, TopologyError> {
    let n = t.node_count();
    if n == 0 {
        return Err(TopologyError::EmptyGraph);
    }
    let adj = t.adjacency();
    let label = components(&adj);
    let component_count = label.iter().copied().max().map_or(0, |m| m + 1);
    let mut sizes = vec![0usize; component_count];
    for &l in &label {
        sizes[l] += 1;
    }
    // ties resolve to the component discovered first (lowest node index)
    let largest = (0..component_count).fold(0, |best, c| if sizes[c] > sizes[best] { c } else { best });

    let per_source = if parallel {
        par::map_range(n, |s| source_stats(&adj, s))
    } else {
        par::map_range_seq(n, |s| source_stats(&adj, s))
    };

    let mut histogram = BTreeMap::new();
    for list in &adj {
        *histogram.entry(list.len()).or_insert(0) += 1;
    }
    let cc_sum: f64 = per_source.iter().map(|s| s.clustering).sum();
    let (dist_sum, pairs) = per_source.iter().fold((0u64, 0u64), |acc, s| (acc.0 + s.dist_sum, acc.1 + s.reached));
    let diameter = per_source
        .iter()
        .enumerate()
        .filter(|(s, _)| label[*s] == largest)
        .map(|(_, st)| st.eccentricity)
        .max()
        .unwrap_or(0);

    Ok(TopologyMetrics {
        degree_histogram: histogram,
        clustering_coefficient: cc_sum / n as f64,
        avg_connected_distance: if pairs == 0 { 0.0 } else { dist_sum as f64 / pairs as f64 },
        diameter,
        component_count,
        node_count: n,
        edge_count: t.edge_count(),
    })
}

/// Degree histogram, clustering coefficient, average connected distance
/// (over connected pairs) and diameter (of the largest component).
pub fn metrics(t: &TopologySnapshot) -> Result<TopologyMetrics, TopologyError> {
    metrics_with(t, true)
}

/// Same as [`metrics`] but never fans out.
pub fn metrics_sequential(t: &TopologySnapshot) -> Result<TopologyMetrics, TopologyError> {
    metrics_with(t, false)
}

/// Least-squares fit of `ln P(k) = ln c - tau ln k` over `range` (inclusive).
pub fn fit_power_law(hist: &BTreeMap<usize, usize>, range: (usize, usize)) -> Result<PowerLawFit, TopologyError> {
    let total: usize = hist.values().sum();
    if total == 0 {
        return Err(TopologyError::DegenerateFit("empty histogram".into()));
    }
    let points: Vec<(f64, f64)> = hist
        .range(range.0.max(1)..=range.1)
        .filter(|(_, &c)| c > 0)
        .map(|(&k, &c)| ((k as f64).ln(), (c as f64 / total as f64).ln()))
        .collect();
    if points.len() < 3 {
        return Err(TopologyError::DegenerateFit(format!(
            "{} distinct degrees in [{}, {}], need at least 3",
            points.len(),
            range.0,
            range.1
        )));
    }
    let len = points.len() as f64;
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / len;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / len;
    let sxx: f64 = points.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    let slope = sxy / sxx;
    let tau = -slope;
    if !(tau > 1.0) {
        return Err(TopologyError::DegenerateFit(format!("fitted exponent {tau:.3} is not a power law (tau <= 1)")));
    }
    Ok(PowerLawFit { tau, c: (mean_y - slope * mean_x).exp(), fit_range: range })
}

/// Fit range for a degree histogram: from `k_min` up to the largest degree
/// whose count is at least `min_count`.
pub fn tail_range(hist: &BTreeMap<usize, usize>, k_min: usize, min_count: usize) -> (usize, usize) {
    let k_max = hist.iter().filter(|(&k, &c)| k >= k_min && c >= min_count).map(|(&k, _)| k).max().unwrap_or(k_min);
    (k_min, k_max)
}

/// Degree distribution of preferential-attachment growth,
/// `2m(m+1) / (k(k+1)(k+2))`.
pub fn ba_reference(m: u32, k: u32) -> f64 {
    let (m, k) = (m as f64, k as f64);
    2.0 * m * (m + 1.0) / (k * (k + 1.0) * (k + 2.0))
}

/// Degree distribution of growth with uniform attachment,
/// `(1 - e^{-1/m}) e^{1 - k/m}` for `k >= m`.
pub fn exponential_growth_reference(m: u32, k: u32) -> Result<f64, TopologyError> {
    if m == 0 {
        return Err(TopologyError::InvalidParams("m must be positive".into()));
    }
    if k < m {
        return Err(TopologyError::DomainError { m, k });
    }
    let (mf, kf) = (m as f64, k as f64);
    Ok((1.0 - (-1.0 / mf).exp()) * (1.0 - kf / mf).exp())
}

/// Checks the simple-graph invariants of a snapshot.
pub fn is_simple(t: &TopologySnapshot) -> bool {
    let nodes: HashSet<NodeId> = t.nodes().iter().copied().collect();
    let mut seen = HashSet::new();
    t.edges().iter().all(|&(a, b)| a < b && nodes.contains(&a) && nodes.contains(&b) && seen.insert((a, b)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::seeded_rng;
    use proptest::prelude::*;

    fn snap(n: u64, edges: &[(u64, u64)]) -> TopologySnapshot {
        TopologySnapshot::new((0..n).map(NodeId), edges.iter().map(|&(a, b)| (NodeId(a), NodeId(b)))).unwrap()
    }

    /// Floyd–Warshall over a dense matrix; independent of the BFS path.
    fn all_pairs_oracle(t: &TopologySnapshot) -> (f64, u32) {
        let n = t.node_count();
        let inf = u32::MAX / 4;
        let mut d = vec![vec![inf; n]; n];
        for i in 0..n {
            d[i][i] = 0;
        }
        for &(a, b) in t.edges() {
            d[a.0 as usize][b.0 as usize] = 1;
            d[b.0 as usize][a.0 as usize] = 1;
        }
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    if d[i][k] + d[k][j] < d[i][j] {
                        d[i][j] = d[i][k] + d[k][j];
                    }
                }
            }
        }
        let (mut sum, mut cnt, mut max) = (0u64, 0u64, 0u32);
        for i in 0..n {
            for j in 0..n {
                if i != j && d[i][j] < inf {
                    sum += d[i][j] as u64;
                    cnt += 1;
                    max = max.max(d[i][j]);
                }
            }
        }
        (sum as f64 / cnt as f64, max)
    }

    #[test]
    fn triangle_metrics() {
        let m = metrics(&snap(3, &[(0, 1), (1, 2), (0, 2)])).unwrap();
        assert_eq!(m.clustering_coefficient, 1.0);
        assert_eq!(m.avg_connected_distance, 1.0);
        assert_eq!(m.diameter, 1);
        assert_eq!(m.component_count, 1);
    }

    #[test]
    fn star_has_zero_clustering() {
        let m = metrics(&snap(3, &[(0, 1), (0, 2)])).unwrap();
        assert_eq!(m.clustering_coefficient, 0.0);
    }

    #[test]
    fn eight_ring() {
        let t = ring_lattice(8, 2).unwrap();
        let m = metrics(&t).unwrap();
        let (oracle_l, oracle_d) = all_pairs_oracle(&t);
        assert_eq!(m.diameter, 4);
        assert_eq!(oracle_d, 4);
        assert!((m.avg_connected_distance - 16.0 / 7.0).abs() < 1e-12);
        assert!((oracle_l - 16.0 / 7.0).abs() < 1e-12);
    }

    #[test]
    fn empty_graph_errors() {
        assert_eq!(metrics(&TopologySnapshot::empty()), Err(TopologyError::EmptyGraph));
    }

    #[test]
    fn disconnected_graph_uses_largest_component() {
        // path of 4 plus an isolated edge
        let t = snap(6, &[(0, 1), (1, 2), (2, 3), (4, 5)]);
        let m = metrics(&t).unwrap();
        assert_eq!(m.component_count, 2);
        assert_eq!(m.diameter, 3);
        let (oracle_l, _) = all_pairs_oracle(&t);
        assert!((m.avg_connected_distance - oracle_l).abs() < 1e-12);
    }

    #[test]
    fn metrics_match_oracle_on_random_graphs() {
        let mut rng = seeded_rng(11);
        for _ in 0..5 {
            let t = generate_er(ErParams { n: 60, alpha: 3.0 }, &mut rng).unwrap();
            let m = metrics(&t).unwrap();
            let s = metrics_sequential(&t).unwrap();
            assert_eq!(m, s);
            let (l, _) = all_pairs_oracle(&t);
            assert!((m.avg_connected_distance - l).abs() < 1e-9);
        }
    }

    #[test]
    fn er_extremes() {
        let mut rng = seeded_rng(1);
        let empty = generate_er(ErParams { n: 30, alpha: 0.0 }, &mut rng).unwrap();
        assert_eq!(empty.edge_count(), 0);
        let full = generate_er(ErParams { n: 30, alpha: 29.0 }, &mut rng).unwrap();
        assert_eq!(full.edge_count(), 30 * 29 / 2);
        assert!(generate_er(ErParams { n: 30, alpha: 40.0 }, &mut rng).is_err());
    }

    #[test]
    fn er_mean_degree() {
        let mut rng = seeded_rng(8);
        let t = generate_er(ErParams { n: 2000, alpha: 8.0 }, &mut rng).unwrap();
        assert!((t.mean_degree() - 8.0).abs() / 8.0 < 0.05);
    }

    #[test]
    fn ws_no_rewire_is_lattice() {
        let mut rng = seeded_rng(3);
        let t = generate_ws(WsParams { n: 100, k_ring: 4, p_rewire: 0.0 }, &mut rng).unwrap();
        assert_eq!(t, ring_lattice(100, 4).unwrap());
        assert_eq!(t.edge_count(), 200);
    }

    #[test]
    fn ws_full_rewire_preserves_edges() {
        let mut rng = seeded_rng(4);
        let t = generate_ws(WsParams { n: 1000, k_ring: 6, p_rewire: 1.0 }, &mut rng).unwrap();
        assert_eq!(t.edge_count(), 3000);
        assert!(is_simple(&t));
    }

    #[test]
    fn ws_rejects_bad_params() {
        let mut rng = seeded_rng(4);
        assert!(generate_ws(WsParams { n: 10, k_ring: 3, p_rewire: 0.1 }, &mut rng).is_err());
        assert!(generate_ws(WsParams { n: 10, k_ring: 10, p_rewire: 0.1 }, &mut rng).is_err());
    }

    #[test]
    fn ws_lattice_path_length() {
        let t = ring_lattice(200, 8).unwrap();
        let m = metrics(&t).unwrap();
        // closed form for the lattice: sum of ceil(min(j, n-j) / 4) / (n - 1)
        let exact: f64 = (1..200usize).map(|j| j.min(200 - j).div_ceil(4) as f64).sum::<f64>() / 199.0;
        assert!((m.avg_connected_distance - exact).abs() < 1e-12);
        assert!((m.avg_connected_distance - 12.5).abs() / 12.5 < 0.10);
    }

    #[test]
    fn ba_newcomer_links_every_seed() {
        let mut rng = seeded_rng(5);
        let t = generate_ba(BaParams { n: 5, m_attach: 4, n0: 4 }, &mut rng).unwrap();
        let nbrs = t.neighbors_map();
        assert_eq!(nbrs[&NodeId(4)].len(), 4);
    }

    #[test]
    fn ba_degree_sum() {
        let mut rng = seeded_rng(6);
        let p = BaParams { n: 500, m_attach: 3, n0: 4 };
        let t = generate_ba(p, &mut rng).unwrap();
        let degree_sum: usize = t.degrees().iter().sum();
        assert_eq!(degree_sum, 2 * t.edge_count());
        assert_eq!(t.edge_count(), 6 + 3 * (500 - 4));
        assert!(generate_ba(BaParams { n: 4, m_attach: 2, n0: 4 }, &mut rng).is_err());
        assert!(generate_ba(BaParams { n: 10, m_attach: 5, n0: 4 }, &mut rng).is_err());
    }

    #[test]
    fn power_law_recovers_exponent() {
        let hist: BTreeMap<usize, usize> =
            (1..=50usize).map(|k| (k, (1e7 * (k as f64).powf(-3.0)).round() as usize)).collect();
        let fit = fit_power_law(&hist, (1, 50)).unwrap();
        assert!((fit.tau - 3.0).abs() < 0.05, "tau {}", fit.tau);
    }

    #[test]
    fn power_law_degenerate_inputs() {
        let uniform: BTreeMap<usize, usize> = (1..=10).map(|k| (k, 100)).collect();
        assert!(matches!(fit_power_law(&uniform, (1, 10)), Err(TopologyError::DegenerateFit(_))));
        let two: BTreeMap<usize, usize> = [(2, 10), (3, 5)].into_iter().collect();
        assert!(matches!(fit_power_law(&two, (1, 10)), Err(TopologyError::DegenerateFit(_))));
    }

    #[test]
    fn exponential_growth_values() {
        let p11 = exponential_growth_reference(1, 1).unwrap();
        assert!((p11 - (1.0 - (-1.0f64).exp())).abs() < 1e-15);
        assert!((p11 - 0.6321205588285577).abs() < 1e-12);
        let ratio = exponential_growth_reference(2, 2).unwrap() / exponential_growth_reference(2, 4).unwrap();
        assert!((ratio - std::f64::consts::E).abs() < 1e-12);
        assert_eq!(exponential_growth_reference(3, 2), Err(TopologyError::DomainError { m: 3, k: 2 }));
        for m in 1..5 {
            for k in m..m + 10 {
                let r = exponential_growth_reference(m, k + 1).unwrap() / exponential_growth_reference(m, k).unwrap();
                assert!((r - (-1.0 / m as f64).exp()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn ba_reference_at_m() {
        assert!((ba_reference(2, 2) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn edge_list_round_trip() {
        let mut rng = seeded_rng(9);
        let t = generate_er(ErParams { n: 40, alpha: 4.0 }, &mut rng).unwrap();
        let back = TopologySnapshot::from_edge_list(&t.to_edge_list(), t.nodes()).unwrap();
        assert_eq!(back, t);
        assert!(TopologySnapshot::from_edge_list("1 x\n", &[]).is_err());
    }

    proptest! {
        #[test]
        fn clustering_bounded(seed in any::<u64>(), n in 3usize..40, alpha in 0.0f64..6.0) {
            let mut rng = seeded_rng(seed);
            let alpha = alpha.min(n as f64 - 1.0);
            let t = generate_er(ErParams { n, alpha }, &mut rng).unwrap();
            let m = metrics(&t).unwrap();
            prop_assert!((0.0..=1.0).contains(&m.clustering_coefficient));
            prop_assert_eq!(m.degree_histogram.values().sum::<usize>(), n);
            prop_assert!(m.avg_connected_distance <= m.diameter as f64 || m.component_count > 1);
        }

        #[test]
        fn ws_edge_conservation(seed in any::<u64>(), p in 0.0f64..=1.0) {
            let mut rng = seeded_rng(seed);
            let t = generate_ws(WsParams { n: 60, k_ring: 4, p_rewire: p }, &mut rng).unwrap();
            prop_assert_eq!(t.edge_count(), 120);
            prop_assert!(is_simple(&t));
        }
    }
}
