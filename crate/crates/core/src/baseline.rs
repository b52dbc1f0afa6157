//! Geometric graphs, the minimum spanning tree, the path-greedy light spanner
//! and single-source shortest paths with vertex faults.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::metric::{Metric, PointId};

/// Distance reported for vertices that cannot be reached.
pub const UNREACHABLE: f64 = f64::INFINITY;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Edge {
    pub u: PointId,
    pub v: PointId,
    pub weight: f64,
}

impl Edge {
    /// Endpoints with the smaller id first.
    pub fn key(&self) -> (PointId, PointId) {
        ordered(self.u, self.v)
    }
}

#[inline]
pub fn ordered(u: PointId, v: PointId) -> (PointId, PointId) {
    if u <= v {
        (u, v)
    } else {
        (v, u)
    }
}

/// Simple undirected geometric graph: no loops, no parallel edges.
#[derive(Clone, Debug, Default)]
pub struct WeightedGraph {
    n: usize,
    edges: Vec<Edge>,
    adj: Vec<Vec<(PointId, f64)>>,
    present: HashSet<(PointId, PointId)>,
}

impl WeightedGraph {
    pub fn new(n: usize) -> Self {
        WeightedGraph {
            n,
            edges: Vec::new(),
            adj: vec![Vec::new(); n],
            present: HashSet::new(),
        }
    }

    /// Graph with the given edges, weighted by the metric.
    pub fn from_pairs(m: &Metric, pairs: impl IntoIterator<Item = (PointId, PointId)>) -> Self {
        let mut g = WeightedGraph::new(m.len());
        for (u, v) in pairs {
            g.add_edge(u, v, m.dist(u, v));
        }
        g
    }

    /// Complete graph on the metric.
    pub fn complete(m: &Metric) -> Self {
        let n = m.len();
        Self::from_pairs(m, (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))))
    }

    pub fn vertex_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn neighbors(&self, u: PointId) -> &[(PointId, f64)] {
        &self.adj[u]
    }

    pub fn degree(&self, u: PointId) -> usize {
        self.adj[u].len()
    }

    pub fn max_degree(&self) -> usize {
        self.adj.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn min_degree(&self) -> usize {
        self.adj.iter().map(Vec::len).min().unwrap_or(0)
    }

    pub fn has_edge(&self, u: PointId, v: PointId) -> bool {
        self.present.contains(&ordered(u, v))
    }

    /// Inserts an edge; returns false for loops and duplicates.
    pub fn add_edge(&mut self, u: PointId, v: PointId, weight: f64) -> bool {
        if u == v || !self.present.insert(ordered(u, v)) {
            return false;
        }
        self.edges.push(Edge { u, v, weight });
        self.adj[u].push((v, weight));
        self.adj[v].push((u, weight));
        true
    }

    /// Removes an edge if present.
    pub fn remove_edge(&mut self, u: PointId, v: PointId) -> bool {
        if !self.present.remove(&ordered(u, v)) {
            return false;
        }
        let key = ordered(u, v);
        self.edges.retain(|e| e.key() != key);
        self.adj[u].retain(|&(w, _)| w != v);
        self.adj[v].retain(|&(w, _)| w != u);
        true
    }

    /// Total weight, summed in key order so it does not depend on how the
    /// graph was assembled.
    pub fn weight(&self) -> f64 {
        let mut edges: Vec<(PointId, PointId, f64)> =
            self.edges.iter().map(|e| (e.key().0, e.key().1, e.weight)).collect();
        edges.sort_unstable_by_key(|&(u, v, _)| (u, v));
        edges.iter().map(|e| e.2).sum()
    }

    /// Edge keys in ascending order.
    pub fn sorted_keys(&self) -> Vec<(PointId, PointId)> {
        let mut keys: Vec<_> = self.edges.iter().map(Edge::key).collect();
        keys.sort_unstable();
        keys
    }

    /// Serializes as `n m` followed by `u v weight` lines in ascending key order.
    pub fn to_edge_file(&self) -> String {
        let mut edges = self.edges.clone();
        edges.sort_by_key(Edge::key);
        let mut out = String::with_capacity(32 * edges.len() + 16);
        let _ = writeln!(out, "{} {}", self.n, edges.len());
        for e in edges {
            let (u, v) = e.key();
            let _ = writeln!(out, "{u} {v} {:?}", e.weight);
        }
        out
    }

    /// Parses an edge file, cross-checking each weight against the metric
    /// within 1e-9 relative.
    pub fn from_edge_file(text: &str, m: &Metric, origin: &Path) -> Result<Self> {
        let parse_err = |line: usize, msg: String| Error::Parse {
            path: origin.to_path_buf(),
            line,
            msg,
        };
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'));
        let (hl, header) = lines.next().ok_or_else(|| parse_err(0, "empty graph file".into()))?;
        let head: Vec<&str> = header.split_whitespace().collect();
        let (n, m_count) = match head.as_slice() {
            [a, b] => (
                a.parse::<usize>()
                    .map_err(|_| parse_err(hl + 1, "bad vertex count".into()))?,
                b.parse::<usize>()
                    .map_err(|_| parse_err(hl + 1, "bad edge count".into()))?,
            ),
            _ => return Err(parse_err(hl + 1, "header must be \"n m\"".into())),
        };
        if n != m.len() {
            return Err(Error::GraphMismatch(format!(
                "graph has {n} vertices, metric has {}",
                m.len()
            )));
        }
        let mut g = WeightedGraph::new(n);
        let mut seen = 0;
        for (idx, line) in lines {
            let toks: Vec<&str> = line.split_whitespace().collect();
            let [u, v, w] = toks.as_slice() else {
                return Err(parse_err(idx + 1, "expected \"u v weight\"".into()));
            };
            let u: usize = u.parse().map_err(|_| parse_err(idx + 1, "bad endpoint".into()))?;
            let v: usize = v.parse().map_err(|_| parse_err(idx + 1, "bad endpoint".into()))?;
            let w: f64 = w.parse().map_err(|_| parse_err(idx + 1, "bad weight".into()))?;
            if u >= n || v >= n || u == v {
                return Err(parse_err(idx + 1, format!("invalid edge ({u}, {v})")));
            }
            let d = m.dist(u, v);
            if (w - d).abs() > 1e-9 * d.max(1.0) {
                return Err(Error::GraphMismatch(format!(
                    "edge ({u}, {v}) has weight {w}, metric says {d}"
                )));
            }
            g.add_edge(u, v, d);
            seen += 1;
        }
        if seen != m_count {
            return Err(Error::GraphMismatch(format!(
                "header promises {m_count} edges, file has {seen}"
            )));
        }
        Ok(g)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_edge_file())?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>, m: &Metric) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Self::from_edge_file(&text, m, path)
    }
}

/// Key that orders edges by weight, then lexicographically by endpoints.
#[inline]
fn edge_order(w1: f64, a1: (PointId, PointId), w2: f64, a2: (PointId, PointId)) -> Ordering {
    w1.total_cmp(&w2).then(a1.cmp(&a2))
}

/// Minimum spanning tree of the complete geometric graph (dense Prim).
///
/// Ties are broken by the lexicographic order of `(min-id, max-id)`, which
/// makes the tree unique and equal to what Kruskal would produce.
pub fn mst(m: &Metric) -> (WeightedGraph, f64) {
    let n = m.len();
    let mut g = WeightedGraph::new(n);
    if n < 2 {
        return (g, 0.0);
    }
    let mut in_tree = vec![false; n];
    // best connection of each outside vertex: (weight, tree endpoint)
    let mut best: Vec<(f64, PointId)> = vec![(f64::INFINITY, usize::MAX); n];
    in_tree[0] = true;
    for (v, b) in best.iter_mut().enumerate().skip(1) {
        *b = (m.dist(0, v), 0);
    }
    for _ in 1..n {
        let mut pick: Option<PointId> = None;
        for v in 0..n {
            if in_tree[v] {
                continue;
            }
            pick = match pick {
                None => Some(v),
                Some(p) => {
                    let (wp, ap) = best[p];
                    let (wv, av) = best[v];
                    if edge_order(wv, ordered(v, av), wp, ordered(p, ap)) == Ordering::Less {
                        Some(v)
                    } else {
                        Some(p)
                    }
                }
            };
        }
        let v = pick.expect("a vertex remains outside the tree");
        let (w, a) = best[v];
        in_tree[v] = true;
        g.add_edge(a, v, w);
        for x in 0..n {
            if in_tree[x] {
                continue;
            }
            let d = m.dist(v, x);
            let (bw, ba) = best[x];
            if edge_order(d, ordered(x, v), bw, ordered(x, ba)) == Ordering::Less {
                best[x] = (d, v);
            }
        }
    }
    let w = g.weight();
    (g, w)
}

/// Path-greedy `(1+eps)`-spanner.
///
/// Pairs are scanned by nondecreasing `(distance, min-id, max-id)` and a pair
/// is joined iff the current graph distance exceeds `(1+eps)` times the metric
/// distance. Graph distances are cached in a matrix of upper bounds that is
/// refreshed with a full Dijkstra only when the cached bound is too long.
pub fn light_spanner(m: &Metric, eps: f64) -> Result<WeightedGraph> {
    if !(eps > 0.0 && eps < 0.5) {
        return Err(Error::InvalidConfig(format!("eps must lie in (0, 1/2), got {eps}")));
    }
    Ok(path_greedy(m, 1.0 + eps))
}

pub(crate) fn sorted_pairs(m: &Metric) -> Vec<(f64, u32, u32)> {
    let n = m.len();
    let mut pairs = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for u in 0..n {
        for v in u + 1..n {
            pairs.push((m.dist(u, v), u as u32, v as u32));
        }
    }
    pairs.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then((a.1, a.2).cmp(&(b.1, b.2))));
    pairs
}

fn path_greedy(m: &Metric, t: f64) -> WeightedGraph {
    let n = m.len();
    let mut g = WeightedGraph::new(n);
    if n < 2 {
        return g;
    }
    let mut bound = vec![f64::INFINITY; n * n];
    let mut dijkstra = Dijkstra::new(n);
    let no_faults = vec![false; n];
    for (d, u, v) in sorted_pairs(m) {
        let (u, v) = (u as usize, v as usize);
        let limit = t * d;
        if bound[u * n + v] <= limit {
            continue;
        }
        let dist = dijkstra.run(&g, u, &no_faults);
        for (x, &dx) in dist.iter().enumerate() {
            bound[u * n + x] = dx;
            bound[x * n + u] = dx;
        }
        if dist[v] > limit {
            g.add_edge(u, v, d);
            bound[u * n + v] = d;
            bound[v * n + u] = d;
        }
    }
    g
}

#[derive(Clone, Copy, Debug)]
struct HeapItem {
    dist: f64,
    vertex: PointId,
}

impl PartialEq for HeapItem {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for HeapItem {}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapItem {
    // reversed: BinaryHeap is a max-heap
    fn cmp(&self, other: &Self) -> Ordering {
        other.dist.total_cmp(&self.dist).then(other.vertex.cmp(&self.vertex))
    }
}

/// Reusable Dijkstra workspace.
pub struct Dijkstra {
    dist: Vec<f64>,
    done: Vec<bool>,
    heap: BinaryHeap<HeapItem>,
}

impl Dijkstra {
    pub fn new(n: usize) -> Self {
        Dijkstra {
            dist: vec![UNREACHABLE; n],
            done: vec![false; n],
            heap: BinaryHeap::new(),
        }
    }

    /// Distances from `source` avoiding vertices flagged in `forbidden`.
    pub fn run(&mut self, g: &WeightedGraph, source: PointId, forbidden: &[bool]) -> &[f64] {
        let n = g.vertex_count();
        if self.dist.len() != n {
            *self = Dijkstra::new(n);
        }
        self.dist.fill(UNREACHABLE);
        self.done.fill(false);
        self.heap.clear();
        self.dist[source] = 0.0;
        self.heap.push(HeapItem {
            dist: 0.0,
            vertex: source,
        });
        while let Some(HeapItem { dist, vertex }) = self.heap.pop() {
            if self.done[vertex] {
                continue;
            }
            self.done[vertex] = true;
            for &(w, len) in g.neighbors(vertex) {
                if forbidden[w] || self.done[w] {
                    continue;
                }
                let nd = dist + len;
                if nd < self.dist[w] {
                    self.dist[w] = nd;
                    self.heap.push(HeapItem { dist: nd, vertex: w });
                }
            }
        }
        &self.dist
    }
}

/// Single-source distances in `g` with the `forbidden` vertices removed.
/// Unreachable vertices (including forbidden ones) map to [`UNREACHABLE`].
pub fn shortest_dist(g: &WeightedGraph, source: PointId, forbidden: &[PointId]) -> Result<Vec<f64>> {
    let n = g.vertex_count();
    if source >= n {
        return Err(Error::InvalidPoint(source));
    }
    let mut mask = vec![false; n];
    for &f in forbidden {
        if f >= n {
            return Err(Error::InvalidPoint(f));
        }
        mask[f] = true;
    }
    if mask[source] {
        return Err(Error::SourceForbidden(source));
    }
    Ok(Dijkstra::new(n).run(g, source, &mask).to_vec())
}

/// `w(g) / mst_weight`.
pub fn lightness(g: &WeightedGraph, mst_weight: f64) -> Result<f64> {
    if g.vertex_count() < 2 || mst_weight <= 0.0 {
        return Err(Error::TooFewPoints {
            needed: 2,
            got: g.vertex_count(),
        });
    }
    Ok(g.weight() / mst_weight)
}
