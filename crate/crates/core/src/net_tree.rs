//! Greedy net tree over a normalized metric, plus the cross-edge queries built
//! on top of it.
//!
//! Level `i` holds an `r_i`-net of level `i-1` with `r_i = 5^i`. Nets are
//! chosen greedily by ascending point id and every node's parent is the
//! closest point of the next net (lowest id on ties). A node is identified by
//! its `(point, level)` pair; [`NodeId`] is a dense index into the arena.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::metric::{Metric, PointId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

impl NodeId {
    #[inline]
    pub fn idx(self) -> usize {
        self.0 as usize
    }
}

/// Radius of level `i`.
#[inline]
pub fn radius(level: usize) -> f64 {
    5f64.powi(level as i32)
}

/// Smallest integer `k >= 0` with `5^k >= x` (for `x > 0`).
pub fn ceil_log5(x: f64) -> usize {
    let mut k = 0;
    let mut p = 1.0;
    while p < x {
        p *= 5.0;
        k += 1;
    }
    k
}

#[derive(Clone, Debug)]
pub struct Node {
    pub point: PointId,
    pub level: usize,
    pub parent: Option<NodeId>,
    pub children: Vec<NodeId>,
    leaf_start: u32,
    leaf_end: u32,
}

#[derive(Clone, Debug)]
pub struct NetTree {
    n: usize,
    top: usize,
    nodes: Vec<Node>,
    levels: Vec<Vec<NodeId>>,
    /// `ancestors[p * (top + 1) + i]` is the level-`i` ancestor of `(p, 0)`.
    ancestors: Vec<NodeId>,
    /// `lookup[i * n + p]` is the node of point `p` at level `i`, if any.
    lookup: Vec<u32>,
    leaf_order: Vec<PointId>,
}

const NO_NODE: u32 = u32::MAX;

impl NetTree {
    pub fn build(m: &Metric) -> NetTree {
        let n = m.len();
        let top = if n < 2 { 0 } else { ceil_log5(m.diameter()) };
        let mut nets: Vec<Vec<PointId>> = vec![(0..n).collect()];
        for i in 1..=top {
            let r = radius(i);
            let prev = &nets[i - 1];
            let mut net: Vec<PointId> = Vec::new();
            for &p in prev {
                if net.iter().all(|&q| m.dist(p, q) > r) {
                    net.push(p);
                }
            }
            nets.push(net);
        }
        debug_assert!(n == 0 || nets[top].len() == 1);

        let mut nodes = Vec::new();
        let mut levels = Vec::with_capacity(top + 1);
        let mut lookup = vec![NO_NODE; (top + 1) * n];
        for (i, net) in nets.iter().enumerate() {
            let mut ids = Vec::with_capacity(net.len());
            for &p in net {
                let id = NodeId(nodes.len() as u32);
                lookup[i * n + p] = id.0;
                nodes.push(Node {
                    point: p,
                    level: i,
                    parent: None,
                    children: Vec::new(),
                    leaf_start: 0,
                    leaf_end: 0,
                });
                ids.push(id);
            }
            levels.push(ids);
        }
        for i in 0..top {
            let upper = &nets[i + 1];
            for &child in &levels[i] {
                let p = nodes[child.idx()].point;
                let mut best = upper[0];
                let mut best_d = m.dist(p, best);
                for &q in &upper[1..] {
                    let d = m.dist(p, q);
                    if d < best_d || (d == best_d && q < best) {
                        best = q;
                        best_d = d;
                    }
                }
                let parent = NodeId(lookup[(i + 1) * n + best]);
                nodes[child.idx()].parent = Some(parent);
                nodes[parent.idx()].children.push(child);
            }
        }

        let mut tree = NetTree {
            n,
            top,
            nodes,
            levels,
            ancestors: Vec::new(),
            lookup,
            leaf_order: Vec::with_capacity(n),
        };
        if n > 0 {
            tree.assign_leaf_ranges();
            tree.fill_ancestors();
        }
        tree
    }

    fn assign_leaf_ranges(&mut self) {
        // iterative DFS; children are already in ascending point order
        let root = self.levels[self.top][0];
        let mut stack = vec![(root, false)];
        while let Some((x, expanded)) = stack.pop() {
            if expanded {
                let node = &self.nodes[x.idx()];
                let end = match node.children.last() {
                    Some(c) => self.nodes[c.idx()].leaf_end,
                    None => node.leaf_start + 1,
                };
                self.nodes[x.idx()].leaf_end = end;
                continue;
            }
            let start = self.leaf_order.len() as u32;
            self.nodes[x.idx()].leaf_start = start;
            if self.nodes[x.idx()].level == 0 {
                self.leaf_order.push(self.nodes[x.idx()].point);
                self.nodes[x.idx()].leaf_end = start + 1;
                continue;
            }
            stack.push((x, true));
            for &c in self.nodes[x.idx()].children.iter().rev() {
                stack.push((c, false));
            }
        }
    }

    fn fill_ancestors(&mut self) {
        let width = self.top + 1;
        self.ancestors = vec![NodeId(0); self.n * width];
        for p in 0..self.n {
            let mut x = NodeId(self.lookup[p]);
            for i in 0..width {
                self.ancestors[p * width + i] = x;
                if let Some(up) = self.nodes[x.idx()].parent {
                    x = up;
                }
            }
        }
    }

    pub fn point_count(&self) -> usize {
        self.n
    }

    /// Top level ζ.
    pub fn top(&self) -> usize {
        self.top
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn node(&self, x: NodeId) -> &Node {
        &self.nodes[x.idx()]
    }

    pub fn point(&self, x: NodeId) -> PointId {
        self.nodes[x.idx()].point
    }

    pub fn level(&self, x: NodeId) -> usize {
        self.nodes[x.idx()].level
    }

    pub fn parent(&self, x: NodeId) -> Option<NodeId> {
        self.nodes[x.idx()].parent
    }

    pub fn children(&self, x: NodeId) -> &[NodeId] {
        &self.nodes[x.idx()].children
    }

    pub fn root(&self) -> Option<NodeId> {
        self.levels.get(self.top).and_then(|l| l.first().copied())
    }

    /// Nodes of level `i` by ascending point id.
    pub fn level_nodes(&self, i: usize) -> &[NodeId] {
        &self.levels[i]
    }

    /// Point set of the net `N_i`.
    pub fn net(&self, i: usize) -> Vec<PointId> {
        self.levels[i].iter().map(|&x| self.point(x)).collect()
    }

    pub fn node_at(&self, p: PointId, level: usize) -> Option<NodeId> {
        if level > self.top || p >= self.n {
            return None;
        }
        match self.lookup[level * self.n + p] {
            NO_NODE => None,
            id => Some(NodeId(id)),
        }
    }

    /// The level-`level` ancestor of the leaf `(p, 0)`.
    #[inline]
    pub fn point_ancestor(&self, p: PointId, level: usize) -> NodeId {
        self.ancestors[p * (self.top + 1) + level]
    }

    /// Ancestor of `x` at `level >= lvl(x)`.
    pub fn ancestor(&self, x: NodeId, level: usize) -> NodeId {
        debug_assert!(level >= self.level(x) && level <= self.top);
        self.point_ancestor(self.point(x), level)
    }

    /// Leaves of `T(x)` in DFS order.
    pub fn leaves(&self, x: NodeId) -> &[PointId] {
        let node = &self.nodes[x.idx()];
        &self.leaf_order[node.leaf_start as usize..node.leaf_end as usize]
    }

    pub fn leaf_count(&self, x: NodeId) -> usize {
        let node = &self.nodes[x.idx()];
        (node.leaf_end - node.leaf_start) as usize
    }

    /// Whether `y` lies in the subtree of `x` (including `x` itself).
    pub fn is_descendant(&self, y: NodeId, x: NodeId) -> bool {
        let (a, b) = (&self.nodes[x.idx()], &self.nodes[y.idx()]);
        b.level <= a.level && a.leaf_start <= b.leaf_start && b.leaf_end <= a.leaf_end
    }

    /// Descendants of `x` at level `j <= lvl(x)`, ascending point id.
    pub fn descendants_at(&self, x: NodeId, j: usize) -> Vec<NodeId> {
        let mut frontier = vec![x];
        for _ in j..self.level(x) {
            frontier = frontier
                .iter()
                .flat_map(|&y| self.children(y).iter().copied())
                .collect();
        }
        frontier.sort_by_key(|&y| self.point(y));
        frontier
    }

    /// One line per node: `level point parent-point` (`-` for the root).
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (i, level) in self.levels.iter().enumerate() {
            for &x in level {
                match self.parent(x) {
                    Some(p) => writeln!(out, "{i} {} {}", self.point(x), self.point(p)),
                    None => writeln!(out, "{i} {} -", self.point(x)),
                }
                .expect("writing to a String");
            }
        }
        out
    }
}

/// A same-level node pair within `lambda * r_i`; `x` has the smaller point id.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CrossEdge {
    pub x: NodeId,
    pub y: NodeId,
    pub level: usize,
}

impl CrossEdge {
    pub fn new(t: &NetTree, a: NodeId, b: NodeId) -> Self {
        let (x, y) = if t.point(a) <= t.point(b) { (a, b) } else { (b, a) };
        CrossEdge {
            x,
            y,
            level: t.level(x),
        }
    }

    pub fn points(&self, t: &NetTree) -> (PointId, PointId) {
        (t.point(self.x), t.point(self.y))
    }

    pub fn weight(&self, t: &NetTree, m: &Metric) -> f64 {
        m.dist(t.point(self.x), t.point(self.y))
    }
}

/// Precomputed cross neighbors `NC(x)` for one value of `lambda`.
#[derive(Clone, Debug)]
pub struct CrossNeighbors {
    lambda: f64,
    /// Per node, the cross neighbors by ascending point id (self excluded).
    lists: Vec<Vec<NodeId>>,
}

impl CrossNeighbors {
    pub fn new(t: &NetTree, m: &Metric, lambda: f64) -> Self {
        let mut lists = vec![Vec::new(); t.node_count()];
        let mut level = 0;
        while level <= t.top() && t.point_count() > 0 {
            // levels sharing one net reuse a single pairwise scan
            let mut end = level;
            while end < t.top() && t.level_nodes(end + 1).len() == t.level_nodes(level).len() {
                end += 1;
            }
            let nodes = t.level_nodes(level);
            let reach = lambda * radius(end);
            let mut near: Vec<Vec<(usize, f64)>> = vec![Vec::new(); nodes.len()];
            for a in 0..nodes.len() {
                for b in a + 1..nodes.len() {
                    let d = m.dist(t.point(nodes[a]), t.point(nodes[b]));
                    if d <= reach {
                        near[a].push((b, d));
                        near[b].push((a, d));
                    }
                }
            }
            for i in level..=end {
                let here = t.level_nodes(i);
                let limit = lambda * radius(i);
                for (a, cand) in near.iter().enumerate() {
                    let mut list: Vec<NodeId> = cand
                        .iter()
                        .filter(|&&(_, d)| d <= limit)
                        .map(|&(b, _)| here[b])
                        .collect();
                    list.sort_unstable_by_key(|&y| t.point(y));
                    lists[here[a].idx()] = list;
                }
            }
            level = end + 1;
        }
        CrossNeighbors { lambda, lists }
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// `NC(x)`.
    pub fn of(&self, x: NodeId) -> &[NodeId] {
        &self.lists[x.idx()]
    }

    /// `NC[x] = NC(x) ∪ {x}`, ascending point id.
    pub fn closed(&self, t: &NetTree, x: NodeId) -> Vec<NodeId> {
        let mut v = self.lists[x.idx()].clone();
        let pos = v.partition_point(|&y| t.point(y) < t.point(x));
        v.insert(pos, x);
        v
    }

    pub fn is_cross(&self, t: &NetTree, m: &Metric, a: NodeId, b: NodeId) -> bool {
        a != b && t.level(a) == t.level(b) && m.dist(t.point(a), t.point(b)) <= self.lambda * radius(t.level(a))
    }

    /// `Cross(A)`: all cross edges among a same-level node set.
    pub fn cross_set(&self, t: &NetTree, m: &Metric, set: &[NodeId]) -> Result<BTreeSet<CrossEdge>> {
        let mut out = BTreeSet::new();
        if let Some(&first) = set.first() {
            let lvl = t.level(first);
            if let Some(&bad) = set.iter().find(|&&y| t.level(y) != lvl) {
                return Err(Error::MixedLevels(lvl, t.level(bad)));
            }
        }
        for (i, &a) in set.iter().enumerate() {
            for &b in &set[i + 1..] {
                if self.is_cross(t, m, a, b) {
                    out.insert(CrossEdge::new(t, a, b));
                }
            }
        }
        Ok(out)
    }

    /// `Aug_j(x)` for a single level `j`.
    pub fn aug_level(&self, t: &NetTree, m: &Metric, x: NodeId, j: usize) -> BTreeSet<CrossEdge> {
        let ix = t.level(x);
        let anchors = if j < ix {
            t.descendants_at(x, j)
        } else {
            vec![t.ancestor(x, j.min(t.top()))]
        };
        let mut out = BTreeSet::new();
        for y in anchors {
            let closed = self.closed(t, y);
            out.extend(self.cross_set(t, m, &closed).expect("NC[y] is single-level"));
        }
        out
    }

    /// `Aug(x, l, h)`: union of `Aug_j(x)` for `j` in `[lvl(x)+l, lvl(x)+h]`,
    /// restricted to the levels of the tree.
    pub fn aug(&self, t: &NetTree, m: &Metric, x: NodeId, l: i64, h: i64) -> BTreeSet<CrossEdge> {
        let ix = t.level(x) as i64;
        let lo = (ix + l).max(0);
        let hi = (ix + h).min(t.top() as i64);
        let mut out = BTreeSet::new();
        for j in lo..=hi {
            out.extend(self.aug_level(t, m, x, j as usize));
        }
        out
    }

    /// Lowest-level ancestor pair of `(u,0)` and `(v,0)` that forms a cross
    /// edge.
    pub fn original_cross_edge(&self, t: &NetTree, m: &Metric, u: PointId, v: PointId) -> Result<CrossEdge> {
        if u == v {
            return Err(Error::SamePoint(u));
        }
        if u >= t.point_count() || v >= t.point_count() {
            return Err(Error::InvalidPoint(u.max(v)));
        }
        for i in 0..=t.top() {
            let (a, b) = (t.point_ancestor(u, i), t.point_ancestor(v, i));
            debug_assert!(a != b, "ancestors merged before forming a cross edge");
            if m.dist(t.point(a), t.point(b)) <= self.lambda * radius(i) {
                return Ok(CrossEdge::new(t, a, b));
            }
        }
        unreachable!("distinct siblings are always cross neighbors since lambda >= 10")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn three_points() -> (Metric, NetTree) {
        let m = Metric::from_line(&[0.0, 64.0, 640.0]).unwrap().normalize().unwrap();
        let t = NetTree::build(&m);
        (m, t)
    }

    /// Independent oracle: the greedy net definition applied level by level.
    fn oracle_nets(m: &Metric, top: usize) -> Vec<Vec<PointId>> {
        let mut nets = vec![(0..m.len()).collect::<Vec<_>>()];
        for i in 1..=top {
            let r = 5f64.powi(i as i32);
            let mut net: Vec<PointId> = Vec::new();
            for &p in &nets[i - 1] {
                if !net.iter().any(|&q| m.dist(p, q) <= r) {
                    net.push(p);
                }
            }
            nets.push(net);
        }
        nets
    }

    #[test]
    fn three_point_nets() {
        let (m, t) = three_points();
        assert_eq!(t.top(), 5);
        let nets: Vec<_> = (0..=5).map(|i| t.net(i)).collect();
        assert_eq!(nets, oracle_nets(&m, 5));
        assert_eq!(nets[0], vec![0, 1, 2]);
        assert_eq!(nets[2], vec![0, 1, 2]);
        assert_eq!(nets[3], vec![0, 2]);
        assert_eq!(nets[4], vec![0, 2]);
        assert_eq!(nets[5], vec![0]);
        let x = t.node_at(1, 2).unwrap();
        assert_eq!(t.point(t.parent(x).unwrap()), 0);
        assert_eq!(t.level(t.parent(x).unwrap()), 3);
        assert_eq!(t.leaves(t.root().unwrap()).len(), 3);
    }

    #[test]
    fn single_point_and_pair() {
        let m = Metric::from_line(&[7.0]).unwrap().normalize().unwrap();
        let t = NetTree::build(&m);
        assert_eq!(t.top(), 0);
        assert_eq!(t.node_count(), 1);
        assert_eq!(t.leaves(t.root().unwrap()), &[0]);

        let m = Metric::from_line(&[0.0, 64.0]).unwrap();
        let t = NetTree::build(&m);
        let first_merge = (0..=t.top()).find(|&i| t.net(i).len() == 1).unwrap();
        assert_eq!(first_merge, 3);
        assert_eq!(oracle_nets(&m, t.top())[3], vec![0]);
    }

    #[test]
    fn cross_neighbors_and_sets() {
        let (m, t) = three_points();
        let nc = CrossNeighbors::new(&t, &m, 100.0);
        let x = t.node_at(1, 0).unwrap();
        assert_eq!(nc.of(x), &[t.node_at(0, 0).unwrap()]);

        let tiny = CrossNeighbors::new(&t, &m, 10.0);
        assert!(tiny.of(x).is_empty());

        let a = [t.node_at(0, 0).unwrap(), t.node_at(1, 0).unwrap()];
        let cs = nc.cross_set(&t, &m, &a).unwrap();
        assert_eq!(cs.len(), 1);
        assert_eq!(cs.iter().next().unwrap().points(&t), (0, 1));
        assert!(nc.cross_set(&t, &m, &a[..1]).unwrap().is_empty());
        let mixed = [t.node_at(0, 0).unwrap(), t.node_at(0, 3).unwrap()];
        assert!(matches!(nc.cross_set(&t, &m, &mixed), Err(Error::MixedLevels(..))));

        let wide = CrossNeighbors::new(&t, &m, 1000.0);
        let all0: Vec<_> = t.level_nodes(0).to_vec();
        assert_eq!(wide.cross_set(&t, &m, &all0).unwrap().len(), 3);
    }

    #[test]
    fn aug_examples() {
        let (m, t) = three_points();
        let nc = CrossNeighbors::new(&t, &m, 100.0);
        let x = t.node_at(1, 0).unwrap();
        let aug = nc.aug(&t, &m, x, 0, 0);
        assert_eq!(aug.len(), 1);
        assert_eq!(aug.iter().next().unwrap().points(&t), (0, 1));

        let root = t.root().unwrap();
        let huge = CrossNeighbors::new(&t, &m, 1e6);
        assert!(huge.aug(&t, &m, root, 0, 0).is_empty());
        // below level 0 nothing exists
        assert_eq!(nc.aug(&t, &m, x, -3, 0), nc.aug(&t, &m, x, 0, 0));
    }

    #[test]
    fn original_cross_edges() {
        let (m, t) = three_points();
        let nc = CrossNeighbors::new(&t, &m, 100.0);
        let e = nc.original_cross_edge(&t, &m, 0, 1).unwrap();
        assert_eq!((e.points(&t), e.level), ((0, 1), 0));
        let e = nc.original_cross_edge(&t, &m, 1, 2).unwrap();
        assert_eq!((e.points(&t), e.level), ((1, 2), 2));
        assert!(nc.original_cross_edge(&t, &m, 2, 2).is_err());

        let big = CrossNeighbors::new(&t, &m, 640.0);
        assert_eq!(big.original_cross_edge(&t, &m, 0, 2).unwrap().level, 0);
    }

    #[test]
    fn dump_format() {
        let (_, t) = three_points();
        let dump = t.dump();
        assert!(dump.starts_with("0 0 0\n0 1 1\n0 2 2\n"));
        assert!(dump.ends_with("5 0 -\n"));
        assert!(dump.contains("2 1 0\n"));
    }
}
