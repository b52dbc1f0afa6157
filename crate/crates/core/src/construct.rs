//! The fault-tolerant construction: cross-edge collection guided by a light
//! spanner, then a bottom-up sweep that connects surrogate sets.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baseline::{light_spanner, mst, ordered, WeightedGraph};
use crate::error::{Error, Result};
use crate::metric::{Metric, PointId};
use crate::net_tree::{ceil_log5, radius, CrossEdge, CrossNeighbors, NetTree, NodeId};
use crate::surrogate::{ball_points, classify, Counters, PointClass, Selector};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    Faithful,
    #[default]
    Practical,
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Profile::Faithful => "faithful",
            Profile::Practical => "practical",
        })
    }
}

impl FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "faithful" => Ok(Profile::Faithful),
            "practical" => Ok(Profile::Practical),
            other => Err(Error::InvalidConfig(format!("unknown profile '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Config {
    pub eps: f64,
    pub faults: usize,
    /// `kappa` in the practical reach `max(320, ceil(kappa (1 + 1/eps)))`.
    pub lambda_kappa: f64,
    pub xi: f64,
    /// SSList capacity constant `c` (lists hold at most `c f` points).
    pub ss_capacity: f64,
    pub profile: Profile,
    /// Replaces the resolved reach (library use; the profile still picks
    /// the remaining constants).
    #[serde(default)]
    pub lambda_override: Option<f64>,
    pub fast_pools: bool,
    pub seed: u64,
    /// Re-derive every surrogate choice by ball scans and count violations.
    pub check_selects: bool,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            eps: 0.1,
            faults: 1,
            lambda_kappa: 8.0,
            xi: 16.0,
            ss_capacity: 32.0,
            profile: Profile::Practical,
            lambda_override: None,
            fast_pools: false,
            seed: 0,
            check_selects: false,
        }
    }
}

impl Config {
    pub fn new(eps: f64, faults: usize) -> Self {
        Config {
            eps,
            faults,
            ..Config::default()
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if !(self.eps > 0.0 && self.eps < 0.5) {
            return Err(Error::InvalidConfig(format!(
                "eps must lie in (0, 1/2), got {}",
                self.eps
            )));
        }
        if self.faults == 0 {
            return Err(Error::InvalidConfig("faults must be at least 1".into()));
        }
        if self.profile == Profile::Faithful && n >= 2 && self.faults + 2 > n {
            return Err(Error::InvalidConfig(format!(
                "faithful profile needs faults <= n - 2 (n = {n}, faults = {})",
                self.faults
            )));
        }
        if let Some(l) = self.lambda_override {
            if !(l.is_finite() && l >= 64.0) {
                return Err(Error::InvalidConfig(format!("lambda must be at least 64, got {l}")));
            }
        }
        for (name, v) in [
            ("lambda-kappa", self.lambda_kappa),
            ("xi", self.xi),
            ("ssc", self.ss_capacity),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidConfig(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// Smallest practical reach: with `lambda >= 64 * 5` every distance scale is
/// long at one level and short enough at the level below.
pub const PRACTICAL_MIN_LAMBDA: f64 = 320.0;

/// Constants resolved from a [`Config`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    pub lambda: f64,
    pub log_lambda: usize,
    /// Level window `5 ceil(log5 lambda)`.
    pub window: usize,
    pub xi: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub ssc: f64,
}

impl Constants {
    pub fn resolve(cfg: &Config) -> Self {
        let lambda = match (cfg.lambda_override, cfg.profile) {
            (Some(l), _) => l,
            (None, Profile::Faithful) => 5f64.powi(20) * (1.0 + 1.0 / cfg.eps),
            (None, Profile::Practical) => (cfg.lambda_kappa * (1.0 + 1.0 / cfg.eps))
                .ceil()
                .max(PRACTICAL_MIN_LAMBDA),
        };
        let log_lambda = ceil_log5(lambda);
        let base = log_lambda as f64 * cfg.xi;
        Constants {
            lambda,
            log_lambda,
            window: 5 * log_lambda,
            xi: cfg.xi,
            c1: 50.0 * base,
            c2: 51.0 * base,
            c3: 55.0 * base,
            ssc: cfg.ss_capacity,
        }
    }

    pub fn ss_capacity(&self, f: usize) -> usize {
        (self.ssc * f as f64).ceil() as usize
    }

    /// The degree bound `2 c3 f`.
    pub fn degree_bound(&self, f: usize) -> f64 {
        2.0 * self.c3 * f as f64
    }
}

/// Shared read-only inputs of one build.
pub struct Ctx<'a> {
    pub metric: &'a Metric,
    pub tree: &'a NetTree,
    pub nc: &'a CrossNeighbors,
    pub consts: &'a Constants,
    pub f: usize,
    pub profile: Profile,
}

/// Why a cross edge entered `E*`, highest priority first.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Original,
    AugOfOriginal,
    IncompleteNc,
}

/// Class of an edge of `H`, highest priority first.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeClass {
    Original,
    Incomplete,
    Complete,
}

/// `E*` split by level, one provenance per edge.
#[derive(Clone, Debug, Default)]
pub struct CrossEdgeStore {
    levels: Vec<BTreeMap<(NodeId, NodeId), Provenance>>,
}

impl CrossEdgeStore {
    pub fn new(top: usize) -> Self {
        CrossEdgeStore {
            levels: vec![BTreeMap::new(); top + 1],
        }
    }

    /// Inserts `e`, keeping the higher-priority provenance on collision.
    pub fn insert(&mut self, e: CrossEdge, prov: Provenance) -> bool {
        let slot = self.levels[e.level].entry((e.x, e.y)).or_insert(prov);
        let fresh = *slot == prov;
        *slot = (*slot).min(prov);
        fresh
    }

    pub fn provenance(&self, e: &CrossEdge) -> Option<Provenance> {
        self.levels.get(e.level)?.get(&(e.x, e.y)).copied()
    }

    pub fn len(&self) -> usize {
        self.levels.iter().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn count(&self, prov: Provenance) -> usize {
        self.levels
            .iter()
            .flat_map(|l| l.values())
            .filter(|&&p| p == prov)
            .count()
    }

    pub fn edges(&self) -> impl Iterator<Item = (CrossEdge, Provenance)> + '_ {
        self.levels
            .iter()
            .enumerate()
            .flat_map(|(i, l)| l.iter().map(move |(&(x, y), &p)| (CrossEdge { x, y, level: i }, p)))
    }

    /// `E*_i` in processing order: ascending `(delta, x-point, y-point)`.
    pub fn level_sorted(&self, t: &NetTree, m: &Metric, level: usize) -> Vec<(CrossEdge, Provenance)> {
        let mut v: Vec<(CrossEdge, Provenance, f64)> = self.levels[level]
            .iter()
            .map(|(&(x, y), &p)| {
                let e = CrossEdge { x, y, level };
                (e, p, e.weight(t, m))
            })
            .collect();
        v.sort_by(|a, b| a.2.total_cmp(&b.2).then_with(|| a.0.points(t).cmp(&b.0.points(t))));
        v.into_iter().map(|(e, p, _)| (e, p)).collect()
    }

    pub fn level_len(&self, level: usize) -> usize {
        self.levels.get(level).map_or(0, BTreeMap::len)
    }
}

/// Mutable per-point and per-node marks of the sweep.
#[derive(Clone, Debug)]
pub struct ConstructionState {
    pub degree: Vec<usize>,
    pub saturated: Vec<bool>,
    pub small: Vec<Option<bool>>,
    pub incomplete: Vec<Option<bool>>,
    /// Highest level of an incomplete node in `T(x)`.
    pub highest_incomplete: Vec<Option<usize>>,
    pub surrogates: Vec<Option<Vec<PointId>>>,
    pub level: usize,
}

impl ConstructionState {
    pub fn new(n: usize, nodes: usize) -> Self {
        ConstructionState {
            degree: vec![0; n],
            saturated: vec![false; n],
            small: vec![None; nodes],
            incomplete: vec![None; nodes],
            highest_incomplete: vec![None; nodes],
            surrogates: vec![None; nodes],
            level: 0,
        }
    }

    pub fn is_complete(&self, x: NodeId) -> Option<bool> {
        self.incomplete[x.idx()].map(|b| !b)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeMeta {
    pub level: usize,
    pub class: EdgeClass,
}

/// The spanner `H` with per-edge level and class.
#[derive(Clone, Debug)]
pub struct SpannerGraph {
    pub graph: WeightedGraph,
    meta: BTreeMap<(PointId, PointId), EdgeMeta>,
}

impl SpannerGraph {
    fn new(n: usize) -> Self {
        SpannerGraph {
            graph: WeightedGraph::new(n),
            meta: BTreeMap::new(),
        }
    }

    /// Adds `(u, v)` or upgrades its class; returns whether the edge is new.
    fn add(&mut self, m: &Metric, u: PointId, v: PointId, level: usize, class: EdgeClass) -> bool {
        let key = ordered(u, v);
        if let Some(meta) = self.meta.get_mut(&key) {
            meta.class = meta.class.min(class);
            return false;
        }
        self.graph.add_edge(u, v, m.dist(u, v));
        self.meta.insert(key, EdgeMeta { level, class });
        true
    }

    pub fn meta(&self, u: PointId, v: PointId) -> Option<EdgeMeta> {
        self.meta.get(&ordered(u, v)).copied()
    }

    pub fn edges_with_meta(&self) -> impl Iterator<Item = ((PointId, PointId), EdgeMeta)> + '_ {
        self.meta.iter().map(|(&k, &v)| (k, v))
    }
}

/// Everything a build produces.
pub struct Build {
    pub metric: Metric,
    pub config: Config,
    pub consts: Constants,
    pub tree: NetTree,
    pub nc: CrossNeighbors,
    pub guide: WeightedGraph,
    pub estar: CrossEdgeStore,
    pub spanner: SpannerGraph,
    pub state: ConstructionState,
    pub report: BuildReport,
    pub pools: Option<crate::surrogate::FastPools>,
}

impl Build {
    pub fn ctx(&self) -> Ctx<'_> {
        Ctx {
            metric: &self.metric,
            tree: &self.tree,
            nc: &self.nc,
            consts: &self.consts,
            f: self.config.faults,
            profile: self.config.profile,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ProvenanceCounts {
    pub original: usize,
    pub aug_of_original: usize,
    pub incomplete_nc: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassTotals {
    pub e_o: f64,
    pub e_inc: f64,
    pub e_com: f64,
    pub count_o: usize,
    pub count_inc: usize,
    pub count_com: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LevelStats {
    pub level: usize,
    pub nodes: usize,
    pub cross_edges: usize,
    pub original: usize,
    pub aug_of_original: usize,
    pub incomplete_nc: usize,
    pub spanner_edges: usize,
    pub small_nodes: usize,
    pub incomplete_nodes: usize,
    pub saturated_points: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Warnings {
    pub incomplete_surrogates: u64,
    pub ss_overflows: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectChecks {
    pub checked: u64,
    pub outside_radius: u64,
    pub saturated_chosen: u64,
    pub priority_violations: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BuildReport {
    pub n: usize,
    pub f: usize,
    pub eps: f64,
    pub profile: Profile,
    pub fast_pools: bool,
    pub lambda: f64,
    pub xi: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub ssc: f64,
    pub top_level: usize,
    pub scale_factor: f64,
    pub guide_edges: usize,
    pub guide_weight: f64,
    pub cross_edges: usize,
    pub provenance: ProvenanceCounts,
    pub edges: usize,
    pub max_degree: usize,
    pub weight: f64,
    pub mst_weight: f64,
    pub lightness: f64,
    pub classes: ClassTotals,
    pub levels: Vec<LevelStats>,
    pub counters: Counters,
    pub warnings: Warnings,
    pub select_checks: SelectChecks,
}

impl BuildReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}

/// Marks every node of `set` active and returns, level by level, the long
/// cross edges `(y, z)` (`64 r_i <= delta <= lambda r_i`) that lie inside
/// `NC[a]` for some active `a`.
fn long_pairs_under(ctx: &Ctx<'_>, level: usize, active: &[bool]) -> Vec<CrossEdge> {
    let t = ctx.tree;
    let m = ctx.metric;
    let r = radius(level);
    let reach = ctx.nc.lambda() * r;
    let mut out = Vec::new();
    for &y in t.level_nodes(level) {
        let py = t.point(y);
        let near: Vec<NodeId> = std::iter::once(y)
            .chain(ctx.nc.of(y).iter().copied())
            .filter(|a| active[a.idx()])
            .collect();
        if near.is_empty() {
            continue;
        }
        for &z in ctx.nc.of(y) {
            let pz = t.point(z);
            if pz < py {
                continue;
            }
            let d = m.dist(py, pz);
            if d < 64.0 * r {
                continue;
            }
            let covered = active[y.idx()] || active[z.idx()] || near.iter().any(|&a| m.dist(t.point(a), pz) <= reach);
            if covered {
                out.push(CrossEdge::new(t, y, z));
            }
        }
    }
    out
}

/// Phase 1: original cross edges of `G` plus the long edges of their
/// augmented sets.
pub fn phase1_collect(ctx: &Ctx<'_>, guide: &WeightedGraph) -> Result<CrossEdgeStore> {
    let t = ctx.tree;
    let mut store = CrossEdgeStore::new(t.top());
    if t.point_count() < 2 {
        return Ok(store);
    }
    let mut active = vec![false; t.node_count()];
    let mut keys = guide.sorted_keys();
    keys.dedup();
    for (u, v) in keys {
        let e = ctx.nc.original_cross_edge(t, ctx.metric, u, v)?;
        store.insert(e, Provenance::Original);
        let hi = (e.level + ctx.consts.window).min(t.top());
        for j in e.level..=hi {
            active[t.ancestor(e.x, j).idx()] = true;
            active[t.ancestor(e.y, j).idx()] = true;
        }
    }
    for level in 0..=t.top() {
        for e in long_pairs_under(ctx, level, &active) {
            store.insert(e, Provenance::AugOfOriginal);
        }
    }
    Ok(store)
}

/// Literal phase 1 built from explicit `Aug` sets; quadratic per anchor.
pub fn phase1_reference(ctx: &Ctx<'_>, guide: &WeightedGraph) -> Result<CrossEdgeStore> {
    let t = ctx.tree;
    let m = ctx.metric;
    let mut store = CrossEdgeStore::new(t.top());
    let w = ctx.consts.window as i64;
    for (u, v) in guide.sorted_keys() {
        let e = ctx.nc.original_cross_edge(t, m, u, v)?;
        store.insert(e, Provenance::Original);
        let mut aug: BTreeSet<CrossEdge> = ctx.nc.aug(t, m, e.x, 0, w);
        aug.extend(ctx.nc.aug(t, m, e.y, 0, w));
        for a in aug {
            if a.weight(t, m) >= 64.0 * radius(a.level) {
                store.insert(a, Provenance::AugOfOriginal);
            }
        }
    }
    Ok(store)
}

/// Marks level-`i` nodes small/incomplete and adds the long edges of
/// `Cross(NC[x])` for every `x` with an incomplete node in its window.
pub fn mark_small_and_incomplete(
    ctx: &Ctx<'_>,
    state: &mut ConstructionState,
    store: &mut CrossEdgeStore,
    level: usize,
) {
    let t = ctx.tree;
    let c1f = ctx.consts.c1 * ctx.f as f64;
    let mut active = vec![false; t.node_count()];
    let mut any = false;
    for &x in t.level_nodes(level) {
        let small = t.leaves(x).iter().all(|&p| state.degree[p] as f64 <= c1f);
        let incomplete = small && t.leaf_count(x) <= ctx.f;
        state.small[x.idx()] = Some(small);
        state.incomplete[x.idx()] = Some(incomplete);
        let below = t
            .children(x)
            .iter()
            .filter_map(|c| state.highest_incomplete[c.idx()])
            .max();
        let h = if incomplete { Some(level) } else { below };
        state.highest_incomplete[x.idx()] = h;
        if h.is_some_and(|h| h + ctx.consts.window >= level) {
            active[x.idx()] = true;
            any = true;
        }
    }
    if any {
        for e in long_pairs_under(ctx, level, &active) {
            store.insert(e, Provenance::IncompleteNc);
        }
    }
}

/// `M(S(x), S(y))`: a perfect matching by rank when both sets are full,
/// the full product otherwise. Self pairs are dropped.
pub fn bipartite_connection(sx: &[PointId], sy: &[PointId], f: usize) -> Result<Vec<(PointId, PointId)>> {
    if sx.is_empty() || sy.is_empty() {
        return Err(Error::EmptySurrogateSet);
    }
    let mut out = Vec::new();
    if sx.len().min(sy.len()) < f + 1 {
        for &a in sx {
            for &b in sy {
                if a != b {
                    out.push((a, b));
                }
            }
        }
    } else {
        let mut a: Vec<PointId> = sx.to_vec();
        let mut b: Vec<PointId> = sy.to_vec();
        a.sort_unstable();
        b.sort_unstable();
        for (&p, &q) in a.iter().zip(&b) {
            if p != q {
                out.push((p, q));
            }
        }
    }
    Ok(out)
}

/// Full construction.
pub fn build_ft_spanner(metric: Metric, cfg: &Config) -> Result<Build> {
    let metric = metric.normalize()?;
    cfg.validate(metric.len())?;
    let n = metric.len();
    let consts = Constants::resolve(cfg);
    let guide = if n >= 2 {
        light_spanner(&metric, cfg.eps)?
    } else {
        WeightedGraph::new(n)
    };
    let tree = NetTree::build(&metric);
    let nc = CrossNeighbors::new(&tree, &metric, consts.lambda);
    let ctx = Ctx {
        metric: &metric,
        tree: &tree,
        nc: &nc,
        consts: &consts,
        f: cfg.faults,
        profile: cfg.profile,
    };
    let mut estar = phase1_collect(&ctx, &guide)?;
    let mut state = ConstructionState::new(n, tree.node_count());
    let mut spanner = SpannerGraph::new(n);
    let mut selector = Selector::new(&ctx, cfg.fast_pools && n >= 2);
    let mut warnings = Warnings::default();
    let mut checks = SelectChecks::default();
    let mut levels = Vec::new();
    let c2f = consts.c2 * cfg.faults as f64;
    let c3f = consts.c3 * cfg.faults as f64;

    for level in 0..=tree.top() {
        if n < 2 {
            break;
        }
        state.level = level;
        selector.begin_level(level);
        mark_small_and_incomplete(&ctx, &mut state, &mut estar, level);
        for p in 0..n {
            if !state.saturated[p] && state.degree[p] as f64 > c3f {
                state.saturated[p] = true;
            }
        }
        let mut stats = LevelStats {
            level,
            nodes: tree.level_nodes(level).len(),
            small_nodes: tree
                .level_nodes(level)
                .iter()
                .filter(|x| state.small[x.idx()] == Some(true))
                .count(),
            incomplete_nodes: tree
                .level_nodes(level)
                .iter()
                .filter(|x| state.incomplete[x.idx()] == Some(true))
                .count(),
            saturated_points: state.saturated.iter().filter(|&&s| s).count(),
            ..LevelStats::default()
        };
        let edges = estar.level_sorted(&tree, &metric, level);
        for (e, prov) in edges {
            match prov {
                Provenance::Original => stats.original += 1,
                Provenance::AugOfOriginal => stats.aug_of_original += 1,
                Provenance::IncompleteNc => stats.incomplete_nc += 1,
            }
            stats.cross_edges += 1;
            let mut sets = [Vec::new(), Vec::new()];
            for (k, x) in [e.x, e.y].into_iter().enumerate() {
                let s = selector.select(&ctx, &state, x);
                if state.incomplete[x.idx()] == Some(false) && s.len() < cfg.faults + 1 {
                    if cfg.profile == Profile::Faithful {
                        return Err(Error::IncompleteSurrogates {
                            point: tree.point(x),
                            level,
                            size: s.len(),
                        });
                    }
                    warnings.incomplete_surrogates += 1;
                }
                if cfg.check_selects {
                    check_select(&ctx, &state, x, &s, &mut checks);
                }
                state.surrogates[x.idx()] = Some(s.clone());
                sets[k] = s;
            }
            if sets[0].is_empty() || sets[1].is_empty() {
                continue;
            }
            let class = match prov {
                Provenance::Original | Provenance::AugOfOriginal => EdgeClass::Original,
                Provenance::IncompleteNc => {
                    if state.incomplete[e.x.idx()] == Some(false) && state.incomplete[e.y.idx()] == Some(false) {
                        EdgeClass::Complete
                    } else {
                        EdgeClass::Incomplete
                    }
                }
            };
            for (a, b) in bipartite_connection(&sets[0], &sets[1], cfg.faults)? {
                if spanner.add(&metric, a, b, level, class) {
                    stats.spanner_edges += 1;
                    for p in [a, b] {
                        state.degree[p] += 1;
                        let d = state.degree[p] as f64;
                        if d >= c2f && d - 1.0 < c2f {
                            selector.on_semi_saturated(&ctx, p, level).or_else(|err| match err {
                                Error::SsListOverflow { .. } if cfg.profile == Profile::Practical => Ok(()),
                                other => Err(other),
                            })?;
                        }
                    }
                }
            }
        }
        levels.push(stats);
    }
    warnings.ss_overflows = selector.counters.ss_overflows;

    let (_, mst_weight) = mst(&metric);
    let weight = spanner.graph.weight();
    let mut classes = ClassTotals::default();
    for ((u, v), meta) in spanner.edges_with_meta() {
        let w = metric.dist(u, v);
        match meta.class {
            EdgeClass::Original => {
                classes.e_o += w;
                classes.count_o += 1;
            }
            EdgeClass::Incomplete => {
                classes.e_inc += w;
                classes.count_inc += 1;
            }
            EdgeClass::Complete => {
                classes.e_com += w;
                classes.count_com += 1;
            }
        }
    }
    let report = BuildReport {
        n,
        f: cfg.faults,
        eps: cfg.eps,
        profile: cfg.profile,
        fast_pools: selector.is_fast(),
        lambda: consts.lambda,
        xi: consts.xi,
        c1: consts.c1,
        c2: consts.c2,
        c3: consts.c3,
        ssc: consts.ssc,
        top_level: tree.top(),
        scale_factor: metric.scale_factor(),
        guide_edges: guide.edge_count(),
        guide_weight: guide.weight(),
        cross_edges: estar.len(),
        provenance: ProvenanceCounts {
            original: estar.count(Provenance::Original),
            aug_of_original: estar.count(Provenance::AugOfOriginal),
            incomplete_nc: estar.count(Provenance::IncompleteNc),
        },
        edges: spanner.graph.edge_count(),
        max_degree: spanner.graph.max_degree(),
        weight,
        mst_weight,
        lightness: if mst_weight > 0.0 { weight / mst_weight } else { 0.0 },
        classes,
        levels,
        counters: selector.counters.clone(),
        warnings,
        select_checks: checks,
    };
    let pools = selector.into_pools();
    Ok(Build {
        metric,
        config: cfg.clone(),
        consts,
        tree,
        nc,
        guide,
        estar,
        spanner,
        state,
        report,
        pools,
    })
}

fn check_select(ctx: &Ctx<'_>, state: &ConstructionState, x: NodeId, s: &[PointId], checks: &mut SelectChecks) {
    let t = ctx.tree;
    let m = ctx.metric;
    let r = radius(t.level(x));
    let c2f = ctx.consts.c2 * ctx.f as f64;
    checks.checked += 1;
    for &p in s {
        if m.dist(t.point(x), p) > 16.0 * r {
            checks.outside_radius += 1;
        }
        if state.saturated[p] {
            checks.saturated_chosen += 1;
        }
    }
    if state.small[x.idx()] == Some(true) {
        return;
    }
    let uses_clean = s.iter().any(|&p| classify(state, p, c2f) == PointClass::Clean);
    if uses_clean {
        let mut scratch = 0;
        let missed = ball_points(ctx, x, 12.0 * r, &mut scratch)
            .into_iter()
            .any(|p| classify(state, p, c2f) == PointClass::SemiSaturated && !s.contains(&p));
        if missed {
            checks.priority_violations += 1;
        }
    }
}

/// The light net-forest: incomplete nodes and the roots of their subtrees.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Lnf {
    pub nodes: Vec<NodeId>,
    pub roots: Vec<NodeId>,
}

pub fn classify_lnf(t: &NetTree, state: &ConstructionState) -> Lnf {
    let mut lnf = Lnf::default();
    for level in 0..=t.top() {
        for &x in t.level_nodes(level) {
            if state.incomplete[x.idx()] != Some(true) {
                continue;
            }
            lnf.nodes.push(x);
            let parent_in = t.parent(x).is_some_and(|p| state.incomplete[p.idx()] == Some(true));
            if !parent_in {
                lnf.roots.push(x);
            }
        }
    }
    lnf
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen::{generate_metric, Distribution};
    use crate::verify::exhaustive_ft_check;
    use proptest::prelude::*;

    fn line_build(xs: &[f64], f: usize, lambda: Option<f64>) -> Build {
        let mut cfg = Config::new(0.1, f);
        cfg.lambda_override = lambda;
        build_ft_spanner(Metric::from_line(xs).unwrap(), &cfg).unwrap()
    }

    #[test]
    fn bipartite_matching_and_product() {
        assert_eq!(bipartite_connection(&[1, 2], &[3, 4], 1).unwrap(), vec![(1, 3), (2, 4)]);
        assert_eq!(bipartite_connection(&[4, 2], &[9, 3], 1).unwrap(), vec![(2, 3), (4, 9)]);
        assert_eq!(bipartite_connection(&[1], &[3, 4], 1).unwrap(), vec![(1, 3), (1, 4)]);
        assert_eq!(
            bipartite_connection(&[1, 2], &[2, 3], 2).unwrap(),
            vec![(1, 2), (1, 3), (2, 3)]
        );
        assert_eq!(bipartite_connection(&[5, 6], &[5, 7], 1).unwrap(), vec![(6, 7)]);
        assert!(matches!(
            bipartite_connection(&[], &[1], 1),
            Err(Error::EmptySurrogateSet)
        ));
    }

    #[test]
    fn tiny_inputs() {
        let b = build_ft_spanner(Metric::from_line(&[3.0]).unwrap(), &Config::default()).unwrap();
        assert_eq!(b.spanner.graph.edge_count(), 0);
        let b = line_build(&[0.0, 1.0], 1, None);
        assert_eq!(b.spanner.graph.sorted_keys(), vec![(0, 1)]);
    }

    #[test]
    fn reach_100_leaves_outer_pair_uncovered() {
        let b = line_build(&[0.0, 64.0, 128.0], 1, Some(100.0));
        assert_eq!(b.spanner.graph.sorted_keys(), vec![(0, 1), (1, 2)]);
        let v = exhaustive_ft_check(&b.spanner.graph, &b.metric, 0.1, 1).unwrap();
        assert!(!v.pass);
        assert_eq!(v.worst.faults, vec![1]);

        let b = line_build(&[0.0, 64.0, 128.0], 1, None);
        assert_eq!(b.spanner.graph.edge_count(), 3);
        assert!(exhaustive_ft_check(&b.spanner.graph, &b.metric, 0.1, 1).unwrap().pass);
    }

    #[test]
    fn three_point_phase1() {
        let b = line_build(&[0.0, 64.0, 640.0], 1, Some(100.0));
        let t = &b.tree;
        let orig: Vec<((PointId, PointId), usize)> = b
            .estar
            .edges()
            .filter(|(_, p)| *p == Provenance::Original)
            .map(|(e, _)| (e.points(t), e.level))
            .collect();
        assert_eq!(orig, vec![((0, 1), 0), ((1, 2), 2)]);
        assert_eq!(
            b.estar
                .provenance(&CrossEdge::new(t, t.node_at(0, 0).unwrap(), t.node_at(1, 0).unwrap())),
            Some(Provenance::Original)
        );
    }

    #[test]
    fn store_keeps_highest_priority() {
        let b = line_build(&[0.0, 64.0, 640.0], 1, Some(100.0));
        let t = &b.tree;
        let e = CrossEdge::new(t, t.node_at(0, 0).unwrap(), t.node_at(1, 0).unwrap());
        let mut s = CrossEdgeStore::new(t.top());
        assert!(s.insert(e, Provenance::IncompleteNc));
        assert!(!s.insert(e, Provenance::Original));
        assert!(!s.insert(e, Provenance::AugOfOriginal));
        assert_eq!(s.provenance(&e), Some(Provenance::Original));
        assert_eq!((s.len(), s.level_len(0)), (1, 1));
    }

    #[test]
    fn level_zero_is_all_incomplete_for_f_at_least_one() {
        let m = generate_metric(30, 2, Distribution::Uniform, 4).unwrap();
        let b = build_ft_spanner(m, &Config::new(0.1, 1)).unwrap();
        for &x in b.tree.level_nodes(0) {
            assert_eq!(b.state.small[x.idx()], Some(true));
            assert_eq!(b.state.incomplete[x.idx()], Some(true));
        }
        let t = &b.tree;
        for &x in t.level_nodes(0) {
            for &y in b.nc.of(x) {
                let e = CrossEdge::new(t, x, y);
                if e.weight(t, &b.metric) >= 64.0 {
                    assert!(b.estar.provenance(&e).is_some());
                }
            }
        }
    }

    #[test]
    fn lnf_is_downward_closed_with_antichain_roots() {
        let m = generate_metric(200, 2, Distribution::Clustered, 8).unwrap();
        let b = build_ft_spanner(m, &Config::new(0.1, 3)).unwrap();
        let t = &b.tree;
        let lnf = classify_lnf(t, &b.state);
        let inside: BTreeSet<NodeId> = lnf.nodes.iter().copied().collect();
        for &x in &lnf.nodes {
            assert!(t.children(x).iter().all(|c| inside.contains(c)));
        }
        for &a in &lnf.roots {
            for &c in &lnf.roots {
                assert!(a == c || !t.is_descendant(c, a));
            }
        }
        let covered: usize = lnf.roots.iter().map(|&r| t.leaf_count(r)).sum();
        assert_eq!(covered, b.metric.len());
    }

    #[test]
    fn faithful_profile_on_small_input() {
        let m = generate_metric(8, 2, Distribution::Uniform, 2).unwrap();
        let mut cfg = Config::new(0.2, 1);
        cfg.profile = Profile::Faithful;
        let b = build_ft_spanner(m, &cfg).unwrap();
        assert!(b.report.lambda > 1e14);
        assert!(exhaustive_ft_check(&b.spanner.graph, &b.metric, 0.2, 1).unwrap().pass);
    }

    #[test]
    fn config_validation() {
        let m = Metric::from_line(&[0.0, 1.0, 2.0]).unwrap();
        for cfg in [
            Config::new(0.0, 1),
            Config::new(0.5, 1),
            Config::new(0.1, 0),
            Config {
                xi: -1.0,
                ..Config::default()
            },
            Config {
                lambda_override: Some(10.0),
                ..Config::default()
            },
            Config {
                profile: Profile::Faithful,
                faults: 2,
                ..Config::default()
            },
        ] {
            assert!(
                matches!(build_ft_spanner(m.clone(), &cfg), Err(Error::InvalidConfig(_))),
                "{cfg:?}"
            );
        }
        assert!(build_ft_spanner(m, &Config::new(0.1, 5)).is_ok());
    }

    #[test]
    fn practical_reach_floor() {
        assert_eq!(Constants::resolve(&Config::new(0.1, 1)).lambda, 320.0);
        assert_eq!(
            Constants::resolve(&Config {
                lambda_kappa: 40.0,
                ..Config::new(0.1, 1)
            })
            .lambda,
            440.0
        );
        let c = Constants::resolve(&Config::new(0.1, 1));
        assert_eq!((c.log_lambda, c.window), (4, 20));
        assert_eq!((c.c1, c.c2, c.c3), (3200.0, 3264.0, 3520.0));
        assert_eq!(c.degree_bound(2), 14080.0);
    }

    #[test]
    fn edge_classes_follow_provenance() {
        let m = generate_metric(80, 2, Distribution::Uniform, 3).unwrap();
        let b = build_ft_spanner(m, &Config::new(0.1, 1)).unwrap();
        let totals = &b.report.classes;
        assert_eq!(
            totals.count_o + totals.count_inc + totals.count_com,
            b.spanner.graph.edge_count()
        );
        assert!(
            (totals.e_o + totals.e_inc + totals.e_com - b.spanner.graph.weight()).abs()
                < 1e-6 * b.spanner.graph.weight()
        );
        for (u, v) in b.guide.sorted_keys() {
            assert!(
                b.spanner.graph.has_edge(u, v) || b.state.saturated[u] || b.state.saturated[v],
                "({u}, {v})"
            );
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn phase1_matches_reference(n in 2usize..40, seed in 0u64..1000, kappa in 1.0f64..40.0) {
            let m = generate_metric(n, 2, Distribution::Clustered, seed).unwrap().normalize().unwrap();
            let cfg = Config { lambda_kappa: kappa, ..Config::new(0.2, 1) };
            let consts = Constants::resolve(&cfg);
            let tree = NetTree::build(&m);
            let nc = CrossNeighbors::new(&tree, &m, consts.lambda);
            let ctx = Ctx { metric: &m, tree: &tree, nc: &nc, consts: &consts, f: 1, profile: cfg.profile };
            let guide = light_spanner(&m, cfg.eps).unwrap();
            let fast: Vec<_> = phase1_collect(&ctx, &guide).unwrap().edges().collect();
            let slow: Vec<_> = phase1_reference(&ctx, &guide).unwrap().edges().collect();
            prop_assert_eq!(fast, slow);
        }

        #[test]
        fn spanner_contains_no_self_loops_and_valid_meta(n in 2usize..60, seed in 0u64..1000, f in 1usize..4) {
            let m = generate_metric(n, 2, Distribution::Uniform, seed).unwrap();
            let b = build_ft_spanner(m, &Config::new(0.1, f)).unwrap();
            for ((u, v), meta) in b.spanner.edges_with_meta() {
                prop_assert!(u < v);
                prop_assert!(meta.level <= b.tree.top());
            }
            prop_assert_eq!(b.spanner.edges_with_meta().count(), b.spanner.graph.edge_count());
        }
    }
}
