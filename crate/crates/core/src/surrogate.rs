//! Surrogate selection and the pool structures that make it fast.
//!
//! A small node is represented by its lowest-id leaves. A large node prefers
//! semi-saturated points of its extended pool `P+(x)` and fills the remainder
//! with clean points of its pool `P(x) = B(x, 4 r_i)`.
//!
//! The reference selector answers both queries with ball scans. The fast
//! selector keeps the extended forest `T+` (extended children two levels
//! down, artificial leaves holding freshly semi-saturated points), cached
//! semi-saturated lists with lazy purging, `DELETED` marks with
//! `NodeDeletion`, ancestor jump pointers and per-node clean lists.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::construct::{ConstructionState, Ctx, Profile};
use crate::error::{Error, Result};
use crate::metric::PointId;
use crate::net_tree::{radius, NodeId};

/// Highest level whose extended pool is an explicit ball.
pub const BASE_LEVEL: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PointClass {
    Clean,
    SemiSaturated,
    Saturated,
}

/// Classification of `p` against the current degree counters.
pub fn classify(state: &ConstructionState, p: PointId, c2f: f64) -> PointClass {
    if state.saturated[p] {
        PointClass::Saturated
    } else if state.degree[p] as f64 >= c2f {
        PointClass::SemiSaturated
    } else {
        PointClass::Clean
    }
}

/// Work counters exported with the build report.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counters {
    pub select_calls: u64,
    pub pool_scans: u64,
    pub sslist_reads: u64,
    pub sslist_purged: u64,
    pub sslist_rebuild: u64,
    pub node_deletions: u64,
    pub node_deletion_work: u64,
    pub replenish_calls: u64,
    pub replenish_visits: u64,
    pub artificial_leaves: u64,
    pub max_artificial_leaf: u64,
    pub ss_overflows: u64,
    pub jump_queries: u64,
}

impl Counters {
    /// Work charged to the amortized maintenance of the fast pools.
    pub fn maintenance_work(&self) -> u64 {
        self.node_deletions + self.node_deletion_work + self.sslist_purged + self.sslist_rebuild + self.replenish_visits
    }
}

/// Points of `B(x, r)` by ascending id, enumerated through the leaves of
/// `NC[x]`. Valid for `r <= (lambda - 5/4) r_i`, which covers every pool.
pub fn ball_points(ctx: &Ctx<'_>, x: NodeId, r: f64, visits: &mut u64) -> Vec<PointId> {
    let t = ctx.tree;
    let px = t.point(x);
    let mut out = Vec::new();
    for a in std::iter::once(x).chain(ctx.nc.of(x).iter().copied()) {
        // leaves of a lie within 5/4 r_i of a
        if ctx.metric.dist(px, t.point(a)) > r + 1.25 * radius(t.level(a)) {
            continue;
        }
        for &p in t.leaves(a) {
            *visits += 1;
            if ctx.metric.dist(px, p) <= r {
                out.push(p);
            }
        }
    }
    out.sort_unstable();
    out
}

/// Chooses surrogate sets, in reference or fast mode.
pub struct Selector {
    fast: Option<Box<FastPools>>,
    small_cache: HashMap<NodeId, Vec<PointId>>,
    pub counters: Counters,
}

impl Selector {
    pub fn new(ctx: &Ctx<'_>, fast: bool) -> Self {
        Selector {
            fast: fast.then(|| Box::new(FastPools::new(ctx))),
            small_cache: HashMap::new(),
            counters: Counters::default(),
        }
    }

    pub fn is_fast(&self) -> bool {
        self.fast.is_some()
    }

    pub fn pools(&self) -> Option<&FastPools> {
        self.fast.as_deref()
    }

    pub fn into_pools(self) -> Option<FastPools> {
        self.fast.map(|b| *b)
    }

    pub fn begin_level(&mut self, level: usize) {
        if let Some(fp) = self.fast.as_mut() {
            fp.iteration = level;
        }
    }

    /// `SelectSurrogate(x)`: ascending point ids, at most `f+1` of them.
    pub fn select(&mut self, ctx: &Ctx<'_>, state: &ConstructionState, x: NodeId) -> Vec<PointId> {
        self.counters.select_calls += 1;
        let want = ctx.f + 1;
        if state.small[x.idx()] == Some(true) {
            let t = ctx.tree;
            return self
                .small_cache
                .entry(x)
                .or_insert_with(|| {
                    let mut leaves: Vec<PointId> = t.leaves(x).to_vec();
                    leaves.sort_unstable();
                    leaves.truncate(want);
                    leaves
                })
                .iter()
                .copied()
                .filter(|&p| !state.saturated[p])
                .collect();
        }
        let c2f = ctx.consts.c2 * ctx.f as f64;
        let (mut semi, clean_need_full) = match self.fast.as_mut() {
            None => {
                let r = radius(ctx.tree.level(x));
                let semi: Vec<PointId> = ball_points(ctx, x, 16.0 * r, &mut self.counters.pool_scans)
                    .into_iter()
                    .filter(|&p| classify(state, p, c2f) == PointClass::SemiSaturated)
                    .collect();
                (semi, false)
            }
            Some(fp) => {
                let (semi, _) = fp.semi_saturated(ctx, state, x, want, &mut self.counters);
                (semi, true)
            }
        };
        semi.sort_unstable();
        semi.truncate(want);
        if semi.len() < want {
            let need = want - semi.len();
            let clean = match self.fast.as_mut() {
                Some(fp) if clean_need_full => fp.clean_points(ctx, state, x, need, &mut self.counters),
                _ => {
                    let r = radius(ctx.tree.level(x));
                    let mut v: Vec<PointId> = ball_points(ctx, x, 4.0 * r, &mut self.counters.pool_scans)
                        .into_iter()
                        .filter(|&p| classify(state, p, c2f) == PointClass::Clean)
                        .collect();
                    v.truncate(need);
                    v
                }
            };
            semi.extend(clean);
            semi.sort_unstable();
        }
        semi
    }

    /// Hook for a point whose degree just reached `c2 f` during `iteration`.
    pub fn on_semi_saturated(&mut self, ctx: &Ctx<'_>, p: PointId, iteration: usize) -> Result<()> {
        match self.fast.as_mut() {
            Some(fp) => fp.record_semi_saturated(ctx, &[p], iteration, &mut self.counters),
            None => Ok(()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Kind {
    Tree,
    Artificial { owner: u32 },
}

#[derive(Clone, Debug)]
struct SsCache {
    list: Vec<PointId>,
    complete: bool,
}

#[derive(Clone, Debug)]
struct CleanList {
    points: Vec<PointId>,
    branch_leaf: PointId,
    /// Set when a rescan found every clean point of the pool.
    exhaustive: bool,
}

/// The extended forest `T+` and the lists hanging off it.
///
/// Indices `0..tree.node_count()` are tree nodes (same as [`NodeId`]); larger
/// indices are artificial leaves.
pub struct FastPools {
    kind: Vec<Kind>,
    level: Vec<usize>,
    children: Vec<Vec<u32>>,
    parents: Vec<Vec<u32>>,
    artificial: Vec<Option<u32>>,
    points: Vec<Vec<PointId>>,
    cache: Vec<Option<SsCache>>,
    deleted: Vec<bool>,
    rho: Vec<Option<u32>>,
    watchers: Vec<Vec<u32>>,
    /// `jumps[x][h]`: extended ancestors `2^h` hops above tree node `x`.
    jumps: Vec<Vec<Vec<u32>>>,
    clean: Vec<Option<CleanList>>,
    iteration: usize,
    cap: usize,
    profile: Profile,
}

impl FastPools {
    pub fn new(ctx: &Ctx<'_>) -> Self {
        let t = ctx.tree;
        let m = ctx.metric;
        let count = t.node_count();
        let mut children: Vec<Vec<u32>> = vec![Vec::new(); count];
        let mut parents: Vec<Vec<u32>> = vec![Vec::new(); count];
        for i in (BASE_LEVEL + 1)..=t.top() {
            let (r, r2) = (radius(i), radius(i - 2));
            for &x in t.level_nodes(i) {
                let px = t.point(x);
                let mut found: Vec<NodeId> = Vec::new();
                for a in std::iter::once(x).chain(ctx.nc.of(x).iter().copied()) {
                    if m.dist(px, t.point(a)) > 12.0 * (r + r2) + 1.25 * r {
                        continue;
                    }
                    for y in t.descendants_at(a, i - 2) {
                        let d = m.dist(px, t.point(y));
                        let hit = if d <= 12.0 * r {
                            true
                        } else if d > 12.0 * (r + r2) {
                            false
                        } else {
                            let mut scratch = 0;
                            ball_points(ctx, y, 12.0 * r2, &mut scratch)
                                .into_iter()
                                .any(|w| m.dist(px, w) <= 12.0 * r)
                        };
                        if hit {
                            found.push(y);
                        }
                    }
                }
                found.sort_unstable_by_key(|&y| t.point(y));
                found.dedup();
                for y in found {
                    children[x.idx()].push(y.0);
                    parents[y.idx()].push(x.0);
                }
            }
        }
        let mut jumps: Vec<Vec<Vec<u32>>> = vec![Vec::new(); count];
        for i in (0..=t.top()).rev() {
            for &x in t.level_nodes(i) {
                let mut table = vec![parents[x.idx()].clone()];
                loop {
                    let h = table.len();
                    let mut next: Vec<u32> = table[h - 1]
                        .iter()
                        .flat_map(|&y| jumps[y as usize].get(h - 1).cloned().unwrap_or_default())
                        .collect();
                    if next.is_empty() {
                        break;
                    }
                    next.sort_unstable();
                    next.dedup();
                    table.push(next);
                }
                if table[0].is_empty() {
                    table.clear();
                }
                jumps[x.idx()] = table;
            }
        }
        let levels = (0..count).map(|k| t.level(NodeId(k as u32))).collect();
        FastPools {
            kind: vec![Kind::Tree; count],
            level: levels,
            children,
            parents,
            artificial: vec![None; count],
            points: vec![Vec::new(); count],
            cache: vec![None; count],
            deleted: vec![false; count],
            rho: vec![None; count],
            watchers: vec![Vec::new(); count],
            jumps,
            clean: vec![None; count],
            iteration: 0,
            cap: ctx.consts.ss_capacity(ctx.f),
            profile: ctx.profile,
        }
    }

    /// Extended children of a tree node (tree nodes only, no artificial leaves).
    pub fn extended_children(&self, x: NodeId) -> Vec<NodeId> {
        self.children[x.idx()]
            .iter()
            .filter(|&&c| self.kind[c as usize] == Kind::Tree)
            .map(|&c| NodeId(c))
            .collect()
    }

    /// A relevant node is a `T+` leaf or has at least two extended children.
    pub fn is_relevant(&self, x: NodeId) -> bool {
        self.is_leaf(x.0) || self.children[x.idx()].len() >= 2
    }

    pub fn artificial_leaf_count(&self) -> usize {
        self.kind.len() - self.artificial.len()
    }

    pub fn is_deleted(&self, x: NodeId) -> bool {
        self.deleted[x.idx()]
    }

    pub fn rho(&self, x: NodeId) -> Option<u32> {
        self.rho[x.idx()]
    }

    fn is_leaf(&self, z: u32) -> bool {
        match self.kind[z as usize] {
            Kind::Artificial { .. } => true,
            Kind::Tree => self.level[z as usize] <= BASE_LEVEL,
        }
    }

    fn frozen(&self, z: u32) -> bool {
        self.iteration > self.level[z as usize]
    }

    /// Explicit `P+(x)` by the recursive definition, ascending ids.
    pub fn extended_pool(&self, ctx: &Ctx<'_>, x: NodeId) -> Vec<PointId> {
        let mut memo: HashMap<NodeId, Vec<PointId>> = HashMap::new();
        self.extended_pool_memo(ctx, x, &mut memo)
    }

    fn extended_pool_memo(&self, ctx: &Ctx<'_>, x: NodeId, memo: &mut HashMap<NodeId, Vec<PointId>>) -> Vec<PointId> {
        if let Some(v) = memo.get(&x) {
            return v.clone();
        }
        let i = ctx.tree.level(x);
        let out = if i <= BASE_LEVEL {
            let mut scratch = 0;
            ball_points(ctx, x, 16.0 * radius(i), &mut scratch)
        } else {
            let mut acc: Vec<PointId> = Vec::new();
            for y in self.extended_children(x) {
                acc.extend(self.extended_pool_memo(ctx, y, memo));
            }
            acc.sort_unstable();
            acc.dedup();
            acc
        };
        memo.insert(x, out.clone());
        out
    }

    /// Membership `w ∈ P+(x)`, descending only where the sandwich bounds
    /// leave the answer open.
    pub fn in_extended_pool(&self, ctx: &Ctx<'_>, x: NodeId, w: PointId) -> bool {
        let i = ctx.tree.level(x);
        let d = ctx.metric.dist(ctx.tree.point(x), w);
        let r = radius(i);
        if i <= BASE_LEVEL {
            return d <= 16.0 * r;
        }
        if d <= 12.0 * r {
            return true;
        }
        if d > 16.0 * r {
            return false;
        }
        self.extended_children(x)
            .into_iter()
            .any(|y| self.in_extended_pool(ctx, y, w))
    }

    /// Records points that became semi-saturated during `iteration`: level
    /// `<= 3` nodes store them directly, higher nodes at the current and next
    /// level receive them in their artificial leaf.
    pub fn record_semi_saturated(
        &mut self,
        ctx: &Ctx<'_>,
        pts: &[PointId],
        iteration: usize,
        counters: &mut Counters,
    ) -> Result<()> {
        let t = ctx.tree;
        let top_level = if iteration <= BASE_LEVEL {
            BASE_LEVEL.max(iteration + 1)
        } else {
            iteration + 1
        };
        for &p in pts {
            for lvl in iteration..=top_level.min(t.top()) {
                let a = t.point_ancestor(p, lvl);
                let mut targets: Vec<NodeId> = std::iter::once(a).chain(ctx.nc.of(a).iter().copied()).collect();
                targets.sort_unstable_by_key(|&y| t.point(y));
                for x in targets {
                    if !self.in_extended_pool(ctx, x, p) {
                        continue;
                    }
                    let holder = if lvl <= BASE_LEVEL {
                        x.0
                    } else {
                        self.artificial_leaf(x, counters)
                    };
                    let list = &mut self.points[holder as usize];
                    if list.contains(&p) {
                        continue;
                    }
                    list.push(p);
                    let size = list.len();
                    if lvl > BASE_LEVEL {
                        counters.max_artificial_leaf = counters.max_artificial_leaf.max(size as u64);
                        if size > self.cap {
                            counters.ss_overflows += 1;
                            if self.profile == Profile::Faithful {
                                return Err(Error::SsListOverflow {
                                    point: t.point(x),
                                    level: lvl,
                                    size,
                                    cap: self.cap,
                                });
                            }
                        }
                        self.cache[x.idx()] = None;
                    }
                }
            }
        }
        Ok(())
    }

    fn artificial_leaf(&mut self, x: NodeId, counters: &mut Counters) -> u32 {
        if let Some(a) = self.artificial[x.idx()] {
            return a;
        }
        let a = self.kind.len() as u32;
        self.kind.push(Kind::Artificial { owner: x.0 });
        self.level.push(self.level[x.idx()]);
        self.children.push(Vec::new());
        self.parents.push(vec![x.0]);
        self.points.push(Vec::new());
        self.cache.push(None);
        self.deleted.push(false);
        self.rho.push(None);
        self.watchers.push(Vec::new());
        self.children[x.idx()].push(a);
        self.artificial[x.idx()] = Some(a);
        counters.artificial_leaves += 1;
        a
    }

    /// Extended ancestors of `z` at `level`, using the jump ladder.
    pub fn ancestors_at_level(&self, z: u32, level: usize, counters: &mut Counters) -> Vec<u32> {
        counters.jump_queries += 1;
        let (base, extra) = match self.kind[z as usize] {
            Kind::Artificial { owner } => (owner, 0usize),
            Kind::Tree => (z, 0),
        };
        let lz = self.level[base as usize] + extra;
        if level < lz || (level - lz) % 2 == 1 {
            return Vec::new();
        }
        let mut hops = (level - lz) / 2;
        let mut current = vec![base];
        let mut h = 0;
        while hops > 0 {
            if hops & 1 == 1 {
                let mut next: Vec<u32> = current
                    .iter()
                    .flat_map(|&c| self.jumps[c as usize].get(h).cloned().unwrap_or_default())
                    .collect();
                next.sort_unstable();
                next.dedup();
                current = next;
                counters.jump_queries += current.len() as u64;
            }
            hops >>= 1;
            h += 1;
        }
        current
    }

    /// `NodeDeletion(z)`: marks `z`, re-points every `rho` aimed at it and
    /// deletes extended parents left without live children.
    pub fn node_deletion(&mut self, z: u32, counters: &mut Counters) {
        if self.deleted[z as usize] {
            return;
        }
        self.deleted[z as usize] = true;
        counters.node_deletions += 1;
        let watchers = std::mem::take(&mut self.watchers[z as usize]);
        for w in watchers {
            if self.rho[w as usize] != Some(z) {
                continue;
            }
            let next = self.replacement_leaf(z, w, counters);
            self.set_rho(w, next);
        }
        for p in self.parents[z as usize].clone() {
            counters.node_deletion_work += 1;
            if self.frozen(p) && self.children[p as usize].iter().all(|&c| self.deleted[c as usize]) {
                self.node_deletion(p, counters);
            }
        }
    }

    fn set_rho(&mut self, w: u32, leaf: Option<u32>) {
        self.rho[w as usize] = leaf;
        if let Some(l) = leaf {
            self.watchers[l as usize].push(w);
        }
    }

    /// A live leaf below an extended parent of `z` that itself lies below `w`.
    fn replacement_leaf(&mut self, z: u32, w: u32, counters: &mut Counters) -> Option<u32> {
        let wl = self.level[w as usize];
        for zp in self.parents[z as usize].clone() {
            counters.node_deletion_work += 1;
            let below_w = zp == w || self.ancestors_at_level(zp, wl, counters).contains(&w);
            if !below_w {
                continue;
            }
            for c in self.children[zp as usize].clone() {
                counters.node_deletion_work += 1;
                if !self.deleted[c as usize] {
                    if let Some(leaf) = self.descend_live(c, counters) {
                        return Some(leaf);
                    }
                }
            }
        }
        self.descend_live(w, counters)
    }

    fn descend_live(&self, z: u32, counters: &mut Counters) -> Option<u32> {
        if self.deleted[z as usize] {
            return None;
        }
        if self.is_leaf(z) {
            return Some(z);
        }
        if let Some(r) = self.rho[z as usize] {
            if !self.deleted[r as usize] {
                return Some(r);
            }
        }
        for &c in &self.children[z as usize] {
            counters.node_deletion_work += 1;
            if let Some(l) = self.descend_live(c, counters) {
                return Some(l);
            }
        }
        None
    }

    /// Live semi-saturated points of `P+(x)`: up to `need` of them, plus a
    /// flag telling whether the returned list is exhaustive.
    pub fn semi_saturated(
        &mut self,
        ctx: &Ctx<'_>,
        state: &ConstructionState,
        x: NodeId,
        need: usize,
        counters: &mut Counters,
    ) -> (Vec<PointId>, bool) {
        self.live(ctx, state, x.0, need, counters)
    }

    fn live(
        &mut self,
        ctx: &Ctx<'_>,
        state: &ConstructionState,
        z: u32,
        need: usize,
        counters: &mut Counters,
    ) -> (Vec<PointId>, bool) {
        if self.deleted[z as usize] {
            return (Vec::new(), true);
        }
        let c2f = ctx.consts.c2 * ctx.f as f64;
        let alive = |p: PointId| classify(state, p, c2f) == PointClass::SemiSaturated;
        if self.is_leaf(z) {
            let list = &mut self.points[z as usize];
            let before = list.len();
            list.retain(|&p| alive(p));
            counters.sslist_purged += (before - list.len()) as u64;
            counters.sslist_reads += list.len() as u64;
            let out = list.clone();
            if out.is_empty() && self.frozen(z) {
                self.node_deletion(z, counters);
            }
            return (out, true);
        }
        if self.children[z as usize].len() == 1 {
            // irrelevant chain node: its pool is its only child's pool
            let only = self.children[z as usize][0];
            return self.live(ctx, state, only, need, counters);
        }
        if let Some(cache) = self.cache[z as usize].as_mut() {
            let before = cache.list.len();
            cache.list.retain(|&p| alive(p));
            counters.sslist_purged += (before - cache.list.len()) as u64;
            counters.sslist_reads += cache.list.len().min(need) as u64;
            if cache.complete || cache.list.len() >= need {
                return (cache.list.clone(), cache.complete);
            }
        }
        let mut list: Vec<PointId> = Vec::new();
        let mut complete = true;
        let kids = self.children[z as usize].clone();
        for (k, &c) in kids.iter().enumerate() {
            if self.deleted[c as usize] {
                continue;
            }
            let (got, comp) = self.live(ctx, state, c, self.cap, counters);
            complete &= comp;
            counters.sslist_rebuild += got.len() as u64;
            list.extend(got);
            list.sort_unstable();
            list.dedup();
            if list.len() >= self.cap {
                if k + 1 < kids.len() || !complete {
                    complete = false;
                }
                list.truncate(self.cap);
                break;
            }
        }
        if self.rho[z as usize].is_none_or(|r| self.deleted[r as usize]) {
            let leaf = self.descend_live(z, counters);
            self.set_rho(z, leaf);
        }
        if list.is_empty() && complete && self.frozen(z) {
            self.node_deletion(z, counters);
        }
        self.cache[z as usize] = Some(SsCache {
            list: list.clone(),
            complete,
        });
        (list, complete)
    }

    /// Up to `need` clean points of `P(x)`, replenishing `Clean(x)` as needed.
    pub fn clean_points(
        &mut self,
        ctx: &Ctx<'_>,
        state: &ConstructionState,
        x: NodeId,
        need: usize,
        counters: &mut Counters,
    ) -> Vec<PointId> {
        let c2f = ctx.consts.c2 * ctx.f as f64;
        let cap = 4 * ctx.f + 4;
        if self.clean[x.idx()].is_none() {
            self.init_clean(ctx, state, x, counters);
        }
        let list = self.clean[x.idx()].as_mut().expect("initialized above");
        list.points.retain(|&p| classify(state, p, c2f) == PointClass::Clean);
        if list.points.len() < need.min(cap) && !list.exhaustive {
            self.replenish_clean(ctx, state, x, counters);
            let list = self.clean[x.idx()].as_ref().expect("initialized above");
            if list.points.len() < need {
                self.init_clean(ctx, state, x, counters);
            }
        }
        let list = self.clean[x.idx()].as_ref().expect("initialized above");
        let mut out: Vec<PointId> = list.points.iter().copied().take(need).collect();
        out.sort_unstable();
        out
    }

    fn init_clean(&mut self, ctx: &Ctx<'_>, state: &ConstructionState, x: NodeId, counters: &mut Counters) {
        let c2f = ctx.consts.c2 * ctx.f as f64;
        let cap = 4 * ctx.f + 4;
        let t = ctx.tree;
        let px = t.point(x);
        let r = 4.0 * radius(t.level(x));
        let mut pool: Vec<PointId> = ball_points(ctx, x, r, &mut counters.pool_scans)
            .into_iter()
            .filter(|&p| classify(state, p, c2f) == PointClass::Clean)
            .collect();
        pool.sort_by(|&a, &b| {
            ctx.metric
                .dist(px, a)
                .total_cmp(&ctx.metric.dist(px, b))
                .then(a.cmp(&b))
        });
        let exhaustive = pool.len() < cap;
        pool.truncate(cap);
        let branch_leaf = t
            .leaves(x)
            .iter()
            .copied()
            .max_by(|&a, &b| state.degree[a].cmp(&state.degree[b]).then(b.cmp(&a)))
            .unwrap_or(px);
        counters.pool_scans += t.leaf_count(x) as u64;
        self.clean[x.idx()] = Some(CleanList {
            points: pool,
            branch_leaf,
            exhaustive,
        });
    }

    /// Walks the branch toward the highest-degree leaf of `x`, visiting only
    /// branch nodes that own a clean list, until `Clean(x)` is full.
    pub fn replenish_clean(&mut self, ctx: &Ctx<'_>, state: &ConstructionState, x: NodeId, counters: &mut Counters) {
        counters.replenish_calls += 1;
        let c2f = ctx.consts.c2 * ctx.f as f64;
        let cap = 4 * ctx.f + 4;
        let t = ctx.tree;
        let px = t.point(x);
        let i = t.level(x);
        let r = 4.0 * radius(i);
        let Some(mut list) = self.clean[x.idx()].take() else {
            return;
        };
        if list.points.len() >= cap {
            self.clean[x.idx()] = Some(list);
            return;
        }
        'walk: for j in (0..i).rev() {
            let y = t.point_ancestor(list.branch_leaf, j);
            let Some(branch) = self.clean[y.idx()].as_ref() else {
                continue;
            };
            counters.replenish_visits += 1;
            for c in std::iter::once(t.point(y)).chain(branch.points.iter().copied()) {
                counters.replenish_visits += 1;
                if classify(state, c, c2f) == PointClass::Clean
                    && ctx.metric.dist(px, c) <= r
                    && !list.points.contains(&c)
                {
                    list.points.push(c);
                    if list.points.len() >= cap {
                        break 'walk;
                    }
                }
            }
        }
        self.clean[x.idx()] = Some(list);
    }

    /// Whether `x` currently owns a clean list.
    pub fn has_clean_list(&self, x: NodeId) -> bool {
        self.clean[x.idx()].is_some()
    }

    pub fn clean_list(&self, x: NodeId) -> Option<&[PointId]> {
        self.clean[x.idx()].as_ref().map(|l| l.points.as_slice())
    }
}
