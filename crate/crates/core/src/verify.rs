//! Fault-injection audits and a brute-force fault-tolerant greedy oracle.

use std::cmp::Ordering;
use std::collections::BTreeSet;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baseline::{mst, sorted_pairs, Dijkstra, WeightedGraph, UNREACHABLE};
use crate::construct::{classify_lnf, Build, EdgeClass};
use crate::error::{Error, Result};
use crate::metric::{Metric, PointId};
use crate::net_tree::radius;

/// Largest number of fault sets the exhaustive check will enumerate.
pub const EXHAUSTIVE_BUDGET: u128 = 1_000_000;

/// Relative slack allowed on path sums when comparing against a bound.
pub const PATH_TOLERANCE: f64 = 1e-9;

mod ratio {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(v),
            Raw::Text(t) if t == "inf" => Ok(f64::INFINITY),
            Raw::Text(t) => Err(serde::de::Error::custom(format!("bad ratio '{t}'"))),
        }
    }
}

/// Worst surviving pair for one fault set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stretch {
    #[serde(with = "ratio")]
    pub max_stretch: f64,
    pub pair: Option<(PointId, PointId)>,
    pub faults: Vec<PointId>,
}

impl Stretch {
    fn none(faults: Vec<PointId>) -> Self {
        Stretch {
            max_stretch: 1.0,
            pair: None,
            faults,
        }
    }

    /// Larger stretch wins; ties go to the lexicographically smaller witness.
    fn worse(self, other: Stretch) -> Stretch {
        match self.max_stretch.total_cmp(&other.max_stretch) {
            Ordering::Greater => self,
            Ordering::Less => other,
            Ordering::Equal => {
                if (&self.faults, self.pair) <= (&other.faults, other.pair) {
                    self
                } else {
                    other
                }
            }
        }
    }
}

fn row_worst(m: &Metric, u: PointId, dist: &[f64], dead: &[bool]) -> Option<(f64, PointId)> {
    let mut best: Option<(f64, PointId)> = None;
    for (v, &d) in dist.iter().enumerate() {
        if v == u || dead[v] {
            continue;
        }
        let s = if d == UNREACHABLE {
            f64::INFINITY
        } else {
            d / m.dist(u, v)
        };
        if best.is_none_or(|(b, _)| s > b) {
            best = Some((s, v));
        }
    }
    best
}

fn fold_rows(rows: impl Iterator<Item = (PointId, Option<(f64, PointId)>)>, faults: Vec<PointId>) -> Stretch {
    let mut out = Stretch::none(faults);
    let mut best = f64::NEG_INFINITY;
    for (u, r) in rows {
        if let Some((s, v)) = r {
            let pair = (u.min(v), u.max(v));
            if s > best || (s == best && out.pair.is_some_and(|p| pair < p)) {
                best = s;
                out.max_stretch = s;
                out.pair = Some(pair);
            }
        }
    }
    out
}

/// Exact `max dist_{H-F}(u,v) / delta(u,v)` over surviving pairs.
pub fn stretch_under_faults(h: &WeightedGraph, m: &Metric, faults: &[PointId]) -> Stretch {
    let n = m.len();
    let mut dead = vec![false; n];
    for &p in faults {
        dead[p] = true;
    }
    let mut sorted = faults.to_vec();
    sorted.sort_unstable();
    let rows: Vec<(PointId, Option<(f64, PointId)>)> = (0..n)
        .into_par_iter()
        .filter(|&u| !dead[u])
        .map_init(
            || Dijkstra::new(n),
            |dj, u| {
                let dist = dj.run(h, u, &dead);
                (u, row_worst(m, u, dist, &dead))
            },
        )
        .collect();
    fold_rows(rows.into_iter(), sorted)
}

/// Fault-free shortest-path trees reused across many fault sets: a source
/// whose tree has no faulty interior vertex keeps its distances.
pub struct StretchOracle<'a> {
    h: &'a WeightedGraph,
    m: &'a Metric,
    base: Vec<Vec<f64>>,
    /// `interior[u][w]`: `w` has a child in the shortest-path tree of `u`.
    interior: Vec<Vec<bool>>,
}

impl<'a> StretchOracle<'a> {
    pub fn new(h: &'a WeightedGraph, m: &'a Metric) -> Self {
        let n = m.len();
        let none = vec![false; n];
        let rows: Vec<(Vec<f64>, Vec<bool>)> = (0..n)
            .into_par_iter()
            .map_init(
                || Dijkstra::new(n),
                |dj, u| {
                    let dist = dj.run(h, u, &none).to_vec();
                    let mut interior = vec![false; n];
                    for v in 0..n {
                        if v == u || dist[v] == UNREACHABLE {
                            continue;
                        }
                        // lowest-id predecessor on some shortest path
                        let parent = h
                            .neighbors(v)
                            .iter()
                            .filter(|&&(w, len)| dist[w] + len == dist[v])
                            .map(|&(w, _)| w)
                            .min();
                        match parent {
                            Some(p) => interior[p] = true,
                            // rounding hid the predecessor; treat v as fragile
                            None => interior.iter_mut().for_each(|b| *b = true),
                        }
                    }
                    (dist, interior)
                },
            )
            .collect();
        let (base, interior) = rows.into_iter().unzip();
        StretchOracle { h, m, base, interior }
    }

    pub fn stretch(&self, faults: &[PointId]) -> Stretch {
        let n = self.m.len();
        let mut dead = vec![false; n];
        for &p in faults {
            dead[p] = true;
        }
        let mut sorted = faults.to_vec();
        sorted.sort_unstable();
        let mut dj = Dijkstra::new(n);
        let rows = (0..n).filter(|&u| !dead[u]).map(|u| {
            let hit = faults.iter().any(|&p| self.interior[u][p]);
            let row = if hit {
                row_worst(self.m, u, dj.run(self.h, u, &dead), &dead)
            } else {
                row_worst(self.m, u, &self.base[u], &dead)
            };
            (u, row)
        });
        fold_rows(rows.collect::<Vec<_>>().into_iter(), sorted)
    }

    /// Worst stretch over many fault sets, evaluated in parallel.
    pub fn worst(&self, sets: &[Vec<PointId>]) -> Stretch {
        sets.par_iter()
            .map(|f| self.stretch(f))
            .reduce(|| Stretch::none(Vec::new()), Stretch::worse)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FtVerdict {
    pub pass: bool,
    #[serde(with = "ratio")]
    pub bound: f64,
    pub worst: Stretch,
    pub fault_sets: usize,
}

fn verdict(worst: Stretch, bound: f64, fault_sets: usize) -> FtVerdict {
    FtVerdict {
        pass: worst.max_stretch <= bound * (1.0 + PATH_TOLERANCE),
        bound,
        worst,
        fault_sets,
    }
}

/// The acceptance stretch `1 + 5 eps`.
pub fn stretch_bound(eps: f64) -> f64 {
    1.0 + 5.0 * eps
}

fn binomial(n: u128, k: u128) -> u128 {
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul(n - i) / (i + 1);
    }
    acc
}

/// Number of fault sets of size at most `f` over `n` points.
pub fn fault_set_count(n: usize, f: usize) -> u128 {
    (0..=f.min(n))
        .map(|k| binomial(n as u128, k as u128))
        .fold(0u128, u128::saturating_add)
}

/// Calls `visit` on every subset of `items` of size exactly `k`, in
/// lexicographic order. Stops early when `visit` returns `false`.
pub fn for_each_subset(items: &[PointId], k: usize, mut visit: impl FnMut(&[PointId]) -> bool) {
    if k > items.len() {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    let mut buf = vec![0; k];
    loop {
        for (b, &i) in buf.iter_mut().zip(&idx) {
            *b = items[i];
        }
        if !visit(&buf) {
            return;
        }
        let mut pos = k;
        while pos > 0 && idx[pos - 1] == pos - 1 + items.len() - k {
            pos -= 1;
        }
        if pos == 0 {
            return;
        }
        idx[pos - 1] += 1;
        for j in pos..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Every fault set of size at most `f`.
pub fn exhaustive_ft_check(h: &WeightedGraph, m: &Metric, eps: f64, f: usize) -> Result<FtVerdict> {
    let n = m.len();
    let needed = fault_set_count(n, f);
    if needed > EXHAUSTIVE_BUDGET {
        return Err(Error::BudgetExceeded {
            needed,
            budget: EXHAUSTIVE_BUDGET,
        });
    }
    let all: Vec<PointId> = (0..n).collect();
    let mut sets = Vec::with_capacity(needed as usize);
    for k in 0..=f.min(n) {
        for_each_subset(&all, k, |s| {
            sets.push(s.to_vec());
            true
        });
    }
    let oracle = StretchOracle::new(h, m);
    Ok(verdict(oracle.worst(&sets), stretch_bound(eps), sets.len()))
}

/// Fault sets aimed at the matching argument: for every recorded surrogate
/// set of a complete node, the set itself when it has at most `f` points,
/// otherwise each of its leave-one-out subsets.
pub fn surrogate_attack_sets(build: &Build) -> Vec<Vec<PointId>> {
    let f = build.config.faults;
    let mut out: BTreeSet<Vec<PointId>> = BTreeSet::new();
    for (k, s) in build.state.surrogates.iter().enumerate() {
        let Some(s) = s else { continue };
        if build.state.incomplete[k] != Some(false) || s.is_empty() {
            continue;
        }
        if s.len() <= f {
            out.insert(s.clone());
        } else {
            for skip in 0..s.len() {
                let mut v: Vec<PointId> = s
                    .iter()
                    .copied()
                    .enumerate()
                    .filter(|&(i, _)| i != skip)
                    .map(|(_, p)| p)
                    .collect();
                v.truncate(f);
                out.insert(v);
            }
        }
    }
    out.into_iter().collect()
}

/// The `f` highest-degree points, lowest id on ties.
pub fn top_degree_set(h: &WeightedGraph, f: usize) -> Vec<PointId> {
    let mut ids: Vec<PointId> = (0..h.vertex_count()).collect();
    ids.sort_by(|&a, &b| h.degree(b).cmp(&h.degree(a)).then(a.cmp(&b)));
    ids.truncate(f);
    ids.sort_unstable();
    ids
}

/// Random fault sets of size `f` (seeded), the empty set, the top-degree set
/// and the given adversarial sets.
pub fn sampled_ft_check(
    h: &WeightedGraph,
    m: &Metric,
    eps: f64,
    f: usize,
    trials: usize,
    seed: u64,
    adversarial: &[Vec<PointId>],
) -> FtVerdict {
    let n = m.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sets: Vec<Vec<PointId>> = vec![Vec::new(), top_degree_set(h, f.min(n))];
    for _ in 0..trials {
        let mut s: Vec<PointId> = sample(&mut rng, n, f.min(n)).into_vec();
        s.sort_unstable();
        sets.push(s);
    }
    sets.extend(adversarial.iter().cloned());
    let oracle = StretchOracle::new(h, m);
    verdict(oracle.worst(&sets), stretch_bound(eps), sets.len())
}

/// Greedy fault-tolerant spanner by fault enumeration; exponential, so
/// limited to `n <= 14` and `f <= 3`.
pub fn greedy_ft_oracle(m: &Metric, eps: f64, f: usize) -> Result<WeightedGraph> {
    let n = m.len();
    if n > 14 || f > 3 {
        return Err(Error::BudgetExceeded {
            needed: fault_set_count(n, f),
            budget: fault_set_count(14, 3),
        });
    }
    let mut g = WeightedGraph::new(n);
    let mut dj = Dijkstra::new(n);
    let mut dead = vec![false; n];
    for (d, u, v) in sorted_pairs(m) {
        let (u, v) = (u as usize, v as usize);
        let others: Vec<PointId> = (0..n).filter(|&p| p != u && p != v).collect();
        let k = f.min(others.len());
        let mut needed = false;
        for_each_subset(&others, k, |s| {
            for &p in s {
                dead[p] = true;
            }
            let reach = dj.run(&g, u, &dead)[v];
            for &p in s {
                dead[p] = false;
            }
            needed = reach > (1.0 + eps) * d;
            !needed
        });
        if needed {
            g.add_edge(u, v, d);
        }
    }
    Ok(g)
}

/// Bounds an audit checks against.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub stretch: f64,
    pub degree: f64,
    /// Allowed `|E(H)| / (f n)`, if audited.
    pub size_constant: Option<f64>,
    /// Allowed `w(H) / (f^2 w(MST))`, if audited.
    pub lightness_constant: Option<f64>,
    pub xi: f64,
}

impl Bounds {
    pub fn for_build(build: &Build) -> Self {
        Bounds {
            stretch: stretch_bound(build.config.eps),
            degree: build.consts.degree_bound(build.config.faults),
            size_constant: None,
            lightness_constant: None,
            xi: build.consts.xi,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Verdicts {
    pub stretch: Option<bool>,
    pub degree: bool,
    pub size: Option<bool>,
    pub lightness: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub n: usize,
    pub f: usize,
    pub eps: f64,
    pub bounds: Bounds,
    pub ft: Option<FtVerdict>,
    pub edge_count: usize,
    pub max_degree: usize,
    pub min_degree: usize,
    pub size_ratio: f64,
    pub weight: f64,
    pub mst_weight: f64,
    pub lightness: f64,
    pub lightness_per_f2: f64,
    pub class_weight_o: f64,
    pub class_weight_inc: f64,
    pub class_weight_com: f64,
    pub f2_mst: f64,
    pub max_level_incidence: usize,
    pub incidence_violations: usize,
    pub lnf_roots: usize,
    pub lnf_radius_sum: f64,
    pub lnf_radius_ratio: f64,
    pub verdicts: Verdicts,
    pub pass: bool,
}

impl AuditReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}

/// Degree, size, lightness and provenance audits of `h`, with class and
/// level data taken from `build` (which need not have produced `h`).
pub fn audit(h: &WeightedGraph, build: &Build, bounds: &Bounds, ft: Option<FtVerdict>) -> AuditReport {
    let m = &build.metric;
    let n = m.len();
    let f = build.config.faults;
    let (_, mst_weight) = mst(m);
    let weight = h.weight();
    let lightness = if mst_weight > 0.0 { weight / mst_weight } else { 0.0 };
    let mut class_w = [0.0f64; 3];
    let mut incidence: std::collections::HashMap<(PointId, usize), usize> = std::collections::HashMap::new();
    for (u, v) in h.sorted_keys() {
        let Some(meta) = build.spanner.meta(u, v) else { continue };
        let slot = match meta.class {
            EdgeClass::Original => 0,
            EdgeClass::Incomplete => 1,
            EdgeClass::Complete => 2,
        };
        class_w[slot] += m.dist(u, v);
        *incidence.entry((u, meta.level)).or_default() += 1;
        *incidence.entry((v, meta.level)).or_default() += 1;
    }
    let xi_f = bounds.xi * f as f64;
    let max_level_incidence = incidence.values().copied().max().unwrap_or(0);
    let incidence_violations = incidence.values().filter(|&&c| c as f64 > xi_f).count();
    let lnf = classify_lnf(&build.tree, &build.state);
    let lnf_radius_sum: f64 = lnf.roots.iter().map(|&x| radius(build.tree.level(x))).sum();
    let size_ratio = if n > 0 {
        h.edge_count() as f64 / (f * n) as f64
    } else {
        0.0
    };
    let f2 = (f * f) as f64;
    let verdicts = Verdicts {
        stretch: ft.as_ref().map(|v| v.pass),
        degree: h.max_degree() as f64 <= bounds.degree,
        size: bounds.size_constant.map(|c| size_ratio <= c),
        lightness: bounds.lightness_constant.map(|c| lightness / f2 <= c),
    };
    let pass = verdicts.stretch.unwrap_or(true)
        && verdicts.degree
        && verdicts.size.unwrap_or(true)
        && verdicts.lightness.unwrap_or(true);
    AuditReport {
        n,
        f,
        eps: build.config.eps,
        bounds: bounds.clone(),
        ft,
        edge_count: h.edge_count(),
        max_degree: h.max_degree(),
        min_degree: if n > 0 { h.min_degree() } else { 0 },
        size_ratio,
        weight,
        mst_weight,
        lightness,
        lightness_per_f2: lightness / f2,
        class_weight_o: class_w[0],
        class_weight_inc: class_w[1],
        class_weight_com: class_w[2],
        f2_mst: f2 * mst_weight,
        max_level_incidence,
        incidence_violations,
        lnf_roots: lnf.roots.len(),
        lnf_radius_sum,
        lnf_radius_ratio: if mst_weight > 0.0 {
            lnf_radius_sum / mst_weight
        } else {
            0.0
        },
        verdicts,
        pass,
    }
}
