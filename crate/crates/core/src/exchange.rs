//! Exchange graphs and the path constructions built on them.
//!
//! For a non-wasteful allocation `A`, the exchange graph has an edge
//! `(g, g')` whenever the owner `i` of `g` can swap `g` for `g'` and keep
//! `A_i` independent. Augmenting along a shortest path from an agent's free
//! goods moves one unit of value to that agent while every bundle stays
//! independent. The reverse construction walks the other way, from a bundle
//! that grew under a misreport back to an agent that shrank.

use std::collections::{BTreeMap, VecDeque};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::goods::{Good, GoodSet};
use crate::instances::{Agent, Allocation, Instance};
use crate::matroid::Valuation;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExchangeGraph {
    owner: Vec<Option<Agent>>,
    out: Vec<GoodSet>,
}

impl ExchangeGraph {
    /// Builds `G(A)`. `A` must be non-wasteful and every valuation a matroid.
    pub fn build(inst: &Instance, a: &Allocation) -> Result<Self> {
        a.check_for(inst)?;
        if let Some(v) = inst.valuations().iter().find(|v| !v.is_matroid_kind()) {
            return Err(Error::UnsupportedKind(format!(
                "exchange graphs need matroid valuations, got {}",
                v.kind_name()
            )));
        }
        if !inst.is_non_wasteful_unchecked(a) {
            return Err(Error::Precondition(
                "exchange graph of a wasteful allocation".into(),
            ));
        }
        Ok(Self::build_unchecked(inst, a))
    }

    pub(crate) fn build_unchecked(inst: &Instance, a: &Allocation) -> Self {
        let m = inst.m();
        let full = inst.goods();
        let mut owner = vec![None; m];
        let mut out = vec![GoodSet::EMPTY; m];
        for (i, &bundle) in a.bundles.iter().enumerate() {
            let v = inst.valuation(i);
            let size = bundle.len();
            for g in bundle.iter() {
                owner[g] = Some(i);
                let rest = bundle.without(g);
                out[g] = full
                    .difference(bundle)
                    .iter()
                    .filter(|&h| v.rank(rest.with(h)) == size)
                    .collect();
            }
        }
        ExchangeGraph { owner, out }
    }

    pub fn m(&self) -> usize {
        self.owner.len()
    }

    pub fn owner(&self, g: Good) -> Option<Agent> {
        self.owner[g]
    }

    pub fn out_neighbors(&self, g: Good) -> GoodSet {
        self.out[g]
    }

    pub fn has_edge(&self, g: Good, h: Good) -> bool {
        self.out[g].contains(h)
    }

    /// Edges in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (Good, Good)> + '_ {
        self.out
            .iter()
            .enumerate()
            .flat_map(|(g, nbrs)| nbrs.iter().map(move |h| (g, h)))
    }

    pub fn edge_count(&self) -> usize {
        self.out.iter().map(|n| n.len()).sum()
    }

    /// Breadth-first search from `sources` to `sinks`. Sources and
    /// neighbours are expanded in ascending id order, and the first sink
    /// discovered ends the search, so the result is deterministic.
    pub fn shortest_path(&self, sources: GoodSet, sinks: GoodSet) -> Option<AugPath> {
        self.bfs(sources, sinks).map(|vertices| AugPath {
            vertices,
            direction: PathDirection::Forward,
        })
    }

    /// Number of edges on a shortest `sources -> sinks` path.
    pub fn distance(&self, sources: GoodSet, sinks: GoodSet) -> Option<usize> {
        self.bfs(sources, sinks).map(|p| p.len() - 1)
    }

    fn bfs(&self, sources: GoodSet, sinks: GoodSet) -> Option<Vec<Good>> {
        let m = self.m();
        let full = GoodSet::full(m);
        let (sources, sinks) = (sources.intersection(full), sinks.intersection(full));
        if let Some(g) = sources.intersection(sinks).first() {
            return Some(vec![g]);
        }
        let mut parent: Vec<Option<Good>> = vec![None; m];
        let mut seen = sources;
        let mut queue: VecDeque<Good> = sources.iter().collect();
        while let Some(g) = queue.pop_front() {
            for h in self.out[g].difference(seen).iter() {
                seen.insert(h);
                parent[h] = Some(g);
                if sinks.contains(h) {
                    let mut path = vec![h];
                    let mut cur = h;
                    while let Some(p) = parent[cur] {
                        path.push(p);
                        cur = p;
                    }
                    path.reverse();
                    return Some(path);
                }
                queue.push_back(h);
            }
        }
        None
    }

    /// Graphviz rendering. Vertices are labelled `g<id>/agent<i>` or
    /// `g<id>/free`; each edge is on its own line.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph exchange {\n");
        for (g, owner) in self.owner.iter().enumerate() {
            let label = match owner {
                Some(i) => format!("g{g}/agent{i}"),
                None => format!("g{g}/free"),
            };
            let _ = writeln!(out, "  g{g} [label=\"{label}\"];");
        }
        for (g, h) in self.edges() {
            let _ = writeln!(out, "  g{g} -> g{h};");
        }
        out.push_str("}\n");
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathDirection {
    /// From an agent's free goods towards a sink bundle.
    Forward,
    /// From a shrinking agent's bundle back to a growing agent's bundle.
    Reverse,
}

/// A simple directed path, listed from source to sink.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AugPath {
    pub vertices: Vec<Good>,
    pub direction: PathDirection,
}

impl AugPath {
    pub fn source(&self) -> Good {
        self.vertices[0]
    }

    pub fn sink(&self) -> Good {
        *self.vertices.last().expect("paths are nonempty")
    }

    /// Number of edges.
    pub fn len(&self) -> usize {
        self.vertices.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.len() <= 1
    }

    pub fn is_simple(&self) -> bool {
        let set: GoodSet = self.vertices.iter().copied().collect();
        set.len() == self.vertices.len()
    }

    /// Every consecutive pair is an edge of `graph`.
    pub fn lies_in(&self, graph: &ExchangeGraph) -> bool {
        self.vertices.windows(2).all(|w| graph.has_edge(w[0], w[1]))
    }
}

/// Where the last vertex of a forward path is taken from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sink {
    /// The path ends at an unallocated good; nobody loses.
    Unallocated,
    /// The path ends in this agent's bundle, which loses its last vertex.
    Agent(Agent),
}

impl Sink {
    fn goods(self, a: &Allocation, m: usize) -> GoodSet {
        match self {
            Sink::Unallocated => a.unallocated(m),
            Sink::Agent(j) => a.bundle(j),
        }
    }
}

/// `F_i(A_i)` for the agent's own bundle.
pub fn free_goods_of(inst: &Instance, a: &Allocation, i: Agent) -> GoodSet {
    inst.valuation(i).free_goods_unchecked(a.bundle(i))
}

/// Shortest path from `F_i(A_i)` to the unallocated goods.
pub fn growth_path(
    inst: &Instance,
    a: &Allocation,
    graph: &ExchangeGraph,
    i: Agent,
) -> Option<AugPath> {
    graph.shortest_path(free_goods_of(inst, a, i), a.unallocated(inst.m()))
}

/// Augments `a` along the shortest path `q` so that `gainer` grows by one.
///
/// The path must run from `F_gainer(A_gainer)` to `sink`, and must be a
/// shortest such path; both are re-checked here. Every resulting bundle is
/// re-verified independent.
pub fn augment_forward(
    inst: &Instance,
    a: &Allocation,
    q: &AugPath,
    gainer: Agent,
    sink: Sink,
) -> Result<Allocation> {
    let graph = ExchangeGraph::build(inst, a)?;
    if gainer >= inst.n() {
        return Err(Error::Input(format!("agent {gainer} does not exist")));
    }
    if let Sink::Agent(j) = sink {
        if j >= inst.n() || j == gainer {
            return Err(Error::Precondition(format!(
                "sink agent {j} is invalid for gainer {gainer}"
            )));
        }
    }
    let m = inst.m();
    if q.vertices.is_empty() || q.vertices.iter().any(|&g| g >= m) {
        return Err(Error::Input(
            "path is empty or leaves the ground set".into(),
        ));
    }
    let sources = free_goods_of(inst, a, gainer);
    let sinks = sink.goods(a, m);
    if !sources.contains(q.source()) || !sinks.contains(q.sink()) {
        return Err(Error::Precondition(format!(
            "path must start in F_{gainer} = {sources} and end in {sinks}"
        )));
    }
    if !q.is_simple() || !q.lies_in(&graph) {
        return Err(Error::Precondition(
            "path is not a simple path of the exchange graph".into(),
        ));
    }
    if graph.distance(sources, sinks) != Some(q.len()) {
        return Err(Error::Precondition(format!(
            "path with {} edges is not a shortest path",
            q.len()
        )));
    }
    let result = apply_forward(a, &q.vertices, gainer, sink, &graph);
    verify_forward(inst, a, &result, gainer, sink)?;
    Ok(result)
}

/// Swaps along the path and hands the source to the gainer. No checks.
pub(crate) fn apply_forward(
    a: &Allocation,
    vertices: &[Good],
    gainer: Agent,
    sink: Sink,
    graph: &ExchangeGraph,
) -> Allocation {
    let mut bundles = a.bundles.clone();
    for w in vertices.windows(2) {
        if let Some(k) = graph.owner(w[0]) {
            bundles[k].remove(w[0]);
            bundles[k].insert(w[1]);
        }
    }
    if let Sink::Agent(j) = sink {
        bundles[j].remove(*vertices.last().expect("nonempty"));
    }
    // the source may still sit in its previous owner's bundle only when the
    // path is a single vertex owned by the sink agent, which was removed above
    bundles[gainer].insert(vertices[0]);
    Allocation { bundles }
}

fn verify_forward(
    inst: &Instance,
    before: &Allocation,
    after: &Allocation,
    gainer: Agent,
    sink: Sink,
) -> Result<()> {
    if let Err(e) = Allocation::new(after.bundles.clone()) {
        return Err(Error::Internal(format!(
            "augmentation produced overlapping bundles: {e}"
        )));
    }
    for i in 0..inst.n() {
        let expected = before.bundle(i).len() as isize + isize::from(i == gainer)
            - isize::from(sink == Sink::Agent(i));
        if after.bundle(i).len() as isize != expected {
            return Err(Error::Internal(format!(
                "agent {i} holds {} goods after augmentation, expected {expected}",
                after.bundle(i).len()
            )));
        }
        if !inst.valuation(i).is_independent(after.bundle(i)) {
            return Err(Error::Internal(format!(
                "agent {i}'s bundle {} is dependent after augmentation",
                after.bundle(i)
            )));
        }
    }
    Ok(())
}

/// For independent `a_set`, `b_set` of equal size and `x ∈ A \ B`, finds the
/// lowest `y ∈ B \ A` with `A - x + y` and `B - y + x` both independent.
pub fn strong_basis_exchange(
    v: &Valuation,
    a_set: GoodSet,
    b_set: GoodSet,
    x: Good,
) -> Result<Good> {
    if !v.is_matroid_kind() {
        return Err(Error::UnsupportedKind(format!(
            "basis exchange on {}",
            v.kind_name()
        )));
    }
    let full = v.ground();
    if !a_set.is_subset(full) || !b_set.is_subset(full) {
        return Err(Error::Input("sets leave the ground set".into()));
    }
    if !v.is_independent(a_set) || !v.is_independent(b_set) {
        return Err(Error::Precondition("both sets must be independent".into()));
    }
    if a_set.len() != b_set.len() {
        return Err(Error::Precondition(format!(
            "sets must have equal size, got {} and {}",
            a_set.len(),
            b_set.len()
        )));
    }
    if !a_set.difference(b_set).contains(x) {
        return Err(Error::Precondition(format!("good {x} is not in A \\ B")));
    }
    b_set
        .difference(a_set)
        .iter()
        .find(|&y| {
            v.is_independent(a_set.without(x).with(y)) && v.is_independent(b_set.without(y).with(x))
        })
        .ok_or_else(|| {
            Error::Internal(format!(
                "no exchange partner for good {x}; the oracle is not a matroid"
            ))
        })
}

/// Extends an exchange matching `mu: S -> X \ A` by one more pair.
///
/// Given `new_good ∈ A \ (S + X)`, returns the lowest
/// `partner ∈ X \ (mu(S) + A)` with `X - partner + new_good` independent and
/// `A - (S + new_good) + (mu(S) + partner)` independent.
///
/// Without `shrunk` the bundle `X` must be at least as large as `A`. With
/// `shrunk`, `X` is smaller than `A` and must extend to `|A|` using goods of
/// `A \ (X + S + new_good)`.
pub fn extend_exchange_matching(
    v: &Valuation,
    a_set: GoodSet,
    x_set: GoodSet,
    mu: &BTreeMap<Good, Good>,
    new_good: Good,
    shrunk: bool,
) -> Result<Good> {
    if !v.is_matroid_kind() {
        return Err(Error::UnsupportedKind(format!(
            "exchange matching on {}",
            v.kind_name()
        )));
    }
    let full = v.ground();
    if !a_set.is_subset(full) || !x_set.is_subset(full) || new_good >= v.m() {
        return Err(Error::Input("sets leave the ground set".into()));
    }
    if !v.is_independent(a_set) || !v.is_independent(x_set) {
        return Err(Error::Precondition("A and X must be independent".into()));
    }
    let s_set: GoodSet = mu.keys().copied().collect();
    let image: GoodSet = mu.values().copied().collect();
    if image.len() != mu.len() {
        return Err(Error::Precondition("matching is not one-to-one".into()));
    }
    if !s_set.is_subset(a_set.difference(x_set)) || !image.is_subset(x_set.difference(a_set)) {
        return Err(Error::Precondition(
            "matching must map A \\ X into X \\ A".into(),
        ));
    }
    if let Some((&g, &h)) = mu
        .iter()
        .find(|(&g, &h)| !v.is_independent(x_set.without(h).with(g)))
    {
        return Err(Error::Precondition(format!("X - {h} + {g} is dependent")));
    }
    if !v.is_independent(a_set.difference(s_set).union(image)) {
        return Err(Error::Precondition("A - S + mu(S) is dependent".into()));
    }
    if !a_set.difference(s_set.union(x_set)).contains(new_good) {
        return Err(Error::Precondition(format!(
            "good {new_good} is not in A \\ (S + X)"
        )));
    }
    if shrunk {
        if x_set.len() >= a_set.len() {
            return Err(Error::Precondition("|X| < |A| required".into()));
        }
        // greedy extension is maximal in a matroid, so this decides whether
        // some Y avoiding S and new_good lifts X to |A|
        let pool = a_set.difference(x_set.union(s_set).with(new_good));
        let mut lifted = x_set;
        for g in pool.iter() {
            if v.is_independent(lifted.with(g)) {
                lifted.insert(g);
            }
        }
        if lifted.len() < a_set.len() {
            return Err(Error::Precondition(
                "X cannot be extended to |A| without S or the new good".into(),
            ));
        }
        if v.is_independent(x_set.with(new_good)) {
            return Err(Error::Precondition(format!(
                "good {new_good} extends X, so it may lie in the lifting set"
            )));
        }
    } else if x_set.len() < a_set.len() {
        return Err(Error::Precondition("|X| >= |A| required".into()));
    }

    let base = a_set.difference(s_set.with(new_good)).union(image);
    x_set
        .difference(image.union(a_set))
        .iter()
        .find(|&p| {
            v.is_independent(x_set.without(p).with(new_good)) && v.is_independent(base.with(p))
        })
        .ok_or_else(|| Error::Internal(format!("no matching partner for good {new_good}")))
}

/// Output of [`find_reverse_path`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReversePath {
    /// `(g_k, ..., g_1)`, a path of `G(X)`.
    pub path: AugPath,
    /// The agent `l` with `|X_l| < |A_l|` whose bundle holds the source.
    pub loser: Agent,
    /// `A` swapped along the path, with `g_1` added for `h` and `g_k` taken
    /// from `l`.
    pub reversed: Allocation,
}

/// Builds a path `(g_k, ..., g_1)` in `G(X)` with `g_1 ∈ X_h` and
/// `g_k ∈ A_l ∩ F_l(X_l)` for some `l` with `|X_l| < |A_l|`, such that `A`
/// swapped along the path stays independent for every agent.
///
/// The path grows backwards from the lowest `g_1 ∈ X_h ∩ F_h(A_h)`. At each
/// step the current source `g_t` belongs to some `A_i`; if `i` has shrunk
/// under `X` and can take `g_t` back, we stop. Otherwise an exchange
/// matching of `A_i` against `X_i` is extended by one pair, and its new
/// partner becomes `g_{t+1}`.
pub fn find_reverse_path(
    inst: &Instance,
    x: &Allocation,
    a: &Allocation,
    h: Agent,
) -> Result<ReversePath> {
    let graph = ExchangeGraph::build(inst, x)?;
    a.check_for(inst)?;
    if !inst.is_non_wasteful_unchecked(a) {
        return Err(Error::Precondition("A must be non-wasteful".into()));
    }
    if h >= inst.n() || x.bundle(h).len() <= a.bundle(h).len() {
        return Err(Error::Precondition(format!(
            "agent {h} must hold more goods in X than in A"
        )));
    }
    let m = inst.m();
    let shrunk = |i: Agent| x.bundle(i).len() < a.bundle(i).len();

    let v_h = inst.valuation(h);
    let g1 = x
        .bundle(h)
        .intersection(v_h.free_goods_unchecked(a.bundle(h)))
        .first()
        .ok_or_else(|| Error::Internal("X_h ∩ F_h(A_h) is empty despite |X_h| > |A_h|".into()))?;

    // reverse order: path[0] = g_1
    let mut path = vec![g1];
    let mut on_path = GoodSet::singleton(g1);
    let loser = loop {
        let gt = *path.last().expect("nonempty");
        let Some(i) = a.owner(gt) else {
            let improved = reverse_swap(inst, a, &path, h, None);
            return Err(Error::NotParetoEfficient { good: gt, improved });
        };
        let (a_i, x_i) = (a.bundle(i), x.bundle(i));
        let v_i = inst.valuation(i);
        if shrunk(i) && v_i.is_independent(x_i.with(gt)) {
            break i;
        }
        if path.len() >= m {
            return Err(Error::Internal(format!(
                "reverse path exceeded {m} vertices"
            )));
        }
        // mu pairs every earlier path vertex in A_i with its successor
        let mu: BTreeMap<Good, Good> = path[..path.len() - 1]
            .iter()
            .enumerate()
            .filter(|&(_, &g)| a_i.contains(g))
            .map(|(j, &g)| (g, path[j + 1]))
            .collect();
        let a_side = if i == h { a_i.with(g1) } else { a_i };
        let next = extend_exchange_matching(v_i, a_side, x_i, &mu, gt, shrunk(i))?;
        if on_path.contains(next) {
            return Err(Error::Internal(format!(
                "reverse path revisits good {next}"
            )));
        }
        on_path.insert(next);
        path.push(next);
    };

    let reversed = reverse_swap(inst, a, &path, h, Some(loser));
    path.reverse();
    let result = ReversePath {
        path: AugPath {
            vertices: path,
            direction: PathDirection::Reverse,
        },
        loser,
        reversed,
    };
    verify_reverse(inst, x, a, h, &graph, &result)?;
    Ok(result)
}

/// `A_i Δ {g_{j+1}, g_j : g_j ∈ A_i}` for every agent, plus `g_1` for `h`,
/// minus the source for `loser`. `path` is in reverse order (`path[0] = g_1`).
fn reverse_swap(
    inst: &Instance,
    a: &Allocation,
    path: &[Good],
    h: Agent,
    loser: Option<Agent>,
) -> Allocation {
    let mut bundles = a.bundles.clone();
    for j in 0..path.len().saturating_sub(1) {
        if let Some(i) = a.owner(path[j]) {
            bundles[i].remove(path[j]);
            bundles[i].insert(path[j + 1]);
        }
    }
    if let Some(l) = loser {
        bundles[l].remove(*path.last().expect("nonempty"));
    }
    bundles[h].insert(path[0]);
    debug_assert_eq!(bundles.len(), inst.n());
    Allocation { bundles }
}

fn verify_reverse(
    inst: &Instance,
    x: &Allocation,
    a: &Allocation,
    h: Agent,
    graph: &ExchangeGraph,
    r: &ReversePath,
) -> Result<()> {
    let l = r.loser;
    let p = &r.path;
    if !p.is_simple() || !p.lies_in(graph) {
        return Err(Error::Internal(
            "reverse path is not a simple path of G(X)".into(),
        ));
    }
    if !x.bundle(h).contains(p.sink()) {
        return Err(Error::Internal("reverse path does not end in X_h".into()));
    }
    let source_ok = a.bundle(l).contains(p.source())
        && inst
            .valuation(l)
            .is_independent(x.bundle(l).with(p.source()))
        && !x.bundle(l).contains(p.source())
        && x.bundle(l).len() < a.bundle(l).len();
    if !source_ok {
        return Err(Error::Internal(
            "reverse path source is not in A_l ∩ F_l(X_l)".into(),
        ));
    }
    if Allocation::new(r.reversed.bundles.clone()).is_err() {
        return Err(Error::Internal("reversed bundles overlap".into()));
    }
    for i in 0..inst.n() {
        let expected = a.bundle(i).len() + usize::from(i == h) - usize::from(i == l);
        if r.reversed.bundle(i).len() != expected
            || !inst.valuation(i).is_independent(r.reversed.bundle(i))
        {
            return Err(Error::Internal(format!(
                "reversed bundle of agent {i} fails its check"
            )));
        }
    }
    Ok(())
}
