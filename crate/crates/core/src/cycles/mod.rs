//! Long cycles: witnesses, winding, budgeted existence searches, `Y_G` and the
//! interior set.
//!
//! A cycle is a closed trail: consecutive vertices adjacent, edges pairwise
//! distinct, vertices may repeat. It is long when each of its vertices has
//! another of its vertices at torus sup-distance at least `⌊r/4⌋`.
//!
//! Searches run on the long core of a cluster (bridges and vertices that see no
//! far vertex are stripped repeatedly). When `⌊r/4⌋ <= 1` every cycle is long and
//! all questions reduce to 2-edge-connectivity; otherwise closed trails are
//! enumerated depth-first under a budget of node expansions.

pub mod graph;
pub mod search;
pub mod wrap;

use serde::{Deserialize, Serialize};

use crate::cluster::{component_of, label_components, Cluster};
use crate::error::{Error, Result};
use crate::lattice::{EdgeId, Lattice, TorusGeometry, VertexId};
use crate::percolation::EdgeStates;

pub use graph::LocalGraph;
pub use search::{closed_trails, Walk};
pub use wrap::{edges_wrap, has_wrapping_cluster, OffsetUnionFind, WrapReport};

/// Node expansions allowed per query unless overridden.
pub const DEFAULT_BUDGET: u64 = 1_000_000;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Budget {
    limit: u64,
    used: u64,
}

impl Budget {
    pub fn new(limit: u64) -> Self {
        Budget { limit, used: 0 }
    }

    pub fn unlimited() -> Self {
        Budget::new(u64::MAX)
    }

    /// Spends one unit; false once the limit is reached.
    #[inline]
    pub fn tick(&mut self) -> bool {
        if self.used >= self.limit {
            return false;
        }
        self.used += 1;
        true
    }

    /// Spends `n` units at once (at least one).
    pub fn charge(&mut self, n: u64) -> bool {
        let n = n.max(1);
        if self.limit - self.used < n {
            self.used = self.limit;
            return false;
        }
        self.used += n;
        true
    }

    pub fn used(&self) -> u64 {
        self.used
    }

    pub fn limit(&self) -> u64 {
        self.limit
    }
}

/// A closed trail `x(1), …, x(m)` with `x(1) = x(m)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CycleWitness {
    vertices: Vec<VertexId>,
    #[serde(skip)]
    edges: Vec<EdgeId>,
    winding: Vec<i64>,
    length: usize,
    long: bool,
}

impl CycleWitness {
    /// Validates the vertex sequence and derives edges, winding and the long flag.
    pub fn from_vertices(g: &TorusGeometry, vertices: Vec<VertexId>) -> Result<Self> {
        if vertices.len() < 2 || vertices.first() != vertices.last() {
            return Err(Error::MalformedCycle("sequence must be closed and nonempty".into()));
        }
        if let Some(v) = vertices.iter().find(|v| v.0 >= g.volume()) {
            return Err(Error::MalformedCycle(format!("vertex {} out of range", v.0)));
        }
        let mut edges = Vec::with_capacity(vertices.len() - 1);
        for pair in vertices.windows(2) {
            let e = g
                .edge_between(pair[0], pair[1])
                .ok_or_else(|| Error::MalformedCycle(format!("{} and {} are not adjacent", pair[0].0, pair[1].0)))?;
            edges.push(e);
        }
        let mut sorted = edges.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::MalformedCycle("edge repeated".into()));
        }
        Ok(Self::from_parts(g, vertices, edges))
    }

    fn from_parts(g: &TorusGeometry, vertices: Vec<VertexId>, edges: Vec<EdgeId>) -> Self {
        let winding = winding_of(g, &vertices, &edges);
        let long = long_vertex_set(g, &vertices);
        let length = edges.len();
        CycleWitness { vertices, edges, winding, length, long }
    }

    pub(crate) fn from_local(lg: &LocalGraph, verts: &[u32], edges: &[u32]) -> Self {
        let vertices = verts.iter().map(|&v| lg.vertices[v as usize]).collect();
        let edges = edges.iter().map(|&e| lg.edges[e as usize]).collect();
        Self::from_parts(lg.geometry, vertices, edges)
    }

    pub fn vertices(&self) -> &[VertexId] {
        &self.vertices
    }

    pub fn edges(&self) -> &[EdgeId] {
        &self.edges
    }

    pub fn winding(&self) -> &[i64] {
        &self.winding
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn is_long(&self) -> bool {
        self.long
    }

    pub fn contains(&self, v: VertexId) -> bool {
        self.vertices.contains(&v)
    }

    pub fn reversed(&self, g: &TorusGeometry) -> Self {
        let mut vertices = self.vertices.clone();
        vertices.reverse();
        let mut edges = self.edges.clone();
        edges.reverse();
        Self::from_parts(g, vertices, edges)
    }

    /// Starts the same closed trail at position `k`.
    pub fn rotated(&self, g: &TorusGeometry, k: usize) -> Self {
        let m = self.edges.len();
        let k = k % m;
        let mut vertices: Vec<VertexId> = (0..m).map(|i| self.vertices[(i + k) % m]).collect();
        vertices.push(vertices[0]);
        let edges = (0..m).map(|i| self.edges[(i + k) % m]).collect();
        Self::from_parts(g, vertices, edges)
    }

    /// Every edge open in `states`.
    pub fn is_open_in<S: EdgeStates>(&self, states: &S) -> bool {
        self.edges.iter().all(|&e| states.is_open(e))
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("witness serializes")
    }

    /// Parses a JSON line and re-validates it against `g`.
    pub fn from_json_line(g: &TorusGeometry, line: &str) -> Result<Self> {
        let raw: CycleWitness = serde_json::from_str(line).map_err(|e| Error::MalformedCycle(e.to_string()))?;
        Self::from_vertices(g, raw.vertices)
    }
}

fn winding_of(g: &TorusGeometry, vertices: &[VertexId], edges: &[EdgeId]) -> Vec<i64> {
    let mut sum = vec![0i64; g.dim()];
    for (i, &e) in edges.iter().enumerate() {
        for (s, d) in sum.iter_mut().zip(g.displacement(e, vertices[i])) {
            *s += d;
        }
    }
    let r = g.side() as i64;
    debug_assert!(sum.iter().all(|s| s % r == 0));
    sum.iter().map(|s| s / r).collect()
}

/// Every listed vertex has another listed vertex at distance at least `⌊r/4⌋`.
pub fn long_vertex_set(g: &TorusGeometry, vertices: &[VertexId]) -> bool {
    let mut set = vertices.to_vec();
    set.sort_unstable();
    set.dedup();
    let radius = g.long_radius();
    set.iter().all(|&u| set.iter().any(|&v| g.distance(u, v) >= radius))
}

pub fn is_long_cycle(g: &TorusGeometry, cycle: &CycleWitness) -> Result<bool> {
    Ok(CycleWitness::from_vertices(g, cycle.vertices.clone())?.long)
}

pub fn winding_vector(g: &TorusGeometry, cycle: &CycleWitness) -> Result<Vec<i64>> {
    Ok(CycleWitness::from_vertices(g, cycle.vertices.clone())?.winding)
}

#[derive(Clone, Debug, PartialEq)]
pub enum Verdict<T = CycleWitness> {
    Yes(T),
    No,
    Unknown,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BudgetedAnswer<T = CycleWitness> {
    pub verdict: Verdict<T>,
    pub work: u64,
    pub budget: u64,
}

impl<T> BudgetedAnswer<T> {
    fn new(verdict: Verdict<T>, budget: &Budget) -> Self {
        BudgetedAnswer { verdict, work: budget.used(), budget: budget.limit() }
    }

    pub fn is_yes(&self) -> bool {
        matches!(self.verdict, Verdict::Yes(_))
    }

    pub fn is_no(&self) -> bool {
        matches!(self.verdict, Verdict::No)
    }

    pub fn is_unknown(&self) -> bool {
        matches!(self.verdict, Verdict::Unknown)
    }

    pub fn witness(&self) -> Option<&T> {
        match &self.verdict {
            Verdict::Yes(w) => Some(w),
            _ => None,
        }
    }
}

/// A closed trail in local indices.
#[derive(Clone, Debug)]
pub(crate) struct LocalTrail {
    pub verts: Vec<u32>,
    pub edges: Vec<u32>,
}

pub(crate) fn local_long(lg: &LocalGraph, verts: &[u32], radius: usize) -> bool {
    radius <= 1 || verts.iter().all(|&u| verts.iter().any(|&v| lg.distance(u, v) >= radius))
}

/// Shortest long fundamental cycle, optionally required to pass through `x`.
fn long_fundamental(lg: &LocalGraph, alive: &[bool], x: Option<u32>, radius: usize, max_len: usize, budget: &mut Budget) -> Option<Option<LocalTrail>> {
    let mut best: Option<LocalTrail> = None;
    for (verts, edges) in lg.fundamental_cycles(alive) {
        if !budget.tick() {
            return None;
        }
        if edges.len() > max_len || x.is_some_and(|x| !verts.contains(&x)) {
            continue;
        }
        if best.as_ref().is_some_and(|b| b.edges.len() <= edges.len()) {
            continue;
        }
        if local_long(lg, &verts, radius) {
            best = Some(LocalTrail { verts, edges });
        }
    }
    Some(best)
}

/// A long closed trail through `x` of at most `max_len` edges over `alive`,
/// which should already be a long core.
pub(crate) fn find_through(lg: &LocalGraph, alive: &[bool], x: u32, radius: usize, max_len: usize, budget: &mut Budget) -> Verdict<LocalTrail> {
    if lg.alive_degree(x, alive) == 0 {
        return Verdict::No;
    }
    if radius <= 1 {
        if !budget.tick() {
            return Verdict::Unknown;
        }
        let (found, work) = lg.shortest_cycle_through(x, alive, max_len);
        if !budget.charge(work) {
            return Verdict::Unknown;
        }
        return match found {
            Some((verts, edges)) => Verdict::Yes(LocalTrail { verts, edges }),
            None => Verdict::No,
        };
    }
    match long_fundamental(lg, alive, Some(x), radius, max_len, budget) {
        None => return Verdict::Unknown,
        Some(Some(t)) => return Verdict::Yes(t),
        Some(None) => {}
    }
    let mut found = None;
    let walk = closed_trails(lg, alive, x, max_len, budget, |verts, edges| {
        if local_long(lg, verts, radius) {
            found = Some(LocalTrail { verts: verts.to_vec(), edges: edges.to_vec() });
            true
        } else {
            false
        }
    });
    match walk {
        Walk::Stopped => Verdict::Yes(found.unwrap()),
        Walk::Exhausted => Verdict::No,
        Walk::OutOfBudget => Verdict::Unknown,
    }
}

/// Any long closed trail over `alive` (pruned to its long core first).
pub(crate) fn find_any(lg: &LocalGraph, alive: &[bool], radius: usize, budget: &mut Budget) -> Verdict<LocalTrail> {
    let mut core = alive.to_vec();
    lg.long_core(&mut core, radius);
    if !core.iter().any(|&a| a) {
        return Verdict::No;
    }
    match long_fundamental(lg, &core, None, radius, usize::MAX, budget) {
        None => return Verdict::Unknown,
        Some(Some(t)) => return Verdict::Yes(t),
        // with radius <= 1 every fundamental cycle of a nonempty core is long
        Some(None) => debug_assert!(radius >= 2),
    }
    // a long trail has a smallest vertex v; search through v avoiding earlier vertices
    for v in 0..lg.vertex_count() as u32 {
        if lg.alive_degree(v, &core) == 0 {
            continue;
        }
        match find_through(lg, &core, v, radius, usize::MAX, budget) {
            Verdict::No => {}
            other => return other,
        }
        for &(_, e) in &lg.adj[v as usize] {
            core[e as usize] = false;
        }
        lg.long_core(&mut core, radius);
    }
    Verdict::No
}

fn core_of(lg: &LocalGraph) -> Vec<bool> {
    let mut alive = vec![true; lg.edge_count()];
    lg.long_core(&mut alive, lg.geometry.long_radius());
    alive
}

fn lift(lg: &LocalGraph, v: Verdict<LocalTrail>) -> Verdict {
    match v {
        Verdict::Yes(t) => Verdict::Yes(CycleWitness::from_local(lg, &t.verts, &t.edges)),
        Verdict::No => Verdict::No,
        Verdict::Unknown => Verdict::Unknown,
    }
}

/// Is `x` on an open long cycle?
pub fn vertex_in_long_cycle<S: EdgeStates>(g: &TorusGeometry, states: &S, x: VertexId, budget: u64) -> BudgetedAnswer {
    let cluster = component_of(g, states, x);
    let mut budget = Budget::new(budget);
    let lg = LocalGraph::new(g, cluster.edges.iter().copied());
    let verdict = match lg.local_vertex(x) {
        None => Verdict::No,
        Some(lx) => {
            let core = core_of(&lg);
            lift(&lg, find_through(&lg, &core, lx, g.long_radius(), usize::MAX, &mut budget))
        }
    };
    BudgetedAnswer::new(verdict, &budget)
}

/// Does the cluster's open edge set contain a long cycle?
pub fn cluster_contains_long_cycle(g: &TorusGeometry, cluster: &Cluster, budget: u64) -> BudgetedAnswer {
    contains_long_cycle(g, &cluster.edges, budget)
}

/// Same question for an arbitrary edge set.
pub fn contains_long_cycle(g: &TorusGeometry, edges: &[EdgeId], budget: u64) -> BudgetedAnswer {
    let mut budget = Budget::new(budget);
    let lg = LocalGraph::new(g, edges.iter().copied());
    let alive = vec![true; lg.edge_count()];
    let verdict = lift(&lg, find_any(&lg, &alive, g.long_radius(), &mut budget));
    BudgetedAnswer::new(verdict, &budget)
}

/// Membership in `LC^(k)`: a long cycle through `x` with at most `k` edges.
pub fn shortest_long_cycle_through<S: EdgeStates>(g: &TorusGeometry, states: &S, x: VertexId, k: usize, budget: u64) -> BudgetedAnswer {
    let cluster = component_of(g, states, x);
    let mut budget = Budget::new(budget);
    let lg = LocalGraph::new(g, cluster.edges.iter().copied());
    let verdict = match lg.local_vertex(x) {
        None => Verdict::No,
        Some(lx) => {
            let core = core_of(&lg);
            lift(&lg, find_through(&lg, &core, lx, g.long_radius(), k, &mut budget))
        }
    };
    BudgetedAnswer::new(verdict, &budget)
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LongCycleCount {
    pub count: usize,
    /// Vertices whose query ran out of budget.
    pub unknown: usize,
    /// Longest long cycle exhibited while counting.
    pub longest_witness: usize,
}

impl LongCycleCount {
    pub fn is_clean(&self) -> bool {
        self.unknown == 0
    }
}

/// Counts vertices on open long cycles; `budget` applies per vertex query.
pub fn long_cycle_vertex_count<S: EdgeStates>(g: &TorusGeometry, states: &S, budget: u64) -> LongCycleCount {
    let comps = label_components(g, states);
    let mut out = LongCycleCount::default();
    for i in 0..comps.count() {
        if comps.edge_counts[i] < comps.sizes[i] {
            continue;
        }
        let cluster = comps.cluster(g, states, i);
        let c = count_in_cluster(g, &cluster, budget);
        out.count += c.count;
        out.unknown += c.unknown;
        out.longest_witness = out.longest_witness.max(c.longest_witness);
    }
    out
}

pub fn count_in_cluster(g: &TorusGeometry, cluster: &Cluster, budget: u64) -> LongCycleCount {
    let radius = g.long_radius();
    let lg = LocalGraph::new(g, cluster.edges.iter().copied());
    let core = core_of(&lg);
    let mut out = LongCycleCount::default();
    let on_core: Vec<u32> = (0..lg.vertex_count() as u32).filter(|&v| lg.alive_degree(v, &core) > 0).collect();
    if on_core.is_empty() {
        return out;
    }
    let fundamental = lg.fundamental_cycles(&core);
    if radius <= 1 {
        out.count = on_core.len();
        out.longest_witness = fundamental.iter().map(|c| c.1.len()).max().unwrap_or(0);
        return out;
    }
    let mut marked = vec![false; lg.vertex_count()];
    for (verts, edges) in &fundamental {
        if local_long(&lg, verts, radius) {
            out.longest_witness = out.longest_witness.max(edges.len());
            verts.iter().for_each(|&v| marked[v as usize] = true);
        }
    }
    for &v in &on_core {
        if marked[v as usize] {
            continue;
        }
        let mut b = Budget::new(budget);
        match find_through(&lg, &core, v, radius, usize::MAX, &mut b) {
            Verdict::Yes(t) => {
                out.longest_witness = out.longest_witness.max(t.edges.len());
                t.verts.iter().for_each(|&w| marked[w as usize] = true);
            }
            Verdict::No => {}
            Verdict::Unknown => out.unknown += 1,
        }
    }
    out.count = on_core.iter().filter(|&&v| marked[v as usize]).count();
    out
}

/// `Y_G` together with its cheap upper bound.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct YAnswer {
    /// `None` when the search ran out of budget.
    pub value: Option<usize>,
    /// Tree excess `|E| - |V| + 1` of the cluster, an upper bound on `Y`.
    pub surplus: usize,
    pub work: u64,
}

/// Minimum number of edges whose removal leaves no long cycle. Long cycles live
/// inside single 2-edge-connected pieces of the long core, so `Y` is a sum over
/// pieces; within a piece the value is found by hitting-set branching on the
/// edges of one long witness at a time, for increasing `k`.
pub fn compute_y(g: &TorusGeometry, cluster: &Cluster, budget: u64) -> YAnswer {
    let mut budget = Budget::new(budget);
    let lg = LocalGraph::new(g, cluster.edges.iter().copied());
    let value = y_of_edges(&lg, &vec![true; lg.edge_count()], g.long_radius(), &mut budget);
    YAnswer { value, surplus: cluster.surplus(), work: budget.used() }
}

pub(crate) fn y_of_edges(lg: &LocalGraph, alive: &[bool], radius: usize, budget: &mut Budget) -> Option<usize> {
    let mut core = alive.to_vec();
    lg.long_core(&mut core, radius);
    if radius <= 1 {
        return Some(lg.cyclomatic(&core));
    }
    let (label, count) = lg.components(&core);
    let mut total = 0;
    for piece in 0..count as u32 {
        let mut mask: Vec<bool> = core
            .iter()
            .enumerate()
            .map(|(e, &a)| a && label[lg.ends[e].0 as usize] == piece)
            .collect();
        let c = lg.cyclomatic(&mask);
        let mut found = None;
        for k in 0..=c {
            match hits_all(lg, &mut mask, k, radius, budget) {
                Some(true) => {
                    found = Some(k);
                    break;
                }
                Some(false) => {}
                None => return None,
            }
        }
        total += found.expect("removing a cycle basis always suffices");
    }
    Some(total)
}

/// Can `k` alive edges be removed so that no long trail remains?
fn hits_all(lg: &LocalGraph, alive: &mut [bool], k: usize, radius: usize, budget: &mut Budget) -> Option<bool> {
    let mut core = alive.to_vec();
    lg.long_core(&mut core, radius);
    if !core.iter().any(|&a| a) {
        return Some(true);
    }
    if lg.cyclomatic(&core) <= k {
        return Some(true);
    }
    let trail = match find_any(lg, &core, radius, budget) {
        Verdict::No => return Some(true),
        Verdict::Unknown => return None,
        Verdict::Yes(t) => t,
    };
    if k == 0 {
        return Some(false);
    }
    let mut edges = trail.edges;
    edges.sort_unstable();
    let mut unknown = false;
    for e in edges {
        core[e as usize] = false;
        let r = hits_all(lg, &mut core, k - 1, radius, budget);
        core[e as usize] = true;
        match r {
            Some(true) => return Some(true),
            Some(false) => {}
            None => unknown = true,
        }
    }
    if unknown {
        None
    } else {
        Some(false)
    }
}

/// Lower approximation of `𝓘`: vertices `z` with a long cycle through `z` and an
/// open path from `root` to `z` sharing no edge with it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InteriorSet {
    pub members: Vec<VertexId>,
    /// True when every other cluster vertex was certified outside.
    pub exact: bool,
    pub work: u64,
}

pub fn interior_set<S: EdgeStates>(g: &TorusGeometry, states: &S, root: VertexId, budget: u64) -> InteriorSet {
    let radius = g.long_radius();
    let cluster = component_of(g, states, root);
    let mut budget = Budget::new(budget);
    let lg = LocalGraph::new(g, cluster.edges.iter().copied());
    let mut members = Vec::new();
    let mut exact = true;
    let Some(lroot) = lg.local_vertex(root) else {
        return InteriorSet { members, exact, work: 0 };
    };
    let core = core_of(&lg);
    let everything = vec![true; lg.edge_count()];
    for z in 0..lg.vertex_count() as u32 {
        if lg.alive_degree(z, &core) == 0 {
            continue;
        }
        let verdict = if z == lroot {
            match find_through(&lg, &core, z, radius, usize::MAX, &mut budget) {
                Verdict::Yes(_) => Some(true),
                Verdict::No => Some(false),
                Verdict::Unknown => None,
            }
        } else {
            let mut rest = everything.clone();
            let walk = closed_trails(&lg, &core, z, usize::MAX, &mut budget, |verts, edges| {
                if !local_long(&lg, verts, radius) {
                    return false;
                }
                edges.iter().for_each(|&e| rest[e as usize] = false);
                let reach = lg.bfs(lroot, &rest)[z as usize] != u32::MAX;
                edges.iter().for_each(|&e| rest[e as usize] = true);
                reach
            });
            match walk {
                Walk::Stopped => Some(true),
                Walk::Exhausted => Some(false),
                Walk::OutOfBudget => None,
            }
        };
        match verdict {
            Some(true) => members.push(lg.vertices[z as usize]),
            Some(false) => {}
            None => exact = false,
        }
    }
    InteriorSet { members, exact, work: budget.used() }
}
