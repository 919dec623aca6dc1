//! Two-stage exploration of a cluster: a depth-first spanning tree with surplus
//! edges left unread, then selection of the special edges whose status decides
//! whether the cluster has a long cycle.

use std::collections::{HashMap, HashSet};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::cluster::{component_of, label_components};
use crate::cycles::{contains_long_cycle, find_any, Budget, LocalGraph, Verdict};
use crate::error::{Error, Result};
use crate::estimators::Summary;
use crate::lattice::{EdgeId, Lattice, TorusGeometry, VertexId};
use crate::percolation::{replica_rng, stream_id, BondConfig, EdgeStates, Instrumented};

const TAG_CONFIG: u8 = 0x30;
const TAG_PICK: u8 = 0x31;

/// A surplus edge `{a, b}` with `b` on the tree path from `a` to the root.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct SurplusEdge {
    pub edge: EdgeId,
    pub deep: VertexId,
    pub ancestor: VertexId,
}

#[derive(Clone, Debug)]
pub struct Stage1Result {
    pub root: VertexId,
    /// Discovery order, root first.
    pub vertices: Vec<VertexId>,
    /// Parent index into `vertices` and the tree edge to it.
    pub parent: Vec<Option<(usize, EdgeId)>>,
    pub depth: Vec<usize>,
    /// Explored edges with their status, in exploration order.
    pub explored: Vec<(EdgeId, bool)>,
    pub surplus: Vec<SurplusEdge>,
    index: HashMap<VertexId, usize>,
}

impl Stage1Result {
    pub fn size(&self) -> usize {
        self.vertices.len()
    }

    pub fn index_of(&self, v: VertexId) -> Option<usize> {
        self.index.get(&v).copied()
    }

    pub fn tree_edges(&self) -> Vec<EdgeId> {
        let mut out: Vec<EdgeId> = self.parent.iter().flatten().map(|&(_, e)| e).collect();
        out.sort_unstable();
        out
    }

    /// Is `anc` on the tree path from `v` to the root (excluding `v` itself)?
    pub fn is_proper_ancestor(&self, anc: VertexId, v: VertexId) -> bool {
        let (Some(a), Some(mut cur)) = (self.index_of(anc), self.index_of(v)) else {
            return false;
        };
        while let Some((p, _)) = self.parent[cur] {
            if p == a {
                return true;
            }
            cur = p;
        }
        false
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ViolationKind {
    /// The extendable vertices do not form a root path with a unique deepest end.
    Uniqueness,
    /// A surplus edge whose endpoints are not in ancestor relation.
    Ancestry,
    Partition,
    TreeMismatch,
    LongCycleInG,
    Certificate,
    KillSwitch,
    ReadDiscipline,
    /// A verification query ran out of budget.
    Undecided,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub detail: String,
}

fn violation(kind: ViolationKind, detail: impl Into<String>) -> Violation {
    Violation { kind, detail: detail.into() }
}

/// Stage 1 verbatim. Surplus edges are never read.
pub fn depth_first_explore<S: EdgeStates>(g: &TorusGeometry, states: &S, x: VertexId) -> Stage1Result {
    stage_one(g, states, x, None)
}

fn sorted_incident(g: &TorusGeometry, v: VertexId) -> Vec<(EdgeId, VertexId)> {
    let mut inc: Vec<(EdgeId, VertexId)> = g.neighbors(v).into_iter().map(|(w, e)| (e, w)).collect();
    inc.sort_unstable();
    inc
}

fn stage_one<S: EdgeStates>(g: &TorusGeometry, states: &S, x: VertexId, mut check: Option<&mut Vec<Violation>>) -> Stage1Result {
    let mut s = Stage1Result {
        root: x,
        vertices: vec![x],
        parent: vec![None],
        depth: vec![0],
        explored: Vec::new(),
        surplus: Vec::new(),
        index: HashMap::from([(x, 0)]),
    };
    let mut incident = vec![sorted_incident(g, x)];
    let mut cursor = vec![0usize];
    let mut seen: HashSet<EdgeId> = HashSet::new();
    let mut stack = vec![0usize];
    loop {
        while let Some(&top) = stack.last() {
            while cursor[top] < incident[top].len() && seen.contains(&incident[top][cursor[top]].0) {
                cursor[top] += 1;
            }
            if cursor[top] < incident[top].len() {
                break;
            }
            stack.pop();
        }
        if let Some(out) = check.as_deref_mut() {
            check_extendable(&s, &incident, &seen, stack.last().copied(), out);
        }
        let Some(&a) = stack.last() else { break };
        let (e, b) = incident[a][cursor[a]];
        cursor[a] += 1;
        seen.insert(e);
        match s.index.get(&b) {
            Some(&bi) => s.surplus.push(SurplusEdge { edge: e, deep: s.vertices[a], ancestor: s.vertices[bi] }),
            None => {
                let open = states.is_open(e);
                s.explored.push((e, open));
                if open {
                    let bi = s.vertices.len();
                    s.index.insert(b, bi);
                    s.vertices.push(b);
                    s.parent.push(Some((a, e)));
                    s.depth.push(s.depth[a] + 1);
                    incident.push(sorted_incident(g, b));
                    cursor.push(0);
                    stack.push(bi);
                }
            }
        }
    }
    if let Some(out) = check {
        for se in &s.surplus {
            if !s.is_proper_ancestor(se.ancestor, se.deep) {
                out.push(violation(ViolationKind::Ancestry, format!("surplus edge {} ({} -> {})", se.edge.0, se.deep.0, se.ancestor.0)));
            }
        }
    }
    s
}

/// Brute-force check that the extendable vertices lie on one root path whose
/// deepest vertex is the one the stack picked.
fn check_extendable(s: &Stage1Result, incident: &[Vec<(EdgeId, VertexId)>], seen: &HashSet<EdgeId>, picked: Option<usize>, out: &mut Vec<Violation>) {
    let ext: Vec<usize> = (0..s.vertices.len()).filter(|&i| incident[i].iter().any(|(e, _)| !seen.contains(e))).collect();
    let Some(&deepest) = ext.iter().max_by_key(|&&i| s.depth[i]) else {
        if picked.is_some() {
            out.push(violation(ViolationKind::Uniqueness, "stack picked a vertex with nothing to explore"));
        }
        return;
    };
    let max_depth = s.depth[deepest];
    if ext.iter().filter(|&&i| s.depth[i] == max_depth).count() != 1 {
        out.push(violation(ViolationKind::Uniqueness, format!("several extendable vertices at depth {max_depth}")));
        return;
    }
    if picked != Some(deepest) {
        out.push(violation(ViolationKind::Uniqueness, format!("picked {picked:?}, deepest extendable is {deepest}")));
    }
    let mut on_path = HashSet::from([deepest]);
    let mut cur = deepest;
    while let Some((p, _)) = s.parent[cur] {
        on_path.insert(p);
        cur = p;
    }
    if let Some(&off) = ext.iter().find(|i| !on_path.contains(i)) {
        out.push(violation(ViolationKind::Uniqueness, format!("extendable vertex {} off the root path", s.vertices[off].0)));
    }
}

/// `B_x` in processing order together with the auxiliary tree.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BranchOrder {
    /// Ascending numbering: aux-tree depth, then tree depth, then vertex id.
    pub order: Vec<VertexId>,
    /// Aux-tree parent of each entry of `order`; `None` for the root itself.
    pub aux_parent: Vec<Option<VertexId>>,
    pub aux_depth: Vec<usize>,
}

pub fn order_branch_vertices(s1: &Stage1Result) -> BranchOrder {
    let mut members: Vec<usize> = s1
        .surplus
        .iter()
        .map(|se| {
            assert!(s1.is_proper_ancestor(se.ancestor, se.deep), "surplus edge {} is not oriented towards the root", se.edge.0);
            s1.index_of(se.ancestor).unwrap()
        })
        .collect();
    members.sort_unstable();
    members.dedup();
    let is_member: HashSet<usize> = members.iter().copied().collect();
    // ancestors first, so aux depths are known when needed
    members.sort_by_key(|&i| s1.depth[i]);
    let mut aux: HashMap<usize, (Option<usize>, usize)> = HashMap::new();
    for &b in &members {
        if b == 0 {
            aux.insert(b, (None, 0));
            continue;
        }
        let mut cur = b;
        let mut found = None;
        while let Some((p, _)) = s1.parent[cur] {
            if is_member.contains(&p) {
                found = Some(p);
                break;
            }
            cur = p;
        }
        let entry = match found {
            Some(p) => (Some(p), aux[&p].1 + 1),
            None => (Some(0), 1),
        };
        aux.insert(b, entry);
    }
    members.sort_by_key(|&i| (aux[&i].1, s1.depth[i], s1.vertices[i]));
    BranchOrder {
        order: members.iter().map(|&i| s1.vertices[i]).collect(),
        aux_parent: members.iter().map(|&i| aux[&i].0.map(|p| s1.vertices[p])).collect(),
        aux_depth: members.iter().map(|&i| aux[&i].1).collect(),
    }
}

#[derive(Clone, Debug)]
pub struct Stage2Result {
    pub branches: BranchOrder,
    /// Open explored edges `G_x`, sorted.
    pub graph: Vec<EdgeId>,
    /// Revealed surplus edges `F_x` with their status, in selection order.
    pub revealed: Vec<(EdgeId, bool)>,
    /// Special edges `Z_x`, in selection order.
    pub special: Vec<EdgeId>,
    /// False when a long-cycle decision ran out of budget.
    pub valid: bool,
    pub work: u64,
}

/// Stage 2; `budget` applies to each long-cycle decision.
pub fn second_stage<S: EdgeStates>(g: &TorusGeometry, states: &S, s1: &Stage1Result, budget: u64) -> Stage2Result {
    let branches = order_branch_vertices(s1);
    let tree = s1.tree_edges();
    let lg = LocalGraph::new(g, tree.iter().copied().chain(s1.surplus.iter().map(|se| se.edge)));
    let mut alive = vec![false; lg.edge_count()];
    for &e in &tree {
        alive[lg.local_edge(e).unwrap() as usize] = true;
    }
    let mut groups: HashMap<VertexId, Vec<EdgeId>> = HashMap::new();
    for se in &s1.surplus {
        groups.entry(se.ancestor).or_default().push(se.edge);
    }
    let radius = g.long_radius();
    let mut out = Stage2Result { branches: branches.clone(), graph: Vec::new(), revealed: Vec::new(), special: Vec::new(), valid: true, work: 0 };
    'outer: for b in branches.order.iter().rev() {
        let mut pending = groups.remove(b).unwrap_or_default();
        pending.sort_unstable();
        // with two or more admissible edges b stays; the last one removes it
        for e in pending {
            let le = lg.local_edge(e).unwrap() as usize;
            alive[le] = true;
            let mut bud = Budget::new(budget);
            let verdict = find_any(&lg, &alive, radius, &mut bud);
            out.work += bud.used();
            match verdict {
                Verdict::No => {
                    let open = states.is_open(e);
                    out.revealed.push((e, open));
                    alive[le] = open;
                }
                Verdict::Yes(_) => {
                    out.special.push(e);
                    alive[le] = false;
                }
                Verdict::Unknown => {
                    alive[le] = false;
                    out.valid = false;
                    break 'outer;
                }
            }
        }
    }
    out.graph = (0..lg.edge_count()).filter(|&i| alive[i]).map(|i| lg.edges[i]).collect();
    out
}

#[derive(Clone, Debug)]
pub struct Exploration {
    pub stage1: Stage1Result,
    pub stage2: Stage2Result,
    pub violations: Vec<Violation>,
}

impl Exploration {
    pub fn is_valid(&self) -> bool {
        self.stage2.valid
    }

    /// Sets as sorted id arrays; the branch order keeps its numbering.
    pub fn to_json(&self) -> serde_json::Value {
        let ids = |v: &mut Vec<usize>| {
            v.sort_unstable();
            v.clone()
        };
        let s1 = &self.stage1;
        let s2 = &self.stage2;
        json!({
            "root": s1.root.0,
            "vertices": ids(&mut s1.vertices.iter().map(|v| v.0).collect()),
            "tree": ids(&mut s1.tree_edges().iter().map(|e| e.0).collect()),
            "explored": ids(&mut s1.explored.iter().map(|e| e.0 .0).collect()),
            "surplus": ids(&mut s1.surplus.iter().map(|e| e.edge.0).collect()),
            "branch_order": s2.branches.order.iter().map(|v| v.0).collect::<Vec<_>>(),
            "aux_parent": s2.branches.aux_parent.iter().map(|v| v.map(|v| v.0)).collect::<Vec<_>>(),
            "revealed": ids(&mut s2.revealed.iter().map(|e| e.0 .0).collect()),
            "special": ids(&mut s2.special.iter().map(|e| e.0).collect()),
            "graph": s2.graph.iter().map(|e| e.0).collect::<Vec<_>>(),
            "valid": s2.valid,
            "violations": self.violations,
        })
    }
}

/// Both stages without instrumentation.
pub fn explore<S: EdgeStates>(g: &TorusGeometry, states: &S, x: VertexId, budget: u64) -> Exploration {
    let stage1 = depth_first_explore(g, states, x);
    let stage2 = second_stage(g, states, &stage1, budget);
    Exploration { stage1, stage2, violations: Vec::new() }
}

/// Both stages on an instrumented view of `states`, followed by every
/// structural check. `budget` also bounds each verification query.
pub fn explore_checked<S: EdgeStates>(g: &TorusGeometry, states: &S, x: VertexId, budget: u64) -> Exploration {
    let view = Instrumented::new(states);
    let mut violations = Vec::new();
    let stage1 = stage_one(g, &view, x, Some(&mut violations));
    let log1 = view.take_log();
    let stage2 = second_stage(g, &view, &stage1, budget);
    let log2 = view.take_log();
    check_reads(&stage1, &stage2, &log1, &log2, &mut violations);
    check_partitions(g, &stage1, &stage2, &mut violations);
    if stage2.valid {
        check_outcome(g, states, &stage1, &stage2, budget, &mut violations);
    }
    Exploration { stage1, stage2, violations }
}

fn check_reads(s1: &Stage1Result, s2: &Stage2Result, log1: &[EdgeId], log2: &[EdgeId], out: &mut Vec<Violation>) {
    let surplus: HashSet<EdgeId> = s1.surplus.iter().map(|se| se.edge).collect();
    if let Some(e) = log1.iter().find(|e| surplus.contains(e)) {
        out.push(violation(ViolationKind::ReadDiscipline, format!("surplus edge {} read in stage 1", e.0)));
    }
    if log1 != s1.explored.iter().map(|&(e, _)| e).collect::<Vec<_>>() {
        out.push(violation(ViolationKind::ReadDiscipline, "stage 1 reads differ from the explored edges"));
    }
    let special: HashSet<EdgeId> = s2.special.iter().copied().collect();
    if let Some(e) = log2.iter().find(|e| special.contains(e)) {
        out.push(violation(ViolationKind::ReadDiscipline, format!("special edge {} read in stage 2", e.0)));
    }
    if log2 != s2.revealed.iter().map(|&(e, _)| e).collect::<Vec<_>>() {
        out.push(violation(ViolationKind::ReadDiscipline, "stage 2 reads differ from the revealed edges"));
    }
}

fn check_partitions(g: &TorusGeometry, s1: &Stage1Result, s2: &Stage2Result, out: &mut Vec<Violation>) {
    let explored: HashSet<EdgeId> = s1.explored.iter().map(|&(e, _)| e).collect();
    let surplus: HashSet<EdgeId> = s1.surplus.iter().map(|se| se.edge).collect();
    let incident: HashSet<EdgeId> = s1.vertices.iter().flat_map(|&v| g.neighbors(v).into_iter().map(|(_, e)| e)).collect();
    if explored.len() != s1.explored.len() || !explored.is_disjoint(&surplus) || explored.len() + surplus.len() != incident.len() || !explored.iter().chain(&surplus).all(|e| incident.contains(e)) {
        out.push(violation(ViolationKind::Partition, "E and U do not partition the edges incident to the cluster"));
    }
    if s1.surplus.iter().any(|se| s1.index_of(se.deep).is_none() || s1.index_of(se.ancestor).is_none()) {
        out.push(violation(ViolationKind::Partition, "surplus edge leaves the cluster"));
    }
    let mut open: Vec<EdgeId> = s1.explored.iter().filter(|p| p.1).map(|p| p.0).collect();
    open.sort_unstable();
    if open != s1.tree_edges() {
        out.push(violation(ViolationKind::TreeMismatch, "open explored edges differ from the tree"));
    }
    if !s2.valid {
        return;
    }
    let f: HashSet<EdgeId> = s2.revealed.iter().map(|&(e, _)| e).collect();
    let z: HashSet<EdgeId> = s2.special.iter().copied().collect();
    if f.len() != s2.revealed.len() || z.len() != s2.special.len() || !f.is_disjoint(&z) || f.len() + z.len() != surplus.len() || !f.iter().chain(&z).all(|e| surplus.contains(e)) {
        out.push(violation(ViolationKind::Partition, "F and Z do not partition U"));
    }
    let mut g_expected: Vec<EdgeId> = s1.tree_edges();
    g_expected.extend(s2.revealed.iter().filter(|p| p.1).map(|p| p.0));
    g_expected.sort_unstable();
    if g_expected != s2.graph {
        out.push(violation(ViolationKind::TreeMismatch, "G differs from the open edges of E and F"));
    }
}

fn check_outcome<S: EdgeStates>(g: &TorusGeometry, states: &S, s1: &Stage1Result, s2: &Stage2Result, budget: u64, out: &mut Vec<Violation>) {
    let free = contains_long_cycle(g, &s2.graph, budget);
    if free.is_yes() {
        out.push(violation(ViolationKind::LongCycleInG, "G contains a long cycle"));
    } else if free.is_unknown() {
        out.push(violation(ViolationKind::Undecided, "long-cycle check of G"));
    }
    for &e in &s2.special {
        let mut edges = s2.graph.clone();
        edges.push(e);
        let ans = contains_long_cycle(g, &edges, budget);
        match ans.witness() {
            Some(w) if w.edges().contains(&e) => {}
            Some(_) => out.push(violation(ViolationKind::Certificate, format!("long cycle of G+{} avoids the edge", e.0))),
            None if ans.is_unknown() => out.push(violation(ViolationKind::Undecided, format!("certificate of {}", e.0))),
            None => out.push(violation(ViolationKind::Certificate, format!("G+{} has no long cycle", e.0))),
        }
    }
    // force every special edge closed: the cluster must shrink to G and lose its long cycles
    let killed = ForcedClosed { inner: states, closed: s2.special.iter().copied().collect() };
    let cluster = component_of(g, &killed, s1.root);
    if cluster.edges != s2.graph {
        out.push(violation(ViolationKind::KillSwitch, "cluster with Z closed differs from G"));
    }
    let ans = contains_long_cycle(g, &cluster.edges, budget);
    if ans.is_yes() {
        out.push(violation(ViolationKind::KillSwitch, "long cycle survives with Z closed"));
    } else if ans.is_unknown() {
        out.push(violation(ViolationKind::Undecided, "kill-switch check"));
    }
}

struct ForcedClosed<'a, S> {
    inner: &'a S,
    closed: HashSet<EdgeId>,
}

impl<S: EdgeStates> EdgeStates for ForcedClosed<'_, S> {
    fn is_open(&self, e: EdgeId) -> bool {
        !self.closed.contains(&e) && self.inner.is_open(e)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    /// Indicator that no cluster above the threshold has a long cycle.
    Direct,
    /// `(1-p)^{Σ|Z|}` over explorations of the clusters above the threshold.
    SpecialEdge,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Representatives {
    /// First vertex of each cluster in a uniform random permutation.
    Uniform,
    /// Smallest vertex of each cluster.
    Smallest,
}

/// Cluster size threshold `δ V^{2/3}`.
pub fn size_threshold(g: &TorusGeometry, delta: f64) -> f64 {
    delta * (g.volume() as f64).powf(2.0 / 3.0)
}

/// One replica value of either estimator on a given configuration; `None` when
/// a long-cycle decision ran out of budget.
pub fn ydelta_zero_value<S: EdgeStates>(
    g: &TorusGeometry,
    states: &S,
    p: f64,
    delta: f64,
    method: Method,
    picks: &[VertexId],
    budget: u64,
) -> Option<f64> {
    let comps = label_components(g, states);
    let threshold = size_threshold(g, delta);
    let mut done = vec![false; comps.count()];
    let mut special = 0usize;
    for &x in picks {
        let label = comps.label_of(x);
        if done[label] {
            continue;
        }
        done[label] = true;
        if comps.sizes[label] as f64 <= threshold {
            continue;
        }
        match method {
            Method::Direct => {
                if comps.edge_counts[label] < comps.sizes[label] {
                    continue;
                }
                let cluster = comps.cluster(g, states, label);
                let ans = contains_long_cycle(g, &cluster.edges, budget);
                if ans.is_unknown() {
                    return None;
                }
                if ans.is_yes() {
                    return Some(0.0);
                }
            }
            Method::SpecialEdge => {
                let ex = explore(g, states, x, budget);
                if !ex.is_valid() {
                    return None;
                }
                special += ex.stage2.special.len();
            }
        }
    }
    Some(match method {
        Method::Direct => 1.0,
        Method::SpecialEdge => (1.0 - p).powi(special as i32),
    })
}

/// Estimates `P(Y_δ = 0)`. Replica `i` uses a fixed configuration stream shared
/// by both methods, so their estimates are paired.
#[allow(clippy::too_many_arguments)]
pub fn estimate_p_ydelta_zero(
    g: &Arc<TorusGeometry>,
    p: f64,
    seed: u64,
    replicas: u32,
    delta: f64,
    method: Method,
    reps: Representatives,
    budget: u64,
) -> Result<Summary> {
    if !(delta > 0.0) {
        return Err(Error::InvalidArgument(format!("delta must be positive, got {delta}")));
    }
    let values: Vec<Option<f64>> = (0..replicas)
        .into_par_iter()
        .map(|i| {
            let cfg = BondConfig::sample_stream(Arc::clone(g), p, seed, stream_id(TAG_CONFIG, 0, i))?;
            let mut picks: Vec<VertexId> = (0..g.volume()).map(VertexId).collect();
            if reps == Representatives::Uniform {
                picks.shuffle(&mut replica_rng(seed, stream_id(TAG_PICK, 0, i)));
            }
            Ok(ydelta_zero_value(g, &cfg, p, delta, method, &picks, budget))
        })
        .collect::<Result<_>>()?;
    Ok(Summary::from_options(&values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::EdgeModel;

    fn torus(d: usize, r: u64) -> Arc<TorusGeometry> {
        Arc::new(TorusGeometry::new(d, r, EdgeModel::NearestNeighbor).unwrap())
    }

    fn path_edges(g: &TorusGeometry, pts: &[[i64; 2]]) -> Vec<EdgeId> {
        pts.windows(2).map(|w| g.edge_between(g.vertex_at(&w[0]), g.vertex_at(&w[1])).unwrap()).collect()
    }

    fn square(g: &TorusGeometry, x: i64, y: i64) -> Vec<EdgeId> {
        path_edges(g, &[[x, y], [x + 1, y], [x + 1, y + 1], [x, y + 1], [x, y]])
    }

    fn wrap_row(g: &TorusGeometry, y: i64) -> Vec<EdgeId> {
        let r = g.side() as i64;
        let pts: Vec<[i64; 2]> = (0..=r).map(|i| [i - r / 2, y]).collect();
        path_edges(g, &pts)
    }

    fn run(g: &Arc<TorusGeometry>, open: Vec<EdgeId>, x: VertexId) -> Exploration {
        let cfg = BondConfig::from_open_edges(g.clone(), 0.5, open);
        let ex = explore_checked(g, &cfg, x, 1_000_000);
        assert!(ex.violations.is_empty(), "{:?}", ex.violations);
        ex
    }

    #[test]
    fn closed_configuration() {
        let g = torus(2, 5);
        let ex = run(&g, vec![], g.origin());
        assert_eq!(ex.stage1.vertices, vec![g.origin()]);
        assert_eq!(ex.stage1.explored.len(), 4);
        assert!(ex.stage1.surplus.is_empty());
        assert!(ex.stage2.special.is_empty() && ex.stage2.graph.is_empty());
    }

    #[test]
    fn unit_square_has_one_surplus_edge() {
        let g = torus(2, 12);
        let ex = run(&g, square(&g, 0, 0), g.origin());
        assert_eq!(ex.stage1.size(), 4);
        assert_eq!(ex.stage1.surplus.len(), 1);
        assert_eq!(ex.stage2.branches.order.len(), 1);
        // short cycle: the surplus edge is revealed and G is the whole square
        assert_eq!(ex.stage2.revealed.len(), 1);
        assert!(ex.stage2.special.is_empty());
        assert_eq!(ex.stage2.graph.len(), 4);
    }

    #[test]
    fn tree_cluster() {
        let g = torus(2, 9);
        let open = path_edges(&g, &[[0, 0], [1, 0], [2, 0], [2, 1]]);
        let ex = run(&g, open.clone(), g.origin());
        assert!(ex.stage1.surplus.is_empty());
        let mut open = open;
        open.sort_unstable();
        assert_eq!(ex.stage1.tree_edges(), open);
        assert_eq!(ex.stage2.graph, open);
    }

    #[test]
    fn wrap_cycle_surplus_is_special() {
        let g = torus(2, 8);
        let ex = run(&g, wrap_row(&g, 0), g.origin());
        assert_eq!(ex.stage1.surplus.len(), 1);
        assert_eq!(ex.stage2.special.len(), 1);
        assert!(ex.stage2.revealed.is_empty());
        assert_eq!(ex.stage2.graph.len(), 7);
    }

    #[test]
    fn cycle_hanging_off_a_cycle() {
        // a wrap row through the root plus a wrap column hanging off it at distance 2
        let g = torus(2, 8);
        let mut open = wrap_row(&g, 0);
        let col: Vec<[i64; 2]> = (0..=8).map(|i| [2, i - 4]).collect();
        open.extend(path_edges(&g, &col));
        let ex = run(&g, open, g.origin());
        let b = &ex.stage2.branches;
        assert_eq!(b.order.len(), ex.stage1.surplus.len());
        for (i, v) in b.order.iter().enumerate() {
            // every aux parent precedes its child in the numbering
            if let Some(p) = b.aux_parent[i] {
                if p != ex.stage1.root {
                    assert!(b.order[..i].contains(&p), "{v:?}");
                }
            }
        }
        // two independent wrapping cycles: both surplus edges are special
        assert_eq!(ex.stage2.special.len(), 2);
    }

    #[test]
    fn nested_branch_vertices_are_ordered_by_aux_depth() {
        // long path from the root, with a short square hanging at its end whose
        // branch vertex lies below the branch vertex of a wrap cycle
        let g = torus(2, 12);
        let mut open = wrap_row(&g, 0);
        open.extend(path_edges(&g, &[[3, 0], [3, 1], [3, 2]]));
        open.extend(square(&g, 3, 2));
        let ex = run(&g, open, g.origin());
        let b = &ex.stage2.branches;
        assert!(b.order.len() >= 2);
        for i in 1..b.order.len() {
            assert!(b.aux_depth[i - 1] <= b.aux_depth[i]);
            let child = b.order[i];
            for earlier in &b.order[..i] {
                assert!(!ex.stage1.is_proper_ancestor(child, *earlier));
            }
        }
    }

    #[test]
    fn random_configurations_pass_every_check() {
        for (r, p) in [(5, 0.25), (8, 0.3), (9, 0.6)] {
            let g = torus(2, r);
            for s in 0..30 {
                let cfg = BondConfig::sample(g.clone(), p, s).unwrap();
                let ex = explore_checked(&g, &cfg, g.origin(), 1_000_000);
                assert!(ex.is_valid());
                assert!(ex.violations.is_empty(), "r={r} seed={s}: {:?}", ex.violations);
            }
        }
    }

    #[test]
    fn json_has_sorted_sets() {
        let g = torus(2, 8);
        let ex = run(&g, wrap_row(&g, 0), g.origin());
        let v = ex.to_json();
        let tree: Vec<u64> = v["tree"].as_array().unwrap().iter().map(|x| x.as_u64().unwrap()).collect();
        assert!(tree.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(v["special"].as_array().unwrap().len(), 1);
    }

    #[test]
    fn trivial_estimates() {
        let g = torus(2, 4);
        for method in [Method::Direct, Method::SpecialEdge] {
            let s = estimate_p_ydelta_zero(&g, 0.0, 1, 20, 1.0, method, Representatives::Uniform, 1000).unwrap();
            assert_eq!(s.mean, 1.0);
            // δ V^{2/3} >= V: no cluster qualifies
            let s = estimate_p_ydelta_zero(&g, 0.7, 1, 20, 4.0, method, Representatives::Uniform, 1000).unwrap();
            assert_eq!(s.mean, 1.0);
        }
        assert!(estimate_p_ydelta_zero(&g, 0.5, 1, 1, 0.0, Method::Direct, Representatives::Smallest, 1).is_err());
    }
}
