//! Brute force at fixture scale.
//!
//! Cycles are enumerated through the cycle space: every closed trail's edge set
//! is a connected even subgraph and every connected even subgraph has an Euler
//! tour, so the two are identified. Each one is reported once, as the tour built
//! greedily (smallest edge first) from its smallest vertex, in the
//! lexicographically smaller of the two directions.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use num::{BigInt, BigRational, One, Zero};

use crate::cluster::component_of;
use crate::coupling::CouplingSample;
use crate::cycles::{long_vertex_set, CycleWitness};
use crate::error::{Error, Result};
use crate::lattice::{r_equivalent, EdgeId, Lattice, TorusGeometry, VertexId};
use crate::percolation::{BondConfig, EdgeStates};

/// Size guards. The defaults keep every call below a few million subsets.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Limits {
    pub max_edges: usize,
    pub max_cyclomatic: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits { max_edges: 40, max_cyclomatic: 22 }
    }
}

impl Limits {
    /// Explicit override; masks are still 64 bits wide.
    pub fn unguarded() -> Self {
        Limits { max_edges: 64, max_cyclomatic: 30 }
    }
}

/// An edge set with 64-bit masks over its sorted edges.
pub struct SmallGraph<'g> {
    pub geometry: &'g TorusGeometry,
    pub edges: Vec<EdgeId>,
    pub vertices: Vec<VertexId>,
    ends: Vec<(usize, usize)>,
}

impl<'g> SmallGraph<'g> {
    pub fn new(geometry: &'g TorusGeometry, edges: &[EdgeId], limits: Limits) -> Result<Self> {
        let mut edges = edges.to_vec();
        edges.sort_unstable();
        edges.dedup();
        if edges.len() > limits.max_edges.min(64) {
            return Err(Error::Guard(format!("{} edges exceed the oracle limit {}", edges.len(), limits.max_edges)));
        }
        let mut vertices: Vec<VertexId> = edges
            .iter()
            .flat_map(|&e| {
                let (a, b) = geometry.endpoints(e);
                [a, b]
            })
            .collect();
        vertices.sort_unstable();
        vertices.dedup();
        let ends = edges
            .iter()
            .map(|&e| {
                let (a, b) = geometry.endpoints(e);
                (vertices.binary_search(&a).unwrap(), vertices.binary_search(&b).unwrap())
            })
            .collect();
        let graph = SmallGraph { geometry, edges, vertices, ends };
        let c = graph.edges.len() + graph.component_count(graph.full()) - graph.vertices.len();
        if c > limits.max_cyclomatic {
            return Err(Error::Guard(format!("cycle space of dimension {c} exceeds the oracle limit {}", limits.max_cyclomatic)));
        }
        Ok(graph)
    }

    pub fn full(&self) -> u64 {
        if self.edges.len() == 64 {
            u64::MAX
        } else {
            (1u64 << self.edges.len()) - 1
        }
    }

    fn bits(mask: u64) -> impl Iterator<Item = usize> {
        let mut rest = mask;
        std::iter::from_fn(move || {
            if rest == 0 {
                return None;
            }
            let b = rest.trailing_zeros() as usize;
            rest &= rest - 1;
            Some(b)
        })
    }

    fn vertex_mask(&self, mask: u64) -> Vec<bool> {
        let mut on = vec![false; self.vertices.len()];
        for i in Self::bits(mask) {
            on[self.ends[i].0] = true;
            on[self.ends[i].1] = true;
        }
        on
    }

    pub fn vertices_of(&self, mask: u64) -> Vec<VertexId> {
        self.vertex_mask(mask)
            .iter()
            .enumerate()
            .filter(|(_, &on)| on)
            .map(|(i, _)| self.vertices[i])
            .collect()
    }

    /// Union-find component count of the edges in `mask` (isolated vertices excluded).
    fn component_count(&self, mask: u64) -> usize {
        let n = self.vertices.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut [usize], mut v: usize) -> usize {
            while parent[v] != v {
                parent[v] = parent[parent[v]];
                v = parent[v];
            }
            v
        }
        let mut merges = 0;
        for i in Self::bits(mask) {
            let (a, b) = self.ends[i];
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra != rb {
                parent[ra] = rb;
                merges += 1;
            }
        }
        self.vertex_mask(mask).iter().filter(|&&on| on).count() - merges
    }

    fn is_even(&self, mask: u64) -> bool {
        let mut deg = vec![0u8; self.vertices.len()];
        for i in Self::bits(mask) {
            deg[self.ends[i].0] ^= 1;
            deg[self.ends[i].1] ^= 1;
        }
        deg.iter().all(|&d| d == 0)
    }

    /// Fundamental cycle masks of a spanning forest.
    fn cycle_basis(&self) -> Vec<u64> {
        let n = self.vertices.len();
        let mut parent = vec![usize::MAX; n];
        let mut parent_edge = vec![usize::MAX; n];
        let mut depth = vec![usize::MAX; n];
        let mut adj = vec![Vec::new(); n];
        for (i, &(a, b)) in self.ends.iter().enumerate() {
            adj[a].push((b, i));
            adj[b].push((a, i));
        }
        let mut tree = 0u64;
        for s in 0..n {
            if depth[s] != usize::MAX {
                continue;
            }
            depth[s] = 0;
            let mut stack = vec![s];
            while let Some(v) = stack.pop() {
                for &(w, i) in &adj[v] {
                    if depth[w] == usize::MAX {
                        depth[w] = depth[v] + 1;
                        parent[w] = v;
                        parent_edge[w] = i;
                        tree |= 1 << i;
                        stack.push(w);
                    }
                }
            }
        }
        let mut basis = Vec::new();
        for i in Self::bits(self.full() & !tree) {
            let (mut a, mut b) = self.ends[i];
            let mut mask = 1u64 << i;
            while a != b {
                if depth[a] >= depth[b] {
                    mask ^= 1 << parent_edge[a];
                    a = parent[a];
                } else {
                    mask ^= 1 << parent_edge[b];
                    b = parent[b];
                }
            }
            basis.push(mask);
        }
        basis
    }

    /// Every nonempty connected even subgraph, in Gray-code order.
    pub fn cycle_masks(&self) -> Vec<u64> {
        let basis = self.cycle_basis();
        let mut out = Vec::new();
        let mut mask = 0u64;
        for step in 1u64..(1u64 << basis.len()) {
            mask ^= basis[step.trailing_zeros() as usize];
            debug_assert!(self.is_even(mask));
            if self.component_count(mask) == 1 {
                out.push(mask);
            }
        }
        out
    }

    pub fn is_long(&self, mask: u64) -> bool {
        long_vertex_set(self.geometry, &self.vertices_of(mask))
    }

    /// Masks of connected even subgraphs whose vertex set is long.
    pub fn long_masks(&self) -> Vec<u64> {
        self.cycle_masks().into_iter().filter(|&m| self.is_long(m)).collect()
    }

    /// Canonical Euler tour of a connected even mask.
    pub fn tour(&self, mask: u64) -> CycleWitness {
        let n = self.vertices.len();
        let mut adj = vec![Vec::new(); n];
        for i in Self::bits(mask) {
            let (a, b) = self.ends[i];
            adj[a].push((b, i));
            adj[b].push((a, i));
        }
        let start = Self::bits(mask).map(|i| self.ends[i].0.min(self.ends[i].1)).min().unwrap();
        // Hierholzer, smallest edge first
        let mut used = vec![false; self.edges.len()];
        let mut cursor = vec![0usize; n];
        let mut stack = vec![start];
        let mut circuit = Vec::new();
        while let Some(&v) = stack.last() {
            let mut moved = false;
            while cursor[v] < adj[v].len() {
                let (w, i) = adj[v][cursor[v]];
                cursor[v] += 1;
                if !used[i] {
                    used[i] = true;
                    stack.push(w);
                    moved = true;
                    break;
                }
            }
            if !moved {
                circuit.push(stack.pop().unwrap());
            }
        }
        let forward: Vec<VertexId> = circuit.iter().map(|&v| self.vertices[v]).collect();
        let mut backward = forward.clone();
        backward.reverse();
        let best = forward.min(backward);
        CycleWitness::from_vertices(self.geometry, best).expect("Euler tours are closed trails")
    }
}

/// Every closed trail (as an edge set) of the open graph `edges`, at most
/// `max_len` edges long, as canonical tours sorted by vertex sequence.
pub fn enumerate_all_cycles(g: &TorusGeometry, edges: &[EdgeId], max_len: usize, limits: Limits) -> Result<Vec<CycleWitness>> {
    let graph = SmallGraph::new(g, edges, limits)?;
    let mut out: Vec<CycleWitness> = graph
        .cycle_masks()
        .into_iter()
        .filter(|m| m.count_ones() as usize <= max_len)
        .map(|m| graph.tour(m))
        .collect();
    out.sort_by(|a, b| a.vertices().cmp(b.vertices()));
    Ok(out)
}

/// Open edges of the cluster of `x`.
pub fn cluster_edges<S: EdgeStates>(g: &TorusGeometry, states: &S, x: VertexId) -> Vec<EdgeId> {
    component_of(g, states, x).edges
}

/// Is `x` on some long closed trail of `edges`?
pub fn oracle_vertex_in_long_cycle(g: &TorusGeometry, edges: &[EdgeId], x: VertexId, limits: Limits) -> Result<bool> {
    let graph = SmallGraph::new(g, edges, limits)?;
    Ok(graph.long_masks().into_iter().any(|m| graph.vertices_of(m).contains(&x)))
}

pub fn oracle_contains_long_cycle(g: &TorusGeometry, edges: &[EdgeId], limits: Limits) -> Result<bool> {
    let graph = SmallGraph::new(g, edges, limits)?;
    Ok(!graph.long_masks().is_empty())
}

/// Vertices of `edges` lying on some long closed trail.
pub fn oracle_long_cycle_vertices(g: &TorusGeometry, edges: &[EdgeId], limits: Limits) -> Result<Vec<VertexId>> {
    let graph = SmallGraph::new(g, edges, limits)?;
    let mut on = 0u64;
    for m in graph.long_masks() {
        on |= m;
    }
    Ok(graph.vertices_of(on))
}

/// Shortest long closed trail through `x`, if any.
pub fn oracle_shortest_long_cycle(g: &TorusGeometry, edges: &[EdgeId], x: VertexId, limits: Limits) -> Result<Option<usize>> {
    let graph = SmallGraph::new(g, edges, limits)?;
    Ok(graph
        .long_masks()
        .into_iter()
        .filter(|&m| graph.vertices_of(m).contains(&x))
        .map(|m| m.count_ones() as usize)
        .min())
}

/// Smallest number of edges whose removal leaves no long closed trail, by
/// trying edge subsets in order of increasing size.
pub fn exact_y_bruteforce(g: &TorusGeometry, edges: &[EdgeId], limits: Limits) -> Result<usize> {
    let graph = SmallGraph::new(g, edges, limits)?;
    let long = graph.long_masks();
    if long.is_empty() {
        return Ok(0);
    }
    let candidates: Vec<usize> = SmallGraph::bits(long.iter().fold(0, |acc, &m| acc | m)).collect();
    for k in 1..=candidates.len() {
        let mut idx: Vec<usize> = (0..k).collect();
        loop {
            let removed = idx.iter().fold(0u64, |acc, &i| acc | 1 << candidates[i]);
            if long.iter().all(|&m| m & removed != 0) {
                return Ok(k);
            }
            // next k-combination
            let mut i = k;
            while i > 0 && idx[i - 1] == candidates.len() - k + i - 1 {
                i -= 1;
            }
            if i == 0 {
                break;
            }
            idx[i - 1] += 1;
            for j in i..k {
                idx[j] = idx[j - 1] + 1;
            }
        }
    }
    unreachable!("removing every candidate edge hits every long mask")
}

fn check_torus_size(g: &TorusGeometry) -> Result<()> {
    if g.edge_count() > 24 {
        return Err(Error::Guard(format!("{} edges exceed the exhaustive limit 24", g.edge_count())));
    }
    Ok(())
}

/// Iterates all `2^E` configurations of `g`, passing the open-edge count.
fn for_each_config(g: &Arc<TorusGeometry>, mut f: impl FnMut(&BondConfig, usize)) {
    let m = g.edge_count();
    let mut cfg = BondConfig::closed(Arc::clone(g), 0.5);
    for mask in 0u64..(1u64 << m) {
        for e in 0..m {
            cfg.set(EdgeId(e), mask >> e & 1 == 1);
        }
        f(&cfg, mask.count_ones() as usize);
    }
}

fn weights(p: &BigRational, m: usize) -> Vec<BigRational> {
    let q = BigRational::one() - p;
    (0..=m)
        .map(|k| num::pow(p.clone(), k) * num::pow(q.clone(), m - k))
        .collect()
}

/// Exact `P_p(event)` by summing over every configuration.
pub fn exhaustive_config_check(g: &Arc<TorusGeometry>, p: &BigRational, event: impl Fn(&BondConfig) -> bool) -> Result<BigRational> {
    check_torus_size(g)?;
    let m = g.edge_count();
    let mut counts = vec![0u64; m + 1];
    for_each_config(g, |cfg, k| {
        if event(cfg) {
            counts[k] += 1;
        }
    });
    let w = weights(p, m);
    Ok(counts
        .iter()
        .zip(&w)
        .fold(BigRational::zero(), |acc, (&c, wk)| acc + wk * BigInt::from(c)))
}

/// Exact law of an integer observable.
pub fn exhaustive_distribution(g: &Arc<TorusGeometry>, p: &BigRational, f: impl Fn(&BondConfig) -> usize) -> Result<BTreeMap<usize, BigRational>> {
    check_torus_size(g)?;
    let m = g.edge_count();
    let mut counts: BTreeMap<usize, Vec<u64>> = BTreeMap::new();
    for_each_config(g, |cfg, k| {
        counts.entry(f(cfg)).or_insert_with(|| vec![0; m + 1])[k] += 1;
    });
    let w = weights(p, m);
    Ok(counts
        .into_iter()
        .map(|(value, c)| {
            let prob = c.iter().zip(&w).fold(BigRational::zero(), |acc, (&n, wk)| acc + wk * BigInt::from(n));
            (value, prob)
        })
        .collect())
}

/// Exact expectation of a rational-valued observable.
pub fn exhaustive_expectation(g: &Arc<TorusGeometry>, p: &BigRational, f: impl Fn(&BondConfig) -> BigRational) -> Result<BigRational> {
    check_torus_size(g)?;
    let m = g.edge_count();
    let w = weights(p, m);
    let mut total = BigRational::zero();
    for_each_config(g, |cfg, k| total += f(cfg) * &w[k]);
    Ok(total)
}

pub fn to_f64(x: &BigRational) -> f64 {
    use num::ToPrimitive;
    x.to_f64().unwrap_or(f64::NAN)
}

/// A lattice point `y` with `0 ↔≤k y` in `ω̃` whose torus image `x` is not
/// within `k` of the origin in `ω`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Discrepancy {
    pub y: Vec<i64>,
    pub x: VertexId,
    pub k: usize,
    pub witness: Option<DisjointWitness>,
}

/// `z`, distinct `r`-equivalent `v1`, `v2`, and pairwise edge-disjoint open
/// lattice paths `0 → z`, `z → v1`, `z → v2`, `v1 → y`, each of length `<= k`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DisjointWitness {
    pub z: Vec<i64>,
    pub v1: Vec<i64>,
    pub v2: Vec<i64>,
    pub paths: [Vec<EdgeId>; 4],
}

/// Finds every discrepancy at scale `k` and searches each exhaustively for the
/// four disjoint connections. Vertex-simple paths suffice: any open walk of
/// length `<= k` contains a simple path on a subset of its edges.
pub fn verify_coupling_property_b(sample: &CouplingSample, k: usize, max_ball: usize) -> Result<Vec<Discrepancy>> {
    if sample.truncated() {
        return Err(Error::Truncated);
    }
    let torus = sample.torus();
    let window = sample.window();
    let lattice = sample.lattice_config();
    let reach = crate::cluster::intrinsic_ball(window, lattice, window.center_vertex(), 3 * k);
    if reach.len() > max_ball {
        return Err(Error::Guard(format!("{} lattice vertices within 3k exceed the fixture limit {max_ball}", reach.len())));
    }
    let torus_ball = crate::cluster::intrinsic_ball(torus, sample.torus_config(), torus.origin(), k).as_map();
    let r = torus.side() as u64;
    let mut cache: HashMap<VertexId, Vec<(VertexId, Vec<EdgeId>)>> = HashMap::new();
    let mut paths = |s: VertexId| -> Vec<(VertexId, Vec<EdgeId>)> {
        cache.entry(s).or_insert_with(|| simple_paths(window, lattice, s, k)).clone()
    };
    let origin = window.center_vertex();
    let mut out = Vec::new();
    for &(y, d) in &reach.members {
        if d > k {
            continue;
        }
        let y_point = window.point(y);
        let x = torus.vertex_at(&y_point);
        if torus_ball.contains_key(&x) {
            continue;
        }
        let mut witness = None;
        'search: for (z, p0) in paths(origin) {
            let from_z = paths(z);
            for (v1, p1) in &from_z {
                if !disjoint(&[&p0, p1]) {
                    continue;
                }
                let v1_point = window.point(*v1);
                for (v2, p2) in &from_z {
                    if v2 == v1 || !r_equivalent(&v1_point, &window.point(*v2), r) || !disjoint(&[&p0, p1, p2]) {
                        continue;
                    }
                    for (w, p3) in paths(*v1) {
                        if w == y && disjoint(&[&p0, p1, p2, &p3]) {
                            witness = Some(DisjointWitness {
                                z: window.point(z),
                                v1: v1_point.clone(),
                                v2: window.point(*v2),
                                paths: [p0.clone(), p1.clone(), p2.clone(), p3],
                            });
                            break 'search;
                        }
                    }
                }
            }
        }
        out.push(Discrepancy { y: y_point, x, k, witness });
    }
    Ok(out)
}

fn disjoint(paths: &[&Vec<EdgeId>]) -> bool {
    let mut all: Vec<EdgeId> = paths.iter().flat_map(|p| p.iter().copied()).collect();
    let n = all.len();
    all.sort_unstable();
    all.dedup();
    all.len() == n
}

/// Every vertex-simple open path of at most `k` edges from `s`, the empty one included.
fn simple_paths<G: Lattice, S: EdgeStates>(g: &G, states: &S, s: VertexId, k: usize) -> Vec<(VertexId, Vec<EdgeId>)> {
    let mut out = vec![(s, Vec::new())];
    let mut verts = vec![s];
    let mut edges: Vec<EdgeId> = Vec::new();
    let mut pending: Vec<Vec<(VertexId, EdgeId)>> = vec![open_steps(g, states, s)];
    while let Some(options) = pending.last_mut() {
        match options.pop() {
            Some((w, e)) => {
                if verts.contains(&w) {
                    continue;
                }
                verts.push(w);
                edges.push(e);
                out.push((w, edges.clone()));
                pending.push(if edges.len() < k { open_steps(g, states, w) } else { Vec::new() });
            }
            None => {
                pending.pop();
                if edges.pop().is_some() {
                    verts.pop();
                }
            }
        }
    }
    out
}

fn open_steps<G: Lattice, S: EdgeStates>(g: &G, states: &S, v: VertexId) -> Vec<(VertexId, EdgeId)> {
    let mut steps = Vec::new();
    g.for_each_neighbor(v, |w, e| {
        if states.is_open(e) {
            steps.push((w, e));
        }
    });
    steps.reverse();
    steps
}
