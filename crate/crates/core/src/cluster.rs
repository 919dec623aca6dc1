//! Open clusters and intrinsic (graph-distance) balls.

use std::collections::{HashMap, VecDeque};

use crate::lattice::{EdgeId, Lattice, VertexId};
use crate::percolation::EdgeStates;

/// Dense distance arrays are used up to this many vertices; beyond, a hash map.
const DENSE_LIMIT: usize = 1 << 23;

enum DistMap {
    Dense(Vec<u32>),
    Sparse(HashMap<VertexId, u32>),
}

impl DistMap {
    fn new(vertex_count: usize) -> Self {
        if vertex_count <= DENSE_LIMIT {
            DistMap::Dense(vec![u32::MAX; vertex_count])
        } else {
            DistMap::Sparse(HashMap::new())
        }
    }

    fn get(&self, v: VertexId) -> Option<u32> {
        match self {
            DistMap::Dense(d) => Some(d[v.0]).filter(|&x| x != u32::MAX),
            DistMap::Sparse(m) => m.get(&v).copied(),
        }
    }

    fn insert(&mut self, v: VertexId, dist: u32) {
        match self {
            DistMap::Dense(d) => d[v.0] = dist,
            DistMap::Sparse(m) => {
                m.insert(v, dist);
            }
        }
    }
}

/// An open cluster together with its open edges.
#[derive(Clone, Debug, PartialEq)]
pub struct Cluster {
    pub root: VertexId,
    /// Breadth-first order from `root`.
    pub vertices: Vec<VertexId>,
    /// Sorted.
    pub edges: Vec<EdgeId>,
}

impl Cluster {
    pub fn size(&self) -> usize {
        self.vertices.len()
    }

    /// Tree excess `|E| - |V| + 1`.
    pub fn surplus(&self) -> usize {
        (self.edges.len() + 1).saturating_sub(self.vertices.len())
    }

    pub fn smallest_vertex(&self) -> VertexId {
        *self.vertices.iter().min().expect("clusters are nonempty")
    }
}

/// Exact cluster of `x` by breadth-first search over open edges.
pub fn component_of<G: Lattice, S: EdgeStates>(g: &G, states: &S, x: VertexId) -> Cluster {
    let mut seen = DistMap::new(g.vertex_count());
    let mut vertices = vec![x];
    let mut edges = Vec::new();
    seen.insert(x, 0);
    let mut head = 0;
    while head < vertices.len() {
        let u = vertices[head];
        head += 1;
        g.for_each_neighbor(u, |w, e| {
            if !states.is_open(e) {
                return;
            }
            if g.endpoints(e).0 == u {
                edges.push(e);
            }
            if seen.get(w).is_none() {
                seen.insert(w, 0);
                vertices.push(w);
            }
        });
    }
    edges.sort_unstable();
    Cluster { root: x, vertices, edges }
}

/// Cluster labels for every vertex, without materializing edge lists.
#[derive(Clone, Debug)]
pub struct Components {
    /// Cluster index per vertex; clusters are numbered by smallest vertex.
    pub label: Vec<u32>,
    pub sizes: Vec<usize>,
    /// Open edges per cluster.
    pub edge_counts: Vec<usize>,
    /// Smallest vertex of each cluster.
    pub roots: Vec<VertexId>,
}

impl Components {
    pub fn label_of(&self, v: VertexId) -> usize {
        self.label[v.0] as usize
    }

    pub fn count(&self) -> usize {
        self.sizes.len()
    }

    /// Cluster indices sorted by size descending, ties by smallest root.
    pub fn by_size(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.count()).collect();
        order.sort_by(|&a, &b| self.sizes[b].cmp(&self.sizes[a]).then(self.roots[a].cmp(&self.roots[b])));
        order
    }

    pub fn cluster<G: Lattice, S: EdgeStates>(&self, g: &G, states: &S, index: usize) -> Cluster {
        component_of(g, states, self.roots[index])
    }
}

pub fn label_components<G: Lattice, S: EdgeStates>(g: &G, states: &S) -> Components {
    let n = g.vertex_count();
    let mut label = vec![u32::MAX; n];
    let mut sizes = Vec::new();
    let mut edge_counts = Vec::new();
    let mut roots = Vec::new();
    let mut queue = Vec::new();
    for start in 0..n {
        if label[start] != u32::MAX {
            continue;
        }
        let id = sizes.len() as u32;
        label[start] = id;
        queue.clear();
        queue.push(VertexId(start));
        let mut head = 0;
        let mut open = 0;
        while head < queue.len() {
            let u = queue[head];
            head += 1;
            g.for_each_neighbor(u, |w, e| {
                if states.is_open(e) {
                    if g.endpoints(e).0 == u {
                        open += 1;
                    }
                    if label[w.0] == u32::MAX {
                        label[w.0] = id;
                        queue.push(w);
                    }
                }
            });
        }
        sizes.push(queue.len());
        edge_counts.push(open);
        roots.push(VertexId(start));
    }
    Components { label, sizes, edge_counts, roots }
}

/// Every cluster, largest first; equal sizes ordered by smallest vertex id.
/// Each cluster's `root` is its smallest vertex.
pub fn all_components<G: Lattice, S: EdgeStates>(g: &G, states: &S) -> Vec<Cluster> {
    let comps = label_components(g, states);
    comps.by_size().into_iter().map(|i| comps.cluster(g, states, i)).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct IntrinsicBall {
    pub center: VertexId,
    pub radius: usize,
    /// `(vertex, distance)` in nondecreasing distance.
    pub members: Vec<(VertexId, usize)>,
}

impl IntrinsicBall {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, v: VertexId) -> bool {
        self.distance(v).is_some()
    }

    pub fn distance(&self, v: VertexId) -> Option<usize> {
        self.members.iter().find(|m| m.0 == v).map(|m| m.1)
    }

    /// `∂B_k = B_k \ B_{k-1}`.
    pub fn shell(&self, k: usize) -> Vec<VertexId> {
        self.members.iter().filter(|m| m.1 == k).map(|m| m.0).collect()
    }

    pub fn max_distance(&self) -> usize {
        self.members.last().map_or(0, |m| m.1)
    }

    pub fn as_map(&self) -> HashMap<VertexId, usize> {
        self.members.iter().copied().collect()
    }
}

/// `B_k(x)`: vertices joined to `x` by an open path of at most `k` edges.
pub fn intrinsic_ball<G: Lattice, S: EdgeStates>(g: &G, states: &S, x: VertexId, k: usize) -> IntrinsicBall {
    let mut seen = DistMap::new(g.vertex_count());
    let mut members = vec![(x, 0)];
    seen.insert(x, 0);
    let mut queue = VecDeque::from([x]);
    while let Some(u) = queue.pop_front() {
        let du = seen.get(u).unwrap() as usize;
        if du == k {
            continue;
        }
        g.for_each_neighbor(u, |w, e| {
            if seen.get(w).is_none() && states.is_open(e) {
                seen.insert(w, du as u32 + 1);
                members.push((w, du + 1));
                queue.push_back(w);
            }
        });
    }
    IntrinsicBall { center: x, radius: k, members }
}

/// `x ↔ y` by an open path of length at most `k`.
pub fn connected_within<G: Lattice, S: EdgeStates>(g: &G, states: &S, x: VertexId, y: VertexId, k: usize) -> bool {
    if x == y {
        return true;
    }
    let mut seen = DistMap::new(g.vertex_count());
    seen.insert(x, 0);
    let mut queue = VecDeque::from([x]);
    while let Some(u) = queue.pop_front() {
        let du = seen.get(u).unwrap();
        if du as usize == k {
            continue;
        }
        let mut hit = false;
        g.for_each_neighbor(u, |w, e| {
            if !hit && seen.get(w).is_none() && states.is_open(e) {
                hit = w == y;
                seen.insert(w, du + 1);
                queue.push_back(w);
            }
        });
        if hit {
            return true;
        }
    }
    false
}
