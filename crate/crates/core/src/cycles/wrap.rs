//! Wrapping detection with an offset union-find.
//!
//! Each vertex stores the lattice displacement to its parent. Joining two
//! vertices that already share a root either closes a contractible loop (the
//! displacements agree) or a loop whose lift ends at a different copy.

use crate::lattice::{EdgeId, Lattice, TorusGeometry, VertexId};
use crate::percolation::EdgeStates;

pub struct OffsetUnionFind {
    dim: usize,
    parent: Vec<u32>,
    rank: Vec<u8>,
    /// `offset[v] = position(v) - position(parent(v))` in the lift.
    offset: Vec<i64>,
    wraps: Vec<bool>,
}

impl OffsetUnionFind {
    pub fn new(vertex_count: usize, dim: usize) -> Self {
        OffsetUnionFind {
            dim,
            parent: (0..vertex_count as u32).collect(),
            rank: vec![0; vertex_count],
            offset: vec![0; vertex_count * dim],
            wraps: vec![false; vertex_count],
        }
    }

    /// Root of `v` and the displacement from the root to `v`.
    pub fn find(&mut self, v: usize) -> (usize, Vec<i64>) {
        let d = self.dim;
        let mut path = Vec::new();
        let mut cur = v;
        while self.parent[cur] as usize != cur {
            path.push(cur);
            cur = self.parent[cur] as usize;
        }
        let root = cur;
        // compress from the top down so each offset becomes relative to the root
        for &u in path.iter().rev() {
            let p = self.parent[u] as usize;
            if p != root {
                for i in 0..d {
                    self.offset[u * d + i] += self.offset[p * d + i];
                }
                self.parent[u] = root as u32;
            }
        }
        (root, self.offset[v * d..(v + 1) * d].to_vec())
    }

    /// Records an edge from `u` to `w` with lift displacement `delta`.
    pub fn union(&mut self, u: usize, w: usize, delta: &[i64]) {
        let d = self.dim;
        let (ru, ou) = self.find(u);
        let (rw, ow) = self.find(w);
        if ru == rw {
            if (0..d).any(|i| ou[i] + delta[i] != ow[i]) {
                self.wraps[ru] = true;
            }
            return;
        }
        // position(rw) - position(ru)
        let shift: Vec<i64> = (0..d).map(|i| ou[i] + delta[i] - ow[i]).collect();
        let (child, root, sign) = if self.rank[ru] < self.rank[rw] { (ru, rw, -1) } else { (rw, ru, 1) };
        for i in 0..d {
            self.offset[child * d + i] = sign * shift[i];
        }
        self.parent[child] = root as u32;
        if self.rank[ru] == self.rank[rw] {
            self.rank[root] += 1;
        }
        self.wraps[root] |= self.wraps[child];
    }

    pub fn wraps(&mut self, v: usize) -> bool {
        let (root, _) = self.find(v);
        self.wraps[root]
    }
}

/// Per-vertex wrapping flags of the open clusters.
#[derive(Clone, Debug)]
pub struct WrapReport {
    flags: Vec<bool>,
}

impl WrapReport {
    /// Whether the cluster of `v` contains a cycle with nonzero winding.
    pub fn wraps(&self, v: VertexId) -> bool {
        self.flags[v.0]
    }

    pub fn any(&self) -> bool {
        self.flags.iter().any(|&f| f)
    }

    pub fn wrapping_vertices(&self) -> usize {
        self.flags.iter().filter(|&&f| f).count()
    }
}

/// Offset union-find over every open edge of the torus.
pub fn has_wrapping_cluster<S: EdgeStates>(g: &TorusGeometry, states: &S) -> WrapReport {
    let mut uf = OffsetUnionFind::new(g.vertex_count(), g.dim());
    for e in 0..g.edge_count() {
        let e = EdgeId(e);
        if states.is_open(e) {
            let (a, b) = g.endpoints(e);
            uf.union(a.0, b.0, &g.directions()[e.0 % g.direction_count()].full);
        }
    }
    let flags = (0..g.vertex_count()).map(|v| uf.wraps(v)).collect();
    WrapReport { flags }
}

/// Same test restricted to an explicit edge set.
pub fn edges_wrap(g: &TorusGeometry, edges: &[EdgeId]) -> bool {
    let lg = super::graph::LocalGraph::new(g, edges.iter().copied());
    let mut uf = OffsetUnionFind::new(lg.vertex_count(), g.dim());
    for (i, &e) in lg.edges.iter().enumerate() {
        let (a, b) = lg.ends[i];
        uf.union(a as usize, b as usize, &g.directions()[e.0 % g.direction_count()].full);
    }
    (0..lg.vertex_count()).any(|v| uf.wraps(v))
}
