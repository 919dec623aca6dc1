//! Compact subgraphs of the torus used by the cycle searches.

use std::collections::VecDeque;

use crate::lattice::{EdgeId, Lattice, TorusGeometry, VertexId};

const NONE: u32 = u32::MAX;

/// An edge-induced subgraph with local indices. Vertices and edges are sorted
/// by global id, so every traversal order is deterministic.
#[derive(Clone, Debug)]
pub struct LocalGraph<'g> {
    pub geometry: &'g TorusGeometry,
    pub vertices: Vec<VertexId>,
    pub edges: Vec<EdgeId>,
    pub ends: Vec<(u32, u32)>,
    /// `(neighbor, local edge)` sorted by global edge id.
    pub adj: Vec<Vec<(u32, u32)>>,
}

impl<'g> LocalGraph<'g> {
    pub fn new(geometry: &'g TorusGeometry, edges: impl IntoIterator<Item = EdgeId>) -> Self {
        let mut edges: Vec<EdgeId> = edges.into_iter().collect();
        edges.sort_unstable();
        edges.dedup();
        let mut vertices: Vec<VertexId> = edges
            .iter()
            .flat_map(|&e| {
                let (a, b) = geometry.endpoints(e);
                [a, b]
            })
            .collect();
        vertices.sort_unstable();
        vertices.dedup();
        let index = |v: VertexId| vertices.binary_search(&v).unwrap() as u32;
        let ends: Vec<(u32, u32)> = edges
            .iter()
            .map(|&e| {
                let (a, b) = geometry.endpoints(e);
                (index(a), index(b))
            })
            .collect();
        let mut adj = vec![Vec::new(); vertices.len()];
        for (i, &(a, b)) in ends.iter().enumerate() {
            adj[a as usize].push((b, i as u32));
            adj[b as usize].push((a, i as u32));
        }
        LocalGraph { geometry, vertices, edges, ends, adj }
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn local_vertex(&self, v: VertexId) -> Option<u32> {
        self.vertices.binary_search(&v).ok().map(|i| i as u32)
    }

    pub fn local_edge(&self, e: EdgeId) -> Option<u32> {
        self.edges.binary_search(&e).ok().map(|i| i as u32)
    }

    pub fn other(&self, e: u32, v: u32) -> u32 {
        let (a, b) = self.ends[e as usize];
        if a == v {
            b
        } else {
            a
        }
    }

    pub fn distance(&self, u: u32, v: u32) -> usize {
        self.geometry.distance(self.vertices[u as usize], self.vertices[v as usize])
    }

    pub fn alive_degree(&self, v: u32, alive: &[bool]) -> usize {
        self.adj[v as usize].iter().filter(|&&(_, e)| alive[e as usize]).count()
    }

    /// Bridges among alive edges (iterative low-link).
    pub fn bridges(&self, alive: &[bool]) -> Vec<bool> {
        let n = self.vertex_count();
        let mut is_bridge = vec![false; self.edge_count()];
        let mut disc = vec![NONE; n];
        let mut low = vec![0u32; n];
        let mut timer = 0u32;
        // (vertex, edge used to enter, next adjacency slot)
        let mut stack: Vec<(u32, u32, usize)> = Vec::new();
        for root in 0..n as u32 {
            if disc[root as usize] != NONE {
                continue;
            }
            disc[root as usize] = timer;
            low[root as usize] = timer;
            timer += 1;
            stack.push((root, NONE, 0));
            while let Some(frame) = stack.last_mut() {
                let (v, via, slot) = *frame;
                if slot < self.adj[v as usize].len() {
                    frame.2 += 1;
                    let (w, e) = self.adj[v as usize][slot];
                    if !alive[e as usize] || e == via {
                        continue;
                    }
                    if disc[w as usize] == NONE {
                        disc[w as usize] = timer;
                        low[w as usize] = timer;
                        timer += 1;
                        stack.push((w, e, 0));
                    } else {
                        low[v as usize] = low[v as usize].min(disc[w as usize]);
                    }
                } else {
                    stack.pop();
                    if let Some(&(parent, _, _)) = stack.last() {
                        low[parent as usize] = low[parent as usize].min(low[v as usize]);
                        if low[v as usize] > disc[parent as usize] {
                            is_bridge[via as usize] = true;
                        }
                    }
                }
            }
        }
        is_bridge
    }

    /// Component label per vertex over alive edges; isolated vertices get `u32::MAX`.
    pub fn components(&self, alive: &[bool]) -> (Vec<u32>, usize) {
        let mut label = vec![NONE; self.vertex_count()];
        let mut count = 0;
        let mut queue = Vec::new();
        for s in 0..self.vertex_count() as u32 {
            if label[s as usize] != NONE || self.alive_degree(s, alive) == 0 {
                continue;
            }
            label[s as usize] = count;
            queue.clear();
            queue.push(s);
            while let Some(v) = queue.pop() {
                for &(w, e) in &self.adj[v as usize] {
                    if alive[e as usize] && label[w as usize] == NONE {
                        label[w as usize] = count;
                        queue.push(w);
                    }
                }
            }
            count += 1;
        }
        (label, count as usize)
    }

    /// Cycle-space dimension `|E| - |V| + #components` of the alive subgraph.
    pub fn cyclomatic(&self, alive: &[bool]) -> usize {
        let (label, count) = self.components(alive);
        let edges = alive.iter().filter(|&&a| a).count();
        let vertices = label.iter().filter(|&&l| l != NONE).count();
        edges + count - vertices
    }

    /// Removes alive edges that cannot lie on a long closed trail: bridges, and
    /// edges at vertices with no vertex at sup-distance `>= radius` inside their
    /// own 2-edge-connected piece. Repeats until stable.
    pub fn long_core(&self, alive: &mut [bool], radius: usize) {
        loop {
            let bridges = self.bridges(alive);
            let mut changed = false;
            for (e, b) in bridges.iter().enumerate() {
                if *b && alive[e] {
                    alive[e] = false;
                    changed = true;
                }
            }
            // any two distinct vertices are at distance >= 1
            if radius >= 2 {
                let (label, count) = self.components(alive);
                let mut groups: Vec<Vec<u32>> = vec![Vec::new(); count];
                for (v, &l) in label.iter().enumerate() {
                    if l != NONE {
                        groups[l as usize].push(v as u32);
                    }
                }
                for group in &groups {
                    for &u in group {
                        if !group.iter().any(|&v| self.distance(u, v) >= radius) {
                            for &(_, e) in &self.adj[u as usize] {
                                if alive[e as usize] {
                                    alive[e as usize] = false;
                                    changed = true;
                                }
                            }
                        }
                    }
                }
            }
            if !changed {
                return;
            }
        }
    }

    /// Breadth-first distances from `s` over alive edges.
    pub fn bfs(&self, s: u32, alive: &[bool]) -> Vec<u32> {
        let mut dist = vec![NONE; self.vertex_count()];
        dist[s as usize] = 0;
        let mut queue = VecDeque::from([s]);
        while let Some(v) = queue.pop_front() {
            for &(w, e) in &self.adj[v as usize] {
                if alive[e as usize] && dist[w as usize] == NONE {
                    dist[w as usize] = dist[v as usize] + 1;
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    /// Shortest cycle through `x` over alive edges, as a closed vertex/edge walk.
    /// Returns the number of breadth-first expansions performed as well.
    pub fn shortest_cycle_through(&self, x: u32, alive: &[bool], max_len: usize) -> (Option<(Vec<u32>, Vec<u32>)>, u64) {
        let mut best: Option<(Vec<u32>, Vec<u32>)> = None;
        let mut work = 0u64;
        let mut dist = vec![NONE; self.vertex_count()];
        let mut pred = vec![(NONE, NONE); self.vertex_count()];
        for &(w0, e0) in &self.adj[x as usize] {
            if !alive[e0 as usize] {
                continue;
            }
            let limit = best.as_ref().map_or(max_len, |b| b.1.len() - 1).min(max_len);
            dist.iter_mut().for_each(|d| *d = NONE);
            dist[w0 as usize] = 1;
            pred[w0 as usize] = (x, e0);
            let mut queue = VecDeque::from([w0]);
            let mut closing = None;
            'bfs: while let Some(v) = queue.pop_front() {
                work += 1;
                for &(w, e) in &self.adj[v as usize] {
                    if !alive[e as usize] || e == e0 {
                        continue;
                    }
                    if w == x {
                        if dist[v as usize] as usize + 1 <= limit {
                            closing = Some((v, e));
                        }
                        break 'bfs;
                    }
                    if dist[w as usize] == NONE && (dist[v as usize] as usize) < limit {
                        dist[w as usize] = dist[v as usize] + 1;
                        pred[w as usize] = (v, e);
                        queue.push_back(w);
                    }
                }
            }
            if let Some((v, e)) = closing {
                let mut verts = vec![x, v];
                let mut edges = vec![e];
                let mut cur = v;
                while cur != x {
                    let (p, pe) = pred[cur as usize];
                    edges.push(pe);
                    verts.push(p);
                    cur = p;
                }
                verts.reverse();
                edges.reverse();
                if best.as_ref().is_none_or(|b| edges.len() < b.1.len()) {
                    best = Some((verts, edges));
                }
            }
        }
        (best, work)
    }

    /// Fundamental cycles of a breadth-first forest over alive edges, one per
    /// non-tree edge, as closed vertex/edge walks.
    pub fn fundamental_cycles(&self, alive: &[bool]) -> Vec<(Vec<u32>, Vec<u32>)> {
        let n = self.vertex_count();
        let mut parent = vec![(NONE, NONE); n];
        let mut depth = vec![NONE; n];
        let mut tree = vec![false; self.edge_count()];
        for s in 0..n as u32 {
            if depth[s as usize] != NONE || self.alive_degree(s, alive) == 0 {
                continue;
            }
            depth[s as usize] = 0;
            let mut queue = VecDeque::from([s]);
            while let Some(v) = queue.pop_front() {
                for &(w, e) in &self.adj[v as usize] {
                    if alive[e as usize] && depth[w as usize] == NONE {
                        depth[w as usize] = depth[v as usize] + 1;
                        parent[w as usize] = (v, e);
                        tree[e as usize] = true;
                        queue.push_back(w);
                    }
                }
            }
        }
        let mut out = Vec::new();
        for e in 0..self.edge_count() as u32 {
            if !alive[e as usize] || tree[e as usize] {
                continue;
            }
            let (a, b) = self.ends[e as usize];
            let (mut u, mut w) = (a, b);
            let (mut up_v, mut up_e) = (vec![a], Vec::new());
            let (mut down_v, mut down_e) = (vec![b], Vec::new());
            while u != w {
                if depth[u as usize] >= depth[w as usize] {
                    let (p, pe) = parent[u as usize];
                    up_e.push(pe);
                    up_v.push(p);
                    u = p;
                } else {
                    let (p, pe) = parent[w as usize];
                    down_e.push(pe);
                    down_v.push(p);
                    w = p;
                }
            }
            // a -> lca -> b, then back over e
            down_v.pop();
            let mut verts = up_v;
            verts.extend(down_v.into_iter().rev());
            verts.push(a);
            let mut edges = up_e;
            edges.extend(down_e.into_iter().rev());
            edges.push(e);
            out.push((verts, edges));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::EdgeModel;

    fn grid_edges(g: &TorusGeometry, n: i64) -> Vec<EdgeId> {
        let mut out = Vec::new();
        for x in 0..n {
            for y in 0..n {
                let v = g.vertex_at(&[x, y]);
                if x + 1 < n {
                    out.push(g.edge_between(v, g.vertex_at(&[x + 1, y])).unwrap());
                }
                if y + 1 < n {
                    out.push(g.edge_between(v, g.vertex_at(&[x, y + 1])).unwrap());
                }
            }
        }
        out
    }

    #[test]
    fn bridges_of_square_with_tail() {
        let g = TorusGeometry::new(2, 10, EdgeModel::NearestNeighbor).unwrap();
        let mut edges = grid_edges(&g, 2);
        let tail = g.edge_between(g.vertex_at(&[1, 1]), g.vertex_at(&[2, 1])).unwrap();
        edges.push(tail);
        let lg = LocalGraph::new(&g, edges);
        let alive = vec![true; lg.edge_count()];
        let bridges = lg.bridges(&alive);
        assert_eq!(bridges.iter().filter(|&&b| b).count(), 1);
        assert!(bridges[lg.local_edge(tail).unwrap() as usize]);
        assert_eq!(lg.cyclomatic(&alive), 1);
    }

    #[test]
    fn long_core_removes_short_square() {
        let g = TorusGeometry::new(2, 8, EdgeModel::NearestNeighbor).unwrap();
        let lg = LocalGraph::new(&g, grid_edges(&g, 2));
        let mut alive = vec![true; lg.edge_count()];
        lg.long_core(&mut alive, 2);
        assert!(alive.iter().all(|&a| !a));
        let mut alive = vec![true; lg.edge_count()];
        lg.long_core(&mut alive, 1);
        assert!(alive.iter().all(|&a| a));
    }

    #[test]
    fn fundamental_cycles_close() {
        let g = TorusGeometry::new(2, 8, EdgeModel::NearestNeighbor).unwrap();
        let lg = LocalGraph::new(&g, grid_edges(&g, 3));
        let alive = vec![true; lg.edge_count()];
        let cycles = lg.fundamental_cycles(&alive);
        assert_eq!(cycles.len(), 4);
        for (verts, edges) in cycles {
            assert_eq!(verts.len(), edges.len() + 1);
            assert_eq!(verts.first(), verts.last());
            for (i, &e) in edges.iter().enumerate() {
                assert_eq!(lg.other(e, verts[i]), verts[i + 1]);
            }
        }
    }

    #[test]
    fn shortest_cycle() {
        let g = TorusGeometry::new(2, 8, EdgeModel::NearestNeighbor).unwrap();
        let lg = LocalGraph::new(&g, grid_edges(&g, 3));
        let alive = vec![true; lg.edge_count()];
        let x = lg.local_vertex(g.vertex_at(&[1, 1])).unwrap();
        let (cycle, _) = lg.shortest_cycle_through(x, &alive, usize::MAX);
        assert_eq!(cycle.unwrap().1.len(), 4);
        let (cycle, _) = lg.shortest_cycle_through(x, &alive, 3);
        assert!(cycle.is_none());
    }
}
