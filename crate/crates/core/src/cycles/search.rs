//! Depth-first enumeration of closed trails.

use super::graph::LocalGraph;
use super::Budget;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Walk {
    /// Every closed trail through the start was offered to the visitor.
    Exhausted,
    /// The visitor asked to stop.
    Stopped,
    OutOfBudget,
}

/// Offers every closed trail through `start` (edge-distinct, alive edges only,
/// at most `max_len` edges) to `visit(vertices, edges)`, where `vertices` runs
/// from `start` back to `start`. Trails are offered once per traversal order, so
/// the same edge set may be seen several times. Each extension costs one unit
/// of budget.
pub fn closed_trails<F>(lg: &LocalGraph, alive: &[bool], start: u32, max_len: usize, budget: &mut Budget, mut visit: F) -> Walk
where
    F: FnMut(&[u32], &[u32]) -> bool,
{
    // lower bound on the remaining length needed to get back to `start`
    let back = if max_len < usize::MAX { Some(lg.bfs(start, alive)) } else { None };
    let mut used = vec![false; lg.edge_count()];
    let mut verts = vec![start];
    let mut edges: Vec<u32> = Vec::new();
    let mut slots: Vec<usize> = vec![0];
    while let Some(slot) = slots.last_mut() {
        let v = *verts.last().unwrap();
        let adj = &lg.adj[v as usize];
        if *slot < adj.len() {
            let (w, e) = adj[*slot];
            *slot += 1;
            if !alive[e as usize] || used[e as usize] {
                continue;
            }
            let len = edges.len() + 1;
            if let Some(back) = &back {
                if len + back[w as usize] as usize > max_len {
                    continue;
                }
            }
            if !budget.tick() {
                return Walk::OutOfBudget;
            }
            used[e as usize] = true;
            edges.push(e);
            verts.push(w);
            slots.push(0);
            if w == start && visit(&verts, &edges) {
                return Walk::Stopped;
            }
        } else {
            slots.pop();
            if let Some(e) = edges.pop() {
                used[e as usize] = false;
                verts.pop();
            }
        }
    }
    Walk::Exhausted
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{EdgeModel, TorusGeometry};
    use std::collections::BTreeSet;

    #[test]
    fn two_squares_sharing_an_edge() {
        // 2x1 block of faces: three distinct closed trails through a corner of both squares
        let g = TorusGeometry::new(2, 8, EdgeModel::NearestNeighbor).unwrap();
        let p = |x: i64, y: i64| g.vertex_at(&[x, y]);
        let pairs = [((0, 0), (1, 0)), ((1, 0), (2, 0)), ((0, 1), (1, 1)), ((1, 1), (2, 1)), ((0, 0), (0, 1)), ((1, 0), (1, 1)), ((2, 0), (2, 1))];
        let edges = pairs.iter().map(|&(a, b)| g.edge_between(p(a.0, a.1), p(b.0, b.1)).unwrap());
        let lg = LocalGraph::new(&g, edges);
        let alive = vec![true; lg.edge_count()];
        let start = lg.local_vertex(p(1, 0)).unwrap();
        let mut seen = BTreeSet::new();
        let mut budget = Budget::unlimited();
        let walk = closed_trails(&lg, &alive, start, usize::MAX, &mut budget, |_, es| {
            let mut set: Vec<u32> = es.to_vec();
            set.sort();
            seen.insert(set);
            false
        });
        assert_eq!(walk, Walk::Exhausted);
        assert_eq!(seen.len(), 3);
        let mut budget = Budget::new(2);
        let walk = closed_trails(&lg, &alive, start, usize::MAX, &mut budget, |_, _| false);
        assert_eq!(walk, Walk::OutOfBudget);
    }
}
