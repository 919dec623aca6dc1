//! Torus/lattice coupling by unwrapping the torus cluster of the origin.
//!
//! The exploration runs in a lattice window `[-K r, K r]^d`. Active lattice
//! edges are taken in breadth-first order of the explored endpoint (then by
//! edge key), the torus status of the chosen edge's class is read once, and the
//! rest of the class becomes ghost. Ghosts are not stored: an edge is ghost iff
//! its class has an explored representative other than itself. Window edges
//! never explored take their status from an independent lattice sample.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, HashMap};
use std::sync::Arc;

use crate::cluster::intrinsic_ball;
use crate::error::{Error, Result};
use crate::lattice::{BoxGeometry, EdgeId, Lattice, TorusGeometry, VertexId};
use crate::percolation::{replica_rng, stream_id, BondConfig, EdgeStates, Instrumented};

pub const DEFAULT_WINDOW_FACTOR: u64 = 4;

const TAG_TORUS: u8 = 0x20;
const TAG_LATTICE: u8 = 0x21;

/// Lattice edge key. Inside edges sort before edges leaving the window.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum EdgeKey {
    Inside(EdgeId),
    /// From a window vertex along neighbor slot `2j` (forward) or `2j + 1`.
    Outside(VertexId, usize),
}

#[derive(Clone, Debug)]
pub struct CouplingSample {
    torus: Arc<TorusGeometry>,
    omega: BondConfig,
    window: Arc<BoxGeometry>,
    omega_tilde: BondConfig<BoxGeometry>,
    occupied: Vec<EdgeId>,
    vacant: Vec<EdgeId>,
    /// Torus edge class -> its explored lattice representative.
    classes: BTreeMap<EdgeId, EdgeId>,
    truncated: bool,
    steps: usize,
    torus_reads: Vec<EdgeId>,
}

impl CouplingSample {
    pub fn torus(&self) -> &TorusGeometry {
        &self.torus
    }

    pub fn torus_config(&self) -> &BondConfig {
        &self.omega
    }

    pub fn window(&self) -> &BoxGeometry {
        &self.window
    }

    pub fn lattice_config(&self) -> &BondConfig<BoxGeometry> {
        &self.omega_tilde
    }

    /// `O_Z(T)` as window edge ids, in exploration order.
    pub fn occupied(&self) -> &[EdgeId] {
        &self.occupied
    }

    /// `V_Z(T)`.
    pub fn vacant(&self) -> &[EdgeId] {
        &self.vacant
    }

    pub fn explored_classes(&self) -> &BTreeMap<EdgeId, EdgeId> {
        &self.classes
    }

    pub fn truncated(&self) -> bool {
        self.truncated
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Torus edges whose status the exploration read, in order.
    pub fn torus_reads(&self) -> &[EdgeId] {
        &self.torus_reads
    }

    pub fn torus_edge_of(&self, e: EdgeId) -> EdgeId {
        torus_class(&self.torus, &self.window, e)
    }

    /// `G_Z(T)` inside the window.
    pub fn ghost_edges(&self) -> Vec<EdgeId> {
        (0..self.window.edge_slots())
            .map(EdgeId)
            .filter(|&e| self.window.is_edge(e))
            .filter(|&e| self.classes.get(&self.torus_edge_of(e)).is_some_and(|&rep| rep != e))
            .collect()
    }

    /// Torus vertices touched by `O_Z(T)` plus the origin; equals `|C_T(0)|`
    /// on untruncated samples.
    pub fn unwrapped_cluster_size(&self) -> usize {
        let mut seen: Vec<VertexId> = vec![self.torus.origin()];
        for &e in &self.occupied {
            let (a, b) = self.window.endpoints(e);
            seen.push(self.torus.vertex_at(&self.window.point(a)));
            seen.push(self.torus.vertex_at(&self.window.point(b)));
        }
        seen.sort_unstable();
        seen.dedup();
        seen.len()
    }

    /// Lattice points within intrinsic distance `k` of the origin in `ω̃`.
    pub fn lattice_ball(&self, k: usize) -> Vec<(Vec<i64>, usize)> {
        let ball = intrinsic_ball(&*self.window, &self.omega_tilde, self.window.center_vertex(), k);
        ball.members.iter().map(|&(v, d)| (self.window.point(v), d)).collect()
    }
}

fn torus_class(torus: &TorusGeometry, window: &BoxGeometry, e: EdgeId) -> EdgeId {
    let n = window.direction_count();
    let (base, _) = window.endpoints(e);
    EdgeId(torus.vertex_at(&window.point(base)).0 * n + e.0 % n)
}

/// Samples `ω` and an independent window configuration `ω̄` from replica
/// streams of `seed`, then couples them.
pub fn coupled_sample(torus: Arc<TorusGeometry>, p: f64, seed: u64, replica: u32, window_factor: u64, step_budget: usize) -> Result<CouplingSample> {
    if window_factor < 2 {
        return Err(Error::InvalidArgument(format!("window factor {window_factor} < 2")));
    }
    let omega = BondConfig::sample_stream(Arc::clone(&torus), p, seed, stream_id(TAG_TORUS, 0, replica))?;
    let window = Arc::new(BoxGeometry::centered(torus.dim(), window_factor * torus.side() as u64, torus.model())?);
    let mut rng = replica_rng(seed, stream_id(TAG_LATTICE, 0, replica));
    let omega_bar = BondConfig::sample_with(window, p, &mut rng, seed, stream_id(TAG_LATTICE, 0, replica));
    couple_with(omega, omega_bar, step_budget)
}

/// Runs the exploration for given `ω` and `ω̄`.
pub fn couple_with(omega: BondConfig, omega_bar: BondConfig<BoxGeometry>, step_budget: usize) -> Result<CouplingSample> {
    let torus = omega.geometry_arc();
    let window = omega_bar.geometry_arc();
    if window.dim() != torus.dim() || window.model() != torus.model() || window.center().iter().any(|&c| c != 0) {
        return Err(Error::InvalidArgument("window must be centered at the origin with the torus' dimension and model".into()));
    }
    if window.radius() < torus.side() as u64 {
        return Err(Error::InvalidArgument(format!("window radius {} smaller than r = {}", window.radius(), torus.side())));
    }
    let n = torus.direction_count();
    let reader = Instrumented::new(&omega);
    let mut classes: BTreeMap<EdgeId, EdgeId> = BTreeMap::new();
    let mut dist: HashMap<VertexId, u32> = HashMap::new();
    let mut heap: BinaryHeap<Reverse<(u32, EdgeKey, VertexId)>> = BinaryHeap::new();
    let mut occupied = Vec::new();
    let mut vacant = Vec::new();
    let mut truncated = false;
    let mut steps = 0;

    let push_edges = |heap: &mut BinaryHeap<Reverse<(u32, EdgeKey, VertexId)>>, u: VertexId, d: u32| {
        let p = window.point(u);
        for (j, dir) in window.directions().iter().enumerate() {
            for (slot, sign) in [(2 * j, 1i64), (2 * j + 1, -1i64)] {
                let q: Vec<i64> = p.iter().zip(&dir.full).map(|(a, b)| a + sign * b).collect();
                let key = match window.vertex_of(&q) {
                    Some(_) if sign == 1 => EdgeKey::Inside(EdgeId(u.0 * n + j)),
                    Some(w) => EdgeKey::Inside(EdgeId(w.0 * n + j)),
                    None => EdgeKey::Outside(u, slot),
                };
                heap.push(Reverse((d, key, u)));
            }
        }
    };

    let origin = window.center_vertex();
    dist.insert(origin, 0);
    push_edges(&mut heap, origin, 0);
    while let Some(Reverse((d, key, from))) = heap.pop() {
        let class = match key {
            EdgeKey::Inside(e) => torus_class(&torus, &window, e),
            EdgeKey::Outside(u, slot) => {
                let image = torus.vertex_at(&window.point(u));
                torus.neighbors(image)[slot].1
            }
        };
        if classes.contains_key(&class) {
            continue;
        }
        let EdgeKey::Inside(e) = key else {
            truncated = true;
            break;
        };
        if steps >= step_budget {
            truncated = true;
            break;
        }
        steps += 1;
        classes.insert(class, e);
        if reader.is_open(class) {
            occupied.push(e);
            let w = window.other_endpoint(e, from);
            if let std::collections::hash_map::Entry::Vacant(slot) = dist.entry(w) {
                slot.insert(d + 1);
                push_edges(&mut heap, w, d + 1);
            }
        } else {
            vacant.push(e);
        }
    }
    let torus_reads = reader.take_log();
    drop(reader);
    let mut omega_tilde = omega_bar;
    for &e in &occupied {
        omega_tilde.set(e, true);
    }
    for &e in &vacant {
        omega_tilde.set(e, false);
    }
    Ok(CouplingSample { torus, omega, window, omega_tilde, occupied, vacant, classes, truncated, steps, torus_reads })
}

/// Violations of the inclusion property at one `k`: torus vertices within `k`
/// of the origin none of whose lattice copies in the window is within `k`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InclusionReport {
    pub k: usize,
    pub violations: Vec<VertexId>,
}

pub fn check_inclusion_property(sample: &CouplingSample, ks: &[usize]) -> Result<Vec<InclusionReport>> {
    if sample.truncated {
        return Err(Error::Truncated);
    }
    let kmax = ks.iter().copied().max().unwrap_or(0);
    let torus = sample.torus();
    let torus_ball = intrinsic_ball(torus, sample.torus_config(), torus.origin(), kmax);
    let mut lattice_best: HashMap<VertexId, usize> = HashMap::new();
    for (point, d) in sample.lattice_ball(kmax) {
        let image = torus.vertex_at(&point);
        let best = lattice_best.entry(image).or_insert(d);
        *best = (*best).min(d);
    }
    Ok(ks
        .iter()
        .map(|&k| {
            let violations = torus_ball
                .members
                .iter()
                .filter(|&&(x, t)| t <= k && lattice_best.get(&x).is_none_or(|&l| l > k))
                .map(|&(x, _)| x)
                .collect();
            InclusionReport { k, violations }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::EdgeModel;

    fn torus(d: usize, r: u64) -> Arc<TorusGeometry> {
        Arc::new(TorusGeometry::new(d, r, EdgeModel::NearestNeighbor).unwrap())
    }

    #[test]
    fn closed_torus_stops_at_once() {
        let t = torus(2, 5);
        let s = coupled_sample(t.clone(), 0.0, 3, 0, 2, usize::MAX).unwrap();
        assert!(!s.truncated());
        assert_eq!(s.steps(), 4);
        assert!(s.occupied().is_empty());
        assert_eq!(s.vacant().len(), 4);
        assert_eq!(s.unwrapped_cluster_size(), 1);
        let reports = check_inclusion_property(&s, &[0, 1, 5]).unwrap();
        assert!(reports.iter().all(|r| r.violations.is_empty()));
    }

    #[test]
    fn open_torus_stays_near_the_origin() {
        // every torus vertex is first reached at its nearest copy
        let t = torus(2, 4);
        let s = coupled_sample(t.clone(), 1.0, 3, 0, 3, usize::MAX).unwrap();
        assert!(!s.truncated());
        assert_eq!(s.steps(), t.edge_count());
        assert_eq!(s.unwrapped_cluster_size(), 16);
        for &e in s.occupied() {
            let (a, b) = s.window().endpoints(e);
            assert!(s.window().norm_from_center(a).max(s.window().norm_from_center(b)) <= 3);
        }
    }

    #[test]
    fn step_budget_truncates() {
        let s = coupled_sample(torus(2, 4), 1.0, 3, 0, 3, 5).unwrap();
        assert!(s.truncated());
        assert_eq!(s.steps(), 5);
        assert!(matches!(check_inclusion_property(&s, &[1]), Err(Error::Truncated)));
    }

    #[test]
    fn reads_each_class_once() {
        let t = torus(2, 5);
        for replica in 0..50 {
            let s = coupled_sample(t.clone(), 0.4, 11, replica, 4, usize::MAX).unwrap();
            let mut reads = s.torus_reads().to_vec();
            let n = reads.len();
            reads.sort_unstable();
            reads.dedup();
            assert_eq!(reads.len(), n);
            assert_eq!(n, s.steps());
            if !s.truncated() {
                assert_eq!(s.unwrapped_cluster_size(), crate::cluster::component_of(&*t, s.torus_config(), t.origin()).size());
                for &e in s.occupied() {
                    assert!(s.lattice_config().is_open(e));
                    assert!(s.torus_config().is_open(s.torus_edge_of(e)));
                }
                for r in check_inclusion_property(&s, &[0, 1, 2, 4, 8]).unwrap() {
                    assert!(r.violations.is_empty());
                }
            }
        }
    }

    #[test]
    fn ghosts_share_a_class_with_an_explored_edge() {
        let t = torus(2, 3);
        let s = coupled_sample(t, 0.5, 5, 1, 6, usize::MAX).unwrap();
        assert!(!s.truncated());
        let ghosts = s.ghost_edges();
        let explored: std::collections::BTreeSet<EdgeId> = s.occupied().iter().chain(s.vacant()).copied().collect();
        for g in ghosts {
            assert!(!explored.contains(&g));
            assert!(s.explored_classes().contains_key(&s.torus_edge_of(g)));
        }
    }

    #[test]
    fn window_too_small() {
        assert!(coupled_sample(torus(2, 5), 0.2, 1, 0, 1, 10).is_err());
    }
}
