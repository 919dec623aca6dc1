use std::collections::{BTreeMap, HashSet};
use std::sync::Arc;

use num::BigRational;
use proptest::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use percycle::cluster::component_of;
use percycle::coupling::{check_inclusion_property, coupled_sample, CouplingSample};
use percycle::oracle::{exhaustive_distribution, to_f64, verify_coupling_property_b};
use percycle::{EdgeModel, EdgeStates, Lattice, TorusGeometry};

fn torus(d: usize, r: u64) -> Arc<TorusGeometry> {
    Arc::new(TorusGeometry::new(d, r, EdgeModel::NearestNeighbor).unwrap())
}

fn structural_checks(s: &CouplingSample) {
    let reads = s.torus_reads();
    let distinct: HashSet<_> = reads.iter().collect();
    assert_eq!(distinct.len(), reads.len(), "a torus edge was read twice");
    assert_eq!(reads.len(), s.occupied().len() + s.vacant().len());

    // explored edges carry the torus status of their class
    for &e in s.occupied() {
        assert!(s.torus_config().is_open(s.torus_edge_of(e)));
    }
    for &e in s.vacant() {
        assert!(!s.torus_config().is_open(s.torus_edge_of(e)));
    }
    let explored: HashSet<_> = s.occupied().iter().chain(s.vacant()).copied().collect();
    assert_eq!(explored.len(), s.explored_classes().len());

    // every other window copy of an explored class is ghost, and nothing else is
    let ghosts: HashSet<_> = s.ghost_edges().into_iter().collect();
    assert!(ghosts.is_disjoint(&explored));
    let window = s.window();
    for e in (0..window.edge_slots()).map(percycle::EdgeId).filter(|&e| window.is_edge(e)) {
        let class = s.torus_edge_of(e);
        let is_ghost = s.explored_classes().get(&class).is_some_and(|&rep| rep != e);
        assert_eq!(ghosts.contains(&e), is_ghost);
    }
}

#[test]
fn property_b_discrepancies_have_witnesses() {
    let g = torus(2, 4);
    let mut found = 0;
    for replica in 0..60 {
        let s = coupled_sample(g.clone(), 0.6, 17, replica, 4, usize::MAX).unwrap();
        if s.truncated() {
            continue;
        }
        for k in [4, 6] {
            let Ok(ds) = verify_coupling_property_b(&s, k, 4000) else {
                continue;
            };
            for d in &ds {
                assert!(d.witness.is_some(), "replica {replica} k {k}: no witness for {:?}", d.y);
                let w = d.witness.as_ref().unwrap();
                assert!(w.paths.iter().all(|p| p.len() <= k));
                assert_ne!(w.v1, w.v2);
            }
            found += ds.len();
        }
    }
    assert!(found > 0, "fixture produced no discrepancy");
}

#[test]
fn cluster_size_matches_exact_distribution() {
    // window factor 6 on r = 3 exceeds the torus edge count, so nothing truncates
    let g = torus(2, 3);
    let p = BigRational::new(2.into(), 5.into());
    let exact = exhaustive_distribution(&g, &p, |c| component_of(&*g, c, g.origin()).size()).unwrap();
    let n = 4000u32;
    let mut counts: BTreeMap<usize, u32> = BTreeMap::new();
    for replica in 0..n {
        let s = coupled_sample(g.clone(), 0.4, 23, replica, 6, usize::MAX).unwrap();
        assert!(!s.truncated());
        let size = s.unwrapped_cluster_size();
        assert_eq!(size, component_of(&*g, s.torus_config(), g.origin()).size());
        *counts.entry(size).or_default() += 1;
    }

    // pool sparse cells into the tail before the chi-square test
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let (mut tail_e, mut tail_o) = (0.0, 0.0);
    let mut tv = 0.0;
    for (&size, prob) in &exact {
        let e = to_f64(prob) * n as f64;
        let o = *counts.get(&size).unwrap_or(&0) as f64;
        tv += (e - o).abs() / (2.0 * n as f64);
        if e >= 5.0 {
            cells.push((e, o));
        } else {
            tail_e += e;
            tail_o += o;
        }
    }
    if tail_e > 0.0 {
        cells.push((tail_e, tail_o));
    }
    let stat: f64 = cells.iter().map(|(e, o)| (o - e).powi(2) / e).sum();
    let dof = (cells.len() - 1) as f64;
    let pval = 1.0 - ChiSquared::new(dof).unwrap().cdf(stat);
    assert!(pval > 1e-3, "chi2 {stat} on {dof} dof, p {pval}");
    assert!(tv < 0.05, "total variation {tv}");
    assert!(counts.keys().all(|k| exact.contains_key(k)));
}

#[test]
fn lattice_edge_marginals_are_bernoulli() {
    let g = torus(2, 5);
    let n = 1500;
    let samples: Vec<CouplingSample> = (0..n).map(|i| coupled_sample(g.clone(), 0.3, 9, i, 3, usize::MAX).unwrap()).collect();
    let window = samples[0].window();
    let c = window.center_vertex();
    let edges: Vec<_> = window.neighbors(c).into_iter().map(|(_, e)| e).collect();
    for e in edges {
        let open = samples.iter().filter(|s| s.lattice_config().is_open(e)).count() as f64;
        let sd = (0.3f64 * 0.7 / n as f64).sqrt();
        assert!((open / n as f64 - 0.3).abs() < 4.0 * sd, "edge {e:?}: {}", open / n as f64);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 40, ..ProptestConfig::default() })]

    #[test]
    fn coupling_invariants(seed in any::<u64>(), replica in 0u32..1000, p in 0.05f64..0.6, d in 2usize..4) {
        let r = if d == 2 { 6 } else { 4 };
        let s = coupled_sample(torus(d, r), p, seed, replica, 3, 200_000).unwrap();
        structural_checks(&s);
        if !s.truncated() {
            let reports = check_inclusion_property(&s, &[0, 1, 2, 4, 8, 12]).unwrap();
            for rep in reports {
                prop_assert!(rep.violations.is_empty(), "k {}: {:?}", rep.k, rep.violations);
            }
        }
    }
}
