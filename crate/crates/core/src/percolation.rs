//! Seeded bond configurations.
//!
//! Replica `k` of master seed `s` draws from ChaCha8 stream `k` keyed by `s`, so
//! every replica is a pure function of `(s, k)` whatever the thread layout.
//! An edge is open iff its 64-bit draw is below `⌊p · 2^64⌋`; the comparison is
//! integer-only, which keeps configurations bit-identical across platforms.

use std::cell::RefCell;
use std::sync::Arc;

use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::lattice::{EdgeId, EdgeModel, Lattice, TorusGeometry};

/// Read access to edge statuses.
pub trait EdgeStates {
    fn is_open(&self, e: EdgeId) -> bool;
}

impl<S: EdgeStates + ?Sized> EdgeStates for &S {
    fn is_open(&self, e: EdgeId) -> bool {
        (**self).is_open(e)
    }
}

pub fn replica_rng(master_seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(stream);
    rng
}

/// Packs `(tag, group, replica)` into one stream id.
pub fn stream_id(tag: u8, group: u32, replica: u32) -> u64 {
    ((tag as u64) << 56) | ((group as u64 & 0x00ff_ffff) << 32) | replica as u64
}

fn check_probability(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::Probability(p))
    }
}

/// `None` means every edge is open (`p = 1`).
fn open_threshold(p: f64) -> Option<u64> {
    if p >= 1.0 {
        None
    } else {
        // exact: multiplying by a power of two only shifts the exponent
        Some((p * 18_446_744_073_709_551_616.0) as u64)
    }
}

/// One percolation sample: a bit per edge slot.
#[derive(Clone, Debug)]
pub struct BondConfig<G = TorusGeometry> {
    geometry: Arc<G>,
    bits: Vec<u64>,
    p: f64,
    seed: u64,
    stream: u64,
}

impl<G: Lattice> BondConfig<G> {
    /// Samples stream 0 of `seed`.
    pub fn sample(geometry: Arc<G>, p: f64, seed: u64) -> Result<Self> {
        Self::sample_stream(geometry, p, seed, 0)
    }

    pub fn sample_stream(geometry: Arc<G>, p: f64, seed: u64, stream: u64) -> Result<Self> {
        check_probability(p)?;
        let mut rng = replica_rng(seed, stream);
        Ok(Self::sample_with(geometry, p, &mut rng, seed, stream))
    }

    /// Consumes exactly one 64-bit draw per edge slot of `geometry`.
    pub fn sample_with(geometry: Arc<G>, p: f64, rng: &mut impl RngCore, seed: u64, stream: u64) -> Self {
        let slots = geometry.edge_slots();
        let mut bits = vec![0u64; slots.div_ceil(64)];
        let threshold = open_threshold(p);
        for (w, word) in bits.iter_mut().enumerate() {
            let lo = w * 64;
            let hi = (lo + 64).min(slots);
            let mut acc = 0u64;
            for i in lo..hi {
                let draw = rng.next_u64();
                if threshold.is_none_or(|t| draw < t) {
                    acc |= 1 << (i - lo);
                }
            }
            *word = acc;
        }
        let mut cfg = BondConfig { geometry, bits, p, seed, stream };
        cfg.clear_non_edges();
        cfg
    }

    /// Fixture constructor: exactly the listed edges are open.
    pub fn from_open_edges(geometry: Arc<G>, p: f64, open: impl IntoIterator<Item = EdgeId>) -> Self {
        let mut cfg = Self::closed(geometry, p);
        for e in open {
            cfg.set(e, true);
        }
        cfg
    }

    pub fn closed(geometry: Arc<G>, p: f64) -> Self {
        let words = geometry.edge_slots().div_ceil(64);
        BondConfig { geometry, bits: vec![0; words], p, seed: 0, stream: 0 }
    }

    pub fn from_states(geometry: Arc<G>, p: f64, states: &impl EdgeStates) -> Self {
        let mut cfg = Self::closed(geometry, p);
        for e in 0..cfg.geometry.edge_slots() {
            if cfg.geometry.is_edge(EdgeId(e)) && states.is_open(EdgeId(e)) {
                cfg.set(EdgeId(e), true);
            }
        }
        cfg
    }

    fn clear_non_edges(&mut self) {
        for e in 0..self.geometry.edge_slots() {
            if !self.geometry.is_edge(EdgeId(e)) {
                self.set(EdgeId(e), false);
            }
        }
    }

    pub fn set(&mut self, e: EdgeId, open: bool) {
        let (w, b) = (e.0 / 64, e.0 % 64);
        if open {
            self.bits[w] |= 1 << b;
        } else {
            self.bits[w] &= !(1 << b);
        }
    }

    pub fn geometry(&self) -> &G {
        &self.geometry
    }

    pub fn geometry_arc(&self) -> Arc<G> {
        Arc::clone(&self.geometry)
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    pub fn words(&self) -> &[u64] {
        &self.bits
    }

    pub fn open_count(&self) -> usize {
        self.bits.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn open_edges(&self) -> impl Iterator<Item = EdgeId> + '_ {
        self.bits.iter().enumerate().flat_map(|(w, &word)| {
            let mut rest = word;
            std::iter::from_fn(move || {
                if rest == 0 {
                    return None;
                }
                let b = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                Some(EdgeId(w * 64 + b))
            })
        })
    }
}

impl<G> EdgeStates for BondConfig<G> {
    #[inline]
    fn is_open(&self, e: EdgeId) -> bool {
        (self.bits[e.0 / 64] >> (e.0 % 64)) & 1 == 1
    }
}

/// Logs every status query. Single-threaded by construction.
pub struct Instrumented<'a, S: ?Sized> {
    inner: &'a S,
    log: RefCell<Vec<EdgeId>>,
}

impl<'a, S: EdgeStates + ?Sized> Instrumented<'a, S> {
    pub fn new(inner: &'a S) -> Self {
        Instrumented { inner, log: RefCell::new(Vec::new()) }
    }

    /// Returns the reads so far and clears the log.
    pub fn take_log(&self) -> Vec<EdgeId> {
        std::mem::take(&mut *self.log.borrow_mut())
    }

    pub fn reads(&self) -> usize {
        self.log.borrow().len()
    }
}

impl<S: EdgeStates + ?Sized> EdgeStates for Instrumented<'_, S> {
    fn is_open(&self, e: EdgeId) -> bool {
        self.log.borrow_mut().push(e);
        self.inner.is_open(e)
    }
}

/// Statuses generated on demand from a counter-based hash of the edge index
/// (SplitMix64 evaluated at position `e`). Used for lattice boxes too large to
/// store, where only the explored cluster is ever queried.
#[derive(Clone, Copy, Debug)]
pub struct CounterStates {
    key: u64,
    threshold: Option<u64>,
}

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl CounterStates {
    pub fn new(p: f64, master_seed: u64, stream: u64) -> Result<Self> {
        check_probability(p)?;
        let key = mix64(mix64(master_seed.wrapping_add(GOLDEN)) ^ stream.wrapping_mul(GOLDEN));
        Ok(CounterStates { key, threshold: open_threshold(p) })
    }
}

impl EdgeStates for CounterStates {
    #[inline]
    fn is_open(&self, e: EdgeId) -> bool {
        let draw = mix64(self.key.wrapping_add((e.0 as u64).wrapping_add(1).wrapping_mul(GOLDEN)));
        self.threshold.is_none_or(|t| draw < t)
    }
}

/// Reference critical points.
#[derive(Clone, Debug, PartialEq)]
pub struct PcRow {
    pub dim: usize,
    pub model: EdgeModel,
    pub pc: f64,
    pub source: String,
}

#[derive(Clone, Debug)]
pub struct CriticalPointTable {
    pub version: String,
    pub rows: Vec<PcRow>,
}

const BUNDLED_TABLE: &str = include_str!("../data/pc_reference.tsv");

impl CriticalPointTable {
    pub fn bundled() -> Self {
        Self::parse(BUNDLED_TABLE).expect("bundled p_c table is well-formed")
    }

    /// Tab-separated `d, model, L, p_c, source`; `#` starts a comment, and
    /// `# version: X` names the table revision.
    pub fn parse(text: &str) -> Result<Self> {
        let mut version = String::from("unversioned");
        let mut rows = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if let Some(comment) = line.strip_prefix('#') {
                if let Some(v) = comment.trim().strip_prefix("version:") {
                    version = v.trim().to_string();
                }
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let bad = |reason: &str| Error::Table { line: i + 1, reason: reason.to_string() };
            let cols: Vec<&str> = line.split('\t').map(str::trim).collect();
            if cols.len() != 5 {
                return Err(bad("expected 5 tab-separated columns"));
            }
            let dim: usize = cols[0].parse().map_err(|_| bad("bad dimension"))?;
            let model = match (cols[1], cols[2]) {
                ("nn", "-") => EdgeModel::NearestNeighbor,
                ("spread-out", l) => EdgeModel::SpreadOut { range: l.parse().map_err(|_| bad("bad range"))? },
                _ => return Err(bad("unknown model")),
            };
            let pc: f64 = cols[3].parse().map_err(|_| bad("bad p_c"))?;
            if !(pc > 0.0 && pc < 1.0) {
                return Err(bad("p_c outside (0,1)"));
            }
            if cols[4].is_empty() {
                return Err(bad("missing source"));
            }
            rows.push(PcRow { dim, model, pc, source: cols[4].to_string() });
        }
        Ok(CriticalPointTable { version, rows })
    }

    pub fn lookup(&self, dim: usize, model: EdgeModel) -> Result<&PcRow> {
        self.rows
            .iter()
            .find(|row| row.dim == dim && row.model == model)
            .ok_or(Error::NoReference { d: dim, model: model.label() })
    }
}

pub fn pc_reference(dim: usize, model: EdgeModel) -> Result<PcRow> {
    CriticalPointTable::bundled().lookup(dim, model).cloned()
}

/// One row of the calibration scan: `k · P(∂B_k(0) ≠ ∅)` over the k-grid.
#[derive(Clone, Debug)]
pub struct ScanRow {
    pub p: f64,
    pub k_times_prob: Vec<(usize, f64)>,
    pub mean: f64,
}

/// Diagnostic for reference rows: near `p_c` the one-arm intrinsic probability
/// decays like `1/k`, so `k · P` is roughly flat. Uses the origin's intrinsic
/// ball only, on counter-based statuses.
pub fn calibrate_pc_scan(
    dim: usize,
    side: u64,
    p_grid: &[f64],
    k_grid: &[usize],
    samples: usize,
    seed: u64,
) -> Result<Vec<ScanRow>> {
    use rayon::prelude::*;
    if p_grid.is_empty() || k_grid.is_empty() {
        return Err(Error::InvalidArgument("empty p- or k-grid".into()));
    }
    let geometry = TorusGeometry::new(dim, side, EdgeModel::NearestNeighbor)?;
    let kmax = *k_grid.iter().max().unwrap();
    p_grid
        .iter()
        .enumerate()
        .map(|(gi, &p)| {
            check_probability(p)?;
            let depths: Vec<usize> = (0..samples)
                .into_par_iter()
                .map(|s| {
                    let states = CounterStates::new(p, seed, stream_id(1, gi as u32, s as u32)).unwrap();
                    crate::cluster::intrinsic_ball(&geometry, &states, geometry.origin(), kmax).max_distance()
                })
                .collect();
            let k_times_prob: Vec<(usize, f64)> = k_grid
                .iter()
                .map(|&k| {
                    let hits = depths.iter().filter(|&&m| m >= k).count();
                    (k, k as f64 * hits as f64 / samples.max(1) as f64)
                })
                .collect();
            let mean = k_times_prob.iter().map(|x| x.1).sum::<f64>() / k_times_prob.len() as f64;
            Ok(ScanRow { p, k_times_prob, mean })
        })
        .collect()
}

/// Per-edge open frequencies over a batch of samples.
pub fn open_frequencies<'a, S: EdgeStates + 'a>(edges: &[EdgeId], samples: impl IntoIterator<Item = &'a S>) -> (Vec<f64>, usize) {
    let mut counts = vec![0usize; edges.len()];
    let mut n = 0;
    for s in samples {
        n += 1;
        for (c, &e) in counts.iter_mut().zip(edges) {
            *c += s.is_open(e) as usize;
        }
    }
    (counts.into_iter().map(|c| c as f64 / n.max(1) as f64).collect(), n)
}
