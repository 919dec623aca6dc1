//! Monte Carlo harness: replica-parallel estimators, summaries, log-log fits
//! and plot-ready reports.
//!
//! Replica `i` of size `r` draws from stream `(tag, r, i)` of the master seed,
//! and values are aggregated in replica order, so reports do not depend on the
//! number of worker threads.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;

use rand::seq::index::sample;
use rayon::prelude::*;
use serde::Serialize;

use crate::cluster::{component_of, label_components};
use crate::cycles::{compute_y, long_cycle_vertex_count, shortest_long_cycle_through};
use crate::error::{Error, Result};
use crate::lattice::{BoxGeometry, EdgeModel, TorusGeometry, VertexId};
use crate::percolation::{replica_rng, stream_id, BondConfig, CounterStates};
use crate::surgery::{estimate_p_ydelta_zero, Method, Representatives};

const TAG_VERTEX_LONG: u8 = 0x40;
const TAG_LCK: u8 = 0x41;
const TAG_YDELTA: u8 = 0x42;
const TAG_TAIL: u8 = 0x43;
const TAG_TWO_POINT_TORUS: u8 = 0x44;
const TAG_TWO_POINT_BOX: u8 = 0x45;
const TAG_BALL: u8 = 0x46;
const TAG_MEAN_SIZE: u8 = 0x47;
const TAG_ORIGINS: u8 = 0x48;

const Z95: f64 = 1.959_963_984_540_054;

/// Mean and standard error over the clean replicas.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub replicas: usize,
    pub discarded: usize,
    pub mean: f64,
    /// Sample standard deviation over `√replicas`; NaN below two replicas.
    pub stderr: f64,
}

impl Summary {
    pub fn from_values(values: &[f64], discarded: usize) -> Self {
        let n = values.len();
        let mean = if n == 0 { f64::NAN } else { values.iter().sum::<f64>() / n as f64 };
        let stderr = if n < 2 {
            f64::NAN
        } else {
            let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
            (ss / (n - 1) as f64).sqrt() / (n as f64).sqrt()
        };
        Summary { replicas: n, discarded, mean, stderr }
    }

    /// `None` entries count as discarded.
    pub fn from_options(values: &[Option<f64>]) -> Self {
        let clean: Vec<f64> = values.iter().flatten().copied().collect();
        Self::from_values(&clean, values.len() - clean.len())
    }

    pub fn ci95(&self) -> (f64, f64) {
        (self.mean - Z95 * self.stderr, self.mean + Z95 * self.stderr)
    }
}

/// Wilson score interval for `successes` out of `n`.
pub fn wilson_interval(successes: f64, n: usize, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let phat = successes / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (phat + z2 / (2.0 * n)) / denom;
    let half = z * (phat * (1.0 - phat) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let lo = if successes <= 0.0 { 0.0 } else { (centre - half).max(0.0) };
    let hi = if successes >= n { 1.0 } else { (centre + half).min(1.0) };
    (lo, hi)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SlopeFit {
    pub slope: f64,
    /// NaN for two points.
    pub stderr: f64,
    pub r2: f64,
}

/// Ordinary least squares of `log y` on `log V`.
pub fn loglog_slope(points: &[(f64, f64)]) -> Result<SlopeFit> {
    if points.len() < 2 {
        return Err(Error::InvalidArgument(format!("slope fit needs at least 2 points, got {}", points.len())));
    }
    if let Some(&(v, y)) = points.iter().find(|&&(v, y)| !(v > 0.0 && y > 0.0)) {
        return Err(Error::InvalidArgument(format!("slope fit needs positive values, got ({v}, {y})")));
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("slope fit needs at least two distinct sizes".into()));
    }
    let slope = sxy / sxx;
    let sse: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - my - slope * (x - mx)).powi(2)).sum();
    let stderr = if points.len() > 2 { (sse / (n - 2.0) / sxx).sqrt() } else { f64::NAN };
    let r2 = if syy == 0.0 { 1.0 } else { 1.0 - sse / syy };
    Ok(SlopeFit { slope, stderr, r2 })
}

/// One CSV line. Slope rows leave `r` and the per-size columns empty.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReportRow {
    pub quantity: String,
    pub d: usize,
    pub r: Option<u64>,
    #[serde(rename = "L")]
    pub l: Option<u64>,
    pub p: f64,
    pub replicas: usize,
    pub discarded: usize,
    pub mean: Option<f64>,
    pub stderr: Option<f64>,
    pub ci95_lo: Option<f64>,
    pub ci95_hi: Option<f64>,
    pub slope: Option<f64>,
    pub slope_stderr: Option<f64>,
}

pub const CSV_HEADER: &str = "quantity,d,r,L,p,replicas,discarded,mean,stderr,ci95_lo,ci95_hi,slope,slope_stderr";

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct EstimateReport {
    pub rows: Vec<ReportRow>,
    /// Written as `#` comment lines ahead of the CSV header.
    pub notes: Vec<String>,
}

fn cell<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

impl EstimateReport {
    pub fn row(&self, quantity: &str, r: u64) -> Option<&ReportRow> {
        self.rows.iter().find(|row| row.quantity == quantity && row.r == Some(r))
    }

    pub fn rows_of<'a>(&'a self, quantity: &'a str) -> impl Iterator<Item = &'a ReportRow> + 'a {
        self.rows.iter().filter(move |row| row.quantity == quantity && row.r.is_some())
    }

    pub fn slope_row(&self, quantity: &str) -> Option<&ReportRow> {
        self.rows.iter().find(|row| row.quantity == quantity && row.r.is_none())
    }

    pub fn extend(&mut self, other: EstimateReport) {
        self.rows.extend(other.rows);
        for n in other.notes {
            if !self.notes.contains(&n) {
                self.notes.push(n);
            }
        }
    }

    /// `meta` lines (e.g. a timestamp) go first; notes follow as comments.
    pub fn to_csv(&self, meta: &[String]) -> String {
        let mut out = String::new();
        for line in meta.iter().chain(&self.notes) {
            let _ = writeln!(out, "# {line}");
        }
        out.push_str(CSV_HEADER);
        out.push('\n');
        for row in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{}",
                row.quantity,
                row.d,
                cell(row.r),
                cell(row.l),
                row.p,
                row.replicas,
                row.discarded,
                cell(row.mean),
                cell(row.stderr),
                cell(row.ci95_lo),
                cell(row.ci95_hi),
                cell(row.slope),
                cell(row.slope_stderr)
            );
        }
        out
    }

    pub fn to_jsonl(&self) -> String {
        self.rows.iter().map(|row| serde_json::to_string(row).expect("rows serialize") + "\n").collect()
    }
}

/// Common inputs of the torus estimators.
#[derive(Clone, Debug, PartialEq)]
pub struct Params {
    pub d: usize,
    pub model: EdgeModel,
    pub p: f64,
    pub seed: u64,
    pub replicas: u32,
    /// Per long-cycle query.
    pub budget: u64,
}

impl Params {
    pub fn nn(d: usize, p: f64, seed: u64, replicas: u32) -> Self {
        Params { d, model: EdgeModel::NearestNeighbor, p, seed, replicas, budget: crate::cycles::DEFAULT_BUDGET }
    }

    fn range(&self) -> Option<u64> {
        match self.model {
            EdgeModel::NearestNeighbor => None,
            EdgeModel::SpreadOut { range } => Some(range as u64),
        }
    }

    fn torus(&self, r: u64) -> Result<Arc<TorusGeometry>> {
        Ok(Arc::new(TorusGeometry::new(self.d, r, self.model)?))
    }

    fn config(&self, g: &Arc<TorusGeometry>, tag: u8, r: u64, i: u32) -> Result<BondConfig> {
        BondConfig::sample_stream(Arc::clone(g), self.p, self.seed, stream_id(tag, r as u32, i))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Kind {
    Mean,
    /// A frequency: Wilson interval instead of the normal one.
    Proportion,
}

struct Column {
    name: String,
    kind: Kind,
    /// Fit a slope against `log V` across sizes.
    slope: bool,
}

fn col(name: impl Into<String>, kind: Kind, slope: bool) -> Column {
    Column { name: name.into(), kind, slope }
}

/// Runs `replica(i)` for every replica in parallel, keeping replica order.
fn run_replicas<F>(replicas: u32, replica: F) -> Result<Vec<Option<Vec<f64>>>>
where
    F: Fn(u32) -> Result<Option<Vec<f64>>> + Sync + Send,
{
    (0..replicas).into_par_iter().map(|i| replica(i)).collect()
}

/// A per-size row from a summary; `proportion` selects the Wilson interval.
pub fn summary_row(quantity: impl Into<String>, params: &Params, r: u64, s: &Summary, proportion: bool) -> ReportRow {
    let (lo, hi) = if proportion { wilson_interval(s.mean * s.replicas as f64, s.replicas, Z95) } else { s.ci95() };
    ReportRow {
        quantity: quantity.into(),
        d: params.d,
        r: Some(r),
        l: params.range(),
        p: params.p,
        replicas: s.replicas,
        discarded: s.discarded,
        mean: Some(s.mean),
        stderr: Some(s.stderr),
        ci95_lo: Some(lo),
        ci95_hi: Some(hi),
        slope: None,
        slope_stderr: None,
    }
}

fn size_rows(params: &Params, r: u64, columns: &[Column], values: &[Option<Vec<f64>>]) -> Vec<ReportRow> {
    columns
        .iter()
        .enumerate()
        .map(|(c, column)| {
            let per: Vec<Option<f64>> = values.iter().map(|v| v.as_ref().map(|v| v[c])).collect();
            summary_row(column.name.clone(), params, r, &Summary::from_options(&per), column.kind == Kind::Proportion)
        })
        .collect()
}

/// Per-size rows followed by one slope row per slope-fitted column.
fn assemble(params: &Params, sizes: &[u64], columns: &[Column], mut compute: impl FnMut(u64) -> Result<Vec<Option<Vec<f64>>>>, volume: impl Fn(u64) -> f64) -> Result<EstimateReport> {
    if sizes.is_empty() {
        return Err(Error::InvalidArgument("empty size list".into()));
    }
    let mut report = EstimateReport::default();
    for &r in sizes {
        let values = compute(r)?;
        report.rows.extend(size_rows(params, r, columns, &values));
    }
    for column in columns.iter().filter(|c| c.slope) {
        let rows: Vec<&ReportRow> = report.rows_of(&column.name).collect();
        let points: Vec<(f64, f64)> = rows.iter().map(|row| (volume(row.r.unwrap()), row.mean.unwrap())).collect();
        let fit = loglog_slope(&points).ok();
        report.rows.push(ReportRow {
            quantity: column.name.clone(),
            d: params.d,
            r: None,
            l: params.range(),
            p: params.p,
            replicas: rows.iter().map(|row| row.replicas).sum(),
            discarded: rows.iter().map(|row| row.discarded).sum(),
            mean: None,
            stderr: None,
            ci95_lo: None,
            ci95_hi: None,
            slope: fit.map(|f| f.slope),
            slope_stderr: fit.map(|f| f.stderr),
        });
    }
    if params.d == 7 && params.model == EdgeModel::NearestNeighbor {
        report.notes.push("d=7 nearest-neighbour percolation stands in for the high-dimensional regime".into());
    }
    report.notes.push("scaling bands use engineering constants; the theorems fix none".into());
    Ok(report)
}

fn torus_volume(d: usize) -> impl Fn(u64) -> f64 {
    move |r| (r as f64).powi(d as i32)
}

/// `P(0 in a long cycle)` (as count over `V`) and the long-cycle vertex count.
pub fn est_vertex_long_cycle(params: &Params, sizes: &[u64]) -> Result<EstimateReport> {
    let columns = [col("p_vertex_long_cycle", Kind::Mean, true), col("long_cycle_vertices", Kind::Mean, true)];
    assemble(
        params,
        sizes,
        &columns,
        |r| {
            let g = params.torus(r)?;
            let v = g.volume() as f64;
            run_replicas(params.replicas, |i| {
                let cfg = params.config(&g, TAG_VERTEX_LONG, r, i)?;
                let c = long_cycle_vertex_count(&g, &cfg, params.budget);
                Ok(c.is_clean().then(|| vec![c.count as f64 / v, c.count as f64]))
            })
        },
        torus_volume(params.d),
    )
}

fn pick_origins(g: &TorusGeometry, seed: u64, group: u64, replica: u32, count: usize) -> Vec<VertexId> {
    let v = g.volume();
    let mut rng = replica_rng(seed, stream_id(TAG_ORIGINS, group as u32, replica));
    let mut picks: Vec<VertexId> = sample(&mut rng, v, count.min(v)).into_iter().map(VertexId).collect();
    picks.sort_unstable();
    picks
}

/// `P(LC^(k))` at `origins` sampled vertices per replica, and the ratio `P̂·V/k`.
pub fn est_lck(params: &Params, sizes: &[u64], ks: &[usize], origins: usize) -> Result<EstimateReport> {
    if ks.is_empty() || origins == 0 {
        return Err(Error::InvalidArgument("need a k schedule and at least one origin".into()));
    }
    let mut ks = ks.to_vec();
    ks.sort_unstable();
    ks.dedup();
    let mut columns = Vec::new();
    for &k in &ks {
        columns.push(col(format!("p_lck[k={k}]"), Kind::Mean, false));
        columns.push(col(format!("lck_ratio[k={k}]"), Kind::Mean, false));
    }
    assemble(
        params,
        sizes,
        &columns,
        |r| {
            let g = params.torus(r)?;
            let v = g.volume() as f64;
            run_replicas(params.replicas, |i| {
                let cfg = params.config(&g, TAG_LCK, r, i)?;
                let picks = pick_origins(&g, params.seed, r, i, origins);
                let mut hits = vec![0usize; ks.len()];
                for &x in &picks {
                    // LC^(k) grows with k: once found, it holds for every larger k
                    for (j, &k) in ks.iter().enumerate() {
                        let ans = shortest_long_cycle_through(&g, &cfg, x, k, params.budget);
                        if ans.is_unknown() {
                            return Ok(None);
                        }
                        if ans.is_yes() {
                            hits[j..].iter_mut().for_each(|h| *h += 1);
                            break;
                        }
                    }
                }
                let m = picks.len() as f64;
                Ok(Some(ks.iter().zip(&hits).flat_map(|(&k, &h)| [h as f64 / m, h as f64 / m * v / k as f64]).collect()))
            })
        },
        torus_volume(params.d),
    )
}

fn delta_label(delta: f64) -> String {
    format!("{delta}")
}

/// `Y_δ`, `δ·Y_δ` and the indicator `Y_δ = 0` for each `δ`.
pub fn est_ydelta(params: &Params, sizes: &[u64], deltas: &[f64]) -> Result<EstimateReport> {
    if deltas.is_empty() || deltas.iter().any(|&d| !(d > 0.0)) {
        return Err(Error::InvalidArgument("deltas must be positive".into()));
    }
    let mut columns = Vec::new();
    for &delta in deltas {
        let l = delta_label(delta);
        columns.push(col(format!("y_delta_mean[delta={l}]"), Kind::Mean, false));
        columns.push(col(format!("delta_y_delta_mean[delta={l}]"), Kind::Mean, false));
        columns.push(col(format!("p_y_delta_zero[delta={l}]"), Kind::Proportion, false));
    }
    assemble(
        params,
        sizes,
        &columns,
        |r| {
            let g = params.torus(r)?;
            let v23 = (g.volume() as f64).powf(2.0 / 3.0);
            let smallest = deltas.iter().cloned().fold(f64::INFINITY, f64::min) * v23;
            run_replicas(params.replicas, |i| {
                let cfg = params.config(&g, TAG_YDELTA, r, i)?;
                let comps = label_components(&*g, &cfg);
                // (size, Y) of every cluster that any threshold can see
                let mut ys = Vec::new();
                for c in 0..comps.count() {
                    if comps.sizes[c] as f64 <= smallest {
                        continue;
                    }
                    let y = if comps.edge_counts[c] < comps.sizes[c] {
                        0
                    } else {
                        match compute_y(&g, &comps.cluster(&*g, &cfg, c), params.budget).value {
                            Some(y) => y,
                            None => return Ok(None),
                        }
                    };
                    ys.push((comps.sizes[c] as f64, y));
                }
                let mut out = Vec::new();
                for &delta in deltas {
                    let y: usize = ys.iter().filter(|(s, _)| *s > delta * v23).map(|(_, y)| y).sum();
                    out.extend([y as f64, delta * y as f64, (y == 0) as u8 as f64]);
                }
                Ok(Some(out))
            })
        },
        torus_volume(params.d),
    )
}

/// Frequencies of the tail event through exhibited witnesses and through the
/// long-cycle vertex count.
pub fn est_long_cycle_tail(params: &Params, sizes: &[u64], epsilons: &[f64]) -> Result<EstimateReport> {
    if epsilons.is_empty() || epsilons.iter().any(|&e| !(e > 0.0)) {
        return Err(Error::InvalidArgument("epsilons must be positive".into()));
    }
    let mut columns = Vec::new();
    for &eps in epsilons {
        columns.push(col(format!("tail_witness[eps={eps}]"), Kind::Proportion, false));
        columns.push(col(format!("tail_count[eps={eps}]"), Kind::Proportion, false));
    }
    let d = params.d as f64;
    assemble(
        params,
        sizes,
        &columns,
        |r| {
            let g = params.torus(r)?;
            let v13 = (g.volume() as f64).cbrt();
            run_replicas(params.replicas, |i| {
                let cfg = params.config(&g, TAG_TAIL, r, i)?;
                let c = long_cycle_vertex_count(&g, &cfg, params.budget);
                if !c.is_clean() {
                    return Ok(None);
                }
                let mut out = Vec::new();
                for &eps in epsilons {
                    out.push((c.longest_witness > 0 && c.longest_witness as f64 >= v13 / eps) as u8 as f64);
                    out.push((c.count > 0 && c.count as f64 >= v13 / (2.0 * d * eps)) as u8 as f64);
                }
                Ok(Some(out))
            })
        },
        torus_volume(params.d),
    )
}

/// `τ_T(j e_1)` on the torus (averaged over translations), `τ_Z(j e_1)` on a
/// free-boundary box of radius `2r`, and `(τ_T − τ_Z)·V^{2/3}`, for `j = 0..⌊r/2⌋`.
pub fn est_two_point(params: &Params, sizes: &[u64]) -> Result<EstimateReport> {
    let max_j = sizes.iter().map(|&r| r / 2).min().unwrap_or(0);
    let mut columns = Vec::new();
    for j in 0..=max_j {
        columns.push(col(format!("tau_torus[x={j}]"), Kind::Proportion, false));
        columns.push(col(format!("tau_box[x={j}]"), Kind::Proportion, false));
        columns.push(col(format!("tau_gap_scaled[x={j}]"), Kind::Mean, false));
    }
    assemble(
        params,
        sizes,
        &columns,
        |r| {
            let g = params.torus(r)?;
            let bx = BoxGeometry::centered(params.d, 2 * r, params.model)?;
            let v = g.volume();
            let v23 = (v as f64).powf(2.0 / 3.0);
            run_replicas(params.replicas, |i| {
                let cfg = params.config(&g, TAG_TWO_POINT_TORUS, r, i)?;
                let comps = label_components(&*g, &cfg);
                let lazy = CounterStates::new(params.p, params.seed, stream_id(TAG_TWO_POINT_BOX, r as u32, i))?;
                let origin = bx.center_vertex();
                let cluster = component_of(&bx, &lazy, origin);
                let mut out = Vec::new();
                for j in 0..=max_j {
                    let mut shift = vec![0i64; params.d];
                    shift[0] = j as i64;
                    let same = (0..v).filter(|&y| comps.label[y] == comps.label[g.translate(VertexId(y), &shift).0]).count();
                    let tau_t = same as f64 / v as f64;
                    let mut point = vec![0i64; params.d];
                    point[0] = j as i64;
                    let target = bx.vertex_of(&point).expect("axis point inside the box");
                    let tau_z = cluster.vertices.contains(&target) as u8 as f64;
                    out.extend([tau_t, tau_z, (tau_t - tau_z) * v23]);
                }
                Ok(Some(out))
            })
        },
        torus_volume(params.d),
    )
}

/// `|{x ∈ ∂Q_n : 0 ↔ x inside Q_n}|` for each `n`; the `r` column holds `n`.
pub fn est_ball_boundary_sum(params: &Params, ns: &[u64]) -> Result<EstimateReport> {
    if ns.contains(&0) {
        return Err(Error::InvalidArgument("box radius must be at least 1".into()));
    }
    let columns = [col("ball_boundary_sum", Kind::Mean, false)];
    assemble(
        params,
        ns,
        &columns,
        |n| {
            let bx = BoxGeometry::centered(params.d, n, params.model)?;
            run_replicas(params.replicas, |i| {
                let lazy = CounterStates::new(params.p, params.seed, stream_id(TAG_BALL, n as u32, i))?;
                let cluster = component_of(&bx, &lazy, bx.center_vertex());
                Ok(Some(vec![cluster.vertices.iter().filter(|&&v| bx.is_boundary(v)).count() as f64]))
            })
        },
        |n| (2 * n + 1) as f64,
    )
}

/// `E|C(0)|` through `Σ_C |C|²/V`, and the same scaled by `V^{-1/3}`.
pub fn est_mean_cluster_size(params: &Params, sizes: &[u64]) -> Result<EstimateReport> {
    let columns = [col("mean_cluster_size", Kind::Mean, true), col("mean_cluster_size_scaled", Kind::Mean, false)];
    assemble(
        params,
        sizes,
        &columns,
        |r| {
            let g = params.torus(r)?;
            let v = g.volume() as f64;
            run_replicas(params.replicas, |i| {
                let cfg = params.config(&g, TAG_MEAN_SIZE, r, i)?;
                let comps = label_components(&*g, &cfg);
                let m = comps.sizes.iter().map(|&s| (s * s) as f64).sum::<f64>() / v;
                Ok(Some(vec![m, m / v.cbrt()]))
            })
        },
        torus_volume(params.d),
    )
}

/// `P(Y_δ = 0)` by the direct indicator and by the special-edge identity, on
/// the same configurations.
pub fn est_ydelta_zero(params: &Params, sizes: &[u64], delta: f64, reps: Representatives) -> Result<EstimateReport> {
    if sizes.is_empty() {
        return Err(Error::InvalidArgument("empty size list".into()));
    }
    let mut report = EstimateReport::default();
    let l = delta_label(delta);
    for &r in sizes {
        let g = params.torus(r)?;
        for (method, name) in [(Method::Direct, "p_y_delta_zero_direct"), (Method::SpecialEdge, "p_y_delta_zero_special")] {
            let s = estimate_p_ydelta_zero(&g, params.p, params.seed, params.replicas, delta, method, reps, params.budget)?;
            report.rows.push(summary_row(format!("{name}[delta={l}]"), params, r, &s, method == Method::Direct));
        }
    }
    Ok(report)
}

/// Outcome of one scaling band.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BandCheck {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn band(name: &str, passed: bool, detail: String) -> BandCheck {
    BandCheck { name: name.into(), passed, detail }
}

/// Ratio of the largest to the smallest value; infinite if any is non-positive.
pub fn spread(values: &[f64]) -> f64 {
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if values.is_empty() || !(lo > 0.0) {
        f64::INFINITY
    } else {
        hi / lo
    }
}

fn means<'a>(rows: impl Iterator<Item = &'a ReportRow>) -> Vec<f64> {
    rows.filter_map(|row| row.mean).collect()
}

/// Slope band on a fitted column.
pub fn check_slope(report: &EstimateReport, quantity: &str, target: f64, tol: f64) -> BandCheck {
    let slope = report.slope_row(quantity).and_then(|row| row.slope);
    match slope {
        Some(s) => band(quantity, (s - target).abs() <= tol, format!("slope {s:.4}, target {target:.4} ± {tol}")),
        None => band(quantity, false, "no slope (fewer than two sizes or a zero mean)".into()),
    }
}

/// Multiplicative band on the means of every row whose name starts with `prefix`.
pub fn check_spread(report: &EstimateReport, prefix: &str, factor: f64) -> BandCheck {
    let values = means(report.rows.iter().filter(|row| row.r.is_some() && row.quantity.starts_with(prefix)));
    let s = spread(&values);
    band(prefix, s <= factor, format!("max/min {s:.4} over {} rows, band {factor}", values.len()))
}

/// Every frequency row strictly inside `(lo, hi)` with a Wilson interval that
/// excludes 0 and 1.
pub fn check_open_interval(report: &EstimateReport, prefix: &str, lo: f64, hi: f64) -> BandCheck {
    let rows: Vec<&ReportRow> = report.rows.iter().filter(|row| row.r.is_some() && row.quantity.starts_with(prefix)).collect();
    let bad: Vec<String> = rows
        .iter()
        .filter(|row| {
            let m = row.mean.unwrap_or(f64::NAN);
            !(m > lo && m < hi && row.ci95_lo.unwrap_or(0.0) > 0.0 && row.ci95_hi.unwrap_or(1.0) < 1.0)
        })
        .map(|row| format!("{}@r={} mean {}", row.quantity, row.r.unwrap(), row.mean.unwrap_or(f64::NAN)))
        .collect();
    band(prefix, !rows.is_empty() && bad.is_empty(), if bad.is_empty() { format!("{} rows inside ({lo}, {hi})", rows.len()) } else { bad.join("; ") })
}

/// Largest discard fraction over the per-size rows.
pub fn discard_rate(report: &EstimateReport) -> f64 {
    report
        .rows
        .iter()
        .filter(|row| row.r.is_some())
        .map(|row| row.discarded as f64 / (row.replicas + row.discarded).max(1) as f64)
        .fold(0.0, f64::max)
}

/// The default bands of each quantity, keyed by CLI name.
pub fn default_bands(quantity: &str, report: &EstimateReport) -> Vec<BandCheck> {
    let mut out = match quantity {
        "vertex-long-cycle" => vec![check_slope(report, "long_cycle_vertices", 1.0 / 3.0, 0.2)],
        "mean-cluster-size" => vec![check_spread(report, "mean_cluster_size_scaled", 3.0)],
        "ydelta" => vec![check_open_interval(report, "p_y_delta_zero", 0.05, 0.999), check_spread(report, "delta_y_delta_mean", 5.0)],
        "ball-boundary-sum" => vec![check_spread(report, "ball_boundary_sum", 3.0)],
        "lck" => vec![check_spread(report, "lck_ratio", 10.0)],
        "two-point" => {
            let worst = means(report.rows.iter().filter(|row| row.r.is_some() && row.quantity == "tau_gap_scaled[x=2]")).into_iter().fold(f64::NEG_INFINITY, f64::max);
            vec![band("tau_gap_scaled[x=2]", worst <= 10.0, format!("largest scaled gap {worst:.4}, bound 10"))]
        }
        "long-cycle-tail" => vec![check_tail_monotone(report)],
        _ => Vec::new(),
    };
    let rate = discard_rate(report);
    out.push(band("discard_rate", rate < 0.1, format!("largest discard fraction {rate:.4}")));
    out
}

/// Count-based tail frequency non-increasing in `1/ε` at each size, up to three
/// standard errors.
fn check_tail_monotone(report: &EstimateReport) -> BandCheck {
    let mut by_size: BTreeMap<u64, Vec<(f64, f64, f64)>> = BTreeMap::new();
    for row in report.rows.iter().filter(|row| row.r.is_some() && row.quantity.starts_with("tail_count[eps=")) {
        let eps: f64 = row.quantity.trim_start_matches("tail_count[eps=").trim_end_matches(']').parse().unwrap_or(f64::NAN);
        by_size.entry(row.r.unwrap()).or_default().push((eps, row.mean.unwrap_or(0.0), row.stderr.unwrap_or(0.0)));
    }
    let mut bad = Vec::new();
    for (r, mut rows) in by_size {
        // descending ε is ascending 1/ε
        rows.sort_by(|a, b| b.0.total_cmp(&a.0));
        for w in rows.windows(2) {
            if w[1].1 > w[0].1 + 3.0 * (w[0].2.max(0.0) + w[1].2.max(0.0)) {
                bad.push(format!("r={r}: eps {} -> {}", w[0].0, w[1].0));
            }
        }
    }
    band("tail_count", bad.is_empty(), if bad.is_empty() { "non-increasing in 1/eps".into() } else { bad.join("; ") })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_laws() {
        let pts: Vec<(f64, f64)> = [10.0f64, 100.0, 1000.0].iter().map(|&v| (v, v * v)).collect();
        let f = loglog_slope(&pts).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-12 && f.stderr.abs() < 1e-6 && (f.r2 - 1.0).abs() < 1e-12);
        let pts: Vec<(f64, f64)> = [64.0f64, 125.0, 216.0].iter().map(|&v| (v, v.cbrt())).collect();
        assert!((loglog_slope(&pts).unwrap().slope - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn slope_errors() {
        assert!(loglog_slope(&[(2.0, 3.0)]).is_err());
        assert!(loglog_slope(&[(2.0, 3.0), (4.0, 0.0)]).is_err());
        assert!(loglog_slope(&[(2.0, 3.0), (2.0, 5.0)]).is_err());
    }

    #[test]
    fn noisy_cube_root() {
        let noise = [1.01, 0.99, 1.005];
        let pts: Vec<(f64, f64)> = [1e3f64, 1e4, 1e5].iter().zip(noise).map(|(&v, n)| (v, v.cbrt() * n)).collect();
        assert!((loglog_slope(&pts).unwrap().slope - 1.0 / 3.0).abs() < 0.05);
    }

    #[test]
    fn summaries() {
        let s = Summary::from_values(&[1.0, 2.0, 3.0, 4.0], 1);
        assert_eq!(s.mean, 2.5);
        assert!((s.stderr - (5.0f64 / 3.0).sqrt() / 2.0).abs() < 1e-12);
        assert_eq!((s.replicas, s.discarded), (4, 1));
        let s = Summary::from_options(&[Some(1.0), None, Some(1.0)]);
        assert_eq!((s.replicas, s.discarded, s.mean), (2, 1, 1.0));
        let (lo, hi) = wilson_interval(0.0, 100, Z95);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 0.05);
    }

    #[test]
    fn trivial_estimates() {
        let params = Params::nn(2, 0.0, 1, 8);
        let r = est_vertex_long_cycle(&params, &[4, 5]).unwrap();
        assert!(r.rows_of("long_cycle_vertices").all(|row| row.mean == Some(0.0)));
        let r = est_mean_cluster_size(&params, &[4]).unwrap();
        assert_eq!(r.row("mean_cluster_size", 4).unwrap().mean, Some(1.0));
        let full = Params::nn(2, 1.0, 1, 4);
        let r = est_mean_cluster_size(&full, &[4]).unwrap();
        assert_eq!(r.row("mean_cluster_size", 4).unwrap().mean, Some(16.0));
        let r = est_ball_boundary_sum(&Params::nn(3, 1.0, 1, 2), &[1]).unwrap();
        assert_eq!(r.row("ball_boundary_sum", 1).unwrap().mean, Some(26.0));
        let r = est_ydelta(&params, &[4], &[1.0]).unwrap();
        assert_eq!(r.row("p_y_delta_zero[delta=1]", 4).unwrap().mean, Some(1.0));
        let r = est_two_point(&params, &[4]).unwrap();
        assert_eq!(r.row("tau_torus[x=0]", 4).unwrap().mean, Some(1.0));
        assert_eq!(r.row("tau_box[x=0]", 4).unwrap().mean, Some(1.0));
        assert_eq!(r.row("tau_box[x=1]", 4).unwrap().mean, Some(0.0));
        assert!(est_vertex_long_cycle(&params, &[]).is_err());
    }

    #[test]
    fn lck_below_minimum_length_is_zero() {
        let params = Params::nn(2, 0.6, 3, 10);
        // on r=12 a long cycle needs at least 2⌊r/4⌋ = 6 edges
        let r = est_lck(&params, &[12], &[4, 5, 40], 4).unwrap();
        assert_eq!(r.row("p_lck[k=4]", 12).unwrap().mean, Some(0.0));
        assert_eq!(r.row("p_lck[k=5]", 12).unwrap().mean, Some(0.0));
    }

    #[test]
    fn csv_shape() {
        let params = Params::nn(2, 0.5, 1, 6);
        let r = est_mean_cluster_size(&params, &[4, 5, 6]).unwrap();
        let csv = r.to_csv(&[]);
        let lines: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(lines[0], CSV_HEADER);
        // two columns at three sizes plus one slope row
        assert_eq!(lines.len(), 1 + 7);
        assert!(lines.iter().all(|l| l.split(',').count() == 13));
        assert_eq!(r.to_jsonl().lines().count(), 7);
    }
}
