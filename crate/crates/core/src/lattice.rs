//! Graph substrate: the torus `{-⌊r/2⌋, …, ⌈r/2⌉-1}^d` with periodic adjacency and
//! finite boxes `Q_n(x) ⊂ Z^d`.
//!
//! Vertices are dense integer indices in mixed radix (axis 0 is the least
//! significant digit). An edge is identified by its base endpoint and one of the
//! "positive" direction offsets, `EdgeId = base * directions + dir`; the numeric
//! order of `EdgeId` is the fixed edge enumeration used by every exploration.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VertexId(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EdgeId(pub usize);

/// Upper bound on `(2L+1)^d` for spread-out neighborhoods.
const MAX_NEIGHBORHOOD: usize = 1 << 22;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EdgeModel {
    NearestNeighbor,
    /// Two vertices are adjacent when their sup-norm displacement is at most `range`.
    SpreadOut { range: u32 },
}

impl EdgeModel {
    /// Max sup-norm length of a single step.
    pub fn step_range(&self) -> u64 {
        match *self {
            EdgeModel::NearestNeighbor => 1,
            EdgeModel::SpreadOut { range } => range as u64,
        }
    }

    pub fn degree(&self, dim: usize) -> usize {
        match *self {
            EdgeModel::NearestNeighbor => 2 * dim,
            EdgeModel::SpreadOut { range } => (2 * range as usize + 1).pow(dim as u32) - 1,
        }
    }

    pub fn label(&self) -> String {
        match *self {
            EdgeModel::NearestNeighbor => "nn".to_string(),
            EdgeModel::SpreadOut { range } => format!("spread-out(L={range})"),
        }
    }

    /// Positive half of the neighborhood: offsets whose first nonzero coordinate is positive.
    fn positive_offsets(&self, dim: usize) -> Result<Vec<Offset>> {
        match *self {
            EdgeModel::NearestNeighbor => Ok((0..dim)
                .map(|axis| {
                    let mut full = vec![0; dim];
                    full[axis] = 1;
                    Offset::new(full)
                })
                .collect()),
            EdgeModel::SpreadOut { range } => {
                if range == 0 {
                    return Err(Error::InvalidArgument("spread-out range must be >= 1".into()));
                }
                let width = 2 * range as usize + 1;
                let total = width
                    .checked_pow(dim as u32)
                    .filter(|&t| t <= MAX_NEIGHBORHOOD)
                    .ok_or_else(|| Error::Overflow(format!("(2L+1)^d for L={range}, d={dim}")))?;
                let mut out = Vec::with_capacity(total / 2);
                let mut digits = vec![0usize; dim];
                for _ in 0..total {
                    let full: Vec<i64> = digits.iter().map(|&t| t as i64 - range as i64).collect();
                    if full.iter().find(|&&c| c != 0).is_some_and(|&c| c > 0) {
                        out.push(Offset::new(full));
                    }
                    for digit in digits.iter_mut() {
                        *digit += 1;
                        if *digit < width {
                            break;
                        }
                        *digit = 0;
                    }
                }
                Ok(out)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Offset {
    pub full: Vec<i64>,
    sparse: Vec<(usize, i64)>,
}

impl Offset {
    fn new(full: Vec<i64>) -> Self {
        let sparse = full.iter().enumerate().filter(|(_, &c)| c != 0).map(|(i, &c)| (i, c)).collect();
        Offset { full, sparse }
    }
}

/// Common interface of the torus and of lattice boxes.
pub trait Lattice: Send + Sync {
    fn dim(&self) -> usize;
    fn model(&self) -> EdgeModel;
    fn vertex_count(&self) -> usize;
    /// Exclusive upper bound of edge indices. Not every slot is an edge for boxes.
    fn edge_slots(&self) -> usize;
    fn is_edge(&self, e: EdgeId) -> bool;
    /// `(base, base + offset)`.
    fn endpoints(&self, e: EdgeId) -> (VertexId, VertexId);
    /// Calls `f(neighbor, edge)` for every incident edge in a fixed order.
    fn for_each_neighbor<F: FnMut(VertexId, EdgeId)>(&self, v: VertexId, f: F);
    fn point(&self, v: VertexId) -> Vec<i64>;
    fn directions(&self) -> &[Offset];

    fn direction_count(&self) -> usize {
        self.directions().len()
    }

    fn other_endpoint(&self, e: EdgeId, v: VertexId) -> VertexId {
        let (a, b) = self.endpoints(e);
        if a == v {
            b
        } else {
            a
        }
    }

    /// Signed lattice displacement of traversing `e` starting at `from`.
    fn displacement(&self, e: EdgeId, from: VertexId) -> Vec<i64> {
        let dir = &self.directions()[e.0 % self.direction_count()].full;
        if self.endpoints(e).0 == from {
            dir.clone()
        } else {
            dir.iter().map(|c| -c).collect()
        }
    }

    fn neighbors(&self, v: VertexId) -> Vec<(VertexId, EdgeId)> {
        let mut out = Vec::with_capacity(2 * self.direction_count());
        self.for_each_neighbor(v, |w, e| out.push((w, e)));
        out
    }
}

/// The torus `T_r^d` with `V = r^d` vertices.
#[derive(Clone, Debug)]
pub struct TorusGeometry {
    dim: usize,
    side: usize,
    model: EdgeModel,
    volume: usize,
    strides: Vec<usize>,
    dirs: Vec<Offset>,
}

impl TorusGeometry {
    pub fn new(dim: usize, side: u64, model: EdgeModel) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Dimension(dim));
        }
        if side < 3 {
            return Err(Error::Side(side));
        }
        if let EdgeModel::SpreadOut { range } = model {
            if 2 * range as u64 + 1 > side {
                return Err(Error::Range { range, side });
            }
        }
        let side_us = usize::try_from(side).map_err(|_| Error::Overflow(format!("side {side}")))?;
        let volume = side_us
            .checked_pow(dim as u32)
            .filter(|&v| v <= u32::MAX as usize)
            .ok_or_else(|| Error::Overflow(format!("{side}^{dim} vertices")))?;
        let dirs = model.positive_offsets(dim)?;
        volume
            .checked_mul(dirs.len())
            .ok_or_else(|| Error::Overflow(format!("edge count for {side}^{dim}")))?;
        let strides = (0..dim).map(|axis| side_us.pow(axis as u32)).collect();
        Ok(TorusGeometry { dim, side: side_us, model, volume, strides, dirs })
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn volume(&self) -> usize {
        self.volume
    }

    pub fn edge_count(&self) -> usize {
        self.volume * self.dirs.len()
    }

    pub fn degree(&self) -> usize {
        2 * self.dirs.len()
    }

    /// `⌊r/4⌋`, the sup-distance a long cycle must reach from each of its vertices.
    pub fn long_radius(&self) -> usize {
        self.side / 4
    }

    /// Lowest coordinate of the fundamental domain, `-⌊r/2⌋`.
    fn low(&self) -> i64 {
        -((self.side / 2) as i64)
    }

    #[inline]
    fn digit(&self, v: usize, axis: usize) -> usize {
        (v / self.strides[axis]) % self.side
    }

    #[inline]
    fn shift(&self, v: usize, offset: &Offset, sign: i64) -> usize {
        let r = self.side as i64;
        let mut out = v;
        for &(axis, delta) in &offset.sparse {
            let digit = self.digit(v, axis);
            let moved = (digit as i64 + sign * delta).rem_euclid(r) as usize;
            out = out - digit * self.strides[axis] + moved * self.strides[axis];
        }
        out
    }

    /// Maps any lattice point to its vertex in the fundamental domain.
    pub fn vertex_at(&self, point: &[i64]) -> VertexId {
        debug_assert_eq!(point.len(), self.dim);
        let r = self.side as i64;
        let low = self.low();
        VertexId(
            point
                .iter()
                .zip(&self.strides)
                .map(|(&c, &s)| (c - low).rem_euclid(r) as usize * s)
                .sum(),
        )
    }

    pub fn origin(&self) -> VertexId {
        self.vertex_at(&vec![0; self.dim])
    }

    /// Edge joining `u` and `w`, if they are adjacent.
    pub fn edge_between(&self, u: VertexId, w: VertexId) -> Option<EdgeId> {
        let mut found = None;
        self.for_each_neighbor(u, |x, e| {
            if x == w && found.is_none() {
                found = Some(e);
            }
        });
        found
    }

    /// Centered per-axis displacement from `x` to `y`, each in `{-⌊r/2⌋, …, ⌈r/2⌉-1}`.
    pub fn displacement_between(&self, x: VertexId, y: VertexId) -> Vec<i64> {
        let r = self.side as i64;
        let low = self.low();
        (0..self.dim)
            .map(|axis| {
                let diff = self.digit(y.0, axis) as i64 - self.digit(x.0, axis) as i64;
                (diff - low).rem_euclid(r) + low
            })
            .collect()
    }

    /// Sup-norm torus metric: minimum over `r`-translates.
    pub fn distance(&self, x: VertexId, y: VertexId) -> usize {
        (0..self.dim).map(|axis| self.axis_distance(x, y, axis)).max().unwrap_or(0)
    }

    pub fn distance_l1(&self, x: VertexId, y: VertexId) -> usize {
        (0..self.dim).map(|axis| self.axis_distance(x, y, axis)).sum()
    }

    #[inline]
    fn axis_distance(&self, x: VertexId, y: VertexId, axis: usize) -> usize {
        let a = self.digit(x.0, axis);
        let b = self.digit(y.0, axis);
        let diff = a.abs_diff(b);
        diff.min(self.side - diff)
    }

    /// Translates `v` by the lattice vector `t`.
    pub fn translate(&self, v: VertexId, t: &[i64]) -> VertexId {
        let mut p = self.point(v);
        for (c, d) in p.iter_mut().zip(t) {
            *c += d;
        }
        self.vertex_at(&p)
    }
}

impl Lattice for TorusGeometry {
    fn dim(&self) -> usize {
        self.dim
    }

    fn model(&self) -> EdgeModel {
        self.model
    }

    fn vertex_count(&self) -> usize {
        self.volume
    }

    fn edge_slots(&self) -> usize {
        self.edge_count()
    }

    fn is_edge(&self, e: EdgeId) -> bool {
        e.0 < self.edge_count()
    }

    #[inline]
    fn endpoints(&self, e: EdgeId) -> (VertexId, VertexId) {
        let n = self.dirs.len();
        let base = e.0 / n;
        (VertexId(base), VertexId(self.shift(base, &self.dirs[e.0 % n], 1)))
    }

    #[inline]
    fn for_each_neighbor<F: FnMut(VertexId, EdgeId)>(&self, v: VertexId, mut f: F) {
        let n = self.dirs.len();
        for (j, dir) in self.dirs.iter().enumerate() {
            let fwd = self.shift(v.0, dir, 1);
            f(VertexId(fwd), EdgeId(v.0 * n + j));
            let back = self.shift(v.0, dir, -1);
            f(VertexId(back), EdgeId(back * n + j));
        }
    }

    fn point(&self, v: VertexId) -> Vec<i64> {
        let low = self.low();
        (0..self.dim).map(|axis| self.digit(v.0, axis) as i64 + low).collect()
    }

    fn directions(&self) -> &[Offset] {
        &self.dirs
    }
}

/// `x ~_r y` iff `y = x + r z` for some integer vector `z`.
pub fn r_equivalent(x: &[i64], y: &[i64], r: u64) -> bool {
    x.len() == y.len() && x.iter().zip(y).all(|(a, b)| (a - b).rem_euclid(r as i64) == 0)
}

/// Representative of `x` in `{-⌊r/2⌋, …, ⌈r/2⌉-1}^d`.
pub fn canonical_rep(x: &[i64], r: u64) -> Vec<i64> {
    let r = r as i64;
    let low = -(r / 2);
    x.iter().map(|&c| (c - low).rem_euclid(r) + low).collect()
}

pub fn sup_norm(x: &[i64]) -> u64 {
    x.iter().map(|c| c.unsigned_abs()).max().unwrap_or(0)
}

/// The box `Q_n(x) = {y : |y - x| <= n}` in sup norm, with the edges of `Z^d`
/// (under the given model) that have both endpoints inside.
#[derive(Clone, Debug)]
pub struct BoxGeometry {
    center: Vec<i64>,
    radius: u64,
    model: EdgeModel,
    side: usize,
    volume: usize,
    strides: Vec<usize>,
    dirs: Vec<Offset>,
}

impl BoxGeometry {
    pub fn new(center: Vec<i64>, radius: u64, model: EdgeModel) -> Result<Self> {
        let dim = center.len();
        if dim == 0 {
            return Err(Error::Dimension(0));
        }
        let side = usize::try_from(2 * radius + 1).map_err(|_| Error::Overflow(format!("radius {radius}")))?;
        let volume = side
            .checked_pow(dim as u32)
            .ok_or_else(|| Error::Overflow(format!("({side})^{dim} box vertices")))?;
        let dirs = model.positive_offsets(dim)?;
        volume
            .checked_mul(dirs.len())
            .ok_or_else(|| Error::Overflow(format!("edge slots for ({side})^{dim}")))?;
        let strides = (0..dim).map(|axis| side.pow(axis as u32)).collect();
        Ok(BoxGeometry { center, radius, model, side, volume, strides, dirs })
    }

    pub fn centered(dim: usize, radius: u64, model: EdgeModel) -> Result<Self> {
        Self::new(vec![0; dim], radius, model)
    }

    pub fn center(&self) -> &[i64] {
        &self.center
    }

    pub fn radius(&self) -> u64 {
        self.radius
    }

    pub fn center_vertex(&self) -> VertexId {
        self.vertex_of(&self.center.clone()).expect("center lies in its box")
    }

    pub fn contains(&self, point: &[i64]) -> bool {
        point.iter().zip(&self.center).all(|(&c, &x)| (c - x).unsigned_abs() <= self.radius)
    }

    pub fn vertex_of(&self, point: &[i64]) -> Option<VertexId> {
        if point.len() != self.center.len() || !self.contains(point) {
            return None;
        }
        Some(VertexId(
            point
                .iter()
                .zip(&self.center)
                .zip(&self.strides)
                .map(|((&c, &x), &s)| (c - x + self.radius as i64) as usize * s)
                .sum(),
        ))
    }

    /// Sup distance from the center.
    pub fn norm_from_center(&self, v: VertexId) -> u64 {
        (0..self.center.len())
            .map(|axis| ((v.0 / self.strides[axis]) % self.side).abs_diff(self.radius as usize) as u64)
            .max()
            .unwrap_or(0)
    }

    /// `y ∈ ∂Q_n(x)`, i.e. `|y - x| = n`.
    pub fn is_boundary(&self, v: VertexId) -> bool {
        self.norm_from_center(v) == self.radius
    }

    #[inline]
    fn shift(&self, v: usize, offset: &Offset, sign: i64) -> Option<usize> {
        let mut out = v;
        for &(axis, delta) in &offset.sparse {
            let digit = (v / self.strides[axis]) % self.side;
            let moved = digit as i64 + sign * delta;
            if moved < 0 || moved >= self.side as i64 {
                return None;
            }
            out = out - digit * self.strides[axis] + moved as usize * self.strides[axis];
        }
        Some(out)
    }
}

impl Lattice for BoxGeometry {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn model(&self) -> EdgeModel {
        self.model
    }

    fn vertex_count(&self) -> usize {
        self.volume
    }

    fn edge_slots(&self) -> usize {
        self.volume * self.dirs.len()
    }

    fn is_edge(&self, e: EdgeId) -> bool {
        let n = self.dirs.len();
        e.0 < self.edge_slots() && self.shift(e.0 / n, &self.dirs[e.0 % n], 1).is_some()
    }

    fn endpoints(&self, e: EdgeId) -> (VertexId, VertexId) {
        let n = self.dirs.len();
        let base = e.0 / n;
        let tip = self.shift(base, &self.dirs[e.0 % n], 1).expect("edge slot inside the box");
        (VertexId(base), VertexId(tip))
    }

    fn for_each_neighbor<F: FnMut(VertexId, EdgeId)>(&self, v: VertexId, mut f: F) {
        let n = self.dirs.len();
        for (j, dir) in self.dirs.iter().enumerate() {
            if let Some(fwd) = self.shift(v.0, dir, 1) {
                f(VertexId(fwd), EdgeId(v.0 * n + j));
            }
            if let Some(back) = self.shift(v.0, dir, -1) {
                f(VertexId(back), EdgeId(back * n + j));
            }
        }
    }

    fn point(&self, v: VertexId) -> Vec<i64> {
        (0..self.center.len())
            .map(|axis| {
                ((v.0 / self.strides[axis]) % self.side) as i64 - self.radius as i64 + self.center[axis]
            })
            .collect()
    }

    fn directions(&self) -> &[Offset] {
        &self.dirs
    }
}

/// Materialized adjacency of a box.
#[derive(Clone, Debug)]
pub struct BoxGraph {
    pub vertex_count: usize,
    pub edges: Vec<EdgeId>,
    pub boundary: Vec<VertexId>,
}

/// Boxes larger than this are handled lazily through [`Lattice`] instead.
const MAX_MATERIALIZED_BOX: usize = 1 << 24;

pub fn box_graph(b: &BoxGeometry) -> Result<BoxGraph> {
    if b.vertex_count() > MAX_MATERIALIZED_BOX {
        return Err(Error::Overflow(format!("box with {} vertices is too large to materialize", b.vertex_count())));
    }
    let edges = (0..b.edge_slots()).map(EdgeId).filter(|&e| b.is_edge(e)).collect();
    let boundary = (0..b.vertex_count()).map(VertexId).filter(|&v| b.is_boundary(v)).collect();
    Ok(BoxGraph { vertex_count: b.vertex_count(), edges, boundary })
}
