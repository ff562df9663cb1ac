//! Synthetic city: a rectangular zone grid with a weighted road graph whose
//! nodes are the zone centers.
//!
//! Zone ids are row-major and zero-based: `id = row * width + col`, where
//! `col` runs along x and `row` along y. A point lying exactly on a shared
//! cell edge belongs to the zone with the smaller id.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;
use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ZoneId(pub u32);

impl ZoneId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for ZoneId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "z{}", self.0)
    }
}

/// A position in the city plane, in km from the south-west corner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn euclidean(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Connectivity {
    #[default]
    Four,
    Eight,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub width: u32,
    pub height: u32,
    pub cell_size_km: f64,
    pub connectivity: Connectivity,
    /// Edge weights are drawn uniformly from
    /// `[length, length * (1 + weight_jitter)]`; zero keeps the exact lattice.
    pub weight_jitter: f64,
    pub seed: u64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            width: 10,
            height: 10,
            cell_size_km: 1.0,
            connectivity: Connectivity::Four,
            weight_jitter: 0.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZoneGrid {
    width: u32,
    height: u32,
    cell_size: f64,
}

impl ZoneGrid {
    pub fn new(width: u32, height: u32, cell_size: f64) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidGrid(format!(
                "dimensions must be at least 1x1, got {width}x{height}"
            )));
        }
        if !(cell_size.is_finite() && cell_size > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "cell size must be positive, got {cell_size}"
            )));
        }
        Ok(Self {
            width,
            height,
            cell_size,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn zone_count(&self) -> usize {
        (self.width * self.height) as usize
    }

    pub fn zones(&self) -> impl Iterator<Item = ZoneId> {
        (0..self.width * self.height).map(ZoneId)
    }

    pub fn extent(&self) -> (f64, f64) {
        (
            f64::from(self.width) * self.cell_size,
            f64::from(self.height) * self.cell_size,
        )
    }

    pub fn contains(&self, p: Point) -> bool {
        let (w, h) = self.extent();
        p.x.is_finite() && p.y.is_finite() && (0.0..=w).contains(&p.x) && (0.0..=h).contains(&p.y)
    }

    /// (col, row) of a zone.
    pub fn cell(&self, zone: ZoneId) -> (u32, u32) {
        (zone.0 % self.width, zone.0 / self.width)
    }

    pub fn zone_at(&self, col: u32, row: u32) -> Option<ZoneId> {
        (col < self.width && row < self.height).then(|| ZoneId(row * self.width + col))
    }

    pub fn center(&self, zone: ZoneId) -> Point {
        let (col, row) = self.cell(zone);
        Point::new(
            (f64::from(col) + 0.5) * self.cell_size,
            (f64::from(row) + 0.5) * self.cell_size,
        )
    }

    pub fn zone_of(&self, p: Point) -> Result<ZoneId> {
        if !self.contains(p) {
            return Err(Error::OutOfBounds { x: p.x, y: p.y });
        }
        let col = Self::axis_index(p.x, self.cell_size, self.width);
        let row = Self::axis_index(p.y, self.cell_size, self.height);
        Ok(ZoneId(row * self.width + col))
    }

    // Edges go to the lower index, which is also the lower zone id.
    fn axis_index(v: f64, cell: f64, count: u32) -> u32 {
        if v <= 0.0 {
            return 0;
        }
        let idx = (v / cell).ceil() as i64 - 1;
        idx.clamp(0, i64::from(count) - 1) as u32
    }

    /// Chebyshev distance between two zones in cells.
    pub fn cell_distance(&self, a: ZoneId, b: ZoneId) -> u32 {
        let (ac, ar) = self.cell(a);
        let (bc, br) = self.cell(b);
        ac.abs_diff(bc).max(ar.abs_diff(br))
    }
}

/// Discrete simulation time: `steps` increments of `dt_min` starting at `t0_min`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimClock {
    pub t0_min: f64,
    pub dt_min: f64,
    pub total_steps: u64,
    step: u64,
}

impl SimClock {
    pub fn new(t0_min: f64, dt_min: f64, total_steps: u64) -> Result<Self> {
        if !(dt_min > 0.0) || !dt_min.is_finite() {
            return Err(Error::Config(format!("step length must be positive, got {dt_min}")));
        }
        Ok(Self {
            t0_min,
            dt_min,
            total_steps,
            step: 0,
        })
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn now(&self) -> f64 {
        self.time_of(self.step)
    }

    pub fn time_of(&self, step: u64) -> f64 {
        self.t0_min + step as f64 * self.dt_min
    }

    pub fn is_finished(&self) -> bool {
        self.step >= self.total_steps
    }

    /// Advance one step; saturates at `total_steps`.
    pub fn advance(&mut self) {
        if self.step < self.total_steps {
            self.step += 1;
        }
    }

    pub fn steps_per_day(&self) -> u64 {
        ((24.0 * 60.0) / self.dt_min).round().max(1.0) as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub src: ZoneId,
    pub dst: ZoneId,
    pub weight_km: f64,
}

/// Directed weighted road graph with precomputed all-pairs shortest
/// distances and next-hop table.
#[derive(Debug, Clone)]
pub struct RoadGraph {
    nodes: usize,
    edges: Vec<Edge>,
    dist: Vec<f64>,
    next: Vec<u32>,
}

#[derive(Copy, Clone, PartialEq)]
struct HeapEntry {
    dist: f64,
    node: u32,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl RoadGraph {
    pub fn from_edges(nodes: usize, edges: Vec<Edge>) -> Result<Self> {
        if nodes == 0 {
            return Err(Error::InvalidGrid("graph has no nodes".into()));
        }
        let mut incoming: Vec<Vec<(u32, f64)>> = vec![Vec::new(); nodes];
        for e in &edges {
            if e.src.index() >= nodes {
                return Err(Error::UnknownLocation(e.src.0));
            }
            if e.dst.index() >= nodes {
                return Err(Error::UnknownLocation(e.dst.0));
            }
            if !(e.weight_km.is_finite() && e.weight_km > 0.0) {
                return Err(Error::InvalidGrid(format!(
                    "edge {} -> {} has non-positive weight {}",
                    e.src, e.dst, e.weight_km
                )));
            }
            incoming[e.dst.index()].push((e.src.0, e.weight_km));
        }

        let mut dist = vec![f64::INFINITY; nodes * nodes];
        let mut next = vec![u32::MAX; nodes * nodes];
        let mut heap = BinaryHeap::new();
        // Dijkstra toward each target over reversed edges; the node a path
        // was relaxed from is the next hop on the way to the target.
        let mut to_target = vec![f64::INFINITY; nodes];
        let mut succ = vec![u32::MAX; nodes];
        for target in 0..nodes {
            to_target.fill(f64::INFINITY);
            succ.fill(u32::MAX);
            to_target[target] = 0.0;
            succ[target] = target as u32;
            heap.push(HeapEntry {
                dist: 0.0,
                node: target as u32,
            });
            while let Some(HeapEntry { dist: d, node }) = heap.pop() {
                if d > to_target[node as usize] {
                    continue;
                }
                for &(from, w) in &incoming[node as usize] {
                    let nd = d + w;
                    let slot = &mut to_target[from as usize];
                    if nd < *slot {
                        *slot = nd;
                        succ[from as usize] = node;
                        heap.push(HeapEntry { dist: nd, node: from });
                    }
                }
            }
            for src in 0..nodes {
                if !to_target[src].is_finite() {
                    return Err(Error::Disconnected);
                }
                dist[src * nodes + target] = to_target[src];
                next[src * nodes + target] = succ[src];
            }
        }

        Ok(Self {
            nodes,
            edges,
            dist,
            next,
        })
    }

    pub fn node_count(&self) -> usize {
        self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    fn check(&self, z: ZoneId) -> Result<()> {
        if z.index() < self.nodes {
            Ok(())
        } else {
            Err(Error::UnknownLocation(z.0))
        }
    }

    /// Shortest distance in km. Panics on ids outside the graph; use
    /// [`RoadGraph::try_distance`] for unchecked input.
    #[inline]
    pub fn distance(&self, a: ZoneId, b: ZoneId) -> f64 {
        self.dist[a.index() * self.nodes + b.index()]
    }

    pub fn try_distance(&self, a: ZoneId, b: ZoneId) -> Result<f64> {
        self.check(a)?;
        self.check(b)?;
        Ok(self.distance(a, b))
    }

    /// First node after `from` on a shortest path to `to` (`from` itself when equal).
    #[inline]
    pub fn next_hop(&self, from: ZoneId, to: ZoneId) -> ZoneId {
        ZoneId(self.next[from.index() * self.nodes + to.index()])
    }

    /// Sum of shortest distances between consecutive stops.
    pub fn path_weight(&self, stops: &[ZoneId]) -> Result<f64> {
        for &s in stops {
            self.check(s)?;
        }
        Ok(stops.windows(2).map(|w| self.distance(w[0], w[1])).sum())
    }

    /// Travel time in minutes at `speed_km_per_min`.
    pub fn eta(&self, a: ZoneId, b: ZoneId, speed_km_per_min: f64) -> Result<f64> {
        if !(speed_km_per_min > 0.0) || !speed_km_per_min.is_finite() {
            return Err(Error::NonPositiveSpeed(speed_km_per_min));
        }
        Ok(self.try_distance(a, b)? / speed_km_per_min)
    }

    /// One `src dst weight_km` triple per line.
    pub fn write_edge_list<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for e in &self.edges {
            writeln!(out, "{} {} {}", e.src.0, e.dst.0, e.weight_km)?;
        }
        Ok(())
    }
}

/// Build the zone grid and its road graph. Each lattice neighbor pair gets one
/// undirected road (two directed edges of equal weight).
pub fn build_grid(config: &GridConfig) -> Result<(ZoneGrid, RoadGraph)> {
    let grid = ZoneGrid::new(config.width, config.height, config.cell_size_km)?;
    if !(config.weight_jitter >= 0.0) || !config.weight_jitter.is_finite() {
        return Err(Error::InvalidGrid(format!(
            "weight jitter must be non-negative, got {}",
            config.weight_jitter
        )));
    }
    let mut rng = rng::stream(config.seed, rng::GRAPH);
    let offsets: &[(i64, i64)] = match config.connectivity {
        Connectivity::Four => &[(1, 0), (0, 1)],
        Connectivity::Eight => &[(1, 0), (0, 1), (1, 1), (-1, 1)],
    };
    let mut edges = Vec::new();
    for zone in grid.zones() {
        let (col, row) = grid.cell(zone);
        for &(dc, dr) in offsets {
            let (c, r) = (i64::from(col) + dc, i64::from(row) + dr);
            if c < 0 || r < 0 {
                continue;
            }
            let Some(other) = grid.zone_at(c as u32, r as u32) else {
                continue;
            };
            let base = config.cell_size_km * ((dc * dc + dr * dr) as f64).sqrt();
            let weight = if config.weight_jitter > 0.0 {
                base * (1.0 + rng.random_range(0.0..=config.weight_jitter))
            } else {
                base
            };
            edges.push(Edge {
                src: zone,
                dst: other,
                weight_km: weight,
            });
            edges.push(Edge {
                src: other,
                dst: zone,
                weight_km: weight,
            });
        }
    }
    let graph = RoadGraph::from_edges(grid.zone_count(), edges)?;
    Ok((grid, graph))
}
