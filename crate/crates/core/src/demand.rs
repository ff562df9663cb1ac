//! Passenger and goods requests: synthetic workloads, trip-file replay, and
//! a historical-average demand forecaster.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;
use rand::distr::weighted::WeightedIndex;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::city::{Point, SimClock, ZoneGrid, ZoneId};
use crate::error::{Error, Result};
use crate::rng::{self, StreamRng};

/// Five miles.
pub const DEFAULT_DELIVERY_RADIUS_KM: f64 = 8.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RequestId(pub u64);

impl fmt::Display for RequestId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "r{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RequestKind {
    Passenger,
    Goods,
}

impl RequestKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RequestKind::Passenger => "passenger",
            RequestKind::Goods => "goods",
        }
    }
}

impl std::str::FromStr for RequestKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim() {
            "passenger" => Ok(RequestKind::Passenger),
            "goods" => Ok(RequestKind::Goods),
            other => Err(format!("unknown request kind `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Lifecycle {
    Pending,
    Assigned,
    Onboard,
    AtHopZone,
    Delivered,
    Rejected,
}

/// A passenger trip or a package delivery. Goods in multi-hop transit keep
/// their id and final destination; `current` tracks where the next leg starts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Request {
    pub id: RequestId,
    pub kind: RequestKind,
    pub size: u32,
    /// Minutes since simulation start; preserved across re-queues and hops.
    pub request_time: f64,
    pub origin_point: Point,
    pub destination_point: Point,
    pub origin: ZoneId,
    pub destination: ZoneId,
    pub current: ZoneId,
    pub lifecycle: Lifecycle,
    pub hop_count: u32,
    /// Set once the request has been committed to a vehicle route.
    pub accepted: bool,
}

impl Request {
    pub fn new(
        id: RequestId,
        kind: RequestKind,
        size: u32,
        request_time: f64,
        origin_point: Point,
        destination_point: Point,
        grid: &ZoneGrid,
    ) -> Result<Self> {
        if size == 0 {
            return Err(Error::Config(format!("request {id} has size 0")));
        }
        if origin_point == destination_point {
            return Err(Error::Config(format!(
                "request {id} has identical origin and destination"
            )));
        }
        let origin = grid.zone_of(origin_point)?;
        let destination = grid.zone_of(destination_point)?;
        Ok(Self {
            id,
            kind,
            size,
            request_time,
            origin_point,
            destination_point,
            origin,
            destination,
            current: origin,
            lifecycle: Lifecycle::Pending,
            hop_count: 0,
            accepted: false,
        })
    }

    pub fn is_goods(&self) -> bool {
        self.kind == RequestKind::Goods
    }

    /// Whether this request is a later leg of a multi-hop delivery.
    pub fn in_transit(&self) -> bool {
        self.hop_count > 0
    }

    pub fn commit(&mut self) {
        debug_assert_eq!(self.lifecycle, Lifecycle::Pending);
        self.lifecycle = Lifecycle::Assigned;
        self.accepted = true;
    }

    pub fn board(&mut self) {
        debug_assert_eq!(self.lifecycle, Lifecycle::Assigned);
        self.lifecycle = Lifecycle::Onboard;
    }

    pub fn deliver(&mut self) {
        debug_assert_eq!(self.lifecycle, Lifecycle::Onboard);
        self.lifecycle = Lifecycle::Delivered;
        self.current = self.destination;
    }

    /// Drop at a hop-zone; the request becomes a fresh pending leg from there.
    pub fn stage_at(&mut self, hop: ZoneId) {
        debug_assert_eq!(self.lifecycle, Lifecycle::Onboard);
        self.lifecycle = Lifecycle::AtHopZone;
        self.current = hop;
        self.hop_count += 1;
        self.lifecycle = Lifecycle::Pending;
    }

    pub fn reject(&mut self) {
        debug_assert_eq!(self.lifecycle, Lifecycle::Pending);
        self.lifecycle = Lifecycle::Rejected;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceLocation {
    pub zone: ZoneId,
    /// Mean request count per hour (Poisson).
    pub rate_per_hour: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoodsWorkloadConfig {
    pub locations: Vec<ServiceLocation>,
    pub radius_km: f64,
    pub days: u32,
    pub seed: u64,
    /// Relative weights for package counts 1, 2, ...
    pub size_weights: Vec<f64>,
}

impl GoodsWorkloadConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.radius_km > 0.0) {
            return Err(Error::Config(format!(
                "goods delivery radius must be positive, got {}",
                self.radius_km
            )));
        }
        if self.locations.iter().any(|l| !(l.rate_per_hour >= 0.0)) {
            return Err(Error::Config("goods rates must be non-negative".into()));
        }
        validate_weights("goods size_weights", &self.size_weights)
    }
}

fn validate_weights(name: &str, w: &[f64]) -> Result<()> {
    if w.is_empty() || w.iter().any(|x| !(*x >= 0.0)) || w.iter().sum::<f64>() <= 0.0 {
        return Err(Error::Config(format!(
            "{name} must be non-empty, non-negative and not all zero"
        )));
    }
    Ok(())
}

fn poisson_draw(rng: &mut StreamRng, mean: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).map(|p| p.sample(rng) as u64).unwrap_or(0)
}

fn sample_in_disk(rng: &mut StreamRng, center: Point, radius: f64) -> Point {
    let r = radius * rng.random::<f64>().sqrt();
    let theta = std::f64::consts::TAU * rng.random::<f64>();
    Point::new(center.x + r * theta.cos(), center.y + r * theta.sin())
}

fn sample_in_cell(rng: &mut StreamRng, grid: &ZoneGrid, zone: ZoneId) -> Point {
    let c = grid.center(zone);
    let half = grid.cell_size() / 2.0;
    // Open interval keeps the point strictly inside the cell.
    let dx = rng.random_range(-0.999..0.999) * half;
    let dy = rng.random_range(-0.999..0.999) * half;
    Point::new(c.x + dx, c.y + dy)
}

const MAX_PLACEMENT_TRIES: usize = 256;

/// Poisson package orders at each service location; drop-offs are uniform
/// over the delivery disk, clipped to the grid and to a different zone.
pub fn generate_goods_requests(
    config: &GoodsWorkloadConfig,
    clock: &SimClock,
    grid: &ZoneGrid,
    first_id: u64,
) -> Result<Vec<Request>> {
    config.validate()?;
    let mut rng = rng::stream(config.seed, rng::GOODS);
    let sizes = WeightedIndex::new(&config.size_weights)
        .map_err(|e| Error::Config(format!("goods size_weights: {e}")))?;
    let steps = (config.days as u64 * clock.steps_per_day()).min(clock.total_steps);
    let mut out = Vec::new();
    let mut next_id = first_id;
    for step in 0..steps {
        let t = clock.time_of(step);
        for loc in &config.locations {
            let n = poisson_draw(&mut rng, loc.rate_per_hour * clock.dt_min / 60.0);
            let origin = grid.center(loc.zone);
            for _ in 0..n {
                let size = sizes.sample(&mut rng) as u32 + 1;
                let mut dest = None;
                for _ in 0..MAX_PLACEMENT_TRIES {
                    let p = sample_in_disk(&mut rng, origin, config.radius_km);
                    if grid.contains(p) && grid.zone_of(p)? != loc.zone {
                        dest = Some(p);
                        break;
                    }
                }
                let Some(dest) = dest else { continue };
                out.push(Request::new(
                    RequestId(next_id),
                    RequestKind::Goods,
                    size,
                    t,
                    origin,
                    dest,
                    grid,
                )?);
                next_id += 1;
            }
        }
    }
    Ok(out)
}

/// Synthetic passenger trips: a city-wide Poisson arrival rate spread over
/// zones by Gaussian hotspot weights, modulated by an hour-of-day profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PassengerWorkloadConfig {
    pub rate_per_hour: f64,
    pub hotspots: u32,
    pub hotspot_sigma_km: f64,
    /// Weight every zone receives in addition to the hotspot bumps.
    pub background_weight: f64,
    /// 24 multipliers, one per hour of the day.
    pub hourly_profile: Vec<f64>,
    pub size_weights: Vec<f64>,
}

impl Default for PassengerWorkloadConfig {
    fn default() -> Self {
        Self {
            rate_per_hour: 100.0,
            hotspots: 3,
            hotspot_sigma_km: 1.5,
            background_weight: 0.05,
            hourly_profile: default_hourly_profile(),
            size_weights: vec![0.7, 0.2, 0.1],
        }
    }
}

pub fn default_hourly_profile() -> Vec<f64> {
    vec![
        0.3, 0.2, 0.15, 0.15, 0.2, 0.4, 0.7, 1.1, 1.4, 1.2, 1.0, 1.0, //
        1.1, 1.0, 1.0, 1.1, 1.3, 1.5, 1.4, 1.2, 1.0, 0.9, 0.7, 0.5,
    ]
}

impl PassengerWorkloadConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rate_per_hour >= 0.0) {
            return Err(Error::Config("passenger rate must be non-negative".into()));
        }
        if self.hourly_profile.len() != 24 || self.hourly_profile.iter().any(|m| !(*m >= 0.0)) {
            return Err(Error::Config(
                "hourly_profile needs 24 non-negative multipliers".into(),
            ));
        }
        if !(self.hotspot_sigma_km > 0.0) || !(self.background_weight >= 0.0) {
            return Err(Error::Config("invalid hotspot shape".into()));
        }
        validate_weights("passenger size_weights", &self.size_weights)
    }

    /// Relative attractiveness of every zone (origins and destinations).
    pub fn zone_weights(&self, grid: &ZoneGrid, seed: u64) -> Vec<f64> {
        let mut rng = rng::stream(seed, "hotspots");
        let (w, h) = grid.extent();
        let centers: Vec<Point> = (0..self.hotspots)
            .map(|_| Point::new(rng.random_range(0.15..0.85) * w, rng.random_range(0.15..0.85) * h))
            .collect();
        grid.zones()
            .map(|z| {
                let c = grid.center(z);
                let bump: f64 = centers
                    .iter()
                    .map(|hc| {
                        let d2 = (c.x - hc.x).powi(2) + (c.y - hc.y).powi(2);
                        (-d2 / (2.0 * self.hotspot_sigma_km.powi(2))).exp()
                    })
                    .sum();
                self.background_weight + bump
            })
            .collect()
    }
}

pub fn generate_passenger_requests(
    config: &PassengerWorkloadConfig,
    clock: &SimClock,
    grid: &ZoneGrid,
    seed: u64,
    days: u32,
    first_id: u64,
) -> Result<Vec<Request>> {
    config.validate()?;
    if grid.zone_count() < 2 || config.rate_per_hour == 0.0 {
        return Ok(Vec::new());
    }
    let weights = config.zone_weights(grid, seed);
    let zones = WeightedIndex::new(&weights).map_err(|e| Error::Config(format!("zone weights: {e}")))?;
    let sizes = WeightedIndex::new(&config.size_weights)
        .map_err(|e| Error::Config(format!("passenger size_weights: {e}")))?;
    let mut rng = rng::stream(seed, rng::DEMAND);
    let steps = (days as u64 * clock.steps_per_day()).min(clock.total_steps);
    let mut out = Vec::new();
    let mut next_id = first_id;
    for step in 0..steps {
        let t = clock.time_of(step);
        let hour = ((t / 60.0).floor() as i64).rem_euclid(24) as usize;
        let mean = config.rate_per_hour * config.hourly_profile[hour] * clock.dt_min / 60.0;
        for _ in 0..poisson_draw(&mut rng, mean) {
            let o = ZoneId(zones.sample(&mut rng) as u32);
            let mut d = o;
            while d == o {
                d = ZoneId(zones.sample(&mut rng) as u32);
            }
            let size = sizes.sample(&mut rng) as u32 + 1;
            let op = sample_in_cell(&mut rng, grid, o);
            let dp = sample_in_cell(&mut rng, grid, d);
            out.push(Request::new(
                RequestId(next_id),
                RequestKind::Passenger,
                size,
                t,
                op,
                dp,
                grid,
            )?);
            next_id += 1;
        }
    }
    Ok(out)
}

pub const REQUEST_CSV_HEADER: [&str; 7] = [
    "time_min", "kind", "size", "origin_x", "origin_y", "dest_x", "dest_y",
];

#[derive(Debug, Deserialize, Serialize)]
struct RequestRow {
    time_min: f64,
    kind: String,
    size: u32,
    origin_x: f64,
    origin_y: f64,
    dest_x: f64,
    dest_y: f64,
}

/// Parse a request CSV; rows come back sorted by request time (stable).
pub fn read_requests<R: Read>(
    reader: R,
    path: &Path,
    grid: &ZoneGrid,
    first_id: u64,
) -> Result<Vec<Request>> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .clone();
    if headers.iter().ne(REQUEST_CSV_HEADER.iter().copied()) {
        return Err(parse_err(
            1,
            format!("expected header `{}`", REQUEST_CSV_HEADER.join(",")),
        ));
    }
    let mut out = Vec::new();
    for (i, row) in rdr.deserialize::<RequestRow>().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| parse_err(line, e.to_string()))?;
        if !row.time_min.is_finite() || row.time_min < 0.0 {
            return Err(parse_err(line, format!("bad time_min {}", row.time_min)));
        }
        let kind = row.kind.parse().map_err(|e| parse_err(line, e))?;
        let req = Request::new(
            RequestId(first_id + out.len() as u64),
            kind,
            row.size,
            row.time_min,
            Point::new(row.origin_x, row.origin_y),
            Point::new(row.dest_x, row.dest_y),
            grid,
        )
        .map_err(|e| parse_err(line, e.to_string()))?;
        out.push(req);
    }
    out.sort_by(|a, b| a.request_time.total_cmp(&b.request_time));
    // Ids follow the sorted order so that id order agrees with time order.
    for (i, r) in out.iter_mut().enumerate() {
        r.id = RequestId(first_id + i as u64);
    }
    Ok(out)
}

pub fn load_requests(path: &Path, grid: &ZoneGrid, first_id: u64) -> Result<Vec<Request>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_requests(file, path, grid, first_id)
}

pub fn write_requests<W: Write>(out: W, requests: &[Request]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Config(format!("writing requests: {e}"));
    for r in requests {
        w.serialize(RequestRow {
            time_min: r.request_time,
            kind: r.kind.as_str().to_string(),
            size: r.size,
            origin_x: r.origin_point.x,
            origin_y: r.origin_point.y,
            dest_x: r.destination_point.x,
            dest_y: r.destination_point.y,
        })
        .map_err(io)?;
    }
    if requests.is_empty() {
        w.write_record(REQUEST_CSV_HEADER).map_err(io)?;
    }
    w.flush().map_err(|e| Error::Config(format!("writing requests: {e}")))?;
    Ok(())
}

/// Per-zone request counts by slot of day, one row per completed day.
#[derive(Debug, Clone, PartialEq)]
pub struct DemandHistory {
    zones: usize,
    slots_per_day: usize,
    days: Vec<Vec<u32>>,
    today: Vec<u32>,
}

impl DemandHistory {
    pub fn new(zones: usize, slots_per_day: usize) -> Self {
        Self {
            zones,
            slots_per_day: slots_per_day.max(1),
            days: Vec::new(),
            today: vec![0; zones * slots_per_day.max(1)],
        }
    }

    pub fn zones(&self) -> usize {
        self.zones
    }

    pub fn slots_per_day(&self) -> usize {
        self.slots_per_day
    }

    pub fn completed_days(&self) -> usize {
        self.days.len()
    }

    pub fn record(&mut self, slot_of_day: usize, zone: ZoneId, count: u32) {
        let idx = (slot_of_day % self.slots_per_day) * self.zones + zone.index();
        self.today[idx] += count;
    }

    pub fn close_day(&mut self) {
        let fresh = vec![0; self.today.len()];
        self.days.push(std::mem::replace(&mut self.today, fresh));
    }

    /// Add a completed day directly.
    pub fn push_day(&mut self, counts: Vec<u32>) {
        assert_eq!(counts.len(), self.zones * self.slots_per_day);
        self.days.push(counts);
    }

    pub fn day(&self, d: usize) -> &[u32] {
        &self.days[d]
    }
}

/// Expected request counts, `horizon` slots by `zones`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandForecast {
    horizon: usize,
    zones: usize,
    values: Vec<f64>,
}

impl DemandForecast {
    pub fn zeros(horizon: usize, zones: usize) -> Self {
        Self {
            horizon,
            zones,
            values: vec![0.0; horizon * zones],
        }
    }

    pub fn from_values(horizon: usize, zones: usize, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), horizon * zones);
        Self {
            horizon,
            zones,
            values,
        }
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn zones(&self) -> usize {
        self.zones
    }

    pub fn get(&self, k: usize, zone: ZoneId) -> f64 {
        self.values[k * self.zones + zone.index()]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn zone_total(&self, zone: ZoneId) -> f64 {
        (0..self.horizon).map(|k| self.get(k, zone)).sum()
    }
}

/// Forecast for slot `slot + k` = mean count at the same slot-of-day over
/// every completed day in `history`. Zero without history.
pub fn predict_demand(history: &DemandHistory, slot: u64, horizon: usize) -> DemandForecast {
    let mut fc = DemandForecast::zeros(horizon, history.zones);
    let days = history.days.len();
    if days == 0 {
        return fc;
    }
    for k in 0..horizon {
        let sod = ((slot + k as u64) % history.slots_per_day as u64) as usize;
        let base = sod * history.zones;
        for z in 0..history.zones {
            let total: u64 = history.days.iter().map(|d| u64::from(d[base + z])).sum();
            fc.values[k * history.zones + z] = total as f64 / days as f64;
        }
    }
    fc
}
