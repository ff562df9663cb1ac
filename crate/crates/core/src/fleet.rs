//! Vehicles, their typed capacities, the fleet snapshot and supply projection.

use std::fmt;

use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};

use crate::city::{RoadGraph, ZoneGrid, ZoneId};
use crate::demand::{RequestId, RequestKind};
use crate::error::{Error, Result};
use crate::rng;
use crate::routing::{Carrier, RoutePlan, StopAction};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VehicleId(pub u32);

impl fmt::Display for VehicleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VehicleType {
    Hatchback,
    Sedan,
    Van,
    Luxury,
}

impl VehicleType {
    /// Ordinal used as the vehicle-type term in passenger utility.
    pub fn ordinal(self) -> u32 {
        match self {
            VehicleType::Hatchback => 1,
            VehicleType::Sedan => 2,
            VehicleType::Van => 3,
            VehicleType::Luxury => 4,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            VehicleType::Hatchback => "hatchback",
            VehicleType::Sedan => "sedan",
            VehicleType::Van => "van",
            VehicleType::Luxury => "luxury",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleTypeSpec {
    pub kind: VehicleType,
    pub seats: u32,
    pub trunk: u32,
    /// Base fare per trip.
    pub base_price: f64,
    /// km per fuel unit.
    pub mileage_km: f64,
    /// Dimensionless surge coefficient applied to the destination rank.
    pub surge: f64,
    /// Relative share of the fleet.
    pub share: f64,
}

pub fn default_vehicle_types() -> Vec<VehicleTypeSpec> {
    let spec = |kind, seats, trunk, base_price, mileage_km| VehicleTypeSpec {
        kind,
        seats,
        trunk,
        base_price,
        mileage_km,
        surge: 0.8,
        share: 1.0,
    };
    vec![
        spec(VehicleType::Hatchback, 4, 3, 2.0, 18.0),
        spec(VehicleType::Sedan, 4, 5, 2.5, 15.0),
        spec(VehicleType::Luxury, 4, 3, 4.0, 10.0),
        spec(VehicleType::Van, 6, 8, 3.0, 10.0),
    ]
}

/// Which request kinds a vehicle may carry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ServiceMode {
    Mixed,
    PassengerOnly,
    GoodsOnly,
}

impl ServiceMode {
    pub fn serves(self, kind: RequestKind) -> bool {
        match self {
            ServiceMode::Mixed => true,
            ServiceMode::PassengerOnly => kind == RequestKind::Passenger,
            ServiceMode::GoodsOnly => kind == RequestKind::Goods,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VehicleStatus {
    Inactive,
    Idle,
    Dispatching,
    Occupied,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OnboardOrder {
    pub request: RequestId,
    pub kind: RequestKind,
    pub size: u32,
    pub pickup_time: f64,
    /// Zone where this leg ends (final destination or hop-zone).
    pub destination: ZoneId,
    /// Shortest-path km of the leg, for detour accounting.
    pub direct_km: f64,
    /// Route km driven since pickup.
    pub ridden_km: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vehicle {
    pub id: VehicleId,
    pub spec: VehicleTypeSpec,
    pub mode: ServiceMode,
    /// Next graph node the vehicle will reach (its current zone when parked).
    pub loc: ZoneId,
    /// km still to drive before reaching `loc`.
    pub to_loc_km: f64,
    pub route: RoutePlan,
    pub dispatch_target: Option<ZoneId>,
    pub status: VehicleStatus,
    pub idle_min: f64,
    pub onboard: Vec<OnboardOrder>,
    pub revenue: f64,
    pub fuel_cost: f64,
    pub travel_km: f64,
    pub cruising_min: f64,
    pub occupied_min: f64,
    pub working_min: f64,
}

impl Vehicle {
    pub fn new(id: VehicleId, spec: VehicleTypeSpec, mode: ServiceMode, loc: ZoneId) -> Self {
        Self {
            id,
            spec,
            mode,
            loc,
            to_loc_km: 0.0,
            route: RoutePlan::default(),
            dispatch_target: None,
            status: VehicleStatus::Inactive,
            idle_min: 0.0,
            onboard: Vec::new(),
            revenue: 0.0,
            fuel_cost: 0.0,
            travel_km: 0.0,
            cruising_min: 0.0,
            occupied_min: 0.0,
            working_min: 0.0,
        }
    }

    pub fn is_active(&self) -> bool {
        self.status != VehicleStatus::Inactive
    }

    pub fn activate(&mut self) {
        if self.status == VehicleStatus::Inactive {
            self.status = VehicleStatus::Idle;
            self.idle_min = 0.0;
        }
    }

    pub fn seat_capacity(&self) -> u32 {
        if self.mode.serves(RequestKind::Passenger) {
            self.spec.seats
        } else {
            0
        }
    }

    pub fn trunk_capacity(&self) -> u32 {
        if self.mode.serves(RequestKind::Goods) {
            self.spec.trunk
        } else {
            0
        }
    }

    pub fn capacity(&self, kind: RequestKind) -> u32 {
        match kind {
            RequestKind::Passenger => self.seat_capacity(),
            RequestKind::Goods => self.trunk_capacity(),
        }
    }

    pub fn onboard_load(&self, kind: RequestKind) -> u32 {
        self.onboard.iter().filter(|o| o.kind == kind).map(|o| o.size).sum()
    }

    pub fn free(&self, kind: RequestKind) -> u32 {
        self.capacity(kind).saturating_sub(self.onboard_load(kind))
    }

    /// Capacity not yet promised to onboard orders or scheduled pickups.
    pub fn residual(&self, kind: RequestKind) -> u32 {
        let pending: u32 = self
            .route
            .stops
            .iter()
            .filter(|s| s.kind == kind && s.action == StopAction::Pickup)
            .map(|s| s.size)
            .sum();
        self.free(kind).saturating_sub(pending)
    }

    /// Active with spare seats or trunk space.
    pub fn is_available(&self) -> bool {
        self.is_active() && (self.free(RequestKind::Passenger) > 0 || self.free(RequestKind::Goods) > 0)
    }

    pub fn is_loaded(&self) -> bool {
        !self.onboard.is_empty()
    }

    pub fn carrier(&self) -> Carrier {
        Carrier {
            start: self.loc,
            seats_used: self.onboard_load(RequestKind::Passenger),
            trunk_used: self.onboard_load(RequestKind::Goods),
            seat_capacity: self.seat_capacity(),
            trunk_capacity: self.trunk_capacity(),
        }
    }

    /// Distinct requests onboard or scheduled.
    pub fn request_count(&self) -> usize {
        let mut ids: Vec<RequestId> = self
            .onboard
            .iter()
            .map(|o| o.request)
            .chain(self.route.stops.iter().map(|s| s.request))
            .collect();
        ids.sort_unstable();
        ids.dedup();
        ids.len()
    }

    /// Install a new route; any dispatch is cancelled and the idle clock resets.
    pub fn assign_route(&mut self, route: RoutePlan) {
        self.route = route;
        self.dispatch_target = None;
        self.idle_min = 0.0;
        self.refresh_status();
    }

    /// Head for `target`; the idle clock resets.
    pub fn start_dispatch(&mut self, target: ZoneId) {
        self.idle_min = 0.0;
        if !self.route.is_empty() || !self.is_active() {
            return;
        }
        if target == self.loc && self.to_loc_km == 0.0 {
            self.dispatch_target = None;
            self.status = VehicleStatus::Idle;
        } else {
            self.dispatch_target = Some(target);
            self.status = VehicleStatus::Dispatching;
        }
    }

    pub fn refresh_status(&mut self) {
        if !self.is_active() {
            return;
        }
        self.status = if !self.route.is_empty() || !self.onboard.is_empty() {
            VehicleStatus::Occupied
        } else if self.dispatch_target.is_some() {
            VehicleStatus::Dispatching
        } else {
            VehicleStatus::Idle
        };
    }

    pub fn profit(&self) -> f64 {
        self.revenue - self.fuel_cost
    }

    /// Where the vehicle ends up once its route or dispatch completes.
    pub fn terminal_zone(&self) -> ZoneId {
        self.route.last_zone().or(self.dispatch_target).unwrap_or(self.loc)
    }

    /// km until the route or dispatch completes.
    pub fn remaining_km(&self, graph: &RoadGraph) -> f64 {
        let tail = if !self.route.is_empty() {
            self.route.cost_km
        } else if let Some(t) = self.dispatch_target {
            graph.distance(self.loc, t)
        } else {
            0.0
        };
        self.to_loc_km + tail
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FleetConfig {
    pub size: usize,
    /// Fraction of the fleet entering the market per step.
    pub entry_fraction: f64,
    pub idle_threshold_min: f64,
    pub speed_kmh: f64,
    pub types: Vec<VehicleTypeSpec>,
}

impl Default for FleetConfig {
    fn default() -> Self {
        Self {
            size: 50,
            entry_fraction: 0.1,
            idle_threshold_min: 10.0,
            speed_kmh: 20.0,
            types: default_vehicle_types(),
        }
    }
}

impl FleetConfig {
    pub fn speed_km_per_min(&self) -> f64 {
        self.speed_kmh / 60.0
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("fleet: {m}")));
        if !(self.entry_fraction > 0.0 && self.entry_fraction <= 1.0) {
            return bad("entry_fraction must be in (0, 1]");
        }
        if !(self.speed_kmh > 0.0 && self.speed_kmh.is_finite()) {
            return bad("speed_kmh must be positive");
        }
        if !(self.idle_threshold_min >= 0.0) {
            return bad("idle_threshold_min must be nonnegative");
        }
        if self.types.is_empty() {
            return bad("at least one vehicle type is required");
        }
        for t in &self.types {
            if t.seats == 0 && t.trunk == 0 {
                return bad("vehicle type without any capacity");
            }
            if !(t.base_price >= 0.0 && t.mileage_km > 0.0 && t.surge >= 0.0 && t.share >= 0.0) {
                return bad("vehicle type has a negative price, surge or share, or nonpositive mileage");
            }
        }
        if self.types.iter().map(|t| t.share).sum::<f64>() <= 0.0 {
            return bad("vehicle type shares sum to zero");
        }
        Ok(())
    }

    /// Vehicles activated per step until the whole fleet is in service.
    pub fn entries_per_step(&self) -> usize {
        ((self.size as f64 * self.entry_fraction).ceil() as usize).max(1)
    }
}

/// Build the fleet, all inactive, with types and start zones drawn from the
/// fleet-init stream. `passenger_share` splits the fleet into single-kind
/// vehicles (lower ids passenger-only) when given.
pub fn spawn_fleet(
    config: &FleetConfig,
    grid: &ZoneGrid,
    master_seed: u64,
    passenger_share: Option<f64>,
) -> Result<Vec<Vehicle>> {
    config.validate()?;
    let mut rng = rng::stream(master_seed, rng::FLEET_INIT);
    let weights = WeightedIndex::new(config.types.iter().map(|t| t.share))
        .map_err(|e| Error::Config(format!("fleet: {e}")))?;
    let zones = grid.zone_count() as u32;
    let split = passenger_share.map(|s| (s.clamp(0.0, 1.0) * config.size as f64).round() as usize);
    Ok((0..config.size)
        .map(|i| {
            let spec = config.types[weights.sample(&mut rng)];
            let loc = ZoneId(rng.random_range(0..zones));
            let mode = match split {
                None => ServiceMode::Mixed,
                Some(n) if i < n => ServiceMode::PassengerOnly,
                Some(_) => ServiceMode::GoodsOnly,
            };
            Vehicle::new(VehicleId(i as u32), spec, mode, loc)
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderSnapshot {
    pub pickup_time: f64,
    pub destination: ZoneId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleSnapshot {
    pub id: VehicleId,
    pub zone: ZoneId,
    pub free_seats: u32,
    pub free_trunk: u32,
    pub orders: Vec<OrderSnapshot>,
}

/// Per-vehicle view of the fleet at one instant.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FleetState {
    pub vehicles: Vec<VehicleSnapshot>,
}

pub fn fleet_state(vehicles: &[Vehicle]) -> FleetState {
    FleetState {
        vehicles: vehicles
            .iter()
            .filter(|v| v.is_active())
            .map(|v| VehicleSnapshot {
                id: v.id,
                zone: v.loc,
                free_seats: v.free(RequestKind::Passenger),
                free_trunk: v.free(RequestKind::Goods),
                orders: v
                    .onboard
                    .iter()
                    .map(|o| OrderSnapshot {
                        pickup_time: o.pickup_time,
                        destination: o.destination,
                    })
                    .collect(),
            })
            .collect(),
    }
}

/// Predicted available vehicles per zone for each future slot (slot-major).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupplyForecast {
    horizon: usize,
    zones: usize,
    values: Vec<f64>,
}

impl SupplyForecast {
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

    fn add(&mut self, k: usize, zone: ZoneId) {
        self.values[k * self.zones + zone.index()] += 1.0;
    }
}

/// Project where vehicles will be available over the next `horizon` slots.
///
/// A parked vehicle counts in its zone at every slot. A vehicle with a route
/// or dispatch finishing after `e` minutes counts in its terminal zone from
/// slot `ceil(e / slot_min)` on, and before that in its current zone only if
/// it has spare capacity.
pub fn project_supply(
    vehicles: &[Vehicle],
    graph: &RoadGraph,
    speed_km_per_min: f64,
    slot_min: f64,
    horizon: usize,
) -> SupplyForecast {
    let mut out = SupplyForecast::zeros(horizon, graph.node_count());
    for v in vehicles.iter().filter(|v| v.is_active()) {
        let busy = !v.route.is_empty() || v.dispatch_target.is_some() || v.to_loc_km > 0.0;
        if !busy {
            if v.is_available() {
                for k in 0..horizon {
                    out.add(k, v.loc);
                }
            }
            continue;
        }
        let eta = v.remaining_km(graph) / speed_km_per_min;
        let done_at = (eta / slot_min).ceil() as usize;
        let available_now = v.is_available();
        for k in 0..horizon {
            if k >= done_at {
                out.add(k, v.terminal_zone());
            } else if available_now {
                out.add(k, v.loc);
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Load {
    pub seats: u32,
    pub trunk: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OccupancyProfile {
    /// Running load after each stop.
    pub loads: Vec<Load>,
    /// First stop whose load leaves the capacity bounds.
    pub first_violation: Option<usize>,
}

impl OccupancyProfile {
    pub fn is_feasible(&self) -> bool {
        self.first_violation.is_none()
    }
}

pub fn occupancy_profile(vehicle: &Vehicle, route: &RoutePlan) -> OccupancyProfile {
    let c = vehicle.carrier();
    let mut seats = i64::from(c.seats_used);
    let mut trunk = i64::from(c.trunk_used);
    let mut loads = Vec::with_capacity(route.len());
    let mut first_violation = None;
    for (i, stop) in route.stops.iter().enumerate() {
        let (ds, dt) = stop.load_delta();
        seats += ds;
        trunk += dt;
        let ok = (0..=i64::from(c.seat_capacity)).contains(&seats) && (0..=i64::from(c.trunk_capacity)).contains(&trunk);
        if !ok && first_violation.is_none() {
            first_violation = Some(i);
        }
        loads.push(Load {
            seats: seats.max(0) as u32,
            trunk: trunk.max(0) as u32,
        });
    }
    OccupancyProfile { loads, first_violation }
}

/// Vehicles idle for strictly longer than `threshold_min`.
pub fn mark_idle_and_collect(vehicles: &[Vehicle], threshold_min: f64) -> Vec<VehicleId> {
    vehicles
        .iter()
        .filter(|v| v.status == VehicleStatus::Idle && v.idle_min > threshold_min)
        .map(|v| v.id)
        .collect()
}
