//! The stepping loop: arrivals, matching, planning and pricing, movement,
//! dispatch and accounting.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::config::{LoadMode, ScenarioConfig};
use super::events::{Event, EventType, Payload, TickDelta};
use super::metrics::{MetricsCollector, MetricsReport};
use crate::city::{build_grid, RoadGraph, SimClock, ZoneGrid, ZoneId};
use crate::demand::{
    generate_goods_requests, generate_passenger_requests, load_requests, predict_demand, DemandForecast, DemandHistory,
    GoodsWorkloadConfig, Lifecycle, Request, RequestId, RequestKind,
};
use crate::dispatch::{
    compute_reward, dispatch_idle, encode_state, rank_by_demand, rank_zones, Checkpoint, DispatchQuery, EpsilonSchedule,
    Policy, PolicyKind, QFunction, ReplayBuffer, StateLayout, StepSummary, Transition, VehicleFeatures,
};
use crate::error::{Error, Result};
use crate::fleet::{
    mark_idle_and_collect, occupancy_profile, project_supply, spawn_fleet, OnboardOrder, SupplyForecast, Vehicle,
    VehicleId, VehicleStatus,
};
use crate::matching::greedy_match;
use crate::pricing::{
    decide, initial_price, passenger_utility, proposed_price, HotspotRanking, PassengerProfile, PriceQuote,
};
use crate::rng::{self, StreamRng};
use crate::routing::{assign_hop_zone, insert_request, route_cost, HopZoneSet, PlacementRequest, StopAction};

const EPS: f64 = 1e-9;
const MIN_PER_DAY: f64 = 24.0 * 60.0;

/// Synthetic and file-based requests for `days` days, sorted by time, with
/// ids equal to their position.
pub fn build_workload(cfg: &ScenarioConfig, grid: &ZoneGrid, seed: u64, days: u32) -> Result<Vec<Request>> {
    let steps = (f64::from(days) * MIN_PER_DAY / cfg.step_min).round() as u64;
    let clock = SimClock::new(0.0, cfg.step_min, steps)?;
    let mut all = generate_passenger_requests(&cfg.passengers, &clock, grid, seed, days, 0)?;
    let goods = GoodsWorkloadConfig {
        locations: cfg.goods.resolve_locations(grid, cfg.seed),
        radius_km: cfg.goods.radius_km,
        days,
        seed,
        size_weights: cfg.goods.size_weights.clone(),
    };
    all.extend(generate_goods_requests(&goods, &clock, grid, all.len() as u64)?);
    if let Some(path) = &cfg.trip_file {
        let horizon = f64::from(days) * MIN_PER_DAY;
        all.extend(load_requests(path, grid, all.len() as u64)?.into_iter().filter(|r| r.request_time < horizon));
    }
    all.sort_by(|a, b| a.request_time.total_cmp(&b.request_time).then(a.id.cmp(&b.id)));
    for (i, r) in all.iter_mut().enumerate() {
        r.id = RequestId(i as u64);
    }
    Ok(all)
}

/// Build the dispatch policy named by the config, loading and checking the
/// checkpoint for a learned one.
pub fn load_policy(cfg: &ScenarioConfig, layout: &StateLayout) -> Result<Policy> {
    Ok(match cfg.policy.kind {
        PolicyKind::Random => Policy::Random,
        PolicyKind::NearestDemand => Policy::NearestDemand,
        PolicyKind::Dqn => {
            let path = cfg
                .policy
                .checkpoint
                .as_ref()
                .ok_or_else(|| Error::Config("policy: dqn needs a checkpoint".into()))?;
            let ck = Checkpoint::load(path)?;
            ck.layout.ensure_compatible(layout)?;
            Policy::Dqn(Box::new(QFunction::from_network(ck.network()?, &cfg.dqn)))
        }
    })
}

pub fn state_layout(cfg: &ScenarioConfig, grid: &ZoneGrid) -> StateLayout {
    StateLayout::new(grid, cfg.forecast.horizon, cfg.dqn.action_radius)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossPoint {
    pub train_step: u64,
    pub sim_step: u64,
    pub loss: f64,
}

#[derive(Debug, Clone)]
struct OpenDecision {
    state: Vec<f64>,
    action: usize,
    reward: f64,
    steps: u32,
}

/// Exploration, replay and TD training attached to a learned policy.
#[derive(Debug, Clone)]
pub struct Learner {
    replay: ReplayBuffer,
    schedule: EpsilonSchedule,
    rng: StreamRng,
    open: Vec<Option<OpenDecision>>,
    losses: Vec<LossPoint>,
    batch_size: usize,
    train_every: u64,
    window_steps: u32,
}

impl Learner {
    pub fn new(cfg: &ScenarioConfig, total_steps: u64) -> Self {
        let d = &cfg.dqn;
        Self {
            replay: ReplayBuffer::new(d.replay_capacity),
            schedule: EpsilonSchedule {
                start: d.epsilon_start,
                end: d.epsilon_end,
                decay_steps: (d.epsilon_decay_fraction * total_steps as f64).round() as u64,
            },
            rng: rng::stream(cfg.seed, rng::REPLAY),
            open: vec![None; cfg.fleet.size],
            losses: Vec::new(),
            batch_size: d.batch_size,
            train_every: d.train_every_steps,
            window_steps: (d.decision_window_min / cfg.step_min).ceil().max(1.0) as u32,
        }
    }

    pub fn losses(&self) -> &[LossPoint] {
        &self.losses
    }

    pub fn replay(&self) -> &ReplayBuffer {
        &self.replay
    }
}

/// Bookkeeping for the leg a request is currently on.
#[derive(Debug, Clone, Copy, Default)]
struct Leg {
    price: f64,
    drop: Option<ZoneId>,
    /// Hop-zone the leg is routed into.
    hop: Option<usize>,
    /// Hop-zone the request is waiting at.
    staged_at: Option<usize>,
    profile: Option<PassengerProfile>,
}

/// Per-step fleet totals, in vehicle-id order.
#[derive(Debug, Clone, Copy, Default)]
struct StepAcc {
    travel_km: f64,
    cruising_min: f64,
    occupied_min: f64,
    working_min: f64,
    revenue: f64,
    fuel_cost: f64,
}

pub struct Engine {
    cfg: ScenarioConfig,
    grid: ZoneGrid,
    graph: RoadGraph,
    layout: StateLayout,
    speed: f64,
    dt: f64,
    vehicles: Vec<Vehicle>,
    requests: Vec<Request>,
    legs: Vec<Leg>,
    next_arrival: usize,
    pool: BTreeSet<RequestId>,
    hops: HopZoneSet,
    history: DemandHistory,
    ranking: HotspotRanking,
    policy: Policy,
    learner: Option<Learner>,
    explore_rng: StreamRng,
    profile_rng: StreamRng,
    summaries: Vec<StepSummary>,
    events: Vec<Event>,
    collector: MetricsCollector,
    step: u64,
    demand_steps: u64,
}

impl Engine {
    pub fn new(cfg: &ScenarioConfig, policy: Policy, learner: Option<Learner>) -> Result<Self> {
        cfg.validate()?;
        let (grid, graph) = build_grid(&cfg.grid)?;
        let layout = state_layout(cfg, &grid);
        if let Some(net) = policy.network() {
            if net.input_len() != layout.feature_len() || net.output_len() != layout.action_count() {
                return Err(Error::LayoutMismatch {
                    found: format!("network {:?}", net.sizes()),
                    expected: layout.describe(),
                });
            }
        }
        let share = (cfg.variant.load == LoadMode::Independent).then_some(cfg.passenger_share);
        let vehicles = spawn_fleet(&cfg.fleet, &grid, cfg.seed, share)?;
        let requests = build_workload(cfg, &grid, cfg.seed, cfg.days)?;
        let hops = match &cfg.hops.file {
            Some(path) => {
                let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
                HopZoneSet::from_csv(f, path, &grid)?
            }
            None => HopZoneSet::evenly_spaced(&grid, cfg.hops.count, cfg.hops.capacity),
        };
        let history = warmup_history(cfg, &grid)?;
        let zones = grid.zone_count();
        Ok(Self {
            speed: cfg.fleet.speed_km_per_min(),
            dt: cfg.step_min,
            legs: vec![Leg::default(); requests.len()],
            summaries: vec![StepSummary::default(); vehicles.len()],
            ranking: HotspotRanking::flat(zones, cfg.pricing.hotspot_count),
            explore_rng: rng::stream(cfg.seed, rng::EXPLORATION),
            profile_rng: rng::stream(cfg.seed, rng::PROFILES),
            demand_steps: cfg.demand_steps(),
            cfg: cfg.clone(),
            grid,
            graph,
            layout,
            vehicles,
            requests,
            next_arrival: 0,
            pool: BTreeSet::new(),
            hops,
            history,
            policy,
            learner,
            events: Vec::new(),
            collector: MetricsCollector::new(),
            step: 0,
        })
    }

    pub fn layout(&self) -> &StateLayout {
        &self.layout
    }

    pub fn graph(&self) -> &RoadGraph {
        &self.graph
    }

    pub fn grid(&self) -> &ZoneGrid {
        &self.grid
    }

    pub fn vehicles(&self) -> &[Vehicle] {
        &self.vehicles
    }

    pub fn requests(&self) -> &[Request] {
        &self.requests
    }

    pub fn hops(&self) -> &HopZoneSet {
        &self.hops
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn take_events(&mut self) -> Vec<Event> {
        std::mem::take(&mut self.events)
    }

    pub fn policy(&self) -> &Policy {
        &self.policy
    }

    pub fn learner(&self) -> Option<&Learner> {
        self.learner.as_ref()
    }

    pub fn current_step(&self) -> u64 {
        self.step
    }

    pub fn ranking(&self) -> &HotspotRanking {
        &self.ranking
    }

    fn now(&self) -> f64 {
        self.step as f64 * self.dt
    }

    fn days(&self) -> f64 {
        f64::from(self.cfg.days)
    }

    pub fn report(&self) -> MetricsReport {
        self.collector.finish(self.vehicles.len(), self.days())
    }

    /// Anything still waiting, riding or staged.
    pub fn has_outstanding(&self) -> bool {
        !self.pool.is_empty() || self.vehicles.iter().any(|v| !v.route.is_empty() || !v.onboard.is_empty())
    }

    /// Demand period, then a drain until nothing is outstanding or the drain
    /// budget runs out.
    pub fn run_to_end(&mut self) {
        while self.step < self.demand_steps {
            self.step_once();
        }
        let limit = self.demand_steps + self.cfg.drain_steps();
        while self.step < limit && self.has_outstanding() {
            self.step_once();
        }
        self.close_all_decisions();
    }

    fn emit(&mut self, kind: EventType, vehicle: Option<VehicleId>, request: Option<RequestId>, zone: Option<ZoneId>, payload: Payload) {
        let e = Event {
            step: self.step,
            kind,
            vehicle,
            request,
            zone,
            payload,
        };
        self.collector.apply(&e);
        self.events.push(e);
    }

    pub fn step_once(&mut self) {
        let t = self.now();
        for (s, v) in self.summaries.iter_mut().zip(&self.vehicles) {
            *s = StepSummary {
                was_occupied: v.is_loaded(),
                ..StepSummary::default()
            };
        }
        let mut acc = StepAcc::default();

        let refresh = (self.cfg.pricing.ranking_refresh_min / self.dt).round().max(1.0) as u64;
        if self.step % refresh == 0 {
            self.refresh_ranking();
        }

        // market entry
        let entering: Vec<VehicleId> = self
            .vehicles
            .iter_mut()
            .filter(|v| !v.is_active())
            .take(self.cfg.fleet.entries_per_step())
            .map(|v| {
                v.activate();
                v.id
            })
            .collect();
        if !entering.is_empty() {
            self.dispatch(&entering);
        }

        self.admit_arrivals(t);
        self.age_out(t);

        // matching and per-vehicle planning
        let batch = greedy_match(
            &self.vehicles,
            self.pool.iter().map(|id| &self.requests[id.0 as usize]),
            &self.graph,
            self.speed,
            self.cfg.matching.radius_km,
        );
        let reqs = &self.requests;
        let per = batch.per_vehicle(&self.vehicles, |id| reqs[id.0 as usize].current, &self.graph);
        for (vid, list) in per {
            for rid in list {
                let match_km = batch
                    .assignments
                    .iter()
                    .find(|a| a.request == rid)
                    .map_or(0.0, |a| a.distance_km);
                self.plan(vid, rid, match_km, t);
            }
        }

        for i in 0..self.vehicles.len() {
            self.move_vehicle(i, &mut acc);
        }

        self.learn_from_step();

        let idle = mark_idle_and_collect(&self.vehicles, self.cfg.fleet.idle_threshold_min);
        if !idle.is_empty() {
            self.dispatch(&idle);
        }

        if let Some(l) = &self.learner {
            if self.step % l.train_every == 0 && l.replay.len() >= l.batch_size {
                self.train_once();
            }
        }

        let delta = TickDelta {
            time_min: t,
            pending_legs: self.pool.len() as u64,
            occupied_vehicles: self.vehicles.iter().filter(|v| v.status == VehicleStatus::Occupied).count() as u64,
            active_vehicles: self.vehicles.iter().filter(|v| v.is_active()).count() as u64,
            travel_km: acc.travel_km,
            cruising_min: acc.cruising_min,
            occupied_min: acc.occupied_min,
            working_min: acc.working_min,
            revenue: acc.revenue,
            fuel_cost: acc.fuel_cost,
        };
        self.emit(EventType::Tick, None, None, None, Payload::Tick(delta));

        let per_day = (MIN_PER_DAY / self.dt).round().max(1.0) as u64;
        if (self.step + 1) % per_day == 0 {
            self.history.close_day();
        }
        self.step += 1;
    }

    fn slot(&self, t: f64) -> u64 {
        (t / self.cfg.forecast.slot_min).floor() as u64
    }

    fn admit_arrivals(&mut self, t: f64) {
        while self.next_arrival < self.requests.len() && self.requests[self.next_arrival].request_time < t + self.dt - EPS {
            let i = self.next_arrival;
            self.next_arrival += 1;
            let (id, kind, size, origin, time) = {
                let r = &self.requests[i];
                (r.id, r.kind, r.size, r.origin, r.request_time)
            };
            let slot_of_day = (self.slot(time.rem_euclid(MIN_PER_DAY))) as usize;
            self.history.record(slot_of_day, origin, 1);
            if kind == RequestKind::Passenger {
                self.legs[i].profile = Some(self.cfg.pricing.draw_profile(&mut self.profile_rng));
            }
            self.pool.insert(id);
            self.emit(EventType::Request, None, Some(id), Some(origin), Payload::Request { kind, size });
        }
    }

    /// Requests never accepted and waiting longer than the maximum age are
    /// rejected. Staged parcel legs were accepted and never age out.
    fn age_out(&mut self, t: f64) {
        let max_age = self.cfg.matching.max_age_min;
        let expired: Vec<RequestId> = self
            .pool
            .iter()
            .copied()
            .filter(|id| {
                let r = &self.requests[id.0 as usize];
                !r.accepted && t - r.request_time > max_age
            })
            .collect();
        for id in expired {
            self.pool.remove(&id);
            let r = &mut self.requests[id.0 as usize];
            r.reject();
            let zone = r.current;
            self.emit(EventType::Reject, None, Some(id), Some(zone), Payload::None);
        }
    }

    fn plan(&mut self, vid: VehicleId, rid: RequestId, match_km: f64, t: f64) {
        let vi = vid.0 as usize;
        let ri = rid.0 as usize;
        let r = self.requests[ri].clone();
        let v = &self.vehicles[vi];
        let (drop, drop_action, hop) = match r.kind {
            RequestKind::Passenger => (r.destination, StopAction::Dropoff, None),
            RequestKind::Goods => {
                let z = if self.cfg.variant.multi_hop && !v.route.is_empty() {
                    assign_hop_zone(r.current, r.destination, &v.route, &self.hops, &self.cfg.hops.hop_config(), &self.graph)
                } else {
                    r.destination
                };
                if z == r.destination {
                    (z, StopAction::Dropoff, None)
                } else {
                    (z, StopAction::HopDrop, self.hops.spare_at(z))
                }
            }
        };
        let placement = PlacementRequest {
            id: rid,
            kind: r.kind,
            size: r.size,
            pickup: r.current,
            drop,
            drop_action,
        };
        let ins = match insert_request(&v.carrier(), &v.route, &placement, &self.graph) {
            Ok(ins) => ins,
            Err(_) => {
                self.emit(EventType::InsertFailed, Some(vid), Some(rid), Some(r.current), Payload::None);
                return;
            }
        };
        let occupancy = ins.plan.request_count();
        let pickup_km = v.to_loc_km + ins.plan.km_to(&self.graph, v.loc, rid, StopAction::Pickup).unwrap_or(0.0);
        let wait = (t - r.request_time).max(0.0) + pickup_km / self.speed;
        let spec = v.spec;
        let initial = initial_price(ins.plan.cost_km, occupancy, &spec, wait, &self.cfg.pricing);
        let proposed = match r.kind {
            RequestKind::Passenger => proposed_price(initial, r.destination, &self.ranking, &spec),
            RequestKind::Goods => initial,
        };
        let quote = PriceQuote {
            request: rid,
            initial,
            proposed,
            route_cost_km: ins.plan.cost_km,
            occupancy,
        };
        let accept = match (r.kind, self.legs[ri].profile) {
            (RequestKind::Passenger, Some(p)) => {
                let u = passenger_utility(&p, occupancy, spec.kind.ordinal(), wait);
                decide(u, proposed, p.flexibility, &self.cfg.pricing)
            }
            _ => true,
        };
        let payload = Payload::Quote {
            kind: r.kind,
            quote,
            match_km,
            drop,
            first: !r.accepted,
        };
        if !accept {
            self.emit(EventType::Decline, Some(vid), Some(rid), Some(r.current), payload);
            return;
        }
        let was_empty = v.route.is_empty();
        let detour_min = if was_empty { 0.0 } else { ins.incremental_km / self.speed };
        self.summaries[vi].detour_min += detour_min;
        self.vehicles[vi].assign_route(ins.plan);
        self.requests[ri].commit();
        self.pool.remove(&rid);
        if let Some(h) = hop {
            self.hops.zones[h].inbound += 1;
        }
        let leg = &mut self.legs[ri];
        leg.price = proposed;
        leg.drop = Some(drop);
        leg.hop = hop;
        self.emit(EventType::Accept, Some(vid), Some(rid), Some(r.current), payload);
    }

    fn drive(&mut self, i: usize, km: f64, acc: &mut StepAcc) {
        if km <= 0.0 {
            return;
        }
        let fuel = km * self.cfg.pricing.gas_price / self.vehicles[i].spec.mileage_km;
        let minutes = km / self.speed;
        let v = &mut self.vehicles[i];
        v.travel_km += km;
        v.fuel_cost += fuel;
        acc.travel_km += km;
        acc.fuel_cost += fuel;
        self.summaries[i].profit -= fuel;
        if v.onboard.is_empty() {
            v.cruising_min += minutes;
            acc.cruising_min += minutes;
        } else {
            v.occupied_min += minutes;
            acc.occupied_min += minutes;
            for o in &mut v.onboard {
                o.ridden_km += km;
            }
        }
    }

    fn move_vehicle(&mut self, i: usize, acc: &mut StepAcc) {
        if !self.vehicles[i].is_active() {
            return;
        }
        self.vehicles[i].working_min += self.dt;
        acc.working_min += self.dt;
        let mut budget = self.speed * self.dt;
        loop {
            let to_loc = self.vehicles[i].to_loc_km;
            if to_loc > 0.0 {
                let d = budget.min(to_loc);
                self.drive(i, d, acc);
                let v = &mut self.vehicles[i];
                v.to_loc_km -= d;
                if v.to_loc_km < EPS {
                    v.to_loc_km = 0.0;
                }
                budget -= d;
                if v.to_loc_km > 0.0 {
                    break;
                }
            }
            self.fire_stops(i, acc);
            let v = &mut self.vehicles[i];
            if v.dispatch_target == Some(v.loc) {
                v.dispatch_target = None;
                v.refresh_status();
            }
            let Some(target) = v.route.stops.first().map(|s| s.zone).or(v.dispatch_target) else {
                break;
            };
            if budget <= EPS {
                break;
            }
            let next = self.graph.next_hop(v.loc, target);
            v.to_loc_km = self.graph.distance(v.loc, next);
            v.loc = next;
            v.route.refresh_cost(&self.graph, next);
        }
        let v = &mut self.vehicles[i];
        if v.status == VehicleStatus::Idle {
            v.idle_min += self.dt;
        }
    }

    fn fire_stops(&mut self, i: usize, acc: &mut StepAcc) {
        let here = self.vehicles[i].loc;
        while self.vehicles[i].route.stops.first().is_some_and(|s| s.zone == here) {
            let stop = self.vehicles[i].route.stops.remove(0);
            let ri = stop.request.0 as usize;
            let vid = self.vehicles[i].id;
            match stop.action {
                StopAction::Pickup => {
                    self.requests[ri].board();
                    if let Some(h) = self.legs[ri].staged_at.take() {
                        self.hops.zones[h].held -= 1;
                    }
                    let drop = self.legs[ri].drop.expect("committed leg has a drop");
                    let r = &self.requests[ri];
                    let order = OnboardOrder {
                        request: r.id,
                        kind: r.kind,
                        size: r.size,
                        pickup_time: self.step as f64 * self.dt,
                        destination: drop,
                        direct_km: self.graph.distance(here, drop),
                        ridden_km: 0.0,
                    };
                    let payload = Payload::Stop {
                        kind: r.kind,
                        size: r.size,
                        hop_count: r.hop_count,
                        revenue: 0.0,
                        remaining_km: self.graph.distance(here, r.destination),
                    };
                    match r.kind {
                        RequestKind::Passenger => self.summaries[i].passengers_picked += 1,
                        RequestKind::Goods => self.summaries[i].packages_picked += 1,
                    }
                    self.vehicles[i].onboard.push(order);
                    self.emit(EventType::Pickup, Some(vid), Some(stop.request), Some(here), payload);
                }
                StopAction::Dropoff | StopAction::HopDrop => {
                    let v = &mut self.vehicles[i];
                    let pos = v
                        .onboard
                        .iter()
                        .position(|o| o.request == stop.request)
                        .expect("drop of an onboard order");
                    let order = v.onboard.remove(pos);
                    let price = self.legs[ri].price;
                    v.revenue += price;
                    acc.revenue += price;
                    let extra_min = (order.ridden_km - order.direct_km).max(0.0) / self.speed;
                    self.summaries[i].profit += price;
                    self.summaries[i].weighted_delay_min += self.cfg.reward.urgency(order.kind) * extra_min;
                    let kind = if stop.action == StopAction::Dropoff {
                        self.requests[ri].deliver();
                        EventType::Dropoff
                    } else {
                        self.requests[ri].stage_at(here);
                        let h = self.legs[ri].hop.take().expect("hop leg has a hop-zone");
                        let hz = &mut self.hops.zones[h];
                        hz.inbound -= 1;
                        hz.held += 1;
                        self.legs[ri].staged_at = Some(h);
                        self.pool.insert(stop.request);
                        EventType::HopDrop
                    };
                    self.legs[ri].drop = None;
                    let r = &self.requests[ri];
                    let payload = Payload::Stop {
                        kind: r.kind,
                        size: r.size,
                        hop_count: r.hop_count,
                        revenue: price,
                        remaining_km: self.graph.distance(here, r.destination),
                    };
                    self.emit(kind, Some(vid), Some(stop.request), Some(here), payload);
                }
            }
        }
        let v = &mut self.vehicles[i];
        v.route.refresh_cost(&self.graph, v.loc);
        v.refresh_status();
    }

    fn forecasts(&self) -> (SupplyForecast, DemandForecast) {
        let fc = &self.cfg.forecast;
        let supply = project_supply(&self.vehicles, &self.graph, self.speed, fc.slot_min, fc.horizon);
        let demand = predict_demand(&self.history, self.slot(self.now()), fc.horizon);
        (supply, demand)
    }

    fn state_of(&self, v: &Vehicle, supply: &SupplyForecast, demand: &DemandForecast) -> Vec<f64> {
        let f = VehicleFeatures {
            zone: v.loc,
            free_seats: v.free(RequestKind::Passenger),
            free_trunk: v.free(RequestKind::Goods),
        };
        encode_state(&self.layout, &f, supply, demand).expect("layout built from the same config")
    }

    fn refresh_ranking(&mut self) {
        let (supply, demand) = self.forecasts();
        let top = self.cfg.pricing.hotspot_count;
        self.ranking = match self.policy.network() {
            Some(net) => {
                let f = VehicleFeatures {
                    zone: ZoneId(0),
                    free_seats: self.cfg.fleet.types.iter().map(|t| t.seats).max().unwrap_or(0),
                    free_trunk: self.cfg.fleet.types.iter().map(|t| t.trunk).max().unwrap_or(0),
                };
                let template = encode_state(&self.layout, &f, &supply, &demand).expect("layout built from the same config");
                rank_zones(net, &self.layout, &template, top)
            }
            None => rank_by_demand(&demand, top),
        };
    }

    fn dispatch(&mut self, ids: &[VehicleId]) {
        let (supply, demand) = self.forecasts();
        let queries: Vec<DispatchQuery> = ids
            .iter()
            .map(|id| {
                let v = &self.vehicles[id.0 as usize];
                DispatchQuery {
                    vehicle: *id,
                    zone: v.loc,
                    state: self.state_of(v, &supply, &demand),
                }
            })
            .collect();
        let epsilon = self.learner.as_ref().map_or(0.0, |l| l.schedule.at(self.step));
        let actions = dispatch_idle(&self.policy, &self.layout, &queries, epsilon, &mut self.explore_rng);
        for (q, a) in queries.into_iter().zip(actions) {
            let vi = a.vehicle.0 as usize;
            self.vehicles[vi].start_dispatch(a.target);
            if let Some(l) = &mut self.learner {
                if let Some(open) = l.open[vi].take() {
                    push_transition(l, open, q.state.clone(), self.layout.action_mask(q.zone), self.cfg.reward.gamma);
                }
                l.open[vi] = Some(OpenDecision {
                    state: q.state,
                    action: a.action,
                    reward: 0.0,
                    steps: 0,
                });
            }
            self.emit(
                EventType::Dispatch,
                Some(a.vehicle),
                None,
                Some(a.target),
                Payload::Dispatch {
                    target: a.target,
                    action: a.action,
                },
            );
        }
    }

    /// Fold this step's reward into each open decision, closing decisions
    /// whose window has run out.
    fn learn_from_step(&mut self) {
        let Some(l) = &mut self.learner else { return };
        let gamma = self.cfg.reward.gamma;
        let mut expired = Vec::new();
        for (i, v) in self.vehicles.iter().enumerate() {
            let Some(open) = &mut l.open[i] else { continue };
            let mut s = self.summaries[i];
            s.occupied = v.is_loaded();
            let r = compute_reward(&s, &self.cfg.reward).total;
            open.reward += gamma.powi(open.steps as i32) * r;
            open.steps += 1;
            if open.steps >= l.window_steps {
                expired.push(i);
            }
        }
        if expired.is_empty() {
            return;
        }
        let (supply, demand) = self.forecasts();
        for i in expired {
            let v = &self.vehicles[i];
            let state = self.state_of(v, &supply, &demand);
            let mask = self.layout.action_mask(v.loc);
            let l = self.learner.as_mut().expect("learner present");
            let open = l.open[i].take().expect("expired decision is open");
            push_transition(l, open, state, mask, gamma);
        }
    }

    fn close_all_decisions(&mut self) {
        if self.learner.is_none() {
            return;
        }
        let (supply, demand) = self.forecasts();
        let gamma = self.cfg.reward.gamma;
        for i in 0..self.vehicles.len() {
            let v = &self.vehicles[i];
            let state = self.state_of(v, &supply, &demand);
            let mask = self.layout.action_mask(v.loc);
            let l = self.learner.as_mut().expect("learner present");
            if let Some(open) = l.open[i].take() {
                if open.steps > 0 {
                    push_transition(l, open, state, mask, gamma);
                }
            }
        }
    }

    fn train_once(&mut self) {
        let (Some(l), Policy::Dqn(q)) = (&mut self.learner, &mut self.policy) else {
            return;
        };
        let batch = l.replay.sample(l.batch_size, &mut l.rng);
        let loss = q.train_step(&batch);
        l.losses.push(LossPoint {
            train_step: q.train_steps(),
            sim_step: self.step,
            loss,
        });
    }

    /// Structural invariants of the current state; the first violation found
    /// is described in the error.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        let arrived = &self.requests[..self.next_arrival];
        let waiting = arrived
            .iter()
            .filter(|r| !r.accepted && r.lifecycle == Lifecycle::Pending)
            .count() as u64;
        if waiting != self.collector.pending() {
            return Err(format!(
                "conservation: {waiting} unaccepted requests waiting, counters say {}",
                self.collector.pending()
            ));
        }
        let staged = arrived.iter().filter(|r| r.accepted && r.lifecycle == Lifecycle::Pending).count();
        if self.pool.len() != waiting as usize + staged {
            return Err(format!("pool holds {} legs, expected {}", self.pool.len(), waiting as usize + staged));
        }
        for v in &self.vehicles {
            let p = occupancy_profile(v, &v.route);
            if let Some(i) = p.first_violation {
                return Err(format!("{} route violates capacity at stop {i}", v.id));
            }
            for kind in [RequestKind::Passenger, RequestKind::Goods] {
                if v.onboard_load(kind) > v.capacity(kind) {
                    return Err(format!("{} carries more {} than it holds", v.id, kind.as_str()));
                }
            }
            let cost = route_cost(&self.graph, v.loc, &v.route);
            if (cost - v.route.cost_km).abs() > 1e-6 {
                return Err(format!("{} cached route cost {} != {cost}", v.id, v.route.cost_km));
            }
            if !v.is_active() && (!v.route.is_empty() || !v.onboard.is_empty()) {
                return Err(format!("{} is inactive but has work", v.id));
            }
        }
        for h in &self.hops.zones {
            if h.held + h.inbound > h.capacity {
                return Err(format!("hop-zone at {} over capacity", h.zone));
            }
        }
        let (occ, acc) = (self.collector.occupancy_rate(), self.collector.accept_rate());
        if !(0.0..=1.0 + 1e-12).contains(&occ) || !(0.0..=1.0).contains(&acc) {
            return Err(format!("rates out of range: occupancy {occ} accept {acc}"));
        }
        Ok(())
    }
}

fn push_transition(l: &mut Learner, open: OpenDecision, next_state: Vec<f64>, next_mask: Vec<bool>, gamma: f64) {
    l.replay.push(Transition {
        state: open.state,
        action: open.action,
        reward: open.reward,
        next_state,
        next_mask,
        discount: gamma.powi(open.steps as i32),
    });
}

/// Seed the forecaster with whole days of synthetic demand drawn from an
/// independent stream.
fn warmup_history(cfg: &ScenarioConfig, grid: &ZoneGrid) -> Result<DemandHistory> {
    let slots = (MIN_PER_DAY / cfg.forecast.slot_min).ceil() as usize;
    let zones = grid.zone_count();
    let mut history = DemandHistory::new(zones, slots);
    let days = cfg.forecast.warmup_days;
    if days == 0 {
        return Ok(history);
    }
    let no_file = ScenarioConfig {
        trip_file: None,
        ..cfg.clone()
    };
    let reqs = build_workload(&no_file, grid, rng::stream_seed(cfg.seed, "history"), days)?;
    let mut counts = vec![vec![0u32; zones * slots]; days as usize];
    for r in reqs {
        let day = ((r.request_time / MIN_PER_DAY).floor() as usize).min(days as usize - 1);
        let slot = ((r.request_time.rem_euclid(MIN_PER_DAY) / cfg.forecast.slot_min).floor() as usize).min(slots - 1);
        counts[day][slot * zones + r.origin.index()] += 1;
    }
    for c in counts {
        history.push_day(c);
    }
    Ok(history)
}
