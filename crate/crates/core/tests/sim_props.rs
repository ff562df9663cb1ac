use std::collections::HashMap;
use std::io::Write as _;
use std::path::Path;

use fleetsim::city::build_grid;
use fleetsim::demand::{Lifecycle, RequestId, RequestKind};
use fleetsim::dispatch::Policy;
use fleetsim::fleet::{default_vehicle_types, spawn_fleet, VehicleStatus, VehicleType};
use fleetsim::sim::{replay, simulate, Engine, Event, EventType, Payload, ScenarioConfig, Variant};
use proptest::prelude::*;

fn quiet() -> ScenarioConfig {
    let mut cfg = ScenarioConfig { days: 1, drain_max_min: 60.0, ..ScenarioConfig::default() };
    cfg.passengers.rate_per_hour = 0.0;
    cfg.goods.rate_per_hour = 0.0;
    cfg.forecast.warmup_days = 0;
    cfg.fleet.size = 1;
    cfg.fleet.types = default_vehicle_types().into_iter().filter(|t| t.kind == VehicleType::Sedan).collect();
    cfg
}

fn spawn_cell(cfg: &ScenarioConfig) -> (u32, u32) {
    let (grid, _) = build_grid(&cfg.grid).unwrap();
    let z = spawn_fleet(&cfg.fleet, &grid, cfg.seed, None).unwrap()[0].loc;
    grid.cell(z)
}

/// One request from the spawn cell to `cols` cells along its row.
fn single_trip(cfg: &mut ScenarioConfig, dir: &Path, kind: &str, cols: u32) {
    let (col, row) = spawn_cell(cfg);
    let to = if col + cols < cfg.grid.width { col + cols } else { col - cols };
    let c = cfg.grid.cell_size_km;
    let path = dir.join("trips.csv");
    let mut f = std::fs::File::create(&path).unwrap();
    writeln!(f, "time_min,kind,size,origin_x,origin_y,dest_x,dest_y").unwrap();
    let y = (f64::from(row) + 0.5) * c;
    writeln!(f, "0.0,{kind},1,{},{y},{},{y}", (f64::from(col) + 0.5) * c, (f64::from(to) + 0.5) * c).unwrap();
    cfg.trip_file = Some(path);
}

fn first(events: &[Event], kind: EventType) -> Option<&Event> {
    events.iter().find(|e| e.kind == kind)
}

#[test]
fn passenger_trip_books_quoted_price() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = quiet();
    // any utility clears a zero threshold
    cfg.pricing.utility_per_money = 0.0;
    single_trip(&mut cfg, dir.path(), "passenger", 2);
    let out = simulate(&cfg).unwrap();
    let accept = first(&out.events, EventType::Accept).expect("accepted");
    let Payload::Quote { quote, kind, match_km, first: is_first, .. } = accept.payload else { panic!() };
    assert_eq!((kind, match_km, is_first), (RequestKind::Passenger, 0.0, true));
    // base 2.5 + 2 km + half of 2 km of fuel at 1.5 per 15 km, no wait
    let initial = 2.5 + 2.0 + 0.5 * 2.0 * 0.1;
    assert!((quote.initial - initial).abs() < 1e-9, "{}", quote.initial);
    assert!(quote.proposed >= quote.initial);
    assert_eq!(first(&out.events, EventType::Pickup).unwrap().step, 0);
    let drop = first(&out.events, EventType::Dropoff).unwrap();
    assert_eq!(drop.step, 5);
    let s = &out.report.summary;
    assert!((s.revenue - quote.proposed).abs() < 1e-9);
    assert!((s.fuel_cost - 0.2).abs() < 1e-9);
    assert!((s.profit_per_vehicle_day - (quote.proposed - 0.2)).abs() < 1e-9);
    assert!((s.travel_km - 2.0).abs() < 1e-9);
    assert_eq!((s.delivered_passengers, s.delivered_goods), (1, 0));
}

#[test]
fn refusal_leaves_no_revenue() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = quiet();
    cfg.pricing.utility_per_money = 1e6;
    single_trip(&mut cfg, dir.path(), "passenger", 2);
    let out = simulate(&cfg).unwrap();
    assert!(first(&out.events, EventType::Decline).is_some());
    assert!(first(&out.events, EventType::Accept).is_none());
    let s = &out.report.summary;
    assert_eq!((s.accepted, s.revenue, s.travel_km), (0, 0.0, 0.0));
}

#[test]
fn fast_vehicle_finishes_within_one_step() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = quiet();
    cfg.grid.cell_size_km = 0.5;
    cfg.fleet.speed_kmh = 60.0;
    cfg.goods.radius_km = 2.0;
    single_trip(&mut cfg, dir.path(), "goods", 2);
    let out = simulate(&cfg).unwrap();
    let drop = first(&out.events, EventType::Dropoff).unwrap();
    assert_eq!(drop.step, 0);
    assert!((out.report.summary.travel_km - 1.0).abs() < 1e-9);
}

#[test]
fn hop_drop_updates_zone_and_request() {
    let mut cfg = ScenarioConfig { days: 1, ..ScenarioConfig::default() };
    cfg.fleet.size = 10;
    cfg.goods.rate_per_hour = 30.0;
    let mut e = Engine::new(&cfg, Policy::NearestDemand, None).unwrap();
    let mut checked = 0;
    while checked < 5 && e.current_step() < cfg.demand_steps() {
        let held: Vec<u32> = e.hops().zones.iter().map(|h| h.held).collect();
        let seen = e.events().len();
        e.step_once();
        let fresh = &e.events()[seen..];
        let drops: Vec<&Event> = fresh.iter().filter(|x| x.kind == EventType::HopDrop).collect();
        if drops.len() != 1 {
            continue;
        }
        let zone = drops[0].zone.unwrap();
        if fresh.iter().any(|x| x.kind == EventType::Pickup && x.zone == Some(zone)) {
            continue;
        }
        let idx = e.hops().index_of(zone).unwrap();
        assert_eq!(e.hops().zones[idx].held, held[idx] + 1);
        let r = &e.requests()[drops[0].request.unwrap().0 as usize];
        assert_eq!(r.lifecycle, Lifecycle::Pending);
        assert_eq!(r.current, zone);
        assert!(r.accepted && r.hop_count >= 1);
        let Payload::Stop { hop_count, remaining_km, .. } = drops[0].payload else { panic!() };
        assert_eq!(hop_count, r.hop_count);
        assert!((remaining_km - e.graph().distance(zone, r.destination)).abs() < 1e-9);
        checked += 1;
    }
    assert!(checked > 0, "no isolated hop drop observed");
}

fn arb_config() -> impl Strategy<Value = ScenarioConfig> {
    (any::<u64>(), 3usize..30, 0.0f64..150.0, 0.0f64..25.0, 0usize..4, 0usize..25, 0.0f64..1.0, 0.0f64..3.0)
        .prop_map(|(seed, fleet, prate, grate, variant, hops, share, radius)| {
            let mut cfg = ScenarioConfig { seed, days: 1, drain_max_min: 120.0, ..ScenarioConfig::default() };
            cfg.grid.seed = seed;
            cfg.grid.weight_jitter = 0.3;
            cfg.fleet.size = fleet;
            cfg.passengers.rate_per_hour = prate;
            cfg.goods.rate_per_hour = grate;
            cfg.variant = Variant::ALL[variant];
            cfg.hops.count = hops;
            cfg.hops.drop_radius_km = radius;
            cfg.passenger_share = share;
            cfg.forecast.warmup_days = 1;
            cfg
        })
}

fn check_events(cfg: &ScenarioConfig, engine: &Engine) -> Result<(), TestCaseError> {
    let mut remaining: HashMap<RequestId, f64> = HashMap::new();
    for ev in engine.events() {
        match (&ev.kind, &ev.payload) {
            (EventType::Accept, Payload::Quote { kind, quote, match_km, .. }) => {
                prop_assert!(*match_km <= cfg.matching.radius_km + 1e-9, "matched from {match_km} km");
                match kind {
                    RequestKind::Goods => prop_assert_eq!(quote.proposed, quote.initial),
                    RequestKind::Passenger => prop_assert!(quote.proposed >= quote.initial),
                }
            }
            (EventType::HopDrop, Payload::Stop { remaining_km, .. }) => {
                let r = ev.request.unwrap();
                let req = &engine.requests()[r.0 as usize];
                let before = remaining
                    .get(&r)
                    .copied()
                    .unwrap_or_else(|| engine.graph().distance(req.origin, req.destination));
                prop_assert!(*remaining_km < before, "hop did not get closer: {remaining_km} >= {before}");
                remaining.insert(r, *remaining_km);
            }
            (EventType::Tick, Payload::Tick(t)) => {
                prop_assert!(t.active_vehicles <= cfg.fleet.size as u64);
                prop_assert!(t.occupied_vehicles <= t.active_vehicles);
            }
            _ => {}
        }
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn fuzzed_runs_keep_invariants(cfg in arb_config()) {
        let mut e = Engine::new(&cfg, Policy::NearestDemand, None).unwrap();
        while e.has_outstanding() || e.current_step() < cfg.demand_steps() {
            if e.current_step() >= cfg.demand_steps() + cfg.drain_steps() {
                break;
            }
            e.step_once();
            if let Err(m) = e.check_invariants() {
                prop_assert!(false, "step {}: {m}", e.current_step());
            }
            let counts = e.vehicles().iter().fold([0usize; 4], |mut c, v| {
                c[match v.status {
                    VehicleStatus::Inactive => 0,
                    VehicleStatus::Idle => 1,
                    VehicleStatus::Dispatching => 2,
                    VehicleStatus::Occupied => 3,
                }] += 1;
                c
            });
            prop_assert_eq!(counts.iter().sum::<usize>(), cfg.fleet.size);
        }
        check_events(&cfg, &e)?;
        let report = e.report();
        let rebuilt = replay(e.events(), cfg.fleet.size, f64::from(cfg.days));
        prop_assert_eq!(&rebuilt, &report);
        let s = &report.summary;
        prop_assert_eq!(s.generated, s.accepted + s.rejected + s.pending);
        prop_assert!((0.0..=1.0).contains(&s.accept_rate));
        for row in &report.rows {
            prop_assert!((0.0..=1.0 + 1e-12).contains(&row.occupancy_rate));
            prop_assert_eq!(row.generated, row.accepted + row.rejected + row.pending);
        }
        if !cfg.variant.multi_hop {
            prop_assert_eq!(s.hop_drops, 0);
        }
        prop_assert_eq!(s.hop_histogram.iter().sum::<u64>(), s.delivered_goods);
    }
}

#[test]
fn zero_everything_is_quiet() {
    let mut cfg = quiet();
    cfg.fleet.size = 0;
    let out = simulate(&cfg).unwrap();
    let s = &out.report.summary;
    assert_eq!((s.generated, s.accepted), (0, 0));
    assert_eq!((s.occupancy_rate, s.profit_per_vehicle_day, s.travel_km), (0.0, 0.0, 0.0));
    assert!(out.events.iter().all(|e| e.kind == EventType::Tick));
}
