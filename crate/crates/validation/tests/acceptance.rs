//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the process exits nonzero if any criterion fails.

use std::collections::{HashMap, HashSet};
use std::time::Instant;

use fleetsim::city::{build_grid, GridConfig, RoadGraph, SimClock, ZoneId};
use fleetsim::demand::{generate_goods_requests, GoodsWorkloadConfig, RequestId, RequestKind, ServiceLocation};
use fleetsim::dispatch::{DqnConfig, Mlp, OptimizerKind, Policy, QFunction, Transition};
use fleetsim::rng;
use fleetsim::routing::{brute_force_plan, insert_request, Carrier, PlacementRequest, RoutePlan, Stop, StopAction};
use fleetsim::sim::{replay, run_baseline_matrix, Engine, EventType, Payload, RunOutput, ScenarioConfig, Variant};
use fleetsim::training::{quarter_means, train};
use rand::Rng;

struct Verdict {
    id: u8,
    name: &'static str,
    pass: bool,
    detail: String,
}

fn verdict(id: u8, name: &'static str, pass: bool, detail: String) -> Verdict {
    Verdict { id, name, pass, detail }
}

fn random_request<R: Rng>(r: &mut R, id: u64, zones: u32) -> PlacementRequest {
    let pickup = ZoneId(r.random_range(0..zones));
    let mut drop = pickup;
    while drop == pickup {
        drop = ZoneId(r.random_range(0..zones));
    }
    PlacementRequest {
        id: RequestId(id),
        kind: if r.random_bool(0.5) { RequestKind::Goods } else { RequestKind::Passenger },
        size: r.random_range(1..=2),
        pickup,
        drop,
        drop_action: StopAction::Dropoff,
    }
}

fn insert_all(c: &Carrier, reqs: &[PlacementRequest], graph: &RoadGraph) -> Option<RoutePlan> {
    let mut plan = RoutePlan::default();
    for r in reqs {
        plan = insert_request(c, &plan, r, graph).ok()?.plan;
    }
    Some(plan)
}

fn insertion_vs_oracle() -> Verdict {
    let (_, graph) = build_grid(&GridConfig::default()).unwrap();
    let mut r = rng::stream(2024, "acceptance-insertion");
    let mut small = (0, 0);
    let mut gaps = Vec::new();
    let mut worse_than_oracle = 0;
    for i in 0..2000 {
        let k = if i < 1000 { r.random_range(1..=2) } else { 3 };
        let c = Carrier::empty_at(ZoneId(r.random_range(0..100)), r.random_range(2..=6), r.random_range(2..=8));
        let reqs: Vec<_> = (0..k).map(|j| random_request(&mut r, j, 100)).collect();
        let ins = insert_all(&c, &reqs, &graph);
        let oracle = brute_force_plan(&c, &reqs, &graph);
        if k <= 2 {
            small.1 += 1;
            let same = match (&ins, &oracle) {
                (Some(a), Some(b)) => (a.cost_km - b.cost_km).abs() < 1e-9,
                (None, None) => true,
                _ => false,
            };
            small.0 += usize::from(same);
        } else if let (Some(a), Some(b)) = (&ins, &oracle) {
            if a.cost_km < b.cost_km - 1e-9 {
                worse_than_oracle += 1;
            }
            gaps.push(if b.cost_km > 0.0 { a.cost_km / b.cost_km - 1.0 } else { 0.0 });
        }
    }
    let mean_gap = gaps.iter().sum::<f64>() / gaps.len().max(1) as f64;
    let pass = small.0 == small.1 && worse_than_oracle == 0;
    verdict(
        1,
        "insertion matches brute force",
        pass,
        format!(
            "<=2 requests: {}/{} equal; 3 requests: {} instances, mean optimality gap {:.2}%, {} below oracle",
            small.0,
            small.1,
            gaps.len(),
            100.0 * mean_gap,
            worse_than_oracle
        ),
    )
}

fn six_orderings() -> Verdict {
    let (_, graph) = build_grid(&GridConfig { weight_jitter: 0.5, seed: 77, ..GridConfig::default() }).unwrap();
    let family: [[&str; 4]; 6] = [
        ["ox", "oy", "dx", "dy"],
        ["oy", "ox", "dx", "dy"],
        ["oy", "ox", "dy", "dx"],
        ["ox", "oy", "dy", "dx"],
        ["ox", "dx", "oy", "dy"],
        ["oy", "dy", "ox", "dx"],
    ];
    let mut r = rng::stream(7, "acceptance-orderings");
    let mut seen: HashSet<[&str; 4]> = HashSet::new();
    let mut bad = 0;
    let trials = 4000;
    for _ in 0..trials {
        let c = Carrier::empty_at(ZoneId(r.random_range(0..100)), 8, 8);
        let x = random_request(&mut r, 0, 100);
        let y = random_request(&mut r, 1, 100);
        let at = |name: &str| match name {
            "ox" => x.pickup,
            "dx" => x.drop,
            "oy" => y.pickup,
            _ => y.drop,
        };
        let cost = |seq: &[&str; 4]| {
            let mut zones = vec![c.start];
            zones.extend(seq.iter().map(|n| at(n)));
            graph.path_weight(&zones).unwrap()
        };
        let best = family.iter().map(cost).fold(f64::INFINITY, f64::min);
        let plan = insert_all(&c, &[x, y], &graph).unwrap();
        let label = |s: &Stop| match (s.request.0, s.action) {
            (0, StopAction::Pickup) => "ox",
            (0, _) => "dx",
            (_, StopAction::Pickup) => "oy",
            _ => "dy",
        };
        let got: [&str; 4] = std::array::from_fn(|i| label(&plan.stops[i]));
        if !family.contains(&got) || (plan.cost_km - best).abs() > 1e-9 {
            bad += 1;
            continue;
        }
        // only count strict winners as evidence the ordering is reachable
        if family.iter().filter(|s| (cost(s) - best).abs() < 1e-9).count() == 1 {
            seen.insert(got);
        }
    }
    verdict(
        2,
        "six-ordering search",
        bad == 0 && seen.len() == 6,
        format!("{trials} instances, {bad} off the six-ordering minimum, {} of 6 orderings chosen as unique optimum", seen.len()),
    )
}

fn hop_histogram(run: &RunOutput) -> Verdict {
    let accepted: HashSet<RequestId> = run
        .events
        .iter()
        .filter_map(|e| match (&e.kind, &e.payload) {
            (EventType::Accept, Payload::Quote { kind: RequestKind::Goods, first: true, .. }) => e.request,
            _ => None,
        })
        .collect();
    let delivered: HashSet<RequestId> = run
        .events
        .iter()
        .filter_map(|e| match (&e.kind, &e.payload) {
            (EventType::Dropoff, Payload::Stop { kind: RequestKind::Goods, .. }) => e.request,
            _ => None,
        })
        .collect();
    let h = &run.report.summary.hop_histogram;
    let total: u64 = h.iter().sum();
    let decreasing = h.windows(2).all(|w| w[0] > w[1]);
    let all_delivered = accepted.is_subset(&delivered) && delivered.len() == accepted.len();
    let shares: Vec<String> = h.iter().map(|c| format!("{:.1}%", 100.0 * *c as f64 / total.max(1) as f64)).collect();
    verdict(
        3,
        "hop termination and histogram shape",
        all_delivered && decreasing && h.len() > 1,
        format!(
            "{}/{} accepted parcels delivered; histogram {:?} ({})",
            delivered.len(),
            accepted.len(),
            h,
            shares.join(" / ")
        ),
    )
}

fn baseline_ordering(seeds: &[u64]) -> (Verdict, RunOutput) {
    let mut wins = 0;
    let mut lines = Vec::new();
    let mut first_hop_run = None;
    for &seed in seeds {
        let cfg = ScenarioConfig { seed, ..ScenarioConfig::default() };
        let runs = run_baseline_matrix(&cfg, &Variant::ALL).unwrap();
        let by: HashMap<&str, &RunOutput> = runs.iter().map(|r| (r.variant.name(), &r.output)).collect();
        let s = |v: &str| &by[v].report.summary;
        let (hop, direct) = (s("combined-hop"), s("combined-direct"));
        let (ih, id) = (s("independent-hop"), s("independent-direct"));
        let served = hop.accepted >= direct.accepted;
        let occupancy = hop.occupancy_rate >= direct.occupancy_rate;
        let profit = hop.profit_per_vehicle_day.min(direct.profit_per_vehicle_day)
            >= ih.profit_per_vehicle_day.max(id.profit_per_vehicle_day);
        let ok = served && occupancy && profit;
        wins += usize::from(ok);
        lines.push(format!(
            "seed {seed}: accepted {}/{} occ {:.3}/{:.3} profit {:.1}/{:.1} vs {:.1}/{:.1} {}",
            hop.accepted,
            direct.accepted,
            hop.occupancy_rate,
            direct.occupancy_rate,
            hop.profit_per_vehicle_day,
            direct.profit_per_vehicle_day,
            ih.profit_per_vehicle_day,
            id.profit_per_vehicle_day,
            if ok { "ok" } else { "miss" }
        ));
        if first_hop_run.is_none() {
            first_hop_run = Some(by["combined-hop"].clone());
        }
    }
    let need = (seeds.len() * 4).div_ceil(5);
    (
        verdict(
            4,
            "baseline ordering",
            wins >= need,
            format!("{wins}/{} seeds ordered as expected [{}]", seeds.len(), lines.join("; ")),
        ),
        first_hop_run.unwrap(),
    )
}

fn poisson() -> Verdict {
    let lambda = 4.0;
    let steps = 10_000u64;
    let (grid, _) = build_grid(&GridConfig::default()).unwrap();
    let clock = SimClock::new(0.0, 1.0, steps).unwrap();
    let cfg = GoodsWorkloadConfig {
        locations: vec![ServiceLocation { zone: ZoneId(44), rate_per_hour: lambda * 60.0 }],
        radius_km: 2.0,
        days: 7,
        seed: 4,
        size_weights: vec![1.0],
    };
    let reqs = generate_goods_requests(&cfg, &clock, &grid, 0).unwrap();
    let mut counts = vec![0u64; steps as usize];
    for r in &reqs {
        counts[r.request_time as usize] += 1;
    }
    let n = steps as f64;
    let mean = counts.iter().sum::<u64>() as f64 / n;
    let var = counts.iter().map(|c| (*c as f64 - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let bound = 3.0 * (lambda / n).sqrt();
    let ratio = var / mean;
    verdict(
        5,
        "poisson generator",
        (mean - lambda).abs() <= bound && (0.9..=1.1).contains(&ratio),
        format!("mean {mean:.4} (|err| {:.4} <= {bound:.4}), variance/mean {ratio:.4}", (mean - lambda).abs()),
    )
}

/// Two states, two actions: action 0 stays, action 1 switches state.
fn toy_mdp() -> (bool, String) {
    let gamma = 0.9;
    let reward = [[1.0, 0.0], [2.0, -1.0]];
    let next = |s: usize, a: usize| if a == 0 { s } else { 1 - s };
    let mut q_star = [[0.0f64; 2]; 2];
    for _ in 0..2000 {
        let v = [q_star[0][0].max(q_star[0][1]), q_star[1][0].max(q_star[1][1])];
        for s in 0..2 {
            for a in 0..2 {
                q_star[s][a] = reward[s][a] + gamma * v[next(s, a)];
            }
        }
    }
    let one_hot = |s: usize| if s == 0 { vec![1.0, 0.0] } else { vec![0.0, 1.0] };
    let batch: Vec<Transition> = (0..4)
        .map(|i| {
            let (s, a) = (i / 2, i % 2);
            Transition {
                state: one_hot(s),
                action: a,
                reward: reward[s][a],
                next_state: one_hot(next(s, a)),
                next_mask: vec![true, true],
                discount: gamma,
            }
        })
        .collect();
    let refs: Vec<&Transition> = batch.iter().collect();
    let cfg = DqnConfig { optimizer: OptimizerKind::Adam, learning_rate: 0.02, target_sync_every: 25, ..DqnConfig::default() };
    let mut q = QFunction::from_network(Mlp::zeros(&[2, 2]), &cfg);
    for _ in 0..40_000 {
        q.train_step(&refs);
    }
    let mut worst: f64 = 0.0;
    for s in 0..2 {
        let got = q.values(&one_hot(s));
        for a in 0..2 {
            worst = worst.max((got[a] - q_star[s][a]).abs() / q_star[s][a].abs());
        }
    }
    (worst <= 0.05, format!("toy MDP worst relative error {:.3}%", 100.0 * worst))
}

fn gradient_check() -> (bool, String) {
    let sizes = [3, 8, 2];
    let cfg = DqnConfig::default();
    let mut r = rng::stream(11, "acceptance-gradient");
    let mut q = QFunction::new(&sizes, &cfg, &mut r);
    assert_eq!(q.online.params().len(), 50);
    // distinct target network so bootstrapped values are nontrivial
    for p in q.online.params_mut() {
        *p += r.random_range(-0.3..0.3);
    }
    let batch: Vec<Transition> = (0..6)
        .map(|_| Transition {
            state: (0..3).map(|_| r.random_range(-1.0..1.0)).collect(),
            action: r.random_range(0..2),
            reward: r.random_range(-2.0..2.0),
            next_state: (0..3).map(|_| r.random_range(-1.0..1.0)).collect(),
            next_mask: vec![true, r.random_bool(0.7)],
            discount: 0.95,
        })
        .collect();
    let refs: Vec<&Transition> = batch.iter().collect();
    let (_, grad) = q.td_loss_and_grad(&refs);
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for i in 0..grad.len() {
        let mut plus = q.clone();
        plus.online.params_mut()[i] += h;
        let mut minus = q.clone();
        minus.online.params_mut()[i] -= h;
        let fd = (plus.td_loss_and_grad(&refs).0 - minus.td_loss_and_grad(&refs).0) / (2.0 * h);
        let scale = fd.abs().max(grad[i].abs());
        if scale > 1e-8 {
            worst = worst.max((fd - grad[i]).abs() / scale);
        }
    }
    (worst <= 1e-4, format!("gradient worst relative error {worst:.2e} over {} params", grad.len()))
}

fn q_learning() -> Verdict {
    let (mdp_ok, mdp) = toy_mdp();
    let (grad_ok, grad) = gradient_check();
    let cfg = ScenarioConfig::default();
    let out = train(&cfg).unwrap();
    let (first, last) = quarter_means(&out.losses).unwrap();
    let loss_ok = last <= 0.5 * first;
    verdict(
        6,
        "q-learning sanity",
        mdp_ok && grad_ok && loss_ok,
        format!(
            "{mdp} [{}]; TD loss first quarter {first:.4}, last quarter {last:.4}, ratio {:.3} (need <= 0.5) [{}]; {grad} [{}]",
            if mdp_ok { "ok" } else { "miss" },
            last / first,
            if loss_ok { "ok" } else { "miss" },
            if grad_ok { "ok" } else { "miss" }
        ),
    )
}

fn dispatch_value() -> Verdict {
    let train_cfg = ScenarioConfig { days: 14, ..ScenarioConfig::default() };
    let net = train(&train_cfg).unwrap().checkpoint.network().unwrap();
    let mut cruising = [0.0, 0.0];
    let seeds = 101..=105u64;
    for seed in seeds.clone() {
        let cfg = ScenarioConfig { seed, ..ScenarioConfig::default() };
        let policies = [Policy::Dqn(Box::new(QFunction::from_network(net.clone(), &cfg.dqn))), Policy::Random];
        for (i, p) in policies.into_iter().enumerate() {
            let mut e = Engine::new(&cfg, p, None).unwrap();
            e.run_to_end();
            cruising[i] += e.report().summary.cruising_min_per_vehicle_day;
        }
    }
    let n = seeds.count() as f64;
    let (dqn, random) = (cruising[0] / n, cruising[1] / n);
    verdict(
        7,
        "dispatch beats random on cruising",
        dqn <= 0.9 * random,
        format!("mean cruising min/vehicle-day: learned {dqn:.1}, random {random:.1}, ratio {:.3}", dqn / random),
    )
}

fn fuzzed_config<R: Rng>(r: &mut R) -> ScenarioConfig {
    let seed = r.random();
    let mut cfg = ScenarioConfig { seed, days: 7, ..ScenarioConfig::default() };
    cfg.grid.seed = seed;
    cfg.grid.weight_jitter = r.random_range(0.0..0.5);
    cfg.fleet.size = r.random_range(5..60);
    cfg.passengers.rate_per_hour = r.random_range(0.0..150.0);
    cfg.goods.rate_per_hour = r.random_range(0.0..20.0);
    cfg.variant = Variant::ALL[r.random_range(0..4)];
    cfg.hops.count = r.random_range(0..30);
    cfg.hops.capacity = r.random_range(1..20);
    cfg.passenger_share = r.random_range(0.1..0.9);
    cfg.forecast.warmup_days = r.random_range(0..3);
    cfg
}

fn invariant_suite() -> Verdict {
    let mut r = rng::stream(8, "acceptance-fuzz");
    let mut failures = Vec::new();
    let configs = 3;
    let mut steps = 0;
    for c in 0..configs {
        let cfg = fuzzed_config(&mut r);
        let run_once = || {
            let mut e = Engine::new(&cfg, Policy::Random, None).unwrap();
            let mut err = None;
            while e.current_step() < cfg.demand_steps() || (e.has_outstanding() && e.current_step() < cfg.demand_steps() + cfg.drain_steps()) {
                e.step_once();
                if let Err(m) = e.check_invariants() {
                    err.get_or_insert(format!("config {c} step {}: {m}", e.current_step()));
                }
            }
            (e, err)
        };
        let (e, err) = run_once();
        steps += e.current_step();
        failures.extend(err);
        let mut legs: HashMap<RequestId, f64> = HashMap::new();
        for ev in e.events() {
            match (&ev.kind, &ev.payload) {
                (EventType::Accept, Payload::Quote { kind, quote, match_km, .. }) => {
                    if *match_km > cfg.matching.radius_km + 1e-9 {
                        failures.push(format!("config {c}: matched from {match_km} km"));
                    }
                    if *kind == RequestKind::Goods && quote.proposed != quote.initial {
                        failures.push(format!("config {c}: goods price moved"));
                    }
                    if quote.proposed < quote.initial {
                        failures.push(format!("config {c}: counter-offer below quote"));
                    }
                }
                (EventType::HopDrop, Payload::Stop { remaining_km, .. }) => {
                    let id = ev.request.unwrap();
                    let req = &e.requests()[id.0 as usize];
                    let before = legs.get(&id).copied().unwrap_or_else(|| e.graph().distance(req.origin, req.destination));
                    if *remaining_km >= before {
                        failures.push(format!("config {c}: hop for {id} did not get closer"));
                    }
                    legs.insert(id, *remaining_km);
                }
                _ => {}
            }
        }
        if e.report().rows.iter().any(|row| !(0.0..=1.0 + 1e-12).contains(&row.occupancy_rate)) {
            failures.push(format!("config {c}: occupancy out of range"));
        }
        if replay(e.events(), cfg.fleet.size, f64::from(cfg.days)) != e.report() {
            failures.push(format!("config {c}: replay differs"));
        }
        let (again, _) = run_once();
        if again.events() != e.events() {
            failures.push(format!("config {c}: rerun not bit-identical"));
        }
    }
    verdict(
        8,
        "invariant suite",
        failures.is_empty(),
        if failures.is_empty() {
            format!("{configs} fuzzed 7-day configs, {steps} steps checked")
        } else {
            failures.into_iter().take(5).collect::<Vec<_>>().join("; ")
        },
    )
}

fn main() {
    // libtest-style flags (e.g. --nocapture) are accepted and ignored
    let started = Instant::now();
    let mut verdicts: Vec<Verdict> = std::thread::scope(|s| {
        let quick = s.spawn(|| vec![insertion_vs_oracle(), six_orderings(), poisson()]);
        let matrix = s.spawn(|| {
            let (v4, hop_run) = baseline_ordering(&[1, 2, 3, 4, 5]);
            vec![hop_histogram(&hop_run), v4]
        });
        let learn = s.spawn(|| vec![q_learning()]);
        let value = s.spawn(dispatch_value);
        let fuzz = s.spawn(invariant_suite);
        let mut all = Vec::new();
        for h in [quick, matrix, learn] {
            all.extend(h.join().expect("criterion panicked"));
        }
        all.push(value.join().expect("criterion panicked"));
        all.push(fuzz.join().expect("criterion panicked"));
        all
    });
    verdicts.sort_by_key(|v| v.id);
    let mut failed = 0;
    for v in &verdicts {
        println!("criterion {} {}: {} - {}", v.id, v.name, if v.pass { "PASS" } else { "FAIL" }, v.detail);
        failed += usize::from(!v.pass);
    }
    println!("acceptance: {}/{} passed in {:.0?}", verdicts.len() - failed, verdicts.len(), started.elapsed());
    if failed > 0 {
        std::process::exit(1);
    }
}
