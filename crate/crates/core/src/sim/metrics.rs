use std::io::Write;

use serde::{Deserialize, Serialize};

use super::events::{Event, EventType, Payload};
use crate::demand::RequestKind;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRow {
    pub step: u64,
    pub time_min: f64,
    pub generated: u64,
    pub accepted: u64,
    pub rejected: u64,
    pub pending: u64,
    pub pending_legs: u64,
    pub occupied_vehicles: u64,
    pub active_vehicles: u64,
    pub profit: f64,
    pub cruising_min: f64,
    pub travel_km: f64,
    pub occupancy_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub fleet_size: usize,
    pub days: f64,
    pub steps: u64,
    pub generated: u64,
    pub accepted: u64,
    pub rejected: u64,
    pub pending: u64,
    pub accept_rate: f64,
    pub declined_offers: u64,
    pub failed_insertions: u64,
    pub delivered_passengers: u64,
    pub delivered_goods: u64,
    pub hop_drops: u64,
    pub revenue: f64,
    pub fuel_cost: f64,
    pub profit_per_vehicle_day: f64,
    pub travel_km: f64,
    pub cruising_min: f64,
    pub cruising_min_per_vehicle_day: f64,
    pub occupied_min: f64,
    pub working_min: f64,
    pub occupancy_rate: f64,
    /// Delivered parcels by number of hop-zone stops.
    pub hop_histogram: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub rows: Vec<StepRow>,
    pub summary: Summary,
}

/// Builds a report from the event stream alone, so a recorded log can be
/// replayed into the same report.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricsCollector {
    rows: Vec<StepRow>,
    generated: u64,
    accepted: u64,
    rejected: u64,
    declined: u64,
    failed: u64,
    delivered_passengers: u64,
    delivered_goods: u64,
    hop_drops: u64,
    hops: Vec<u64>,
    revenue: f64,
    fuel: f64,
    travel_km: f64,
    cruising_min: f64,
    occupied_min: f64,
    working_min: f64,
}

impl MetricsCollector {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn pending(&self) -> u64 {
        self.generated - self.accepted - self.rejected
    }

    pub fn accepted(&self) -> u64 {
        self.accepted
    }

    pub fn accept_rate(&self) -> f64 {
        ratio(self.accepted as f64, self.generated as f64)
    }

    pub fn occupancy_rate(&self) -> f64 {
        ratio(self.occupied_min, self.working_min)
    }

    pub fn apply(&mut self, e: &Event) {
        match (&e.kind, &e.payload) {
            (EventType::Request, _) => self.generated += 1,
            (EventType::Reject, _) => self.rejected += 1,
            (EventType::Accept, Payload::Quote { first, .. }) => {
                if *first {
                    self.accepted += 1;
                }
            }
            (EventType::Decline, _) => self.declined += 1,
            (EventType::InsertFailed, _) => self.failed += 1,
            (EventType::Dropoff, Payload::Stop { kind, hop_count, .. }) => match kind {
                RequestKind::Passenger => self.delivered_passengers += 1,
                RequestKind::Goods => {
                    self.delivered_goods += 1;
                    let h = *hop_count as usize;
                    if self.hops.len() <= h {
                        self.hops.resize(h + 1, 0);
                    }
                    self.hops[h] += 1;
                }
            },
            (EventType::HopDrop, _) => self.hop_drops += 1,
            (EventType::Tick, Payload::Tick(t)) => {
                self.travel_km += t.travel_km;
                self.cruising_min += t.cruising_min;
                self.occupied_min += t.occupied_min;
                self.working_min += t.working_min;
                self.revenue += t.revenue;
                self.fuel += t.fuel_cost;
                self.rows.push(StepRow {
                    step: e.step,
                    time_min: t.time_min,
                    generated: self.generated,
                    accepted: self.accepted,
                    rejected: self.rejected,
                    pending: self.pending(),
                    pending_legs: t.pending_legs,
                    occupied_vehicles: t.occupied_vehicles,
                    active_vehicles: t.active_vehicles,
                    profit: self.revenue - self.fuel,
                    cruising_min: self.cruising_min,
                    travel_km: self.travel_km,
                    occupancy_rate: self.occupancy_rate(),
                });
            }
            _ => {}
        }
    }

    pub fn finish(&self, fleet_size: usize, days: f64) -> MetricsReport {
        let vehicle_days = fleet_size as f64 * days;
        let per_vd = |x: f64| if vehicle_days > 0.0 { x / vehicle_days } else { 0.0 };
        let mut hop_histogram = self.hops.clone();
        if hop_histogram.is_empty() {
            hop_histogram.push(0);
        }
        MetricsReport {
            rows: self.rows.clone(),
            summary: Summary {
                fleet_size,
                days,
                steps: self.rows.len() as u64,
                generated: self.generated,
                accepted: self.accepted,
                rejected: self.rejected,
                pending: self.pending(),
                accept_rate: self.accept_rate(),
                declined_offers: self.declined,
                failed_insertions: self.failed,
                delivered_passengers: self.delivered_passengers,
                delivered_goods: self.delivered_goods,
                hop_drops: self.hop_drops,
                revenue: self.revenue,
                fuel_cost: self.fuel,
                profit_per_vehicle_day: per_vd(self.revenue - self.fuel),
                travel_km: self.travel_km,
                cruising_min: self.cruising_min,
                cruising_min_per_vehicle_day: per_vd(self.cruising_min),
                occupied_min: self.occupied_min,
                working_min: self.working_min,
                occupancy_rate: self.occupancy_rate(),
                hop_histogram,
            },
        }
    }
}

fn ratio(a: f64, b: f64) -> f64 {
    if b > 0.0 { a / b } else { 0.0 }
}

/// Rebuild a report from a recorded event log.
pub fn replay(events: &[Event], fleet_size: usize, days: f64) -> MetricsReport {
    let mut c = MetricsCollector::new();
    for e in events {
        c.apply(e);
    }
    c.finish(fleet_size, days)
}

impl MetricsReport {
    /// One row per step, then a `# summary` block of `key,value` lines.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let err = |e: csv::Error| Error::Config(format!("writing metrics: {e}"));
        let mut w = csv::Writer::from_writer(out);
        if self.rows.is_empty() {
            w.write_record([
                "step",
                "time_min",
                "generated",
                "accepted",
                "rejected",
                "pending",
                "pending_legs",
                "occupied_vehicles",
                "active_vehicles",
                "profit",
                "cruising_min",
                "travel_km",
                "occupancy_rate",
            ])
            .map_err(err)?;
        }
        for r in &self.rows {
            w.serialize(r).map_err(err)?;
        }
        let mut out = w.into_inner().map_err(|e| Error::Config(format!("writing metrics: {e}")))?;
        let io = |e: std::io::Error| Error::Config(format!("writing metrics: {e}"));
        writeln!(out, "# summary").map_err(io)?;
        for (k, v) in self.summary_pairs() {
            writeln!(out, "{k},{v}").map_err(io)?;
        }
        out.flush().map_err(io)
    }

    pub fn summary_pairs(&self) -> Vec<(&'static str, String)> {
        let s = &self.summary;
        let hist = s.hop_histogram.iter().map(u64::to_string).collect::<Vec<_>>().join(";");
        vec![
            ("fleet_size", s.fleet_size.to_string()),
            ("days", s.days.to_string()),
            ("steps", s.steps.to_string()),
            ("generated", s.generated.to_string()),
            ("accepted", s.accepted.to_string()),
            ("rejected", s.rejected.to_string()),
            ("pending", s.pending.to_string()),
            ("accept_rate", s.accept_rate.to_string()),
            ("declined_offers", s.declined_offers.to_string()),
            ("failed_insertions", s.failed_insertions.to_string()),
            ("delivered_passengers", s.delivered_passengers.to_string()),
            ("delivered_goods", s.delivered_goods.to_string()),
            ("hop_drops", s.hop_drops.to_string()),
            ("revenue", s.revenue.to_string()),
            ("fuel_cost", s.fuel_cost.to_string()),
            ("profit_per_vehicle_day", s.profit_per_vehicle_day.to_string()),
            ("travel_km", s.travel_km.to_string()),
            ("cruising_min", s.cruising_min.to_string()),
            ("cruising_min_per_vehicle_day", s.cruising_min_per_vehicle_day.to_string()),
            ("occupancy_rate", s.occupancy_rate.to_string()),
            ("hop_histogram", hist),
        ]
    }
}
