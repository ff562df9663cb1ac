//! Greedy nearest-vehicle assignment of pending requests.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::city::{RoadGraph, ZoneId};
use crate::demand::{Request, RequestId, RequestKind};
use crate::fleet::{Vehicle, VehicleId};

pub const DEFAULT_MATCH_RADIUS_KM: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub request: RequestId,
    pub vehicle: VehicleId,
    /// Network km from the vehicle's provisional position to the pickup.
    pub distance_km: f64,
    pub eta_min: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AssignmentBatch {
    /// Assignments in the order they were made.
    pub assignments: Vec<Assignment>,
    /// Requests with no vehicle in range this step.
    pub unmatched: Vec<RequestId>,
}

impl AssignmentBatch {
    /// Requests per vehicle, each list ordered by proximity to the vehicle's
    /// position before matching (ties keep assignment order). `pickup_of`
    /// gives the zone each assigned request is picked up from.
    pub fn per_vehicle(
        &self,
        vehicles: &[Vehicle],
        pickup_of: impl Fn(RequestId) -> ZoneId,
        graph: &RoadGraph,
    ) -> BTreeMap<VehicleId, Vec<RequestId>> {
        let mut out: BTreeMap<VehicleId, Vec<(f64, RequestId)>> = BTreeMap::new();
        for a in &self.assignments {
            let v = vehicles.iter().find(|v| v.id == a.vehicle).expect("assigned vehicle present");
            let d = v.to_loc_km + graph.distance(v.loc, pickup_of(a.request));
            out.entry(a.vehicle).or_default().push((d, a.request));
        }
        out.into_iter()
            .map(|(v, mut list)| {
                list.sort_by(|a, b| a.0.total_cmp(&b.0));
                (v, list.into_iter().map(|(_, r)| r).collect())
            })
            .collect()
    }

    pub fn vehicle_for(&self, request: RequestId) -> Option<VehicleId> {
        self.assignments.iter().find(|a| a.request == request).map(|a| a.vehicle)
    }
}

#[derive(Debug, Clone, Copy)]
struct Provisional {
    id: VehicleId,
    loc: ZoneId,
    offset_km: f64,
    seats: u32,
    trunk: u32,
}

impl Provisional {
    fn residual(&self, kind: RequestKind) -> u32 {
        match kind {
            RequestKind::Passenger => self.seats,
            RequestKind::Goods => self.trunk,
        }
    }

    fn consume(&mut self, kind: RequestKind, size: u32) {
        match kind {
            RequestKind::Passenger => self.seats -= size,
            RequestKind::Goods => self.trunk -= size,
        }
    }
}

/// Assign each request, earliest first, to the in-range vehicle with the
/// smallest ETA to its pickup. The winner's provisional position moves to
/// the pickup and its residual capacity shrinks, so later requests in the
/// same step see the updated fleet.
pub fn greedy_match<'a>(
    vehicles: &[Vehicle],
    pending: impl IntoIterator<Item = &'a Request>,
    graph: &RoadGraph,
    speed_km_per_min: f64,
    radius_km: f64,
) -> AssignmentBatch {
    let mut fleet: Vec<Provisional> = vehicles
        .iter()
        .filter(|v| v.is_available())
        .map(|v| Provisional {
            id: v.id,
            loc: v.loc,
            offset_km: v.to_loc_km,
            seats: v.residual(RequestKind::Passenger),
            trunk: v.residual(RequestKind::Goods),
        })
        .collect();
    fleet.sort_by_key(|p| p.id);

    let mut queue: Vec<&Request> = pending.into_iter().collect();
    queue.sort_by(|a, b| a.request_time.total_cmp(&b.request_time).then(a.id.cmp(&b.id)));

    let mut batch = AssignmentBatch::default();
    for r in queue {
        let mut best: Option<(usize, f64)> = None;
        for (i, p) in fleet.iter().enumerate() {
            if p.residual(r.kind) < r.size {
                continue;
            }
            let d = p.offset_km + graph.distance(p.loc, r.current);
            if d > radius_km {
                continue;
            }
            // strict: earlier (lower-id) vehicle keeps ties
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((i, d));
            }
        }
        match best {
            Some((i, d)) => {
                let p = &mut fleet[i];
                batch.assignments.push(Assignment {
                    request: r.id,
                    vehicle: p.id,
                    distance_km: d,
                    eta_min: d / speed_km_per_min,
                });
                p.loc = r.current;
                p.offset_km = 0.0;
                p.consume(r.kind, r.size);
            }
            None => batch.unmatched.push(r.id),
        }
    }
    batch
}
