use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::city::ZoneId;
use crate::demand::{RequestId, RequestKind};
use crate::error::{Error, Result};
use crate::fleet::VehicleId;
use crate::pricing::PriceQuote;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventType {
    /// A new request entered the system.
    Request,
    /// An unaccepted request aged out.
    Reject,
    /// A quote was accepted and the request committed to a route.
    Accept,
    /// A passenger turned down the proposed price.
    Decline,
    /// No capacity-feasible slot in the matched vehicle's route.
    InsertFailed,
    Pickup,
    Dropoff,
    HopDrop,
    Dispatch,
    /// End-of-step fleet accounting.
    Tick,
}

/// Per-step fleet totals, summed over vehicles.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TickDelta {
    pub time_min: f64,
    pub pending_legs: u64,
    pub occupied_vehicles: u64,
    pub active_vehicles: u64,
    pub travel_km: f64,
    pub cruising_min: f64,
    pub occupied_min: f64,
    pub working_min: f64,
    pub revenue: f64,
    pub fuel_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Payload {
    None,
    Request {
        kind: RequestKind,
        size: u32,
    },
    Quote {
        kind: RequestKind,
        quote: PriceQuote,
        /// Network km from the vehicle to the pickup when matched.
        match_km: f64,
        /// Where this leg ends.
        drop: ZoneId,
        /// First commitment of the original request.
        first: bool,
    },
    Stop {
        kind: RequestKind,
        size: u32,
        hop_count: u32,
        /// Price credited for the finished leg.
        revenue: f64,
        /// Network km still separating the parcel from its destination.
        remaining_km: f64,
    },
    Dispatch {
        target: ZoneId,
        action: usize,
    },
    Tick(TickDelta),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub step: u64,
    #[serde(rename = "type")]
    pub kind: EventType,
    pub vehicle: Option<VehicleId>,
    pub request: Option<RequestId>,
    pub zone: Option<ZoneId>,
    pub payload: Payload,
}

pub fn write_jsonl<W: Write>(mut out: W, events: &[Event]) -> std::io::Result<()> {
    for e in events {
        serde_json::to_writer(&mut out, e)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn read_jsonl<R: BufRead>(input: R, path: &std::path::Path) -> Result<Vec<Event>> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}
