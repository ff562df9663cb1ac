//! Feature layout for the dispatch value function and the zone action space.

use serde::{Deserialize, Serialize};

use crate::city::{ZoneGrid, ZoneId};
use crate::demand::DemandForecast;
use crate::error::{Error, Result};
use crate::fleet::SupplyForecast;

/// Fixed description of the state vector and action set for one run.
///
/// Layout: `[x, y, seats, trunk, supply[k][zone]..., demand[k][zone]...]`
/// where position is the zone center normalized to (0, 1) and every other
/// block is divided by its scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateLayout {
    pub width: u32,
    pub height: u32,
    pub horizon: usize,
    /// Actions reach zones up to this many cells away on each axis.
    pub action_radius: u32,
    pub seat_scale: f64,
    pub trunk_scale: f64,
    pub supply_scale: f64,
    pub demand_scale: f64,
}

impl StateLayout {
    pub fn new(grid: &ZoneGrid, horizon: usize, action_radius: u32) -> Self {
        Self {
            width: grid.width(),
            height: grid.height(),
            horizon,
            action_radius,
            seat_scale: 8.0,
            trunk_scale: 8.0,
            supply_scale: 1.0,
            demand_scale: 1.0,
        }
    }

    pub fn zones(&self) -> usize {
        (self.width * self.height) as usize
    }

    pub fn feature_len(&self) -> usize {
        4 + 2 * self.horizon * self.zones()
    }

    pub fn side(&self) -> u32 {
        2 * self.action_radius + 1
    }

    pub fn action_count(&self) -> usize {
        (self.side() * self.side()) as usize
    }

    fn cell(&self, zone: ZoneId) -> (i64, i64) {
        (i64::from(zone.0 % self.width), i64::from(zone.0 / self.width))
    }

    /// Target zone of `action` taken from `from`, if it lies on the grid.
    pub fn action_target(&self, from: ZoneId, action: usize) -> Option<ZoneId> {
        if action >= self.action_count() {
            return None;
        }
        let side = self.side() as usize;
        let r = i64::from(self.action_radius);
        let dx = (action % side) as i64 - r;
        let dy = (action / side) as i64 - r;
        let (c, row) = self.cell(from);
        let (nc, nr) = (c + dx, row + dy);
        let inside = (0..i64::from(self.width)).contains(&nc) && (0..i64::from(self.height)).contains(&nr);
        inside.then(|| ZoneId((nr * i64::from(self.width) + nc) as u32))
    }

    /// Action index moving from `from` to `to`, if within reach.
    pub fn action_to(&self, from: ZoneId, to: ZoneId) -> Option<usize> {
        let (c0, r0) = self.cell(from);
        let (c1, r1) = self.cell(to);
        let r = i64::from(self.action_radius);
        let (dx, dy) = (c1 - c0, r1 - r0);
        (dx.abs() <= r && dy.abs() <= r).then(|| ((dy + r) * i64::from(self.side()) + dx + r) as usize)
    }

    pub fn stay_action(&self) -> usize {
        self.action_count() / 2
    }

    pub fn action_mask(&self, from: ZoneId) -> Vec<bool> {
        (0..self.action_count()).map(|a| self.action_target(from, a).is_some()).collect()
    }

    pub fn describe(&self) -> String {
        format!(
            "grid {}x{}, horizon {}, action radius {}",
            self.width, self.height, self.horizon, self.action_radius
        )
    }

    /// Layouts are interchangeable when grid, horizon and action set agree.
    pub fn ensure_compatible(&self, expected: &StateLayout) -> Result<()> {
        let same = self.width == expected.width
            && self.height == expected.height
            && self.horizon == expected.horizon
            && self.action_radius == expected.action_radius;
        if same {
            Ok(())
        } else {
            Err(Error::LayoutMismatch {
                found: self.describe(),
                expected: expected.describe(),
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VehicleFeatures {
    pub zone: ZoneId,
    pub free_seats: u32,
    pub free_trunk: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodedState {
    pub zone: ZoneId,
    pub free_seats: u32,
    pub free_trunk: u32,
    pub supply: Vec<f64>,
    pub demand: Vec<f64>,
}

impl DecodedState {
    /// Forecast demand in `zone` summed over the horizon.
    pub fn demand_total(&self, zones: usize, zone: ZoneId) -> f64 {
        self.demand.iter().skip(zone.index()).step_by(zones).sum()
    }
}

pub fn encode_state(
    layout: &StateLayout,
    vehicle: &VehicleFeatures,
    supply: &SupplyForecast,
    demand: &DemandForecast,
) -> Result<Vec<f64>> {
    if supply.horizon() != demand.horizon() || supply.horizon() != layout.horizon {
        return Err(Error::HorizonMismatch {
            supply: supply.horizon(),
            demand: demand.horizon(),
        });
    }
    let zones = layout.zones();
    if supply.zones() != zones || demand.zones() != zones {
        return Err(Error::LayoutMismatch {
            found: format!("{} supply zones, {} demand zones", supply.zones(), demand.zones()),
            expected: layout.describe(),
        });
    }
    let mut out = Vec::with_capacity(layout.feature_len());
    out.extend_from_slice(&position(layout, vehicle.zone));
    out.push(f64::from(vehicle.free_seats) / layout.seat_scale);
    out.push(f64::from(vehicle.free_trunk) / layout.trunk_scale);
    out.extend(supply.values().iter().map(|v| v / layout.supply_scale));
    out.extend(demand.values().iter().map(|v| v / layout.demand_scale));
    Ok(out)
}

fn position(layout: &StateLayout, zone: ZoneId) -> [f64; 2] {
    let (c, r) = layout.cell(zone);
    [
        (c as f64 + 0.5) / f64::from(layout.width),
        (r as f64 + 0.5) / f64::from(layout.height),
    ]
}

/// Overwrite the position block so `features` describes a vehicle in `zone`.
pub fn place_at(layout: &StateLayout, features: &mut [f64], zone: ZoneId) {
    features[..2].copy_from_slice(&position(layout, zone));
}

pub fn decode_state(layout: &StateLayout, features: &[f64]) -> DecodedState {
    let zones = layout.zones();
    let block = layout.horizon * zones;
    let col = ((features[0] * f64::from(layout.width)).floor() as u32).min(layout.width - 1);
    let row = ((features[1] * f64::from(layout.height)).floor() as u32).min(layout.height - 1);
    DecodedState {
        zone: ZoneId(row * layout.width + col),
        free_seats: (features[2] * layout.seat_scale).round() as u32,
        free_trunk: (features[3] * layout.trunk_scale).round() as u32,
        supply: features[4..4 + block].iter().map(|v| v * layout.supply_scale).collect(),
        demand: features[4 + block..4 + 2 * block]
            .iter()
            .map(|v| v * layout.demand_scale)
            .collect(),
    }
}
