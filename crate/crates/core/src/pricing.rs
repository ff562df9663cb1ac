//! Trip pricing: platform base quote, destination-rank surcharge, passenger
//! utility and the accept/reject decision.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::city::ZoneId;
use crate::demand::RequestId;
use crate::error::{Error, Result};
use crate::fleet::VehicleTypeSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Comparator {
    /// Accept when utility reaches the flexibility-weighted price.
    UtilityAtLeastPrice,
    /// Accept when utility falls below it.
    UtilityBelowPrice,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PricingConfig {
    /// Money per shared km.
    pub distance_weight: f64,
    /// Multiplier on the per-km fuel cost.
    pub fuel_weight: f64,
    /// Discount per minute of waiting.
    pub wait_discount: f64,
    /// Money per fuel unit.
    pub gas_price: f64,
    pub sharing_weight: f64,
    pub waiting_weight: f64,
    pub vehicle_type_weight: f64,
    pub flexibility_min: f64,
    pub flexibility_max: f64,
    /// Utility units per unit of money in the decision rule.
    pub utility_per_money: f64,
    /// Number of top-ranked zones where no surcharge applies.
    pub hotspot_count: usize,
    pub ranking_refresh_min: f64,
    pub comparator: Comparator,
}

impl Default for PricingConfig {
    fn default() -> Self {
        Self {
            distance_weight: 1.0,
            fuel_weight: 0.5,
            wait_discount: 0.05,
            gas_price: 1.5,
            sharing_weight: 1.0,
            waiting_weight: 4.0,
            vehicle_type_weight: 1.0,
            flexibility_min: 0.3,
            flexibility_max: 0.6,
            utility_per_money: 0.4,
            hotspot_count: 10,
            ranking_refresh_min: 5.0,
            comparator: Comparator::UtilityAtLeastPrice,
        }
    }
}

impl PricingConfig {
    pub fn validate(&self) -> Result<()> {
        let nonneg = [
            self.distance_weight,
            self.fuel_weight,
            self.wait_discount,
            self.gas_price,
            self.sharing_weight,
            self.waiting_weight,
            self.vehicle_type_weight,
            self.utility_per_money,
        ];
        if nonneg.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(Error::Config("pricing: weights must be finite and nonnegative".into()));
        }
        if !(self.flexibility_min > 0.0 && self.flexibility_min <= self.flexibility_max) {
            return Err(Error::Config("pricing: need 0 < flexibility_min <= flexibility_max".into()));
        }
        if self.hotspot_count == 0 {
            return Err(Error::Config("pricing: hotspot_count must be at least 1".into()));
        }
        if !(self.ranking_refresh_min > 0.0) {
            return Err(Error::Config("pricing: ranking_refresh_min must be positive".into()));
        }
        Ok(())
    }

    pub fn draw_profile<R: Rng + ?Sized>(&self, rng: &mut R) -> PassengerProfile {
        let flexibility = if self.flexibility_max > self.flexibility_min {
            rng.random_range(self.flexibility_min..self.flexibility_max)
        } else {
            self.flexibility_min
        };
        PassengerProfile {
            sharing_weight: self.sharing_weight,
            waiting_weight: self.waiting_weight,
            vehicle_type_weight: self.vehicle_type_weight,
            flexibility,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PassengerProfile {
    pub sharing_weight: f64,
    pub waiting_weight: f64,
    pub vehicle_type_weight: f64,
    pub flexibility: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriceQuote {
    pub request: RequestId,
    pub initial: f64,
    pub proposed: f64,
    pub route_cost_km: f64,
    pub occupancy: usize,
}

/// Zones ordered from most to least valuable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HotspotRanking {
    pub order: Vec<ZoneId>,
    /// 0-based rank of each zone, indexed by zone.
    pub rank: Vec<usize>,
    pub top_count: usize,
}

impl HotspotRanking {
    /// Sort zones by descending value; equal values keep ascending zone id.
    pub fn from_values(values: &[f64], top_count: usize) -> Self {
        let mut order: Vec<ZoneId> = (0..values.len() as u32).map(ZoneId).collect();
        order.sort_by(|a, b| values[b.index()].total_cmp(&values[a.index()]).then(a.cmp(b)));
        let mut rank = vec![0; values.len()];
        for (pos, z) in order.iter().enumerate() {
            rank[z.index()] = pos;
        }
        Self {
            order,
            rank,
            top_count: top_count.min(values.len()),
        }
    }

    /// All values equal, so zones rank in id order.
    pub fn flat(zones: usize, top_count: usize) -> Self {
        Self::from_values(&vec![0.0; zones], top_count)
    }

    pub fn zone_count(&self) -> usize {
        self.rank.len()
    }

    pub fn rank_of(&self, zone: ZoneId) -> usize {
        self.rank[zone.index()]
    }

    pub fn in_top(&self, zone: ZoneId) -> bool {
        self.rank_of(zone) < self.top_count
    }

    pub fn top(&self) -> &[ZoneId] {
        &self.order[..self.top_count]
    }
}

/// Platform quote for one request on the updated route, never below the
/// vehicle's base fare.
pub fn initial_price(
    route_cost_km: f64,
    occupancy: usize,
    vehicle: &VehicleTypeSpec,
    wait_min: f64,
    cfg: &PricingConfig,
) -> f64 {
    let shared_km = route_cost_km / occupancy.max(1) as f64;
    let fuel_per_km = cfg.gas_price / vehicle.mileage_km;
    let raw = vehicle.base_price + cfg.distance_weight * shared_km + cfg.fuel_weight * shared_km * fuel_per_km
        - cfg.wait_discount * wait_min;
    raw.max(vehicle.base_price)
}

/// Vehicle counter-offer: unchanged for top-ranked destinations, otherwise
/// surcharged in proportion to how poorly the destination zone ranks.
pub fn proposed_price(initial: f64, destination: ZoneId, ranking: &HotspotRanking, vehicle: &VehicleTypeSpec) -> f64 {
    if ranking.in_top(destination) {
        return initial;
    }
    let rank = ranking.rank_of(destination) as f64 / ranking.zone_count() as f64;
    initial * (1.0 + rank / 2.0 * vehicle.surge)
}

/// Utility of a ride given the number of requests sharing it, the vehicle
/// type ordinal and the expected wait.
pub fn passenger_utility(profile: &PassengerProfile, occupancy: usize, type_ordinal: u32, wait_min: f64) -> f64 {
    profile.sharing_weight / occupancy.max(1) as f64
        + profile.waiting_weight / wait_min.max(1.0)
        + profile.vehicle_type_weight / f64::from(type_ordinal.max(1))
}

pub fn decide(utility: f64, price: f64, flexibility: f64, cfg: &PricingConfig) -> bool {
    let threshold = price * flexibility * cfg.utility_per_money;
    match cfg.comparator {
        Comparator::UtilityAtLeastPrice => utility >= threshold,
        Comparator::UtilityBelowPrice => utility < threshold,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fleet::{default_vehicle_types, VehicleType};

    fn spec(base: f64, mileage: f64) -> VehicleTypeSpec {
        VehicleTypeSpec {
            kind: VehicleType::Sedan,
            seats: 4,
            trunk: 5,
            base_price: base,
            mileage_km: mileage,
            surge: 0.8,
            share: 1.0,
        }
    }

    fn cfg() -> PricingConfig {
        PricingConfig {
            gas_price: 1.0,
            ..PricingConfig::default()
        }
    }

    #[test]
    fn initial_price_cases() {
        let v = spec(2.0, 5.0);
        assert_eq!(initial_price(0.0, 1, &v, 0.0, &cfg()), 2.0);
        assert!((initial_price(6.0, 2, &v, 4.0, &cfg()) - 5.1).abs() < 1e-12);
        assert_eq!(initial_price(6.0, 2, &v, 1e6, &cfg()), 2.0);
    }

    #[test]
    fn proposed_price_cases() {
        let v = spec(2.0, 5.0);
        let values: Vec<f64> = (0..10).map(|i| -(i as f64)).collect();
        let ranking = HotspotRanking::from_values(&values, 1);
        assert_eq!(proposed_price(5.1, ZoneId(0), &ranking, &v), 5.1);
        assert!((proposed_price(5.1, ZoneId(5), &ranking, &v) - 6.12).abs() < 1e-12);
        let none_top = HotspotRanking { top_count: 0, ..ranking };
        assert_eq!(proposed_price(5.1, ZoneId(0), &none_top, &v), 5.1);
    }

    #[test]
    fn ranking_order_and_ties() {
        let r = HotspotRanking::from_values(&[1.0, 3.0, 2.0], 1);
        assert_eq!(r.order, vec![ZoneId(1), ZoneId(2), ZoneId(0)]);
        assert_eq!(r.top(), &[ZoneId(1)]);
        let flat = HotspotRanking::flat(4, 2);
        assert_eq!(flat.order, vec![ZoneId(0), ZoneId(1), ZoneId(2), ZoneId(3)]);
        let one = HotspotRanking::from_values(&[7.0], 3);
        assert_eq!(one.rank_of(ZoneId(0)), 0);
        assert!(one.in_top(ZoneId(0)));
    }

    #[test]
    fn utility_cases() {
        let zero = PassengerProfile {
            sharing_weight: 0.0,
            waiting_weight: 0.0,
            vehicle_type_weight: 0.0,
            flexibility: 0.5,
        };
        assert_eq!(passenger_utility(&zero, 1, 1, 3.0), 0.0);
        let p = PassengerProfile {
            sharing_weight: 1.0,
            waiting_weight: 4.0,
            vehicle_type_weight: 1.0,
            flexibility: 0.5,
        };
        assert_eq!(passenger_utility(&p, 2, 1, 4.0), 2.5);
        let guard = PassengerProfile {
            sharing_weight: 0.0,
            vehicle_type_weight: 0.0,
            ..p
        };
        assert_eq!(passenger_utility(&guard, 1, 1, 0.0), 4.0);
    }

    #[test]
    fn decision_cases() {
        let c = PricingConfig {
            utility_per_money: 1.0,
            ..PricingConfig::default()
        };
        assert!(!decide(0.0, 1.0, 0.5, &c));
        assert!(decide(2.5, 5.0, 0.5, &c));
        assert!(!decide(2.5, 6.0, 0.5, &c));
        let flipped = PricingConfig {
            comparator: Comparator::UtilityBelowPrice,
            ..c
        };
        assert!(decide(2.5, 6.0, 0.5, &flipped));
    }

    #[test]
    fn type_ordinals_follow_table() {
        let ords: Vec<u32> = default_vehicle_types().iter().map(|t| t.kind.ordinal()).collect();
        assert_eq!(ords, vec![1, 2, 4, 3]);
    }
}
