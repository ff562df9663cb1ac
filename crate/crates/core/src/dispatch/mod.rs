//! Learned repositioning of idle vehicles and the zone ranking used by
//! pricing.

pub mod network;
pub mod policy;
pub mod q;
pub mod replay;
pub mod reward;
pub mod state;

pub use network::{Mlp, OptimizerKind};
pub use policy::{dispatch_idle, select_action, DispatchAction, DispatchQuery, Policy, PolicyKind};
pub use q::{Checkpoint, DqnConfig, QFunction};
pub use replay::{EpsilonSchedule, ReplayBuffer, Transition};
pub use reward::{compute_reward, RewardBreakdown, RewardWeights, StepSummary};
pub use state::{decode_state, encode_state, place_at, DecodedState, StateLayout, VehicleFeatures};

use crate::city::ZoneId;
use crate::demand::DemandForecast;
use crate::pricing::HotspotRanking;

/// Rank zones by the best action value of a vehicle placed in each zone,
/// all other features taken from `template`.
pub fn rank_zones(net: &Mlp, layout: &StateLayout, template: &[f64], top_count: usize) -> HotspotRanking {
    let mut s = template.to_vec();
    let values: Vec<f64> = (0..layout.zones() as u32)
        .map(|z| {
            let zone = ZoneId(z);
            place_at(layout, &mut s, zone);
            let q = net.forward(&s);
            (0..q.len())
                .filter(|a| layout.action_target(zone, *a).is_some())
                .map(|a| q[a])
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    HotspotRanking::from_values(&values, top_count)
}

/// Rank zones by forecast demand over the horizon.
pub fn rank_by_demand(demand: &DemandForecast, top_count: usize) -> HotspotRanking {
    let values: Vec<f64> = (0..demand.zones() as u32).map(|z| demand.zone_total(ZoneId(z))).collect();
    HotspotRanking::from_values(&values, top_count)
}
