use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::network::Mlp;
use super::q::QFunction;
use super::state::{decode_state, StateLayout};
use crate::city::ZoneId;
use crate::fleet::VehicleId;

/// How idle and newly entered vehicles pick a zone to move to.
#[derive(Debug, Clone, PartialEq)]
pub enum Policy {
    Dqn(Box<QFunction>),
    Random,
    NearestDemand,
}

impl Policy {
    pub fn kind(&self) -> PolicyKind {
        match self {
            Policy::Dqn(_) => PolicyKind::Dqn,
            Policy::Random => PolicyKind::Random,
            Policy::NearestDemand => PolicyKind::NearestDemand,
        }
    }

    pub fn network(&self) -> Option<&Mlp> {
        match self {
            Policy::Dqn(q) => Some(&q.online),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    Dqn,
    Random,
    NearestDemand,
}

impl PolicyKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PolicyKind::Dqn => "dqn",
            PolicyKind::Random => "random",
            PolicyKind::NearestDemand => "nearest-demand",
        }
    }
}

impl FromStr for PolicyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "dqn" => Ok(PolicyKind::Dqn),
            "random" => Ok(PolicyKind::Random),
            "nearest-demand" => Ok(PolicyKind::NearestDemand),
            other => Err(format!("unknown policy `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DispatchAction {
    pub vehicle: VehicleId,
    pub action: usize,
    pub target: ZoneId,
}

/// A vehicle asking where to go, with its encoded state.
#[derive(Debug, Clone, PartialEq)]
pub struct DispatchQuery {
    pub vehicle: VehicleId,
    pub zone: ZoneId,
    pub state: Vec<f64>,
}

fn uniform_valid<R: Rng + ?Sized>(mask: &[bool], rng: &mut R) -> usize {
    let valid: Vec<usize> = (0..mask.len()).filter(|a| mask[*a]).collect();
    valid[rng.random_range(0..valid.len())]
}

/// Best valid action by value; equal values go to the lowest target zone.
pub fn greedy_action(values: &[f64], layout: &StateLayout, zone: ZoneId) -> usize {
    let mut best: Option<(f64, ZoneId, usize)> = None;
    for (a, v) in values.iter().enumerate() {
        let Some(target) = layout.action_target(zone, a) else { continue };
        let better = match best {
            None => true,
            Some((bv, bz, _)) => *v > bv || (*v == bv && target < bz),
        };
        if better {
            best = Some((*v, target, a));
        }
    }
    best.expect("the stay action is always valid").2
}

/// Epsilon-greedy choice over the vehicle's neighbourhood.
pub fn select_action<R: Rng + ?Sized>(
    net: &Mlp,
    layout: &StateLayout,
    zone: ZoneId,
    state: &[f64],
    epsilon: f64,
    rng: &mut R,
) -> usize {
    if epsilon > 0.0 && rng.random::<f64>() < epsilon {
        return uniform_valid(&layout.action_mask(zone), rng);
    }
    greedy_action(&net.forward(state), layout, zone)
}

/// Neighbourhood zone with the most forecast demand; ties go to the nearer
/// zone, then the lower id.
pub fn nearest_demand_action(layout: &StateLayout, zone: ZoneId, state: &[f64]) -> usize {
    let decoded = decode_state(layout, state);
    let zones = layout.zones();
    let w = layout.width;
    let dist = |z: ZoneId| {
        let (c0, r0) = (zone.0 % w, zone.0 / w);
        let (c1, r1) = (z.0 % w, z.0 / w);
        c0.abs_diff(c1).max(r0.abs_diff(r1))
    };
    let mut best: Option<(f64, u32, ZoneId, usize)> = None;
    for a in 0..layout.action_count() {
        let Some(t) = layout.action_target(zone, a) else { continue };
        let d = decoded.demand_total(zones, t);
        let cand = (d, dist(t), t, a);
        let better = match best {
            None => true,
            Some((bd, bdist, bz, _)) => d > bd || (d == bd && (cand.1, t) < (bdist, bz)),
        };
        if better {
            best = Some(cand);
        }
    }
    best.expect("the stay action is always valid").3
}

/// Choose a target for each querying vehicle. Each choice depends only on
/// that vehicle's own state.
pub fn dispatch_idle<R: Rng + ?Sized>(
    policy: &Policy,
    layout: &StateLayout,
    queries: &[DispatchQuery],
    epsilon: f64,
    rng: &mut R,
) -> Vec<DispatchAction> {
    queries
        .iter()
        .map(|q| {
            let action = match policy {
                Policy::Dqn(f) => select_action(&f.online, layout, q.zone, &q.state, epsilon, rng),
                Policy::Random => uniform_valid(&layout.action_mask(q.zone), rng),
                Policy::NearestDemand => nearest_demand_action(layout, q.zone, &q.state),
            };
            DispatchAction {
                vehicle: q.vehicle,
                action,
                target: layout.action_target(q.zone, action).expect("chosen action is valid"),
            }
        })
        .collect()
}
