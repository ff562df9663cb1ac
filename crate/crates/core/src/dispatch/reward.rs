use serde::{Deserialize, Serialize};

use crate::demand::RequestKind;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardWeights {
    /// Weight on requests picked up.
    pub service: f64,
    /// Weight on detour and hop minutes.
    pub detour: f64,
    /// Weight on urgency-weighted extra ride minutes.
    pub delay: f64,
    /// Weight on profit.
    pub profit: f64,
    /// Weight on going from unoccupied to occupied.
    pub activation: f64,
    /// Per-step discount factor.
    pub gamma: f64,
    pub passenger_urgency: f64,
    pub goods_urgency: f64,
    /// Penalize profit and reward activation instead.
    pub inverted_signs: bool,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self {
            service: 1.0,
            detour: 0.1,
            delay: 0.1,
            profit: 0.5,
            activation: 1.0,
            gamma: 0.95,
            passenger_urgency: 1.0,
            goods_urgency: 0.5,
            inverted_signs: false,
        }
    }
}

impl RewardWeights {
    pub fn validate(&self) -> Result<()> {
        let w = [self.service, self.detour, self.delay, self.profit, self.activation, self.passenger_urgency, self.goods_urgency];
        if w.iter().any(|x| !x.is_finite()) {
            return Err(Error::Config("reward: weights must be finite".into()));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::Config("reward: gamma must lie in (0, 1)".into()));
        }
        Ok(())
    }

    pub fn urgency(&self, kind: RequestKind) -> f64 {
        match kind {
            RequestKind::Passenger => self.passenger_urgency,
            RequestKind::Goods => self.goods_urgency,
        }
    }
}

/// What one vehicle did during one step.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StepSummary {
    pub passengers_picked: u32,
    pub packages_picked: u32,
    pub detour_min: f64,
    /// Extra ride minutes over direct service, already urgency-weighted.
    pub weighted_delay_min: f64,
    pub profit: f64,
    pub occupied: bool,
    pub was_occupied: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub service: f64,
    pub detour: f64,
    pub delay: f64,
    pub profit: f64,
    pub activation: f64,
    pub total: f64,
}

pub fn compute_reward(s: &StepSummary, w: &RewardWeights) -> RewardBreakdown {
    let sign = if w.inverted_signs { -1.0 } else { 1.0 };
    let activated = if s.occupied && !s.was_occupied { 1.0 } else { 0.0 };
    let service = w.service * f64::from(s.passengers_picked + s.packages_picked);
    let detour = -w.detour * s.detour_min;
    let delay = -w.delay * s.weighted_delay_min;
    let profit = sign * w.profit * s.profit;
    let activation = -sign * w.activation * activated;
    RewardBreakdown {
        service,
        detour,
        delay,
        profit,
        activation,
        total: service + detour + delay + profit + activation,
    }
}
