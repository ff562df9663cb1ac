use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::city::{GridConfig, ZoneGrid, ZoneId};
use crate::demand::{PassengerWorkloadConfig, ServiceLocation, DEFAULT_DELIVERY_RADIUS_KM};
use crate::dispatch::{DqnConfig, PolicyKind, RewardWeights};
use crate::error::{Error, Result};
use crate::fleet::FleetConfig;
use crate::matching::DEFAULT_MATCH_RADIUS_KM;
use crate::pricing::PricingConfig;
use crate::rng;
use crate::routing::{HopConfig, DEFAULT_HOP_CAPACITY};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LoadMode {
    /// Every vehicle carries passengers and parcels together.
    Combined,
    /// The fleet is split into passenger-only and parcel-only vehicles.
    Independent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Variant {
    pub load: LoadMode,
    pub multi_hop: bool,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant {
            load: LoadMode::Combined,
            multi_hop: true,
        },
        Variant {
            load: LoadMode::Combined,
            multi_hop: false,
        },
        Variant {
            load: LoadMode::Independent,
            multi_hop: true,
        },
        Variant {
            load: LoadMode::Independent,
            multi_hop: false,
        },
    ];

    pub fn name(&self) -> &'static str {
        match (self.load, self.multi_hop) {
            (LoadMode::Combined, true) => "combined-hop",
            (LoadMode::Combined, false) => "combined-direct",
            (LoadMode::Independent, true) => "independent-hop",
            (LoadMode::Independent, false) => "independent-direct",
        }
    }

    pub fn parse(s: &str) -> Option<Variant> {
        Self::ALL.into_iter().find(|v| v.name() == s)
    }
}

impl Default for Variant {
    fn default() -> Self {
        Self::ALL[0]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GoodsSection {
    /// Service locations placed at random zones when `locations` is empty.
    pub service_locations: usize,
    /// Hourly order rate of each generated service location.
    pub rate_per_hour: f64,
    pub locations: Vec<ServiceLocation>,
    pub radius_km: f64,
    pub size_weights: Vec<f64>,
}

impl Default for GoodsSection {
    fn default() -> Self {
        Self {
            service_locations: 6,
            rate_per_hour: 10.0,
            locations: Vec::new(),
            radius_km: DEFAULT_DELIVERY_RADIUS_KM,
            size_weights: vec![0.6, 0.3, 0.1],
        }
    }
}

impl GoodsSection {
    /// Explicit locations, or `service_locations` distinct random zones.
    pub fn resolve_locations(&self, grid: &ZoneGrid, seed: u64) -> Vec<ServiceLocation> {
        if !self.locations.is_empty() {
            return self.locations.clone();
        }
        let mut r = rng::stream(seed, "service-locations");
        let mut zones: Vec<u32> = (0..grid.zone_count() as u32).collect();
        let n = self.service_locations.min(zones.len());
        let (picked, _) = rand::seq::SliceRandom::partial_shuffle(&mut zones[..], &mut r, n);
        picked
            .iter()
            .map(|z| ServiceLocation {
                zone: ZoneId(*z),
                rate_per_hour: self.rate_per_hour,
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HopSection {
    pub count: usize,
    pub capacity: u32,
    /// CSV of `x_km,y_km,capacity`; overrides `count`.
    pub file: Option<PathBuf>,
    pub drop_radius_km: f64,
    pub min_gain: f64,
}

impl Default for HopSection {
    fn default() -> Self {
        let h = HopConfig::default();
        Self {
            count: 20,
            capacity: DEFAULT_HOP_CAPACITY,
            file: None,
            drop_radius_km: h.drop_radius_km,
            min_gain: h.min_gain,
        }
    }
}

impl HopSection {
    pub fn hop_config(&self) -> HopConfig {
        HopConfig {
            drop_radius_km: self.drop_radius_km,
            min_gain: self.min_gain,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MatchingSection {
    pub radius_km: f64,
    /// Unaccepted requests older than this are rejected.
    pub max_age_min: f64,
}

impl Default for MatchingSection {
    fn default() -> Self {
        Self {
            radius_km: DEFAULT_MATCH_RADIUS_KM,
            max_age_min: 30.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForecastSection {
    pub slot_min: f64,
    pub horizon: usize,
    /// Days of synthetic demand observed before the run to seed history.
    pub warmup_days: u32,
}

impl Default for ForecastSection {
    fn default() -> Self {
        Self {
            slot_min: 15.0,
            horizon: 2,
            warmup_days: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicySection {
    pub kind: PolicyKind,
    pub checkpoint: Option<PathBuf>,
}

impl Default for PolicySection {
    fn default() -> Self {
        Self {
            kind: PolicyKind::NearestDemand,
            checkpoint: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub days: u32,
    pub step_min: f64,
    /// Extra minutes allowed after demand stops for in-flight deliveries.
    pub drain_max_min: f64,
    /// Share of the fleet serving passengers only in the independent mode.
    pub passenger_share: f64,
    pub variant: Variant,
    pub trip_file: Option<PathBuf>,
    pub grid: GridConfig,
    pub fleet: FleetConfig,
    pub passengers: PassengerWorkloadConfig,
    pub goods: GoodsSection,
    pub hops: HopSection,
    pub matching: MatchingSection,
    pub pricing: PricingConfig,
    pub forecast: ForecastSection,
    pub reward: RewardWeights,
    pub dqn: DqnConfig,
    pub policy: PolicySection,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            days: 7,
            step_min: 1.0,
            drain_max_min: 240.0,
            passenger_share: 0.5,
            variant: Variant::default(),
            trip_file: None,
            grid: GridConfig::default(),
            fleet: FleetConfig::default(),
            passengers: PassengerWorkloadConfig::default(),
            goods: GoodsSection::default(),
            hops: HopSection::default(),
            matching: MatchingSection::default(),
            pricing: PricingConfig::default(),
            forecast: ForecastSection::default(),
            reward: RewardWeights::default(),
            dqn: DqnConfig::default(),
            policy: PolicySection::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string().trim().replace('\n', " ")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        // relative paths in the file are relative to the file
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.trip_file, &mut cfg.hops.file, &mut cfg.policy.checkpoint].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.step_min > 0.0 && self.step_min.is_finite()) {
            return bad("step_min must be positive".into());
        }
        if !(self.drain_max_min >= 0.0) {
            return bad("drain_max_min must be nonnegative".into());
        }
        if !(0.0..=1.0).contains(&self.passenger_share) {
            return bad("passenger_share must lie in [0, 1]".into());
        }
        if self.grid.width == 0 || self.grid.height == 0 || !(self.grid.cell_size_km > 0.0) {
            return bad("grid dimensions and cell size must be positive".into());
        }
        self.fleet.validate()?;
        self.passengers.validate()?;
        if !(self.goods.radius_km > 0.0) || !(self.goods.rate_per_hour >= 0.0) {
            return bad("goods: radius_km must be positive and rate_per_hour nonnegative".into());
        }
        if self.goods.size_weights.is_empty() || self.goods.size_weights.iter().any(|w| !(*w >= 0.0)) {
            return bad("goods: size_weights must be nonnegative and nonempty".into());
        }
        let max_goods = self.goods.size_weights.len() as u32;
        if self.fleet.types.iter().all(|t| t.trunk < max_goods) {
            return bad("goods: largest parcel does not fit any vehicle trunk".into());
        }
        if self.passengers.size_weights.len() as u32 > self.fleet.types.iter().map(|t| t.seats).max().unwrap_or(0) {
            return bad("passengers: largest party does not fit any vehicle".into());
        }
        if !(self.hops.drop_radius_km > 0.0) || !(self.hops.min_gain >= 0.0) {
            return bad("hops: drop_radius_km must be positive and min_gain nonnegative".into());
        }
        if !(self.matching.radius_km > 0.0) || !(self.matching.max_age_min > 0.0) {
            return bad("matching: radius_km and max_age_min must be positive".into());
        }
        if !(self.forecast.slot_min >= self.step_min) || self.forecast.horizon == 0 {
            return bad("forecast: slot_min must be at least step_min and horizon positive".into());
        }
        self.pricing.validate()?;
        self.reward.validate()?;
        self.dqn.validate()?;
        if self.policy.kind == PolicyKind::Dqn && self.policy.checkpoint.is_none() {
            return bad("policy: dqn needs a checkpoint".into());
        }
        Ok(())
    }

    pub fn demand_steps(&self) -> u64 {
        (f64::from(self.days) * 24.0 * 60.0 / self.step_min).round() as u64
    }

    pub fn drain_steps(&self) -> u64 {
        (self.drain_max_min / self.step_min).ceil() as u64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips_through_toml() {
        let cfg = ScenarioConfig::default();
        cfg.validate().unwrap();
        let back = ScenarioConfig::from_toml_str(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn unknown_keys_are_errors() {
        let err = ScenarioConfig::from_toml_str("seed = 3\nsede = 4\n").unwrap_err();
        assert_eq!(err.category(), "config");
        let err = ScenarioConfig::from_toml_str("[fleet]\nsize = 3\nspeed = 4\n").unwrap_err();
        assert!(err.to_string().contains("speed"), "{err}");
    }

    #[test]
    fn partial_files_use_defaults() {
        let cfg = ScenarioConfig::from_toml_str("days = 2\n[fleet]\nsize = 12\n").unwrap();
        assert_eq!(cfg.days, 2);
        assert_eq!(cfg.fleet.size, 12);
        assert_eq!(cfg.fleet.entry_fraction, 0.1);
        assert_eq!(cfg.demand_steps(), 2880);
    }

    #[test]
    fn variants_by_name() {
        for v in Variant::ALL {
            assert_eq!(Variant::parse(v.name()), Some(v));
        }
        assert_eq!(Variant::parse("nope"), None);
    }

    #[test]
    fn dqn_policy_needs_checkpoint() {
        let err = ScenarioConfig::from_toml_str("[policy]\nkind = \"dqn\"\n").unwrap_err();
        assert!(err.to_string().contains("checkpoint"));
    }
}
