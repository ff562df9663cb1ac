//! Scenario configuration, the simulation engine, its event log and the
//! metrics built from it.

pub mod config;
pub mod engine;
pub mod events;
pub mod metrics;

pub use config::{LoadMode, ScenarioConfig, Variant};
pub use engine::{build_workload, load_policy, state_layout, Engine, Learner, LossPoint};
pub use events::{read_jsonl, write_jsonl, Event, EventType, Payload, TickDelta};
pub use metrics::{replay, MetricsCollector, MetricsReport, StepRow, Summary};

use crate::city::build_grid;
use crate::error::Result;

/// Report and full event log of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub report: MetricsReport,
    pub events: Vec<Event>,
}

pub fn simulate(cfg: &ScenarioConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let (grid, _) = build_grid(&cfg.grid)?;
    let policy = load_policy(cfg, &state_layout(cfg, &grid))?;
    let mut engine = Engine::new(cfg, policy, None)?;
    engine.run_to_end();
    Ok(RunOutput {
        report: engine.report(),
        events: engine.take_events(),
    })
}

pub fn run(cfg: &ScenarioConfig) -> Result<MetricsReport> {
    simulate(cfg).map(|o| o.report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariantRun {
    pub variant: Variant,
    pub output: RunOutput,
}

/// Run `cfg` once per variant with the same seed, in parallel.
pub fn run_baseline_matrix(cfg: &ScenarioConfig, variants: &[Variant]) -> Result<Vec<VariantRun>> {
    std::thread::scope(|s| {
        let handles: Vec<_> = variants
            .iter()
            .map(|v| {
                let c = ScenarioConfig {
                    variant: *v,
                    ..cfg.clone()
                };
                s.spawn(move || simulate(&c).map(|output| VariantRun { variant: c.variant, output }))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("variant run panicked")).collect()
    })
}
