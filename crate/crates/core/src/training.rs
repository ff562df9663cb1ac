//! Training the dispatch value function inside the simulator.

use std::io::Write;

use crate::city::build_grid;
use crate::dispatch::{Checkpoint, Policy, QFunction};
use crate::error::{Error, Result};
use crate::rng;
use crate::sim::{state_layout, Engine, Learner, LossPoint, MetricsReport, ScenarioConfig};

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub checkpoint: Checkpoint,
    pub losses: Vec<LossPoint>,
    pub report: MetricsReport,
}

/// Simulate `cfg.days` days with epsilon-greedy dispatch, training the
/// network from replay as the run goes.
pub fn train(cfg: &ScenarioConfig) -> Result<TrainOutput> {
    cfg.validate()?;
    let (grid, _) = build_grid(&cfg.grid)?;
    let layout = state_layout(cfg, &grid);
    let sizes = cfg.dqn.sizes(layout.feature_len(), layout.action_count());
    let mut init = rng::stream(cfg.seed, rng::NETWORK_INIT);
    let q = QFunction::new(&sizes, &cfg.dqn, &mut init);
    let learner = Learner::new(cfg, cfg.demand_steps());
    let mut engine = Engine::new(cfg, Policy::Dqn(Box::new(q)), Some(learner))?;
    engine.run_to_end();
    let net = engine.policy().network().expect("training runs a learned policy");
    Ok(TrainOutput {
        checkpoint: Checkpoint::new(&layout, net),
        losses: engine.learner().map(|l| l.losses().to_vec()).unwrap_or_default(),
        report: engine.report(),
    })
}

pub fn write_loss_csv<W: Write>(out: W, losses: &[LossPoint]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| Error::Config(format!("writing loss curve: {e}"));
    if losses.is_empty() {
        w.write_record(["train_step", "sim_step", "loss"]).map_err(err)?;
    }
    for p in losses {
        w.serialize(p).map_err(err)?;
    }
    w.flush().map_err(|e| Error::Config(format!("writing loss curve: {e}")))
}

/// Mean of the first and last quarters of the curve.
pub fn quarter_means(losses: &[LossPoint]) -> Option<(f64, f64)> {
    let q = losses.len() / 4;
    if q == 0 {
        return None;
    }
    let mean = |s: &[LossPoint]| s.iter().map(|p| p.loss).sum::<f64>() / s.len() as f64;
    Some((mean(&losses[..q]), mean(&losses[losses.len() - q..])))
}
