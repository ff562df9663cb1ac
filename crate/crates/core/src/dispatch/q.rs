//! Action-value function with a target network and TD training.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::network::{clip_norm, Mlp, Optimizer, OptimizerKind};
use super::replay::Transition;
use super::state::StateLayout;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DqnConfig {
    pub hidden: Vec<usize>,
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    pub replay_capacity: usize,
    pub batch_size: usize,
    /// Simulation steps between gradient steps.
    pub train_every_steps: u64,
    /// Gradient steps between target-network refreshes.
    pub target_sync_every: u64,
    pub grad_clip: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Fraction of training over which exploration decays.
    pub epsilon_decay_fraction: f64,
    /// A decision's transition closes after this long without a new one.
    pub decision_window_min: f64,
    pub action_radius: u32,
}

impl Default for DqnConfig {
    fn default() -> Self {
        Self {
            hidden: vec![64, 64],
            optimizer: OptimizerKind::Adam,
            learning_rate: 1e-4,
            replay_capacity: 5000,
            batch_size: 32,
            train_every_steps: 5,
            target_sync_every: 50,
            grad_clip: 10.0,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_decay_fraction: 0.5,
            decision_window_min: 30.0,
            action_radius: 3,
        }
    }
}

impl DqnConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("dqn: {m}")));
        if self.hidden.contains(&0) {
            return bad("hidden widths must be positive");
        }
        if !(self.learning_rate > 0.0) {
            return bad("learning_rate must be positive");
        }
        if self.replay_capacity == 0 || self.batch_size == 0 || self.train_every_steps == 0 || self.target_sync_every == 0 {
            return bad("replay_capacity, batch_size, train_every_steps and target_sync_every must be positive");
        }
        if !(0.0..=1.0).contains(&self.epsilon_start) || !(0.0..=1.0).contains(&self.epsilon_end) {
            return bad("epsilon bounds must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.epsilon_decay_fraction) {
            return bad("epsilon_decay_fraction must lie in [0, 1]");
        }
        if !(self.decision_window_min > 0.0) {
            return bad("decision_window_min must be positive");
        }
        if !(self.grad_clip > 0.0) {
            return bad("grad_clip must be positive");
        }
        Ok(())
    }

    pub fn sizes(&self, inputs: usize, outputs: usize) -> Vec<usize> {
        let mut s = vec![inputs];
        s.extend(&self.hidden);
        s.push(outputs);
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QFunction {
    pub online: Mlp,
    pub target: Mlp,
    optimizer: Optimizer,
    target_sync_every: u64,
    grad_clip: f64,
    train_steps: u64,
}

impl QFunction {
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], cfg: &DqnConfig, rng: &mut R) -> Self {
        Self::from_network(Mlp::init(sizes, rng), cfg)
    }

    pub fn from_network(net: Mlp, cfg: &DqnConfig) -> Self {
        let n = net.params().len();
        Self {
            target: net.clone(),
            online: net,
            optimizer: Optimizer::new(cfg.optimizer, cfg.learning_rate, n),
            target_sync_every: cfg.target_sync_every,
            grad_clip: cfg.grad_clip,
            train_steps: 0,
        }
    }

    pub fn values(&self, state: &[f64]) -> Vec<f64> {
        self.online.forward(state)
    }

    pub fn train_steps(&self) -> u64 {
        self.train_steps
    }

    pub fn sync_target(&mut self) {
        self.target = self.online.clone();
    }

    /// Mean squared TD error over `batch` and its gradient with respect to
    /// the online parameters (targets come from the target network).
    pub fn td_loss_and_grad(&self, batch: &[&Transition]) -> (f64, Vec<f64>) {
        let mut grad = vec![0.0; self.online.params().len()];
        if batch.is_empty() {
            return (0.0, grad);
        }
        let n = batch.len() as f64;
        let mut loss = 0.0;
        for t in batch {
            let target = t.reward + t.discount * bootstrap(&self.target, t);
            let trace = self.online.forward_trace(&t.state);
            let diff = trace.output()[t.action] - target;
            loss += diff * diff;
            let mut g_out = vec![0.0; self.online.output_len()];
            g_out[t.action] = 2.0 * diff / n;
            self.online.backward(&trace, &g_out, &mut grad);
        }
        (loss / n, grad)
    }

    /// One gradient step on the batch; returns the loss before the step.
    pub fn train_step(&mut self, batch: &[&Transition]) -> f64 {
        assert!(!batch.is_empty(), "training batch must be nonempty");
        let (loss, mut grad) = self.td_loss_and_grad(batch);
        clip_norm(&mut grad, self.grad_clip);
        self.optimizer.step(self.online.params_mut(), &grad);
        self.train_steps += 1;
        if self.train_steps % self.target_sync_every == 0 {
            self.sync_target();
        }
        loss
    }
}

fn bootstrap(net: &Mlp, t: &Transition) -> f64 {
    if t.discount == 0.0 {
        return 0.0;
    }
    net.forward(&t.next_state)
        .into_iter()
        .zip(&t.next_mask)
        .filter(|(_, ok)| **ok)
        .map(|(v, _)| v)
        .reduce(f64::max)
        .unwrap_or(0.0)
}

const CHECKPOINT_FORMAT: &str = "fleetsim-dqn";
const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub layout: StateLayout,
    pub sizes: Vec<usize>,
    pub params: Vec<f64>,
}

impl Checkpoint {
    pub fn new(layout: &StateLayout, net: &Mlp) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            layout: layout.clone(),
            sizes: net.sizes().to_vec(),
            params: net.params().to_vec(),
        }
    }

    pub fn network(&self) -> Result<Mlp> {
        if self.sizes.first() != Some(&self.layout.feature_len()) || self.sizes.last() != Some(&self.layout.action_count()) {
            return Err(Error::Checkpoint("network shape disagrees with its layout".into()));
        }
        Mlp::from_params(&self.sizes, self.params.clone())
            .ok_or_else(|| Error::Checkpoint("parameter count disagrees with network shape".into()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self).map_err(|e| Error::Checkpoint(e.to_string()))?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let ck: Checkpoint = serde_json::from_str(&text).map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?;
        if ck.format != CHECKPOINT_FORMAT {
            return Err(Error::Checkpoint(format!("{}: not a dispatch checkpoint", path.display())));
        }
        if ck.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!("{}: unsupported version {}", path.display(), ck.version)));
        }
        ck.network()?;
        Ok(ck)
    }
}
