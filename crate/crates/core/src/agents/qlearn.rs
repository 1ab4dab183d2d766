use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::policy::{greedy, TabularPolicy};
use crate::engine::ActionKind;
use crate::env::MoralEnv;
use crate::ledger::CostConfig;
use crate::scenario::{ChainDocument, ScenarioConfig};
use crate::Error;

/// Cost weight of the alternative shaping preset.
pub const HEAVY_SHAPING_LAMBDA: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum RewardMode {
    EnvOnly,
    /// Learns from `reward - lambda * cost`, cost unnormalized.
    Shaped { lambda: f64 },
}

impl Default for RewardMode {
    fn default() -> Self {
        RewardMode::Shaped { lambda: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub alpha: f64,
    pub gamma: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Steps over which epsilon decays linearly; `None` means half the budget.
    pub epsilon_decay_steps: Option<u64>,
    pub total_steps: u64,
    pub reward_mode: RewardMode,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            gamma: 0.99,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_decay_steps: None,
            total_steps: 50_000,
            reward_mode: RewardMode::default(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), Error> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::Config(format!("gamma must lie in (0, 1], got {}", self.gamma)));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::Config(format!("alpha must lie in (0, 1], got {}", self.alpha)));
        }
        for (name, e) in [("epsilon_start", self.epsilon_start), ("epsilon_end", self.epsilon_end)] {
            if !(0.0..=1.0).contains(&e) {
                return Err(Error::Config(format!("{name} must lie in [0, 1], got {e}")));
            }
        }
        if let RewardMode::Shaped { lambda } = self.reward_mode {
            if !(lambda >= 0.0 && lambda.is_finite()) {
                return Err(Error::Config(format!("lambda must be >= 0, got {lambda}")));
            }
        }
        Ok(())
    }

    pub fn epsilon_at(&self, step: u64) -> f64 {
        let decay = self.epsilon_decay_steps.unwrap_or(self.total_steps / 2);
        if decay == 0 || step >= decay {
            return self.epsilon_end;
        }
        let frac = step as f64 / decay as f64;
        self.epsilon_start + (self.epsilon_end - self.epsilon_start) * frac
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainResult {
    pub policy: TabularPolicy,
    pub episodes: u64,
    pub steps: u64,
    /// Undiscounted environment return of each training episode.
    pub episode_returns: Vec<f64>,
    /// Action taken at every training step, in order.
    #[serde(skip)]
    pub action_log: Vec<ActionKind>,
}

/// Epsilon-greedy tabular Q-learning keyed by state digest.
pub fn q_learn(scenario: &ScenarioConfig, chain: &ChainDocument, config: &TrainConfig) -> Result<TrainResult, Error> {
    config.validate()?;
    let mut env = MoralEnv::new(scenario.clone(), chain.clone(), CostConfig::default())?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let label = match config.reward_mode {
        RewardMode::EnvOnly => "q_env_only".to_string(),
        RewardMode::Shaped { lambda } => format!("q_shaped({lambda})"),
    };
    let mut policy = TabularPolicy::new(label);
    let mut returns = Vec::new();
    let mut log = Vec::with_capacity(config.total_steps as usize);
    let mut steps = 0u64;
    let mut episode = 0u64;

    while steps < config.total_steps {
        env.reset(config.seed.wrapping_add(episode));
        let mut digest = env.world().state_digest();
        let mut ret = 0.0;
        loop {
            let eps = config.epsilon_at(steps);
            let explore = rng.gen::<f64>() < eps;
            let random_action = ActionKind::ALL[rng.gen_range(0..ActionKind::ALL.len())];
            let q = *policy.table.entry(digest.clone()).or_insert([0.0; 6]);
            let action = if explore { random_action } else { greedy(&q) };
            let out = env.step(action)?;
            steps += 1;
            log.push(action);
            ret += out.reward;
            let learn_reward = match config.reward_mode {
                RewardMode::EnvOnly => out.reward,
                RewardMode::Shaped { lambda } => out.reward - lambda * out.info.cost,
            };
            let next = out.info.state_digest.clone();
            let target = if out.done() {
                learn_reward
            } else {
                let nq = policy.table.entry(next.clone()).or_insert([0.0; 6]);
                learn_reward + config.gamma * nq.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            };
            let cell = &mut policy.table.get_mut(&digest).expect("inserted above")[action.index()];
            *cell += config.alpha * (target - *cell);
            digest = next;
            if out.done() || steps >= config.total_steps {
                break;
            }
        }
        returns.push(ret);
        episode += 1;
    }
    Ok(TrainResult {
        policy,
        episodes: episode,
        steps,
        episode_returns: returns,
        action_log: log,
    })
}
