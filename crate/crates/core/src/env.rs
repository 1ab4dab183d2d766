//! A world bound to a chain: each step returns reward, norm events and cost.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::engine::{
    flatten_observation, observe, ActionKind, HarmRecord, InteractEffect, Observation, World,
};
use crate::ledger::{derive_events, CostConfig, CostTracker, EpisodeMorality, NormEvent};
use crate::morality::{ChainWeights, MoralityChain};
use crate::scenario::{bind_chain, ChainDocument, ScenarioConfig};
use crate::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepInfo {
    pub norm_events: Vec<NormEvent>,
    pub cost: f64,
    pub t: u32,
    pub state_digest: String,
    pub harms: Vec<HarmRecord>,
    pub interact: InteractEffect,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub obs: Observation,
    pub reward: f64,
    pub terminated: bool,
    pub truncated: bool,
    pub info: StepInfo,
}

impl StepOutcome {
    pub fn done(&self) -> bool {
        self.terminated || self.truncated
    }
}

#[derive(Debug, Clone)]
pub struct MoralEnv {
    config: Arc<ScenarioConfig>,
    chain_doc: ChainDocument,
    world: World,
    tracker: CostTracker,
    seed: u64,
}

impl MoralEnv {
    pub fn new(config: ScenarioConfig, chain_doc: ChainDocument, cost: CostConfig) -> Result<Self, Error> {
        let config = Arc::new(config);
        let world = World::from_shared(Arc::clone(&config))?;
        let chain = bind_chain(&chain_doc, &config.kind_totals())?;
        let tracker = CostTracker::new(chain, chain_doc.beta_or_default(), cost)?;
        Ok(Self {
            config,
            chain_doc,
            world,
            tracker,
            seed: 0,
        })
    }

    /// Same as [`MoralEnv::new`] with `beta` overriding the document's value.
    pub fn with_beta(
        config: ScenarioConfig,
        mut chain_doc: ChainDocument,
        beta: Option<f64>,
        cost: CostConfig,
    ) -> Result<Self, Error> {
        if beta.is_some() {
            chain_doc.beta = beta;
        }
        Self::new(config, chain_doc, cost)
    }

    /// Fresh episode. The dynamics are deterministic; the seed is only recorded.
    pub fn reset(&mut self, seed: u64) -> Observation {
        self.seed = seed;
        self.world = World::from_shared(Arc::clone(&self.config)).expect("validated at construction");
        self.tracker.reset();
        observe(&self.world)
    }

    pub fn step(&mut self, action: ActionKind) -> Result<StepOutcome, Error> {
        let r = self.world.step(action)?;
        let t = self.world.t;
        let norm_events = derive_events(t, &r.harms, &r.interact, self.tracker.chain());
        let cost = self.tracker.record_step(&norm_events, r.terminated || r.truncated)?;
        Ok(StepOutcome {
            obs: observe(&self.world),
            reward: r.reward,
            terminated: r.terminated,
            truncated: r.truncated,
            info: StepInfo {
                norm_events,
                cost,
                t,
                state_digest: self.world.state_digest(),
                harms: r.harms,
                interact: r.interact,
            },
        })
    }

    pub fn observation(&self) -> Observation {
        observe(&self.world)
    }

    pub fn flat_observation(&self) -> Vec<f64> {
        flatten_observation(&self.observation())
    }

    pub fn world(&self) -> &World {
        &self.world
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    pub fn chain_document(&self) -> &ChainDocument {
        &self.chain_doc
    }

    pub fn chain(&self) -> &MoralityChain {
        self.tracker.chain()
    }

    pub fn weights(&self) -> &ChainWeights {
        self.tracker.weights()
    }

    pub fn beta(&self) -> f64 {
        self.tracker.weights().beta
    }

    pub fn tracker(&self) -> &CostTracker {
        &self.tracker
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn is_over(&self) -> bool {
        self.world.episode_over
    }

    pub fn episode_morality(&self) -> Result<EpisodeMorality, Error> {
        Ok(self.tracker.end_episode()?)
    }
}
