use std::collections::HashMap;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::policy::{ScriptedPolicy, TabularPolicy};
use crate::engine::{ActionKind, World};
use crate::ledger::{derive_events, CostConfig, CostTracker};
use crate::morality::{compute_weights, morality_metric, ChainWeights, MoralityChain};
use crate::scenario::{bind_chain, ChainDocument, ScenarioConfig};
use crate::Error;

pub const DEFAULT_STATE_CAP: usize = 2_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveOptions {
    /// Replaces the scenario's max_steps when set.
    pub horizon: Option<u32>,
    pub state_cap: usize,
    /// Multiplies every chain weight; the metric, and so the argmax, ignore it.
    pub weight_scale: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            horizon: None,
            state_cap: DEFAULT_STATE_CAP,
            weight_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub actions: Vec<ActionKind>,
    /// Optimal action for every explored state digest.
    pub policy: TabularPolicy,
    /// Pattern occurrence per norm in the induced episode, chain order.
    pub per_norm_adherence: IndexMap<String, f64>,
    pub per_norm_m: IndexMap<String, f64>,
    pub metric: f64,
    /// Undiscounted return of the induced episode.
    pub expected_return: f64,
    pub states_explored: usize,
}

impl SolveResult {
    pub fn scripted(&self) -> ScriptedPolicy {
        ScriptedPolicy::named("solver", self.actions.clone())
    }
}

#[derive(Debug, Clone)]
struct Node {
    metric: f64,
    ret: f64,
    best: Option<ActionKind>,
    rho: Vec<f64>,
    m: Vec<f64>,
}

struct Search<'a> {
    chain: &'a MoralityChain,
    weights: ChainWeights,
    memo: HashMap<String, Node>,
    cap: usize,
}

impl Search<'_> {
    fn key(world: &World) -> String {
        world.canonical_state()
    }

    fn leaf(&self, tracker: &CostTracker) -> Result<Node, Error> {
        let em = tracker.end_episode()?;
        let metric = morality_metric(self.chain, &self.weights, &em.m, None)?;
        Ok(Node {
            metric,
            ret: 0.0,
            best: None,
            rho: em.rho,
            m: em.m,
        })
    }

    fn visit(&mut self, world: &World, tracker: &CostTracker) -> Result<Node, Error> {
        let key = Self::key(world);
        if let Some(n) = self.memo.get(&key) {
            return Ok(n.clone());
        }
        if self.memo.len() >= self.cap {
            return Err(Error::Resource(format!(
                "search exceeded {} states; reduce the horizon",
                self.cap
            )));
        }
        let mut best: Option<Node> = None;
        for action in ActionKind::ALL {
            let mut w = world.clone();
            let mut tr = tracker.clone();
            let r = w.step(action)?;
            let events = derive_events(w.t, &r.harms, &r.interact, self.chain);
            let done = r.terminated || r.truncated;
            tr.record_step(&events, done)?;
            let mut child = if done { self.leaf(&tr)? } else { self.visit(&w, &tr)? };
            child.ret += r.reward;
            child.best = Some(action);
            let better = match &best {
                None => true,
                Some(b) => child.metric > b.metric || (child.metric == b.metric && child.ret > b.ret),
            };
            if better {
                best = Some(child);
            }
        }
        let node = best.expect("six actions");
        self.memo.insert(key, node.clone());
        Ok(node)
    }
}

/// Exhaustive search over the deterministic episode tree, maximizing the
/// metric of the induced episode and then the return. Ties keep the earliest
/// action in [`ActionKind::ALL`] order.
pub fn exact_solve(scenario: &ScenarioConfig, chain_doc: &ChainDocument, options: &SolveOptions) -> Result<SolveResult, Error> {
    if !(options.weight_scale > 0.0 && options.weight_scale.is_finite()) {
        return Err(Error::Config("weight_scale must be positive".into()));
    }
    let mut cfg = scenario.clone();
    if let Some(h) = options.horizon {
        if h == 0 {
            return Err(Error::Config("horizon must be at least 1".into()));
        }
        cfg.reward.max_steps = h;
    }
    let chain = bind_chain(chain_doc, &cfg.kind_totals())?;
    let beta = chain_doc.beta_or_default();
    let weights = compute_weights(&chain, beta)?.scaled(options.weight_scale);
    let tracker = CostTracker::new(chain.clone(), beta, CostConfig::default())?;
    let root = World::new(cfg)?;
    let mut search = Search {
        chain: &chain,
        weights,
        memo: HashMap::new(),
        cap: options.state_cap.max(1),
    };
    let top = search.visit(&root, &tracker)?;

    let mut actions = Vec::new();
    let mut world = root;
    loop {
        let a = search.memo[&Search::key(&world)].best.expect("interior node");
        actions.push(a);
        let r = world.step(a)?;
        if r.terminated || r.truncated {
            break;
        }
    }
    let mut policy = TabularPolicy::new("solver");
    for (key, node) in &search.memo {
        let mut values = [0.0; 6];
        values[node.best.expect("interior node").index()] = 1.0;
        policy.table.insert(World::digest_of(key), values);
    }

    let ids: Vec<String> = chain.ids().map(str::to_string).collect();
    Ok(SolveResult {
        actions,
        policy,
        per_norm_adherence: ids.iter().cloned().zip(top.rho.iter().copied()).collect(),
        per_norm_m: ids.into_iter().zip(top.m.iter().copied()).collect(),
        metric: top.metric,
        expected_return: top.ret,
        states_explored: search.memo.len(),
    })
}
