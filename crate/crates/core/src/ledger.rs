//! Turns per-step harm records into norm events and charges per-step costs.

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{ActionKind, HarmRecord, InteractEffect};
use crate::morality::{
    compute_weights, modality_score, ChainWeights, DeonticModality, MoralityChain, MoralityError, NormCategory,
    NormSpec, Signature, Subject,
};

/// One norm's pattern matched during one step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormEvent {
    pub t: u32,
    pub norm_id: String,
    pub category: NormCategory,
    pub signature: Signature,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<Subject>,
    /// Absent for push events.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub harmed_count: Option<u32>,
    #[serde(default)]
    pub personal: bool,
    #[serde(default)]
    pub via_lever: bool,
}

impl NormEvent {
    /// Units this event adds to its norm: 1 for a push, else the harmed count.
    pub fn magnitude(&self) -> f64 {
        f64::from(self.harmed_count.unwrap_or(1))
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LedgerError {
    #[error("event for norm `{0}`, which is not in the active chain")]
    UnknownNorm(String),
    #[error("norm `{id}`: utility value {value} left its range [{min}, {max}]")]
    OutOfRange { id: String, value: f64, min: f64, max: f64 },
    #[error("episode adherence requested before the episode finished")]
    EpisodeNotFinished,
}

fn subject_matches(norm: &NormSpec, kind: Subject) -> bool {
    match norm.subject {
        Some(s) => s == kind,
        None => kind != Subject::Agent,
    }
}

/// Events for the norms of `chain`, in chain order, at most one per norm.
/// Needs only the step's harm records and interact effect, so a recorded
/// trace can be rescored under any chain.
pub fn derive_events(t: u32, harms: &[HarmRecord], interact: &InteractEffect, chain: &MoralityChain) -> Vec<NormEvent> {
    let mut out = Vec::new();
    for norm in &chain.norms {
        let signature = norm.signature();
        let event = |harmed_count: Option<u32>, personal: bool, via_lever: bool| NormEvent {
            t,
            norm_id: norm.id.clone(),
            category: norm.category,
            signature,
            kind: norm.subject,
            harmed_count,
            personal,
            via_lever,
        };
        if signature == Signature::Push {
            if let InteractEffect::Pushed { kind, .. } = interact {
                if subject_matches(norm, kind.subject()) {
                    out.push(event(None, false, false));
                }
            }
            continue;
        }
        let matching: Vec<&HarmRecord> = harms
            .iter()
            .filter(|h| subject_matches(norm, h.kind))
            .filter(|h| match signature {
                Signature::PersonalHarm => h.personal,
                Signature::CausedHarm => h.via_lever,
                _ => true,
            })
            .collect();
        let count: u32 = matching.iter().map(|h| h.count).sum();
        if count > 0 {
            out.push(event(
                Some(count),
                matching.iter().any(|h| h.personal),
                matching.iter().any(|h| h.via_lever),
            ));
        }
    }
    out
}

/// How utility norms are charged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UtilityCostMode {
    /// Weight times the change in normalized level; sums to weight times the final level.
    #[default]
    Increment,
    /// Weight times the current normalized level, every step.
    Level,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CostConfig {
    /// Divide every charge by the sum of the weights.
    pub normalize: bool,
    pub utility_mode: UtilityCostMode,
}

/// Per-episode summary from a [`CostTracker`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMorality {
    /// Degree each norm's pattern occurred, chain order.
    pub rho: Vec<f64>,
    /// Morality function per norm, chain order.
    pub m: Vec<f64>,
    pub total_cost: f64,
}

/// Charges norm costs step by step for one chain.
#[derive(Debug, Clone)]
pub struct CostTracker {
    chain: MoralityChain,
    weights: ChainWeights,
    config: CostConfig,
    fired: Vec<bool>,
    counts: Vec<f64>,
    total_cost: f64,
    finished: bool,
}

impl CostTracker {
    pub fn new(chain: MoralityChain, beta: f64, config: CostConfig) -> Result<Self, MoralityError> {
        let weights = compute_weights(&chain, beta)?;
        let k = chain.len();
        Ok(Self {
            chain,
            weights,
            config,
            fired: vec![false; k],
            counts: vec![0.0; k],
            total_cost: 0.0,
            finished: false,
        })
    }

    pub fn chain(&self) -> &MoralityChain {
        &self.chain
    }

    pub fn weights(&self) -> &ChainWeights {
        &self.weights
    }

    pub fn config(&self) -> CostConfig {
        self.config
    }

    pub fn reset(&mut self) {
        self.fired.iter_mut().for_each(|f| *f = false);
        self.counts.iter_mut().for_each(|c| *c = 0.0);
        self.total_cost = 0.0;
        self.finished = false;
    }

    pub fn total_cost(&self) -> f64 {
        self.total_cost
    }

    pub fn is_finished(&self) -> bool {
        self.finished
    }

    fn level(&self, i: usize) -> f64 {
        let norm = &self.chain.norms[i];
        match norm.utility_range {
            Some(r) => r.normalize(self.counts[i]).clamp(0.0, 1.0),
            None => 0.0,
        }
    }

    /// Charges one step. `terminal` settles prescribed norms.
    pub fn record_step(&mut self, events: &[NormEvent], terminal: bool) -> Result<f64, LedgerError> {
        if let Some(e) = events.iter().find(|e| self.chain.index_of(&e.norm_id).is_none()) {
            return Err(LedgerError::UnknownNorm(e.norm_id.clone()));
        }
        let scale = if self.config.normalize {
            1.0 / self.weights.total()
        } else {
            1.0
        };
        let magnitudes: Vec<f64> = self
            .chain
            .norms
            .iter()
            .map(|n| {
                events
                    .iter()
                    .filter(|e| e.norm_id == n.id)
                    .map(NormEvent::magnitude)
                    .sum()
            })
            .collect();
        for (i, norm) in self.chain.norms.iter().enumerate() {
            let value = self.counts[i] + magnitudes[i];
            if let (NormCategory::Utility, Some(r)) = (norm.category, norm.utility_range) {
                if value > r.max {
                    return Err(LedgerError::OutOfRange {
                        id: norm.id.clone(),
                        value,
                        min: r.min,
                        max: r.max,
                    });
                }
            }
        }
        let mut cost = 0.0;
        for (i, &magnitude) in magnitudes.iter().enumerate() {
            let norm = &self.chain.norms[i];
            let w = self.weights.values()[i];
            let prohibited = norm.modality == DeonticModality::Prohibited;
            if norm.category == NormCategory::Utility {
                let before = self.level(i);
                self.counts[i] += magnitude;
                let after = self.level(i);
                if prohibited {
                    cost += match self.config.utility_mode {
                        UtilityCostMode::Increment => w * (after - before),
                        UtilityCostMode::Level => w * after,
                    };
                } else if terminal {
                    cost += w * (1.0 - after);
                }
            } else {
                let first = magnitude > 0.0 && !self.fired[i];
                if magnitude > 0.0 {
                    self.fired[i] = true;
                    self.counts[i] += magnitude;
                }
                // Prohibited: charged when first seen. Prescribed: charged at the
                // end if it never happened.
                let missed = !prohibited && terminal && !self.fired[i];
                if (prohibited && first) || missed {
                    cost += w;
                }
            }
        }
        if terminal {
            self.finished = true;
        }
        let cost = cost * scale;
        self.total_cost += cost;
        Ok(cost)
    }

    /// Raw accumulated value per utility norm (event norms: occurrence count).
    pub fn utility_values(&self) -> IndexMap<String, f64> {
        self.chain
            .norms
            .iter()
            .zip(&self.counts)
            .map(|(n, c)| (n.id.clone(), *c))
            .collect()
    }

    /// Event norms violated so far, chain order.
    pub fn fired(&self) -> Vec<&str> {
        self.chain
            .norms
            .iter()
            .zip(&self.fired)
            .filter(|(_, f)| **f)
            .map(|(n, _)| n.id.as_str())
            .collect()
    }

    /// Occurrence degree per norm: 0/1 for event norms, normalized level for
    /// utility norms. Only defined once the episode finished.
    pub fn episode_adherence(&self) -> Result<Vec<f64>, LedgerError> {
        if !self.finished {
            return Err(LedgerError::EpisodeNotFinished);
        }
        Ok(self.current_adherence())
    }

    fn current_adherence(&self) -> Vec<f64> {
        (0..self.chain.len())
            .map(|i| {
                if self.chain.norms[i].category == NormCategory::Utility {
                    self.level(i)
                } else if self.fired[i] {
                    1.0
                } else {
                    0.0
                }
            })
            .collect()
    }

    pub fn end_episode(&self) -> Result<EpisodeMorality, LedgerError> {
        let rho = self.episode_adherence()?;
        let m = self
            .chain
            .norms
            .iter()
            .zip(&rho)
            .map(|(n, r)| modality_score(n.modality, *r).expect("levels are clamped"))
            .collect();
        Ok(EpisodeMorality {
            rho,
            m,
            total_cost: self.total_cost,
        })
    }
}

/// One step of a recorded episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub t: u32,
    pub action: ActionKind,
    pub reward: f64,
    pub cost: f64,
    pub norm_events: Vec<NormEvent>,
    pub state_digest: String,
    #[serde(default)]
    pub harms: Vec<HarmRecord>,
    #[serde(default)]
    pub interact: InteractEffect,
    #[serde(default)]
    pub terminated: bool,
    #[serde(default)]
    pub truncated: bool,
}

/// Ordered step records plus the episode's closing state.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EpisodeTrace {
    pub records: Vec<TraceStep>,
    pub terminated: bool,
    pub truncated: bool,
    /// Final accumulated value per norm id.
    pub final_utility: IndexMap<String, f64>,
}

impl EpisodeTrace {
    pub fn push(&mut self, step: TraceStep) {
        self.terminated = step.terminated;
        self.truncated = step.truncated;
        self.records.push(step);
    }

    pub fn total_reward(&self) -> f64 {
        self.records.iter().map(|r| r.reward).sum()
    }

    pub fn total_cost(&self) -> f64 {
        self.records.iter().map(|r| r.cost).sum()
    }

    pub fn actions(&self) -> Vec<ActionKind> {
        self.records.iter().map(|r| r.action).collect()
    }
}

/// Replays recorded harms and interactions under `chain` without an engine.
pub fn rescore(trace: &EpisodeTrace, tracker: &mut CostTracker) -> Result<Vec<(Vec<NormEvent>, f64)>, LedgerError> {
    tracker.reset();
    let n = trace.records.len();
    let mut out = Vec::with_capacity(n);
    for (i, rec) in trace.records.iter().enumerate() {
        let events = derive_events(rec.t, &rec.harms, &rec.interact, tracker.chain());
        let terminal = i + 1 == n || rec.terminated || rec.truncated;
        let cost = tracker.record_step(&events, terminal)?;
        out.push((events, cost));
    }
    if n == 0 {
        tracker.record_step(&[], true)?;
    }
    Ok(out)
}
