//! JSONL episode traces: a header line, one line per step, an end line.
//! A trace carries enough to be rescored under any chain without the engine.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::agents::{Policy, PolicyInput};
use crate::engine::CharacterKind;
use crate::env::MoralEnv;
use crate::ledger::{rescore, CostConfig, CostTracker, EpisodeTrace, NormEvent, TraceStep};
use crate::morality::morality_metric;
use crate::scenario::{bind_chain, ChainDocument};
use crate::Error;

pub const TRACE_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub schema_version: u32,
    pub scenario: String,
    pub scenario_hash: String,
    pub chain: ChainDocument,
    pub beta: f64,
    pub seed: u64,
    pub normalize_cost: bool,
    pub kind_totals: BTreeMap<CharacterKind, u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEnd {
    pub steps: usize,
    pub total_reward: f64,
    pub total_cost: f64,
    pub terminated: bool,
    pub truncated: bool,
    pub final_utility: IndexMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum TraceLine {
    Header(TraceHeader),
    Step(TraceStep),
    End(TraceEnd),
}

impl TraceHeader {
    pub fn for_env(env: &MoralEnv) -> Self {
        let mut chain = env.chain_document().clone();
        chain.beta = Some(env.beta());
        Self {
            schema_version: TRACE_SCHEMA_VERSION,
            scenario: env.config().name.clone(),
            scenario_hash: env.config().content_hash(),
            chain,
            beta: env.beta(),
            seed: env.seed(),
            normalize_cost: env.tracker().config().normalize,
            kind_totals: env.config().kind_totals(),
        }
    }
}

/// Resets `env` with `seed` and runs `policy` to the end of the episode.
pub fn record_episode(env: &mut MoralEnv, policy: &mut dyn Policy, seed: u64) -> Result<(TraceHeader, EpisodeTrace), Error> {
    let mut obs = env.reset(seed);
    policy.begin_episode(seed);
    let header = TraceHeader::for_env(env);
    let mut trace = EpisodeTrace::default();
    let mut digest = env.world().state_digest();
    loop {
        let action = policy.act(&PolicyInput {
            observation: &obs,
            digest: &digest,
            t: env.world().t,
        });
        let out = env.step(action)?;
        let done = out.done();
        trace.push(TraceStep {
            t: out.info.t,
            action,
            reward: out.reward,
            cost: out.info.cost,
            norm_events: out.info.norm_events,
            state_digest: out.info.state_digest.clone(),
            harms: out.info.harms,
            interact: out.info.interact,
            terminated: out.terminated,
            truncated: out.truncated,
        });
        obs = out.obs;
        digest = out.info.state_digest;
        if done {
            break;
        }
    }
    trace.final_utility = env.tracker().utility_values();
    Ok((header, trace))
}

pub fn write_trace<W: Write>(mut w: W, header: &TraceHeader, trace: &EpisodeTrace) -> Result<(), Error> {
    let mut line = |value: &TraceLine| -> Result<(), Error> {
        serde_json::to_writer(&mut w, value)?;
        w.write_all(b"\n")?;
        Ok(())
    };
    line(&TraceLine::Header(header.clone()))?;
    for rec in &trace.records {
        line(&TraceLine::Step(rec.clone()))?;
    }
    line(&TraceLine::End(TraceEnd {
        steps: trace.records.len(),
        total_reward: trace.total_reward(),
        total_cost: trace.total_cost(),
        terminated: trace.terminated,
        truncated: trace.truncated,
        final_utility: trace.final_utility.clone(),
    }))?;
    Ok(())
}

pub fn trace_to_string(header: &TraceHeader, trace: &EpisodeTrace) -> String {
    let mut buf = Vec::new();
    write_trace(&mut buf, header, trace).expect("writing to memory");
    String::from_utf8(buf).expect("json is utf-8")
}

fn schema(line: usize, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("trace line {line}: {msg}"))
}

/// Parses a trace, checking that the header comes first and steps ascend.
pub fn read_trace<R: BufRead>(r: R) -> Result<(TraceHeader, EpisodeTrace), Error> {
    let mut header = None;
    let mut trace = EpisodeTrace::default();
    let mut ended = false;
    for (i, line) in r.lines().enumerate() {
        let n = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        if ended {
            return Err(schema(n, "content after the end record"));
        }
        let parsed: TraceLine = serde_json::from_str(&line).map_err(|e| schema(n, e))?;
        match parsed {
            TraceLine::Header(h) => {
                if header.is_some() {
                    return Err(schema(n, "second header"));
                }
                if h.schema_version != TRACE_SCHEMA_VERSION {
                    return Err(schema(n, format!("unsupported schema_version {}", h.schema_version)));
                }
                header = Some(h);
            }
            TraceLine::Step(s) => {
                if header.is_none() {
                    return Err(schema(n, "step before header"));
                }
                if let Some(prev) = trace.records.last() {
                    if s.t <= prev.t {
                        return Err(schema(n, format!("t={} does not follow t={}", s.t, prev.t)));
                    }
                }
                trace.push(s);
            }
            TraceLine::End(e) => {
                if header.is_none() {
                    return Err(schema(n, "end before header"));
                }
                if e.steps != trace.records.len() {
                    return Err(schema(n, format!("end says {} steps, found {}", e.steps, trace.records.len())));
                }
                trace.final_utility = e.final_utility;
                ended = true;
            }
        }
    }
    let header = header.ok_or_else(|| Error::Config("trace has no header".into()))?;
    Ok((header, trace))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepScore {
    pub t: u32,
    pub cost: f64,
    pub norm_events: Vec<NormEvent>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub scenario: String,
    pub chain: String,
    pub beta: f64,
    pub weights: Vec<f64>,
    pub steps: Vec<StepScore>,
    pub total_cost: f64,
    pub adherence: IndexMap<String, f64>,
    pub per_norm_m: IndexMap<String, f64>,
    pub metric: f64,
    pub total_reward: f64,
}

/// Rescores a trace. `chain` defaults to the one in the header; utility
/// ranges bind to the header's kind totals.
pub fn score_trace(
    header: &TraceHeader,
    trace: &EpisodeTrace,
    chain: Option<&ChainDocument>,
    beta: Option<f64>,
    normalize: Option<bool>,
) -> Result<ScoreReport, Error> {
    let doc = chain.cloned().unwrap_or_else(|| header.chain.clone());
    let beta = beta.or(doc.beta).unwrap_or(header.beta);
    let bound = bind_chain(&doc, &header.kind_totals)?;
    let mut tracker = CostTracker::new(
        bound.clone(),
        beta,
        CostConfig {
            normalize: normalize.unwrap_or(header.normalize_cost),
            ..CostConfig::default()
        },
    )?;
    let per_step = rescore(trace, &mut tracker)?;
    let em = tracker.end_episode()?;
    let metric = morality_metric(&bound, tracker.weights(), &em.m, None)?;
    let ids: Vec<String> = bound.ids().map(str::to_string).collect();
    Ok(ScoreReport {
        scenario: header.scenario.clone(),
        chain: doc.name.clone(),
        beta,
        weights: tracker.weights().values().to_vec(),
        steps: trace
            .records
            .iter()
            .zip(per_step)
            .map(|(r, (events, cost))| StepScore {
                t: r.t,
                cost,
                norm_events: events,
            })
            .collect(),
        total_cost: em.total_cost,
        adherence: ids.iter().cloned().zip(em.rho).collect(),
        per_norm_m: ids.into_iter().zip(em.m).collect(),
        metric,
        total_reward: trace.total_reward(),
    })
}
