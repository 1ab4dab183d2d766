//! Monte Carlo policy evaluation, report comparison and CSV summaries.

use std::collections::BTreeSet;

use indexmap::IndexMap;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::agents::{Policy, PolicyInput};
use crate::env::MoralEnv;
use crate::ledger::CostConfig;
use crate::morality::{modality_score, morality_metric};
use crate::scenario::{ChainDocument, ScenarioConfig};
use crate::Error;

pub const DEFAULT_EPISODES: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalOptions {
    pub episodes: usize,
    /// Episode `i` runs with seed `base_seed + i`.
    pub base_seed: u64,
    pub subset: Option<BTreeSet<String>>,
    pub cost: CostConfig,
    /// Overrides the chain document's beta.
    pub beta: Option<f64>,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            episodes: DEFAULT_EPISODES,
            base_seed: 0,
            subset: None,
            cost: CostConfig::default(),
            beta: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub scenario_hash: String,
    pub chain_hash: String,
    pub base_seed: u64,
    pub seeds: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub scenario: String,
    pub chain: String,
    pub policy: String,
    pub episodes: usize,
    pub beta: f64,
    pub weights: Vec<f64>,
    pub per_norm_rho: IndexMap<String, f64>,
    pub per_norm_m: IndexMap<String, f64>,
    pub metric: f64,
    pub avg_return: f64,
    pub avg_cost: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub norm_subset: Option<BTreeSet<String>>,
    pub provenance: Provenance,
}

/// Runs `episodes` episodes and averages adherence, return and cost.
pub fn evaluate(
    scenario: &ScenarioConfig,
    chain: &ChainDocument,
    policy: &mut dyn Policy,
    options: &EvalOptions,
) -> Result<EvaluationReport, Error> {
    if options.episodes == 0 {
        return Err(Error::Config("episodes must be at least 1".into()));
    }
    let mut env = MoralEnv::with_beta(scenario.clone(), chain.clone(), options.beta, options.cost)?;
    let k = env.chain().len();
    // Exact accumulation keeps the mean of identical episodes bit-identical.
    let mut rho_sum = vec![BigRational::zero(); k];
    let mut return_sum = 0.0;
    let mut cost_sum = 0.0;
    let mut seeds = Vec::with_capacity(options.episodes);

    for i in 0..options.episodes {
        let seed = options.base_seed.wrapping_add(i as u64);
        seeds.push(seed);
        let mut obs = env.reset(seed);
        policy.begin_episode(seed);
        let mut digest = env.world().state_digest();
        loop {
            let input = PolicyInput {
                observation: &obs,
                digest: &digest,
                t: env.world().t,
            };
            let action = policy.act(&input);
            let out = env.step(action)?;
            return_sum += out.reward;
            let done = out.done();
            obs = out.obs;
            digest = out.info.state_digest;
            if done {
                break;
            }
        }
        let em = env.episode_morality()?;
        cost_sum += em.total_cost;
        for (acc, r) in rho_sum.iter_mut().zip(&em.rho) {
            *acc += BigRational::from_float(*r).ok_or_else(|| Error::Config(format!("non-finite adherence {r}")))?;
        }
    }

    let n = options.episodes as f64;
    let chain_ref = env.chain();
    let count = BigRational::from_integer(BigInt::from(options.episodes));
    let rho: Vec<f64> = rho_sum
        .iter()
        .map(|s| (s / &count).to_f64().unwrap_or(0.0).clamp(0.0, 1.0))
        .collect();
    let m: Vec<f64> = chain_ref
        .norms
        .iter()
        .zip(&rho)
        .map(|(norm, r)| modality_score(norm.modality, *r))
        .collect::<Result<_, _>>()?;
    let metric = morality_metric(chain_ref, env.weights(), &m, options.subset.as_ref())?;
    let ids: Vec<String> = chain_ref.ids().map(str::to_string).collect();
    Ok(EvaluationReport {
        scenario: scenario.name.clone(),
        chain: chain.name.clone(),
        policy: policy.name(),
        episodes: options.episodes,
        beta: env.beta(),
        weights: env.weights().values().to_vec(),
        per_norm_rho: ids.iter().cloned().zip(rho).collect(),
        per_norm_m: ids.into_iter().zip(m).collect(),
        metric,
        avg_return: return_sum / n,
        avg_cost: cost_sum / n,
        norm_subset: options.subset.clone(),
        provenance: Provenance {
            scenario_hash: scenario.content_hash(),
            chain_hash: env.chain_document().content_hash(),
            base_seed: options.base_seed,
            seeds,
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingRow {
    pub rank: usize,
    pub policy: String,
    pub metric: f64,
    pub avg_return: f64,
}

/// Orders reports by metric, then return, both descending. Stable.
pub fn compare(reports: &[EvaluationReport]) -> Result<Vec<RankingRow>, Error> {
    if let Some(first) = reports.first() {
        if let Some(odd) = reports
            .iter()
            .find(|r| r.scenario != first.scenario || r.chain != first.chain)
        {
            return Err(Error::Config(format!(
                "cannot compare {}/{} with {}/{}",
                first.scenario, first.chain, odd.scenario, odd.chain
            )));
        }
    }
    let mut order: Vec<&EvaluationReport> = reports.iter().collect();
    order.sort_by(|a, b| {
        b.metric
            .total_cmp(&a.metric)
            .then_with(|| b.avg_return.total_cmp(&a.avg_return))
    });
    Ok(order
        .into_iter()
        .enumerate()
        .map(|(i, r)| RankingRow {
            rank: i + 1,
            policy: r.policy.clone(),
            metric: r.metric,
            avg_return: r.avg_return,
        })
        .collect())
}

/// One row per report: scenario, chain, policy, episodes, metric, return, cost.
pub fn summary_csv(reports: &[EvaluationReport]) -> Result<String, Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["scenario", "chain", "policy", "episodes", "metric", "avg_return", "avg_cost"])
        .map_err(csv_err)?;
    for r in reports {
        w.write_record([
            r.scenario.clone(),
            r.chain.clone(),
            r.policy.clone(),
            r.episodes.to_string(),
            format!("{:.6}", r.metric),
            format!("{:.3}", r.avg_return),
            format!("{:.6}", r.avg_cost),
        ])
        .map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn csv_err(e: csv::Error) -> Error {
    Error::Config(format!("csv: {e}"))
}
