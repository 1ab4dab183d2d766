//! Request/response types for the high-level operations and their in-process
//! implementation. The HTTP server and the CLI's local mode share these.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::agents::{
    exact_solve, q_learn, random_policy, Policy, ScriptedPolicy, SolveOptions, SolveResult, TableFile, TabularPolicy,
    TrainConfig, DEFAULT_STATE_CAP,
};
use crate::engine::{render_ascii, ActionKind, CharacterKind, World};
use crate::env::MoralEnv;
use crate::eval::{evaluate, EvalOptions, EvaluationReport, DEFAULT_EPISODES};
use crate::ledger::CostConfig;
use crate::morality::{compute_weights, ChainWeights};
use crate::scenario::{bind_chain, Catalogue, ChainDocument, ScenarioConfig};
use crate::trace::{read_trace, record_episode, score_trace, trace_to_string, ScoreReport};
use crate::Error;

/// Which scenario and chain an operation runs on. `scenario` and `chain`
/// accept a catalogue/preset name, inline JSON, or a file path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub scenario: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variant: Option<String>,
    #[serde(default = "default_chain")]
    pub chain: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
}

fn default_chain() -> String {
    "Utility".into()
}

impl Selection {
    pub fn new(scenario: impl Into<String>, chain: impl Into<String>) -> Self {
        Self {
            scenario: scenario.into(),
            variant: None,
            chain: chain.into(),
            beta: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PolicySpec {
    Random {
        #[serde(default)]
        seed: u64,
    },
    Scripted {
        #[serde(default)]
        actions: Vec<ActionKind>,
    },
    Table {
        table: TableFile,
    },
    /// Runs the exact solver first and evaluates its action sequence.
    Solver {
        #[serde(default)]
        horizon: Option<u32>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluateRequest {
    #[serde(flatten)]
    pub selection: Selection,
    pub policy: PolicySpec,
    #[serde(default)]
    pub episodes: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub normalize_cost: bool,
    #[serde(default)]
    pub subset: Option<BTreeSet<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveRequest {
    #[serde(flatten)]
    pub selection: Selection,
    #[serde(default)]
    pub horizon: Option<u32>,
    #[serde(default)]
    pub state_cap: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRequest {
    /// JSONL trace text.
    pub trace: String,
    #[serde(default)]
    pub chain: Option<String>,
    #[serde(default)]
    pub beta: Option<f64>,
    #[serde(default)]
    pub normalize_cost: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainRequest {
    #[serde(flatten)]
    pub selection: Selection,
    #[serde(default)]
    pub config: TrainConfig,
    /// Episodes for the post-training evaluation.
    #[serde(default)]
    pub eval_episodes: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainResponse {
    pub table: TableFile,
    pub episodes: u64,
    pub steps: u64,
    pub report: EvaluationReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlayRequest {
    #[serde(flatten)]
    pub selection: Selection,
    #[serde(default)]
    pub actions: Vec<ActionKind>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub normalize_cost: bool,
    #[serde(default)]
    pub render: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlayResponse {
    /// JSONL trace text.
    pub trace: String,
    /// ASCII frames: the reset state, then one per step. Empty unless requested.
    #[serde(default)]
    pub frames: Vec<String>,
    pub score: ScoreReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSummary {
    pub name: String,
    pub description: String,
    pub width: u32,
    pub height: u32,
    pub trolleys: usize,
    pub levers: usize,
    pub kind_totals: BTreeMap<CharacterKind, u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioDetail {
    pub config: ScenarioConfig,
    pub render: String,
    pub hash: String,
    pub observation_width: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainDetail {
    pub chain: ChainDocument,
    pub weights: ChainWeights,
}

/// Stateless operations over a catalogue.
#[derive(Debug, Clone)]
pub struct Service {
    catalogue: Arc<Catalogue>,
}

impl Service {
    pub fn new(catalogue: Catalogue) -> Self {
        Self {
            catalogue: Arc::new(catalogue),
        }
    }

    pub fn shared(catalogue: Arc<Catalogue>) -> Self {
        Self { catalogue }
    }

    pub fn catalogue(&self) -> &Arc<Catalogue> {
        &self.catalogue
    }

    pub fn resolve(&self, sel: &Selection) -> Result<(ScenarioConfig, ChainDocument), Error> {
        let scenario = self.catalogue.resolve_with_variant(&sel.scenario, sel.variant.as_deref())?;
        let mut chain = ChainDocument::resolve(&sel.chain)?;
        if sel.beta.is_some() {
            chain.beta = sel.beta;
        }
        bind_chain(&chain, &scenario.kind_totals())?;
        Ok((scenario, chain))
    }

    pub fn list(&self) -> Vec<ScenarioSummary> {
        self.catalogue
            .names()
            .into_iter()
            .filter_map(|n| self.catalogue.get(&n).cloned())
            .map(|c| ScenarioSummary {
                kind_totals: c.kind_totals(),
                trolleys: c.trolleys.len(),
                levers: c.levers.len(),
                width: c.grid.width,
                height: c.grid.height,
                description: c.description,
                name: c.name,
            })
            .collect()
    }

    pub fn describe(&self, scenario: &str, variant: Option<&str>) -> Result<ScenarioDetail, Error> {
        let config = self.catalogue.resolve_with_variant(scenario, variant)?;
        let world = World::new(config.clone())?;
        Ok(ScenarioDetail {
            render: render_ascii(&world),
            hash: config.content_hash(),
            observation_width: crate::engine::flat_len(&world),
            config,
        })
    }

    pub fn render(&self, scenario: &str, variant: Option<&str>) -> Result<String, Error> {
        Ok(self.describe(scenario, variant)?.render)
    }

    pub fn chain(&self, sel: &Selection) -> Result<ChainDetail, Error> {
        let (scenario, chain) = self.resolve(sel)?;
        let bound = bind_chain(&chain, &scenario.kind_totals())?;
        let weights = compute_weights(&bound, chain.beta_or_default())?;
        let mut doc = chain;
        doc.norms = bound.norms;
        Ok(ChainDetail { chain: doc, weights })
    }

    pub fn build_policy(&self, spec: &PolicySpec, scenario: &ScenarioConfig, chain: &ChainDocument) -> Result<Box<dyn Policy>, Error> {
        Ok(match spec {
            PolicySpec::Random { seed } => Box::new(random_policy(*seed)),
            PolicySpec::Scripted { actions } => Box::new(ScriptedPolicy::new(actions.clone())),
            PolicySpec::Table { table } => Box::new(TabularPolicy::from_file(table.clone())?),
            PolicySpec::Solver { horizon } => {
                let r = exact_solve(
                    scenario,
                    chain,
                    &SolveOptions {
                        horizon: *horizon,
                        ..SolveOptions::default()
                    },
                )?;
                Box::new(r.scripted())
            }
        })
    }

    pub fn evaluate(&self, req: &EvaluateRequest) -> Result<EvaluationReport, Error> {
        let (scenario, chain) = self.resolve(&req.selection)?;
        let mut policy = self.build_policy(&req.policy, &scenario, &chain)?;
        evaluate(
            &scenario,
            &chain,
            policy.as_mut(),
            &EvalOptions {
                episodes: req.episodes.unwrap_or(DEFAULT_EPISODES),
                base_seed: req.seed.unwrap_or(0),
                subset: req.subset.clone(),
                cost: CostConfig {
                    normalize: req.normalize_cost,
                    ..CostConfig::default()
                },
                beta: None,
            },
        )
    }

    pub fn solve(&self, req: &SolveRequest) -> Result<SolveResult, Error> {
        let (scenario, chain) = self.resolve(&req.selection)?;
        exact_solve(
            &scenario,
            &chain,
            &SolveOptions {
                horizon: req.horizon,
                state_cap: req.state_cap.unwrap_or(DEFAULT_STATE_CAP),
                ..SolveOptions::default()
            },
        )
    }

    pub fn score(&self, req: &ScoreRequest) -> Result<ScoreReport, Error> {
        let (header, trace) = read_trace(req.trace.as_bytes())?;
        let chain = req.chain.as_deref().map(ChainDocument::resolve).transpose()?;
        score_trace(&header, &trace, chain.as_ref(), req.beta, req.normalize_cost)
    }

    pub fn train(&self, req: &TrainRequest) -> Result<TrainResponse, Error> {
        let (scenario, chain) = self.resolve(&req.selection)?;
        let result = q_learn(&scenario, &chain, &req.config)?;
        let mut policy = result.policy.clone();
        let report = evaluate(
            &scenario,
            &chain,
            &mut policy,
            &EvalOptions {
                episodes: req.eval_episodes.unwrap_or(DEFAULT_EPISODES),
                base_seed: req.config.seed,
                ..EvalOptions::default()
            },
        )?;
        Ok(TrainResponse {
            table: result.policy.to_file(&scenario.name, &chain.name),
            episodes: result.episodes,
            steps: result.steps,
            report,
        })
    }

    pub fn play(&self, req: &PlayRequest) -> Result<PlayResponse, Error> {
        let (scenario, chain) = self.resolve(&req.selection)?;
        let mut env = MoralEnv::new(
            scenario,
            chain,
            CostConfig {
                normalize: req.normalize_cost,
                ..CostConfig::default()
            },
        )?;
        let mut policy = ScriptedPolicy::new(req.actions.clone());
        let (header, trace) = record_episode(&mut env, &mut policy, req.seed)?;
        let mut frames = Vec::new();
        if req.render {
            let mut world = World::new(env.config().clone())?;
            frames.push(render_ascii(&world));
            for a in trace.actions() {
                world.step(a)?;
                frames.push(render_ascii(&world));
            }
        }
        let score = score_trace(&header, &trace, None, None, None)?;
        Ok(PlayResponse {
            trace: trace_to_string(&header, &trace),
            frames,
            score,
        })
    }
}

/// Exit-code class of an error: 2 for bad inputs, 3 for runtime failures.
pub fn exit_code(err: &Error) -> i32 {
    if err.is_config() {
        2
    } else {
        3
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn svc() -> Service {
        Service::new(Catalogue::builtin())
    }

    #[test]
    fn evaluate_pos_do_nothing() {
        let req = EvaluateRequest {
            selection: Selection::new("PushOrSwitch", include_str!("../data/chains/nph_mh.json")),
            policy: PolicySpec::Scripted { actions: vec![] },
            episodes: Some(3),
            seed: None,
            normalize_cost: false,
            subset: None,
        };
        let r = svc().evaluate(&req).unwrap();
        assert!((r.metric - 200.0 / 201.0).abs() < 1e-12);
    }

    #[test]
    fn unknown_chain_is_config_error() {
        let req = SolveRequest {
            selection: Selection::new("SwitchStandard", "Nope"),
            horizon: None,
            state_cap: None,
        };
        let err = svc().solve(&req).unwrap_err();
        assert_eq!(exit_code(&err), 2);
        assert!(err.to_string().contains("Nope"));
    }

    #[test]
    fn play_renders_frames() {
        let req = PlayRequest {
            selection: Selection::new("SwitchStandard", "Utility"),
            actions: vec![ActionKind::Interact],
            seed: 0,
            normalize_cost: false,
            render: true,
        };
        let r = svc().play(&req).unwrap();
        assert_eq!(r.frames.len(), r.trace.lines().count() - 1);
        assert!((r.score.adherence["min_humans_harmed"] - 1.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn selection_json_is_flat() {
        let req: EvaluateRequest = serde_json::from_str(
            r#"{"scenario":"SwitchStandard","chain":"U","policy":{"type":"random","seed":2},"episodes":5}"#,
        )
        .unwrap();
        assert_eq!(req.selection.chain, "U");
        assert_eq!(req.policy, PolicySpec::Random { seed: 2 });
    }
}
