//! Line-delimited JSON environment protocol. One request object per line,
//! one response object per line. A [`Session`] holds one environment.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::engine::{flat_len, flatten_observation, render_ascii, ActionKind, Observation};
use crate::env::{MoralEnv, StepInfo};
use crate::ledger::CostConfig;
use crate::morality::ChainWeights;
use crate::scenario::{instantiate_variant, load_scenario, Catalogue, ChainDocument, ScenarioConfig};
use crate::Error;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Request {
    pub cmd: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action: Option<String>,
    /// Catalogue name, inline scenario JSON, or a scenario object.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<serde_json::Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variant: Option<String>,
    /// Preset name, inline chain JSON, or a chain object.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chain: Option<serde_json::Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normalize_cost: Option<bool>,
    /// Also return the flattened observation vector.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flat: Option<bool>,
}

impl Request {
    pub fn new(cmd: &str) -> Self {
        Self {
            cmd: cmd.into(),
            ..Self::default()
        }
    }

    pub fn step(action: ActionKind) -> Self {
        Self {
            action: Some(action.to_string()),
            ..Self::new("step")
        }
    }

    pub fn reset(seed: u64) -> Self {
        Self {
            seed: Some(seed),
            ..Self::new("reset")
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Response {
    pub ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub obs: Option<Observation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub obs_flat: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reward: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub terminated: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncated: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub info: Option<StepInfo>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub describe: Option<Describe>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Response {
    fn error(msg: impl Into<String>) -> Self {
        Self {
            ok: false,
            error: Some(msg.into()),
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Describe {
    pub scenario: String,
    pub chain: ChainDocument,
    pub weights: Vec<f64>,
    pub beta: f64,
    pub actions: Vec<ActionKind>,
    pub observation_width: usize,
    pub max_steps: u32,
    pub render: String,
    pub episode_active: bool,
}

/// What a fresh session is bound to before any `reset` overrides it.
#[derive(Debug, Clone)]
pub struct SessionDefaults {
    pub scenario: ScenarioConfig,
    pub chain: ChainDocument,
    pub cost: CostConfig,
}

pub struct Session {
    catalogue: Arc<Catalogue>,
    /// Scenario before any variant.
    base: ScenarioConfig,
    scenario: ScenarioConfig,
    chain: ChainDocument,
    cost: CostConfig,
    env: Option<MoralEnv>,
    started: bool,
    closed: bool,
}

impl Session {
    pub fn new(catalogue: Arc<Catalogue>, defaults: SessionDefaults) -> Self {
        Self {
            catalogue,
            base: defaults.scenario.clone(),
            scenario: defaults.scenario,
            chain: defaults.chain,
            cost: defaults.cost,
            env: None,
            started: false,
            closed: false,
        }
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    /// Handles one request line and returns the response line (no newline).
    pub fn handle_line(&mut self, line: &str) -> String {
        let resp = match serde_json::from_str::<Request>(line) {
            Ok(req) => self.handle(&req),
            Err(e) => Response::error(format!("malformed request: {e}")),
        };
        serde_json::to_string(&resp).expect("responses serialize")
    }

    pub fn handle(&mut self, req: &Request) -> Response {
        if self.closed {
            return Response::error("session closed");
        }
        let result = match req.cmd.as_str() {
            "reset" => self.reset(req),
            "step" => self.step(req),
            "describe" => self.describe(),
            "close" => {
                self.closed = true;
                Ok(Response {
                    ok: true,
                    ..Response::default()
                })
            }
            other => Err(Error::Config(format!(
                "unknown cmd '{other}'; expected reset, step, describe or close"
            ))),
        };
        result.unwrap_or_else(|e| Response::error(e.to_string()))
    }

    fn resolve_scenario(&self, v: &serde_json::Value) -> Result<ScenarioConfig, Error> {
        Ok(match v {
            serde_json::Value::String(s) => self.catalogue.resolve(s)?,
            other => load_scenario(&other.to_string())?,
        })
    }

    fn env(&mut self) -> Result<&mut MoralEnv, Error> {
        if self.env.is_none() {
            self.env = Some(MoralEnv::new(self.scenario.clone(), self.chain.clone(), self.cost)?);
        }
        Ok(self.env.as_mut().expect("just built"))
    }

    fn reset(&mut self, req: &Request) -> Result<Response, Error> {
        let changes = req.scenario.is_some()
            || req.variant.is_some()
            || req.chain.is_some()
            || req.beta.is_some()
            || req.normalize_cost.is_some();
        if changes {
            // Build everything first so a bad request leaves the session as it was.
            let base = match &req.scenario {
                Some(v) => self.resolve_scenario(v)?,
                None => self.base.clone(),
            };
            let scenario = match &req.variant {
                Some(v) => instantiate_variant(&base, &self.catalogue.resolve_variant(v)?)?,
                None if req.scenario.is_some() => base.clone(),
                None => self.scenario.clone(),
            };
            let mut chain = match &req.chain {
                Some(serde_json::Value::String(s)) => ChainDocument::resolve(s)?,
                Some(other) => ChainDocument::parse(&other.to_string())?,
                None => self.chain.clone(),
            };
            if req.beta.is_some() {
                chain.beta = req.beta;
            }
            let mut cost = self.cost;
            if let Some(n) = req.normalize_cost {
                cost.normalize = n;
            }
            let env = MoralEnv::new(scenario.clone(), chain.clone(), cost)?;
            self.base = base;
            self.scenario = scenario;
            self.chain = chain;
            self.cost = cost;
            self.env = Some(env);
        }
        let flat = req.flat.unwrap_or(false);
        let env = self.env()?;
        let obs = env.reset(req.seed.unwrap_or(0));
        self.started = true;
        Ok(Response {
            ok: true,
            obs_flat: flat.then(|| flatten_observation(&obs)),
            obs: Some(obs),
            ..Response::default()
        })
    }

    fn step(&mut self, req: &Request) -> Result<Response, Error> {
        if !self.started {
            return Err(Error::Config("no active episode; send reset first".into()));
        }
        let action: ActionKind = req
            .action
            .as_deref()
            .ok_or_else(|| Error::Config("step needs an action".into()))?
            .parse()
            .map_err(|e: crate::engine::ParseActionError| Error::Config(e.to_string()))?;
        let flat = req.flat.unwrap_or(false);
        let env = self.env()?;
        let out = env.step(action)?;
        Ok(Response {
            ok: true,
            obs_flat: flat.then(|| flatten_observation(&out.obs)),
            obs: Some(out.obs),
            reward: Some(out.reward),
            terminated: Some(out.terminated),
            truncated: Some(out.truncated),
            info: Some(out.info),
            ..Response::default()
        })
    }

    fn describe(&mut self) -> Result<Response, Error> {
        let started = self.started;
        let env = self.env()?;
        let weights: &ChainWeights = env.weights();
        let mut chain = env.chain_document().clone();
        chain.norms = env.chain().norms.clone();
        Ok(Response {
            ok: true,
            describe: Some(Describe {
                scenario: env.config().name.clone(),
                chain,
                weights: weights.values().to_vec(),
                beta: env.beta(),
                actions: ActionKind::ALL.to_vec(),
                observation_width: flat_len(env.world()),
                max_steps: env.config().reward.max_steps,
                render: render_ascii(env.world()),
                episode_active: started && !env.is_over(),
            }),
            ..Response::default()
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::ChainPreset;

    fn session() -> Session {
        let cat = Arc::new(Catalogue::builtin());
        let scenario = cat.get("SwitchStandard").unwrap().clone();
        Session::new(
            cat,
            SessionDefaults {
                scenario,
                chain: ChainPreset::Utility.document(),
                cost: CostConfig::default(),
            },
        )
    }

    fn parse(s: &str) -> Response {
        serde_json::from_str(s).unwrap()
    }

    #[test]
    fn step_before_reset_fails() {
        let mut s = session();
        let r = parse(&s.handle_line(r#"{"cmd":"step","action":"STAY"}"#));
        assert!(!r.ok);
        assert!(r.error.unwrap().contains("reset"));
    }

    #[test]
    fn malformed_and_unknown() {
        let mut s = session();
        assert!(!parse(&s.handle_line("{nope")).ok);
        assert!(!parse(&s.handle_line(r#"{"cmd":"fly"}"#)).ok);
        assert!(!parse(&s.handle_line(r#"{"cmd":"reset","extra":1}"#)).ok);
        // The session survives bad lines.
        assert!(parse(&s.handle_line(r#"{"cmd":"reset","seed":1}"#)).ok);
    }

    #[test]
    fn episode_end_then_reset() {
        let mut s = session();
        s.handle_line(r#"{"cmd":"reset","seed":0}"#);
        let mut last = Response::default();
        for _ in 0..100 {
            last = parse(&s.handle_line(r#"{"cmd":"step","action":"STAY"}"#));
            if last.terminated == Some(true) || last.truncated == Some(true) {
                break;
            }
        }
        assert!(last.ok);
        let r = parse(&s.handle_line(r#"{"cmd":"step","action":"STAY"}"#));
        assert!(!r.ok);
        assert!(r.error.unwrap().contains("episode finished"));
        assert!(parse(&s.handle_line(r#"{"cmd":"reset"}"#)).ok);
        assert!(parse(&s.handle_line(r#"{"cmd":"step","action":"UP"}"#)).ok);
    }

    #[test]
    fn reset_switches_scenario_and_describe_reports_it() {
        let mut s = session();
        let r = parse(&s.handle_line(r#"{"cmd":"reset","scenario":"PushStandard","chain":"DP","flat":true}"#));
        assert!(r.ok, "{:?}", r.error);
        let width = r.obs_flat.unwrap().len();
        let d = parse(&s.handle_line(r#"{"cmd":"describe"}"#)).describe.unwrap();
        assert_eq!(d.scenario, "PushStandard");
        assert_eq!(d.observation_width, width);
        assert!(d.episode_active);
        let bad = parse(&s.handle_line(r#"{"cmd":"reset","scenario":"Nowhere"}"#));
        assert!(!bad.ok);
        // A failed reset leaves the previous binding intact.
        let d = parse(&s.handle_line(r#"{"cmd":"describe"}"#)).describe.unwrap();
        assert_eq!(d.scenario, "PushStandard");
    }

    #[test]
    fn close_ends_session() {
        let mut s = session();
        assert!(parse(&s.handle_line(r#"{"cmd":"close"}"#)).ok);
        assert!(s.is_closed());
        assert!(!parse(&s.handle_line(r#"{"cmd":"reset"}"#)).ok);
    }
}
