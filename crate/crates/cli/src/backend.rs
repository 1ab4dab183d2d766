//! Runs an operation in process or against a remote server.

use std::fmt;

use moralgrid_client::{ClientError, ServiceClient};
use moralgrid_core::agents::SolveResult;
use moralgrid_core::eval::EvaluationReport;
use moralgrid_core::scenario::Catalogue;
use moralgrid_core::service::{
    exit_code, EvaluateRequest, PlayRequest, PlayResponse, ScenarioDetail, ScenarioSummary, ScoreRequest, Selection,
    Service, SolveRequest, TrainRequest, TrainResponse,
};
use moralgrid_core::trace::ScoreReport;

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_CONFIG,
            message: message.into(),
        }
    }

    pub fn runtime(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_RUNTIME,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<moralgrid_core::Error> for CliError {
    fn from(e: moralgrid_core::Error) -> Self {
        Self {
            code: exit_code(&e),
            message: e.to_string(),
        }
    }
}

impl From<moralgrid_core::scenario::ScenarioError> for CliError {
    fn from(e: moralgrid_core::scenario::ScenarioError) -> Self {
        moralgrid_core::Error::from(e).into()
    }
}

impl From<ClientError> for CliError {
    fn from(e: ClientError) -> Self {
        Self {
            code: if e.is_config() { EXIT_CONFIG } else { EXIT_RUNTIME },
            message: e.to_string(),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub enum Backend {
    Local(Service),
    Remote {
        client: ServiceClient,
        rt: tokio::runtime::Runtime,
    },
}

impl Backend {
    pub fn local() -> CliResult<Self> {
        Ok(Backend::Local(Service::new(Catalogue::from_env()?)))
    }

    pub fn remote(url: &str) -> CliResult<Self> {
        let rt = tokio::runtime::Builder::new_current_thread()
            .enable_all()
            .build()
            .map_err(|e| CliError::runtime(format!("cannot start runtime: {e}")))?;
        Ok(Backend::Remote {
            client: ServiceClient::new(url),
            rt,
        })
    }

    pub fn list(&self) -> CliResult<Vec<ScenarioSummary>> {
        match self {
            Backend::Local(s) => Ok(s.list()),
            Backend::Remote { client, rt } => Ok(rt.block_on(client.list())?),
        }
    }

    pub fn describe(&self, scenario: &str, variant: Option<&str>) -> CliResult<ScenarioDetail> {
        match self {
            Backend::Local(s) => Ok(s.describe(scenario, variant)?),
            Backend::Remote { client, rt } => Ok(rt.block_on(client.describe(scenario, variant))?),
        }
    }

    pub fn chain(&self, selection: &Selection) -> CliResult<serde_json::Value> {
        match self {
            Backend::Local(s) => Ok(serde_json::to_value(s.chain(selection)?).expect("serializable")),
            Backend::Remote { client, rt } => Ok(rt.block_on(client.chain(selection))?),
        }
    }

    pub fn evaluate(&self, req: &EvaluateRequest) -> CliResult<EvaluationReport> {
        match self {
            Backend::Local(s) => Ok(s.evaluate(req)?),
            Backend::Remote { client, rt } => Ok(rt.block_on(client.evaluate(req))?),
        }
    }

    pub fn solve(&self, req: &SolveRequest) -> CliResult<SolveResult> {
        match self {
            Backend::Local(s) => Ok(s.solve(req)?),
            Backend::Remote { client, rt } => Ok(rt.block_on(client.solve(req))?),
        }
    }

    pub fn score(&self, req: &ScoreRequest) -> CliResult<ScoreReport> {
        match self {
            Backend::Local(s) => Ok(s.score(req)?),
            Backend::Remote { client, rt } => Ok(rt.block_on(client.score(req))?),
        }
    }

    pub fn train(&self, req: &TrainRequest) -> CliResult<TrainResponse> {
        match self {
            Backend::Local(s) => Ok(s.train(req)?),
            Backend::Remote { client, rt } => Ok(rt.block_on(client.train(req))?),
        }
    }

    pub fn play(&self, req: &PlayRequest) -> CliResult<PlayResponse> {
        match self {
            Backend::Local(s) => Ok(s.play(req)?),
            Backend::Remote { client, rt } => Ok(rt.block_on(client.play(req))?),
        }
    }
}
