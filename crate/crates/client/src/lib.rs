//! Clients for a running moralgrid server: [`ServiceClient`] for the HTTP
//! API and [`EnvClient`] for the line-delimited environment protocol.

use std::io::{BufRead, BufReader, Write};
use std::net::{TcpStream, ToSocketAddrs};

use moralgrid_core::agents::SolveResult;
use moralgrid_core::engine::ActionKind;
use moralgrid_core::eval::EvaluationReport;
use moralgrid_core::protocol::{Describe, Request, Response};
use moralgrid_core::service::{
    EvaluateRequest, PlayRequest, PlayResponse, ScenarioDetail, ScenarioSummary, ScoreRequest,
    Selection, SolveRequest, TrainRequest, TrainResponse,
};
use moralgrid_core::trace::ScoreReport;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("http: {0}")]
    Http(#[from] reqwest::Error),
    /// The server answered with an error body.
    #[error("server returned {status}: {message}")]
    Api { status: u16, kind: String, message: String },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Protocol(String),
}

impl ClientError {
    /// True when the server rejected the inputs rather than failing to run.
    pub fn is_config(&self) -> bool {
        matches!(self, ClientError::Api { kind, .. } if kind == "config")
    }
}

#[derive(Debug, Deserialize)]
struct ErrorBody {
    error: String,
    #[serde(default)]
    kind: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SessionCreated {
    id: u64,
}

#[derive(Debug, Clone)]
pub struct ServiceClient {
    base: String,
    http: reqwest::Client,
}

impl ServiceClient {
    /// `base` like `http://127.0.0.1:8080`.
    pub fn new(base: impl Into<String>) -> Self {
        Self {
            base: base.into().trim_end_matches('/').to_string(),
            http: reqwest::Client::new(),
        }
    }

    pub fn base(&self) -> &str {
        &self.base
    }

    fn url(&self, path: &str) -> String {
        format!("{}{}", self.base, path)
    }

    async fn decode<T: DeserializeOwned>(resp: reqwest::Response) -> Result<T, ClientError> {
        let status = resp.status();
        let bytes = resp.bytes().await?;
        if status.is_success() {
            return Ok(serde_json::from_slice(&bytes)?);
        }
        let (kind, message) = match serde_json::from_slice::<ErrorBody>(&bytes) {
            Ok(b) => (b.kind, b.error),
            Err(_) => (
                if status.is_client_error() { "config" } else { "runtime" }.to_string(),
                String::from_utf8_lossy(&bytes).into_owned(),
            ),
        };
        Err(ClientError::Api {
            status: status.as_u16(),
            kind,
            message,
        })
    }

    async fn get<T: DeserializeOwned>(&self, path: &str) -> Result<T, ClientError> {
        Self::decode(self.http.get(self.url(path)).send().await?).await
    }

    async fn post<B: Serialize, T: DeserializeOwned>(&self, path: &str, body: &B) -> Result<T, ClientError> {
        Self::decode(self.http.post(self.url(path)).json(body).send().await?).await
    }

    pub async fn health(&self) -> Result<serde_json::Value, ClientError> {
        self.get("/health").await
    }

    pub async fn list(&self) -> Result<Vec<ScenarioSummary>, ClientError> {
        self.get("/v1/scenarios").await
    }

    pub async fn describe(&self, scenario: &str, variant: Option<&str>) -> Result<ScenarioDetail, ClientError> {
        let mut req = self.http.get(self.url(&format!("/v1/scenarios/{scenario}")));
        if let Some(v) = variant {
            req = req.query(&[("variant", v)]);
        }
        Self::decode(req.send().await?).await
    }

    pub async fn render(&self, scenario: &str, variant: Option<&str>) -> Result<String, ClientError> {
        Ok(self.describe(scenario, variant).await?.render)
    }

    pub async fn chain(&self, selection: &Selection) -> Result<serde_json::Value, ClientError> {
        // Weights come back with exact strings; keep them as plain JSON.
        self.post::<_, serde_json::Value>("/v1/chain", selection).await
    }

    pub async fn evaluate(&self, req: &EvaluateRequest) -> Result<EvaluationReport, ClientError> {
        self.post("/v1/evaluate", req).await
    }

    pub async fn solve(&self, req: &SolveRequest) -> Result<SolveResult, ClientError> {
        self.post("/v1/solve", req).await
    }

    pub async fn score(&self, req: &ScoreRequest) -> Result<ScoreReport, ClientError> {
        self.post("/v1/score", req).await
    }

    pub async fn train(&self, req: &TrainRequest) -> Result<TrainResponse, ClientError> {
        self.post("/v1/train", req).await
    }

    pub async fn play(&self, req: &PlayRequest) -> Result<PlayResponse, ClientError> {
        self.post("/v1/play", req).await
    }

    /// Opens an environment session driven over HTTP.
    pub async fn open_session(&self) -> Result<RemoteSession, ClientError> {
        let created: SessionCreated = Self::decode(self.http.post(self.url("/v1/sessions")).send().await?).await?;
        Ok(RemoteSession {
            client: self.clone(),
            id: created.id,
        })
    }
}

/// One server-side environment reached through the HTTP API.
#[derive(Debug, Clone)]
pub struct RemoteSession {
    client: ServiceClient,
    id: u64,
}

impl RemoteSession {
    pub fn id(&self) -> u64 {
        self.id
    }

    pub async fn send(&self, req: &Request) -> Result<Response, ClientError> {
        self.client.post(&format!("/v1/sessions/{}", self.id), req).await
    }

    pub async fn close(self) -> Result<(), ClientError> {
        let resp = self
            .client
            .http
            .delete(self.client.url(&format!("/v1/sessions/{}", self.id)))
            .send()
            .await?;
        if resp.status().is_success() {
            Ok(())
        } else {
            Err(ClientError::Api {
                status: resp.status().as_u16(),
                kind: "config".into(),
                message: format!("no session {}", self.id),
            })
        }
    }
}

/// Blocking client for the line protocol over TCP.
pub struct EnvClient {
    reader: BufReader<TcpStream>,
    writer: TcpStream,
}

impl EnvClient {
    pub fn connect(addr: impl ToSocketAddrs) -> Result<Self, ClientError> {
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        Ok(Self {
            reader: BufReader::new(stream.try_clone()?),
            writer: stream,
        })
    }

    /// Sends one request and reads its response, whatever `ok` says.
    pub fn request(&mut self, req: &Request) -> Result<Response, ClientError> {
        let mut line = serde_json::to_string(req)?;
        line.push('\n');
        self.writer.write_all(line.as_bytes())?;
        self.writer.flush()?;
        let mut buf = String::new();
        if self.reader.read_line(&mut buf)? == 0 {
            return Err(ClientError::Protocol("server closed the connection".into()));
        }
        Ok(serde_json::from_str(&buf)?)
    }

    fn checked(&mut self, req: &Request) -> Result<Response, ClientError> {
        let resp = self.request(req)?;
        if resp.ok {
            Ok(resp)
        } else {
            Err(ClientError::Protocol(resp.error.unwrap_or_else(|| "request failed".into())))
        }
    }

    pub fn reset(&mut self, seed: u64) -> Result<Response, ClientError> {
        self.checked(&Request::reset(seed))
    }

    pub fn step(&mut self, action: ActionKind) -> Result<Response, ClientError> {
        self.checked(&Request::step(action))
    }

    pub fn describe(&mut self) -> Result<Describe, ClientError> {
        self.checked(&Request::new("describe"))?
            .describe
            .ok_or_else(|| ClientError::Protocol("describe response without a description".into()))
    }

    pub fn close(mut self) -> Result<(), ClientError> {
        self.checked(&Request::new("close")).map(|_| ())
    }
}
