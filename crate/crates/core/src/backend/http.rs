use std::thread;
use std::time::Duration;

use reqwest::blocking::Client;
use reqwest::StatusCode;
use serde::de::DeserializeOwned;
use serde::Serialize;

use super::{Backend, EmbedRequest, EmbedResponse, ErrorBody, ScoreRequest, ScoreResponse};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    /// Extra attempts after the first one.
    pub retries: usize,
    /// Delay before the first retry; doubles on every further retry.
    pub initial_backoff: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            retries: 2,
            initial_backoff: Duration::from_millis(100),
        }
    }
}

/// Client for a `/v1/score` + `/v1/embed` server.
#[derive(Debug, Clone)]
pub struct HttpBackend {
    client: Client,
    base_url: String,
    policy: RetryPolicy,
}

enum Failure {
    Transient(String),
    Fatal(Error),
}

impl HttpBackend {
    pub fn new(base_url: &str, policy: RetryPolicy) -> Result<Self> {
        let client = Client::builder()
            .timeout(Duration::from_secs(120))
            .build()
            .map_err(|e| Error::Config(format!("cannot build HTTP client: {e}")))?;
        Ok(HttpBackend {
            client,
            base_url: base_url.trim_end_matches('/').to_string(),
            policy,
        })
    }

    pub fn base_url(&self) -> &str {
        &self.base_url
    }

    fn post<B: Serialize, R: DeserializeOwned>(&self, path: &str, body: &B) -> Result<R> {
        let url = format!("{}{path}", self.base_url);
        let mut backoff = self.policy.initial_backoff;
        let mut last = String::new();
        for attempt in 0..=self.policy.retries {
            if attempt > 0 {
                thread::sleep(backoff);
                backoff *= 2;
            }
            match self.post_once(&url, body) {
                Ok(r) => return Ok(r),
                Err(Failure::Fatal(e)) => return Err(e),
                Err(Failure::Transient(msg)) => last = msg,
            }
        }
        Err(Error::BackendUnavailable {
            attempts: self.policy.retries + 1,
            message: format!("{url}: {last}"),
        })
    }

    fn post_once<B: Serialize, R: DeserializeOwned>(&self, url: &str, body: &B) -> Result<R, Failure> {
        let resp = self
            .client
            .post(url)
            .json(body)
            .send()
            .map_err(|e| Failure::Transient(e.to_string()))?;
        let status = resp.status();
        let bytes = resp.bytes().map_err(|e| Failure::Transient(e.to_string()))?;
        if status.is_server_error() || status == StatusCode::TOO_MANY_REQUESTS {
            return Err(Failure::Transient(format!("HTTP {status}")));
        }
        if !status.is_success() {
            let detail = serde_json::from_slice::<ErrorBody>(&bytes)
                .map(|b| b.error)
                .unwrap_or_else(|_| String::from_utf8_lossy(&bytes).into_owned());
            return Err(Failure::Fatal(Error::Protocol(format!(
                "server rejected request (HTTP {status}): {detail}"
            ))));
        }
        serde_json::from_slice(&bytes)
            .map_err(|e| Failure::Fatal(Error::Protocol(format!("malformed response body: {e}"))))
    }
}

impl Backend for HttpBackend {
    fn score(&self, req: &ScoreRequest) -> Result<ScoreResponse> {
        req.validate()?;
        let resp: ScoreResponse = self.post("/v1/score", req)?;
        resp.check_against(req)?;
        Ok(resp)
    }

    fn embed(&self, texts: &[String]) -> Result<EmbedResponse> {
        let req = EmbedRequest { texts: texts.to_vec() };
        req.validate()?;
        let resp: EmbedResponse = self.post("/v1/embed", &req)?;
        resp.check_against(texts)?;
        Ok(resp)
    }
}

/// One-shot scoring call against `endpoint` with the default retry policy.
pub fn score_candidates(endpoint: &str, req: &ScoreRequest) -> Result<ScoreResponse> {
    HttpBackend::new(endpoint, RetryPolicy::default())?.score(req)
}

/// One-shot embedding call against `endpoint` with the default retry policy.
pub fn embed_texts(endpoint: &str, texts: &[String]) -> Result<EmbedResponse> {
    HttpBackend::new(endpoint, RetryPolicy::default())?.embed(texts)
}
