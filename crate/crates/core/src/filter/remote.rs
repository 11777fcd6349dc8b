//! HTTP client for an NLI microservice.
//!
//! Wire format (JSON, UTF-8):
//!
//! ```text
//! POST /classify        {"premise": s, "hypothesis": s}   -> {"contradiction": f, "neutral": f, "entailment": f}
//! POST /classify_batch  {"pairs": [[premise, hypothesis], ...]} -> {"verdicts": [verdict, ...]}
//! GET  /health          -> {"status": "ok", "model": s}
//! ```
//!
//! 200 on success, 400 on malformed input, 413 on oversize input, 503 while
//! the model is not loaded.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::verdict::{NliProvider, NliVerdict, WIRE_SIMPLEX_TOL};
use crate::error::{Error, Result};

/// Environment variable that overrides the configured endpoint.
pub const ENDPOINT_ENV: &str = "AUTHORLM_NLI_ENDPOINT";

const EXCERPT_CHARS: usize = 200;

#[derive(Serialize)]
struct ClassifyRequest<'a> {
    premise: &'a str,
    hypothesis: &'a str,
}

#[derive(Serialize)]
struct BatchRequest<'a> {
    pairs: Vec<[&'a str; 2]>,
}

/// A verdict as the service sends it; `truncated` flags inputs cut to the
/// model's maximum sequence length.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct WireVerdict {
    contradiction: f64,
    neutral: f64,
    entailment: f64,
    #[serde(default)]
    truncated: bool,
}

impl WireVerdict {
    fn into_verdict(self) -> Result<NliVerdict> {
        if self.truncated {
            log::debug!("NLI service truncated an input pair");
        }
        let v = NliVerdict {
            contradiction: self.contradiction,
            neutral: self.neutral,
            entailment: self.entailment,
        };
        v.validate(WIRE_SIMPLEX_TOL)?;
        Ok(v)
    }
}

#[derive(Deserialize)]
struct BatchResponse {
    verdicts: Vec<WireVerdict>,
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct Health {
    pub status: String,
    pub model: String,
}

#[derive(Debug, Clone)]
pub struct RemoteProvider {
    endpoint: String,
    agent: ureq::Agent,
}

fn excerpt(body: &str) -> String {
    let mut s: String = body.chars().take(EXCERPT_CHARS).collect();
    if body.chars().count() > EXCERPT_CHARS {
        s.push('…');
    }
    s
}

fn transport(endpoint: &str, e: ureq::Error) -> Error {
    Error::ProviderUnavailable(format!("{endpoint}: {e}"))
}

impl RemoteProvider {
    pub fn new(endpoint: &str, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            endpoint: endpoint.trim_end_matches('/').to_string(),
            agent,
        }
    }

    /// `endpoint`, unless [`ENDPOINT_ENV`] is set.
    pub fn from_env_or(endpoint: &str, timeout: Duration) -> Self {
        match std::env::var(ENDPOINT_ENV) {
            Ok(url) if !url.is_empty() => Self::new(&url, timeout),
            _ => Self::new(endpoint, timeout),
        }
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    fn read(
        &self,
        path: &str,
        resp: std::result::Result<ureq::http::Response<ureq::Body>, ureq::Error>,
    ) -> Result<String> {
        let url = format!("{}{path}", self.endpoint);
        let mut resp = resp.map_err(|e| transport(&url, e))?;
        let status = resp.status().as_u16();
        let body = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| transport(&url, e))?;
        match status {
            200 => Ok(body),
            503 => Err(Error::ProviderUnavailable(format!(
                "{url}: 503 {}",
                excerpt(&body)
            ))),
            s if s >= 500 => Err(Error::ProviderUnavailable(format!(
                "{url}: {s} {}",
                excerpt(&body)
            ))),
            s => Err(Error::Protocol(format!(
                "{url}: HTTP {s}: {}",
                excerpt(&body)
            ))),
        }
    }

    fn parse<T: serde::de::DeserializeOwned>(&self, path: &str, body: &str) -> Result<T> {
        serde_json::from_str(body).map_err(|e| {
            Error::Protocol(format!(
                "{}{path}: {e}; body: {}",
                self.endpoint,
                excerpt(body)
            ))
        })
    }

    pub fn health(&self) -> Result<Health> {
        let body = self.read(
            "/health",
            self.agent.get(format!("{}/health", self.endpoint)).call(),
        )?;
        self.parse("/health", &body)
    }
}

impl NliProvider for RemoteProvider {
    fn name(&self) -> String {
        format!("remote:{}", self.endpoint)
    }

    fn classify(&self, premise: &str, hypothesis: &str) -> Result<NliVerdict> {
        let req = ClassifyRequest {
            premise,
            hypothesis,
        };
        let body = self.read(
            "/classify",
            self.agent
                .post(format!("{}/classify", self.endpoint))
                .send_json(&req),
        )?;
        let v: WireVerdict = self.parse("/classify", &body)?;
        v.into_verdict()
    }

    fn classify_batch(&self, pairs: &[(String, String)]) -> Result<Vec<NliVerdict>> {
        let req = BatchRequest {
            pairs: pairs
                .iter()
                .map(|(p, h)| [p.as_str(), h.as_str()])
                .collect(),
        };
        let body = self.read(
            "/classify_batch",
            self.agent
                .post(format!("{}/classify_batch", self.endpoint))
                .send_json(&req),
        )?;
        let resp: BatchResponse = self.parse("/classify_batch", &body)?;
        if resp.verdicts.len() != pairs.len() {
            return Err(Error::Protocol(format!(
                "/classify_batch returned {} verdicts for {} pairs",
                resp.verdicts.len(),
                pairs.len()
            )));
        }
        resp.verdicts
            .into_iter()
            .map(WireVerdict::into_verdict)
            .collect()
    }
}
