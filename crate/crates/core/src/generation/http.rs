//! Client for OpenAI-compatible chat-completion endpoints.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::generation::prompt::render_prompt;
use crate::types::{GenerationParams, Problem, ResponseRecord, Topology};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EndpointConfig {
    /// Server root; requests go to `{base_url}/v1/chat/completions`.
    pub base_url: String,
    pub model_name: String,
    pub api_key_env: String,
    pub max_concurrency: usize,
    pub timeout_secs: u64,
    /// Extra attempts after the first one.
    pub retries: u32,
    /// Delay before retry `k` (1-based) is `backoff_base_ms * 2^(k-1)`.
    pub backoff_base_ms: u64,
}

impl Default for EndpointConfig {
    fn default() -> Self {
        EndpointConfig {
            base_url: "http://localhost:8000".into(),
            model_name: "default".into(),
            api_key_env: "OPENAI_API_KEY".into(),
            max_concurrency: 4,
            timeout_secs: 120,
            retries: 3,
            backoff_base_ms: 1000,
        }
    }
}

impl EndpointConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_concurrency == 0 {
            return Err(Error::Config("max_concurrency must be >= 1".into()));
        }
        if self.timeout_secs == 0 {
            return Err(Error::Config("timeout_secs must be >= 1".into()));
        }
        if self.base_url.trim().is_empty() || self.model_name.trim().is_empty() {
            return Err(Error::Config("endpoint needs base_url and model_name".into()));
        }
        Ok(())
    }

    pub fn url(&self) -> String {
        format!("{}/v1/chat/completions", self.base_url.trim_end_matches('/'))
    }

    fn api_key(&self) -> Result<String> {
        match std::env::var(&self.api_key_env) {
            Ok(k) if !k.trim().is_empty() => Ok(k),
            _ => Err(Error::Config(format!(
                "environment variable {} holding the API key is not set",
                self.api_key_env
            ))),
        }
    }
}

/// One request that still failed after all retries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RequestFailure {
    pub problem_id: String,
    pub topology: Topology,
    pub sample_index: usize,
    pub attempts: u32,
    pub error: String,
}

/// A single chat-completion request to issue.
#[derive(Clone, Debug)]
pub struct GenerationRequest<'a> {
    pub problem: &'a Problem,
    pub topology: Topology,
    pub sample_index: usize,
}

enum Attempt {
    Retryable(String),
    Fatal(String),
}

fn post_once(agent: &ureq::Agent, url: &str, key: &str, body: &Value) -> std::result::Result<String, Attempt> {
    let resp = agent
        .post(url)
        .set("Authorization", &format!("Bearer {key}"))
        .send_json(body.clone());
    match resp {
        Ok(r) => {
            let v: Value = r
                .into_json()
                .map_err(|e| Attempt::Retryable(format!("unreadable body: {e}")))?;
            v.pointer("/choices/0/message/content")
                .and_then(Value::as_str)
                .map(str::to_owned)
                .ok_or_else(|| Attempt::Fatal("response has no choices[0].message.content".into()))
        }
        Err(ureq::Error::Status(code, r)) => {
            let detail = r.into_string().unwrap_or_default();
            let msg = format!("HTTP {code}: {}", detail.chars().take(200).collect::<String>());
            if code >= 500 || code == 429 {
                Err(Attempt::Retryable(msg))
            } else {
                Err(Attempt::Fatal(msg))
            }
        }
        Err(ureq::Error::Transport(t)) => Err(Attempt::Retryable(t.to_string())),
    }
}

fn request_with_retries(
    agent: &ureq::Agent,
    cfg: &EndpointConfig,
    key: &str,
    body: &Value,
) -> std::result::Result<String, (u32, String)> {
    let url = cfg.url();
    let mut attempt = 0u32;
    loop {
        attempt += 1;
        match post_once(agent, &url, key, body) {
            Ok(text) => return Ok(text),
            Err(Attempt::Fatal(e)) => return Err((attempt, e)),
            Err(Attempt::Retryable(e)) => {
                if attempt > cfg.retries {
                    return Err((attempt, e));
                }
                let factor = 1u64 << (attempt - 1).min(20);
                std::thread::sleep(Duration::from_millis(cfg.backoff_base_ms.saturating_mul(factor)));
            }
        }
    }
}

/// Response body, or the attempt count and last error once retries run out.
type Attempted = std::result::Result<String, (u32, String)>;

/// Issues every request with at most `max_concurrency` in flight. Results
/// are in request order; failures go to the second vector.
pub fn http_generate_batch(
    cfg: &EndpointConfig,
    requests: &[GenerationRequest<'_>],
    params: &GenerationParams,
    seed: u64,
) -> Result<(Vec<ResponseRecord>, Vec<RequestFailure>)> {
    cfg.validate()?;
    params.validate()?;
    let key = cfg.api_key()?;
    let agent = ureq::AgentBuilder::new()
        .timeout(Duration::from_secs(cfg.timeout_secs))
        .build();

    let slots: Vec<Mutex<Option<Attempted>>> =
        requests.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = cfg.max_concurrency.min(requests.len()).max(1);
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(req) = requests.get(i) else { break };
                let body = json!({
                    "model": cfg.model_name,
                    "messages": [{
                        "role": "user",
                        "content": render_prompt(&req.problem.question, req.topology, params),
                    }],
                    "temperature": params.temperature,
                    "n": 1,
                });
                let outcome = request_with_retries(&agent, cfg, &key, &body);
                *slots[i].lock().expect("slot lock") = Some(outcome);
            });
        }
    });

    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (req, slot) in requests.iter().zip(slots) {
        let outcome = slot.into_inner().expect("slot lock").expect("every slot filled");
        match outcome {
            Ok(text) => records.push(ResponseRecord::from_text(
                format!("{}-{}-{:04}", req.problem.id, req.topology.as_str(), req.sample_index),
                &req.problem.id,
                req.topology,
                text,
                &cfg.model_name,
                seed,
            )),
            Err((attempts, error)) => failures.push(RequestFailure {
                problem_id: req.problem.id.clone(),
                topology: req.topology,
                sample_index: req.sample_index,
                attempts,
                error,
            }),
        }
    }
    Ok((records, failures))
}

/// `n` samples of one (problem, topology) cell.
pub fn http_generate(
    cfg: &EndpointConfig,
    problem: &Problem,
    topology: Topology,
    params: &GenerationParams,
    n: usize,
    seed: u64,
) -> Result<(Vec<ResponseRecord>, Vec<RequestFailure>)> {
    let requests: Vec<GenerationRequest<'_>> = (0..n)
        .map(|sample_index| GenerationRequest {
            problem,
            topology,
            sample_index,
        })
        .collect();
    http_generate_batch(cfg, &requests, params, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn url_joining() {
        let c = EndpointConfig {
            base_url: "http://h:1/".into(),
            ..Default::default()
        };
        assert_eq!(c.url(), "http://h:1/v1/chat/completions");
    }

    #[test]
    fn zero_concurrency_rejected() {
        let c = EndpointConfig {
            max_concurrency: 0,
            ..Default::default()
        };
        assert!(matches!(c.validate(), Err(Error::Config(_))));
    }
}
