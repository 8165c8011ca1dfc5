use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{
    EntryOrder, Importance, ModelId, ScoreMode, Scorer, ScorerError, ScorerRequest,
    TokenDistribution, TokenProb,
};
use crate::text;

#[derive(Debug, Clone)]
pub struct HttpScorerConfig {
    pub base_url: String,
    /// Total attempts for transport failures.
    pub attempts: u32,
    /// Delay before the first retry; doubled on each further retry.
    pub backoff: Duration,
    pub timeout: Duration,
}

impl HttpScorerConfig {
    pub fn new(base_url: impl Into<String>) -> Self {
        HttpScorerConfig {
            base_url: base_url.into(),
            attempts: 3,
            backoff: Duration::from_millis(200),
            timeout: Duration::from_secs(120),
        }
    }
}

/// Client for the model service JSON protocol:
/// `POST /score`, `POST /embed`, `POST /importance`, `GET /models`.
pub struct HttpScorer {
    config: HttpScorerConfig,
    agent: ureq::Agent,
}

#[derive(Serialize)]
struct EmbedBody<'a> {
    model: &'a ModelId,
    text: &'a str,
}

#[derive(Serialize)]
struct ImportanceBody<'a> {
    model: &'a ModelId,
    text: &'a str,
    true_source: &'a str,
}

#[derive(Deserialize)]
struct ScoreResponse {
    entries: Vec<TokenProb>,
}

#[derive(Deserialize)]
struct EmbedResponse {
    vector: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ModelsResponse {
    Wrapped { models: Vec<ModelId> },
    Bare(Vec<ModelId>),
}

enum Failure {
    Transport(String),
    Status(u16, String),
    Decode(String),
}

impl HttpScorer {
    pub fn new(config: HttpScorerConfig) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(config.timeout))
            .build()
            .into();
        HttpScorer { config, agent }
    }

    fn url(&self, path: &str) -> String {
        format!("{}{}", self.config.base_url.trim_end_matches('/'), path)
    }

    fn once<T: DeserializeOwned>(&self, path: &str, body: Option<&dyn erased::Body>) -> Result<T, Failure> {
        let url = self.url(path);
        let sent = match body {
            Some(b) => self.agent.post(&url).send_json(b.value()),
            None => self.agent.get(&url).call(),
        };
        let mut resp = sent.map_err(|e| Failure::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        if status >= 400 {
            let msg = resp
                .body_mut()
                .read_to_string()
                .unwrap_or_else(|e| e.to_string());
            return Err(Failure::Status(status, msg));
        }
        resp.body_mut()
            .read_json::<T>()
            .map_err(|e| Failure::Decode(e.to_string()))
    }

    /// Retries transport failures and 5xx responses with exponential backoff.
    fn call<T: DeserializeOwned>(
        &self,
        path: &str,
        body: Option<&dyn erased::Body>,
        model: Option<&ModelId>,
    ) -> Result<T, ScorerError> {
        let mut delay = self.config.backoff;
        let attempts = self.config.attempts.max(1);
        let mut last = String::new();
        for attempt in 1..=attempts {
            match self.once::<T>(path, body) {
                Ok(v) => return Ok(v),
                Err(Failure::Transport(m)) => last = m,
                Err(Failure::Status(s, m)) if s >= 500 => last = format!("status {s}: {m}"),
                Err(Failure::Status(404, m)) => {
                    return Err(match model {
                        Some(id) => ScorerError::ModelNotRegistered(id.key()),
                        None => ScorerError::Rejected {
                            status: 404,
                            message: m,
                        },
                    })
                }
                Err(Failure::Status(status, message)) => {
                    return Err(ScorerError::Rejected { status, message })
                }
                Err(Failure::Decode(m)) => return Err(ScorerError::InvalidResponse(m)),
            }
            if attempt < attempts {
                log::warn!("{path}: attempt {attempt} failed ({last}); retrying in {delay:?}");
                std::thread::sleep(delay);
                delay *= 2;
            }
        }
        Err(ScorerError::Transport(last))
    }
}

mod erased {
    /// Object-safe wrapper so retries can resend the same body.
    pub trait Body {
        fn value(&self) -> serde_json::Value;
    }

    impl<T: serde::Serialize> Body for T {
        fn value(&self) -> serde_json::Value {
            serde_json::to_value(self).unwrap_or(serde_json::Value::Null)
        }
    }
}

impl Scorer for HttpScorer {
    fn score(&self, request: &ScorerRequest) -> Result<TokenDistribution, ScorerError> {
        request.validate()?;
        let resp: ScoreResponse = self.call("/score", Some(request), Some(&request.model))?;
        let order = match request.mode {
            ScoreMode::TopK(_) => EntryOrder::Descending,
            ScoreMode::Candidates(_) => EntryOrder::Requested,
        };
        let dist = TokenDistribution {
            prompt_id: request.prompt_id.clone().unwrap_or_default(),
            model: request.model.clone(),
            entries: resp.entries,
            order,
        };
        dist.validate(&request.mode)?;
        Ok(dist)
    }

    fn embed(&self, model: &ModelId, text: &str) -> Result<Vec<f64>, ScorerError> {
        model.validate()?;
        let resp: EmbedResponse = self.call("/embed", Some(&EmbedBody { model, text }), Some(model))?;
        if resp.vector.is_empty() || resp.vector.iter().any(|v| !v.is_finite()) {
            return Err(ScorerError::InvalidResponse(
                "embedding must be a non-empty finite vector".into(),
            ));
        }
        Ok(resp.vector)
    }

    fn token_importance(
        &self,
        model: &ModelId,
        text: &str,
        true_source: &str,
    ) -> Result<Importance, ScorerError> {
        model.validate()?;
        let body = ImportanceBody {
            model,
            text,
            true_source,
        };
        let imp: Importance = self.call("/importance", Some(&body), Some(model))?;
        imp.validate(text::words(text).len())?;
        Ok(imp)
    }

    fn models(&self) -> Result<Vec<ModelId>, ScorerError> {
        let resp: ModelsResponse = self.call("/models", None, None)?;
        Ok(match resp {
            ModelsResponse::Wrapped { models } | ModelsResponse::Bare(models) => models,
        })
    }
}
