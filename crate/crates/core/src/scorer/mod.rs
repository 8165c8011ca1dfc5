//! Model backends for masked-token scoring, instance embedding and token
//! importance.
//!
//! [`Scorer`] is the uniform interface. Two implementations ship with the
//! crate: [`StubScorer`] reads a fixed table file and needs no model runtime,
//! [`HttpScorer`] talks JSON to a model service.

mod http;
mod stub;

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use http::{HttpScorer, HttpScorerConfig};
pub use stub::{StubScorer, StubTable};

/// Placeholder for the masked position in prompt text. Backends substitute
/// their own mask token.
pub const MASK: &str = "___MASK___";

/// Floor applied to reference probabilities before division.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum ScorerError {
    #[error("model not registered: {0}")]
    ModelNotRegistered(String),
    /// Connection-level failure; safe to retry.
    #[error("transport failure: {0}")]
    Transport(String),
    /// The backend understood the request and refused it.
    #[error("request rejected ({status}): {message}")]
    Rejected { status: u16, message: String },
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("invalid response: {0}")]
    InvalidResponse(String),
    #[error("no stub entry for model {model} and key {key}")]
    MissingEntry { model: String, key: String },
}

impl ScorerError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, ScorerError::Transport(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// Pre-trained model without adaptation.
    Base,
    /// Adapted on the pooled training data of every source for one topic.
    Domain,
    /// Adapted on one source's training data for one topic.
    Source,
    /// Source classifier; serves token importance and LM-c embeddings.
    Classifier,
}

impl ModelKind {
    fn as_str(self) -> &'static str {
        match self {
            ModelKind::Base => "base",
            ModelKind::Domain => "domain",
            ModelKind::Source => "source",
            ModelKind::Classifier => "classifier",
        }
    }
}

/// Identifies one model in a backend registry.
///
/// The compact key form is `kind:family:topic` with a trailing `:source` for
/// per-source models, e.g. `source:roberta:aca:foxnews`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ModelId {
    pub kind: ModelKind,
    #[serde(default)]
    pub source: Option<String>,
    pub topic: String,
    pub family: String,
}

impl ModelId {
    pub fn base(family: &str, topic: &str) -> Self {
        Self::new(ModelKind::Base, None, topic, family)
    }

    pub fn domain(family: &str, topic: &str) -> Self {
        Self::new(ModelKind::Domain, None, topic, family)
    }

    pub fn source(family: &str, topic: &str, source: &str) -> Self {
        Self::new(ModelKind::Source, Some(source.to_string()), topic, family)
    }

    pub fn classifier(family: &str, topic: &str) -> Self {
        Self::new(ModelKind::Classifier, None, topic, family)
    }

    fn new(kind: ModelKind, source: Option<String>, topic: &str, family: &str) -> Self {
        ModelId {
            kind,
            source,
            topic: topic.to_string(),
            family: family.to_string(),
        }
    }

    pub fn validate(&self) -> Result<(), ScorerError> {
        match (self.kind, &self.source) {
            (ModelKind::Source, None) => Err(ScorerError::Precondition(format!(
                "source model {self} needs a source"
            ))),
            (ModelKind::Source, Some(_)) | (_, None) => Ok(()),
            (_, Some(_)) => Err(ScorerError::Precondition(format!(
                "{} model must not name a source",
                self.kind.as_str()
            ))),
        }
    }

    pub fn key(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.kind.as_str(), self.family, self.topic)?;
        if let Some(s) = &self.source {
            write!(f, ":{s}")?;
        }
        Ok(())
    }
}

impl FromStr for ModelId {
    type Err = ScorerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || ScorerError::Precondition(format!("malformed model key {s:?}"));
        let kind = match parts.first().copied() {
            Some("base") => ModelKind::Base,
            Some("domain") => ModelKind::Domain,
            Some("source") => ModelKind::Source,
            Some("classifier") => ModelKind::Classifier,
            _ => return Err(bad()),
        };
        let id = match parts.as_slice() {
            [_, family, topic] => ModelId::new(kind, None, topic, family),
            [_, family, topic, source] => {
                ModelId::new(kind, Some(source.to_string()), topic, family)
            }
            _ => return Err(bad()),
        };
        id.validate()?;
        Ok(id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreMode {
    TopK(usize),
    Candidates(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScorerRequest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt_id: Option<String>,
    pub model: ModelId,
    #[serde(rename = "text")]
    pub text_with_mask: String,
    pub mode: ScoreMode,
}

impl ScorerRequest {
    pub fn validate(&self) -> Result<(), ScorerError> {
        self.model.validate()?;
        check_single_mask(&self.text_with_mask)?;
        match &self.mode {
            ScoreMode::TopK(0) => Err(ScorerError::Precondition("top_k needs K >= 1".into())),
            ScoreMode::Candidates(c) if c.is_empty() => {
                Err(ScorerError::Precondition("empty candidate list".into()))
            }
            ScoreMode::Candidates(c) => {
                let mut seen = HashSet::new();
                match c.iter().find(|t| !seen.insert(t.as_str())) {
                    Some(dup) => Err(ScorerError::Precondition(format!(
                        "duplicate candidate {dup:?}"
                    ))),
                    None => Ok(()),
                }
            }
            ScoreMode::TopK(_) => Ok(()),
        }
    }
}

pub fn check_single_mask(text: &str) -> Result<(), ScorerError> {
    match text.matches(MASK).count() {
        1 => Ok(()),
        n => Err(ScorerError::Precondition(format!(
            "prompt must contain exactly one {MASK}, found {n}"
        ))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenProb {
    pub token: String,
    pub probability: f64,
    /// The candidate spans several backend pieces; only the first was scored.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub approximate: bool,
}

/// Order of [`TokenDistribution::entries`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntryOrder {
    /// Probability descending (top-K queries).
    Descending,
    /// The caller's candidate order (candidate queries).
    Requested,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenDistribution {
    pub prompt_id: String,
    pub model: ModelId,
    pub entries: Vec<TokenProb>,
    pub order: EntryOrder,
}

impl TokenDistribution {
    pub fn probability(&self, token: &str) -> Option<f64> {
        self.entries
            .iter()
            .find(|e| e.token == token)
            .map(|e| e.probability)
    }

    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.token.as_str())
    }

    /// Check the response invariants against the request that produced it.
    pub fn validate(&self, mode: &ScoreMode) -> Result<(), ScorerError> {
        let bad = |m: String| Err(ScorerError::InvalidResponse(m));
        let mut seen = HashSet::new();
        for e in &self.entries {
            if !(0.0..=1.0).contains(&e.probability) {
                return bad(format!("probability {} of {:?} outside [0,1]", e.probability, e.token));
            }
            if !seen.insert(e.token.as_str()) {
                return bad(format!("duplicate token {:?}", e.token));
            }
        }
        match mode {
            ScoreMode::TopK(k) => {
                if self.order != EntryOrder::Descending {
                    return bad("top_k response must be descending".into());
                }
                if self.entries.len() > *k {
                    return bad(format!("{} entries for top_k({k})", self.entries.len()));
                }
                if self
                    .entries
                    .windows(2)
                    .any(|w| w[0].probability < w[1].probability)
                {
                    return bad("top_k entries not sorted by probability".into());
                }
            }
            ScoreMode::Candidates(c) => {
                if self.order != EntryOrder::Requested
                    || self.entries.len() != c.len()
                    || self.entries.iter().zip(c).any(|(e, t)| &e.token != t)
                {
                    return bad("candidate entries do not match the request order".into());
                }
            }
        }
        Ok(())
    }
}

/// Per-token importance from a source classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Importance {
    pub confidence: f64,
    pub predicted_source: String,
    /// One score per backend token.
    pub scores: Vec<f64>,
    /// For each whitespace word, the half-open range of backend tokens.
    pub word_alignment: Vec<(usize, usize)>,
}

impl Importance {
    pub fn validate(&self, word_count: usize) -> Result<(), ScorerError> {
        let bad = |m: String| Err(ScorerError::InvalidResponse(m));
        if !(0.0..=1.0).contains(&self.confidence) {
            return bad(format!("confidence {} outside [0,1]", self.confidence));
        }
        if self.word_alignment.len() != word_count {
            return bad(format!(
                "alignment covers {} words, text has {word_count}",
                self.word_alignment.len()
            ));
        }
        let mut prev_end = 0;
        for (w, &(s, e)) in self.word_alignment.iter().enumerate() {
            if s >= e || s < prev_end || e > self.scores.len() {
                return bad(format!("bad alignment range {s}..{e} for word {w}"));
            }
            prev_end = e;
        }
        Ok(())
    }

    /// Word-level importance: max over each word's backend tokens.
    pub fn word_scores(&self) -> Vec<f64> {
        self.word_alignment
            .iter()
            .map(|&(s, e)| {
                self.scores[s..e]
                    .iter()
                    .copied()
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect()
    }
}

pub trait Scorer: Send + Sync {
    fn score(&self, request: &ScorerRequest) -> Result<TokenDistribution, ScorerError>;

    fn embed(&self, model: &ModelId, text: &str) -> Result<Vec<f64>, ScorerError>;

    fn token_importance(
        &self,
        model: &ModelId,
        text: &str,
        true_source: &str,
    ) -> Result<Importance, ScorerError>;

    fn models(&self) -> Result<Vec<ModelId>, ScorerError>;
}

/// Run `f` over `items` with at most `max_in_flight` calls at once. Results
/// come back in input order regardless of completion order.
pub fn bounded_map<T, R, F>(items: &[T], max_in_flight: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(max_in_flight.max(1))
        .build();
    match pool {
        Ok(pool) => pool.install(|| items.par_iter().map(&f).collect()),
        Err(_) => items.iter().map(f).collect(),
    }
}

pub const DEFAULT_MAX_IN_FLIGHT: usize = 8;

/// Score many requests with bounded concurrency; output order is request order.
pub fn score_all(
    scorer: &dyn Scorer,
    requests: &[ScorerRequest],
    max_in_flight: usize,
) -> Vec<Result<TokenDistribution, ScorerError>> {
    bounded_map(requests, max_in_flight, |r| scorer.score(r))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn model_key_round_trip() {
        for key in ["base:roberta:aca", "source:bert:tax:foxnews", "domain:x:y", "classifier:f:t"] {
            let id: ModelId = key.parse().unwrap();
            assert_eq!(id.key(), key);
        }
        assert!("source:roberta:aca".parse::<ModelId>().is_err());
        assert!("base:roberta:aca:cnn".parse::<ModelId>().is_err());
        assert!("weird:a:b".parse::<ModelId>().is_err());
    }

    #[test]
    fn wire_shape_of_request() {
        let req = ScorerRequest {
            prompt_id: None,
            model: ModelId::source("roberta", "aca", "cnn"),
            text_with_mask: format!("It is {MASK}."),
            mode: ScoreMode::TopK(2),
        };
        let v = serde_json::to_value(&req).unwrap();
        assert_eq!(
            v,
            serde_json::json!({
                "model": {"kind": "source", "source": "cnn", "topic": "aca", "family": "roberta"},
                "text": "It is ___MASK___.",
                "mode": {"top_k": 2}
            })
        );
        let c = serde_json::to_value(ScoreMode::Candidates(vec!["Yes".into()])).unwrap();
        assert_eq!(c, serde_json::json!({"candidates": ["Yes"]}));
    }

    #[test]
    fn request_preconditions() {
        let mut req = ScorerRequest {
            prompt_id: None,
            model: ModelId::base("f", "t"),
            text_with_mask: "no mask".into(),
            mode: ScoreMode::TopK(1),
        };
        assert!(matches!(req.validate(), Err(ScorerError::Precondition(_))));
        req.text_with_mask = format!("{MASK} {MASK}");
        assert!(req.validate().is_err());
        req.text_with_mask = format!("{MASK}!");
        req.mode = ScoreMode::Candidates(vec!["a".into(), "a".into()]);
        assert!(req.validate().is_err());
        req.mode = ScoreMode::Candidates(vec!["a".into(), "b".into()]);
        assert!(req.validate().is_ok());
    }

    #[test]
    fn importance_alignment_checks() {
        let imp = Importance {
            confidence: 0.9,
            predicted_source: "fox".into(),
            scores: vec![0.1, 0.8, 0.1, 0.5],
            word_alignment: vec![(0, 1), (1, 3), (3, 4)],
        };
        imp.validate(3).unwrap();
        assert_eq!(imp.word_scores(), vec![0.1, 0.8, 0.5]);
        assert!(imp.validate(2).is_err());
        let overlapping = Importance {
            word_alignment: vec![(0, 2), (1, 3), (3, 4)],
            ..imp.clone()
        };
        assert!(overlapping.validate(3).is_err());
        let bad_conf = Importance {
            confidence: 1.2,
            ..imp
        };
        assert!(bad_conf.validate(3).is_err());
    }

    #[test]
    fn bounded_map_preserves_order() {
        let xs: Vec<u64> = (0..200).collect();
        let ys = bounded_map(&xs, 8, |x| {
            std::thread::sleep(std::time::Duration::from_micros((200 - x) * 5));
            x * 2
        });
        assert_eq!(ys, xs.iter().map(|x| x * 2).collect::<Vec<_>>());
    }
}
