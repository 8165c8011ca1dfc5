//! Table-backed scorer for tests and offline runs.
//!
//! The table file is JSON:
//!
//! ```json
//! {
//!   "models": ["base:toy:aca"],
//!   "uniform": {"base:toy:aca": 0.001},
//!   "scores": [
//!     {"model": "source:toy:aca:cnn", "prompt_id": "p1", "distribution": {"good": 0.5, "bad": 0.3}},
//!     {"model": "source:toy:aca:cnn", "text": "It is ___MASK___.", "distribution": {"fine": 0.2}}
//!   ],
//!   "embeddings": [{"model": "classifier:toy:aca", "text": "some text", "vector": [1.0, 0.0]}],
//!   "importance": [{"model": "classifier:toy:aca", "text": "a b c", "confidence": 0.9,
//!                   "predicted_source": "cnn", "scores": [0.1, 0.8, 0.1],
//!                   "word_alignment": [[0, 1], [1, 2], [2, 3]]}]
//! }
//! ```
//!
//! Rows are keyed by prompt id or by text; `text_sha256` may replace `text`.
//! Score lookups try the prompt id first, then the text hash. A model listed
//! under `uniform` answers every candidate with the same probability.
//! Candidates absent from a distribution score 0.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{
    EntryOrder, Importance, ModelId, ScoreMode, Scorer, ScorerError, ScorerRequest,
    TokenDistribution, TokenProb,
};
use crate::text;

pub fn text_hash(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct StubTable {
    #[serde(default)]
    pub models: Vec<String>,
    #[serde(default)]
    pub uniform: BTreeMap<String, f64>,
    #[serde(default)]
    pub scores: Vec<ScoreRow>,
    #[serde(default)]
    pub embeddings: Vec<EmbeddingRow>,
    #[serde(default)]
    pub importance: Vec<ImportanceRow>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct RowKey {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text_sha256: Option<String>,
}

impl RowKey {
    fn hash(&self) -> Option<String> {
        self.text_sha256
            .clone()
            .or_else(|| self.text.as_deref().map(text_hash))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoreRow {
    pub model: String,
    #[serde(flatten)]
    pub key: RowKey,
    pub distribution: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmbeddingRow {
    pub model: String,
    #[serde(flatten)]
    pub key: RowKey,
    pub vector: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ImportanceRow {
    pub model: String,
    #[serde(flatten)]
    pub key: RowKey,
    pub confidence: f64,
    pub predicted_source: String,
    pub scores: Vec<f64>,
    pub word_alignment: Vec<(usize, usize)>,
}

#[derive(Debug, Default)]
pub struct StubScorer {
    models: BTreeSet<ModelId>,
    uniform: HashMap<ModelId, f64>,
    by_prompt: HashMap<(ModelId, String), BTreeMap<String, f64>>,
    by_text: HashMap<(ModelId, String), BTreeMap<String, f64>>,
    embeddings: HashMap<(ModelId, String), Vec<f64>>,
    importance: HashMap<(ModelId, String), Importance>,
}

fn parse_model(key: &str) -> Result<ModelId, ScorerError> {
    key.parse()
}

impl StubScorer {
    pub fn from_path(path: &Path) -> Result<Self, ScorerError> {
        let raw = std::fs::read_to_string(path)
            .map_err(|e| ScorerError::Precondition(format!("{}: {e}", path.display())))?;
        let table: StubTable = serde_json::from_str(&raw)
            .map_err(|e| ScorerError::Precondition(format!("{}: {e}", path.display())))?;
        Self::from_table(table)
    }

    pub fn from_table(table: StubTable) -> Result<Self, ScorerError> {
        let mut s = StubScorer::default();
        for m in &table.models {
            s.models.insert(parse_model(m)?);
        }
        for (m, p) in &table.uniform {
            if !(0.0..=1.0).contains(p) {
                return Err(ScorerError::Precondition(format!(
                    "uniform probability {p} for {m} outside [0,1]"
                )));
            }
            let id = parse_model(m)?;
            s.models.insert(id.clone());
            s.uniform.insert(id, *p);
        }
        for row in table.scores {
            let id = parse_model(&row.model)?;
            if let Some((t, p)) = row
                .distribution
                .iter()
                .find(|(_, p)| !(0.0..=1.0).contains(*p))
            {
                return Err(ScorerError::Precondition(format!(
                    "stub probability {p} for {t:?} outside [0,1]"
                )));
            }
            s.models.insert(id.clone());
            if let Some(pid) = &row.key.prompt_id {
                s.by_prompt
                    .insert((id.clone(), pid.clone()), row.distribution.clone());
            }
            if let Some(h) = row.key.hash() {
                s.by_text.insert((id, h), row.distribution);
            }
        }
        for row in table.embeddings {
            let id = parse_model(&row.model)?;
            let h = row.key.hash().ok_or_else(|| {
                ScorerError::Precondition(format!("embedding row for {} has no text", row.model))
            })?;
            s.models.insert(id.clone());
            s.embeddings.insert((id, h), row.vector);
        }
        for row in table.importance {
            let id = parse_model(&row.model)?;
            let h = row.key.hash().ok_or_else(|| {
                ScorerError::Precondition(format!("importance row for {} has no text", row.model))
            })?;
            s.models.insert(id.clone());
            s.importance.insert(
                (id, h),
                Importance {
                    confidence: row.confidence,
                    predicted_source: row.predicted_source,
                    scores: row.scores,
                    word_alignment: row.word_alignment,
                },
            );
        }
        Ok(s)
    }

    fn registered(&self, model: &ModelId) -> Result<(), ScorerError> {
        if self.models.contains(model) {
            Ok(())
        } else {
            Err(ScorerError::ModelNotRegistered(model.key()))
        }
    }

    fn lookup(&self, request: &ScorerRequest) -> Result<&BTreeMap<String, f64>, ScorerError> {
        let model = &request.model;
        if let Some(pid) = &request.prompt_id {
            if let Some(d) = self.by_prompt.get(&(model.clone(), pid.clone())) {
                return Ok(d);
            }
        }
        let h = text_hash(&request.text_with_mask);
        self.by_text
            .get(&(model.clone(), h.clone()))
            .ok_or_else(|| ScorerError::MissingEntry {
                model: model.key(),
                key: request.prompt_id.clone().unwrap_or(h),
            })
    }
}

impl Scorer for StubScorer {
    fn score(&self, request: &ScorerRequest) -> Result<TokenDistribution, ScorerError> {
        request.validate()?;
        self.registered(&request.model)?;
        let prompt_id = request.prompt_id.clone().unwrap_or_default();
        let (entries, order) = match (&request.mode, self.uniform.get(&request.model)) {
            (ScoreMode::Candidates(c), Some(&p)) => (
                c.iter()
                    .map(|t| TokenProb {
                        token: t.clone(),
                        probability: p,
                        approximate: false,
                    })
                    .collect(),
                EntryOrder::Requested,
            ),
            (ScoreMode::TopK(_), Some(_)) => {
                return Err(ScorerError::Precondition(format!(
                    "uniform stub model {} only answers candidate queries",
                    request.model
                )))
            }
            (ScoreMode::Candidates(c), None) => {
                let dist = self.lookup(request)?;
                (
                    c.iter()
                        .map(|t| TokenProb {
                            token: t.clone(),
                            probability: dist.get(t).copied().unwrap_or(0.0),
                            approximate: false,
                        })
                        .collect(),
                    EntryOrder::Requested,
                )
            }
            (ScoreMode::TopK(k), None) => {
                let dist = self.lookup(request)?;
                let mut entries: Vec<TokenProb> = dist
                    .iter()
                    .map(|(t, &p)| TokenProb {
                        token: t.clone(),
                        probability: p,
                        approximate: false,
                    })
                    .collect();
                // BTreeMap iteration is token order, so a stable sort keeps
                // equal probabilities lexicographic.
                entries.sort_by(|a, b| b.probability.total_cmp(&a.probability));
                entries.truncate(*k);
                (entries, EntryOrder::Descending)
            }
        };
        let out = TokenDistribution {
            prompt_id,
            model: request.model.clone(),
            entries,
            order,
        };
        out.validate(&request.mode)?;
        Ok(out)
    }

    fn embed(&self, model: &ModelId, text: &str) -> Result<Vec<f64>, ScorerError> {
        self.registered(model)?;
        let h = text_hash(text);
        self.embeddings
            .get(&(model.clone(), h.clone()))
            .cloned()
            .ok_or_else(|| ScorerError::MissingEntry {
                model: model.key(),
                key: h,
            })
    }

    fn token_importance(
        &self,
        model: &ModelId,
        text: &str,
        _true_source: &str,
    ) -> Result<Importance, ScorerError> {
        self.registered(model)?;
        let h = text_hash(text);
        let imp = self
            .importance
            .get(&(model.clone(), h.clone()))
            .cloned()
            .ok_or_else(|| ScorerError::MissingEntry {
                model: model.key(),
                key: h,
            })?;
        imp.validate(text::words(text).len())?;
        Ok(imp)
    }

    fn models(&self) -> Result<Vec<ModelId>, ScorerError> {
        Ok(self.models.iter().cloned().collect())
    }
}
