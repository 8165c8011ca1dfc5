//! Framing vectors: per-source token distributions for one prompt, optionally
//! normalized by a reference model, aligned over a shared vocabulary.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::promptgen::MaskedPrompt;
use crate::scorer::{
    bounded_map, ModelId, ScoreMode, Scorer, ScorerError, ScorerRequest, TokenDistribution,
    PROB_FLOOR,
};

#[derive(Debug, thiserror::Error)]
pub enum RepresentationError {
    #[error("reference distribution lacks tokens: {}", .0.join(", "))]
    MissingReference(Vec<String>),
    #[error("normalization mode {0} needs a reference distribution")]
    NoReference(NormalizationMode),
    #[error("no distributions to align for prompt {0}")]
    NothingToAlign(String),
    #[error("source {outlet} has token {token:?} outside the fixed vocabulary of prompt {prompt_id}")]
    OutsideVocabulary {
        prompt_id: String,
        outlet: String,
        token: String,
    },
    #[error("no prompts given")]
    NoPrompts,
    #[error("prompts span several topics: {0} and {1}")]
    MixedTopics(String, String),
    #[error("{skipped} of {total} prompts failed to score (limit {limit:.0}%)")]
    TooManySkipped {
        skipped: usize,
        total: usize,
        limit: f64,
    },
    #[error("unknown normalization mode {0:?}")]
    UnknownMode(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalizationMode {
    None,
    /// Divide by the pre-trained base model's probability.
    General,
    /// Divide by the topic's domain-adapted model's probability.
    Domain,
}

impl NormalizationMode {
    pub const ALL: [NormalizationMode; 3] = [
        NormalizationMode::None,
        NormalizationMode::General,
        NormalizationMode::Domain,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            NormalizationMode::None => "none",
            NormalizationMode::General => "general",
            NormalizationMode::Domain => "domain",
        }
    }

    /// The reference model for this mode, if any.
    pub fn reference_model(self, family: &str, topic: &str) -> Option<ModelId> {
        match self {
            NormalizationMode::None => None,
            NormalizationMode::General => Some(ModelId::base(family, topic)),
            NormalizationMode::Domain => Some(ModelId::domain(family, topic)),
        }
    }
}

impl fmt::Display for NormalizationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NormalizationMode {
    type Err = RepresentationError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        NormalizationMode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| RepresentationError::UnknownMode(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedToken {
    pub token: String,
    pub value: f64,
    /// The reference probability was below the floor and was clamped.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub floored: bool,
}

/// One source's (possibly normalized) token weights for one prompt. Values
/// are ratios after normalization, so they are not confined to [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FramingScores {
    pub prompt_id: String,
    pub entries: Vec<WeightedToken>,
}

impl From<&TokenDistribution> for FramingScores {
    fn from(d: &TokenDistribution) -> Self {
        FramingScores {
            prompt_id: d.prompt_id.clone(),
            entries: d
                .entries
                .iter()
                .map(|e| WeightedToken {
                    token: e.token.clone(),
                    value: e.probability,
                    floored: false,
                })
                .collect(),
        }
    }
}

/// Divide each fine-tuned probability by the reference probability of the
/// same token (floored at [`PROB_FLOOR`]). `None` passes values through.
pub fn normalize(
    finetuned: &TokenDistribution,
    reference: Option<&TokenDistribution>,
    mode: NormalizationMode,
) -> Result<FramingScores, RepresentationError> {
    if mode == NormalizationMode::None {
        return Ok(FramingScores::from(finetuned));
    }
    let reference = reference.ok_or(RepresentationError::NoReference(mode))?;
    let lookup: BTreeMap<&str, f64> = reference
        .entries
        .iter()
        .map(|e| (e.token.as_str(), e.probability))
        .collect();
    let missing: Vec<String> = finetuned
        .tokens()
        .filter(|t| !lookup.contains_key(t))
        .map(String::from)
        .collect();
    if !missing.is_empty() {
        return Err(RepresentationError::MissingReference(missing));
    }
    Ok(FramingScores {
        prompt_id: finetuned.prompt_id.clone(),
        entries: finetuned
            .entries
            .iter()
            .map(|e| {
                let r = lookup[e.token.as_str()];
                WeightedToken {
                    token: e.token.clone(),
                    value: e.probability / r.max(PROB_FLOOR),
                    floored: r < PROB_FLOOR,
                }
            })
            .collect(),
    })
}

/// Per-source vectors over a shared vocabulary for one prompt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FramingMatrix {
    pub prompt_id: String,
    pub vocabulary: Vec<String>,
    pub rows: BTreeMap<String, Vec<f64>>,
    /// Tokens whose reference probability was floored, per source.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub floored: BTreeMap<String, Vec<String>>,
}

impl FramingMatrix {
    pub fn row(&self, source: &str) -> Option<&[f64]> {
        self.rows.get(source).map(Vec::as_slice)
    }

    /// The `n` highest-valued tokens of a source (ties lexicographic), zero
    /// entries excluded.
    pub fn top_tokens(&self, source: &str, n: usize) -> Vec<(String, f64)> {
        let Some(row) = self.rows.get(source) else {
            return Vec::new();
        };
        let mut pairs: Vec<(String, f64)> = self
            .vocabulary
            .iter()
            .cloned()
            .zip(row.iter().copied())
            .filter(|(_, v)| *v > 0.0)
            .collect();
        pairs.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        pairs.truncate(n);
        pairs
    }
}

/// Align over the lexicographically sorted union of all sources' tokens,
/// filling zeros where a source lacks a token.
pub fn align(
    distributions: &BTreeMap<String, FramingScores>,
    prompt_id: &str,
) -> Result<FramingMatrix, RepresentationError> {
    let vocabulary: Vec<String> = distributions
        .values()
        .flat_map(|d| d.entries.iter().map(|e| e.token.clone()))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    align_to(distributions, prompt_id, vocabulary)
}

/// Align over a caller-fixed vocabulary (e.g. a candidate list).
pub fn align_to(
    distributions: &BTreeMap<String, FramingScores>,
    prompt_id: &str,
    vocabulary: Vec<String>,
) -> Result<FramingMatrix, RepresentationError> {
    if distributions.is_empty() {
        return Err(RepresentationError::NothingToAlign(prompt_id.to_string()));
    }
    let index: BTreeMap<&str, usize> = vocabulary
        .iter()
        .enumerate()
        .map(|(i, t)| (t.as_str(), i))
        .collect();
    let mut rows = BTreeMap::new();
    let mut floored = BTreeMap::new();
    for (source, dist) in distributions {
        let mut row = vec![0.0; vocabulary.len()];
        for e in &dist.entries {
            let &i = index.get(e.token.as_str()).ok_or_else(|| {
                RepresentationError::OutsideVocabulary {
                    prompt_id: prompt_id.to_string(),
                    outlet: source.clone(),
                    token: e.token.clone(),
                }
            })?;
            row[i] = e.value;
        }
        let f: Vec<String> = dist
            .entries
            .iter()
            .filter(|e| e.floored)
            .map(|e| e.token.clone())
            .collect();
        if !f.is_empty() {
            floored.insert(source.clone(), f);
        }
        rows.insert(source.clone(), row);
    }
    Ok(FramingMatrix {
        prompt_id: prompt_id.to_string(),
        vocabulary,
        rows,
        floored,
    })
}

/// All framing matrices of one topic, ordered by prompt id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicRepresentation {
    pub topic: String,
    pub prompt_count: usize,
    pub matrices: Vec<FramingMatrix>,
}

impl TopicRepresentation {
    pub fn new(topic: impl Into<String>, mut matrices: Vec<FramingMatrix>) -> Self {
        matrices.sort_by(|a, b| a.prompt_id.cmp(&b.prompt_id));
        TopicRepresentation {
            topic: topic.into(),
            prompt_count: matrices.len(),
            matrices,
        }
    }

    pub fn sources(&self) -> Vec<String> {
        self.matrices
            .first()
            .map(|m| m.rows.keys().cloned().collect())
            .unwrap_or_default()
    }
}

#[derive(Debug, Clone)]
pub struct RepresentationSettings {
    pub family: String,
    pub mode: NormalizationMode,
    pub k: usize,
    pub max_in_flight: usize,
    /// Run-level failure threshold on the fraction of skipped prompts.
    pub max_skip_fraction: f64,
}

impl RepresentationSettings {
    pub fn new(family: impl Into<String>, mode: NormalizationMode, k: usize) -> Self {
        RepresentationSettings {
            family: family.into(),
            mode,
            k,
            max_in_flight: crate::scorer::DEFAULT_MAX_IN_FLIGHT,
            max_skip_fraction: 0.10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedPrompt {
    pub prompt_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepresentationRun {
    pub representation: TopicRepresentation,
    pub skipped: Vec<SkippedPrompt>,
}

#[derive(Debug)]
enum PromptFailure {
    Scorer(ScorerError),
    Representation(RepresentationError),
}

impl fmt::Display for PromptFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PromptFailure::Scorer(e) => e.fmt(f),
            PromptFailure::Representation(e) => e.fmt(f),
        }
    }
}

fn matrix_for_prompt(
    prompt: &MaskedPrompt,
    sources: &[String],
    scorer: &dyn Scorer,
    settings: &RepresentationSettings,
) -> Result<FramingMatrix, PromptFailure> {
    let mode = match &prompt.candidates {
        Some(c) => ScoreMode::Candidates(c.clone()),
        None => ScoreMode::TopK(settings.k),
    };
    let mut raw: BTreeMap<String, TokenDistribution> = BTreeMap::new();
    for source in sources {
        let req = ScorerRequest {
            prompt_id: Some(prompt.id.clone()),
            model: ModelId::source(&settings.family, &prompt.topic, source),
            text_with_mask: prompt.text_with_mask.clone(),
            mode: mode.clone(),
        };
        raw.insert(source.clone(), scorer.score(&req).map_err(PromptFailure::Scorer)?);
    }
    let vocabulary: Vec<String> = match &prompt.candidates {
        Some(c) => c.clone(),
        None => raw
            .values()
            .flat_map(|d| d.tokens().map(String::from))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect(),
    };
    let reference = match settings.mode.reference_model(&settings.family, &prompt.topic) {
        None => None,
        Some(model) => {
            let req = ScorerRequest {
                prompt_id: Some(prompt.id.clone()),
                model,
                text_with_mask: prompt.text_with_mask.clone(),
                mode: ScoreMode::Candidates(vocabulary.clone()),
            };
            Some(scorer.score(&req).map_err(PromptFailure::Scorer)?)
        }
    };
    let normalized = raw
        .iter()
        .map(|(s, d)| Ok((s.clone(), normalize(d, reference.as_ref(), settings.mode)?)))
        .collect::<Result<BTreeMap<_, _>, RepresentationError>>()
        .map_err(PromptFailure::Representation)?;
    align_to(&normalized, &prompt.id, vocabulary).map_err(PromptFailure::Representation)
}

/// Score every prompt against every source model and build the topic's
/// framing matrices. Prompts that fail to score are skipped and reported; the
/// run fails when more than `max_skip_fraction` of prompts are skipped.
pub fn build_topic_representation(
    prompts: &[MaskedPrompt],
    sources: &[String],
    scorer: &dyn Scorer,
    settings: &RepresentationSettings,
) -> Result<RepresentationRun, RepresentationError> {
    let first = prompts.first().ok_or(RepresentationError::NoPrompts)?;
    if let Some(other) = prompts.iter().find(|p| p.topic != first.topic) {
        return Err(RepresentationError::MixedTopics(
            first.topic.clone(),
            other.topic.clone(),
        ));
    }
    let mut sources = sources.to_vec();
    sources.sort();
    sources.dedup();

    let results = bounded_map(prompts, settings.max_in_flight, |p| {
        matrix_for_prompt(p, &sources, scorer, settings)
    });
    let mut matrices = Vec::new();
    let mut skipped = Vec::new();
    for (p, r) in prompts.iter().zip(results) {
        match r {
            Ok(m) => matrices.push(m),
            Err(e) => {
                log::warn!("skipping prompt {}: {e}", p.id);
                skipped.push(SkippedPrompt {
                    prompt_id: p.id.clone(),
                    reason: e.to_string(),
                });
            }
        }
    }
    let total = prompts.len();
    if skipped.len() as f64 > settings.max_skip_fraction * total as f64 || matrices.is_empty() {
        return Err(RepresentationError::TooManySkipped {
            skipped: skipped.len(),
            total,
            limit: settings.max_skip_fraction * 100.0,
        });
    }
    Ok(RepresentationRun {
        representation: TopicRepresentation::new(first.topic.clone(), matrices),
        skipped,
    })
}
