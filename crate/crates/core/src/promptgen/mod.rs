//! Masked prompt generation: automatic strategies over dev-set instances and
//! expansion of manual templates.

mod manual;
mod ngrams;
mod sampled;

use std::collections::HashSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::jsonl::{self, JsonlError};
use crate::scorer::{check_single_mask, ScorerError, MASK};
use crate::text;

pub use manual::{
    expand_manual_templates, AnswerMode, ManualTemplate, NounPair, Structure, TemplateSet,
    TopicTemplates, QA_CANDIDATES,
};
pub use ngrams::{
    extract_shared_ngrams, generate_bigram_inner, generate_bigram_outer, generate_ngram_inner,
    generate_trigram_inner, NgramSet,
};
pub use sampled::{generate_attention, generate_random};

#[derive(Debug, thiserror::Error)]
pub enum PromptError {
    #[error("n-gram length must be 2 or 3, got {0}")]
    BadNgramLength(usize),
    #[error("{required} sources required, only {available} present")]
    TooFewSources { required: usize, available: usize },
    #[error("template {0}: single-sentence mode needs an antonym pair")]
    MissingAntonyms(String),
    #[error("template {0}: question-answer mode needs a slot word")]
    MissingSlotWord(String),
    #[error("invalid prompt {id}: {reason}")]
    InvalidPrompt { id: String, reason: String },
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Scorer(#[from] ScorerError),
    #[error(transparent)]
    Jsonl(#[from] JsonlError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Random,
    Attention,
    BigramInner,
    TrigramInner,
    BigramOuter,
    Manual,
}

impl Origin {
    pub const ALL: [Origin; 6] = [
        Origin::Random,
        Origin::Attention,
        Origin::BigramInner,
        Origin::TrigramInner,
        Origin::BigramOuter,
        Origin::Manual,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Origin::Random => "random",
            Origin::Attention => "attention",
            Origin::BigramInner => "bigram_inner",
            Origin::TrigramInner => "trigram_inner",
            Origin::BigramOuter => "bigram_outer",
            Origin::Manual => "manual",
        }
    }
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Origin {
    type Err = PromptError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Origin::ALL
            .into_iter()
            .find(|o| o.as_str() == s)
            .ok_or_else(|| PromptError::Config(format!("unknown prompt method {s:?}")))
    }
}

/// A text with exactly one [`MASK`] plus where it came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskedPrompt {
    pub id: String,
    pub text_with_mask: String,
    pub topic: String,
    pub origin: Origin,
    /// The n-gram or template id that produced the prompt.
    pub anchor: String,
    pub candidates: Option<Vec<String>>,
    pub gold_token: Option<String>,
}

impl MaskedPrompt {
    pub fn validate(&self) -> Result<(), PromptError> {
        let invalid = |reason: String| PromptError::InvalidPrompt {
            id: self.id.clone(),
            reason,
        };
        check_single_mask(&self.text_with_mask).map_err(|e| invalid(e.to_string()))?;
        if let Some(c) = &self.candidates {
            if c.len() < 2 {
                return Err(invalid("fewer than two candidates".into()));
            }
            let unique: HashSet<&String> = c.iter().collect();
            if unique.len() != c.len() {
                return Err(invalid("duplicate candidates".into()));
            }
        }
        Ok(())
    }

    /// Text on either side of the mask.
    pub fn context(&self) -> (&str, &str) {
        self.text_with_mask
            .split_once(MASK)
            .unwrap_or((self.text_with_mask.as_str(), ""))
    }
}

/// How many distinct sources an n-gram must appear in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "MinSourcesRepr", into = "MinSourcesRepr")]
pub enum MinSources {
    All,
    AtLeast(usize),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum MinSourcesRepr {
    Count(usize),
    Word(String),
}

impl TryFrom<MinSourcesRepr> for MinSources {
    type Error = String;
    fn try_from(r: MinSourcesRepr) -> Result<Self, Self::Error> {
        match r {
            MinSourcesRepr::Count(n) => Ok(MinSources::AtLeast(n)),
            MinSourcesRepr::Word(w) if w == "all" => Ok(MinSources::All),
            MinSourcesRepr::Word(w) => Err(format!("expected \"all\" or a count, got {w:?}")),
        }
    }
}

impl From<MinSources> for MinSourcesRepr {
    fn from(m: MinSources) -> Self {
        match m {
            MinSources::All => MinSourcesRepr::Word("all".into()),
            MinSources::AtLeast(n) => MinSourcesRepr::Count(n),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PromptGenConfig {
    pub rs_instance_fraction: f64,
    pub rs_word_fraction: f64,
    pub attention_confidence_threshold: f64,
    /// Layer the backend reads attention from; passed through to the service
    /// configuration, not interpreted here.
    pub attention_layer: usize,
    pub bi_min_sources: MinSources,
    pub bo_min_sources: MinSources,
    pub seed: u64,
}

impl Default for PromptGenConfig {
    fn default() -> Self {
        PromptGenConfig {
            rs_instance_fraction: 0.5,
            rs_word_fraction: 0.1,
            attention_confidence_threshold: 0.7,
            attention_layer: 12,
            bi_min_sources: MinSources::AtLeast(5),
            bo_min_sources: MinSources::All,
            seed: 42,
        }
    }
}

impl PromptGenConfig {
    pub fn validate(&self) -> Result<(), PromptError> {
        for (name, v) in [
            ("rs_instance_fraction", self.rs_instance_fraction),
            ("rs_word_fraction", self.rs_word_fraction),
            ("attention_confidence_threshold", self.attention_confidence_threshold),
        ] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(PromptError::Config(format!("{name} must be in (0, 1], got {v}")));
            }
        }
        if self.attention_layer == 0 {
            return Err(PromptError::Config("attention_layer must be positive".into()));
        }
        Ok(())
    }
}

/// `ceil(fraction * n)`, robust to representation error in the product.
pub(crate) fn ceil_fraction(fraction: f64, n: usize) -> usize {
    let x = fraction * n as f64;
    let r = x.round();
    if (x - r).abs() < 1e-9 {
        r as usize
    } else {
        x.ceil() as usize
    }
}

pub(crate) fn mask_span(
    text_in: &str,
    span: std::ops::Range<usize>,
) -> (String, String) {
    let gold = text_in[span.clone()].to_string();
    (text::replace_span(text_in, span, MASK), gold)
}

pub fn load_prompts(path: &Path) -> Result<Vec<MaskedPrompt>, PromptError> {
    Ok(jsonl::read(path, |p: &MaskedPrompt| {
        p.validate().map_err(|e| e.to_string())
    })?)
}

pub fn save_prompts(prompts: &[MaskedPrompt], path: &Path) -> Result<(), PromptError> {
    for p in prompts {
        p.validate()?;
    }
    Ok(jsonl::write(path, prompts)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ceil_fraction_is_exact_on_products() {
        assert_eq!(ceil_fraction(0.1, 10), 1);
        assert_eq!(ceil_fraction(0.1, 30), 3);
        assert_eq!(ceil_fraction(0.1, 31), 4);
        assert_eq!(ceil_fraction(0.5, 100), 50);
        assert_eq!(ceil_fraction(0.5, 7), 4);
        assert_eq!(ceil_fraction(0.1, 3), 1);
    }

    #[test]
    fn min_sources_serde() {
        let all: MinSources = serde_json::from_str("\"all\"").unwrap();
        assert_eq!(all, MinSources::All);
        let five: MinSources = serde_json::from_str("5").unwrap();
        assert_eq!(five, MinSources::AtLeast(5));
        assert!(serde_json::from_str::<MinSources>("\"most\"").is_err());
    }

    #[test]
    fn prompt_validation() {
        let mut p = MaskedPrompt {
            id: "x".into(),
            text_with_mask: format!("a {MASK} b"),
            topic: "t".into(),
            origin: Origin::Manual,
            anchor: "a".into(),
            candidates: Some(vec!["good".into(), "bad".into()]),
            gold_token: None,
        };
        p.validate().unwrap();
        assert_eq!(p.context(), ("a ", " b"));
        p.candidates = Some(vec!["good".into()]);
        assert!(p.validate().is_err());
        p.candidates = Some(vec!["good".into(), "good".into()]);
        assert!(p.validate().is_err());
        p.candidates = None;
        p.text_with_mask = "no mask".into();
        assert!(p.validate().is_err());
    }

    #[test]
    fn prompts_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.jsonl");
        let p = MaskedPrompt {
            id: "t/manual/x".into(),
            text_with_mask: format!("Is X good? {MASK}"),
            topic: "t".into(),
            origin: Origin::Manual,
            anchor: "x".into(),
            candidates: Some(QA_CANDIDATES.iter().map(|s| s.to_string()).collect()),
            gold_token: None,
        };
        save_prompts(std::slice::from_ref(&p), &path).unwrap();
        let line = std::fs::read_to_string(&path).unwrap();
        let v: serde_json::Value = serde_json::from_str(line.trim()).unwrap();
        for field in ["id", "text_with_mask", "topic", "origin", "anchor", "candidates", "gold_token"] {
            assert!(v.get(field).is_some(), "missing {field}");
        }
        assert_eq!(load_prompts(&path).unwrap(), vec![p]);
    }
}
