//! Hand-written prompt patterns.
//!
//! | structure          | surface form        |
//! |--------------------|---------------------|
//! | `declarative`      | `Topic is Slot.`    |
//! | `interrogative`    | `Is Topic Slot?`    |
//! | `association_post` | `Topic Slot.`       |
//! | `association_pre`  | `Slot Topic.`       |
//!
//! In `single` mode the slot word is masked and the answer is restricted to an
//! antonym pair. In `qa` mode the slot is filled and a mask is appended after
//! the sentence, answered from [`QA_CANDIDATES`].

use serde::{Deserialize, Serialize};

use super::{MaskedPrompt, Origin, PromptError};
use crate::scorer::MASK;
use crate::text::sentence_case;

pub const QA_CANDIDATES: [&str; 5] = ["Yes", "True", "Maybe", "No", "False"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Structure {
    Declarative,
    Interrogative,
    AssociationPost,
    AssociationPre,
}

impl Structure {
    pub const ALL: [Structure; 4] = [
        Structure::Declarative,
        Structure::Interrogative,
        Structure::AssociationPost,
        Structure::AssociationPre,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Structure::Declarative => "declarative",
            Structure::Interrogative => "interrogative",
            Structure::AssociationPost => "association_post",
            Structure::AssociationPre => "association_pre",
        }
    }

    /// Reporting group: both association orders pool together.
    pub fn family(self) -> &'static str {
        match self {
            Structure::AssociationPost | Structure::AssociationPre => "association",
            other => other.as_str(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnswerMode {
    Qa,
    Single,
}

impl AnswerMode {
    pub fn as_str(self) -> &'static str {
        match self {
            AnswerMode::Qa => "qa",
            AnswerMode::Single => "single",
        }
    }
}

/// One manual prompt before expansion.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManualTemplate {
    pub topic: String,
    pub topic_term: String,
    pub structure: Structure,
    pub answer_mode: AnswerMode,
    /// Indefinite article for noun slots.
    #[serde(default)]
    pub article: Option<String>,
    /// The filled slot in `qa` mode.
    #[serde(default)]
    pub slot_word: Option<String>,
    /// The answer pair in `single` mode.
    #[serde(default)]
    pub antonyms: Option<(String, String)>,
}

impl ManualTemplate {
    /// `structure/mode/term/slot`, lowercased with spaces as dashes.
    pub fn id(&self) -> String {
        let slot = match (self.answer_mode, &self.antonyms, &self.slot_word) {
            (AnswerMode::Single, Some((a, b)), _) => format!("{a}-{b}"),
            (_, _, Some(w)) => w.clone(),
            _ => "?".into(),
        };
        let slug = |s: &str| s.trim().to_lowercase().replace(char::is_whitespace, "-");
        format!(
            "{}/{}/{}/{}",
            self.structure.as_str(),
            self.answer_mode.as_str(),
            slug(&self.topic_term),
            slug(&slot)
        )
    }

    pub fn expand(&self) -> Result<MaskedPrompt, PromptError> {
        let id = self.id();
        let with_article = |w: &str| match &self.article {
            Some(a) => format!("{a} {w}"),
            None => w.to_string(),
        };
        let at_start = self.structure == Structure::AssociationPre;
        let (slot, candidates) = match self.answer_mode {
            AnswerMode::Single => {
                let (a, b) = self
                    .antonyms
                    .as_ref()
                    .ok_or_else(|| PromptError::MissingAntonyms(id.clone()))?;
                // A sentence-initial bare mask takes capitalized answers.
                let cap = at_start && self.article.is_none();
                let fix = |w: &str| if cap { sentence_case(w) } else { w.to_string() };
                (with_article(MASK), vec![fix(a), fix(b)])
            }
            AnswerMode::Qa => {
                let w = self
                    .slot_word
                    .as_deref()
                    .ok_or_else(|| PromptError::MissingSlotWord(id.clone()))?;
                (
                    with_article(w),
                    QA_CANDIDATES.iter().map(|s| s.to_string()).collect(),
                )
            }
        };
        let term = self.topic_term.trim();
        let sentence = match self.structure {
            Structure::Declarative => format!("{} is {slot}.", sentence_case(term)),
            Structure::Interrogative => format!("Is {term} {slot}?"),
            Structure::AssociationPost => format!("{} {slot}.", sentence_case(term)),
            Structure::AssociationPre => format!("{} {term}.", sentence_case(&slot)),
        };
        let text_with_mask = match self.answer_mode {
            AnswerMode::Single => sentence,
            AnswerMode::Qa => format!("{sentence} {MASK}"),
        };
        let p = MaskedPrompt {
            id: format!("{}/manual/{id}", self.topic),
            text_with_mask,
            topic: self.topic.clone(),
            origin: Origin::Manual,
            anchor: id,
            candidates: Some(candidates),
            gold_token: None,
        };
        p.validate()?;
        Ok(p)
    }
}

pub fn expand_manual_templates(templates: &[ManualTemplate]) -> Result<Vec<MaskedPrompt>, PromptError> {
    templates.iter().map(ManualTemplate::expand).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NounPair {
    pub article: String,
    pub pair: (String, String),
}

/// Template inventory for one topic; expands to the cross product of terms,
/// structures, answer modes and slot pairs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopicTemplates {
    pub topic: String,
    pub terms: Vec<String>,
    #[serde(default)]
    pub adjectives: Vec<(String, String)>,
    #[serde(default)]
    pub nouns: Vec<NounPair>,
    #[serde(default = "all_structures")]
    pub structures: Vec<Structure>,
    #[serde(default = "all_modes")]
    pub answer_modes: Vec<AnswerMode>,
}

fn all_structures() -> Vec<Structure> {
    Structure::ALL.to_vec()
}

fn all_modes() -> Vec<AnswerMode> {
    vec![AnswerMode::Qa, AnswerMode::Single]
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemplateSet {
    #[serde(default, rename = "topic")]
    pub topics: Vec<TopicTemplates>,
}

impl TemplateSet {
    /// An illustrative inventory of attitude pairs. It is a starting point for
    /// experiments, not a published list.
    pub fn default_for(topic: &str, terms: &[&str]) -> TemplateSet {
        let pair = |a: &str, b: &str| (a.to_string(), b.to_string());
        TemplateSet {
            topics: vec![TopicTemplates {
                topic: topic.to_string(),
                terms: terms.iter().map(|s| s.to_string()).collect(),
                adjectives: vec![
                    pair("good", "bad"),
                    pair("right", "wrong"),
                    pair("fair", "unfair"),
                    pair("helpful", "harmful"),
                ],
                nouns: vec![
                    NounPair {
                        article: "a".into(),
                        pair: pair("success", "failure"),
                    },
                    NounPair {
                        article: "a".into(),
                        pair: pair("benefit", "burden"),
                    },
                ],
                structures: all_structures(),
                answer_modes: all_modes(),
            }],
        }
    }

    pub fn for_topic(&self, topic: &str) -> Option<&TopicTemplates> {
        self.topics.iter().find(|t| t.topic == topic)
    }

    pub fn templates(&self, topic: &str) -> Vec<ManualTemplate> {
        let Some(t) = self.for_topic(topic) else {
            return Vec::new();
        };
        let slots: Vec<(Option<String>, (String, String))> = t
            .adjectives
            .iter()
            .map(|p| (None, p.clone()))
            .chain(t.nouns.iter().map(|n| (Some(n.article.clone()), n.pair.clone())))
            .collect();
        let mut out = Vec::new();
        for term in &t.terms {
            for &structure in &t.structures {
                for &answer_mode in &t.answer_modes {
                    for (article, (a, b)) in &slots {
                        let base = ManualTemplate {
                            topic: t.topic.clone(),
                            topic_term: term.clone(),
                            structure,
                            answer_mode,
                            article: article.clone(),
                            slot_word: None,
                            antonyms: None,
                        };
                        match answer_mode {
                            AnswerMode::Single => out.push(ManualTemplate {
                                antonyms: Some((a.clone(), b.clone())),
                                ..base
                            }),
                            AnswerMode::Qa => {
                                for w in [a, b] {
                                    out.push(ManualTemplate {
                                        slot_word: Some(w.clone()),
                                        ..base.clone()
                                    });
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tpl(structure: Structure, mode: AnswerMode) -> ManualTemplate {
        ManualTemplate {
            topic: "aca".into(),
            topic_term: "Obamacare".into(),
            structure,
            answer_mode: mode,
            article: None,
            slot_word: Some("good".into()),
            antonyms: Some(("good".into(), "bad".into())),
        }
    }

    #[test]
    fn declarative_single() {
        let p = tpl(Structure::Declarative, AnswerMode::Single).expand().unwrap();
        assert_eq!(p.text_with_mask, "Obamacare is ___MASK___.");
        assert_eq!(p.candidates, Some(vec!["good".into(), "bad".into()]));
        assert_eq!(p.origin, Origin::Manual);
    }

    #[test]
    fn interrogative_qa() {
        let p = tpl(Structure::Interrogative, AnswerMode::Qa).expand().unwrap();
        assert_eq!(p.text_with_mask, "Is Obamacare good? ___MASK___");
        assert_eq!(
            p.candidates.unwrap(),
            vec!["Yes", "True", "Maybe", "No", "False"]
        );
    }

    #[test]
    fn association_patterns() {
        let pre = tpl(Structure::AssociationPre, AnswerMode::Qa).expand().unwrap();
        assert_eq!(pre.text_with_mask, "Good Obamacare. ___MASK___");
        let post = tpl(Structure::AssociationPost, AnswerMode::Qa).expand().unwrap();
        assert_eq!(post.text_with_mask, "Obamacare good. ___MASK___");
        let pre_single = tpl(Structure::AssociationPre, AnswerMode::Single).expand().unwrap();
        assert_eq!(pre_single.text_with_mask, "___MASK___ Obamacare.");
        assert_eq!(pre_single.candidates, Some(vec!["Good".into(), "Bad".into()]));
    }

    #[test]
    fn noun_slots_keep_article() {
        let mut t = tpl(Structure::Declarative, AnswerMode::Single);
        t.article = Some("a".into());
        t.antonyms = Some(("success".into(), "failure".into()));
        assert_eq!(t.expand().unwrap().text_with_mask, "Obamacare is a ___MASK___.");
        t.structure = Structure::AssociationPre;
        let p = t.expand().unwrap();
        assert_eq!(p.text_with_mask, "A ___MASK___ Obamacare.");
        assert_eq!(p.candidates, Some(vec!["success".into(), "failure".into()]));
    }

    #[test]
    fn single_mode_requires_pair() {
        let mut t = tpl(Structure::Declarative, AnswerMode::Single);
        t.antonyms = None;
        assert!(matches!(t.expand(), Err(PromptError::MissingAntonyms(_))));
    }

    #[test]
    fn template_set_expansion_counts() {
        let set = TemplateSet::default_for("aca", &["Obamacare"]);
        let ts = set.templates("aca");
        // 4 structures x (qa: 6 pairs x 2 words + single: 6 pairs)
        assert_eq!(ts.len(), 4 * (12 + 6));
        let ps = expand_manual_templates(&ts).unwrap();
        for p in &ps {
            let n = p.candidates.as_ref().unwrap().len();
            if p.anchor.contains("/qa/") {
                assert_eq!(n, 5);
            } else {
                assert_eq!(n, 2);
            }
        }
        let ids: std::collections::HashSet<_> = ps.iter().map(|p| &p.id).collect();
        assert_eq!(ids.len(), ps.len());
        assert!(set.templates("other").is_empty());
    }
}
