use std::collections::{BTreeMap, BTreeSet, HashSet};

use super::{mask_span, MaskedPrompt, MinSources, Origin, PromptError};
use crate::corpus::Instance;
use crate::text::{self, Token};

/// Shared n-grams as lowercased token sequences.
pub type NgramSet = HashSet<Vec<String>>;

/// N-grams (n = 2 or 3) that occur in the dev sets of at least `min_sources`
/// distinct sources, sorted lexicographically.
pub fn extract_shared_ngrams(
    dev_sets: &BTreeMap<String, Vec<Instance>>,
    n: usize,
    min_sources: MinSources,
) -> Result<Vec<Vec<String>>, PromptError> {
    if n != 2 && n != 3 {
        return Err(PromptError::BadNgramLength(n));
    }
    let available = dev_sets.len();
    let required = match min_sources {
        MinSources::All => available,
        MinSources::AtLeast(k) => k,
    };
    if required == 0 || required > available {
        return Err(PromptError::TooFewSources {
            required: required.max(1),
            available,
        });
    }
    let mut counts: BTreeMap<Vec<String>, usize> = BTreeMap::new();
    for instances in dev_sets.values() {
        let mut seen: BTreeSet<Vec<String>> = BTreeSet::new();
        for inst in instances {
            let toks = text::token_strings(&inst.text);
            for w in toks.windows(n) {
                seen.insert(w.to_vec());
            }
        }
        for g in seen {
            *counts.entry(g).or_default() += 1;
        }
    }
    Ok(counts
        .into_iter()
        .filter(|(_, c)| *c >= required)
        .map(|(g, _)| g)
        .collect())
}

fn occurrences<'a>(
    toks: &'a [Token],
    shared: &'a NgramSet,
    n: usize,
) -> impl Iterator<Item = usize> + 'a {
    (0..toks.len().saturating_sub(n - 1)).filter(move |&i| {
        let gram: Vec<String> = toks[i..i + n].iter().map(|t| t.text.clone()).collect();
        shared.contains(&gram)
    })
}

fn anchor(toks: &[Token]) -> String {
    toks.iter()
        .map(|t| t.text.as_str())
        .collect::<Vec<_>>()
        .join(" ")
}

fn prompt(
    inst: &Instance,
    origin: Origin,
    seq: usize,
    anchor: String,
    masked: &Token,
) -> MaskedPrompt {
    let (text_with_mask, gold) = mask_span(&inst.text, masked.span.clone());
    MaskedPrompt {
        id: format!("{}/{}/{}#{}", inst.topic, origin, inst.id, seq),
        text_with_mask,
        topic: inst.topic.clone(),
        origin,
        anchor,
        candidates: None,
        gold_token: Some(gold),
    }
}

/// For every occurrence of a shared bigram, mask the token before it and the
/// token after it (when they exist).
pub fn generate_bigram_outer(inst: &Instance, shared_bigrams: &NgramSet) -> Vec<MaskedPrompt> {
    let toks = text::tokens(&inst.text);
    let mut out = Vec::new();
    for i in occurrences(&toks, shared_bigrams, 2) {
        let a = anchor(&toks[i..i + 2]);
        if i > 0 {
            out.push(prompt(inst, Origin::BigramOuter, out.len(), a.clone(), &toks[i - 1]));
        }
        if i + 2 < toks.len() {
            out.push(prompt(inst, Origin::BigramOuter, out.len(), a, &toks[i + 2]));
        }
    }
    out
}

/// For every occurrence of a shared n-gram, one prompt per position inside it.
pub fn generate_ngram_inner(inst: &Instance, shared: &NgramSet, n: usize) -> Vec<MaskedPrompt> {
    let origin = if n == 3 {
        Origin::TrigramInner
    } else {
        Origin::BigramInner
    };
    let toks = text::tokens(&inst.text);
    let mut out = Vec::new();
    for i in occurrences(&toks, shared, n) {
        let a = anchor(&toks[i..i + n]);
        for tok in &toks[i..i + n] {
            out.push(prompt(inst, origin, out.len(), a.clone(), tok));
        }
    }
    out
}

pub fn generate_bigram_inner(inst: &Instance, shared_bigrams: &NgramSet) -> Vec<MaskedPrompt> {
    generate_ngram_inner(inst, shared_bigrams, 2)
}

pub fn generate_trigram_inner(inst: &Instance, shared_trigrams: &NgramSet) -> Vec<MaskedPrompt> {
    generate_ngram_inner(inst, shared_trigrams, 3)
}
