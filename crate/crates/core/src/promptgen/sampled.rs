use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{ceil_fraction, mask_span, MaskedPrompt, Origin, PromptError, PromptGenConfig};
use crate::corpus::Instance;
use crate::scorer::{bounded_map, ModelId, Scorer, DEFAULT_MAX_IN_FLIGHT};
use crate::text;

fn word_prompt(inst: &Instance, origin: Origin, word_idx: usize, word: &text::Word) -> MaskedPrompt {
    let (text_with_mask, gold) = mask_span(&inst.text, word.mask_span());
    MaskedPrompt {
        id: format!("{}/{}/{}#{}", inst.topic, origin, inst.id, word_idx),
        text_with_mask,
        topic: inst.topic.clone(),
        origin,
        anchor: format!("word:{word_idx}"),
        candidates: None,
        gold_token: Some(gold),
    }
}

/// Random masking: pick `ceil(rs_instance_fraction * n)` instances, and in
/// each mask `ceil(rs_word_fraction * words)` distinct words, one prompt per
/// masked word. Instances without words are skipped.
pub fn generate_random(
    instances: &[Instance],
    config: &PromptGenConfig,
) -> Result<Vec<MaskedPrompt>, PromptError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let take = ceil_fraction(config.rs_instance_fraction, instances.len()).min(instances.len());
    let mut chosen = index::sample(&mut rng, instances.len(), take).into_vec();
    chosen.sort_unstable();
    let mut out = Vec::new();
    for i in chosen {
        let inst = &instances[i];
        let words = text::words(&inst.text);
        if words.is_empty() {
            continue;
        }
        let m = ceil_fraction(config.rs_word_fraction, words.len()).min(words.len());
        let mut positions = index::sample(&mut rng, words.len(), m).into_vec();
        positions.sort_unstable();
        out.extend(
            positions
                .into_iter()
                .map(|p| word_prompt(inst, Origin::Random, p, &words[p])),
        );
    }
    Ok(out)
}

/// Index of the first maximum.
pub(crate) fn first_argmax(xs: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &x) in xs.iter().enumerate() {
        match best {
            Some(b) if xs[b] >= x => {}
            _ => best = Some(i),
        }
    }
    best
}

/// Attention masking: keep instances the classifier attributes to their true
/// source with confidence above the threshold, then mask the word with the
/// highest importance (earliest on ties).
pub fn generate_attention(
    instances: &[Instance],
    backend: &dyn Scorer,
    classifier: &ModelId,
    config: &PromptGenConfig,
) -> Result<Vec<MaskedPrompt>, PromptError> {
    config.validate()?;
    let responses = bounded_map(instances, DEFAULT_MAX_IN_FLIGHT, |inst| {
        backend.token_importance(classifier, &inst.text, &inst.source)
    });
    let mut out = Vec::new();
    for (inst, resp) in instances.iter().zip(responses) {
        let imp = resp?;
        if imp.predicted_source != inst.source
            || imp.confidence <= config.attention_confidence_threshold
        {
            continue;
        }
        let words = text::words(&inst.text);
        if let Some(w) = first_argmax(&imp.word_scores()) {
            out.push(word_prompt(inst, Origin::Attention, w, &words[w]));
        }
    }
    Ok(out)
}
