//! Corpus ingestion: paragraph splitting, stratified train/dev partition and
//! the line-delimited instances file.

use std::collections::BTreeMap;
use std::ops::Range;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::jsonl::{self, JsonlError};
use crate::text;

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("empty paragraph")]
    EmptyParagraph,
    #[error("instance {0} has empty text")]
    EmptyInstance(String),
    #[error("no instances to partition")]
    NoInstances,
    #[error("dev_fraction must be in (0, 1), got {0}")]
    BadDevFraction(f64),
    #[error("max_words must be positive")]
    BadMaxWords,
    #[error(transparent)]
    Jsonl(#[from] JsonlError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// One bounded-length text unit labeled with its source and topic.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "InstanceRecord", into = "InstanceRecord")]
pub struct Instance {
    pub id: String,
    pub text: String,
    pub source: String,
    pub topic: String,
    pub word_count: usize,
}

#[derive(Serialize, Deserialize)]
struct InstanceRecord {
    id: String,
    text: String,
    source: String,
    topic: String,
}

impl TryFrom<InstanceRecord> for Instance {
    type Error = CorpusError;
    fn try_from(r: InstanceRecord) -> Result<Self, Self::Error> {
        Instance::new(r.id, r.text, r.source, r.topic)
    }
}

impl From<Instance> for InstanceRecord {
    fn from(i: Instance) -> Self {
        InstanceRecord {
            id: i.id,
            text: i.text,
            source: i.source,
            topic: i.topic,
        }
    }
}

impl Instance {
    pub fn new(
        id: impl Into<String>,
        text: impl Into<String>,
        source: impl Into<String>,
        topic: impl Into<String>,
    ) -> Result<Self, CorpusError> {
        let id = id.into();
        let text = text.into();
        if text.trim().is_empty() {
            return Err(CorpusError::EmptyInstance(id));
        }
        Ok(Instance {
            word_count: text::word_count(&text),
            id,
            text,
            source: source.into(),
            topic: topic.into(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusConfig {
    pub max_words: usize,
    pub dev_fraction: f64,
    pub split_seed: u64,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig {
            max_words: 256,
            dev_fraction: 0.10,
            split_seed: 42,
        }
    }
}

impl CorpusConfig {
    pub fn validate(&self) -> Result<(), CorpusError> {
        if self.max_words == 0 {
            return Err(CorpusError::BadMaxWords);
        }
        if !(self.dev_fraction > 0.0 && self.dev_fraction < 1.0) {
            return Err(CorpusError::BadDevFraction(self.dev_fraction));
        }
        Ok(())
    }
}

/// A piece of a paragraph produced by [`split_paragraph`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Chunk {
    pub text: String,
    pub word_count: usize,
    /// Set when the chunk is a single sentence longer than `max_words`.
    pub overlength: bool,
}

fn is_terminal(c: char) -> bool {
    matches!(c, '.' | '!' | '?')
}

/// Byte spans of the sentences in `text`, trimmed of surrounding whitespace.
///
/// A sentence ends at a run of `.`, `!` or `?` that is followed either by the
/// end of the text or by whitespace and an uppercase letter.
pub fn sentence_spans(text: &str) -> Vec<Range<usize>> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut spans = Vec::new();
    let mut start: Option<usize> = None;
    let mut i = 0;
    while i < chars.len() {
        let (pos, c) = chars[i];
        if start.is_none() {
            if c.is_whitespace() {
                i += 1;
                continue;
            }
            start = Some(pos);
        }
        if !is_terminal(c) {
            i += 1;
            continue;
        }
        let mut j = i;
        while j + 1 < chars.len() && is_terminal(chars[j + 1].1) {
            j += 1;
        }
        let end = chars[j].0 + chars[j].1.len_utf8();
        let mut k = j + 1;
        while k < chars.len() && chars[k].1.is_whitespace() {
            k += 1;
        }
        let boundary = k == chars.len() || (k > j + 1 && chars[k].1.is_uppercase());
        if boundary {
            spans.push(start.take().unwrap_or(pos)..end);
            i = k;
        } else {
            i = j + 1;
        }
    }
    if let Some(s) = start {
        let end = text.trim_end().len();
        if end > s {
            spans.push(s..end);
        }
    }
    spans
}

/// Split a paragraph into chunks of at most `max_words` words by greedily
/// packing whole sentences. A paragraph already within the limit is returned
/// unchanged; a single sentence over the limit is kept whole and flagged.
pub fn split_paragraph(paragraph: &str, config: &CorpusConfig) -> Result<Vec<Chunk>, CorpusError> {
    config.validate()?;
    if paragraph.trim().is_empty() {
        return Err(CorpusError::EmptyParagraph);
    }
    let total = text::word_count(paragraph);
    if total <= config.max_words {
        return Ok(vec![Chunk {
            text: paragraph.to_string(),
            word_count: total,
            overlength: false,
        }]);
    }

    let sentences: Vec<(Range<usize>, usize)> = sentence_spans(paragraph)
        .into_iter()
        .map(|s| {
            let wc = text::word_count(&paragraph[s.clone()]);
            (s, wc)
        })
        .collect();

    let mut chunks = Vec::new();
    // (first sentence start, last sentence end, words, sentences)
    let mut current: Option<(usize, usize, usize, usize)> = None;
    let flush = |cur: (usize, usize, usize, usize), chunks: &mut Vec<Chunk>| {
        let (s, e, wc, n) = cur;
        chunks.push(Chunk {
            text: paragraph[s..e].to_string(),
            word_count: wc,
            overlength: n == 1 && wc > config.max_words,
        });
    };
    for (span, wc) in sentences {
        current = match current {
            Some((s, _, cur_wc, n)) if cur_wc + wc <= config.max_words => {
                Some((s, span.end, cur_wc + wc, n + 1))
            }
            Some(cur) => {
                flush(cur, &mut chunks);
                Some((span.start, span.end, wc, 1))
            }
            None => Some((span.start, span.end, wc, 1)),
        };
    }
    if let Some(cur) = current {
        flush(cur, &mut chunks);
    }
    Ok(chunks)
}

/// Result of [`partition`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Partition {
    pub train: Vec<Instance>,
    pub dev: Vec<Instance>,
    pub warnings: Vec<String>,
}

/// Stratified, seeded train/dev split.
///
/// The total dev size is `round(dev_fraction * n)`; it is apportioned over
/// the (source, topic) strata by largest remainder of `dev_fraction * n_s`
/// (ties go to the lexicographically smaller stratum), never taking the last
/// training instance of a stratum. Strata with fewer than two instances go to
/// train with a warning. Both outputs keep the input order.
pub fn partition(instances: &[Instance], config: &CorpusConfig) -> Result<Partition, CorpusError> {
    config.validate()?;
    if instances.is_empty() {
        return Err(CorpusError::NoInstances);
    }
    let mut strata: BTreeMap<(&str, &str), Vec<usize>> = BTreeMap::new();
    for (i, inst) in instances.iter().enumerate() {
        strata
            .entry((inst.source.as_str(), inst.topic.as_str()))
            .or_default()
            .push(i);
    }

    let mut warnings = Vec::new();
    let target = (config.dev_fraction * instances.len() as f64).round() as usize;
    let mut quotas: Vec<((&str, &str), usize, f64, usize)> = Vec::new();
    for (key, members) in &strata {
        if members.len() < 2 {
            warnings.push(format!(
                "stratum (source={}, topic={}) has {} instance(s); all assigned to train",
                key.0,
                key.1,
                members.len()
            ));
            continue;
        }
        let exact = config.dev_fraction * members.len() as f64;
        let cap = members.len() - 1;
        let base = (exact.floor() as usize).min(cap);
        quotas.push((*key, base, exact - base as f64, cap));
    }
    let capacity: usize = quotas.iter().map(|q| q.3).sum();
    let mut remaining = target
        .min(capacity)
        .saturating_sub(quotas.iter().map(|q| q.1).sum());
    let mut order: Vec<usize> = (0..quotas.len()).collect();
    order.sort_by(|&a, &b| {
        quotas[b]
            .2
            .partial_cmp(&quotas[a].2)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| quotas[a].0.cmp(&quotas[b].0))
    });
    while remaining > 0 {
        let before = remaining;
        for &q in &order {
            if remaining == 0 {
                break;
            }
            if quotas[q].1 < quotas[q].3 {
                quotas[q].1 += 1;
                remaining -= 1;
            }
        }
        if before == remaining {
            break;
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.split_seed);
    let mut is_dev = vec![false; instances.len()];
    for (key, dev_n, _, _) in &quotas {
        let mut members = strata[key].clone();
        members.shuffle(&mut rng);
        for &i in members.iter().take(*dev_n) {
            is_dev[i] = true;
        }
    }
    let mut out = Partition {
        warnings,
        ..Default::default()
    };
    for (inst, dev) in instances.iter().zip(is_dev) {
        if dev {
            out.dev.push(inst.clone());
        } else {
            out.train.push(inst.clone());
        }
    }
    for w in &out.warnings {
        log::warn!("{w}");
    }
    Ok(out)
}

pub fn load_instances(path: &Path) -> Result<Vec<Instance>, CorpusError> {
    Ok(jsonl::read(path, |_: &Instance| Ok(()))?)
}

pub fn save_instances(instances: &[Instance], path: &Path) -> Result<(), CorpusError> {
    Ok(jsonl::write(path, instances)?)
}

/// Summary of an ingest run.
#[derive(Debug, Clone, Default)]
pub struct Ingested {
    pub instances: Vec<Instance>,
    pub overlength: Vec<String>,
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>, CorpusError> {
    let io_err = |source| CorpusError::Io {
        path: dir.to_path_buf(),
        source,
    };
    let mut entries = std::fs::read_dir(dir)
        .map_err(io_err)?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<Vec<_>, _>>()
        .map_err(io_err)?;
    entries.sort();
    Ok(entries)
}

/// Split an article into paragraphs on blank lines.
pub fn paragraphs(article: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut current: Vec<&str> = Vec::new();
    for line in article.lines() {
        if line.trim().is_empty() {
            if !current.is_empty() {
                out.push(current.join("\n"));
                current.clear();
            }
        } else {
            current.push(line.trim_end());
        }
    }
    if !current.is_empty() {
        out.push(current.join("\n"));
    }
    out
}

/// Read a `<topic>/<source>/*.txt` tree into instances, one article per file.
pub fn ingest_tree(root: &Path, config: &CorpusConfig) -> Result<Ingested, CorpusError> {
    config.validate()?;
    let mut out = Ingested::default();
    for topic_dir in sorted_entries(root)?.into_iter().filter(|p| p.is_dir()) {
        let topic = file_name(&topic_dir);
        for source_dir in sorted_entries(&topic_dir)?.into_iter().filter(|p| p.is_dir()) {
            let source = file_name(&source_dir);
            for file in sorted_entries(&source_dir)? {
                if file.extension().and_then(|e| e.to_str()) != Some("txt") {
                    continue;
                }
                let article = std::fs::read_to_string(&file).map_err(|source| CorpusError::Io {
                    path: file.clone(),
                    source,
                })?;
                let stem = file
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_default();
                for (p, para) in paragraphs(&article).iter().enumerate() {
                    for (c, chunk) in split_paragraph(para, config)?.into_iter().enumerate() {
                        let id = format!("{topic}/{source}/{stem}/{p}.{c}");
                        if chunk.overlength {
                            out.overlength.push(id.clone());
                        }
                        out.instances
                            .push(Instance::new(id, chunk.text, source.clone(), topic.clone())?);
                    }
                }
            }
        }
    }
    Ok(out)
}

fn file_name(p: &Path) -> String {
    p.file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}
