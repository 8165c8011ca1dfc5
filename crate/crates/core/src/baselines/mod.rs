//! Competing outlet embeddings (bag-of-n-grams, topic models, LM vectors)
//! that feed the same distance and ranking code as the framing
//! representations.

mod lda;
mod lm;
mod tfidf;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use lda::{LdaConfig, LdaEmbedding, LdaModel};
pub use lm::lm_embed_outlets;
pub use tfidf::{ngrams, TfidfEmbedding, TfidfModel};

use crate::corpus::Instance;
use crate::measurement::{
    cosine_distance, similarity_rankings, DistanceMatrix, MeasureError, SimilarityRanking,
};
use crate::scorer::ScorerError;

/// Version tag written into serialized model artifacts.
pub const ARTIFACT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum BaselineError {
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{failed} of {total} embedding calls failed (limit 10%); first error: {first}")]
    TooManyFailures {
        failed: usize,
        total: usize,
        first: ScorerError,
    },
    #[error("no embeddings for source {0}")]
    NoEmbeddings(String),
    #[error("embedding dimensions differ: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("duplicate embedding for source {0}")]
    DuplicateSource(String),
    #[error("mixed embedding methods: {0} and {1}")]
    MixedMethods(Method, Method),
    #[error(transparent)]
    Scorer(#[from] ScorerError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Tfidf,
    Lda,
    LmC,
    LmM,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Tfidf, Method::Lda, Method::LmC, Method::LmM];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Tfidf => "tfidf",
            Method::Lda => "lda",
            Method::LmC => "lm_c",
            Method::LmM => "lm_m",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = BaselineError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s || m.as_str().replace('_', "-") == s)
            .ok_or_else(|| BaselineError::Config(format!("unknown baseline method {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutletEmbedding {
    pub source: String,
    pub vector: Vec<f64>,
    pub method: Method,
}

/// Arithmetic mean of per-instance vectors for each source, sorted by source.
pub fn mean_by_source<'a, I>(
    items: I,
    method: Method,
) -> Result<Vec<OutletEmbedding>, BaselineError>
where
    I: IntoIterator<Item = (&'a str, Vec<f64>)>,
{
    let mut acc: BTreeMap<&str, (Vec<f64>, usize)> = BTreeMap::new();
    for (source, v) in items {
        let entry = acc
            .entry(source)
            .or_insert_with(|| (vec![0.0; v.len()], 0));
        if entry.0.len() != v.len() {
            return Err(BaselineError::DimensionMismatch(entry.0.len(), v.len()));
        }
        for (a, x) in entry.0.iter_mut().zip(&v) {
            *a += x;
        }
        entry.1 += 1;
    }
    let out: Vec<OutletEmbedding> = acc
        .into_iter()
        .map(|(source, (sum, n))| OutletEmbedding {
            source: source.to_string(),
            vector: sum.into_iter().map(|x| x / n as f64).collect(),
            method,
        })
        .collect();
    if let Some(first) = out.first() {
        if let Some(o) = out.iter().find(|o| o.vector.len() != first.vector.len()) {
            return Err(BaselineError::DimensionMismatch(first.vector.len(), o.vector.len()));
        }
    }
    Ok(out)
}

/// Outlet embeddings from a fitted TF-IDF model: the mean of each outlet's
/// instance vectors.
pub fn tfidf_outlet_embeddings(
    model: &TfidfModel,
    instances: &[Instance],
) -> Result<Vec<OutletEmbedding>, BaselineError> {
    let embedded = model.embed_all(instances.iter().map(|i| i.text.as_str()));
    for (inst, e) in instances.iter().zip(&embedded) {
        if e.zero {
            log::warn!("instance {} has no in-vocabulary n-grams", inst.id);
        }
    }
    mean_by_source(
        instances
            .iter()
            .zip(embedded)
            .map(|(i, e)| (i.source.as_str(), e.vector)),
        Method::Tfidf,
    )
}

pub fn lda_outlet_embeddings(
    model: &LdaModel,
    instances: &[Instance],
) -> Result<Vec<OutletEmbedding>, BaselineError> {
    let mut items = Vec::with_capacity(instances.len());
    for inst in instances {
        let e = model.embed(&inst.text);
        if e.empty {
            log::warn!("instance {} has no in-vocabulary words", inst.id);
        }
        items.push((inst.source.as_str(), e.theta));
    }
    mean_by_source(items, Method::Lda)
}

/// Cosine distances between outlet embeddings (sorted by source) and the
/// resulting similarity rankings.
pub fn baseline_rankings(
    embeddings: &[OutletEmbedding],
) -> Result<(DistanceMatrix, Vec<SimilarityRanking>), BaselineError> {
    let mut sorted: Vec<&OutletEmbedding> = embeddings.iter().collect();
    sorted.sort_by(|a, b| a.source.cmp(&b.source));
    for w in sorted.windows(2) {
        if w[0].source == w[1].source {
            return Err(BaselineError::DuplicateSource(w[0].source.clone()));
        }
        if w[0].method != w[1].method {
            return Err(BaselineError::MixedMethods(w[0].method, w[1].method));
        }
    }
    let dm = DistanceMatrix::from_fn(sorted.iter().map(|e| e.source.clone()).collect(), |i, j| {
        cosine_distance(&sorted[i].vector, &sorted[j].vector)
    })?;
    let rankings = similarity_rankings(&dm)?;
    Ok((dm, rankings))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn emb(source: &str, v: &[f64]) -> OutletEmbedding {
        OutletEmbedding {
            source: source.into(),
            vector: v.to_vec(),
            method: Method::LmC,
        }
    }

    #[test]
    fn mean_of_two_vectors() {
        let out = mean_by_source(
            vec![("a", vec![1.0, 0.0]), ("a", vec![0.0, 1.0]), ("b", vec![2.0, 2.0])],
            Method::LmM,
        )
        .unwrap();
        assert_eq!(out[0].vector, vec![0.5, 0.5]);
        assert_eq!(out[1].vector, vec![2.0, 2.0]);
        assert!(mean_by_source(vec![("a", vec![1.0]), ("b", vec![1.0, 2.0])], Method::Lda).is_err());
    }

    #[test]
    fn identical_embeddings_tie() {
        let e = [emb("a", &[1.0, 1.0]), emb("b", &[1.0, 1.0]), emb("c", &[2.0, 2.0])];
        let (dm, r) = baseline_rankings(&e).unwrap();
        assert!(dm.values.iter().flatten().all(|&d| d.abs() < 1e-12));
        assert!(r.iter().all(|r| r.tied));
    }

    #[test]
    fn three_outlet_ranking_by_hand() {
        let e = [emb("c", &[0.0, 1.0]), emb("a", &[1.0, 0.0]), emb("b", &[1.0, 1.0])];
        let (dm, r) = baseline_rankings(&e).unwrap();
        assert_eq!(dm.sources, vec!["a", "b", "c"]);
        let ab = 1.0 - 1.0 / 2f64.sqrt();
        assert!((dm.values[0][1] - ab).abs() < 1e-12);
        assert!((dm.values[0][2] - 1.0).abs() < 1e-12);
        assert_eq!(r[0].ranked, vec!["b", "c"]);
        assert_eq!(r[1].ranked, vec!["a", "c"]);
        assert!(r[1].tied);
        assert_eq!(r[2].ranked, vec!["b", "a"]);
    }

    #[test]
    fn zero_and_malformed_inputs() {
        let e = [emb("a", &[0.0, 0.0]), emb("b", &[1.0, 1.0]), emb("c", &[2.0, 1.0])];
        assert!(matches!(
            baseline_rankings(&e),
            Err(BaselineError::Measure(MeasureError::UndefinedDistance))
        ));
        let e = [emb("a", &[1.0]), emb("a", &[1.0]), emb("c", &[2.0])];
        assert!(matches!(baseline_rankings(&e), Err(BaselineError::DuplicateSource(_))));
        let mut e = vec![emb("a", &[1.0]), emb("b", &[1.0]), emb("c", &[2.0])];
        e[2].method = Method::Tfidf;
        assert!(matches!(baseline_rankings(&e), Err(BaselineError::MixedMethods(..))));
    }

    #[test]
    fn method_names() {
        for m in Method::ALL {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
            assert_eq!(serde_json::to_value(m).unwrap(), m.as_str());
        }
        assert_eq!("lm-c".parse::<Method>().unwrap(), Method::LmC);
    }
}
